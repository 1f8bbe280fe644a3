//! Seeded k-means and fraction-of-variance-explained k selection.
//!
//! Lloyd's algorithm with k-means++ initialization, multiple restarts keeping
//! the best objective
//!
//! ```text
//! L = Σ_{i=1}^{k} Σ_{x ∈ S_i} ||x − c_i||²
//! ```
//!
//! and the incremental k-selection loop: try k = 2, 3, ... and stop at the
//! first k whose fraction of variance explained
//!
//! ```text
//! σ_k = Σ_i n_i·(c_i − μ)ᵀ(c_i − μ) / Σ_i (x_i − μ)ᵀ(x_i − μ)
//! ```
//!
//! exceeds the configured threshold. Everything is deterministic given the
//! seed: restart r of a fit draws from the derived seed for stream r, ties
//! on the objective keep the lowest restart index, and ties in assignment
//! keep the lowest cluster index.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{squared_distance, Matrix};
use crate::seed;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansConfig {
    pub max_iterations: usize,
    pub seed: u64,
    /// Independent k-means++ runs; the lowest objective wins.
    pub restarts: usize,
    /// When positive, clusters smaller than this are merged into their
    /// nearest neighbor after convergence (decrementing k). Off by default:
    /// small calibration groups are instead handled downstream by the
    /// min(1,·) quantile clamp.
    pub min_cluster_size: usize,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        KMeansConfig {
            max_iterations: 100,
            seed: 0,
            restarts: 5,
            min_cluster_size: 0,
        }
    }
}

impl KMeansConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::InvalidConfig("max_iterations must be ≥ 1".to_string()));
        }
        if self.restarts == 0 {
            return Err(Error::InvalidConfig("restarts must be ≥ 1".to_string()));
        }
        Ok(())
    }
}

/// Fitted k-means model plus diagnostics.
///
/// After a converged fit every point is assigned to its nearest centroid
/// (ties to the lowest index) and each centroid is the exact mean of its
/// members. When `min_cluster_size` merging was applied, merged points keep
/// their merged assignment, which may no longer be the nearest centroid.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusteringModel {
    pub centroids: Vec<Vec<f64>>,
    pub assignments: Vec<usize>,
    pub cluster_sizes: Vec<usize>,
    pub global_mean: Vec<f64>,
    pub variance_explained: f64,
    pub objective: f64,
    /// Objective after every Lloyd iteration, one trace per restart.
    pub objective_traces: Vec<Vec<f64>>,
}

impl ClusteringModel {
    pub fn k(&self) -> usize {
        self.centroids.len()
    }
}

/// Index of the nearest centroid to `x`; ties keep the lowest index.
fn nearest(x: &[f64], centroids: &[Vec<f64>]) -> usize {
    let mut best = 0;
    let mut best_d = squared_distance(x, &centroids[0]);
    for (j, c) in centroids.iter().enumerate().skip(1) {
        let d = squared_distance(x, c);
        if d < best_d {
            best = j;
            best_d = d;
        }
    }
    best
}

fn objective_value(points: &Matrix, centroids: &[Vec<f64>], assignments: &[usize]) -> f64 {
    let mut total = 0.0;
    for (i, &a) in assignments.iter().enumerate() {
        total += squared_distance(points.row(i), &centroids[a]);
    }
    total
}

/// Column means of `points`, accumulated in row order.
fn mean_point(points: &Matrix) -> Vec<f64> {
    let n = points.n_rows();
    let d = points.n_cols();
    let mut mu = vec![0.0; d];
    for i in 0..n {
        for (j, m) in mu.iter_mut().enumerate() {
            *m += points.get(i, j);
        }
    }
    for m in &mut mu {
        *m /= n as f64;
    }
    mu
}

/// k-means++ seeding: first centroid uniform, then each next point sampled
/// with probability proportional to its squared distance to the nearest
/// chosen centroid.
fn init_plus_plus(points: &Matrix, k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = points.n_rows();
    let mut centroids = Vec::with_capacity(k);
    centroids.push(points.row(rng.random_range(0..n)).to_vec());
    let mut d2 = vec![0.0; n];
    while centroids.len() < k {
        let mut total = 0.0;
        for i in 0..n {
            let d = centroids
                .iter()
                .map(|c| squared_distance(points.row(i), c))
                .fold(f64::INFINITY, f64::min);
            d2[i] = d;
            total += d;
        }
        let chosen = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut cum = 0.0;
            let mut idx = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                cum += w;
                if cum > target {
                    idx = i;
                    break;
                }
            }
            idx
        } else {
            // every point coincides with a centroid already
            rng.random_range(0..n)
        };
        centroids.push(points.row(chosen).to_vec());
    }
    centroids
}

/// Reassigns the globally farthest point (from its own centroid, among
/// clusters that can spare one) to each empty cluster and parks the centroid
/// on it. The moved point's cost drops to zero and no other term changes, so
/// the objective never increases.
fn repair_empty(
    points: &Matrix,
    centroids: &mut [Vec<f64>],
    assignments: &mut [usize],
    sizes: &mut [usize],
) {
    loop {
        let Some(empty) = sizes.iter().position(|&s| s == 0) else {
            return;
        };
        let mut donor: Option<(usize, f64)> = None;
        for (i, &a) in assignments.iter().enumerate() {
            if sizes[a] < 2 {
                continue;
            }
            let d = squared_distance(points.row(i), &centroids[a]);
            if donor.is_none_or(|(_, best)| d > best) {
                donor = Some((i, d));
            }
        }
        let (idx, _) = donor.expect("some cluster has ≥ 2 points when another is empty");
        sizes[assignments[idx]] -= 1;
        assignments[idx] = empty;
        sizes[empty] = 1;
        centroids[empty] = points.row(idx).to_vec();
    }
}

struct LloydRun {
    centroids: Vec<Vec<f64>>,
    assignments: Vec<usize>,
    objective: f64,
    trace: Vec<f64>,
}

fn run_lloyd(points: &Matrix, k: usize, max_iterations: usize, run_seed: u64) -> LloydRun {
    let n = points.n_rows();
    let d = points.n_cols();
    let mut rng = ChaCha8Rng::seed_from_u64(run_seed);
    let mut centroids = init_plus_plus(points, k, &mut rng);
    let mut assignments = vec![usize::MAX; n];
    let mut sizes = vec![0usize; k];
    let mut trace = Vec::new();

    for _ in 0..max_iterations {
        let prev = assignments.clone();
        sizes.iter_mut().for_each(|s| *s = 0);
        for i in 0..n {
            let a = nearest(points.row(i), &centroids);
            assignments[i] = a;
            sizes[a] += 1;
        }
        repair_empty(points, &mut centroids, &mut assignments, &mut sizes);
        trace.push(objective_value(points, &centroids, &assignments));
        if assignments == prev {
            break;
        }
        // update step: centroid ← mean of its members, accumulated in row order
        for c in centroids.iter_mut() {
            c.iter_mut().for_each(|v| *v = 0.0);
        }
        for (i, &a) in assignments.iter().enumerate() {
            let row = points.row(i);
            for j in 0..d {
                centroids[a][j] += row[j];
            }
        }
        for (c, &s) in centroids.iter_mut().zip(sizes.iter()) {
            c.iter_mut().for_each(|v| *v /= s as f64);
        }
    }

    let objective = *trace.last().expect("max_iterations ≥ 1");
    LloydRun {
        centroids,
        assignments,
        objective,
        trace,
    }
}

/// Fits k-means on `points`; best of `cfg.restarts` seeded runs by objective.
pub fn kmeans(points: &Matrix, k: usize, cfg: &KMeansConfig) -> Result<ClusteringModel> {
    cfg.validate()?;
    if k < 1 {
        return Err(Error::InvalidConfig("k must be ≥ 1".to_string()));
    }
    if points.n_rows() < k {
        return Err(Error::TooFew {
            what: "points",
            needed: k,
            got: points.n_rows(),
        });
    }

    let mut best: Option<LloydRun> = None;
    let mut traces = Vec::with_capacity(cfg.restarts);
    for r in 0..cfg.restarts {
        let run = run_lloyd(points, k, cfg.max_iterations, seed::derive(cfg.seed, r as u64));
        traces.push(run.trace.clone());
        if best.as_ref().is_none_or(|b| run.objective < b.objective) {
            best = Some(run);
        }
    }
    let run = best.expect("restarts ≥ 1");

    let mut centroids = run.centroids;
    let mut assignments = run.assignments;
    if cfg.min_cluster_size > 0 {
        merge_undersized(points, &mut centroids, &mut assignments, cfg.min_cluster_size);
    }

    let mut cluster_sizes = vec![0usize; centroids.len()];
    for &a in &assignments {
        cluster_sizes[a] += 1;
    }
    let global_mean = mean_point(points);
    let objective = objective_value(points, &centroids, &assignments);
    let mut model = ClusteringModel {
        centroids,
        assignments,
        cluster_sizes,
        global_mean,
        variance_explained: 0.0,
        objective,
        objective_traces: traces,
    };
    model.variance_explained = variance_explained(&model, points);
    Ok(model)
}

/// Merges clusters smaller than `min_size` into their nearest neighbor by
/// centroid distance, recomputing the merged centroid as the combined mean.
fn merge_undersized(
    points: &Matrix,
    centroids: &mut Vec<Vec<f64>>,
    assignments: &mut [usize],
    min_size: usize,
) {
    let d = points.n_cols();
    while centroids.len() > 1 {
        let k = centroids.len();
        let mut sizes = vec![0usize; k];
        for &a in assignments.iter() {
            sizes[a] += 1;
        }
        let Some(small) = (0..k).find(|&j| sizes[j] < min_size) else {
            return;
        };
        let target = (0..k)
            .filter(|&j| j != small)
            .min_by(|&a, &b| {
                squared_distance(&centroids[small], &centroids[a])
                    .partial_cmp(&squared_distance(&centroids[small], &centroids[b]))
                    .expect("finite centroid distances")
            })
            .expect("k > 1");
        for a in assignments.iter_mut() {
            if *a == small {
                *a = target;
            }
        }
        let mut mean = vec![0.0; d];
        let mut count = 0usize;
        for (i, &a) in assignments.iter().enumerate() {
            if a == target {
                let row = points.row(i);
                for (m, &v) in mean.iter_mut().zip(row.iter()) {
                    *m += v;
                }
                count += 1;
            }
        }
        mean.iter_mut().for_each(|m| *m /= count as f64);
        centroids[target] = mean;
        centroids.remove(small);
        for a in assignments.iter_mut() {
            if *a > small {
                *a -= 1;
            }
        }
    }
}

/// Fraction of variance explained by the clustering: between-cluster
/// variance over total variance, summed point-wise so that degenerate cases
/// are exact (k=1 gives 0, all-singleton gives 1). All points identical
/// gives 1 by convention.
pub fn variance_explained(model: &ClusteringModel, points: &Matrix) -> f64 {
    let mu = mean_point(points);
    let mut total = 0.0;
    let mut between = 0.0;
    for (i, &a) in model.assignments.iter().enumerate() {
        total += squared_distance(points.row(i), &mu);
        between += squared_distance(&model.centroids[a], &mu);
    }
    if total == 0.0 {
        1.0
    } else {
        between / total
    }
}

/// Cluster index of the nearest centroid to `x`; ties keep the lowest index.
pub fn assign(model: &ClusteringModel, x: &[f64]) -> Result<usize> {
    let dim = model.centroids[0].len();
    if x.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: x.len(),
        });
    }
    Ok(nearest(x, &model.centroids))
}

/// Settings for the incremental choice of k.
#[derive(Debug, Clone, PartialEq)]
pub struct KSelectionConfig {
    /// Stop at the first k with variance explained strictly above this.
    pub variance_threshold: f64,
    /// Largest k to try; used as the fallback when the threshold is never met.
    pub max_k: usize,
    pub kmeans: KMeansConfig,
    /// Skip the selection loop and fit exactly this k. `Some(1)` collapses
    /// the grouped pipeline to a single global group.
    pub force_k: Option<usize>,
}

impl Default for KSelectionConfig {
    fn default() -> Self {
        KSelectionConfig {
            variance_threshold: 0.9,
            max_k: 10,
            kmeans: KMeansConfig::default(),
            force_k: None,
        }
    }
}

impl KSelectionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.variance_threshold > 0.0 && self.variance_threshold < 1.0) {
            return Err(Error::InvalidConfig(
                "variance_threshold must lie in (0,1)".to_string(),
            ));
        }
        if self.max_k < 2 {
            return Err(Error::InvalidConfig("max_k must be ≥ 2".to_string()));
        }
        if self.force_k == Some(0) {
            return Err(Error::InvalidConfig("force_k must be ≥ 1".to_string()));
        }
        self.kmeans.validate()
    }
}

/// Variance explained and objective for one tried k.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KCandidate {
    pub k: usize,
    pub variance_explained: f64,
    pub objective: f64,
}

/// Outcome of [`select_k`]: the chosen model plus the per-k diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct KSelection {
    pub model: ClusteringModel,
    /// One entry per k tried, in order.
    pub candidates: Vec<KCandidate>,
    /// False when no k ≤ max_k crossed the threshold and the max_k model was
    /// returned as a fallback.
    pub threshold_met: bool,
}

/// Tries k = 2, 3, ... and returns the first fit whose variance explained
/// exceeds `cfg.variance_threshold`, or the k = max_k fit flagged with
/// `threshold_met = false` when none does.
pub fn select_k(points: &Matrix, cfg: &KSelectionConfig) -> Result<KSelection> {
    cfg.validate()?;
    if points.n_rows() < 2 {
        return Err(Error::TooFew {
            what: "points",
            needed: 2,
            got: points.n_rows(),
        });
    }

    if let Some(k) = cfg.force_k {
        let model = kmeans(points, k, &cfg.kmeans)?;
        let candidate = KCandidate {
            k: model.k(),
            variance_explained: model.variance_explained,
            objective: model.objective,
        };
        let threshold_met = model.variance_explained > cfg.variance_threshold;
        return Ok(KSelection {
            model,
            candidates: vec![candidate],
            threshold_met,
        });
    }

    let top = cfg.max_k.min(points.n_rows());
    let mut candidates = Vec::new();
    let mut last: Option<ClusteringModel> = None;
    for k in 2..=top {
        let model = kmeans(points, k, &cfg.kmeans)?;
        candidates.push(KCandidate {
            k: model.k(),
            variance_explained: model.variance_explained,
            objective: model.objective,
        });
        let met = model.variance_explained > cfg.variance_threshold;
        last = Some(model);
        if met {
            return Ok(KSelection {
                model: last.unwrap(),
                candidates,
                threshold_met: true,
            });
        }
    }
    Ok(KSelection {
        model: last.expect("max_k ≥ 2 and n ≥ 2"),
        candidates,
        threshold_met: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn matrix(rows: &[Vec<f64>]) -> Matrix {
        Matrix::from_rows(rows).unwrap()
    }

    fn random_points(n: usize, d: usize, seed: u64) -> Matrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| rng.random_range(-5.0..5.0)).collect())
            .collect();
        matrix(&rows)
    }

    /// Minimum within-cluster sum over all nontrivial bipartitions.
    fn bipartition_oracle(points: &Matrix) -> f64 {
        let n = points.n_rows();
        let d = points.n_cols();
        let mut best = f64::INFINITY;
        for mask in 1..(1u32 << n) - 1 {
            let mut cost = 0.0;
            for side in 0..2 {
                let members: Vec<usize> = (0..n)
                    .filter(|&i| ((mask >> i) & 1) as usize == side)
                    .collect();
                let mut mean = vec![0.0; d];
                for &i in &members {
                    for j in 0..d {
                        mean[j] += points.get(i, j);
                    }
                }
                mean.iter_mut().for_each(|m| *m /= members.len() as f64);
                for &i in &members {
                    cost += squared_distance(points.row(i), &mean);
                }
            }
            if cost < best {
                best = cost;
            }
        }
        best
    }

    #[test]
    fn separates_two_points_perfectly() {
        let points = matrix(&[vec![0.0], vec![10.0]]);
        let model = kmeans(&points, 2, &KMeansConfig::default()).unwrap();
        let mut centers: Vec<f64> = model.centroids.iter().map(|c| c[0]).collect();
        centers.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(centers, vec![0.0, 10.0]);
        assert_eq!(model.objective, 0.0);
    }

    #[test]
    fn k1_centroid_is_global_mean_and_sigma_zero() {
        let points = random_points(40, 3, 1);
        let model = kmeans(&points, 1, &KMeansConfig::default()).unwrap();
        let mu = mean_point(&points);
        for j in 0..3 {
            assert_eq!(model.centroids[0][j].to_bits(), mu[j].to_bits());
        }
        assert_eq!(model.variance_explained, 0.0);
    }

    #[test]
    fn singleton_clusters_give_sigma_one() {
        let points = random_points(7, 2, 2);
        let model = kmeans(&points, 7, &KMeansConfig::default()).unwrap();
        assert_eq!(model.cluster_sizes, vec![1; 7]);
        assert_eq!(model.variance_explained, 1.0);
    }

    #[test]
    fn variance_explained_hand_example() {
        let points = matrix(&[vec![0.0], vec![0.0], vec![10.0], vec![10.0]]);
        let model = kmeans(&points, 2, &KMeansConfig::default()).unwrap();
        // total = 4·25 = 100, between = 2·25 + 2·25 = 100
        assert_eq!(model.variance_explained, 1.0);
        assert_eq!(model.objective, 0.0);
    }

    #[test]
    fn sigma_identity_with_objective() {
        for trial in 0..20 {
            let points = random_points(30, 2, 100 + trial);
            for k in [2, 3, 5] {
                let model = kmeans(&points, k, &KMeansConfig { seed: trial, ..KMeansConfig::default() }).unwrap();
                let mu = mean_point(&points);
                let total: f64 = (0..points.n_rows())
                    .map(|i| squared_distance(points.row(i), &mu))
                    .sum();
                let identity = 1.0 - model.objective / total;
                assert!(
                    (model.variance_explained - identity).abs() < 1e-9,
                    "k={k} trial={trial}: {} vs {identity}",
                    model.variance_explained
                );
            }
        }
    }

    #[test]
    fn lloyd_objective_never_increases() {
        for trial in 0..20 {
            let points = random_points(25, 3, 200 + trial);
            let model = kmeans(&points, 4, &KMeansConfig { seed: trial, ..KMeansConfig::default() }).unwrap();
            for trace in &model.objective_traces {
                for pair in trace.windows(2) {
                    assert!(
                        pair[1] <= pair[0] + 1e-9 * pair[0].max(1.0),
                        "trace increased: {pair:?}"
                    );
                }
            }
        }
    }

    #[test]
    fn assignments_are_nearest_centroid() {
        let points = random_points(50, 2, 3);
        let model = kmeans(&points, 4, &KMeansConfig::default()).unwrap();
        for i in 0..points.n_rows() {
            assert_eq!(assign(&model, points.row(i)).unwrap(), model.assignments[i]);
        }
        let total: usize = model.cluster_sizes.iter().sum();
        assert_eq!(total, points.n_rows());
    }

    #[test]
    fn assign_breaks_ties_toward_lowest_index() {
        let model = ClusteringModel {
            centroids: vec![vec![0.0, 0.0], vec![10.0, 10.0]],
            assignments: vec![0, 1],
            cluster_sizes: vec![1, 1],
            global_mean: vec![5.0, 5.0],
            variance_explained: 1.0,
            objective: 0.0,
            objective_traces: vec![],
        };
        assert_eq!(assign(&model, &[1.0, 1.0]).unwrap(), 0);
        assert_eq!(assign(&model, &[5.0, 5.0]).unwrap(), 0);
        assert!(matches!(
            assign(&model, &[1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    /// Mixed small instances: 1-D uniform clouds and 2-D blob pairs.
    fn small_instance(t: u64) -> Matrix {
        let n = 4 + (t as usize % 5);
        let mut rng = ChaCha8Rng::seed_from_u64(t);
        let rows: Vec<Vec<f64>> = if t.is_multiple_of(2) {
            (0..n).map(|_| vec![rng.random_range(-5.0..5.0)]).collect()
        } else {
            (0..n)
                .map(|i| {
                    let c = if i % 2 == 0 { -3.0 } else { 3.0 };
                    vec![
                        c + rng.sample::<f64, _>(rand_distr::StandardNormal),
                        c + rng.sample::<f64, _>(rand_distr::StandardNormal),
                    ]
                })
                .collect()
        };
        matrix(&rows)
    }

    #[test]
    fn matches_bipartition_oracle_on_small_instances() {
        let mut hits = 0;
        let trials = 25;
        for trial in 0..trials {
            let points = small_instance(trial);
            let model = kmeans(&points, 2, &KMeansConfig { seed: trial, ..KMeansConfig::default() }).unwrap();
            let oracle = bipartition_oracle(&points);
            assert!(model.objective >= oracle - 1e-9, "beat the oracle?");
            if (model.objective - oracle).abs() <= 1e-9 {
                hits += 1;
            }
        }
        assert!(hits * 100 >= trials * 95, "only {hits}/{trials} optimal");
    }

    #[test]
    fn kmeans_is_seed_deterministic() {
        let points = random_points(60, 2, 4);
        let cfg = KMeansConfig { seed: 9, ..KMeansConfig::default() };
        let a = kmeans(&points, 3, &cfg).unwrap();
        let b = kmeans(&points, 3, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_bad_k() {
        let points = random_points(5, 2, 5);
        assert!(matches!(
            kmeans(&points, 0, &KMeansConfig::default()),
            Err(Error::InvalidConfig(_))
        ));
        assert!(matches!(
            kmeans(&points, 6, &KMeansConfig::default()),
            Err(Error::TooFew { .. })
        ));
    }

    #[test]
    fn select_k_finds_two_blobs() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut rows = Vec::new();
        for _ in 0..40 {
            rows.push(vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]);
        }
        for _ in 0..40 {
            rows.push(vec![
                100.0 + rng.random_range(-1.0..1.0),
                100.0 + rng.random_range(-1.0..1.0),
            ]);
        }
        let sel = select_k(&matrix(&rows), &KSelectionConfig::default()).unwrap();
        assert_eq!(sel.model.k(), 2);
        assert!(sel.threshold_met);
        assert!(sel.candidates[0].variance_explained > 0.9);
    }

    #[test]
    fn select_k_falls_back_to_max_k() {
        let points = random_points(60, 2, 7);
        let cfg = KSelectionConfig {
            variance_threshold: 0.999_999,
            max_k: 4,
            ..KSelectionConfig::default()
        };
        let sel = select_k(&points, &cfg).unwrap();
        assert_eq!(sel.model.k(), 4);
        assert!(!sel.threshold_met);
        assert_eq!(sel.candidates.len(), 3); // k = 2, 3, 4 all tried
    }

    #[test]
    fn select_k_honors_force_k() {
        let points = random_points(30, 2, 8);
        let cfg = KSelectionConfig {
            force_k: Some(1),
            ..KSelectionConfig::default()
        };
        let sel = select_k(&points, &cfg).unwrap();
        assert_eq!(sel.model.k(), 1);
        assert_eq!(sel.candidates.len(), 1);
        assert!(!sel.threshold_met);
    }

    #[test]
    fn select_k_needs_two_points() {
        let points = matrix(&[vec![1.0]]);
        assert!(matches!(
            select_k(&points, &KSelectionConfig::default()),
            Err(Error::TooFew { .. })
        ));
    }

    #[test]
    fn min_cluster_size_merges_small_clusters() {
        let mut rows = Vec::new();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..6 {
            rows.push(vec![rng.random_range(-0.5..0.5)]);
        }
        for _ in 0..6 {
            rows.push(vec![20.0 + rng.random_range(-0.5..0.5)]);
        }
        rows.push(vec![1000.0]); // lone outlier becomes a singleton cluster
        let points = matrix(&rows);
        let cfg = KMeansConfig {
            min_cluster_size: 2,
            ..KMeansConfig::default()
        };
        let model = kmeans(&points, 3, &cfg).unwrap();
        assert!(model.k() < 3);
        assert!(model.cluster_sizes.iter().all(|&s| s >= 2));
        assert_eq!(model.cluster_sizes.iter().sum::<usize>(), points.n_rows());
        assert_eq!(model.assignments.len(), points.n_rows());
        assert!(model.assignments.iter().all(|&a| a < model.k()));
    }
}
