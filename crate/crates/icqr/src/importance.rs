//! Permutation feature importance.
//!
//! For each feature j the column is shuffled by a seeded permutation, the
//! model's error is recomputed, and the importance I_j is the mean absolute
//! degradation |E_b − E_π| over R repetitions. The model is never retrained;
//! the evaluation set is never mutated. Importances are consumed raw (not
//! normalized) by [`weight_features`], which rescales each column by I_j so
//! that distances in the weighted space emphasize features the model relies
//! on.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::quantile_net::{pinball_loss, QuantileModel};
use crate::seed;

/// Performance measure used to score degradation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Metric {
    /// Pinball loss at each head's level, averaged over the three heads.
    /// This is the quantity the model was trained on.
    #[default]
    MeanPinball,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImportanceConfig {
    /// Repetitions R per feature.
    pub repetitions: usize,
    pub seed: u64,
    pub metric: Metric,
}

impl Default for ImportanceConfig {
    fn default() -> Self {
        ImportanceConfig {
            repetitions: 5,
            seed: 0,
            metric: Metric::MeanPinball,
        }
    }
}

/// Per-feature importances plus the unpermuted baseline error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceVector {
    pub values: Vec<f64>,
    pub baseline_error: f64,
}

fn metric_value(
    metric: Metric,
    model: &QuantileModel,
    features: &Matrix,
    response: &[f64],
) -> Result<f64> {
    match metric {
        Metric::MeanPinball => {
            let levels = model.config().quantile_levels;
            let mut total = 0.0;
            for i in 0..features.n_rows() {
                let p = model.predict(features.row(i))?;
                let y = response[i];
                total += pinball_loss(levels[0], y, p.lower)
                    + pinball_loss(levels[1], y, p.median)
                    + pinball_loss(levels[2], y, p.upper);
            }
            Ok(total / (3 * features.n_rows()) as f64)
        }
    }
}

/// Error after permuting column `j` of `eval_set` by an explicit
/// permutation. Split out so the identity permutation can be checked
/// directly: it must reproduce the baseline error bitwise.
#[cfg(test)]
fn metric_with_column_permuted(
    model: &QuantileModel,
    eval_set: &Dataset,
    j: usize,
    permutation: &[usize],
    metric: Metric,
) -> Result<f64> {
    let mut work = eval_set.features().clone();
    let original = work.column(j);
    let permuted: Vec<f64> = permutation.iter().map(|&p| original[p]).collect();
    work.set_column(j, &permuted)?;
    metric_value(metric, model, &work, eval_set.response())
}

/// Permutation importance of every feature of `eval_set` under `m`.
///
/// Deterministic given `cfg.seed`: repetition i of feature j shuffles with
/// the derived seed for stream `j·R + i`.
pub fn permutation_importance(
    m: &QuantileModel,
    eval_set: &Dataset,
    cfg: &ImportanceConfig,
) -> Result<ImportanceVector> {
    if cfg.repetitions == 0 {
        return Err(Error::InvalidConfig("repetitions must be ≥ 1".to_string()));
    }
    if eval_set.n_features() != m.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: m.input_dim(),
            got: eval_set.n_features(),
        });
    }
    if eval_set.n_rows() < 2 {
        return Err(Error::TooFew {
            what: "evaluation rows",
            needed: 2,
            got: eval_set.n_rows(),
        });
    }

    let n = eval_set.n_rows();
    let r = cfg.repetitions;
    let baseline = metric_value(cfg.metric, m, eval_set.features(), eval_set.response())?;

    let mut work = eval_set.features().clone();
    let mut values = Vec::with_capacity(eval_set.n_features());
    for j in 0..eval_set.n_features() {
        let original = work.column(j);
        let mut sum = 0.0;
        for rep in 0..r {
            let child = seed::derive(cfg.seed, (j * r + rep) as u64);
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(&mut ChaCha8Rng::seed_from_u64(child));
            let permuted: Vec<f64> = perm.iter().map(|&p| original[p]).collect();
            work.set_column(j, &permuted)?;
            let degraded = metric_value(cfg.metric, m, &work, eval_set.response())?;
            sum += (baseline - degraded).abs();
        }
        work.set_column(j, &original)?;
        values.push(sum / r as f64);
    }

    Ok(ImportanceVector {
        values,
        baseline_error: baseline,
    })
}

/// New dataset whose column j is the input column j times `iv.values[j]`;
/// the response and column names carry over unchanged.
pub fn weight_features(d: &Dataset, iv: &ImportanceVector) -> Result<Dataset> {
    if iv.values.len() != d.n_features() {
        return Err(Error::DimensionMismatch {
            expected: d.n_features(),
            got: iv.values.len(),
        });
    }
    let mut m = Matrix::zeros(d.n_rows(), d.n_features());
    for i in 0..d.n_rows() {
        for (j, &w) in iv.values.iter().enumerate() {
            m.set(i, j, d.features().get(i, j) * w);
        }
    }
    Dataset::new(m, d.response().to_vec(), d.column_names().to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantile_net::{train, QuantileNetConfig};
    use rand::Rng;

    fn dataset(rows: &[Vec<f64>], y: &[f64]) -> Dataset {
        let names = (0..rows[0].len()).map(|j| format!("x{j}")).collect();
        Dataset::new(Matrix::from_rows(rows).unwrap(), y.to_vec(), names).unwrap()
    }

    fn linear_dataset(n: usize, seed: u64) -> Dataset {
        // y = 10·x1 + noise, x2 pure noise
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::with_capacity(n);
        let mut ys = Vec::with_capacity(n);
        for _ in 0..n {
            let x1: f64 = rng.random_range(-1.0..1.0);
            let x2: f64 = rng.random_range(-1.0..1.0);
            let noise: f64 = rng.random_range(-0.1..0.1);
            rows.push(vec![x1, x2]);
            ys.push(10.0 * x1 + noise);
        }
        dataset(&rows, &ys)
    }

    fn small_model(d: &Dataset, seed: u64) -> QuantileModel {
        let cfg = QuantileNetConfig {
            hidden_layers: vec![16],
            learning_rate: 0.05,
            epochs: 150,
            batch_size: 32,
            seed,
            ..QuantileNetConfig::default()
        };
        train(d, &cfg).unwrap()
    }

    #[test]
    fn ablated_feature_scores_exactly_zero() {
        let d = linear_dataset(200, 1);
        let model = small_model(&d, 2).ablate_feature(1).unwrap();
        let iv = permutation_importance(&model, &d, &ImportanceConfig::default()).unwrap();
        assert_eq!(iv.values[1], 0.0);
        assert!(iv.values[0] > 0.0);
    }

    #[test]
    fn identity_permutation_reproduces_baseline() {
        let d = linear_dataset(60, 3);
        let model = small_model(&d, 4);
        let baseline =
            metric_value(Metric::MeanPinball, &model, d.features(), d.response()).unwrap();
        let identity: Vec<usize> = (0..d.n_rows()).collect();
        for j in 0..d.n_features() {
            let e = metric_with_column_permuted(&model, &d, j, &identity, Metric::MeanPinball)
                .unwrap();
            assert_eq!(e.to_bits(), baseline.to_bits());
        }
    }

    #[test]
    fn informative_feature_dominates() {
        let d = linear_dataset(400, 5);
        let model = small_model(&d, 6);
        let iv = permutation_importance(&model, &d, &ImportanceConfig::default()).unwrap();
        assert!(
            iv.values[0] > 10.0 * iv.values[1],
            "I = {:?}",
            iv.values
        );
    }

    #[test]
    fn eval_set_is_not_mutated() {
        let d = linear_dataset(80, 7);
        let before = d.clone();
        let model = small_model(&d, 8);
        permutation_importance(&model, &d, &ImportanceConfig::default()).unwrap();
        assert_eq!(d, before);
    }

    #[test]
    fn importances_are_seed_deterministic() {
        let d = linear_dataset(80, 9);
        let model = small_model(&d, 10);
        let cfg = ImportanceConfig {
            repetitions: 3,
            seed: 77,
            ..ImportanceConfig::default()
        };
        let a = permutation_importance(&model, &d, &cfg).unwrap();
        let b = permutation_importance(&model, &d, &cfg).unwrap();
        assert_eq!(a, b);
        let c = permutation_importance(
            &model,
            &d,
            &ImportanceConfig {
                seed: 78,
                ..cfg
            },
        )
        .unwrap();
        assert_ne!(a.values, c.values);
    }

    #[test]
    fn importances_are_non_negative() {
        let d = linear_dataset(100, 11);
        let model = small_model(&d, 12);
        let iv = permutation_importance(&model, &d, &ImportanceConfig::default()).unwrap();
        assert!(iv.values.iter().all(|&v| v >= 0.0));
        assert_eq!(iv.values.len(), d.n_features());
    }

    #[test]
    fn weight_features_identity_and_zero() {
        let d = dataset(&[vec![1.0, 3.0], vec![1.0, 4.0]], &[1.0, 2.0]);
        let ones = ImportanceVector {
            values: vec![1.0, 1.0],
            baseline_error: 0.0,
        };
        assert_eq!(weight_features(&d, &ones).unwrap(), d);

        let iv = ImportanceVector {
            values: vec![2.0, 0.0],
            baseline_error: 0.0,
        };
        let out = weight_features(&d, &iv).unwrap();
        assert_eq!(out.features().column(0), vec![2.0, 2.0]);
        assert_eq!(out.features().column(1), vec![0.0, 0.0]);
        assert_eq!(out.response(), d.response());
    }

    #[test]
    fn weighting_matches_weighted_distances() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..20 {
            let a: Vec<f64> = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();
            let b: Vec<f64> = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();
            let w: Vec<f64> = (0..4).map(|_| rng.random_range(0.0..3.0)).collect();
            let d = dataset(&[a.clone(), b.clone()], &[0.0, 0.0]);
            let iv = ImportanceVector {
                values: w.clone(),
                baseline_error: 0.0,
            };
            let weighted = weight_features(&d, &iv).unwrap();
            let direct =
                crate::matrix::squared_distance(weighted.row(0), weighted.row(1));
            let by_hand: f64 = (0..4)
                .map(|j| {
                    let delta = w[j] * (a[j] - b[j]);
                    delta * delta
                })
                .sum();
            assert!((direct - by_hand).abs() <= 1e-12 * by_hand.max(1.0));
        }
    }

    #[test]
    fn dimension_mismatches_are_rejected() {
        let d = linear_dataset(50, 14);
        let model = small_model(&d, 15);
        let wide = dataset(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]], &[0.0, 0.0]);
        assert!(matches!(
            permutation_importance(&model, &wide, &ImportanceConfig::default()),
            Err(Error::DimensionMismatch { .. })
        ));
        let iv = ImportanceVector {
            values: vec![1.0],
            baseline_error: 0.0,
        };
        assert!(matches!(
            weight_features(&d, &iv),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
