//! Split-conformal calibration and interval construction.
//!
//! All methods share one mechanism. Score every calibration pair (x, y) with
//! a non-conformity function s, then take the finite-sample-corrected
//! empirical quantile
//!
//! ```text
//! q̂ = the ⌈(n+1)(1−α)⌉-th smallest score   (index clamped to n)
//! ```
//!
//! at the "higher" order statistic, never interpolating: the marginal
//! coverage guarantee P(y ∈ C(x)) ≥ 1−α counts order statistics of
//! exchangeable scores, and interpolation would forfeit it. The index clamp
//! is the min(1,·) correction that keeps small calibration groups usable.
//!
//! Scores on offer:
//!
//! * naive: s = |y − f(x)| around the median head; intervals have constant
//!   width 2q̂ everywhere,
//! * CQR: s = max(Q̂_lo(x) − y, y − Q̂_hi(x)), the signed distance to the
//!   quantile band; negative scores mean the band already overcovers and q̂
//!   may come out negative, shrinking intervals,
//! * ICQR: CQR scores calibrated per cluster of the importance-weighted
//!   feature space, yielding one q̂ per group and intervals that adapt
//!   their correction to where x falls.

use serde::{Deserialize, Serialize};

use crate::cluster::{assign, select_k, ClusteringModel, KCandidate, KSelectionConfig};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::importance::{permutation_importance, weight_features, ImportanceConfig, ImportanceVector};
use crate::quantile_net::{QuantileModel, QuantilePrediction};

/// Miscoverage budget α.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConformalConfig {
    pub miscoverage: f64,
}

impl ConformalConfig {
    pub fn new(miscoverage: f64) -> Result<Self> {
        let cfg = ConformalConfig { miscoverage };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.miscoverage > 0.0 && self.miscoverage < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "miscoverage must lie in (0,1), got {}",
                self.miscoverage
            )));
        }
        Ok(())
    }
}

/// Which score family produced a calibration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScoreKind {
    Naive,
    Cqr,
}

impl ScoreKind {
    fn name(self) -> &'static str {
        match self {
            ScoreKind::Naive => "naive",
            ScoreKind::Cqr => "cqr",
        }
    }
}

/// One global corrected quantile q̂ over the calibration scores.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub method: ScoreKind,
    pub q_hat: f64,
    pub n_cal: usize,
}

/// Per-cluster calibration for ICQR.
///
/// Holds everything needed to route a fresh input: the importance vector
/// (to weight features), the clustering (to pick the group), and one q̂ per
/// group. The raw per-group score multisets are kept so every q̂ can be
/// recomputed and audited.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupCalibration {
    pub clustering: ClusteringModel,
    pub importance: ImportanceVector,
    pub q_hats: Vec<f64>,
    pub group_sizes: Vec<usize>,
    pub group_scores: Vec<Vec<f64>>,
    /// Variance-explained diagnostics for every k tried during selection.
    pub candidates: Vec<KCandidate>,
    /// False when k-selection fell back to max_k without crossing the
    /// variance threshold.
    pub threshold_met: bool,
    pub alpha: f64,
}

impl GroupCalibration {
    pub fn k(&self) -> usize {
        self.q_hats.len()
    }
}

/// Prediction interval, optionally tagged with the cluster that calibrated it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictionInterval {
    pub lower: f64,
    pub upper: f64,
    pub group: Option<usize>,
}

impl PredictionInterval {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, y: f64) -> bool {
        self.lower <= y && y <= self.upper
    }
}

/// Finite-sample-corrected empirical quantile of `scores` at miscoverage
/// `alpha`: the order statistic at 1-based index min(n, ⌈(n+1)(1−α)⌉),
/// "higher" interpolation. The clamp handles score sets so small that the
/// corrected index exceeds n.
pub fn corrected_quantile(scores: &[f64], alpha: f64) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::Empty("score set"));
    }
    ConformalConfig { miscoverage: alpha }.validate()?;
    let n = scores.len();
    let mut sorted = scores.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let raw = ((n + 1) as f64 * (1.0 - alpha)).ceil() as usize;
    let index = raw.clamp(1, n);
    Ok(sorted[index - 1])
}

/// Absolute-residual score around a point prediction.
pub fn naive_score(prediction: f64, y: f64) -> f64 {
    (y - prediction).abs()
}

/// CQR score: negative iff y lies strictly inside the band, otherwise the
/// distance to the nearer violated bound.
pub fn cqr_score(p: &QuantilePrediction, y: f64) -> f64 {
    (p.lower - y).max(y - p.upper)
}

fn scores_over(
    m: &QuantileModel,
    cal: &Dataset,
    score: impl Fn(&QuantilePrediction, f64) -> f64,
) -> Result<Vec<f64>> {
    let mut scores = Vec::with_capacity(cal.n_rows());
    for i in 0..cal.n_rows() {
        let p = m.predict(cal.row(i))?;
        scores.push(score(&p, cal.response()[i]));
    }
    Ok(scores)
}

/// Calibrates the naive absolute-residual method: q̂ over |y − median| scores.
pub fn calibrate_naive(
    m: &QuantileModel,
    cal: &Dataset,
    cfg: &ConformalConfig,
) -> Result<CalibrationResult> {
    cfg.validate()?;
    let scores = scores_over(m, cal, |p, y| naive_score(p.median, y))?;
    Ok(CalibrationResult {
        method: ScoreKind::Naive,
        q_hat: corrected_quantile(&scores, cfg.miscoverage)?,
        n_cal: scores.len(),
    })
}

/// Calibrates CQR: q̂ over distance-to-band scores.
pub fn calibrate_cqr(
    m: &QuantileModel,
    cal: &Dataset,
    cfg: &ConformalConfig,
) -> Result<CalibrationResult> {
    cfg.validate()?;
    let scores = scores_over(m, cal, cqr_score)?;
    Ok(CalibrationResult {
        method: ScoreKind::Cqr,
        q_hat: corrected_quantile(&scores, cfg.miscoverage)?,
        n_cal: scores.len(),
    })
}

/// Calibrates ICQR: permutation importance on `cal`, k-means in the
/// importance-weighted feature space, then one corrected quantile of the
/// CQR scores per cluster.
pub fn calibrate_icqr(
    m: &QuantileModel,
    cal: &Dataset,
    cfg: &ConformalConfig,
    ksel: &KSelectionConfig,
    icfg: &ImportanceConfig,
) -> Result<GroupCalibration> {
    cfg.validate()?;
    let importance = permutation_importance(m, cal, icfg)?;
    let weighted = weight_features(cal, &importance)?;
    let selection = select_k(weighted.features(), ksel)?;

    let k = selection.model.k();
    let mut group_scores: Vec<Vec<f64>> = vec![Vec::new(); k];
    for i in 0..cal.n_rows() {
        let group = assign(&selection.model, weighted.row(i))?;
        let p = m.predict(cal.row(i))?;
        group_scores[group].push(cqr_score(&p, cal.response()[i]));
    }

    let mut q_hats = Vec::with_capacity(k);
    let mut group_sizes = Vec::with_capacity(k);
    for scores in &group_scores {
        q_hats.push(corrected_quantile(scores, cfg.miscoverage)?);
        group_sizes.push(scores.len());
    }

    Ok(GroupCalibration {
        clustering: selection.model,
        importance,
        q_hats,
        group_sizes,
        group_scores,
        candidates: selection.candidates,
        threshold_met: selection.threshold_met,
        alpha: cfg.miscoverage,
    })
}

/// Expands (q̂ > 0) or shrinks (q̂ < 0) the band symmetrically. When a
/// negative q̂ would invert the interval, both bounds clamp to the band
/// midpoint: an inverted interval covers nothing anyway.
fn expand_band(p: &QuantilePrediction, q_hat: f64, group: Option<usize>) -> PredictionInterval {
    let lower = p.lower - q_hat;
    let upper = p.upper + q_hat;
    if lower > upper {
        let mid = 0.5 * (p.lower + p.upper);
        PredictionInterval {
            lower: mid,
            upper: mid,
            group,
        }
    } else {
        PredictionInterval { lower, upper, group }
    }
}

fn expect_kind(r: &CalibrationResult, expected: ScoreKind) -> Result<()> {
    if r.method != expected {
        return Err(Error::CalibrationMismatch {
            expected: expected.name(),
            got: r.method.name(),
        });
    }
    Ok(())
}

/// Constant-width interval around the median head: [median − q̂, median + q̂].
pub fn interval_naive(
    m: &QuantileModel,
    x: &[f64],
    r: &CalibrationResult,
) -> Result<PredictionInterval> {
    expect_kind(r, ScoreKind::Naive)?;
    let p = m.predict(x)?;
    Ok(PredictionInterval {
        lower: p.median - r.q_hat,
        upper: p.median + r.q_hat,
        group: None,
    })
}

/// The raw quantile-regression band, no conformal correction.
pub fn interval_qr(m: &QuantileModel, x: &[f64]) -> Result<PredictionInterval> {
    let p = m.predict(x)?;
    Ok(PredictionInterval {
        lower: p.lower,
        upper: p.upper,
        group: None,
    })
}

/// CQR interval: the band expanded by the global q̂.
pub fn interval_cqr(
    m: &QuantileModel,
    x: &[f64],
    r: &CalibrationResult,
) -> Result<PredictionInterval> {
    expect_kind(r, ScoreKind::Cqr)?;
    let p = m.predict(x)?;
    Ok(expand_band(&p, r.q_hat, None))
}

/// ICQR interval: the band expanded by the q̂ of the cluster that the
/// importance-weighted `x` falls in. `x` is passed unweighted; the weighting
/// happens here.
pub fn interval_icqr(
    m: &QuantileModel,
    x: &[f64],
    g: &GroupCalibration,
) -> Result<PredictionInterval> {
    if x.len() != g.importance.values.len() {
        return Err(Error::DimensionMismatch {
            expected: g.importance.values.len(),
            got: x.len(),
        });
    }
    let weighted: Vec<f64> = x
        .iter()
        .zip(g.importance.values.iter())
        .map(|(v, w)| v * w)
        .collect();
    let group = assign(&g.clustering, &weighted)?;
    let p = m.predict(x)?;
    Ok(expand_band(&p, g.q_hats[group], Some(group)))
}
