//! Precision/recall/F-score for binary occlusion maps, PR-curve sweeps, and
//! the oracle/global threshold protocol.
//!
//! Conventions (fixed once, used everywhere):
//! - precision = tp / (tp + fp), defined as 1 when nothing was predicted;
//! - recall = tp / (tp + fn), defined as 1 when nothing was to be found;
//! - F = 2PR / (P + R), defined as 0 when P + R = 0;
//! - thresholding is strict (`P > tau`), so recall is non-increasing in tau;
//! - *micro* aggregation pools pixel counts, *macro* averages per-image
//!   scores. Both are reported because they genuinely differ on skewed
//!   per-image occlusion fractions.

use std::io::Write;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::lrc::OcclusionMap;
use crate::net::predict_grid;
use crate::scalar::Scalar;

/// Pixel confusion counts for the occluded class.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Counts {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

impl Counts {
    pub fn from_grids(pred: &Grid<bool>, gt: &Grid<bool>) -> Result<Counts> {
        if pred.width() != gt.width() || pred.height() != gt.height() {
            return Err(Error::shape(
                "Counts::from_grids",
                format!("{}x{}", gt.width(), gt.height()),
                format!("{}x{}", pred.width(), pred.height()),
            ));
        }
        let mut c = Counts::default();
        for (p, g) in pred.data().iter().zip(gt.data()) {
            match (p, g) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, true) => c.fn_ += 1,
                (false, false) => c.tn += 1,
            }
        }
        Ok(c)
    }

    pub fn merge(self, other: Counts) -> Counts {
        Counts {
            tp: self.tp + other.tp,
            fp: self.fp + other.fp,
            fn_: self.fn_ + other.fn_,
            tn: self.tn + other.tn,
        }
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn precision(&self) -> f64 {
        if self.tp + self.fp == 0 {
            1.0
        } else {
            self.tp as f64 / (self.tp + self.fp) as f64
        }
    }

    pub fn recall(&self) -> f64 {
        if self.tp + self.fn_ == 0 {
            1.0
        } else {
            self.tp as f64 / (self.tp + self.fn_) as f64
        }
    }

    pub fn fscore(&self) -> f64 {
        let p = self.precision();
        let r = self.recall();
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }

    pub fn metrics(&self) -> Metrics {
        Metrics {
            counts: *self,
            precision: self.precision(),
            recall: self.recall(),
            fscore: self.fscore(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Metrics {
    pub counts: Counts,
    pub precision: f64,
    pub recall: f64,
    pub fscore: f64,
}

/// Metrics of one predicted map against ground truth (views must agree).
pub fn prf(pred: &OcclusionMap, gt: &OcclusionMap) -> Result<Metrics> {
    if pred.view != gt.view {
        return Err(Error::ViewMismatch {
            op: "prf",
            expected: gt.view,
            got: pred.view,
        });
    }
    Ok(Counts::from_grids(&pred.grid, &gt.grid)?.metrics())
}

/// Micro (pooled counts) and macro (mean per-map scores) aggregation over a
/// set of prediction/ground-truth pairs.
#[derive(Clone, Debug, PartialEq)]
pub struct Aggregate {
    pub micro: Metrics,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_fscore: f64,
    pub per_map: Vec<Metrics>,
}

pub fn aggregate(pairs: &[(&OcclusionMap, &OcclusionMap)]) -> Result<Aggregate> {
    if pairs.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut pooled = Counts::default();
    let mut per_map = Vec::with_capacity(pairs.len());
    for (pred, gt) in pairs {
        let m = prf(pred, gt)?;
        pooled = pooled.merge(m.counts);
        per_map.push(m);
    }
    let n = per_map.len() as f64;
    Ok(Aggregate {
        micro: pooled.metrics(),
        macro_precision: per_map.iter().map(|m| m.precision).sum::<f64>() / n,
        macro_recall: per_map.iter().map(|m| m.recall).sum::<f64>() / n,
        macro_fscore: per_map.iter().map(|m| m.fscore).sum::<f64>() / n,
        per_map,
    })
}

/// One PR-curve sample.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PrPoint {
    pub tau: f64,
    pub precision: f64,
    pub recall: f64,
    pub fscore: f64,
}

/// The standard threshold grid: 0.00, 0.01, …, 1.00.
pub fn default_tau_grid<T: Scalar>() -> Vec<T> {
    (0..=100).map(|i| T::from_usize(i) / T::from_usize(100)).collect()
}

/// Counts pooled over all `(probabilities, ground truth)` pairs at one
/// threshold.
fn counts_at_tau<T: Scalar>(pairs: &[(&Grid<T>, &OcclusionMap)], tau: T) -> Result<Counts> {
    let mut pooled = Counts::default();
    for (probs, gt) in pairs {
        pooled = pooled.merge(Counts::from_grids(&predict_grid(probs, tau), &gt.grid)?);
    }
    Ok(pooled)
}

/// Sweeps strictly increasing thresholds in `[0, 1]` over pooled counts.
/// Because thresholding is strict, the predicted set shrinks (weakly) as
/// `tau` grows, so recall is non-increasing along the curve.
pub fn pr_curve<T: Scalar>(
    pairs: &[(&Grid<T>, &OcclusionMap)],
    thresholds: &[T],
) -> Result<Vec<PrPoint>> {
    if pairs.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if thresholds.is_empty() {
        return Err(Error::config("pr_curve needs at least one threshold"));
    }
    for pair in thresholds.windows(2) {
        if pair[1] <= pair[0] {
            return Err(Error::config(format!(
                "thresholds must be strictly increasing, got {} then {}",
                pair[0], pair[1]
            )));
        }
    }
    if thresholds[0] < T::zero() || thresholds[thresholds.len() - 1] > T::one() {
        return Err(Error::config("thresholds must lie in [0, 1]"));
    }
    thresholds
        .iter()
        .map(|&tau| {
            let c = counts_at_tau(pairs, tau)?;
            Ok(PrPoint {
                tau: tau.to_f64(),
                precision: c.precision(),
                recall: c.recall(),
                fscore: c.fscore(),
            })
        })
        .collect()
}

/// The maximum-F point of a curve (first one on ties).
pub fn max_f_point(curve: &[PrPoint]) -> Option<&PrPoint> {
    curve
        .iter()
        .reduce(|best, p| if p.fscore > best.fscore { p } else { best })
}

/// Pooled F-score of one sequence's frames at a fixed threshold.
pub fn sequence_f<T: Scalar>(frames: &[(&Grid<T>, &OcclusionMap)], tau: T) -> Result<f64> {
    if frames.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(counts_at_tau(frames, tau)?.fscore())
}

/// The two-protocol sequence evaluation: for every sequence, the *oracle*
/// score takes the sequence's F at its F-maximizing threshold (searched on
/// the 0.01 grid), the *global* score takes F at `tau = 0.5`; both are then
/// averaged over sequences. The oracle can never fall below the global
/// score because 0.5 is on the search grid.
pub fn oracle_global_f<T: Scalar>(
    sequences: &[&[(&Grid<T>, &OcclusionMap)]],
) -> Result<(f64, f64)> {
    if sequences.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let grid = default_tau_grid::<T>();
    let half = T::from_f64(0.5);
    let mut oracle_sum = 0.0;
    let mut global_sum = 0.0;
    for frames in sequences {
        let best = grid
            .iter()
            .map(|&tau| sequence_f(frames, tau))
            .collect::<Result<Vec<f64>>>()?
            .into_iter()
            .fold(0.0f64, f64::max);
        oracle_sum += best;
        global_sum += sequence_f(frames, half)?;
    }
    let n = sequences.len() as f64;
    Ok((oracle_sum / n, global_sum / n))
}

/// Writes a curve as `tau,precision,recall,fscore` CSV.
pub fn write_pr_csv(curve: &[PrPoint], w: &mut impl Write) -> Result<()> {
    writeln!(w, "tau,precision,recall,fscore")?;
    for p in curve {
        writeln!(w, "{},{},{},{}", p.tau, p.precision, p.recall, p.fscore)?;
    }
    Ok(())
}

/// Writes metrics as machine-readable `key=value` lines under a label.
pub fn write_metrics_kv(label: &str, m: &Metrics, w: &mut impl Write) -> Result<()> {
    for (k, v) in [
        ("tp", m.counts.tp as f64),
        ("fp", m.counts.fp as f64),
        ("fn", m.counts.fn_ as f64),
        ("tn", m.counts.tn as f64),
        ("precision", m.precision),
        ("recall", m.recall),
        ("fscore", m.fscore),
    ] {
        writeln!(w, "{label}.{k}={v}")?;
    }
    Ok(())
}
