//! Downstream uses of a released distribution: histogram-based outlier
//! scoring and the helpers used to evaluate it.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::pdf::ProbabilityVector;

pub const HBOS_SMOOTHING: f64 = 1e-6;
pub const DEFAULT_ANOMALY_QUANTILE: f64 = 0.95;

#[derive(Debug, Clone, PartialEq)]
pub struct AnomalyReport {
    pub flagged: BTreeSet<usize>,
    pub scores: Vec<f64>,
    pub threshold: f64,
}

/// Scores every category by `−ln(p + 1e-6)` and flags those strictly above
/// the `threshold_quantile` quantile of the scores.
pub fn hbos_detect(pdf: &ProbabilityVector, threshold_quantile: f64) -> Result<AnomalyReport> {
    hbos_detect_with(pdf, threshold_quantile, HBOS_SMOOTHING)
}

pub fn hbos_detect_with(pdf: &ProbabilityVector, threshold_quantile: f64, smoothing: f64) -> Result<AnomalyReport> {
    if !(threshold_quantile > 0.0 && threshold_quantile < 1.0) {
        return Err(Error::ConfigInvalid(format!(
            "quantile {threshold_quantile} must lie in (0, 1)"
        )));
    }
    let scores: Vec<f64> = pdf.probs().iter().map(|p| -(p + smoothing).ln()).collect();
    let threshold = quantile(&scores, threshold_quantile);
    let flagged = scores
        .iter()
        .enumerate()
        .filter(|(_, s)| **s > threshold)
        .map(|(i, _)| i)
        .collect();
    Ok(AnomalyReport {
        flagged,
        scores,
        threshold,
    })
}

/// Linear interpolation between order statistics.
fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let h = (v.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}

/// Precision and recall of `predicted` against `truth`; an empty side scores 1.
pub fn precision_recall(predicted: &BTreeSet<usize>, truth: &BTreeSet<usize>) -> (f64, f64) {
    let hit = predicted.intersection(truth).count() as f64;
    let precision = if predicted.is_empty() {
        1.0
    } else {
        hit / predicted.len() as f64
    };
    let recall = if truth.is_empty() {
        1.0
    } else {
        hit / truth.len() as f64
    };
    (precision, recall)
}

/// Trailing mean over at most `window` elements.
pub fn moving_average(series: &[f64], window: usize) -> Result<Vec<f64>> {
    if window == 0 {
        return Err(Error::ConfigInvalid("window must be at least 1".into()));
    }
    let mut out = Vec::with_capacity(series.len());
    let mut acc = 0.0;
    for i in 0..series.len() {
        acc += series[i];
        if i >= window {
            acc -= series[i - window];
        }
        out.push(acc / (i + 1).min(window) as f64);
    }
    Ok(out)
}
