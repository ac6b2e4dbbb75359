//! Probability vectors over a finite category domain and the distances used
//! to compare them.

use crate::error::{Error, Result};

/// Tolerance on the total mass of a [`ProbabilityVector`].
pub const SUM_TOLERANCE: f64 = 1e-9;

/// Default per-bin smoothing for [`kl_divergence`].
pub const DEFAULT_KL_SMOOTHING: f64 = 1e-6;

/// The fixed ℓ1 sensitivity of any released probability vector.
///
/// Two neighbouring inputs normalize to two points of the simplex, and no two
/// such points are further apart than 2 in ℓ1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SensitivityBound;

impl SensitivityBound {
    pub const DELTA_Q: f64 = 2.0;

    pub const fn delta_q(self) -> f64 {
        Self::DELTA_Q
    }
}

/// Non-negative mass per category, summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityVector {
    probs: Vec<f64>,
}

impl ProbabilityVector {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidPdf("empty domain".into()));
        }
        if let Some(bad) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(Error::InvalidPdf(format!(
                "entry {bad} is not a finite non-negative mass"
            )));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::InvalidPdf(format!("entries sum to {sum}")));
        }
        Ok(Self { probs })
    }

    pub fn uniform(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidDomain("k must be at least 1".into()));
        }
        Ok(Self {
            probs: vec![1.0 / k as f64; k],
        })
    }

    /// Convex combination of equally weighted vectors.
    pub fn mixture(parts: &[&ProbabilityVector]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::InvalidPdf("mixture of nothing".into()))?;
        let k = first.domain_size();
        let mut acc = vec![0.0; k];
        for p in parts {
            check_domains(first, p)?;
            for (a, x) in acc.iter_mut().zip(p.probs()) {
                *a += x;
            }
        }
        let w = parts.len() as f64;
        acc.iter_mut().for_each(|a| *a /= w);
        Self::new(acc)
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn domain_size(&self) -> usize {
        self.probs.len()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.probs
    }
}

impl std::ops::Index<usize> for ProbabilityVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.probs[i]
    }
}

/// Raw per-category counts for one slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountVector {
    counts: Vec<u64>,
    total: u64,
}

impl CountVector {
    pub fn new(counts: Vec<u64>) -> Self {
        let total = counts.iter().sum();
        Self { counts, total }
    }

    pub fn zeros(k: usize) -> Self {
        Self::new(vec![0; k])
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn domain_size(&self) -> usize {
        self.counts.len()
    }

    pub fn add(&mut self, other: &CountVector) -> Result<()> {
        if self.domain_size() != other.domain_size() {
            return Err(Error::DomainMismatch {
                left: self.domain_size(),
                right: other.domain_size(),
            });
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.total += other.total;
        Ok(())
    }
}

pub fn normalize(counts: &CountVector) -> Result<ProbabilityVector> {
    if counts.total == 0 {
        return Err(Error::ZeroTotal);
    }
    let n = counts.total as f64;
    Ok(ProbabilityVector {
        probs: counts.counts.iter().map(|&c| c as f64 / n).collect(),
    })
}

fn check_domains(p: &ProbabilityVector, q: &ProbabilityVector) -> Result<()> {
    if p.domain_size() == q.domain_size() {
        Ok(())
    } else {
        Err(Error::DomainMismatch {
            left: p.domain_size(),
            right: q.domain_size(),
        })
    }
}

pub fn l1_distance(p: &ProbabilityVector, q: &ProbabilityVector) -> Result<f64> {
    check_domains(p, q)?;
    Ok(p.probs.iter().zip(&q.probs).map(|(a, b)| (a - b).abs()).sum())
}

/// KL(p ‖ q) after adding `smoothing` to every bin of both inputs.
///
/// With zero smoothing, mass in `p` over a zero of `q` gives `f64::INFINITY`.
pub fn kl_divergence(p: &ProbabilityVector, q: &ProbabilityVector, smoothing: f64) -> Result<f64> {
    check_domains(p, q)?;
    if !(smoothing >= 0.0 && smoothing.is_finite()) {
        return Err(Error::ConfigInvalid(format!("smoothing {smoothing} must be >= 0")));
    }
    let k = p.domain_size() as f64;
    let zp = 1.0 + smoothing * k;
    let zq = 1.0 + smoothing * k;
    let mut kl = 0.0;
    for (a, b) in p.probs.iter().zip(&q.probs) {
        let a = (a + smoothing) / zp;
        let b = (b + smoothing) / zq;
        if a == 0.0 {
            continue;
        }
        if b == 0.0 {
            return Ok(f64::INFINITY);
        }
        kl += a * (a / b).ln();
    }
    Ok(kl.max(0.0))
}

/// Mean squared difference per bin.
pub fn mse(p: &ProbabilityVector, q: &ProbabilityVector) -> Result<f64> {
    check_domains(p, q)?;
    let ss: f64 = p.probs.iter().zip(&q.probs).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(ss / p.domain_size() as f64)
}

/// Rounds `x` to the nearest multiple of `p`, halves going up.
pub fn quantize(x: f64, p: f64) -> f64 {
    (x / p + 0.5).floor() * p
}
