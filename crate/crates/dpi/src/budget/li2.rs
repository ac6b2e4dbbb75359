//! The dilogarithm on [-1, 1] and its inverse on [0, 1].

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Li2(1).
pub const LI2_ONE: f64 = PI * PI / 6.0;

fn series(z: f64) -> f64 {
    let mut sum = 0.0;
    let mut pow = z;
    for t in 1..200u32 {
        let term = pow / (t as f64 * t as f64);
        sum += term;
        if term.abs() < 1e-18 {
            break;
        }
        pow *= z;
    }
    sum
}

pub(crate) fn li2_unchecked(z: f64) -> f64 {
    if z == 1.0 {
        LI2_ONE
    } else if z == -1.0 {
        -LI2_ONE / 2.0
    } else if z.abs() <= 0.5 {
        series(z)
    } else if z > 0.5 {
        // reflection about 1/2
        LI2_ONE - z.ln() * (-z).ln_1p() - series(1.0 - z)
    } else {
        // Landen: maps [-1, -1/2) into (1/3, 1/2]
        let l = (-z).ln_1p();
        -series(z / (z - 1.0)) - 0.5 * l * l
    }
}

/// `Σ_{t≥1} z^t / t²` for `z` in [-1, 1].
pub fn li2(z: f64) -> Result<f64> {
    if !(-1.0..=1.0).contains(&z) {
        return Err(Error::OutOfDomain(format!("li2 needs |z| <= 1, got {z}")));
    }
    Ok(li2_unchecked(z))
}

/// The `z` in [0, 1] with `li2(z) = y`.
pub fn li2_inv(y: f64) -> Result<f64> {
    if !(0.0..=LI2_ONE).contains(&y) {
        return Err(Error::OutOfDomain(format!("li2_inv needs y in [0, pi^2/6], got {y}")));
    }
    if y == 0.0 {
        return Ok(0.0);
    }
    if y == LI2_ONE {
        return Ok(1.0);
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if li2_unchecked(mid) < y {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let z = 0.5 * (lo + hi);
    let slope = -(-z).ln_1p() / z;
    let polished = z - (li2_unchecked(z) - y) / slope;
    if polished.is_finite()
        && (lo..=hi).contains(&polished)
        && (li2_unchecked(polished) - y).abs() <= (li2_unchecked(z) - y).abs()
    {
        Ok(polished)
    } else {
        Ok(z)
    }
}
