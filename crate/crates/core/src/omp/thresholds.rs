//! Closed-form recovery thresholds.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ric::in_sharp_region;

/// `1/sqrt(K+1)`, the sharp RIC bound for K-sparse recovery.
pub fn sharp_ric_bound(k: usize) -> f64 {
    1.0 / ((k + 1) as f64).sqrt()
}

/// `(sqrt(4K+1) - 1) / (2K)`, the RIC bound used by earlier analyses.
pub fn prior_art_ric_bound(k: usize) -> f64 {
    let k = k as f64;
    ((4.0 * k + 1.0).sqrt() - 1.0) / (2.0 * k)
}

fn check_noise(eps: f64) -> Result<()> {
    if eps.is_finite() && eps >= 0.0 {
        Ok(())
    } else {
        Err(Error::ParameterOutOfRange(format!("noise level must be finite and >= 0, got {eps}")))
    }
}

fn sharp_denominator(k: usize, delta: f64) -> Result<f64> {
    if k == 0 || !in_sharp_region(k, delta) {
        return Err(Error::OutOfSharpRegion { k, delta });
    }
    let d = 1.0 - ((k + 1) as f64).sqrt() * delta;
    if d <= 0.0 {
        return Err(Error::OutOfSharpRegion { k, delta });
    }
    Ok(d)
}

/// Minimum nonzero magnitude guaranteeing support recovery under
/// `||v||_2 <= eps` with the residual rule `||r||_2 <= eps`:
/// `2 eps / (1 - sqrt(K+1) delta)`.
pub fn min_magnitude_threshold_l2(k: usize, delta: f64, eps: f64) -> Result<f64> {
    check_noise(eps)?;
    Ok(2.0 * eps / sharp_denominator(k, delta)?)
}

/// The correlation threshold for `||A^T v||_inf <= eps`.
///
/// General form `(1 + sqrt((1 + delta2) K / (1 - delta_k1))) eps`; with
/// `unit_norm_columns` the relaxed `(1 + sqrt(K) / sqrt(1 - delta_k1)) eps`.
pub fn linf_stopping_threshold(k: usize, delta2: f64, delta_k1: f64, eps: f64, unit_norm_columns: bool) -> Result<f64> {
    check_noise(eps)?;
    if k == 0 {
        return Err(Error::ParameterOutOfRange("K must be positive".into()));
    }
    if !(delta_k1.is_finite() && (0.0..1.0).contains(&delta_k1)) {
        return Err(Error::ParameterOutOfRange(format!("delta_(K+1) must lie in [0, 1), got {delta_k1}")));
    }
    if !(delta2.is_finite() && delta2 >= 0.0) {
        return Err(Error::ParameterOutOfRange(format!("delta2 must be >= 0, got {delta2}")));
    }
    if delta2 > delta_k1 {
        return Err(Error::InvalidDeltaOrder { delta2, delta_k1 });
    }
    let k = k as f64;
    let slack = 1.0 - delta_k1;
    let factor = if unit_norm_columns {
        1.0 + k.sqrt() / slack.sqrt()
    } else {
        1.0 + ((1.0 + delta2) * k / slack).sqrt()
    };
    Ok(factor * eps)
}

/// Minimum nonzero magnitude guaranteeing support recovery under
/// `||A^T v||_inf <= eps`: `2 / (1 - sqrt(K+1) delta_k1)` times the stopping
/// threshold.
pub fn min_magnitude_threshold_linf(
    k: usize,
    delta2: f64,
    delta_k1: f64,
    eps: f64,
    unit_norm_columns: bool,
) -> Result<f64> {
    let stop = linf_stopping_threshold(k, delta2, delta_k1, eps, unit_norm_columns)?;
    Ok(2.0 * stop / sharp_denominator(k, delta_k1)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorArtThresholds {
    pub ric_bound: f64,
    pub min_magnitude: f64,
}

/// Earlier sufficient conditions for the l2 noise model: the RIC bound
/// `(sqrt(4K+1) - 1) / (2K)` and the magnitude bound
/// `(sqrt(1+delta) + 1) eps / (1 - delta - sqrt(1-delta) sqrt(K) delta)`.
///
/// Fails with [`Error::DegenerateDenominator`] when the magnitude bound's
/// denominator is not positive.
pub fn prior_art_thresholds(k: usize, delta: f64, eps: f64) -> Result<PriorArtThresholds> {
    check_noise(eps)?;
    if k == 0 {
        return Err(Error::ParameterOutOfRange("K must be positive".into()));
    }
    if !(delta.is_finite() && (0.0..1.0).contains(&delta)) {
        return Err(Error::ParameterOutOfRange(format!("delta must lie in [0, 1), got {delta}")));
    }
    let denom = 1.0 - delta - (1.0 - delta).sqrt() * (k as f64).sqrt() * delta;
    if denom <= 0.0 {
        return Err(Error::DegenerateDenominator(denom, "prior_art_thresholds"));
    }
    Ok(PriorArtThresholds {
        ric_bound: prior_art_ric_bound(k),
        min_magnitude: ((1.0 + delta).sqrt() + 1.0) * eps / denom,
    })
}
