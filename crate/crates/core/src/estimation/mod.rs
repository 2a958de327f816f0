//! Fisher information for estimating the precession angle.

mod autocorr;
mod povm;
mod qfi;

pub use autocorr::{
    autocorrelation, autocorrelation_mixed, autocorrelation_qfi, linear_response_qfi, sigma_cl_estimate,
    window_correlation, ChaoticScalingInputs,
};
pub use povm::{
    fisher_from_distribution, fisher_matrix, fisher_povm, fisher_pure, fisher_with_k_jitter, gauss_legendre, jy_projective_povm,
    Effect, KJitter, MeasurementModel, OutcomeDistribution, Povm, PreparedState,
};
pub use qfi::{
    optimal_povm, qfi_generator, qfi_matrix, qfi_mixed_sld, qfi_pure, qfi_real_diagonal_generator, qfi_with_min_eigenvalue,
    sld_operator,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parameters a Fisher value was computed at.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EstimationMeta {
    pub j: f64,
    pub k: f64,
    pub alpha: f64,
    pub gamma: f64,
    pub theta: f64,
    pub phi: f64,
}

/// A Fisher or quantum Fisher value at time `t`, with `rescaled = value / t`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimationResult {
    pub value: f64,
    pub t: usize,
    pub rescaled: f64,
    pub meta: EstimationMeta,
}

impl EstimationResult {
    pub fn new(value: f64, t: usize, meta: EstimationMeta) -> Self {
        let rescaled = if t >= 1 { value / t as f64 } else { 0.0 };
        Self { value, t, rescaled, meta }
    }
}

/// Entry with the largest `value / t`; ties go to the smallest `t`.
pub fn max_rescaled(series: &[EstimationResult]) -> Result<EstimationResult> {
    let mut best: Option<&EstimationResult> = None;
    for r in series {
        best = match best {
            None => Some(r),
            Some(b) if r.rescaled > b.rescaled || (r.rescaled == b.rescaled && r.t < b.t) => Some(r),
            keep => keep,
        };
    }
    best.copied().ok_or(Error::Empty("series"))
}

/// `2 t^2 j sin^2(theta)`: coherent state on the unkicked top.
pub fn benchmark_top_cs(j: f64, t: f64, theta: f64) -> f64 {
    2.0 * t * t * j * theta.sin().powi(2)
}

/// [`benchmark_top_cs`] at the optimal `theta = pi/2`.
pub fn benchmark_top_cs_optimal(j: f64, t: f64) -> f64 {
    2.0 * t * t * j
}

/// `4 t^2 j^2`: GHZ state on the unkicked top.
pub fn benchmark_top_ghz(j: f64, t: f64) -> f64 {
    4.0 * t * t * j * j
}

pub fn gain(value: f64, benchmark: f64) -> Result<f64> {
    if !(benchmark > 0.0) {
        return Err(Error::param("benchmark", format!("{benchmark} must be positive")));
    }
    Ok(value / benchmark)
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::DimensionMismatch {
            expected: xs.len(),
            got: ys.len(),
        });
    }
    if xs.len() < 3 {
        return Err(Error::param("points", format!("need at least 3, got {}", xs.len())));
    }
    for (index, (&x, &y)) in xs.iter().zip(ys).enumerate() {
        if !(x > 0.0 && y > 0.0) {
            return Err(Error::NonPositiveData { index, x, y });
        }
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::param("xs", "all abscissae coincide"));
    }
    Ok(sxy / sxx)
}
