//! QFI from correlations of the Heisenberg-picture generator
//! `V(t) = U^{-t} J_z U^t`, whose sum over `t` generates the
//! alpha-dependence of `U^t`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::floquet::{FloquetCache, FloquetStepper, KickedTopParams};
use crate::linalg::{CMatrix, CVector, C64};
use crate::spin::{DensityMatrix, PureState, SpinQuantum};

fn jz_apply(spin: SpinQuantum, v: &CVector) -> CVector {
    CVector::from_iterator(v.len(), v.iter().enumerate().map(|(i, z)| z * spin.m(i)))
}

/// `Re <a|J_z|b>`.
fn jz_element(spin: SpinQuantum, a: &[C64], b: &[C64]) -> f64 {
    a.iter()
        .zip(b)
        .enumerate()
        .map(|(i, (x, y))| spin.m(i) * (x.conj() * y).re)
        .sum()
}

fn check(state: &PureState, cache: &FloquetCache) -> Result<()> {
    if state.spin != cache.spin() {
        return Err(Error::DimensionMismatch {
            expected: cache.dim(),
            got: state.dim(),
        });
    }
    Ok(())
}

/// `C(t') = Re<V(t') V(0)> - <V(t')><V(0)>` for `t' = 0 .. len-1`.
pub fn autocorrelation(state: &PureState, cache: &FloquetCache, params: KickedTopParams, len: usize) -> Result<Vec<f64>> {
    check(state, cache)?;
    let spin = state.spin;
    let stepper = cache.stepper(params);
    let n = state.dim();
    // column 0: U^t psi, column 1: U^t J_z psi
    let mut pair = CMatrix::zeros(n, 2);
    pair.set_column(0, &state.amps);
    pair.set_column(1, &jz_apply(spin, &state.amps));
    let mean0 = state.mean_jz();
    let mut out = Vec::with_capacity(len);
    for t in 0..len {
        if t > 0 {
            stepper.apply_columns(&mut pair);
        }
        let psi = pair.column(0);
        let corr = jz_element(spin, psi.as_slice(), pair.column(1).as_slice());
        let mean_t = jz_element(spin, psi.as_slice(), psi.as_slice());
        out.push(corr - mean_t * mean0);
    }
    Ok(out)
}

/// Mixed-state version of [`autocorrelation`].
pub fn autocorrelation_mixed(
    rho: &DensityMatrix,
    cache: &FloquetCache,
    params: KickedTopParams,
    len: usize,
) -> Result<Vec<f64>> {
    if rho.spin != cache.spin() {
        return Err(Error::DimensionMismatch {
            expected: cache.dim(),
            got: rho.dim(),
        });
    }
    let spin = rho.spin;
    let stepper = cache.stepper(params);
    let n = rho.dim();
    let jz_diag = |x: &CMatrix| -> C64 { (0..n).map(|i| x[(i, i)] * spin.m(i)).sum() };
    let mut state = rho.rho.clone();
    // J_z rho, carried along as U^t (J_z rho) U^-t
    let mut shifted = CMatrix::from_fn(n, n, |a, b| rho.rho[(a, b)] * spin.m(a));
    let mean0 = jz_diag(&rho.rho).re;
    let mut out = Vec::with_capacity(len);
    for t in 0..len {
        if t > 0 {
            state = stepper.conjugate(&state);
            shifted = stepper.conjugate(&shifted);
        }
        out.push(jz_diag(&shifted).re - jz_diag(&state).re * mean0);
    }
    Ok(out)
}

/// `4 (t C(0) + 2 sum_{t'=1}^{t-1} (t - t') C(t'))`.
///
/// Exact when `C` depends only on the time difference, e.g. for
/// stationary states.
pub fn linear_response_qfi(corr: &[f64], t: usize) -> Result<f64> {
    if t < 1 || corr.len() < t {
        return Err(Error::param("t", format!("need 1 <= t <= {}", corr.len())));
    }
    let tail: f64 = (1..t).map(|s| (t - s) as f64 * corr[s]).sum();
    Ok(4.0 * (t as f64 * corr[0] + 2.0 * tail))
}

/// `sum_{s, s' in [start, end)} Re Cov(V(s), V(s'))`.
fn covariance_sum(
    state: &PureState,
    stepper: &FloquetStepper<'_>,
    start: usize,
    end: usize,
) -> f64 {
    let spin = state.spin;
    let n = state.dim();
    let mut psi = state.amps.clone();
    for _ in 0..start {
        stepper.apply(&mut psi);
    }
    let len = end - start;
    // column r holds U^{s - s'} J_z psi_{s'} with s' = start + r
    let mut chain = CMatrix::zeros(n, len);
    let mut means = Vec::with_capacity(len);
    let mut total = 0.0;
    for r in 0..len {
        if r > 0 {
            stepper.apply(&mut psi);
            let mut active = chain.columns(0, r).into_owned();
            stepper.apply_columns(&mut active);
            chain.columns_mut(0, r).copy_from(&active);
        }
        chain.set_column(r, &jz_apply(spin, &psi));
        let mean = jz_element(spin, psi.as_slice(), psi.as_slice());
        means.push(mean);
        for q in 0..=r {
            let cov = jz_element(spin, psi.as_slice(), chain.column(q).as_slice()) - mean * means[q];
            total += if q == r { cov } else { 2.0 * cov };
        }
    }
    total
}

/// QFI after `t` periods as `4 Var(sum_s V(s))`, evaluated from the
/// two-time correlations.
pub fn autocorrelation_qfi(state: &PureState, cache: &FloquetCache, params: KickedTopParams, t: usize) -> Result<f64> {
    check(state, cache)?;
    if t < 1 {
        return Err(Error::param("t", "must be >= 1"));
    }
    Ok(4.0 * covariance_sum(state, &cache.stepper(params), 0, t))
}

/// Two-time correlation averaged over `s, s'` in `[start, end)`.
pub fn window_correlation(
    state: &PureState,
    cache: &FloquetCache,
    params: KickedTopParams,
    window: (usize, usize),
) -> Result<f64> {
    check(state, cache)?;
    let (start, end) = window;
    if end <= start {
        return Err(Error::param("window", format!("empty window [{start}, {end})")));
    }
    let len = (end - start) as f64;
    Ok(covariance_sum(state, &cache.stepper(params), start, end) / (len * len))
}

/// Long-time correlation level and the transport coefficient it implies.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChaoticScalingInputs {
    /// Number of invariant subspaces.
    pub subspaces: usize,
    pub sigma_cl: f64,
    /// Long-time correlation average in units of `J_z`.
    pub c_bar: f64,
    /// Same with `J_z` rescaled by `1/J`.
    pub c_bar_rescaled: f64,
    pub big_j: f64,
}

impl ChaoticScalingInputs {
    pub fn new(c_bar: f64, subspaces: usize, big_j: f64) -> Result<Self> {
        if subspaces < 1 {
            return Err(Error::param("subspaces", "must be >= 1"));
        }
        let c_bar = c_bar.max(0.0);
        Ok(Self {
            subspaces,
            sigma_cl: c_bar / (2.0 * big_j * subspaces as f64),
            c_bar,
            c_bar_rescaled: c_bar / (big_j * big_j),
            big_j,
        })
    }

    /// `8 s sigma t^2 J`, equal to `4 c_bar t^2`.
    pub fn predicted_qfi(&self, t: f64) -> f64 {
        8.0 * self.subspaces as f64 * self.sigma_cl * t * t * self.big_j
    }
}

/// Estimates the long-time correlation level from a time window.
pub fn sigma_cl_estimate(
    state: &PureState,
    cache: &FloquetCache,
    params: KickedTopParams,
    window: (usize, usize),
    subspaces: usize,
) -> Result<ChaoticScalingInputs> {
    let c_bar = window_correlation(state, cache, params, window)?;
    ChaoticScalingInputs::new(c_bar, subspaces, cache.spin().big_j())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimation::qfi_pure;
    use crate::floquet::{evolve_with_derivative, qfi_series};
    use crate::linalg::rel_diff;
    use crate::spin::{coherent_state, PhaseAngles};
    use std::f64::consts::PI;

    fn setup(j: f64) -> (SpinQuantum, FloquetCache) {
        let s = SpinQuantum::from_j(j).unwrap();
        (s, FloquetCache::new(s).unwrap())
    }

    #[test]
    fn maximally_mixed_zero_lag() {
        let (s, cache) = setup(7.0);
        let c = autocorrelation_mixed(&DensityMatrix::maximally_mixed(s), &cache, KickedTopParams::new(PI / 2.0, 3.0).unwrap(), 3).unwrap();
        assert!((c[0] - 7.0 * 8.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn mixed_matches_pure_for_pure_input() {
        let (s, cache) = setup(4.0);
        let p = KickedTopParams::new(1.0, 5.0).unwrap();
        let psi = coherent_state(s, PhaseAngles::new(0.8, 2.0).unwrap());
        let a = autocorrelation(&psi, &cache, p, 6).unwrap();
        let b = autocorrelation_mixed(&psi.to_density(), &cache, p, 6).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-11);
        }
    }

    #[test]
    fn unkicked_correlation_is_flat_and_telescopes() {
        let j = 9.0;
        let (s, cache) = setup(j);
        let p = KickedTopParams::new(0.4, 0.0).unwrap();
        let psi = coherent_state(s, PhaseAngles::new(PI / 2.0, 0.3).unwrap());
        let c = autocorrelation(&psi, &cache, p, 12).unwrap();
        assert!(c.iter().all(|v| (v - j / 2.0).abs() < 1e-10));
        for t in 1..=12 {
            let q = linear_response_qfi(&c, t).unwrap();
            assert!(rel_diff(q, 2.0 * (t * t) as f64 * j) < 1e-12);
        }
    }

    #[test]
    fn two_time_route_matches_derivative_route() {
        let (s, cache) = setup(12.0);
        let psi = coherent_state(s, PhaseAngles::new(1.3, 0.7).unwrap());
        for k in [0.0, 3.0, 30.0] {
            let p = KickedTopParams::new(PI / 2.0, k).unwrap();
            let series = qfi_series(&psi, &cache, p, 15).unwrap();
            for t in [1, 4, 15] {
                let a = autocorrelation_qfi(&psi, &cache, p, t).unwrap();
                assert!(rel_diff(a, series[t]) < 1e-9, "k={k} t={t}: {a} vs {}", series[t]);
            }
        }
    }

    #[test]
    fn full_window_reproduces_qfi() {
        let (s, cache) = setup(5.0);
        let p = KickedTopParams::new(PI / 2.0, 30.0).unwrap();
        let psi = coherent_state(s, PhaseAngles::new(PI / 2.0, PI / 2.0).unwrap());
        let t = 9;
        let (out, d) = evolve_with_derivative(&psi, &cache, p, t).unwrap();
        let c = window_correlation(&psi, &cache, p, (0, t)).unwrap();
        assert!(rel_diff(4.0 * c * (t * t) as f64, qfi_pure(&out, &d).unwrap()) < 1e-9);
        let inputs = ChaoticScalingInputs::new(c, 3, s.big_j()).unwrap();
        assert!(rel_diff(inputs.predicted_qfi(t as f64), 4.0 * c * (t * t) as f64) < 1e-12);
        assert!(inputs.sigma_cl >= 0.0);
        assert!(window_correlation(&psi, &cache, p, (3, 3)).is_err());
    }
}
