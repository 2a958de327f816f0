//! Stroboscopic kicked-top dynamics.
//!
//! One period is `U = exp(-i k J_y^2 / 2J) exp(-i alpha J_z)`: the state is
//! first precessed about z, then kicked. The kick is applied in the `J_y`
//! eigenbasis, which is obtained from the real tridiagonal `J_x` via the
//! quarter turn `J_y = R J_x R^dagger`, `R = exp(-i pi/2 J_z)`. A step
//! therefore costs two real `N x N` matrix-vector products and no unitary
//! is ever materialised.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{symmetric_eigen, CMatrix, CVector, C64};
use crate::spin::{jx_real, PureState, SpinQuantum};

/// Precession angle per period and kicking strength; the period is 1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KickedTopParams {
    pub alpha: f64,
    pub k: f64,
}

impl KickedTopParams {
    /// Kick period in stroboscopic units.
    pub const TAU: f64 = 1.0;

    pub fn new(alpha: f64, k: f64) -> Result<Self> {
        if !alpha.is_finite() {
            return Err(Error::param("alpha", "must be finite"));
        }
        if !(k >= 0.0) || !k.is_finite() {
            return Err(Error::param("k", format!("{k} must be finite and >= 0")));
        }
        Ok(Self { alpha, k })
    }

    pub fn with_alpha(self, alpha: f64) -> Self {
        Self { alpha, ..self }
    }
}

/// `J_y` eigenbasis and phase tables for one spin size.
#[derive(Clone, Debug)]
pub struct FloquetCache {
    spin: SpinQuantum,
    /// Orthogonal eigenvectors of `J_x`, columns sorted by eigenvalue.
    w: DMatrix<f64>,
    wt: DMatrix<f64>,
    /// Eigenvalues `-j, ..., j` (shared by `J_x` and `J_y`).
    eigvals: Vec<f64>,
    /// Diagonal of `R = exp(-i pi/2 J_z)`.
    quarter_turn: Vec<C64>,
}

impl FloquetCache {
    pub const UNITARY_TOL: f64 = 1e-11;
    pub const EIGVAL_TOL: f64 = 1e-10;

    pub fn new(spin: SpinQuantum) -> Result<Self> {
        let n = spin.dim();
        let (vals, w) = symmetric_eigen(&jx_real(spin))?;
        let exact: Vec<f64> = (0..n).map(|i| -spin.j() + i as f64).collect();
        for (i, (&v, &e)) in vals.iter().zip(&exact).enumerate() {
            // tolerance scales mildly with the spectral radius
            if (v - e).abs() > Self::EIGVAL_TOL * spin.j().max(1.0) {
                return Err(Error::Eigen(format!("J_y eigenvalue {i}: {v} vs {e}")));
            }
        }
        if vals.windows(2).any(|p| p[1] - p[0] <= 0.5) {
            return Err(Error::Eigen("J_y spectrum unexpectedly degenerate".into()));
        }
        let quarter_turn = (0..n)
            .map(|i| C64::from_polar(1.0, -0.5 * PI * spin.m(i)))
            .collect();
        let wt = w.transpose();
        Ok(Self {
            spin,
            w,
            wt,
            eigvals: exact,
            quarter_turn,
        })
    }

    pub fn spin(&self) -> SpinQuantum {
        self.spin
    }

    pub fn dim(&self) -> usize {
        self.spin.dim()
    }

    pub fn jy_eigvals(&self) -> &[f64] {
        &self.eigvals
    }

    /// Real orthogonal `J_x` eigenvectors `W`, with `V = R W`.
    pub fn jx_eigvecs(&self) -> &DMatrix<f64> {
        &self.w
    }

    pub fn quarter_turn(&self) -> &[C64] {
        &self.quarter_turn
    }

    /// Dense unitary `V` with `V^dagger J_y V` diagonal.
    pub fn jy_eigvecs(&self) -> CMatrix {
        let n = self.dim();
        CMatrix::from_fn(n, n, |r, col| self.quarter_turn[r] * self.w[(r, col)])
    }

    /// `exp(-i k mu^2 / 2J)` per `J_y` eigenvalue `mu`.
    pub fn kick_phases(&self, k: f64) -> Vec<C64> {
        let two_j = 2.0 * self.spin.big_j();
        self.eigvals
            .iter()
            .map(|mu| C64::from_polar(1.0, -k * mu * mu / two_j))
            .collect()
    }

    /// `exp(-i alpha m)` per basis state.
    pub fn precession_phases(&self, alpha: f64) -> Vec<C64> {
        (0..self.dim())
            .map(|i| C64::from_polar(1.0, -alpha * self.spin.m(i)))
            .collect()
    }

    pub fn stepper(&self, params: KickedTopParams) -> FloquetStepper<'_> {
        FloquetStepper {
            cache: self,
            kick: self.kick_phases(params.k),
            precession: self.precession_phases(params.alpha),
        }
    }
}

/// Applies one Floquet period (or its inverse) for fixed parameters.
#[derive(Clone, Debug)]
pub struct FloquetStepper<'a> {
    cache: &'a FloquetCache,
    kick: Vec<C64>,
    precession: Vec<C64>,
}

impl<'a> FloquetStepper<'a> {
    pub fn cache(&self) -> &'a FloquetCache {
        self.cache
    }

    pub fn kick_phases(&self) -> &[C64] {
        &self.kick
    }

    pub fn precession_phases(&self) -> &[C64] {
        &self.precession
    }

    /// Kick `exp(-i k J_y^2/2J)` (or its inverse) on every column of `x`.
    fn kick_columns(&self, x: &mut CMatrix, inverse: bool) {
        let n = x.nrows();
        let cols = x.ncols();
        let r = &self.cache.quarter_turn;
        // real representation [Re | Im] of R^dagger x
        let mut packed = DMatrix::<f64>::zeros(n, 2 * cols);
        for col in 0..cols {
            for i in 0..n {
                let z = r[i].conj() * x[(i, col)];
                packed[(i, col)] = z.re;
                packed[(i, cols + col)] = z.im;
            }
        }
        let mut diag = &self.cache.wt * packed;
        for col in 0..cols {
            for i in 0..n {
                let ph = if inverse { self.kick[i].conj() } else { self.kick[i] };
                let z = ph * C64::new(diag[(i, col)], diag[(i, cols + col)]);
                diag[(i, col)] = z.re;
                diag[(i, cols + col)] = z.im;
            }
        }
        let back = &self.cache.w * diag;
        for col in 0..cols {
            for i in 0..n {
                x[(i, col)] = r[i] * C64::new(back[(i, col)], back[(i, cols + col)]);
            }
        }
    }

    fn precess_columns(&self, x: &mut CMatrix, inverse: bool) {
        for mut col in x.column_iter_mut() {
            for (z, p) in col.iter_mut().zip(&self.precession) {
                *z *= if inverse { p.conj() } else { *p };
            }
        }
    }

    /// `x <- U x`, column-wise.
    pub fn apply_columns(&self, x: &mut CMatrix) {
        self.precess_columns(x, false);
        self.kick_columns(x, false);
    }

    /// `x <- U^dagger x`, column-wise.
    pub fn apply_inverse_columns(&self, x: &mut CMatrix) {
        self.kick_columns(x, true);
        self.precess_columns(x, true);
    }

    pub fn apply(&self, v: &mut CVector) {
        let mut m = CMatrix::from_column_slice(v.len(), 1, v.as_slice());
        self.apply_columns(&mut m);
        v.copy_from_slice(m.as_slice());
    }

    pub fn apply_inverse(&self, v: &mut CVector) {
        let mut m = CMatrix::from_column_slice(v.len(), 1, v.as_slice());
        self.apply_inverse_columns(&mut m);
        v.copy_from_slice(m.as_slice());
    }

    /// `U X U^dagger`.
    pub fn conjugate(&self, x: &CMatrix) -> CMatrix {
        let n = x.nrows();
        let p = &self.precession;
        let r = &self.cache.quarter_turn;
        // R^dagger P X P^dagger R, elementwise
        let y = CMatrix::from_fn(n, n, |a, b| {
            r[a].conj() * p[a] * x[(a, b)] * p[b].conj() * r[b]
        });
        let mut z = crate::linalg::real_congruence_t(&self.cache.w, &y);
        for b in 0..n {
            for a in 0..n {
                z[(a, b)] *= self.kick[a] * self.kick[b].conj();
            }
        }
        let back = crate::linalg::real_congruence(&self.cache.w, &z);
        CMatrix::from_fn(n, n, |a, b| r[a] * back[(a, b)] * r[b].conj())
    }
}

/// Dense Floquet unitary, for tests and small systems.
pub fn floquet_operator(cache: &FloquetCache, params: KickedTopParams) -> CMatrix {
    let n = cache.dim();
    let stepper = cache.stepper(params);
    let mut u = CMatrix::identity(n, n);
    stepper.apply_columns(&mut u);
    u
}

fn check_dim(cache: &FloquetCache, state: &PureState) -> Result<()> {
    if state.spin != cache.spin() {
        return Err(Error::DimensionMismatch {
            expected: cache.dim(),
            got: state.dim(),
        });
    }
    Ok(())
}

/// One period `|psi> <- U |psi>`.
pub fn step_state(state: &PureState, cache: &FloquetCache, params: KickedTopParams) -> Result<PureState> {
    check_dim(cache, state)?;
    let mut amps = state.amps.clone();
    cache.stepper(params).apply(&mut amps);
    Ok(PureState {
        spin: state.spin,
        amps,
    })
}

/// `U^t |psi>`.
pub fn evolve(state: &PureState, cache: &FloquetCache, params: KickedTopParams, t: usize) -> Result<PureState> {
    check_dim(cache, state)?;
    let stepper = cache.stepper(params);
    let mut amps = state.amps.clone();
    for _ in 0..t {
        stepper.apply(&mut amps);
    }
    Ok(PureState {
        spin: state.spin,
        amps,
    })
}

/// Jointly propagated state and its exact alpha-derivative.
///
/// Uses `dU/dalpha = -i U J_z`, so one step maps
/// `(psi, dpsi) -> (U psi, U (dpsi - i J_z psi))`.
#[derive(Clone, Debug)]
pub struct DerivativeTrajectory<'a> {
    stepper: FloquetStepper<'a>,
    /// Column 0 is `psi`, column 1 is `dpsi/dalpha`.
    pair: CMatrix,
    time: usize,
}

impl<'a> DerivativeTrajectory<'a> {
    pub fn new(state: &PureState, cache: &'a FloquetCache, params: KickedTopParams) -> Result<Self> {
        check_dim(cache, state)?;
        let n = state.dim();
        let mut pair = CMatrix::zeros(n, 2);
        pair.set_column(0, &state.amps);
        Ok(Self {
            stepper: cache.stepper(params),
            pair,
            time: 0,
        })
    }

    pub fn time(&self) -> usize {
        self.time
    }

    pub fn step(&mut self) {
        let spin = self.stepper.cache.spin();
        for i in 0..self.pair.nrows() {
            let psi = self.pair[(i, 0)];
            self.pair[(i, 1)] -= C64::new(0.0, spin.m(i)) * psi;
        }
        self.stepper.apply_columns(&mut self.pair);
        self.time += 1;
    }

    pub fn state(&self) -> PureState {
        PureState {
            spin: self.stepper.cache.spin(),
            amps: self.pair.column(0).into_owned(),
        }
    }

    pub fn derivative(&self) -> CVector {
        self.pair.column(1).into_owned()
    }

    /// Pure-state QFI of the current pair.
    pub fn qfi(&self) -> f64 {
        let psi = self.pair.column(0);
        let d = self.pair.column(1);
        let overlap = psi.dotc(&d);
        4.0 * (d - psi * overlap).norm_squared()
    }

    /// `<J_z>` of the current state.
    pub fn mean_jz(&self) -> f64 {
        let spin = self.stepper.cache.spin();
        self.pair
            .column(0)
            .iter()
            .enumerate()
            .map(|(i, z)| spin.m(i) * z.norm_sqr())
            .sum()
    }
}

/// `(psi_t, d psi_t / d alpha)` after `t` periods, starting from `dpsi_0 = 0`.
pub fn evolve_with_derivative(
    state: &PureState,
    cache: &FloquetCache,
    params: KickedTopParams,
    t: usize,
) -> Result<(PureState, CVector)> {
    let mut traj = DerivativeTrajectory::new(state, cache, params)?;
    for _ in 0..t {
        traj.step();
    }
    Ok((traj.state(), traj.derivative()))
}

/// QFI at every time `1..=t_max` (index 0 holds `t = 0`).
pub fn qfi_series(state: &PureState, cache: &FloquetCache, params: KickedTopParams, t_max: usize) -> Result<Vec<f64>> {
    let mut traj = DerivativeTrajectory::new(state, cache, params)?;
    let mut out = Vec::with_capacity(t_max + 1);
    out.push(traj.qfi());
    for _ in 0..t_max {
        traj.step();
        out.push(traj.qfi());
    }
    Ok(out)
}

/// Loschmidt echo `|<psi(0)| U_alpha(t) U_{alpha+eps}(-t) |psi(0)>|^2`,
/// evaluated as the overlap of the two forward-evolved states.
pub fn loschmidt_fidelity(
    state: &PureState,
    cache: &FloquetCache,
    params: KickedTopParams,
    epsilon: f64,
    t: usize,
) -> Result<f64> {
    check_dim(cache, state)?;
    let a = cache.stepper(params);
    let b = cache.stepper(params.with_alpha(params.alpha + epsilon));
    let n = state.dim();
    let mut x = state.amps.clone();
    let mut y = state.amps.clone();
    for _ in 0..t {
        a.apply(&mut x);
        b.apply(&mut y);
    }
    let f = x.dotc(&y).norm_sqr() / (x.norm_squared() * y.norm_squared());
    debug_assert_eq!(x.len(), n);
    Ok(f.clamp(0.0, 1.0))
}

/// `4 (1 - F_eps) / eps^2`, the finite-perturbation echo estimate of the QFI.
pub fn echo_qfi(state: &PureState, cache: &FloquetCache, params: KickedTopParams, epsilon: f64, t: usize) -> Result<f64> {
    let f = loschmidt_fidelity(state, cache, params, epsilon, t)?;
    Ok(4.0 * (1.0 - f) / (epsilon * epsilon))
}

/// Richardson extrapolation of [`echo_qfi`] over `eps, eps/2, eps/4`,
/// eliminating the `eps^2` and `eps^4` terms.
pub fn echo_qfi_richardson(
    state: &PureState,
    cache: &FloquetCache,
    params: KickedTopParams,
    epsilon: f64,
    t: usize,
) -> Result<f64> {
    let f1 = echo_qfi(state, cache, params, epsilon, t)?;
    let f2 = echo_qfi(state, cache, params, epsilon / 2.0, t)?;
    let f4 = echo_qfi(state, cache, params, epsilon / 4.0, t)?;
    let r1 = (4.0 * f2 - f1) / 3.0;
    let r2 = (4.0 * f4 - f2) / 3.0;
    Ok((16.0 * r2 - r1) / 15.0)
}

/// Characteristic time scales of the kicked top.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeScales {
    pub lyapunov: f64,
    /// `ln(2J) / lambda`.
    pub t_ehrenfest: f64,
    /// `J / 3`.
    pub t_heisenberg: f64,
    /// Ratio of phase-space volume to Planck cell, `2J`.
    pub phase_space_ratio: f64,
    /// Absolute phase-space volume; not fixed by the model.
    pub omega_v: Option<f64>,
    pub planck_cell: Option<f64>,
    /// Mean quasi-energy spacing `2 pi / N`.
    pub level_spacing: f64,
}

pub fn time_scales(spin: SpinQuantum, lyapunov: f64) -> Result<TimeScales> {
    if !(lyapunov > 0.0) {
        return Err(Error::NonPositiveLyapunov(lyapunov));
    }
    let big_j = spin.big_j();
    Ok(TimeScales {
        lyapunov,
        t_ehrenfest: (2.0 * big_j).ln() / lyapunov,
        t_heisenberg: big_j / 3.0,
        phase_space_ratio: 2.0 * big_j,
        omega_v: None,
        planck_cell: None,
        level_spacing: 2.0 * PI / spin.dim() as f64,
    })
}

/// `U psi` using the dense operator, for cross-checks.
pub fn dense_step(u: &CMatrix, psi: &CVector) -> CVector {
    u * psi
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, max_abs, I};
    use crate::spin::{build_ops, coherent_state, PhaseAngles};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn spin(j: f64) -> SpinQuantum {
        SpinQuantum::from_j(j).unwrap()
    }

    fn random_state(s: SpinQuantum, seed: u64) -> PureState {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = CVector::from_fn(s.dim(), |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        PureState::normalized(s, v).unwrap()
    }

    /// Matrix exponential of `-i t H` for Hermitian `H` by eigen-decomposition.
    fn expm_hermitian(h: &CMatrix, t: f64) -> CMatrix {
        let eig = crate::linalg::hermitian_eigen(h).unwrap();
        let n = h.nrows();
        let d = CMatrix::from_diagonal(&CVector::from_iterator(
            n,
            eig.values.iter().map(|&e| C64::from_polar(1.0, -t * e)),
        ));
        &eig.vectors * d * eig.vectors.adjoint()
    }

    #[test]
    fn cache_diagonalises_jy() {
        for twice in [1, 2, 5, 16, 41] {
            let s = SpinQuantum::new(twice).unwrap();
            let cache = FloquetCache::new(s).unwrap();
            let v = cache.jy_eigvecs();
            let n = s.dim();
            assert!(max_abs(&(v.adjoint() * &v - CMatrix::identity(n, n))) < 1e-11);
            let ops = build_ops(s);
            let d = v.adjoint() * &ops.jy * &v;
            for a in 0..n {
                for b in 0..n {
                    let expected = if a == b { cache.jy_eigvals()[a] } else { 0.0 };
                    assert!((d[(a, b)] - c(expected)).norm() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn no_kick_is_diagonal_precession() {
        let s = spin(3.0);
        let cache = FloquetCache::new(s).unwrap();
        let alpha = 0.37;
        let u = floquet_operator(&cache, KickedTopParams::new(alpha, 0.0).unwrap());
        for a in 0..s.dim() {
            for b in 0..s.dim() {
                let expected = if a == b { C64::from_polar(1.0, -alpha * s.m(a)) } else { c(0.0) };
                assert!((u[(a, b)] - expected).norm() < 1e-12);
            }
        }
        let id = floquet_operator(&cache, KickedTopParams::new(0.0, 0.0).unwrap());
        assert!(max_abs(&(id - CMatrix::identity(s.dim(), s.dim()))) < 1e-12);
    }

    #[test]
    fn spin_half_kick_is_global_phase() {
        let s = spin(0.5);
        let cache = FloquetCache::new(s).unwrap();
        let ops = build_ops(s);
        for k in [0.0, 1.3, 30.0] {
            let alpha = 0.8;
            let u = floquet_operator(&cache, KickedTopParams::new(alpha, k).unwrap());
            // direct 2x2 exponentials: exp(-i k Jy^2 / 2J) exp(-i alpha Jz)
            let jy2 = &ops.jy * &ops.jy;
            let kick = expm_hermitian(&jy2, k / (2.0 * s.big_j()));
            let prec = expm_hermitian(&ops.jz, alpha);
            let oracle = &kick * &prec;
            assert!(max_abs(&(&u - &oracle)) < 1e-12);
            let phase = C64::from_polar(1.0, -k / (8.0 * s.big_j()));
            assert!(max_abs(&(&u - prec * phase)) < 1e-12);
        }
    }

    #[test]
    fn operator_is_unitary_and_matches_exponentials() {
        let s = spin(4.5);
        let cache = FloquetCache::new(s).unwrap();
        let ops = build_ops(s);
        let params = KickedTopParams::new(1.1, 7.0).unwrap();
        let u = floquet_operator(&cache, params);
        let n = s.dim();
        assert!(max_abs(&(u.adjoint() * &u - CMatrix::identity(n, n))) < 1e-11);
        let oracle = expm_hermitian(&(&ops.jy * &ops.jy), params.k / (2.0 * s.big_j()))
            * expm_hermitian(&ops.jz, params.alpha);
        assert!(max_abs(&(u - oracle)) < 1e-10);
    }

    #[test]
    fn step_matches_dense_operator() {
        let s = spin(20.0);
        let cache = FloquetCache::new(s).unwrap();
        let params = KickedTopParams::new(PI / 2.0, 30.0).unwrap();
        let psi = random_state(s, 3);
        let u = floquet_operator(&cache, params);
        let dense = dense_step(&u, &psi.amps);
        let fast = step_state(&psi, &cache, params).unwrap();
        assert!((dense - &fast.amps).camax() < 1e-10);
        let mut back = fast.amps.clone();
        cache.stepper(params).apply_inverse(&mut back);
        assert!((back - &psi.amps).camax() < 1e-12);
    }

    #[test]
    fn conjugation_matches_dense() {
        let s = spin(6.0);
        let cache = FloquetCache::new(s).unwrap();
        let params = KickedTopParams::new(0.9, 12.0).unwrap();
        let u = floquet_operator(&cache, params);
        let x = CMatrix::from_fn(s.dim(), s.dim(), |a, b| C64::new((a * b) as f64 * 0.1, a as f64 - b as f64));
        let dense = &u * &x * u.adjoint();
        assert!(max_abs(&(dense - cache.stepper(params).conjugate(&x))) < 1e-11);
    }

    #[test]
    fn norm_preserved_long_run() {
        let s = spin(100.0);
        let cache = FloquetCache::new(s).unwrap();
        let params = KickedTopParams::new(PI / 2.0, 30.0).unwrap();
        let psi = coherent_state(s, PhaseAngles::new(PI / 2.0, PI / 2.0).unwrap());
        let out = evolve(&psi, &cache, params, 10_000).unwrap();
        assert!((out.amps.norm() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn unkicked_step_rotates_coherent_state() {
        let s = spin(7.5);
        let cache = FloquetCache::new(s).unwrap();
        let alpha = 0.61;
        let psi = coherent_state(s, PhaseAngles::new(1.0, 0.3).unwrap());
        let out = evolve(&psi, &cache, KickedTopParams::new(alpha, 0.0).unwrap(), 3).unwrap();
        let target = coherent_state(s, PhaseAngles::new(1.0, 0.3 + 3.0 * alpha).unwrap());
        assert!((out.fidelity(&target) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn derivative_zero_at_start_and_analytic_without_kick() {
        let s = spin(5.0);
        let cache = FloquetCache::new(s).unwrap();
        let psi = coherent_state(s, PhaseAngles::new(0.9, 0.2).unwrap());
        let params = KickedTopParams::new(0.4, 0.0).unwrap();
        let (_, d0) = evolve_with_derivative(&psi, &cache, params, 0).unwrap();
        assert_eq!(d0.camax(), 0.0);
        for t in 1..6 {
            let traj_q = qfi_series(&psi, &cache, params, t).unwrap()[t];
            let expected = 2.0 * (t * t) as f64 * s.j() * 0.9_f64.sin().powi(2);
            assert!((traj_q - expected).abs() / expected < 1e-10);
        }
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let s = spin(10.0);
        let cache = FloquetCache::new(s).unwrap();
        let psi = coherent_state(s, PhaseAngles::new(1.2, 2.0).unwrap());
        let params = KickedTopParams::new(1.0, 30.0).unwrap();
        let t = 5;
        let (_, d) = evolve_with_derivative(&psi, &cache, params, t).unwrap();
        let h = 1e-5;
        let plus = evolve(&psi, &cache, params.with_alpha(params.alpha + h), t).unwrap();
        let minus = evolve(&psi, &cache, params.with_alpha(params.alpha - h), t).unwrap();
        let fd = (plus.amps - minus.amps) / c(2.0 * h);
        assert!((&fd - &d).norm() / d.norm() < 1e-5);
    }

    #[test]
    fn loschmidt_closed_form_without_kick() {
        let s = spin(5.0);
        let cache = FloquetCache::new(s).unwrap();
        let psi = coherent_state(s, PhaseAngles::new(PI / 2.0, 0.0).unwrap());
        let params = KickedTopParams::new(0.3, 0.0).unwrap();
        let t = 3;
        for eps in [0.0, 1e-3, 0.05, 0.4] {
            let f = loschmidt_fidelity(&psi, &cache, params, eps, t).unwrap();
            // oracle: direct summation of <exp(-i eps t Jz)> over |c_m|^2
            let overlap: C64 = (0..s.dim())
                .map(|i| psi.amps[i].norm_sqr() * C64::from_polar(1.0, -eps * t as f64 * s.m(i)))
                .sum();
            assert!((f - overlap.norm_sqr()).abs() < 1e-10);
            let closed = (eps * t as f64 / 2.0).cos().abs().powf(4.0 * s.j());
            assert!((f - closed).abs() < 1e-10);
        }
        assert!((loschmidt_fidelity(&psi, &cache, params, 0.0, 10).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn echo_converges_quadratically() {
        let s = spin(8.0);
        let cache = FloquetCache::new(s).unwrap();
        let psi = coherent_state(s, PhaseAngles::new(PI / 2.0, PI / 2.0).unwrap());
        let params = KickedTopParams::new(PI / 2.0, 3.0).unwrap();
        let t = 6;
        let q = qfi_series(&psi, &cache, params, t).unwrap()[t];
        let e1 = (echo_qfi(&psi, &cache, params, 2e-2, t).unwrap() - q).abs();
        let e2 = (echo_qfi(&psi, &cache, params, 1e-2, t).unwrap() - q).abs();
        let ratio = e1 / e2;
        assert!((ratio - 4.0).abs() < 0.2, "ratio {ratio}");
    }

    #[test]
    fn time_scale_values() {
        let ts = time_scales(spin(4000.0), 2.4733).unwrap();
        assert!((ts.t_ehrenfest - 8001.0_f64.ln() / 2.4733).abs() < 1e-12);
        assert!((ts.t_ehrenfest - 3.63).abs() < 0.01);
        let ts = time_scales(spin(100.0), 1.0).unwrap();
        assert!((ts.t_heisenberg - 33.5).abs() < 1e-12);
        assert!(time_scales(spin(100.0), 1e300).unwrap().t_ehrenfest < 1e-290);
        assert!(matches!(time_scales(spin(1.0), 0.0), Err(Error::NonPositiveLyapunov(_))));
    }

    #[test]
    fn inverse_step_undoes_step() {
        let s = spin(3.5);
        let cache = FloquetCache::new(s).unwrap();
        let params = KickedTopParams::new(0.2, 5.0).unwrap();
        let st = cache.stepper(params);
        let mut m = CMatrix::identity(s.dim(), s.dim()) * I;
        st.apply_columns(&mut m);
        st.apply_inverse_columns(&mut m);
        assert!(max_abs(&(m - CMatrix::identity(s.dim(), s.dim()) * I)) < 1e-12);
    }
}
