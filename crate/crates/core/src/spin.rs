//! Spin-j Hilbert space: angular-momentum operators, coherent and GHZ
//! states, and expectation values.
//!
//! The basis is always ordered `m = j, j-1, ..., -j`, so index `i`
//! carries magnetic quantum number `m = j - i`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, hermiticity_error, hermitian_eigen, trace, CMatrix, CVector, C64, I};

/// Spin size stored as the integer `2j`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SpinQuantum {
    twice_j: u32,
}

impl SpinQuantum {
    pub fn new(twice_j: u32) -> Result<Self> {
        if twice_j == 0 {
            return Err(Error::InvalidSpin("2j must be a positive integer".into()));
        }
        Ok(Self { twice_j })
    }

    /// Builds from a floating `j`, which must be a positive half-integer.
    pub fn from_j(j: f64) -> Result<Self> {
        let twice = 2.0 * j;
        if !(twice >= 1.0) || (twice - twice.round()).abs() > 1e-9 || twice > u32::MAX as f64 {
            return Err(Error::InvalidSpin(format!("j = {j} is not a positive half-integer")));
        }
        Self::new(twice.round() as u32)
    }

    pub fn twice_j(self) -> u32 {
        self.twice_j
    }

    pub fn j(self) -> f64 {
        self.twice_j as f64 / 2.0
    }

    /// Hilbert-space dimension `2j + 1`.
    pub fn dim(self) -> usize {
        self.twice_j as usize + 1
    }

    /// Effective scaling constant `J = j + 1/2`.
    pub fn big_j(self) -> f64 {
        self.j() + 0.5
    }

    /// Magnetic quantum number of basis index `i`.
    #[inline]
    pub fn m(self, i: usize) -> f64 {
        self.j() - i as f64
    }

    pub fn m_values(self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.m(i)).collect()
    }

    /// `sqrt(j(j+1) - m(m+1))`, the matrix element of `J+` on `|j,m>`.
    #[inline]
    pub fn raise_coeff(self, m: f64) -> f64 {
        let j = self.j();
        (j * (j + 1.0) - m * (m + 1.0)).max(0.0).sqrt()
    }

    /// `sqrt(j(j+1) - m(m-1))`, the matrix element of `J-` on `|j,m>`.
    #[inline]
    pub fn lower_coeff(self, m: f64) -> f64 {
        let j = self.j();
        (j * (j + 1.0) - m * (m - 1.0)).max(0.0).sqrt()
    }
}

/// Polar and azimuthal angles of a point on the sphere.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseAngles {
    pub theta: f64,
    pub phi: f64,
}

impl PhaseAngles {
    /// `theta` must lie in `[0, pi]`; `phi` is wrapped into `[0, 2pi)`.
    pub fn new(theta: f64, phi: f64) -> Result<Self> {
        if !(0.0..=PI).contains(&theta) || !phi.is_finite() {
            return Err(Error::param("theta", format!("{theta} outside [0, pi]")));
        }
        Ok(Self {
            theta,
            phi: phi.rem_euclid(2.0 * PI),
        })
    }

    /// From phase-space coordinates `(Z, phi)` with `Z = cos(theta)`.
    pub fn from_z_phi(z: f64, phi: f64) -> Result<Self> {
        if !(-1.0..=1.0).contains(&z) {
            return Err(Error::param("z", format!("{z} outside [-1, 1]")));
        }
        Self::new(z.acos(), phi)
    }
}

/// Dense angular-momentum matrices in the `|j,m>` basis.
#[derive(Clone, Debug)]
pub struct AngularMomentumOps {
    pub spin: SpinQuantum,
    pub jx: CMatrix,
    pub jy: CMatrix,
    pub jz: CMatrix,
    pub jplus: CMatrix,
    pub jminus: CMatrix,
}

impl AngularMomentumOps {
    pub fn casimir(&self) -> CMatrix {
        &self.jx * &self.jx + &self.jy * &self.jy + &self.jz * &self.jz
    }
}

/// Real symmetric tridiagonal `J_x`.
pub fn jx_real(spin: SpinQuantum) -> DMatrix<f64> {
    let n = spin.dim();
    let mut jx = DMatrix::zeros(n, n);
    for i in 1..n {
        // row i-1 carries m+1 where m = m(i)
        let v = 0.5 * spin.raise_coeff(spin.m(i));
        jx[(i - 1, i)] = v;
        jx[(i, i - 1)] = v;
    }
    jx
}

pub fn build_ops(spin: SpinQuantum) -> AngularMomentumOps {
    let n = spin.dim();
    let mut jplus = CMatrix::zeros(n, n);
    for i in 1..n {
        jplus[(i - 1, i)] = c(spin.raise_coeff(spin.m(i)));
    }
    let jminus = jplus.adjoint();
    let jz = CMatrix::from_diagonal(&CVector::from_iterator(n, (0..n).map(|i| c(spin.m(i)))));
    let jx = (&jplus + &jminus) * c(0.5);
    let jy = (&jplus - &jminus) * (-0.5 * I);
    AngularMomentumOps {
        spin,
        jx,
        jy,
        jz,
        jplus,
        jminus,
    }
}

/// Normalised state vector.
#[derive(Clone, Debug, PartialEq)]
pub struct PureState {
    pub spin: SpinQuantum,
    pub amps: CVector,
}

impl PureState {
    pub const NORM_TOL: f64 = 1e-12;

    pub fn new(spin: SpinQuantum, amps: CVector) -> Result<Self> {
        if amps.len() != spin.dim() {
            return Err(Error::DimensionMismatch {
                expected: spin.dim(),
                got: amps.len(),
            });
        }
        let norm = amps.norm();
        if (norm - 1.0).abs() > Self::NORM_TOL {
            return Err(Error::InvalidState(format!("norm {norm} differs from 1")));
        }
        Ok(Self { spin, amps })
    }

    /// Normalises arbitrary nonzero amplitudes.
    pub fn normalized(spin: SpinQuantum, amps: CVector) -> Result<Self> {
        let norm = amps.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::InvalidState("cannot normalise a zero vector".into()));
        }
        Self::new(spin, amps / c(norm))
    }

    /// `|j, m>` for the basis index `i`.
    pub fn basis(spin: SpinQuantum, i: usize) -> Self {
        let mut amps = CVector::zeros(spin.dim());
        amps[i] = c(1.0);
        Self { spin, amps }
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn overlap(&self, other: &PureState) -> C64 {
        self.amps.dotc(&other.amps)
    }

    /// `|<self|other>|^2`, insensitive to global phase.
    pub fn fidelity(&self, other: &PureState) -> f64 {
        self.overlap(other).norm_sqr()
    }

    pub fn to_density(&self) -> DensityMatrix {
        DensityMatrix {
            spin: self.spin,
            rho: &self.amps * self.amps.adjoint(),
        }
    }

    /// `(<J_x>, <J_y>, <J_z>)` in O(N).
    pub fn spin_vector(&self) -> [f64; 3] {
        let n = self.dim();
        let mut jp = C64::new(0.0, 0.0);
        let mut jz = 0.0;
        for i in 0..n {
            jz += self.spin.m(i) * self.amps[i].norm_sqr();
            if i > 0 {
                jp += self.amps[i - 1].conj() * self.amps[i] * self.spin.raise_coeff(self.spin.m(i));
            }
        }
        [jp.re, jp.im, jz]
    }

    /// `<J_z>` in O(N).
    pub fn mean_jz(&self) -> f64 {
        self.amps
            .iter()
            .enumerate()
            .map(|(i, a)| self.spin.m(i) * a.norm_sqr())
            .sum()
    }
}

/// Unit-trace Hermitian positive matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    pub spin: SpinQuantum,
    pub rho: CMatrix,
}

impl DensityMatrix {
    pub const HERMITIAN_TOL: f64 = 1e-12;
    pub const TRACE_TOL: f64 = 1e-12;
    pub const EIGEN_TOL: f64 = 1e-10;

    /// Validates Hermiticity, unit trace and positivity.
    pub fn new(spin: SpinQuantum, rho: CMatrix) -> Result<Self> {
        let n = spin.dim();
        if rho.nrows() != n || rho.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: rho.nrows(),
            });
        }
        let herm = hermiticity_error(&rho);
        if herm > Self::HERMITIAN_TOL {
            return Err(Error::NotHermitian(herm));
        }
        let tr = trace(&rho);
        if (tr - c(1.0)).norm() > Self::TRACE_TOL {
            return Err(Error::InvalidState(format!("trace {tr} differs from 1")));
        }
        let min = hermitian_eigen(&rho)?.values[0];
        if min < -Self::EIGEN_TOL {
            return Err(Error::InvalidState(format!("negative eigenvalue {min:e}")));
        }
        Ok(Self { spin, rho })
    }

    /// Wraps a matrix without validation (kernels that preserve the
    /// invariants by construction).
    pub fn from_raw(spin: SpinQuantum, rho: CMatrix) -> Self {
        Self { spin, rho }
    }

    pub fn maximally_mixed(spin: SpinQuantum) -> Self {
        let n = spin.dim();
        Self {
            spin,
            rho: CMatrix::identity(n, n) * c(1.0 / n as f64),
        }
    }

    pub fn dim(&self) -> usize {
        self.rho.nrows()
    }

    pub fn trace(&self) -> C64 {
        trace(&self.rho)
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(hermitian_eigen(&self.rho)?.values[0])
    }

    pub fn mean_jz(&self) -> f64 {
        (0..self.dim()).map(|i| self.spin.m(i) * self.rho[(i, i)].re).sum()
    }
}

fn ln_binomial_table(n: usize) -> Vec<f64> {
    // ln C(n, k) for k = 0..=n via cumulative log-factorials
    let mut ln_fact = vec![0.0; n + 1];
    for k in 1..=n {
        ln_fact[k] = ln_fact[k - 1] + (k as f64).ln();
    }
    (0..=n).map(|k| ln_fact[n] - ln_fact[k] - ln_fact[n - k]).collect()
}

fn pow_or_one(base: f64, exp: usize) -> Option<f64> {
    // returns ln(base^exp), None when the factor vanishes
    if exp == 0 {
        Some(0.0)
    } else if base <= 0.0 {
        None
    } else {
        Some(exp as f64 * base.ln())
    }
}

/// SU(2) coherent state `|j, theta, phi>`.
pub fn coherent_state(spin: SpinQuantum, angles: PhaseAngles) -> PureState {
    let n = spin.dim();
    let two_j = spin.twice_j() as usize;
    let s = (angles.theta / 2.0).sin();
    let co = (angles.theta / 2.0).cos();
    let ln_binom = ln_binomial_table(two_j);
    let amps = CVector::from_fn(n, |i, _| {
        // i = j - m, 2j - i = j + m
        match (pow_or_one(s, i), pow_or_one(co, two_j - i)) {
            (Some(a), Some(b)) => {
                let mag = (0.5 * ln_binom[i] + a + b).exp();
                C64::from_polar(mag, i as f64 * angles.phi)
            }
            _ => c(0.0),
        }
    });
    // renormalise away the O(N eps) rounding from the log-space product
    let norm = amps.norm();
    PureState {
        spin,
        amps: amps / c(norm),
    }
}

/// `(|j,j> + |j,-j>)/sqrt(2)`.
pub fn ghz_state(spin: SpinQuantum) -> PureState {
    let n = spin.dim();
    let mut amps = CVector::zeros(n);
    let a = c(std::f64::consts::FRAC_1_SQRT_2);
    amps[0] = a;
    amps[n - 1] = a;
    PureState { spin, amps }
}

/// Anything that yields expectation values of dense operators.
pub trait QuantumState {
    fn dim(&self) -> usize;
    fn expect_unchecked(&self, op: &CMatrix) -> C64;
}

impl QuantumState for PureState {
    fn dim(&self) -> usize {
        self.amps.len()
    }
    fn expect_unchecked(&self, op: &CMatrix) -> C64 {
        self.amps.dotc(&(op * &self.amps))
    }
}

impl QuantumState for DensityMatrix {
    fn dim(&self) -> usize {
        self.rho.nrows()
    }
    fn expect_unchecked(&self, op: &CMatrix) -> C64 {
        crate::linalg::trace_product(op, &self.rho)
    }
}

fn check_dims<S: QuantumState + ?Sized>(op: &CMatrix, state: &S) -> Result<()> {
    let n = state.dim();
    if op.nrows() != n || op.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: op.nrows(),
        });
    }
    Ok(())
}

/// `<A>` for a pure or mixed state.
pub fn expectation<S: QuantumState + ?Sized>(op: &CMatrix, state: &S) -> Result<C64> {
    check_dims(op, state)?;
    Ok(state.expect_unchecked(op))
}

/// `<A^2> - <A>^2`, real part (exact for Hermitian `A`).
pub fn variance<S: QuantumState + ?Sized>(op: &CMatrix, state: &S) -> Result<f64> {
    check_dims(op, state)?;
    let mean = state.expect_unchecked(op);
    let sq = state.expect_unchecked(&(op * op));
    Ok((sq - mean * mean).re)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{commutator, max_abs};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn spin(j: f64) -> SpinQuantum {
        SpinQuantum::from_j(j).unwrap()
    }

    #[test]
    fn spin_quantum_validation() {
        assert!(SpinQuantum::from_j(0.0).is_err());
        assert!(SpinQuantum::from_j(0.3).is_err());
        let s = spin(2.5);
        assert_eq!(s.dim(), 6);
        assert_eq!(s.big_j(), 3.0);
    }

    #[test]
    fn spin_half_is_pauli_over_two() {
        let ops = build_ops(spin(0.5));
        assert_eq!(ops.jz[(0, 0)], c(0.5));
        assert_eq!(ops.jz[(1, 1)], c(-0.5));
        assert_eq!(ops.jx[(0, 1)], c(0.5));
        assert_eq!(ops.jx[(1, 0)], c(0.5));
        assert_eq!(ops.jy[(0, 1)], C64::new(0.0, -0.5));
    }

    #[test]
    fn ladder_element_spin_one() {
        // <1,0|J-|1,1> = sqrt(j(j+1) - m(m-1)) at j = m = 1
        let ops = build_ops(spin(1.0));
        let expected = (1.0_f64 * 2.0 - 1.0 * 0.0).sqrt();
        assert_relative_eq!(ops.jminus[(1, 0)].re, expected, epsilon = 1e-15);
        assert_relative_eq!(expected, 2.0_f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn algebra_identities() {
        for twice in [1, 2, 3, 7, 20, 41] {
            let s = SpinQuantum::new(twice).unwrap();
            let ops = build_ops(s);
            let n = s.dim();
            let cz = commutator(&ops.jx, &ops.jy) - &ops.jz * I;
            let cx = commutator(&ops.jy, &ops.jz) - &ops.jx * I;
            let cy = commutator(&ops.jz, &ops.jx) - &ops.jy * I;
            assert!(max_abs(&cz) < 1e-12 && max_abs(&cx) < 1e-12 && max_abs(&cy) < 1e-12);
            for m in [&ops.jx, &ops.jy, &ops.jz] {
                assert!(hermiticity_error(m) < 1e-12);
            }
            let jj = s.j() * (s.j() + 1.0);
            let cas = ops.casimir() - CMatrix::identity(n, n) * c(jj);
            assert!(max_abs(&cas) < 1e-12 * jj.max(1.0));
            let jpm = &ops.jx + &ops.jy * I - &ops.jplus;
            assert!(max_abs(&jpm) < 1e-12);
        }
    }

    #[test]
    fn coherent_poles() {
        let s = spin(3.5);
        let north = coherent_state(s, PhaseAngles::new(0.0, 1.3).unwrap());
        assert_eq!(north.amps[0], c(1.0));
        assert!(north.amps.iter().skip(1).all(|z| z.norm() == 0.0));
        let phi = 0.7;
        let south = coherent_state(s, PhaseAngles::new(PI, phi).unwrap());
        let expected = C64::from_polar(1.0, 2.0 * s.j() * phi);
        assert!((south.amps[s.dim() - 1] - expected).norm() < 1e-12);
    }

    #[test]
    fn coherent_mean_jz_direct_summation() {
        let s = spin(10.0);
        let (theta, phi) = (PI / 3.0, 1.1);
        let psi = coherent_state(s, PhaseAngles::new(theta, phi).unwrap());
        // oracle: direct summation of |c_m|^2 m from the binomial weights
        let two_j = 20;
        let mut oracle = 0.0;
        let mut binom = 1.0_f64;
        for i in 0..=two_j {
            if i > 0 {
                binom *= (two_j - i + 1) as f64 / i as f64;
            }
            let w = binom * (theta / 2.0).sin().powi(2 * i) * (theta / 2.0).cos().powi(2 * (two_j - i));
            oracle += w * (10.0 - i as f64);
        }
        assert!((psi.mean_jz() - oracle).abs() < 1e-10);
        assert!((psi.mean_jz() - 5.0).abs() < 1e-10);
    }

    #[test]
    fn ghz_statistics() {
        for twice in [1, 4, 9, 30] {
            let s = SpinQuantum::new(twice).unwrap();
            let ghz = ghz_state(s);
            let ops = build_ops(s);
            assert!(expectation(&ops.jz, &ghz).unwrap().norm() < 1e-14);
            // two-point distribution on m = +-j, each with weight 1/2
            let j = s.j();
            let oracle = 0.5 * j * j + 0.5 * j * j - 0.0;
            assert_relative_eq!(variance(&ops.jz, &ghz).unwrap(), oracle, epsilon = 1e-12);
        }
        let half = ghz_state(spin(0.5));
        assert_relative_eq!(half.amps[0].re, std::f64::consts::FRAC_1_SQRT_2);
        assert_relative_eq!(half.amps[1].re, std::f64::consts::FRAC_1_SQRT_2);
    }

    #[test]
    fn equatorial_coherent_expectations() {
        let s = spin(6.0);
        let ops = build_ops(s);
        let psi = coherent_state(s, PhaseAngles::new(PI / 2.0, 0.4).unwrap());
        assert!(expectation(&ops.jz, &psi).unwrap().norm() < 1e-10);
        // oracle: binomial(2j, 1/2) distribution over j - m
        let two_j = 12usize;
        let mut binom = 1.0_f64;
        let (mut m1, mut m2) = (0.0, 0.0);
        for i in 0..=two_j {
            if i > 0 {
                binom *= (two_j - i + 1) as f64 / i as f64;
            }
            let p = binom / 2f64.powi(two_j as i32);
            let m = 6.0 - i as f64;
            m1 += p * m;
            m2 += p * m * m;
        }
        assert!((variance(&ops.jz, &psi).unwrap() - (m2 - m1 * m1)).abs() < 1e-10);
        assert!((variance(&ops.jz, &psi).unwrap() - 3.0).abs() < 1e-10);
        let rho = psi.to_density();
        assert!((variance(&ops.jz, &rho).unwrap() - 3.0).abs() < 1e-10);
    }

    #[test]
    fn basis_state_expectation_and_mismatch() {
        let s = spin(2.0);
        let ops = build_ops(s);
        for i in 0..s.dim() {
            let e = expectation(&ops.jz, &PureState::basis(s, i)).unwrap();
            assert_eq!(e.re, s.m(i));
        }
        let other = build_ops(spin(1.0));
        assert!(matches!(
            expectation(&other.jz, &PureState::basis(s, 0)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn density_matrix_validation() {
        let s = spin(1.0);
        assert!(DensityMatrix::new(s, CMatrix::identity(3, 3)).is_err());
        assert!(DensityMatrix::new(s, DensityMatrix::maximally_mixed(s).rho).is_ok());
        let mut bad = DensityMatrix::maximally_mixed(s).rho;
        bad[(0, 1)] = C64::new(0.0, 0.1);
        assert!(matches!(DensityMatrix::new(s, bad), Err(Error::NotHermitian(_))));
    }

    proptest! {
        #[test]
        fn coherent_state_direction(twice in 1u32..80, theta in 0.0..PI, phi in 0.0..(2.0 * PI)) {
            let s = SpinQuantum::new(twice).unwrap();
            let psi = coherent_state(s, PhaseAngles::new(theta, phi).unwrap());
            prop_assert!((psi.amps.norm() - 1.0).abs() < 1e-12);
            let [x, y, z] = psi.spin_vector();
            let j = s.j();
            let r = (x * x + y * y + z * z).sqrt();
            prop_assert!(r / j <= 1.0 + 1e-12);
            prop_assert!((r / j - 1.0).abs() < 1e-9);
            prop_assert!(((x * x + y * y).sqrt().atan2(z) - theta).abs() < 1e-8);
            if theta.sin() > 1e-3 {
                let az = y.atan2(x).rem_euclid(2.0 * PI);
                let d = (az - phi).abs();
                prop_assert!(d.min(2.0 * PI - d) < 1e-8);
            }
        }

        #[test]
        fn z_rotation_shifts_azimuth(twice in 1u32..60, theta in 0.0..PI, phi in 0.0..6.0, alpha in -3.0..3.0f64) {
            let s = SpinQuantum::new(twice).unwrap();
            let psi = coherent_state(s, PhaseAngles::new(theta, phi).unwrap());
            let rotated = CVector::from_fn(s.dim(), |i, _| psi.amps[i] * C64::from_polar(1.0, -alpha * s.m(i)));
            let rotated = PureState { spin: s, amps: rotated };
            let target = coherent_state(s, PhaseAngles::new(theta, phi + alpha).unwrap());
            prop_assert!((rotated.fidelity(&target) - 1.0).abs() < 1e-12);
        }
    }
}
