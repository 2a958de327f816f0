//! Exact one-period superradiance map `exp(Lambda tau)`.
//!
//! The generator only couples `rho[a][b]` to `rho[a-1][b-1]`, so every
//! diagonal family `b - a = d` evolves on its own under a lower
//! bidiagonal matrix. Each family is exponentiated once.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::spin::{DensityMatrix, SpinQuantum};

/// Superradiant damping rate per period.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DampingParams {
    pub gamma: f64,
}

impl DampingParams {
    pub fn new(gamma: f64) -> Result<Self> {
        if !(gamma >= 0.0) || !gamma.is_finite() {
            return Err(Error::param("gamma", format!("{gamma} must be finite and >= 0")));
        }
        Ok(Self { gamma })
    }
}

/// `gamma (2 J- rho J+ - J+J- rho - rho J+J-)`, evaluated elementwise.
pub fn lindblad_rhs(rho: &CMatrix, spin: SpinQuantum, gamma: f64) -> Result<CMatrix> {
    let n = spin.dim();
    if rho.nrows() != n || rho.ncols() != n {
        return Err(Error::DimensionMismatch { expected: n, got: rho.nrows() });
    }
    let (feed, loss) = coefficients(spin);
    Ok(CMatrix::from_fn(n, n, |a, b| {
        let mut v = -(loss[a] + loss[b]) * rho[(a, b)];
        if a > 0 && b > 0 {
            v += 2.0 * feed[a] * feed[b] * rho[(a - 1, b - 1)];
        }
        v * gamma
    }))
}

/// Per basis index `i` (with `m = j - i`): the lowering amplitude
/// `<m|J-|m+1>` feeding it from above, and `<m|J+J-|m>`.
fn coefficients(spin: SpinQuantum) -> (Vec<f64>, Vec<f64>) {
    let n = spin.dim();
    let feed = (0..n)
        .map(|i| if i == 0 { 0.0 } else { spin.lower_coeff(spin.m(i) + 1.0) })
        .collect();
    let loss = (0..n).map(|i| spin.lower_coeff(spin.m(i)).powi(2)).collect();
    (feed, loss)
}

/// `exp(G)` for a lower-bidiagonal `G` by scaling and squaring of a
/// truncated Taylor series.
pub fn expm_lower_bidiagonal(diag: &[f64], sub: &[f64]) -> DMatrix<f64> {
    let n = diag.len();
    let mut g = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        g[(i, i)] = diag[i];
        if i > 0 {
            g[(i, i - 1)] = sub[i - 1];
        }
    }
    // induced 1-norm: max column sum
    let norm = (0..n)
        .map(|c| diag[c].abs() + if c + 1 < n { sub[c].abs() } else { 0.0 })
        .fold(0.0, f64::max);
    let squarings = if norm > 0.25 { (norm / 0.25).log2().ceil() as i32 } else { 0 };
    g /= 2f64.powi(squarings);
    let mut result = DMatrix::<f64>::identity(n, n);
    let mut term = DMatrix::<f64>::identity(n, n);
    for order in 1..=24 {
        term = &term * &g / order as f64;
        result += &term;
        if term.amax() < 1e-18 * result.amax() {
            break;
        }
    }
    for _ in 0..squarings {
        result = &result * &result;
    }
    result
}

/// Cached per-family maps for one `(j, gamma, tau)`.
#[derive(Clone, Debug)]
pub struct SuperradiancePropagator {
    spin: SpinQuantum,
    gamma: f64,
    tau: f64,
    /// `families[d]` acts on the diagonal `b - a = +-d`.
    families: Vec<DMatrix<f64>>,
}

impl SuperradiancePropagator {
    pub fn new(spin: SpinQuantum, damping: DampingParams, tau: f64) -> Result<Self> {
        if !(tau >= 0.0) || !tau.is_finite() {
            return Err(Error::param("tau", format!("{tau} must be finite and >= 0")));
        }
        let n = spin.dim();
        let (feed, loss) = coefficients(spin);
        let rate = damping.gamma * tau;
        let families = (0..n)
            .map(|d| {
                let len = n - d;
                // element p of family d sits at (p, p + d)
                let diag: Vec<f64> = (0..len).map(|p| -rate * (loss[p] + loss[p + d])).collect();
                let sub: Vec<f64> = (1..len).map(|p| 2.0 * rate * feed[p] * feed[p + d]).collect();
                expm_lower_bidiagonal(&diag, &sub)
            })
            .collect();
        Ok(Self {
            spin,
            gamma: damping.gamma,
            tau,
            families,
        })
    }

    pub fn spin(&self) -> SpinQuantum {
        self.spin
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn is_identity(&self) -> bool {
        self.gamma * self.tau == 0.0
    }

    fn check(&self, x: &CMatrix) -> Result<()> {
        let n = self.spin.dim();
        if x.nrows() != n || x.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, got: x.nrows() });
        }
        Ok(())
    }

    /// Maps the family on diagonal `+d` (upper) or `-d` of `x` into `out`.
    fn apply_family<T>(&self, x: &DMatrix<T>, out: &mut DMatrix<T>, d: usize, upper: bool)
    where
        T: nalgebra::Scalar + Copy + num_traits::Zero + std::ops::Mul<f64, Output = T>,
    {
        let map = &self.families[d];
        let len = map.nrows();
        let at = |p: usize| if upper { (p, p + d) } else { (p + d, p) };
        let src: Vec<T> = (0..len).map(|p| x[at(p)]).collect();
        for r in 0..len {
            let mut acc = T::zero();
            // lower triangular: only p <= r contribute
            for (p, v) in src.iter().enumerate().take(r + 1) {
                acc = acc + *v * map[(r, p)];
            }
            out[at(r)] = acc;
        }
    }

    /// `exp(Lambda tau) x` for an arbitrary square matrix.
    pub fn apply(&self, x: &CMatrix) -> Result<CMatrix> {
        self.check(x)?;
        if self.is_identity() {
            return Ok(x.clone());
        }
        let n = self.spin.dim();
        let mut out = CMatrix::zeros(n, n);
        for d in 0..n {
            self.apply_family(x, &mut out, d, true);
            if d > 0 {
                self.apply_family(x, &mut out, d, false);
            }
        }
        Ok(out)
    }

    /// Same as [`apply`](Self::apply) for Hermitian `x`, filling the lower
    /// triangle by conjugation.
    pub fn apply_hermitian(&self, x: &CMatrix) -> Result<CMatrix> {
        self.check(x)?;
        if self.is_identity() {
            return Ok(x.clone());
        }
        let n = self.spin.dim();
        let mut out = CMatrix::zeros(n, n);
        for d in 0..n {
            self.apply_family(x, &mut out, d, true);
        }
        for a in 0..n {
            out[(a, a)].im = 0.0;
            for b in 0..a {
                out[(a, b)] = out[(b, a)].conj();
            }
        }
        Ok(out)
    }

    /// Damping of a real symmetric matrix.
    pub fn apply_real_symmetric(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        if self.is_identity() {
            return x.clone();
        }
        let n = self.spin.dim();
        let mut out = DMatrix::zeros(n, n);
        for d in 0..n {
            self.apply_family(x, &mut out, d, true);
        }
        for a in 0..n {
            for b in 0..a {
                out[(a, b)] = out[(b, a)];
            }
        }
        out
    }
}

/// One period of pure damping applied to a density matrix.
pub fn apply_damping_period(rho: &DensityMatrix, propagator: &SuperradiancePropagator) -> Result<DensityMatrix> {
    if rho.spin != propagator.spin() {
        return Err(Error::DimensionMismatch {
            expected: propagator.spin().dim(),
            got: rho.dim(),
        });
    }
    Ok(DensityMatrix::from_raw(rho.spin, propagator.apply_hermitian(&rho.rho)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, hermitian_eigen, max_abs, trace, C64};
    use crate::spin::{build_ops, coherent_state, PhaseAngles, PureState};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn spin(j: f64) -> SpinQuantum {
        SpinQuantum::from_j(j).unwrap()
    }

    fn random_density(n: usize, seed: u64) -> CMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = CMatrix::from_fn(n, n, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        let r = &a * a.adjoint();
        let t = trace(&r);
        r / t
    }

    /// Dense Liouvillian acting on column-stacked `rho`.
    fn dense_liouvillian(s: SpinQuantum, gamma: f64) -> CMatrix {
        let n = s.dim();
        let mut l = CMatrix::zeros(n * n, n * n);
        for col in 0..n * n {
            let mut e = CMatrix::zeros(n, n);
            e[(col % n, col / n)] = c(1.0);
            let ops = build_ops(s);
            let jp = &ops.jplus;
            let jm = &ops.jminus;
            let img = (jm * &e * jp * c(2.0) - jp * jm * &e - &e * jp * jm) * c(gamma);
            for row in 0..n * n {
                l[(row, col)] = img[(row % n, row / n)];
            }
        }
        l
    }

    #[test]
    fn rhs_matches_operator_form() {
        let s = spin(2.5);
        let ops = build_ops(s);
        let rho = random_density(s.dim(), 1);
        let g = 0.3;
        let direct = (&ops.jminus * &rho * &ops.jplus * c(2.0) - &ops.jplus * &ops.jminus * &rho - &rho * &ops.jplus * &ops.jminus) * c(g);
        let fast = lindblad_rhs(&rho, s, g).unwrap();
        assert!(max_abs(&(direct - &fast)) < 1e-13);
        assert!(trace(&fast).norm() < 1e-12);
    }

    #[test]
    fn ground_state_is_stationary() {
        let s = spin(3.0);
        let ground = PureState::basis(s, s.dim() - 1).to_density();
        assert!(max_abs(&lindblad_rhs(&ground.rho, s, 1.0).unwrap()) == 0.0);
    }

    #[test]
    fn spin_half_rates_and_decay() {
        let s = spin(0.5);
        let up = PureState::basis(s, 0).to_density();
        let rhs = lindblad_rhs(&up.rho, s, 0.7).unwrap();
        assert!((rhs[(0, 0)].re + 2.0 * 0.7).abs() < 1e-14);
        for (gamma, tau) in [(0.1, 1.0), (2.0, 0.3), (0.0, 1.0)] {
            let prop = SuperradiancePropagator::new(s, DampingParams::new(gamma).unwrap(), tau).unwrap();
            let out = apply_damping_period(&up, &prop).unwrap();
            assert!((out.rho[(0, 0)].re - (-2.0 * gamma * tau).exp()).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_rate_is_identity() {
        let s = spin(4.0);
        let prop = SuperradiancePropagator::new(s, DampingParams::new(0.0).unwrap(), 1.0).unwrap();
        let rho = random_density(s.dim(), 2);
        assert_eq!(prop.apply(&rho).unwrap(), rho);
    }

    #[test]
    fn matches_dense_liouvillian_exponential() {
        for (twice, gamma) in [(1u32, 0.3), (2, 0.05), (5, 0.02), (10, 0.01), (10, 0.4)] {
            let s = SpinQuantum::new(twice).unwrap();
            let n = s.dim();
            let prop = SuperradiancePropagator::new(s, DampingParams::new(gamma).unwrap(), 1.0).unwrap();
            let big = dense_liouvillian(s, gamma).exp();
            let rho = random_density(n, twice as u64);
            let mut x = rho.clone();
            x[(0, n - 1)] += C64::new(0.2, 0.1); // non-Hermitian input too
            let vec = CMatrix::from_column_slice(n * n, 1, x.as_slice());
            let dense = big * vec;
            let dense = CMatrix::from_column_slice(n, n, dense.as_slice());
            let fast = prop.apply(&x).unwrap();
            assert!(max_abs(&(dense - fast)) < 1e-9, "2j = {twice}");
        }
    }

    #[test]
    fn hermitian_path_matches_general() {
        let s = spin(6.0);
        let prop = SuperradiancePropagator::new(s, DampingParams::new(0.01).unwrap(), 1.0).unwrap();
        let rho = random_density(s.dim(), 9);
        assert!(max_abs(&(prop.apply(&rho).unwrap() - prop.apply_hermitian(&rho).unwrap())) < 1e-15);
    }

    #[test]
    fn trace_and_positivity_preserved() {
        let s = spin(20.0);
        let prop = SuperradiancePropagator::new(s, DampingParams::new(2e-3).unwrap(), 1.0).unwrap();
        let mut rho = coherent_state(s, PhaseAngles::new(1.0, 0.5).unwrap()).to_density();
        for _ in 0..200 {
            let next = apply_damping_period(&rho, &prop).unwrap();
            assert!((trace(&next.rho) - trace(&rho.rho)).norm() < 1e-12);
            rho = next;
        }
        let min = hermitian_eigen(&rho.rho).unwrap().values[0];
        assert!(min > -1e-10, "{min}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn damping_commutes_with_z_rotations(seed in 0u64..1000, twice in 1u32..12, gamma in 0.0f64..0.2, phi in 0.0f64..6.3) {
            let s = SpinQuantum::new(twice).unwrap();
            let n = s.dim();
            let prop = SuperradiancePropagator::new(s, DampingParams::new(gamma).unwrap(), 1.0).unwrap();
            let rho = random_density(n, seed);
            let rot = CMatrix::from_diagonal(&crate::linalg::CVector::from_fn(n, |i, _| C64::from_polar(1.0, -phi * s.m(i))));
            let lhs = prop.apply(&(&rot * &rho * rot.adjoint())).unwrap();
            let rhs = &rot * prop.apply(&rho).unwrap() * rot.adjoint();
            prop_assert!(max_abs(&(lhs - rhs)) < 1e-12);
        }
    }
}
