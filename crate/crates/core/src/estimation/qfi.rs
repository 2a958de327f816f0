use crate::error::{Error, Result};
use nalgebra::DMatrix;

use crate::linalg::{hermiticity_error, hermitian_eigen, max_abs, symmetric_eigen, trace, CMatrix, CVector, I};
use crate::spin::{DensityMatrix, PureState};

use super::povm::Povm;

/// `4 (<dpsi|dpsi> - |<psi|dpsi>|^2)`, evaluated as the squared norm of the
/// part of `dpsi` orthogonal to `psi` to avoid cancellation.
pub fn qfi_pure(psi: &PureState, dpsi: &CVector) -> Result<f64> {
    if dpsi.len() != psi.dim() {
        return Err(Error::DimensionMismatch {
            expected: psi.dim(),
            got: dpsi.len(),
        });
    }
    let overlap = psi.amps.dotc(dpsi);
    Ok(4.0 * (dpsi - &psi.amps * overlap).norm_squared())
}

struct Spectral {
    values: Vec<f64>,
    vectors: CMatrix,
    /// `drho` in the eigenbasis of `rho`.
    rotated: CMatrix,
    cutoff: f64,
}

fn spectral(rho: &CMatrix, drho: &CMatrix) -> Result<Spectral> {
    let n = rho.nrows();
    if drho.nrows() != n || drho.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: drho.nrows(),
        });
    }
    let scale = max_abs(drho).max(1.0);
    let herm = hermiticity_error(drho);
    if herm > 1e-10 * scale {
        return Err(Error::NotHermitian(herm));
    }
    let tr = trace(drho).norm();
    if tr > 1e-10 * scale {
        return Err(Error::param("drho", format!("trace {tr} is not zero")));
    }
    let eig = hermitian_eigen(rho)?;
    let lmax = eig.values.iter().cloned().fold(0.0_f64, f64::max);
    let rotated = eig.vectors.adjoint() * drho * &eig.vectors;
    Ok(Spectral {
        values: eig.values,
        vectors: eig.vectors,
        rotated,
        cutoff: 1e-12 * lmax,
    })
}

/// Mixed-state QFI from the spectral form of the symmetric logarithmic
/// derivative; pairs with `lambda_p + lambda_q <= 1e-12 lambda_max` are dropped.
pub fn qfi_mixed_sld(rho: &DensityMatrix, drho: &CMatrix) -> Result<f64> {
    Ok(qfi_with_min_eigenvalue(rho, drho)?.0)
}

/// [`qfi_mixed_sld`] together with the smallest eigenvalue of `rho`.
pub fn qfi_with_min_eigenvalue(rho: &DensityMatrix, drho: &CMatrix) -> Result<(f64, f64)> {
    qfi_matrix(&rho.rho, drho)
}

/// [`qfi_with_min_eigenvalue`] for a bare Hermitian, unit-trace matrix.
pub fn qfi_matrix(rho: &CMatrix, drho: &CMatrix) -> Result<(f64, f64)> {
    let sp = spectral(rho, drho)?;
    let n = sp.values.len();
    let mut acc = 0.0;
    for q in 0..n {
        for p in 0..n {
            let s = sp.values[p] + sp.values[q];
            if s > sp.cutoff {
                acc += 2.0 * sp.rotated[(p, q)].norm_sqr() / s;
            }
        }
    }
    Ok((acc, sp.values[0]))
}

/// QFI of a real symmetric state `sigma` for the unitary family generated
/// by a diagonal Hamiltonian, plus the smallest eigenvalue of `sigma`.
pub fn qfi_real_diagonal_generator(sigma: &DMatrix<f64>, generator: &[f64]) -> Result<(f64, f64)> {
    let n = sigma.nrows();
    if generator.len() != n || sigma.ncols() != n {
        return Err(Error::DimensionMismatch { expected: n, got: generator.len() });
    }
    let (values, vecs) = symmetric_eigen(sigma)?;
    let lmax = values.iter().cloned().fold(0.0_f64, f64::max);
    let cutoff = 1e-12 * lmax;
    let scaled = DMatrix::from_fn(n, n, |r, c| generator[r] * vecs[(r, c)]);
    let g = vecs.tr_mul(&scaled);
    let mut acc = 0.0;
    for q in 0..n {
        for p in 0..q {
            let s = values[p] + values[q];
            if s > cutoff {
                let d = values[p] - values[q];
                acc += 4.0 * d * d / s * g[(p, q)].powi(2);
            }
        }
    }
    Ok((acc, values[0]))
}

/// QFI of `rho` for the unitary family `exp(-i a G) rho exp(i a G)` at `a = 0`.
pub fn qfi_generator(rho: &DensityMatrix, generator: &CMatrix) -> Result<f64> {
    let drho = (generator * &rho.rho - &rho.rho * generator) * (-I);
    qfi_mixed_sld(rho, &drho)
}

/// Symmetric logarithmic derivative `L` with `drho = (L rho + rho L) / 2`,
/// restricted to the support cut by the same tolerance as [`qfi_mixed_sld`].
pub fn sld_operator(rho: &DensityMatrix, drho: &CMatrix) -> Result<CMatrix> {
    let sp = spectral(&rho.rho, drho)?;
    let n = sp.values.len();
    let mut l = CMatrix::zeros(n, n);
    for q in 0..n {
        for p in 0..n {
            let s = sp.values[p] + sp.values[q];
            if s > sp.cutoff {
                l[(p, q)] = sp.rotated[(p, q)] * (2.0 / s);
            }
        }
    }
    Ok(&sp.vectors * l * sp.vectors.adjoint())
}

/// Projective measurement in the eigenbasis of the SLD.
pub fn optimal_povm(rho: &DensityMatrix, drho: &CMatrix) -> Result<Povm> {
    let l = sld_operator(rho, drho)?;
    let eig = hermitian_eigen(&l)?;
    Povm::projective(&eig.vectors)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimation::fisher_povm;
    use crate::floquet::{evolve_with_derivative, FloquetCache, KickedTopParams};
    use crate::linalg::{c, rel_diff, C64};
    use crate::spin::{build_ops, coherent_state, PhaseAngles, SpinQuantum};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_density(n: usize, rng: &mut ChaCha8Rng) -> CMatrix {
        let a = CMatrix::from_fn(n, n, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        let r = &a * a.adjoint();
        let t = trace(&r);
        r / t
    }

    fn random_hermitian(n: usize, rng: &mut ChaCha8Rng) -> CMatrix {
        let a = CMatrix::from_fn(n, n, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        (&a + a.adjoint()) * c(0.5)
    }

    #[test]
    fn pure_embedding_matches_pure_formula() {
        let s = SpinQuantum::from_j(6.0).unwrap();
        let cache = FloquetCache::new(s).unwrap();
        let psi = coherent_state(s, PhaseAngles::new(1.1, 0.4).unwrap());
        let (out, d) = evolve_with_derivative(&psi, &cache, KickedTopParams::new(1.0, 3.0).unwrap(), 4).unwrap();
        let rho = out.to_density();
        let drho = &d * out.amps.adjoint() + &out.amps * d.adjoint();
        let mixed = qfi_mixed_sld(&rho, &drho).unwrap();
        let pure = qfi_pure(&out, &d).unwrap();
        assert!(rel_diff(mixed, pure) < 1e-8, "{mixed} vs {pure}");
    }

    #[test]
    fn maximally_mixed_zero_derivative() {
        let s = SpinQuantum::from_j(3.0).unwrap();
        let rho = DensityMatrix::maximally_mixed(s);
        assert_eq!(qfi_mixed_sld(&rho, &CMatrix::zeros(7, 7)).unwrap(), 0.0);
    }

    #[test]
    fn commuting_case_is_classical_fisher() {
        let s = SpinQuantum::from_j(1.5).unwrap();
        let p = [0.1, 0.2, 0.3, 0.4];
        let dp = [0.05, -0.1, 0.02, 0.03];
        let rho = DensityMatrix::new(s, CMatrix::from_diagonal(&CVector::from_iterator(4, p.iter().map(|&v| c(v))))).unwrap();
        let drho = CMatrix::from_diagonal(&CVector::from_iterator(4, dp.iter().map(|&v| c(v))));
        let expected: f64 = p.iter().zip(&dp).map(|(a, b)| b * b / a).sum();
        assert!(rel_diff(qfi_mixed_sld(&rho, &drho).unwrap(), expected) < 1e-12);
    }

    #[test]
    fn rejects_non_hermitian_derivative() {
        let s = SpinQuantum::from_j(1.0).unwrap();
        let rho = DensityMatrix::maximally_mixed(s);
        let mut d = CMatrix::zeros(3, 3);
        d[(0, 1)] = c(1.0);
        assert!(matches!(qfi_mixed_sld(&rho, &d), Err(Error::NotHermitian(_))));
    }

    #[test]
    fn sld_reproduces_derivative_and_saturates() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let s = SpinQuantum::from_j(2.0).unwrap();
        let rho = DensityMatrix::new(s, random_density(5, &mut rng)).unwrap();
        let g = random_hermitian(5, &mut rng);
        let drho = (&g * &rho.rho - &rho.rho * &g) * (-I);
        let l = sld_operator(&rho, &drho).unwrap();
        let back = (&l * &rho.rho + &rho.rho * &l) * c(0.5);
        assert!(max_abs(&(back - &drho)) < 1e-10);
        let q = qfi_mixed_sld(&rho, &drho).unwrap();
        // QFI = tr(rho L^2)
        assert!(rel_diff(q, trace(&(&rho.rho * &l * &l)).re) < 1e-10);
        let f = fisher_povm(&optimal_povm(&rho, &drho).unwrap(), &rho, &drho).unwrap();
        assert!(rel_diff(f, q) < 1e-6, "{f} vs {q}");
    }

    #[test]
    fn generator_qfi_of_coherent_state() {
        let s = SpinQuantum::from_j(4.0).unwrap();
        let ops = build_ops(s);
        let theta = 0.7;
        let rho = coherent_state(s, PhaseAngles::new(theta, 0.0).unwrap()).to_density();
        let q = qfi_generator(&rho, &ops.jz).unwrap();
        assert!(rel_diff(q, 2.0 * 4.0 * theta.sin().powi(2)) < 1e-9);
        let real = rho.rho.map(|z| z.re);
        let (qr, _) = qfi_real_diagonal_generator(&real, &s.m_values()).unwrap();
        assert!(rel_diff(qr, q) < 1e-9);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn qfi_is_convex_under_mixing(seed in 0u64..1000, w in 0.05f64..0.95) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = SpinQuantum::from_j(1.5).unwrap();
            let g = random_hermitian(4, &mut rng);
            let r1 = random_density(4, &mut rng);
            let r2 = random_density(4, &mut rng);
            let d = |r: &CMatrix| (&g * r - r * &g) * (-I);
            let q1 = qfi_mixed_sld(&DensityMatrix::new(s, r1.clone()).unwrap(), &d(&r1)).unwrap();
            let q2 = qfi_mixed_sld(&DensityMatrix::new(s, r2.clone()).unwrap(), &d(&r2)).unwrap();
            let mix = &r1 * c(w) + &r2 * c(1.0 - w);
            let qm = qfi_mixed_sld(&DensityMatrix::new(s, mix.clone()).unwrap(), &d(&mix)).unwrap();
            prop_assert!(qm <= w * q1 + (1.0 - w) * q2 + 1e-9);
        }
    }
}
