use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{map_collect, Execution};
use crate::floquet::FloquetCache;
use crate::linalg::{hermitian_eigen, max_abs, symmetric_eigen, trace_product, CMatrix, CVector, C64};
use crate::spin::{DensityMatrix, PureState, SpinQuantum};

/// One POVM element. Rank-one projectors are stored as vectors.
#[derive(Clone, Debug, PartialEq)]
pub enum Effect {
    Projector(CVector),
    Dense(CMatrix),
}

impl Effect {
    fn dim(&self) -> usize {
        match self {
            Effect::Projector(v) => v.len(),
            Effect::Dense(m) => m.nrows(),
        }
    }

    pub fn to_dense(&self) -> CMatrix {
        match self {
            Effect::Projector(v) => v * v.adjoint(),
            Effect::Dense(m) => m.clone(),
        }
    }

    /// `tr(E X)`.
    pub fn trace_with(&self, x: &CMatrix) -> C64 {
        match self {
            Effect::Projector(v) => v.dotc(&(x * v)),
            Effect::Dense(m) => trace_product(m, x),
        }
    }

    /// `(<psi|E|psi>, 2 Re <psi|E|dpsi>)`.
    pub fn pure_terms(&self, psi: &CVector, dpsi: &CVector) -> (f64, f64) {
        match self {
            Effect::Projector(v) => {
                let a = v.dotc(psi);
                let b = v.dotc(dpsi);
                (a.norm_sqr(), 2.0 * (a.conj() * b).re)
            }
            Effect::Dense(m) => {
                let mp = m * psi;
                (psi.dotc(&mp).re, 2.0 * mp.dotc(dpsi).re)
            }
        }
    }

    /// `4 <dpsi|E|dpsi>`: the limit of `(dp)^2 / p` at an outcome whose
    /// probability vanishes.
    pub fn vanishing_limit(&self, dpsi: &CVector) -> f64 {
        4.0 * match self {
            Effect::Projector(v) => v.dotc(dpsi).norm_sqr(),
            Effect::Dense(m) => dpsi.dotc(&(m * dpsi)).re,
        }
    }
}

/// Positive operator-valued measure on an `N`-dimensional space.
#[derive(Clone, Debug, PartialEq)]
pub struct Povm {
    dim: usize,
    elements: Vec<Effect>,
}

impl Povm {
    pub const POSITIVITY_TOL: f64 = 1e-10;
    pub const COMPLETENESS_TOL: f64 = 1e-10;

    /// Validates positivity of every element and completeness.
    pub fn new(elements: Vec<Effect>) -> Result<Self> {
        let dim = elements.first().ok_or(Error::Empty("POVM elements"))?.dim();
        let mut sum = CMatrix::zeros(dim, dim);
        for e in &elements {
            if e.dim() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: e.dim() });
            }
            if let Effect::Dense(m) = e {
                let min = hermitian_eigen(m)?.values[0];
                if min < -Self::POSITIVITY_TOL {
                    return Err(Error::param("povm", format!("element has eigenvalue {min}")));
                }
            }
            sum += e.to_dense();
        }
        let err = max_abs(&(sum - CMatrix::identity(dim, dim)));
        if err > Self::COMPLETENESS_TOL {
            return Err(Error::param("povm", format!("elements sum to identity only within {err}")));
        }
        Ok(Self { dim, elements })
    }

    /// Rank-one projectors onto the columns of a unitary.
    pub fn projective(basis: &CMatrix) -> Result<Self> {
        Self::new(basis.column_iter().map(|col| Effect::Projector(col.into_owned())).collect())
    }

    /// `{P, 1 - P}` for a Hermitian projector `P`.
    pub fn binary(projector: &CMatrix) -> Result<Self> {
        let n = projector.nrows();
        let rest = CMatrix::identity(n, n) - projector;
        Self::new(vec![Effect::Dense(projector.clone()), Effect::Dense(rest)])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn elements(&self) -> &[Effect] {
        &self.elements
    }

    pub fn probabilities_pure(&self, psi: &CVector) -> Vec<f64> {
        let zero = CVector::zeros(psi.len());
        self.elements.iter().map(|e| e.pure_terms(psi, &zero).0).collect()
    }

    fn check(&self, n: usize) -> Result<()> {
        if n != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: n });
        }
        Ok(())
    }
}

/// Projective measurement of `J_y`, outcomes ordered `m_y = -j, ..., j`.
pub fn jy_projective_povm(spin: SpinQuantum) -> Result<Povm> {
    Povm::projective(&FloquetCache::new(spin)?.jy_eigvecs())
}

/// Repeated independent measurements with the same POVM.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementModel {
    pub repetitions: usize,
    pub povm: Povm,
}

impl MeasurementModel {
    pub fn new(repetitions: usize, povm: Povm) -> Result<Self> {
        if repetitions < 1 {
            return Err(Error::param("repetitions", "must be >= 1"));
        }
        Ok(Self { repetitions, povm })
    }

    /// Cramer-Rao lower bound on the standard deviation, `1/sqrt(M I)`.
    pub fn precision_bound(&self, fisher: f64) -> f64 {
        1.0 / (self.repetitions as f64 * fisher).sqrt()
    }
}

/// Outcome probabilities below this are skipped.
const MIN_PROBABILITY: f64 = 1e-14;

/// `sum (dp)^2 / p` over outcomes with `p >= 1e-14`.
pub fn fisher_from_distribution(p: &[f64], dp: &[f64]) -> f64 {
    p.iter()
        .zip(dp)
        .filter(|(p, _)| **p >= MIN_PROBABILITY)
        .map(|(p, d)| d * d / p)
        .sum()
}

/// State together with its parameter derivative.
#[derive(Clone, Debug, PartialEq)]
pub enum PreparedState {
    Pure { state: PureState, derivative: CVector },
    Mixed { rho: DensityMatrix, drho: CMatrix },
}

/// Outcome probabilities, their derivatives, and the limit of
/// `(dp)^2 / p` for outcomes whose probability vanishes (zero when unknown).
#[derive(Clone, Debug, PartialEq)]
pub struct OutcomeDistribution {
    pub p: Vec<f64>,
    pub dp: Vec<f64>,
    pub vanishing: Vec<f64>,
}

impl OutcomeDistribution {
    fn zeros(n: usize) -> Self {
        Self {
            p: vec![0.0; n],
            dp: vec![0.0; n],
            vanishing: vec![0.0; n],
        }
    }

    pub fn fisher(&self) -> f64 {
        self.p
            .iter()
            .zip(&self.dp)
            .zip(&self.vanishing)
            .map(|((&p, &d), &lim)| if p >= MIN_PROBABILITY { d * d / p } else { lim })
            .sum()
    }
}

impl PreparedState {
    pub fn outcome_distribution(&self, povm: &Povm) -> Result<OutcomeDistribution> {
        let mut out = OutcomeDistribution::zeros(povm.len());
        match self {
            PreparedState::Pure { state, derivative } => {
                povm.check(state.dim())?;
                povm.check(derivative.len())?;
                for (i, e) in povm.elements.iter().enumerate() {
                    (out.p[i], out.dp[i]) = e.pure_terms(&state.amps, derivative);
                    if out.p[i] < MIN_PROBABILITY {
                        out.vanishing[i] = e.vanishing_limit(derivative);
                    }
                }
            }
            PreparedState::Mixed { rho, drho } => return mixed_distribution(povm, &rho.rho, drho),
        }
        Ok(out)
    }
}

fn mixed_distribution(povm: &Povm, rho: &CMatrix, drho: &CMatrix) -> Result<OutcomeDistribution> {
    povm.check(rho.nrows())?;
    povm.check(drho.nrows())?;
    let mut out = OutcomeDistribution::zeros(povm.len());
    for (i, e) in povm.elements.iter().enumerate() {
        out.p[i] = e.trace_with(rho).re;
        out.dp[i] = e.trace_with(drho).re;
    }
    Ok(out)
}

/// [`fisher_povm`] for bare matrices.
pub fn fisher_matrix(povm: &Povm, rho: &CMatrix, drho: &CMatrix) -> Result<f64> {
    Ok(mixed_distribution(povm, rho, drho)?.fisher())
}

pub fn fisher_povm(povm: &Povm, rho: &DensityMatrix, drho: &CMatrix) -> Result<f64> {
    fisher_matrix(povm, &rho.rho, drho)
}

/// Classical Fisher information of a pure state without forming `rho`.
/// Outcomes of vanishing probability contribute their limiting value.
pub fn fisher_pure(povm: &Povm, psi: &PureState, dpsi: &CVector) -> Result<f64> {
    let prepared = PreparedState::Pure { state: psi.clone(), derivative: dpsi.clone() };
    Ok(prepared.outcome_distribution(povm)?.fisher())
}

/// Gauss-Legendre nodes and weights on `[-1, 1]` (Golub-Welsch).
pub fn gauss_legendre(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if n == 0 {
        return Err(Error::param("nodes", "must be >= 1"));
    }
    let jacobi = DMatrix::from_fn(n, n, |a, b| {
        if a + 1 == b || b + 1 == a {
            let i = a.max(b) as f64;
            i / (4.0 * i * i - 1.0).sqrt()
        } else {
            0.0
        }
    });
    let (nodes, vecs) = symmetric_eigen(&jacobi)?;
    let weights = (0..n).map(|i| 2.0 * vecs[(0, i)].powi(2)).collect();
    Ok((nodes, weights))
}

/// Gaussian spread of the kick strength.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KJitter {
    /// Standard deviation relative to the nominal `k`.
    pub rel_sigma: f64,
    /// Quadrature nodes over `+-3 sigma`.
    pub nodes: usize,
}

impl Default for KJitter {
    fn default() -> Self {
        Self { rel_sigma: 0.05, nodes: 21 }
    }
}

impl KJitter {
    /// Kick strengths and normalised weights of the quadrature.
    pub fn grid(&self, k0: f64) -> Result<Vec<(f64, f64)>> {
        if !(self.rel_sigma >= 0.0) {
            return Err(Error::param("rel_sigma", "must be >= 0"));
        }
        let sigma = self.rel_sigma * k0.abs();
        if sigma == 0.0 {
            return Ok(vec![(k0, 1.0)]);
        }
        let (x, w) = gauss_legendre(self.nodes)?;
        let half = 3.0 * sigma;
        let raw: Vec<(f64, f64)> = x
            .iter()
            .zip(&w)
            .map(|(&x, &w)| {
                let dk = half * x;
                (k0 + dk, w * (-0.5 * (dk / sigma).powi(2)).exp() / (sigma * (2.0 * PI).sqrt()))
            })
            .collect();
        let total: f64 = raw.iter().map(|(_, w)| w).sum();
        Ok(raw.into_iter().map(|(k, w)| (k, w / total)).collect())
    }
}

/// Fisher information of outcome statistics averaged over a Gaussian
/// distribution of kick strengths.
pub fn fisher_with_k_jitter<F>(povm: &Povm, prepare: F, k0: f64, jitter: KJitter, exec: Execution) -> Result<f64>
where
    F: Fn(f64) -> Result<PreparedState> + Sync + Send,
{
    let grid = jitter.grid(k0)?;
    let parts = map_collect(exec, &grid, |&(k, w)| -> Result<(OutcomeDistribution, f64)> {
        Ok((prepare(k)?.outcome_distribution(povm)?, w))
    });
    let mut total = OutcomeDistribution::zeros(povm.len());
    for part in parts {
        let (d, w) = part?;
        for i in 0..total.p.len() {
            total.p[i] += w * d.p[i];
            total.dp[i] += w * d.dp[i];
            total.vanishing[i] += w * d.vanishing[i];
        }
    }
    Ok(total.fisher())
}
