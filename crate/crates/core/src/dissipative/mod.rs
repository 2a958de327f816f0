//! Kicked top with superradiant damping between kicks.
//!
//! One period is `rho -> U (D rho) U^dagger`, where `D` is the exact
//! damping map over one period. The alpha-derivative of `rho` is carried
//! along exactly.

mod propagator;

pub use propagator::{
    apply_damping_period, expm_lower_bidiagonal, lindblad_rhs, DampingParams, SuperradiancePropagator,
};

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::{
    max_rescaled, qfi_real_diagonal_generator, qfi_with_min_eigenvalue, EstimationMeta, EstimationResult,
};
use crate::exec::{map_collect, Execution};
use crate::floquet::{FloquetCache, FloquetStepper, KickedTopParams};
use crate::linalg::{hermitize, CMatrix, CVector, I};
use crate::spin::{coherent_state, DensityMatrix, PhaseAngles, PureState, SpinQuantum};

/// Eigenvalues below this abort a run.
pub const POSITIVITY_FLOOR: f64 = -1e-8;

fn monitor_positivity(min_eigenvalue: f64, time: usize) -> Result<()> {
    if min_eigenvalue < POSITIVITY_FLOOR {
        return Err(Error::PositivityViolation { min_eigenvalue, time: time as f64 });
    }
    if min_eigenvalue < -1e-12 {
        log::warn!("density matrix eigenvalue {min_eigenvalue:e} at t = {time}");
    }
    Ok(())
}

/// `-i [J_z, x]`, using that `J_z` is diagonal.
fn jz_commutator(spin: SpinQuantum, x: &CMatrix) -> CMatrix {
    CMatrix::from_fn(x.nrows(), x.ncols(), |a, b| x[(a, b)] * (-I * (spin.m(a) - spin.m(b))))
}

/// One dissipative kicked-top period for `(rho, d rho / d alpha)`.
pub fn dkt_step(
    rho: &CMatrix,
    drho: &CMatrix,
    stepper: &FloquetStepper<'_>,
    propagator: &SuperradiancePropagator,
) -> Result<(CMatrix, CMatrix)> {
    let spin = propagator.spin();
    let damped = propagator.apply_hermitian(rho)?;
    let ddamped = propagator.apply_hermitian(drho)? + jz_commutator(spin, &damped);
    let mut next = stepper.conjugate(&damped);
    let mut dnext = stepper.conjugate(&ddamped);
    hermitize(&mut next);
    hermitize(&mut dnext);
    Ok((next, dnext))
}

/// Joint evolution of a density matrix and its alpha-derivative.
pub struct DissipativeTrajectory<'a> {
    stepper: FloquetStepper<'a>,
    propagator: &'a SuperradiancePropagator,
    rho: CMatrix,
    drho: CMatrix,
    time: usize,
}

impl<'a> DissipativeTrajectory<'a> {
    pub fn new(
        initial: &DensityMatrix,
        cache: &'a FloquetCache,
        propagator: &'a SuperradiancePropagator,
        params: KickedTopParams,
    ) -> Result<Self> {
        if initial.spin != cache.spin() || initial.spin != propagator.spin() {
            return Err(Error::DimensionMismatch {
                expected: cache.dim(),
                got: initial.dim(),
            });
        }
        let n = initial.dim();
        Ok(Self {
            stepper: cache.stepper(params),
            propagator,
            rho: initial.rho.clone(),
            drho: CMatrix::zeros(n, n),
            time: 0,
        })
    }

    pub fn step(&mut self) -> Result<()> {
        let (rho, drho) = dkt_step(&self.rho, &self.drho, &self.stepper, self.propagator)?;
        self.rho = rho;
        self.drho = drho;
        self.time += 1;
        Ok(())
    }

    pub fn time(&self) -> usize {
        self.time
    }

    pub fn rho(&self) -> &CMatrix {
        &self.rho
    }

    pub fn drho(&self) -> &CMatrix {
        &self.drho
    }

    pub fn density(&self) -> DensityMatrix {
        DensityMatrix::from_raw(self.propagator.spin(), self.rho.clone())
    }

    /// Mixed-state QFI of the current pair; fails on a positivity violation.
    pub fn qfi(&self) -> Result<f64> {
        let (q, min) = qfi_with_min_eigenvalue(&self.density(), &self.drho)?;
        monitor_positivity(min, self.time)?;
        Ok(q)
    }
}

/// When to stop generating a QFI series.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesStop {
    pub t_max: usize,
    /// Stop once `value / t` has dropped below this fraction of its best
    /// value and at least twice the time of that best value has elapsed.
    pub rescaled_drop: Option<f64>,
}

impl SeriesStop {
    pub fn fixed(t_max: usize) -> Self {
        Self { t_max, rescaled_drop: None }
    }

    fn done(&self, series: &[EstimationResult]) -> bool {
        let Some(last) = series.last() else { return false };
        if last.t >= self.t_max {
            return true;
        }
        match (self.rescaled_drop, max_rescaled(series)) {
            (Some(frac), Ok(best)) => best.rescaled > 0.0 && last.rescaled < frac * best.rescaled && last.t >= 2 * best.t,
            _ => false,
        }
    }
}

fn meta(spin: SpinQuantum, params: KickedTopParams, gamma: f64, angles: PhaseAngles) -> EstimationMeta {
    EstimationMeta {
        j: spin.j(),
        k: params.k,
        alpha: params.alpha,
        gamma,
        theta: angles.theta,
        phi: angles.phi,
    }
}

/// QFI for `t = 1, 2, ...` of a coherent initial state under the
/// dissipative kicked top.
pub fn dkt_series(
    cache: &FloquetCache,
    propagator: &SuperradiancePropagator,
    params: KickedTopParams,
    angles: PhaseAngles,
    stop: SeriesStop,
) -> Result<Vec<EstimationResult>> {
    let spin = cache.spin();
    let initial = coherent_state(spin, angles).to_density();
    let mut traj = DissipativeTrajectory::new(&initial, cache, propagator, params)?;
    let m = meta(spin, params, propagator.gamma(), angles);
    let mut out = Vec::new();
    while !stop.done(&out) {
        traj.step()?;
        out.push(EstimationResult::new(traj.qfi()?, traj.time(), m));
    }
    Ok(out)
}

/// Unkicked dissipative top. Precession commutes with the damping, so the
/// state after `t` periods is `P^t D^t rho P^-t` and the QFI is
/// `t^2 F(D^t rho, J_z)`. Starting at `phi = 0` keeps everything real.
pub fn dt_series(
    propagator: &SuperradiancePropagator,
    theta: f64,
    stop: SeriesStop,
) -> Result<Vec<EstimationResult>> {
    let spin = propagator.spin();
    let angles = PhaseAngles::new(theta, 0.0)?;
    let psi = coherent_state(spin, angles);
    let amps: Vec<f64> = psi.amps.iter().map(|z| z.re).collect();
    let n = spin.dim();
    let mut sigma = DMatrix::from_fn(n, n, |a, b| amps[a] * amps[b]);
    let m_values = spin.m_values();
    let m = EstimationMeta {
        j: spin.j(),
        k: 0.0,
        alpha: f64::NAN,
        gamma: propagator.gamma(),
        theta,
        phi: f64::NAN,
    };
    let mut out = Vec::new();
    let mut t = 0;
    while !stop.done(&out) {
        sigma = propagator.apply_real_symmetric(&sigma);
        t += 1;
        let (f, min) = qfi_real_diagonal_generator(&sigma, &m_values)?;
        monitor_positivity(min, t)?;
        out.push(EstimationResult::new((t * t) as f64 * f, t, m));
    }
    Ok(out)
}

/// What a benchmark optimisation maximises.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Objective {
    /// `max_t I(t) / t`.
    MaxRescaled,
    /// `max_t I(t)`.
    MaxValue,
}

impl Objective {
    fn pick(self, series: &[EstimationResult]) -> Result<EstimationResult> {
        match self {
            Objective::MaxRescaled => max_rescaled(series),
            Objective::MaxValue => series
                .iter()
                .copied()
                .reduce(|a, b| if b.value > a.value { b } else { a })
                .ok_or(Error::Empty("series")),
        }
    }

    fn score(self, r: &EstimationResult) -> f64 {
        match self {
            Objective::MaxRescaled => r.rescaled,
            Objective::MaxValue => r.value,
        }
    }
}

/// Settings for optimising the unkicked benchmark over `theta`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThetaSearch {
    pub grid: usize,
    /// Golden-section iterations around the best grid point.
    pub refine_iters: usize,
}

impl Default for ThetaSearch {
    fn default() -> Self {
        Self { grid: 128, refine_iters: 30 }
    }
}

/// Best unkicked dissipative-top result over initial polar angles.
pub fn dt_benchmark(
    propagator: &SuperradiancePropagator,
    stop: SeriesStop,
    objective: Objective,
    search: ThetaSearch,
    exec: Execution,
) -> Result<EstimationResult> {
    if search.grid < 2 {
        return Err(Error::param("grid", "need at least 2 points"));
    }
    let eval = |theta: f64| -> Result<EstimationResult> { objective.pick(&dt_series(propagator, theta, stop)?) };
    let step = PI / search.grid as f64;
    // theta in (0, pi]; theta = 0 has zero QFI
    let thetas: Vec<f64> = (1..=search.grid).map(|i| i as f64 * step).collect();
    let coarse = map_collect(exec, &thetas, |&th| eval(th)).into_iter().collect::<Result<Vec<_>>>()?;
    let (best_idx, _) = coarse
        .iter()
        .enumerate()
        .max_by(|a, b| objective.score(a.1).total_cmp(&objective.score(b.1)))
        .ok_or(Error::Empty("theta grid"))?;
    let mut best = coarse[best_idx];
    let centre = thetas[best_idx];
    let (mut lo, mut hi) = ((centre - step).max(1e-9), (centre + step).min(PI));
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let mut f1 = eval(x1)?;
    let mut f2 = eval(x2)?;
    for _ in 0..search.refine_iters {
        if objective.score(&f1) >= objective.score(&f2) {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = eval(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = eval(x2)?;
        }
    }
    for cand in [f1, f2] {
        if objective.score(&cand) > objective.score(&best) {
            best = cand;
        }
    }
    Ok(best)
}

/// Settings for optimising the kicked top over initial coherent states.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateSearch {
    pub theta_points: usize,
    pub phi_points: usize,
    /// Rounds of local 3x3 refinement, each halving the cell size.
    pub refine_rounds: usize,
}

impl Default for StateSearch {
    fn default() -> Self {
        Self {
            theta_points: 16,
            phi_points: 16,
            refine_rounds: 3,
        }
    }
}

/// Best dissipative kicked-top result over initial coherent states.
pub fn dkt_optimized(
    cache: &FloquetCache,
    propagator: &SuperradiancePropagator,
    params: KickedTopParams,
    stop: SeriesStop,
    objective: Objective,
    search: StateSearch,
    exec: Execution,
) -> Result<EstimationResult> {
    if search.theta_points < 1 || search.phi_points < 1 {
        return Err(Error::param("grid", "need at least one point per axis"));
    }
    let eval = |th: f64, ph: f64| -> Result<EstimationResult> {
        let angles = PhaseAngles::new(th.clamp(0.0, PI), ph)?;
        objective.pick(&dkt_series(cache, propagator, params, angles, stop)?)
    };
    let dth = PI / search.theta_points as f64;
    let dph = 2.0 * PI / search.phi_points as f64;
    let grid: Vec<(f64, f64)> = (0..search.theta_points)
        .flat_map(|a| (0..search.phi_points).map(move |b| ((a as f64 + 0.5) * dth, b as f64 * dph)))
        .collect();
    let mut best = best_of(objective, map_collect(exec, &grid, |&(th, ph)| eval(th, ph)))?;
    let (mut sth, mut sph) = (dth / 2.0, dph / 2.0);
    for _ in 0..search.refine_rounds {
        let (th0, ph0) = (best.meta.theta, best.meta.phi);
        let local: Vec<(f64, f64)> = (-1..=1)
            .flat_map(|a| (-1..=1).map(move |b| (th0 + a as f64 * sth, ph0 + b as f64 * sph)))
            .filter(|&(th, _)| (0.0..=PI).contains(&th))
            .collect();
        let cand = best_of(objective, map_collect(exec, &local, |&(th, ph)| eval(th, ph)))?;
        if objective.score(&cand) > objective.score(&best) {
            best = cand;
        }
        sth /= 2.0;
        sph /= 2.0;
    }
    Ok(best)
}

fn best_of(objective: Objective, results: Vec<Result<EstimationResult>>) -> Result<EstimationResult> {
    let mut best: Option<EstimationResult> = None;
    for r in results {
        let r = r?;
        if best.is_none_or(|b| objective.score(&r) > objective.score(&b)) {
            best = Some(r);
        }
    }
    best.ok_or(Error::Empty("state grid"))
}

/// Time of the QFI maximum; ties go to the earliest time. A maximum at
/// either end of the series is reported as an error.
pub fn t_max_scan(series: &[EstimationResult]) -> Result<usize> {
    let first = series.first().ok_or(Error::Empty("series"))?;
    let mut best = first;
    for r in series {
        if r.value > best.value || (r.value == best.value && r.t < best.t) {
            best = r;
        }
    }
    let last = series.last().map(|r| r.t);
    if series.len() < 3 || Some(best.t) == last || best.t == first.t {
        return Err(Error::NoInteriorMaximum);
    }
    Ok(best.t)
}

/// Mean of the final `tail_fraction` of a series, requiring a relative
/// spread below 5% there. A tail that has decayed to zero gives 0.
pub fn plateau_value(series: &[f64], tail_fraction: f64) -> Result<f64> {
    if series.is_empty() {
        return Err(Error::Empty("series"));
    }
    if !(tail_fraction > 0.0 && tail_fraction <= 1.0) {
        return Err(Error::param("tail_fraction", format!("{tail_fraction} outside (0, 1]")));
    }
    let len = ((series.len() as f64 * tail_fraction).ceil() as usize).clamp(1, series.len());
    let tail = &series[series.len() - len..];
    let peak = series.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let tail_peak = tail.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    if tail_peak <= 1e-9 * peak || tail_peak == 0.0 {
        return Ok(0.0);
    }
    let mean = tail.iter().sum::<f64>() / len as f64;
    let (lo, hi) = tail.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let spread = (hi - lo) / mean.abs();
    if spread >= 0.05 {
        return Err(Error::NotConverged { spread });
    }
    Ok(mean)
}

/// Pure-state kicked-top evolution embedded as a density matrix.
pub fn pure_pair(state: &PureState, dpsi: &CVector) -> (CMatrix, CMatrix) {
    let rho = &state.amps * state.amps.adjoint();
    let drho = dpsi * state.amps.adjoint() + &state.amps * dpsi.adjoint();
    (rho, drho)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::floquet::evolve_with_derivative;
    use crate::linalg::{max_abs, rel_diff, trace, C64};

    fn setup(j: f64, gamma: f64) -> (SpinQuantum, FloquetCache, SuperradiancePropagator) {
        let s = SpinQuantum::from_j(j).unwrap();
        let cache = FloquetCache::new(s).unwrap();
        let prop = SuperradiancePropagator::new(s, DampingParams::new(gamma).unwrap(), 1.0).unwrap();
        (s, cache, prop)
    }

    #[test]
    fn undamped_matches_pure_evolution() {
        let (s, cache, prop) = setup(6.0, 0.0);
        let params = KickedTopParams::new(PI / 2.0, 30.0).unwrap();
        let psi = coherent_state(s, PhaseAngles::new(1.0, 2.0).unwrap());
        let mut traj = DissipativeTrajectory::new(&psi.to_density(), &cache, &prop, params).unwrap();
        for _ in 0..5 {
            traj.step().unwrap();
        }
        let (out, d) = evolve_with_derivative(&psi, &cache, params, 5).unwrap();
        let (rho, drho) = pure_pair(&out, &d);
        assert!(max_abs(&(traj.rho() - rho)) < 1e-11);
        assert!(max_abs(&(traj.drho() - drho)) < 1e-10);
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let (s, cache, prop) = setup(10.0, 1e-3);
        let params = KickedTopParams::new(1.0, 30.0).unwrap();
        let init = coherent_state(s, PhaseAngles::new(PI / 2.0, PI / 2.0).unwrap()).to_density();
        let run = |alpha: f64| {
            let mut traj = DissipativeTrajectory::new(&init, &cache, &prop, params.with_alpha(alpha)).unwrap();
            for _ in 0..4 {
                traj.step().unwrap();
            }
            (traj.rho().clone(), traj.drho().clone())
        };
        let (_, d) = run(1.0);
        let h = 1e-5;
        let fd = (run(1.0 + h).0 - run(1.0 - h).0) / C64::new(2.0 * h, 0.0);
        assert!(max_abs(&(fd - &d)) / max_abs(&d) < 1e-6);
    }

    #[test]
    fn trace_and_hermiticity_over_long_run() {
        let (s, cache, prop) = setup(3.0, 5e-3);
        let params = KickedTopParams::new(PI / 2.0, 30.0).unwrap();
        let init = coherent_state(s, PhaseAngles::new(PI / 2.0, PI / 2.0).unwrap()).to_density();
        let mut traj = DissipativeTrajectory::new(&init, &cache, &prop, params).unwrap();
        for _ in 0..10_000 {
            let before = trace(traj.rho()).re;
            traj.step().unwrap();
            assert!((trace(traj.rho()).re - before).abs() < 1e-12);
        }
        assert!(crate::linalg::hermiticity_error(traj.rho()) < 1e-10);
        assert!(traj.density().min_eigenvalue().unwrap() > POSITIVITY_FLOOR);
        assert!(trace(traj.drho()).norm() < 1e-9);
    }

    #[test]
    fn dt_fast_path_matches_full_propagation() {
        let (_, cache, prop) = setup(5.0, 2e-3);
        let theta = 1.1;
        let fast = dt_series(&prop, theta, SeriesStop::fixed(12)).unwrap();
        let full = dkt_series(
            &cache,
            &prop,
            KickedTopParams::new(0.7, 0.0).unwrap(),
            PhaseAngles::new(theta, 2.3).unwrap(),
            SeriesStop::fixed(12),
        )
        .unwrap();
        assert_eq!(fast.len(), 12);
        for (a, b) in fast.iter().zip(&full) {
            assert_eq!(a.t, b.t);
            assert!(rel_diff(a.value, b.value) < 1e-8, "t={}: {} vs {}", a.t, a.value, b.value);
        }
    }

    #[test]
    fn dt_small_damping_recovers_undamped_benchmark() {
        let (s, _, prop) = setup(8.0, 1e-9);
        let series = dt_series(&prop, PI / 2.0, SeriesStop::fixed(5)).unwrap();
        for r in &series {
            assert!(rel_diff(r.value, 2.0 * (r.t * r.t) as f64 * s.j()) < 1e-5);
        }
    }

    #[test]
    fn dt_qfi_decays_to_zero() {
        let (_, _, prop) = setup(4.0, 0.05);
        let series = dt_series(&prop, PI / 2.0, SeriesStop::fixed(400)).unwrap();
        let peak = series.iter().map(|r| r.value).fold(0.0, f64::max);
        assert!(series.last().unwrap().value < 1e-6 * peak);
        let values: Vec<f64> = series.iter().map(|r| r.value).collect();
        assert_eq!(plateau_value(&values, 0.2).unwrap(), 0.0);
    }

    #[test]
    fn theta_grid_converged() {
        let (_, _, prop) = setup(15.0, 1e-3);
        let stop = SeriesStop { t_max: 2000, rescaled_drop: Some(0.3) };
        let coarse = dt_benchmark(&prop, stop, Objective::MaxRescaled, ThetaSearch { grid: 64, refine_iters: 0 }, Execution::default()).unwrap();
        let fine = dt_benchmark(&prop, stop, Objective::MaxRescaled, ThetaSearch { grid: 128, refine_iters: 0 }, Execution::default()).unwrap();
        assert!(rel_diff(coarse.rescaled, fine.rescaled) < 5e-3);
        let refined = dt_benchmark(&prop, stop, Objective::MaxRescaled, ThetaSearch { grid: 64, refine_iters: 20 }, Execution::default()).unwrap();
        assert!(refined.rescaled >= coarse.rescaled);
    }

    #[test]
    fn t_max_of_synthetic_series() {
        let (j, gamma) = (15.0, 1e-3);
        let series: Vec<_> = (1..400)
            .map(|t| {
                let t = t as usize;
                let tf = t as f64;
                EstimationResult::new(tf * tf * (-2.0 * j * gamma * tf).exp(), t, EstimationMeta::default())
            })
            .collect();
        let tm = t_max_scan(&series).unwrap();
        assert!((tm as f64 - 1.0 / (j * gamma)).abs() <= 1.0);
        let mono: Vec<_> = (1..10).map(|t| EstimationResult::new(t as f64, t, EstimationMeta::default())).collect();
        assert!(matches!(t_max_scan(&mono), Err(Error::NoInteriorMaximum)));
        // slope over gamma of the synthetic model
        let gammas = [1e-4, 3e-4, 1e-3, 3e-3];
        let tms: Vec<f64> = gammas.iter().map(|g| 1.0 / (j * g)).collect();
        let slope = crate::estimation::loglog_slope(&gammas, &tms).unwrap();
        assert!((slope + 1.0).abs() < 1e-12);
    }

    #[test]
    fn plateau_rules() {
        assert_eq!(plateau_value(&[3.0; 20], 0.25).unwrap(), 3.0);
        let noisy: Vec<f64> = (0..20).map(|i| if i % 2 == 0 { 1.0 } else { 2.0 }).collect();
        assert!(matches!(plateau_value(&noisy, 0.5), Err(Error::NotConverged { .. })));
        assert!(plateau_value(&[], 0.5).is_err());
    }
}
