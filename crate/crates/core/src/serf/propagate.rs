//! Stroboscopic Euler propagation of `(rho, d rho / dB)` with the hyperfine
//! coherences dropped, and the resulting field sensitivity.
//!
//! Block-diagonal Hermitian states are stored as real coordinate vectors
//! (diagonal entries, then `sqrt 2 Re`, `sqrt 2 Im` of the upper triangle,
//! block by block), so every linear part of the master equation becomes a
//! real matrix built once. The spin-exchange term is bilinear: it is
//! `sum_i <S_i> N_i rho` with fixed matrices `N_i`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::model::{HyperfineBasis, SerfModel};
use crate::error::{Error, Result};
use crate::estimation::{fisher_matrix, gauss_legendre, qfi_matrix, Povm};
use crate::exec::{map_collect, Execution};
use crate::linalg::{c, hermitian_eigen, CMatrix, C64, I};

/// Eigenvalues below this abort the propagation.
const POSITIVITY_ABORT: f64 = -1e-6;

#[derive(Clone, Debug)]
pub struct SerfState {
    pub rho: CMatrix,
    pub drho_db: CMatrix,
}

#[derive(Clone, Debug)]
pub struct SerfSample {
    /// Seconds.
    pub t: f64,
    pub periods: usize,
    pub state: SerfState,
}

/// Step sizes and length of a run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SerfSchedule {
    pub periods: usize,
    /// Euler step outside the pulse, seconds.
    pub dt_free: f64,
    /// Euler step during the pulse, seconds.
    pub dt_pulse: f64,
    /// Record a sample every this many periods.
    pub record_every: usize,
    pub kicked: bool,
    /// Gauss-Legendre nodes of the Doppler average.
    pub doppler_nodes: usize,
}

impl Default for SerfSchedule {
    fn default() -> Self {
        Self {
            periods: 1000,
            dt_free: 1e-6,
            dt_pulse: 1e-8,
            record_every: 10,
            kicked: true,
            doppler_nodes: 15,
        }
    }
}

impl SerfSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt_free > 0.0 && self.dt_pulse > 0.0) {
            return Err(Error::param("dt", "Euler steps must be positive"));
        }
        if self.record_every == 0 {
            return Err(Error::param("record_every", "must be >= 1"));
        }
        if self.doppler_nodes == 0 {
            return Err(Error::param("doppler_nodes", "must be >= 1"));
        }
        Ok(())
    }
}

/// Spin-temperature state `exp(beta F_z) / Z`, `beta = ln((1+q)/(1-q))`.
pub fn thermal_initial_state(basis: &HyperfineBasis, q: f64) -> Result<SerfState> {
    if !(0.0..1.0).contains(&q) {
        return Err(Error::param("q", format!("{q} outside [0, 1)")));
    }
    let beta = ((1.0 + q) / (1.0 - q)).ln();
    let weights: Vec<f64> = basis.levels.iter().map(|&(_, two_m)| (beta * f64::from(two_m) / 2.0).exp()).collect();
    let z: f64 = weights.iter().sum();
    let n = basis.dim();
    let rho = CMatrix::from_diagonal(&DVector::from_iterator(n, weights.iter().map(|w| c(w / z))));
    Ok(SerfState {
        rho,
        drho_db: CMatrix::zeros(n, n),
    })
}

/// Doppler shifts and normalised Maxwell-Boltzmann weights on `+-3 sigma`.
pub fn doppler_nodes(sigma: f64, nodes: usize) -> Result<Vec<(f64, f64)>> {
    if !(sigma >= 0.0) {
        return Err(Error::param("doppler_sigma", "must be >= 0"));
    }
    if sigma == 0.0 || nodes == 1 {
        return Ok(vec![(0.0, 1.0)]);
    }
    let (x, w) = gauss_legendre(nodes)?;
    let raw: Vec<(f64, f64)> = x.iter().zip(&w).map(|(&x, &w)| (3.0 * sigma * x, w * (-4.5 * x * x).exp())).collect();
    let total: f64 = raw.iter().map(|p| p.1).sum();
    Ok(raw.into_iter().map(|(d, w)| (d, w / total)).collect())
}

/// Kicked-top strength of the pulse on the lower hyperfine level:
/// `k = 2 J chi t_pulse` with `chi` the Doppler-averaged coefficient of
/// `(eps . F)^2` and `J = f + 1/2`.
pub fn effective_kick_strength(model: &SerfModel, nodes: usize) -> Result<f64> {
    let grid = doppler_nodes(model.params.doppler_sigma, nodes)?;
    let (shifts, weights): (Vec<f64>, Vec<f64>) = grid.into_iter().unzip();
    let chi = model.rank2_shift_rate(&shifts, &weights)?;
    let big_j = f64::from(model.basis.two_f(0)) / 2.0 + 0.5;
    Ok(2.0 * big_j * chi * model.params.pulse_len)
}

/// Real coordinates of block-diagonal Hermitian matrices.
#[derive(Clone, Debug)]
struct BlockCoords {
    blocks: [(usize, usize); 2],
    dim: usize,
    len: usize,
}

impl BlockCoords {
    fn new(basis: &HyperfineBasis) -> Self {
        let blocks = [basis.block(0), basis.block(1)];
        let len = blocks.iter().map(|&(_, n)| n * n).sum();
        Self {
            blocks,
            dim: basis.dim(),
            len,
        }
    }

    fn to_coords(&self, x: &CMatrix) -> DVector<f64> {
        let s = std::f64::consts::SQRT_2;
        let mut v = Vec::with_capacity(self.len);
        for &(o, n) in &self.blocks {
            for a in 0..n {
                v.push(x[(o + a, o + a)].re);
            }
            for a in 0..n {
                for b in a + 1..n {
                    let z = x[(o + a, o + b)];
                    v.push(s * z.re);
                    v.push(s * z.im);
                }
            }
        }
        DVector::from_vec(v)
    }

    fn to_matrix(&self, v: &DVector<f64>) -> CMatrix {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let mut x = CMatrix::zeros(self.dim, self.dim);
        let mut k = 0;
        for &(o, n) in &self.blocks {
            for a in 0..n {
                x[(o + a, o + a)] = c(v[k]);
                k += 1;
            }
            for a in 0..n {
                for b in a + 1..n {
                    let z = C64::new(v[k] * r, v[k + 1] * r);
                    x[(o + a, o + b)] = z;
                    x[(o + b, o + a)] = z.conj();
                    k += 2;
                }
            }
        }
        x
    }

    fn trace_row(&self) -> DVector<f64> {
        let mut t = DVector::zeros(self.len);
        let mut k = 0;
        for &(_, n) in &self.blocks {
            for a in 0..n {
                t[k + a] = 1.0;
            }
            k += n * n;
        }
        t
    }

    /// Matrix of a Hermiticity-preserving linear map, projected on the blocks.
    fn superoperator(&self, map: impl Fn(&CMatrix) -> CMatrix) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.len, self.len);
        for k in 0..self.len {
            let mut e = DVector::zeros(self.len);
            e[k] = 1.0;
            let image = map(&self.to_matrix(&e));
            out.set_column(k, &self.to_coords(&image));
        }
        out
    }
}

/// Precomputed Euler propagator for one model and schedule.
#[derive(Clone, Debug)]
pub struct SerfPropagator {
    coords: BlockCoords,
    schedule: SerfSchedule,
    tau: f64,
    pulse_len: f64,
    /// `[L; N_x; N_y; N_z; L_B]` without and with the laser.
    free: DMatrix<f64>,
    pulse: DMatrix<f64>,
    /// `tr(S_i rho) = spin_rows[i] . v`.
    spin_rows: [DVector<f64>; 3],
    trace_row: DVector<f64>,
}

impl SerfPropagator {
    pub fn new(model: &SerfModel, schedule: SerfSchedule, exec: Execution) -> Result<Self> {
        schedule.validate()?;
        let coords = BlockCoords::new(&model.basis);
        let n = coords.len;
        let p = &model.params;
        let larmor = model.larmor_generator();
        let h_b = &larmor * c(p.b_field);
        let linear_free = coords.superoperator(|x| {
            let phi = model.nuclear_part(x);
            (&phi - x) * c(p.r_se + p.r_sd) - (&h_b * x - x * &h_b) * I
        });
        let s_ops = &model.basis.s_ops;
        let exchange: Vec<DMatrix<f64>> = (0..3)
            .map(|i| coords.superoperator(|x| model.nuclear_part(x) * &s_ops[i] * c(4.0 * p.r_se)))
            .collect();
        let field = coords.superoperator(|x| (&larmor * x - x * &larmor) * (-I));
        let stack = |linear: &DMatrix<f64>| {
            let mut m = DMatrix::zeros(5 * n, n);
            m.rows_mut(0, n).copy_from(linear);
            for (i, ex) in exchange.iter().enumerate() {
                m.rows_mut((i + 1) * n, n).copy_from(ex);
            }
            m.rows_mut(4 * n, n).copy_from(&field);
            m
        };
        let free = stack(&linear_free);
        let pulse = if schedule.kicked && p.pulse_len > 0.0 && p.i_kick > 0.0 {
            let grid = doppler_nodes(p.doppler_sigma, schedule.doppler_nodes)?;
            let per_node = map_collect(exec, &grid, |&(shift, w)| coords.superoperator(|x| model.laser_rhs(x, shift)) * w);
            let laser = per_node.into_iter().fold(DMatrix::zeros(n, n), |acc, m| acc + m);
            stack(&(linear_free + laser))
        } else {
            free.clone()
        };
        let spin_rows = [0, 1, 2].map(|i| coords.to_coords(&s_ops[i]));
        let trace_row = coords.trace_row();
        Ok(Self {
            coords,
            schedule,
            tau: p.tau,
            pulse_len: p.pulse_len,
            free,
            pulse,
            spin_rows,
            trace_row,
        })
    }

    pub fn schedule(&self) -> &SerfSchedule {
        &self.schedule
    }

    fn euler_step(&self, stack: &DMatrix<f64>, h: f64, pair: &mut DMatrix<f64>, work: &mut DMatrix<f64>) {
        let n = self.coords.len;
        work.gemm(1.0, stack, pair, 0.0);
        let v = pair.column(0).clone_owned();
        let dv = pair.column(1).clone_owned();
        let sv = self.spin_rows.clone().map(|r| r.dot(&v));
        let sdv = self.spin_rows.clone().map(|r| r.dot(&dv));
        let mut k = work.view((0, 0), (n, 1)).clone_owned();
        let mut dk = work.view((0, 1), (n, 1)) + work.view((4 * n, 0), (n, 1));
        for i in 0..3 {
            let nv = work.view(((i + 1) * n, 0), (n, 1));
            let ndv = work.view(((i + 1) * n, 1), (n, 1));
            k += nv * sv[i];
            dk += nv * sdv[i] + ndv * sv[i];
        }
        let mut v = v + k * h;
        let mut dv = dv + dk * h;
        let tr = self.trace_row.dot(&v);
        let dtr = self.trace_row.dot(&dv);
        v /= tr;
        dv = (dv - &v * dtr) / tr;
        pair.set_column(0, &v.column(0));
        pair.set_column(1, &dv.column(0));
    }

    /// Runs the schedule from `initial`, recording every `record_every`
    /// periods. The pulse occupies the end of each period.
    pub fn run(&self, initial: &SerfState) -> Result<Vec<SerfSample>> {
        let n = self.coords.len;
        let mut pair = DMatrix::zeros(n, 2);
        pair.set_column(0, &self.coords.to_coords(&initial.rho));
        pair.set_column(1, &self.coords.to_coords(&initial.drho_db));
        let mut work = DMatrix::zeros(5 * n, 2);
        let pulsed = self.schedule.kicked && self.pulse_len > 0.0;
        let free_len = if pulsed { self.tau - self.pulse_len } else { self.tau };
        let n_free = (free_len / self.schedule.dt_free).ceil().max(1.0) as usize;
        let h_free = free_len / n_free as f64;
        let n_pulse = (self.pulse_len / self.schedule.dt_pulse).ceil().max(1.0) as usize;
        let h_pulse = self.pulse_len / n_pulse as f64;
        let mut out = Vec::with_capacity(self.schedule.periods / self.schedule.record_every + 1);
        for period in 1..=self.schedule.periods {
            for _ in 0..n_free {
                self.euler_step(&self.free, h_free, &mut pair, &mut work);
            }
            if pulsed {
                for _ in 0..n_pulse {
                    self.euler_step(&self.pulse, h_pulse, &mut pair, &mut work);
                }
            }
            if period % self.schedule.record_every == 0 || period == self.schedule.periods {
                let t = period as f64 * self.tau;
                let state = SerfState {
                    rho: self.coords.to_matrix(&pair.column(0).clone_owned()),
                    drho_db: self.coords.to_matrix(&pair.column(1).clone_owned()),
                };
                let min = hermitian_eigen(&state.rho)?.values[0];
                if min < POSITIVITY_ABORT {
                    return Err(Error::PositivityViolation { min_eigenvalue: min, time: t });
                }
                if min < -1e-9 {
                    log::warn!("small negative eigenvalue {min:e} at t = {t} s");
                }
                out.push(SerfSample { t, periods: period, state });
            }
        }
        Ok(out)
    }
}

/// Readout whose Fisher information is reported.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Readout {
    /// Quantum Fisher information.
    Optimal,
    /// Projective measurement of the electron spin `S_z`.
    Sz,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensitivityPoint {
    pub t: f64,
    /// Fisher information per atom, 1/T^2.
    pub fisher: f64,
    /// `fisher / t`, 1/(T^2 s).
    pub rescaled: f64,
    /// `1 / sqrt(n rescaled)`, T/sqrt(Hz) for `n` atoms.
    pub delta_b: f64,
}

/// Field sensitivity along a recorded run for `atoms` atoms.
pub fn sensitivity_report(samples: &[SerfSample], basis: &HyperfineBasis, readout: Readout, atoms: f64) -> Result<Vec<SensitivityPoint>> {
    let povm = match readout {
        Readout::Optimal => None,
        Readout::Sz => {
            let n = basis.dim();
            let up = CMatrix::identity(n, n) * c(0.5) + &basis.s_ops[2];
            Some(Povm::binary(&up)?)
        }
    };
    samples
        .iter()
        .map(|s| {
            let fisher = match &povm {
                None => qfi_matrix(&s.state.rho, &s.state.drho_db)?.0,
                Some(povm) => fisher_matrix(povm, &s.state.rho, &s.state.drho_db)?,
            };
            let rescaled = fisher / s.t;
            Ok(SensitivityPoint {
                t: s.t,
                fisher,
                rescaled,
                delta_b: 1.0 / (atoms * rescaled).sqrt(),
            })
        })
        .collect()
}

/// Relative reduction of the best `Delta B` by kicking:
/// `1 - min Delta B_kicked / min Delta B_ref`.
pub fn improvement(reference: &[SensitivityPoint], kicked: &[SensitivityPoint]) -> Result<f64> {
    let best = |pts: &[SensitivityPoint]| pts.iter().map(|p| p.delta_b).filter(|d| d.is_finite()).fold(f64::INFINITY, f64::min);
    let (r, k) = (best(reference), best(kicked));
    if !r.is_finite() || !k.is_finite() {
        return Err(Error::Empty("sensitivity series"));
    }
    Ok(1.0 - k / r)
}

#[cfg(test)]
mod tests {
    use super::super::{CesiumConstants, SerfParams};
    use super::*;
    use crate::linalg::{max_abs, trace};

    fn params() -> SerfParams {
        SerfParams::cesium_default(&CesiumConstants::bundled().unwrap())
    }

    fn schedule(periods: usize, kicked: bool) -> SerfSchedule {
        SerfSchedule {
            periods,
            dt_free: 1e-4,
            dt_pulse: 2e-7,
            record_every: periods,
            kicked,
            doppler_nodes: 15,
        }
    }

    #[test]
    fn coordinates_round_trip() {
        let basis = HyperfineBasis::cesium().unwrap();
        let coords = BlockCoords::new(&basis);
        assert_eq!(coords.len, 130);
        let mut x = &basis.f_ops[0] * &basis.f_ops[1] + &basis.f_ops[1] * &basis.f_ops[0] + &basis.f_ops[2];
        basis.drop_hyperfine_coherences(&mut x);
        let v = coords.to_coords(&x);
        assert!(max_abs(&(coords.to_matrix(&v) - &x)) < 1e-14);
        // Hilbert-Schmidt inner product is the dot product
        let y = &basis.f_ops[2] * &basis.f_ops[2];
        assert!((coords.to_coords(&y).dot(&v) - (y * x).trace().re).abs() < 1e-12);
        assert!((coords.trace_row().dot(&v) - trace(&coords.to_matrix(&v)).re).abs() < 1e-14);
    }

    #[test]
    fn thermal_state() {
        let basis = HyperfineBasis::cesium().unwrap();
        let rho = thermal_initial_state(&basis, 0.0).unwrap().rho;
        assert!(max_abs(&(rho - CMatrix::identity(16, 16) / c(16.0))) < 1e-15);
        let st = thermal_initial_state(&basis, 0.95).unwrap();
        assert!((trace(&st.rho).re - 1.0).abs() < 1e-14);
        let sz = (&basis.s_ops[2] * &st.rho).trace().re;
        assert!((sz - 0.475).abs() < 1e-12, "{sz}");
        assert!(thermal_initial_state(&basis, 1.0).is_err());
        // equals the uncoupled product exp(beta K_z) exp(beta S_z) / Z
        let beta = (1.95f64 / 0.05).ln();
        let mut prod = CMatrix::zeros(16, 16);
        for (is, ms) in [0.5, -0.5].into_iter().enumerate() {
            for ik in 0..8 {
                let mk = 3.5 - ik as f64;
                prod[(is * 8 + ik, is * 8 + ik)] = c((beta * (ms + mk)).exp());
            }
        }
        let t = basis.to_coupled.map(c);
        let coupled = &t * prod * t.transpose();
        let coupled = &coupled / trace(&coupled);
        assert!(max_abs(&(coupled - st.rho)) < 1e-14);
    }

    #[test]
    fn doppler_weights() {
        let g = doppler_nodes(1.0, 15).unwrap();
        assert_eq!(g.len(), 15);
        assert!((g.iter().map(|p| p.1).sum::<f64>() - 1.0).abs() < 1e-14);
        let var: f64 = g.iter().map(|(d, w)| w * d * d).sum();
        assert!((var - 1.0).abs() < 0.03, "{var}");
        assert_eq!(doppler_nodes(0.0, 15).unwrap(), vec![(0.0, 1.0)]);
    }

    #[test]
    fn larmor_precession_of_stretched_state() {
        let mut p = params();
        p.r_se = 0.0;
        p.r_sd = 0.0;
        p.b_field = 5e-10;
        let model = SerfModel::new(p).unwrap();
        let basis = &model.basis;
        let (off, _) = basis.block(1);
        let mut rho = CMatrix::zeros(16, 16);
        rho[(off, off)] = c(1.0);
        let sched = SerfSchedule {
            periods: 5,
            dt_free: 5e-7,
            dt_pulse: 1e-8,
            record_every: 1,
            kicked: false,
            doppler_nodes: 1,
        };
        let prop = SerfPropagator::new(&model, sched, Execution::Sequential).unwrap();
        let samples = prop
            .run(&SerfState {
                drho_db: CMatrix::zeros(16, 16),
                rho,
            })
            .unwrap();
        let omega = model.params.g_f[1] * model.params.mu_b * model.params.b_field;
        for s in &samples {
            let fz = (&basis.f_ops[2] * &s.state.rho).trace().re;
            let fx = (&basis.f_ops[0] * &s.state.rho).trace().re;
            assert!((fz - 4.0 * (omega * s.t).cos()).abs() < 1e-4, "{} {fz}", s.t);
            assert!((fx - 4.0 * (omega * s.t).sin()).abs() < 1e-4, "{} {fx}", s.t);
        }
    }

    #[test]
    fn unpolarised_relaxation_without_drive() {
        let mut p = params();
        p.b_field = 0.0;
        let model = SerfModel::new(p).unwrap();
        let init = thermal_initial_state(&model.basis, 0.95).unwrap();
        let mut sched = schedule(3000, false);
        sched.record_every = 100;
        let prop = SerfPropagator::new(&model, sched, Execution::Sequential).unwrap();
        let samples = prop.run(&init).unwrap();
        let mut last = 0.475;
        for s in &samples {
            let sz = (&model.basis.s_ops[2] * &s.state.rho).trace().re;
            assert!(sz < last && sz > 0.0);
            last = sz;
            assert!((trace(&s.state.rho).re - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn field_derivative_matches_finite_difference() {
        let p = params();
        let b0 = p.b_field;
        let run = |b: f64| {
            let mut q = p.clone();
            q.b_field = b;
            let model = SerfModel::new(q).unwrap();
            let prop = SerfPropagator::new(&model, schedule(50, true), Execution::Sequential).unwrap();
            let init = thermal_initial_state(&model.basis, 0.95).unwrap();
            prop.run(&init).unwrap().pop().unwrap().state
        };
        let exact = run(b0).drho_db;
        let central = |h: f64| (run(b0 + h).rho - run(b0 - h).rho) / c(2.0 * h);
        let rich = (central(0.5e-15) * c(4.0) - central(1e-15)) / c(3.0);
        let rel = max_abs(&(&rich - &exact)) / max_abs(&exact);
        assert!(rel < 1e-3, "{rel}");
        assert!(trace(&exact).norm() < 1e-6 * max_abs(&exact));
    }

    #[test]
    fn pulse_acts_as_rank2_kick_on_lower_level() {
        // a single strong pulse on an f=3 coherent state in the xy plane, no
        // collisions: the lower block evolves as exp(-i chi t F_x^2) up to
        // weak scattering
        let mut p = params();
        p.r_se = 0.0;
        p.r_sd = 0.0;
        p.b_field = 0.0;
        p.doppler_sigma = 0.0;
        p.i_kick = 1000.0;
        p.tau = 2.0 * p.pulse_len;
        let model = SerfModel::new(p).unwrap();
        let n3 = model.basis.block(0).1;
        let fz = model.basis.f_ops[2].view((0, 0), (n3, n3)).into_owned();
        let fx = model.basis.f_ops[0].view((0, 0), (n3, n3)).into_owned();
        let fy = model.basis.f_ops[1].view((0, 0), (n3, n3)).into_owned();
        let rot = hermitian_eigen(&((&fx + &fy) * c(std::f64::consts::FRAC_1_SQRT_2))).unwrap();
        let top = rot.vectors.column(n3 - 1).into_owned();
        let mut rho = CMatrix::zeros(16, 16);
        rho.view_mut((0, 0), (n3, n3)).copy_from(&(&top * top.adjoint()));
        let sched = SerfSchedule {
            periods: 1,
            dt_free: 1e-7,
            dt_pulse: 2e-10,
            record_every: 1,
            kicked: true,
            doppler_nodes: 1,
        };
        let prop = SerfPropagator::new(&model, sched, Execution::Sequential).unwrap();
        let out = prop
            .run(&SerfState {
                rho,
                drho_db: CMatrix::zeros(16, 16),
            })
            .unwrap()
            .pop()
            .unwrap();
        let k = effective_kick_strength(&model, 1).unwrap();
        let chi_t = k / 7.0;
        let eig = hermitian_eigen(&(&fx * &fx)).unwrap();
        let phases = DVector::from_iterator(n3, eig.values.iter().map(|&l| (C64::new(0.0, -chi_t * l)).exp()));
        let u = &eig.vectors * CMatrix::from_diagonal(&phases) * eig.vectors.adjoint();
        let want = &u * &top;
        let got = out.state.rho.view((0, 0), (n3, n3)).into_owned();
        let infidelity = 1.0 - (want.adjoint() * &got * &want)[(0, 0)].re;
        let untouched = 1.0 - (top.adjoint() * &got * &top)[(0, 0)].re;
        assert!(chi_t.abs() > 1e-2, "{chi_t}");
        assert!(infidelity < 0.05 * untouched, "{infidelity} {untouched}");
        // the twist tilts the spin out of the xy plane
        let after = (fz * &got).trace().re;
        let predicted = (want.adjoint() * model.basis.f_ops[2].view((0, 0), (n3, n3)) * &want)[(0, 0)].re;
        assert!(after.abs() > 1e-2 && (after - predicted).abs() < 0.05 * after.abs(), "{after} {predicted}");
    }

    #[test]
    fn step_halving_converges() {
        let model = SerfModel::new(params()).unwrap();
        let init = thermal_initial_state(&model.basis, 0.95).unwrap();
        let run = |dt_free: f64, dt_pulse: f64| {
            let mut s = schedule(200, true);
            s.dt_free = dt_free;
            s.dt_pulse = dt_pulse;
            let prop = SerfPropagator::new(&model, s, Execution::Sequential).unwrap();
            let samples = prop.run(&init).unwrap();
            sensitivity_report(&samples, &model.basis, Readout::Optimal, 2e10).unwrap()[0].fisher
        };
        let coarse = run(1e-4, 2e-7);
        let fine = run(5e-5, 1e-7);
        assert!(((coarse - fine) / fine).abs() < 1e-2, "{coarse} {fine}");
    }

    #[test]
    fn sz_readout_below_qfi() {
        let model = SerfModel::new(params()).unwrap();
        let init = thermal_initial_state(&model.basis, 0.95).unwrap();
        let mut s = schedule(300, true);
        s.record_every = 50;
        let samples = SerfPropagator::new(&model, s, Execution::Sequential).unwrap().run(&init).unwrap();
        let opt = sensitivity_report(&samples, &model.basis, Readout::Optimal, 2e10).unwrap();
        let sz = sensitivity_report(&samples, &model.basis, Readout::Sz, 2e10).unwrap();
        for (a, b) in opt.iter().zip(&sz) {
            assert!(b.fisher <= a.fisher * (1.0 + 1e-9));
            assert!(a.fisher > 0.0);
        }
    }
}
