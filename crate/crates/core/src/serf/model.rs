//! Ground-state cesium spin (`K = 7/2`, `s = 1/2`) in the coupled `|f m>`
//! basis, with collisional relaxation and an off-resonant D1 light pulse.
//! Rates are angular frequencies with `hbar = 1`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::angular::{clebsch_gordan, wigner_6j};
use super::constants::CesiumConstants;
use crate::error::{Error, Result};
use crate::linalg::{c, CMatrix, C64, I};
use crate::spin::{build_ops, SpinQuantum};

/// `o_{jf}^{j'f'}` for doubled arguments.
pub fn o_coefficient(two_j: i32, two_f: i32, two_jp: i32, two_fp: i32, two_k: i32) -> Result<f64> {
    let exponent = two_fp + 2 + two_jp + two_k;
    if exponent % 2 != 0 {
        return Err(Error::param("o_coefficient", "f' + 1 + j' + K must be an integer"));
    }
    let sign = if (exponent / 2) % 2 == 0 { 1.0 } else { -1.0 };
    let six_j = wigner_6j(two_fp, two_k, two_jp, two_j, 2, two_f)?;
    Ok(sign * (f64::from((two_jp + 1) * (two_f + 1))).sqrt() * six_j)
}

/// Rank-2 light-shift coefficient `C^(2)_{j'f'f}` for the D1 line.
pub fn c2_coefficient(two_jp: i32, two_fp: i32, two_f: i32, two_k: i32) -> Result<f64> {
    if two_f % 2 != 0 || two_fp % 2 != 0 || two_f < 2 {
        return Err(Error::param("c2_coefficient", "f, f' must be integers with f >= 1"));
    }
    let (f, fp) = (two_f / 2, two_fp / 2);
    let sign = if (3 * f - fp).rem_euclid(2) == 0 { 1.0 } else { -1.0 };
    let ff = f64::from(f);
    let norm = (ff * (ff + 1.0) * (2.0 * ff + 1.0) * (2.0 * ff - 1.0) * (2.0 * ff + 3.0)).sqrt();
    let six_j = wigner_6j(two_f, 2, two_fp, 2, two_f, 4)?;
    let o = o_coefficient(1, two_f, two_jp, two_fp, two_k)?;
    Ok(sign * 30f64.sqrt() * f64::from(2 * fp + 1) / norm * six_j * o * o)
}

/// The two ground hyperfine levels, `f = K - 1/2` and `f = K + 1/2`, with
/// spin operators in the coupled basis. States are ordered block by block,
/// lower `f` first, `m` descending inside each block.
#[derive(Clone, Debug)]
pub struct HyperfineBasis {
    pub two_k: i32,
    /// `(2f, 2m)` per basis state.
    pub levels: Vec<(i32, i32)>,
    /// Rows: coupled states; columns: `|m_s> (x) |m_K>`, `m_s` major.
    pub to_coupled: DMatrix<f64>,
    pub s_ops: [CMatrix; 3],
    pub k_ops: [CMatrix; 3],
    pub f_ops: [CMatrix; 3],
}

impl HyperfineBasis {
    pub fn new(two_k: i32) -> Result<Self> {
        if two_k < 1 {
            return Err(Error::param("nuclear spin", "must be positive"));
        }
        let nk = (two_k + 1) as usize;
        let dim = 2 * nk;
        let mut levels = Vec::with_capacity(dim);
        for two_f in [two_k - 1, two_k + 1] {
            for two_m in (-two_f..=two_f).rev().step_by(2) {
                levels.push((two_f, two_m));
            }
        }
        let mut to_coupled = DMatrix::zeros(dim, dim);
        for (row, &(two_f, two_m)) in levels.iter().enumerate() {
            for (is, two_ms) in [1, -1].into_iter().enumerate() {
                for ik in 0..nk {
                    let two_mk = two_k - 2 * ik as i32;
                    to_coupled[(row, is * nk + ik)] = clebsch_gordan(two_k, two_mk, 1, two_ms, two_f, two_m)?;
                }
            }
        }
        let electron = build_ops(SpinQuantum::new(1)?);
        let nuclear = build_ops(SpinQuantum::new(two_k as u32)?);
        let id_s = CMatrix::identity(2, 2);
        let id_k = CMatrix::identity(nk, nk);
        let t = to_coupled.map(c);
        let couple = |x: CMatrix| -> CMatrix { &t * x * t.transpose() };
        let s_ops = [&electron.jx, &electron.jy, &electron.jz].map(|op| couple(op.kronecker(&id_k)));
        let k_ops = [&nuclear.jx, &nuclear.jy, &nuclear.jz].map(|op| couple(id_s.kronecker(op)));
        let f_ops = [0, 1, 2].map(|i| &s_ops[i] + &k_ops[i]);
        Ok(Self {
            two_k,
            levels,
            to_coupled,
            s_ops,
            k_ops,
            f_ops,
        })
    }

    pub fn cesium() -> Result<Self> {
        Self::new(7)
    }

    pub fn dim(&self) -> usize {
        self.levels.len()
    }

    /// `(offset, size)` of the lower (0) or upper (1) hyperfine block.
    pub fn block(&self, index: usize) -> (usize, usize) {
        let lower = self.two_k as usize;
        if index == 0 {
            (0, lower)
        } else {
            (lower, lower + 2)
        }
    }

    /// Doubled `f` of a block.
    pub fn two_f(&self, index: usize) -> i32 {
        self.two_k - 1 + 2 * index as i32
    }

    /// Zeroes the coherences between the two hyperfine levels.
    pub fn drop_hyperfine_coherences(&self, x: &mut CMatrix) {
        let (_, lower) = self.block(0);
        let n = self.dim();
        x.view_mut((0, lower), (lower, n - lower)).fill(C64::new(0.0, 0.0));
        x.view_mut((lower, 0), (n - lower, lower)).fill(C64::new(0.0, 0.0));
    }

    fn sub(&self, x: &CMatrix, a: usize, b: usize) -> CMatrix {
        let (oa, na) = self.block(a);
        let (ob, nb) = self.block(b);
        x.view((oa, ob), (na, nb)).into_owned()
    }

    fn add_sub(&self, x: &mut CMatrix, a: usize, b: usize, block: &CMatrix) {
        let (oa, na) = self.block(a);
        let (ob, nb) = self.block(b);
        let mut view = x.view_mut((oa, ob), (na, nb));
        view += block;
    }
}

/// Spherical unit vectors `e_q`, `q = +1, 0, -1`.
fn spherical(q: i32) -> [C64; 3] {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    match q {
        1 => [c(-r), C64::new(0.0, -r), c(0.0)],
        0 => [c(0.0), c(0.0), c(1.0)],
        _ => [c(r), C64::new(0.0, -r), c(0.0)],
    }
}

/// Physical and control parameters of the kicked magnetometer. Rates in
/// rad/s or 1/s, field in tesla, intensities in W/m^2.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SerfParams {
    pub b_field: f64,
    pub r_se: f64,
    pub r_sd: f64,
    pub a_hf: f64,
    pub gamma_nat: f64,
    pub i_kick: f64,
    pub i_sat: f64,
    /// `detunings[a][b]`: laser detuning from ground block `a` to excited block `b`.
    pub detunings: [[f64; 2]; 2],
    /// Real (linear) polarisation, unit length.
    pub polarization: [f64; 3],
    /// Lande factors of the lower and upper ground level.
    pub g_f: [f64; 2],
    pub mu_b: f64,
    /// Atoms per cm^3.
    pub density: f64,
    pub temperature: f64,
    pub tau: f64,
    pub pulse_len: f64,
    /// Initial polarisation.
    pub q: f64,
    /// Doppler standard deviation of the detuning, rad/s.
    pub doppler_sigma: f64,
}

impl SerfParams {
    /// Room-temperature cesium vapour with an x-polarised kick laser tuned
    /// halfway between the two excited hyperfine levels.
    pub fn cesium_default(constants: &CesiumConstants) -> Self {
        let half = constants.excited_splitting / 2.0;
        // lower level: f'=3 line below the laser, f'=4 line above it
        let lower = [half, -half];
        let upper = lower.map(|d| d + constants.ground_splitting);
        let temperature = 294.13;
        Self {
            b_field: 40e-15,
            r_se: 12.0,
            r_sd: 0.12,
            a_hf: constants.a_hf,
            gamma_nat: constants.gamma_nat,
            i_kick: 1.0,
            i_sat: constants.saturation_intensity,
            detunings: [lower, upper],
            polarization: [1.0, 0.0, 0.0],
            g_f: [constants.g_f(constants.nuclear_spin - 0.5), constants.g_f(constants.nuclear_spin + 0.5)],
            mu_b: constants.mu_b,
            density: 2e10,
            temperature,
            tau: 1e-3,
            pulse_len: 2e-6,
            q: 0.95,
            doppler_sigma: constants.doppler_sigma(temperature),
        }
    }

    /// Rabi frequency `gamma sqrt(I / 2 I_sat)`.
    pub fn rabi(&self) -> f64 {
        self.gamma_nat * (self.i_kick / (2.0 * self.i_sat)).sqrt()
    }

    /// Larmor frequency of the faster of the two levels.
    pub fn larmor(&self) -> f64 {
        self.g_f.iter().map(|g| g.abs()).fold(0.0, f64::max) * self.mu_b * self.b_field.abs()
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.b_field,
            self.r_se,
            self.r_sd,
            self.a_hf,
            self.gamma_nat,
            self.i_kick,
            self.i_sat,
            self.mu_b,
            self.density,
            self.temperature,
            self.tau,
            self.pulse_len,
            self.q,
            self.doppler_sigma,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("serf", "non-finite parameter"));
        }
        for (name, v) in [("r_se", self.r_se), ("r_sd", self.r_sd), ("gamma_nat", self.gamma_nat), ("i_kick", self.i_kick), ("doppler_sigma", self.doppler_sigma)] {
            if v < 0.0 {
                return Err(Error::param(name, format!("{v} must be >= 0")));
            }
        }
        if !(self.i_sat > 0.0) || !(self.tau > 0.0) || !(self.temperature > 0.0) || !(self.density > 0.0) {
            return Err(Error::param("serf", "i_sat, tau, temperature and density must be positive"));
        }
        let norm = self.polarization.iter().map(|v| v * v).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::param("polarization", format!("norm {norm} is not 1")));
        }
        if !(self.pulse_len >= 0.0 && self.pulse_len < self.tau) {
            return Err(Error::param("pulse_len", "must lie in [0, tau)"));
        }
        if !(0.0..1.0).contains(&self.q) {
            return Err(Error::param("q", format!("{} outside [0, 1)", self.q)));
        }
        if self.i_kick > 0.0 && self.pulse_len > 0.0 {
            let closest = self.detunings.iter().flatten().map(|d| d.abs()).fold(f64::INFINITY, f64::min);
            if closest - 3.0 * self.doppler_sigma < 10.0 * self.rabi() {
                return Err(Error::param("detunings", "laser too close to resonance for the far-detuned model"));
            }
        }
        Ok(())
    }

    /// The spin-exchange rate must dominate the Larmor frequency.
    pub fn check_serf_regime(&self) -> Result<()> {
        if self.larmor() > 0.1 * self.r_se {
            return Err(Error::param(
                "b_field",
                format!("Larmor frequency {:e} rad/s is not small against R_se = {}", self.larmor(), self.r_se),
            ));
        }
        Ok(())
    }
}

/// Operators of the kicked-magnetometer master equation.
#[derive(Clone, Debug)]
pub struct SerfModel {
    pub basis: HyperfineBasis,
    pub params: SerfParams,
    /// `o` coefficients, `[ground block][excited block]`.
    pub o: [[f64; 2]; 2],
    /// `q`-components of the dipole raising operator, excited block `b` from
    /// ground block `a`: `raise[q][a][b]`, `q` index 0, 1, 2 for `q = +1, 0, -1`.
    raise: Vec<Vec<Vec<CMatrix>>>,
    /// `epsilon . D^dagger` from ground block `a` to excited block `b`.
    drive: Vec<Vec<CMatrix>>,
    k_dot_s: CMatrix,
}

impl SerfModel {
    pub fn new(params: SerfParams) -> Result<Self> {
        params.validate()?;
        let basis = HyperfineBasis::cesium()?;
        let two_k = basis.two_k;
        let mut o = [[0.0; 2]; 2];
        let mut raise = vec![vec![Vec::new(); 2]; 3];
        for a in 0..2 {
            let two_f = basis.two_f(a);
            for b in 0..2 {
                // excited 6P_{1/2} levels share the ground-level f values
                let two_fp = basis.two_f(b);
                o[a][b] = o_coefficient(1, two_f, 1, two_fp, two_k)?;
                for (qi, q) in [1, 0, -1].into_iter().enumerate() {
                    let mut r = CMatrix::zeros((two_fp + 1) as usize, (two_f + 1) as usize);
                    for (row, two_mp) in (-two_fp..=two_fp).rev().step_by(2).enumerate() {
                        for (col, two_m) in (-two_f..=two_f).rev().step_by(2).enumerate() {
                            r[(row, col)] = c(o[a][b] * clebsch_gordan(two_f, two_m, 2, 2 * q, two_fp, two_mp)?);
                        }
                    }
                    raise[qi][a].push(r);
                }
            }
        }
        let eps = params.polarization;
        let drive = (0..2)
            .map(|a| {
                (0..2)
                    .map(|b| {
                        let mut m = CMatrix::zeros(raise[0][a][b].nrows(), raise[0][a][b].ncols());
                        for (qi, q) in [1, 0, -1].into_iter().enumerate() {
                            let e = spherical(q);
                            let w: C64 = (0..3).map(|k| e[k].conj() * eps[k]).sum();
                            m += &raise[qi][a][b] * w;
                        }
                        m
                    })
                    .collect()
            })
            .collect();
        let k_dot_s = (0..3).map(|i| &basis.k_ops[i] * &basis.s_ops[i]).fold(CMatrix::zeros(16, 16), |acc, x| acc + x);
        Ok(Self {
            basis,
            params,
            o,
            raise,
            drive,
            k_dot_s,
        })
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    /// `(epsilon* . D)(epsilon . D^dagger)` on ground block `a` via excited block `b`.
    pub fn light_shift_operator(&self, a: usize, b: usize) -> CMatrix {
        self.drive[a][b].adjoint() * &self.drive[a][b]
    }

    /// Larmor Hamiltonian per unit field, `sum_f g_f mu_B F_y`.
    pub fn larmor_generator(&self) -> CMatrix {
        let mut h = CMatrix::zeros(16, 16);
        for a in 0..2 {
            let (off, n) = self.basis.block(a);
            let fy = self.basis.f_ops[1].view((off, off), (n, n)).into_owned();
            self.basis.add_sub(&mut h, a, a, &(fy * c(self.params.g_f[a] * self.params.mu_b)));
        }
        h
    }

    /// Effective Hamiltonian, non-Hermitian when the laser is on. `shift`
    /// offsets every detuning (Doppler shift).
    pub fn effective_hamiltonian(&self, laser_on: bool, shift: f64) -> CMatrix {
        let mut h = self.larmor_generator() * c(self.params.b_field);
        if laser_on {
            let p = &self.params;
            let omega2 = p.rabi().powi(2);
            for a in 0..2 {
                for b in 0..2 {
                    let coeff = C64::new(omega2 / 4.0, 0.0) / C64::new(p.detunings[a][b] + shift, p.gamma_nat / 2.0);
                    self.basis.add_sub(&mut h, a, a, &(self.light_shift_operator(a, b) * coeff));
                }
            }
        }
        h
    }

    /// Jump operator `W_q^{f_b f_a}` (ground block `a` to ground block `b`).
    pub fn jump_operator(&self, qi: usize, fb: usize, fa: usize, shift: f64) -> CMatrix {
        let p = &self.params;
        let half_rabi = p.rabi() / 2.0;
        let mut w = CMatrix::zeros(self.basis.block(fb).1, self.basis.block(fa).1);
        for e in 0..2 {
            let coeff = C64::new(half_rabi, 0.0) / C64::new(p.detunings[fa][e] + shift, p.gamma_nat / 2.0);
            w += self.raise[qi][fb][e].adjoint() * &self.drive[fa][e] * coeff;
        }
        w
    }

    /// Nuclear part `rho/4 + S.rho S`.
    pub fn nuclear_part(&self, rho: &CMatrix) -> CMatrix {
        let s = &self.basis.s_ops;
        rho * c(0.25) + (0..3).map(|i| &s[i] * rho * &s[i]).fold(CMatrix::zeros(16, 16), |acc, x| acc + x)
    }

    /// `tr(S_i rho)`.
    pub fn electron_spin(&self, rho: &CMatrix) -> [C64; 3] {
        [0, 1, 2].map(|i| (&self.basis.s_ops[i] * rho).trace())
    }

    /// Collisional part: spin exchange and spin destruction.
    pub fn relaxation_rhs(&self, rho: &CMatrix) -> CMatrix {
        let p = &self.params;
        let phi = self.nuclear_part(rho);
        let s = self.electron_spin(rho);
        let mut factor = CMatrix::identity(16, 16);
        for i in 0..3 {
            factor += &self.basis.s_ops[i] * (s[i] * 4.0);
        }
        (&phi * factor - rho) * c(p.r_se) + (phi - rho) * c(p.r_sd)
    }

    /// Laser-dependent part of the right-hand side at one Doppler shift:
    /// the non-Hermitian light shift and the repopulating jumps.
    pub fn laser_rhs(&self, rho: &CMatrix, shift: f64) -> CMatrix {
        let p = &self.params;
        let mut out = CMatrix::zeros(16, 16);
        let omega2 = p.rabi().powi(2);
        let mut h = CMatrix::zeros(16, 16);
        for a in 0..2 {
            for b in 0..2 {
                let coeff = C64::new(omega2 / 4.0, 0.0) / C64::new(p.detunings[a][b] + shift, p.gamma_nat / 2.0);
                self.basis.add_sub(&mut h, a, a, &(self.light_shift_operator(a, b) * coeff));
            }
        }
        out -= (&h * rho - rho * h.adjoint()) * I;
        let blocks = [[self.basis.sub(rho, 0, 0), self.basis.sub(rho, 0, 1)], [self.basis.sub(rho, 1, 0), self.basis.sub(rho, 1, 1)]];
        for qi in 0..3 {
            let w: Vec<Vec<CMatrix>> = (0..2).map(|fb| (0..2).map(|fa| self.jump_operator(qi, fb, fa, shift)).collect()).collect();
            for fb in 0..2 {
                for fa in 0..2 {
                    let term = &w[fb][fa] * &blocks[fa][fa] * w[fb][fa].adjoint();
                    self.basis.add_sub(&mut out, fb, fb, &(term * c(p.gamma_nat)));
                }
            }
            for (f1, f2) in [(0, 1), (1, 0)] {
                let term = &w[f2][f2] * &blocks[f2][f1] * w[f1][f1].adjoint();
                self.basis.add_sub(&mut out, f2, f1, &(term * c(p.gamma_nat)));
            }
        }
        out
    }

    /// Full right-hand side of the master equation at Doppler shift `shift`.
    pub fn master_rhs(&self, rho: &CMatrix, laser_on: bool, shift: f64) -> CMatrix {
        let h_lar = self.larmor_generator() * c(self.params.b_field);
        let mut out = self.relaxation_rhs(rho);
        out -= (&self.k_dot_s * rho - rho * &self.k_dot_s) * (I * self.params.a_hf);
        out -= (&h_lar * rho - rho * &h_lar) * I;
        if laser_on {
            out += self.laser_rhs(rho, shift);
        }
        out
    }

    /// Real part of the light-shift coefficient multiplying `F_x^2` on the
    /// lower level, averaged over `shifts` with `weights`.
    pub fn rank2_shift_rate(&self, shifts: &[f64], weights: &[f64]) -> Result<f64> {
        let p = &self.params;
        let omega2 = p.rabi().powi(2);
        let mut rate = 0.0;
        for b in 0..2 {
            let c2 = c2_coefficient(1, self.basis.two_f(b), self.basis.two_f(0), self.basis.two_k)?;
            for (&d, &w) in shifts.iter().zip(weights) {
                let z = C64::new(omega2 * c2 / 4.0, 0.0) / C64::new(p.detunings[0][b] + d, p.gamma_nat / 2.0);
                rate += w * z.re;
            }
        }
        Ok(rate)
    }
}
