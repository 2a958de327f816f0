//! Classical limit of the kicked top on the unit sphere.
//!
//! One period rotates about z by `alpha`, then twists about y by the
//! angle `k Y`. Lyapunov exponents come from the tangent map with
//! periodic renormalisation.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{map_collect, map_range, Execution};
use crate::floquet::KickedTopParams;
use crate::spin::PhaseAngles;

/// Point on the unit sphere.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassicalState {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl ClassicalState {
    pub const NORM_TOL: f64 = 1e-12;

    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        let n2 = x * x + y * y + z * z;
        if !((n2 - 1.0).abs() <= 1e-9) {
            return Err(Error::param("state", format!("|s|^2 = {n2}, expected 1")));
        }
        let n = n2.sqrt();
        Ok(Self { x: x / n, y: y / n, z: z / n })
    }

    pub fn from_angles(a: PhaseAngles) -> Self {
        let (st, ct) = a.theta.sin_cos();
        let (sp, cp) = a.phi.sin_cos();
        Self { x: st * cp, y: st * sp, z: ct }
    }

    /// Phase-space coordinates `(Z, phi)`.
    pub fn from_z_phi(z: f64, phi: f64) -> Result<Self> {
        Ok(Self::from_angles(PhaseAngles::from_z_phi(z, phi)?))
    }

    /// Azimuth in `[0, 2pi)`.
    pub fn phi(&self) -> f64 {
        self.y.atan2(self.x).rem_euclid(2.0 * PI)
    }

    pub fn theta(&self) -> f64 {
        self.z.clamp(-1.0, 1.0).acos()
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }
}

/// Tangent vector attached to a point on the sphere.
pub type Tangent = [f64; 3];

fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn norm3(a: &[f64; 3]) -> f64 {
    dot(a, a).sqrt()
}

fn cross(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Intermediate quantities of one period, shared by the map and its Jacobian.
struct StepParts {
    rotated: [f64; 3],
    angle: f64,
    out: ClassicalState,
}

fn step_parts(s: &ClassicalState, params: KickedTopParams) -> StepParts {
    let (sa, ca) = params.alpha.sin_cos();
    let x1 = s.x * ca - s.y * sa;
    let y1 = s.x * sa + s.y * ca;
    let z1 = s.z;
    let angle = params.k * y1;
    let (sb, cb) = angle.sin_cos();
    let x2 = x1 * cb + z1 * sb;
    let z2 = -x1 * sb + z1 * cb;
    // renormalise so rounding does not accumulate over long runs
    let n = (x2 * x2 + y1 * y1 + z2 * z2).sqrt();
    StepParts {
        rotated: [x1, y1, z1],
        angle,
        out: ClassicalState { x: x2 / n, y: y1 / n, z: z2 / n },
    }
}

pub fn classical_step(s: &ClassicalState, params: KickedTopParams) -> ClassicalState {
    step_parts(s, params).out
}

/// Advances a point and a tangent vector by one period.
///
/// The image of the tangent vector is projected back onto the tangent
/// plane at the new point.
pub fn tangent_step(s: &ClassicalState, ds: &Tangent, params: KickedTopParams) -> (ClassicalState, Tangent) {
    let parts = step_parts(s, params);
    let (sa, ca) = params.alpha.sin_cos();
    let dx1 = ds[0] * ca - ds[1] * sa;
    let dy1 = ds[0] * sa + ds[1] * ca;
    let dz1 = ds[2];
    let [x1, _, z1] = parts.rotated;
    let (sb, cb) = parts.angle.sin_cos();
    let x2 = x1 * cb + z1 * sb;
    let z2 = -x1 * sb + z1 * cb;
    let db = params.k * dy1;
    let dx2 = dx1 * cb + dz1 * sb + z2 * db;
    let dz2 = -dx1 * sb + dz1 * cb - x2 * db;
    let mut out = [dx2, dy1, dz2];
    let p = parts.out.as_array();
    let along = dot(&out, &p);
    for (o, q) in out.iter_mut().zip(&p) {
        *o -= along * q;
    }
    (parts.out, out)
}

/// Settings for the finite-time Lyapunov estimate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LyapunovConfig {
    pub n_samples: usize,
    /// Area of the geodesic sampling disk on the unit sphere.
    pub disk_area: f64,
    pub n_steps: usize,
    pub renorm_every: usize,
    pub seed: u64,
}

impl LyapunovConfig {
    /// Defaults for spin `j`: 100 samples in a disk of area `1/j`.
    pub fn for_spin(j: f64) -> Self {
        Self {
            n_samples: 100,
            disk_area: 1.0 / j,
            n_steps: 10_000,
            renorm_every: 10,
            seed: 0x5eed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_samples < 1 {
            return Err(Error::param("n_samples", "must be >= 1"));
        }
        if self.n_steps < 100 {
            return Err(Error::param("n_steps", "must be >= 100"));
        }
        if self.renorm_every < 1 {
            return Err(Error::param("renorm_every", "must be >= 1"));
        }
        if !(self.disk_area > 0.0 && self.disk_area <= 4.0 * PI) {
            return Err(Error::param("disk_area", format!("{} outside (0, 4pi]", self.disk_area)));
        }
        Ok(())
    }
}

impl Default for LyapunovConfig {
    fn default() -> Self {
        Self::for_spin(100.0)
    }
}

/// Per-sample exponents together with their mean and standard error.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LyapunovEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub samples: Vec<f64>,
}

/// Orthonormal frame `(e1, e2)` of the tangent plane at `p`.
fn tangent_frame(p: &[f64; 3]) -> ([f64; 3], [f64; 3]) {
    // pick the axis least aligned with p
    let helper = if p[0].abs() < 0.6 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let mut e1 = cross(&helper, p);
    let n = norm3(&e1);
    e1.iter_mut().for_each(|v| *v /= n);
    let e2 = cross(p, &e1);
    (e1, e2)
}

/// Uniform point in the geodesic cap of the given area around `center`.
pub fn sample_disk<R: Rng>(center: &ClassicalState, area: f64, rng: &mut R) -> ClassicalState {
    let cos_r = (1.0 - area / (2.0 * PI)).max(-1.0);
    let cos_rho = 1.0 - rng.random::<f64>() * (1.0 - cos_r);
    let sin_rho = (1.0 - cos_rho * cos_rho).max(0.0).sqrt();
    let psi = 2.0 * PI * rng.random::<f64>();
    let p = center.as_array();
    let (e1, e2) = tangent_frame(&p);
    let (sp, cp) = psi.sin_cos();
    let v: Vec<f64> = (0..3)
        .map(|i| cos_rho * p[i] + sin_rho * (cp * e1[i] + sp * e2[i]))
        .collect();
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    ClassicalState { x: v[0] / n, y: v[1] / n, z: v[2] / n }
}

fn sample_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Exponent of a single trajectory started at `s` with tangent `ds`.
pub fn trajectory_exponent(
    s: ClassicalState,
    ds: Tangent,
    params: KickedTopParams,
    n_steps: usize,
    renorm_every: usize,
) -> f64 {
    let mut s = s;
    let n0 = norm3(&ds);
    let mut ds = ds.map(|v| v / n0);
    let mut log_growth = 0.0;
    for step in 1..=n_steps {
        let (s1, ds1) = tangent_step(&s, &ds, params);
        s = s1;
        ds = ds1;
        if step % renorm_every == 0 || step == n_steps {
            let n = norm3(&ds);
            log_growth += n.ln();
            ds.iter_mut().for_each(|v| *v /= n);
        }
    }
    log_growth / n_steps as f64
}

/// Full statistics of the disk-averaged Lyapunov exponent.
pub fn lyapunov_estimate(
    center: &ClassicalState,
    params: KickedTopParams,
    cfg: &LyapunovConfig,
    exec: Execution,
) -> Result<LyapunovEstimate> {
    cfg.validate()?;
    let samples = map_range(exec, cfg.n_samples, |i| {
        let mut rng = sample_rng(cfg.seed, i);
        let s = sample_disk(center, cfg.disk_area, &mut rng);
        let (e1, e2) = tangent_frame(&s.as_array());
        let a = 2.0 * PI * rng.random::<f64>();
        let ds = [0, 1, 2].map(|k| a.cos() * e1[k] + a.sin() * e2[k]);
        trajectory_exponent(s, ds, params, cfg.n_steps, cfg.renorm_every)
    });
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = if samples.len() > 1 {
        samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    Ok(LyapunovEstimate {
        mean,
        std_error: (var / n).sqrt(),
        samples,
    })
}

/// Mean Lyapunov exponent over the sampling disk around `center`.
pub fn lyapunov_exponent(center: &ClassicalState, params: KickedTopParams, cfg: &LyapunovConfig) -> Result<f64> {
    Ok(lyapunov_estimate(center, params, cfg, Execution::default())?.mean)
}

/// One cell of a Lyapunov heat map.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LyapunovCell {
    pub phi: f64,
    pub z: f64,
    pub lyapunov: f64,
    pub std_error: f64,
}

/// Lyapunov exponents on the product grid `phis x zs`.
pub fn lyapunov_map(
    phis: &[f64],
    zs: &[f64],
    params: KickedTopParams,
    cfg: &LyapunovConfig,
    exec: Execution,
) -> Result<Vec<LyapunovCell>> {
    cfg.validate()?;
    let points: Vec<(f64, f64)> = zs.iter().flat_map(|&z| phis.iter().map(move |&p| (p, z))).collect();
    // grid points run in parallel, samples within a point sequentially
    map_collect(exec, &points, |&(phi, z)| {
        let center = ClassicalState::from_z_phi(z, phi)?;
        let est = lyapunov_estimate(&center, params, cfg, Execution::Sequential)?;
        Ok(LyapunovCell {
            phi,
            z,
            lyapunov: est.mean,
            std_error: est.std_error,
        })
    })
    .into_iter()
    .collect()
}

/// Sequence of `(Z, phi)` points, including the seed.
pub type Trajectory = Vec<(f64, f64)>;

pub fn phase_portrait(params: KickedTopParams, seeds: &[ClassicalState], n_steps: usize) -> Vec<Trajectory> {
    seeds
        .iter()
        .map(|seed| {
            let mut s = *seed;
            let mut out = Vec::with_capacity(n_steps + 1);
            out.push((s.z, s.phi()));
            for _ in 0..n_steps {
                s = classical_step(&s, params);
                out.push((s.z, s.phi()));
            }
            out
        })
        .collect()
}
