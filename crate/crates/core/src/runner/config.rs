use std::f64::consts::FRAC_PI_2;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::classical::LyapunovConfig;
use crate::dissipative::{StateSearch, ThetaSearch};
use crate::error::{Error, Result};
use crate::estimation::KJitter;
use crate::serf::{CesiumConstants, Readout, SerfParams, SerfSchedule};
use crate::spin::SpinQuantum;

use super::grid::Grid;

fn half_pi() -> f64 {
    FRAC_PI_2
}

fn default_atoms() -> f64 {
    2e10
}

fn default_readouts() -> Vec<Readout> {
    vec![Readout::Optimal, Readout::Sz]
}

/// Pure kicked-top QFI for every `(j, k)` at the listed times.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QfiScaling {
    pub j: Grid,
    pub k: Grid,
    #[serde(default = "half_pi")]
    pub alpha: f64,
    #[serde(default = "half_pi")]
    pub theta: f64,
    #[serde(default = "half_pi")]
    pub phi: f64,
    pub t: Vec<usize>,
}

/// Classical Lyapunov sampling settings; the disk area defaults to `1/j`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LyapunovSettings {
    pub samples: usize,
    pub steps: usize,
    #[serde(default = "default_renorm")]
    pub renorm_every: usize,
    #[serde(default)]
    pub disk_area: Option<f64>,
}

fn default_renorm() -> usize {
    10
}

impl LyapunovSettings {
    pub fn config(&self, j: f64, seed: u64) -> LyapunovConfig {
        LyapunovConfig {
            n_samples: self.samples,
            disk_area: self.disk_area.unwrap_or(1.0 / j),
            n_steps: self.steps,
            renorm_every: self.renorm_every,
            seed,
        }
    }
}

/// QFI, gain and (optionally) the classical Lyapunov exponent on a
/// `(phi, Z)` grid of coherent states.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Heatmap {
    pub j: f64,
    pub k: f64,
    #[serde(default = "half_pi")]
    pub alpha: f64,
    pub t: usize,
    pub phi: Grid,
    pub z: Grid,
    #[serde(default)]
    pub lyapunov: Option<LyapunovSettings>,
}

/// Classical Lyapunov exponents on a `(phi, Z)` grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LyapunovMapSpec {
    pub k: f64,
    #[serde(default = "half_pi")]
    pub alpha: f64,
    /// Sets the default sampling-disk area `1/j`.
    pub j: f64,
    pub phi: Grid,
    pub z: Grid,
    pub sampling: LyapunovSettings,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanPoint {
    pub j: f64,
    pub gamma: f64,
}

/// Damped top against the damped kicked top at each `(j, gamma)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DissipativeScan {
    pub k: f64,
    #[serde(default = "half_pi")]
    pub alpha: f64,
    pub scans: Vec<ScanPoint>,
    /// Longest series, in kicks.
    pub horizon: usize,
    /// Initial state of the fixed-state series used for the QFI peak time.
    #[serde(default = "half_pi")]
    pub theta: f64,
    #[serde(default = "half_pi")]
    pub phi: f64,
    /// Also optimise both protocols over initial states for `max QFI/t`.
    #[serde(default)]
    pub optimize: bool,
    #[serde(default)]
    pub state_search: Option<StateSearch>,
    #[serde(default)]
    pub theta_search: Option<ThetaSearch>,
}

/// Fisher information of a projective `J_y` readout against `k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JyFisher {
    pub j: f64,
    #[serde(default = "half_pi")]
    pub alpha: f64,
    #[serde(default = "half_pi")]
    pub theta: f64,
    #[serde(default = "half_pi")]
    pub phi: f64,
    pub t: usize,
    pub gamma: Grid,
    pub k: Grid,
    #[serde(default)]
    pub jitter: Option<KJitter>,
}

/// Kicked and unkicked SERF runs. `params` overrides individual fields of
/// the cesium defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SerfRun {
    #[serde(default)]
    pub params: serde_json::Map<String, serde_json::Value>,
    pub schedule: SerfSchedule,
    #[serde(default = "default_readouts")]
    pub readouts: Vec<Readout>,
    #[serde(default = "default_atoms")]
    pub atoms: f64,
}

impl SerfRun {
    pub fn resolved_params(&self) -> Result<SerfParams> {
        let constants = CesiumConstants::bundled()?;
        let mut base = serde_json::to_value(SerfParams::cesium_default(&constants))?;
        let fields = base.as_object_mut().expect("struct serialises to an object");
        for (key, value) in &self.params {
            if !fields.contains_key(key) {
                return Err(Error::Config(format!("serf: unknown parameter `{key}`")));
            }
            fields.insert(key.clone(), value.clone());
        }
        serde_json::from_value(base).map_err(|e| Error::Config(format!("serf parameters: {e}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Experiment {
    QfiScaling(QfiScaling),
    Heatmap(Heatmap),
    LyapunovMap(LyapunovMapSpec),
    DissipativeScan(DissipativeScan),
    JyFisher(JyFisher),
    Serf(SerfRun),
}

impl Experiment {
    pub fn kind(&self) -> &'static str {
        match self {
            Experiment::QfiScaling(_) => "qfi-scaling",
            Experiment::Heatmap(_) => "heatmap",
            Experiment::LyapunovMap(_) => "lyapunov-map",
            Experiment::DissipativeScan(_) => "dissipative-scan",
            Experiment::JyFisher(_) => "jy-fisher",
            Experiment::Serf(_) => "serf",
        }
    }
}

/// Where a preset came from and what was scaled down.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PresetInfo {
    pub name: String,
    pub description: String,
    pub full_scale: bool,
    #[serde(default)]
    pub reduced: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(flatten)]
    pub experiment: Experiment,
    /// CSV path; the sidecar and checkpoint sit next to it.
    pub output: PathBuf,
    #[serde(default)]
    pub seed: u64,
    /// 0 uses every core.
    #[serde(default)]
    pub workers: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<PresetInfo>,
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn check_spin(j: f64, name: &str) -> Result<()> {
    SpinQuantum::from_j(j).map(|_| ()).map_err(|e| config_err(format!("{name}: {e}")))
}

fn check_finite(pairs: &[(&str, f64)]) -> Result<()> {
    for (name, v) in pairs {
        if !v.is_finite() {
            return Err(config_err(format!("`{name}` must be finite")));
        }
    }
    Ok(())
}

fn check_gamma(g: f64) -> Result<()> {
    if !(g >= 0.0 && g.is_finite()) {
        return Err(config_err(format!("gamma {g} must be finite and >= 0")));
    }
    Ok(())
}

fn check_lyapunov(s: &LyapunovSettings, j: f64) -> Result<()> {
    s.config(j, 0).validate().map_err(|e| config_err(format!("lyapunov: {e}")))
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| config_err(format!("cannot parse config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Checks every grid and kind-specific key without computing anything.
    pub fn validate(&self) -> Result<()> {
        if self.output.as_os_str().is_empty() {
            return Err(config_err("`output` is empty"));
        }
        match &self.experiment {
            Experiment::QfiScaling(c) => {
                for j in c.j.check("j")? {
                    check_spin(j, "j")?;
                }
                c.k.check("k")?;
                check_finite(&[("alpha", c.alpha), ("theta", c.theta), ("phi", c.phi)])?;
                if c.t.is_empty() {
                    return Err(config_err("grid `t` is empty"));
                }
                if c.t.contains(&0) {
                    return Err(config_err("times must be >= 1"));
                }
            }
            Experiment::Heatmap(c) => {
                check_spin(c.j, "j")?;
                check_finite(&[("k", c.k), ("alpha", c.alpha)])?;
                if c.t == 0 {
                    return Err(config_err("`t` must be >= 1"));
                }
                c.phi.check("phi")?;
                for z in c.z.check("z")? {
                    if z.abs() > 1.0 {
                        return Err(config_err(format!("z = {z} outside [-1, 1]")));
                    }
                }
                if let Some(l) = &c.lyapunov {
                    check_lyapunov(l, c.j)?;
                }
            }
            Experiment::LyapunovMap(c) => {
                check_finite(&[("k", c.k), ("alpha", c.alpha)])?;
                if !(c.j > 0.0) {
                    return Err(config_err("`j` must be positive"));
                }
                c.phi.check("phi")?;
                for z in c.z.check("z")? {
                    if z.abs() > 1.0 {
                        return Err(config_err(format!("z = {z} outside [-1, 1]")));
                    }
                }
                check_lyapunov(&c.sampling, c.j)?;
            }
            Experiment::DissipativeScan(c) => {
                check_finite(&[("k", c.k), ("alpha", c.alpha), ("theta", c.theta), ("phi", c.phi)])?;
                if c.scans.is_empty() {
                    return Err(config_err("`scans` is empty"));
                }
                for p in &c.scans {
                    check_spin(p.j, "scans.j")?;
                    check_gamma(p.gamma)?;
                }
                if c.horizon < 3 {
                    return Err(config_err("`horizon` must be >= 3"));
                }
                if let Some(s) = &c.state_search {
                    if s.theta_points < 1 || s.phi_points < 1 {
                        return Err(config_err("state search needs at least one point per axis"));
                    }
                }
                if let Some(s) = &c.theta_search {
                    if s.grid < 2 {
                        return Err(config_err("theta search needs at least 2 points"));
                    }
                }
            }
            Experiment::JyFisher(c) => {
                check_spin(c.j, "j")?;
                check_finite(&[("alpha", c.alpha), ("theta", c.theta), ("phi", c.phi)])?;
                if c.t == 0 {
                    return Err(config_err("`t` must be >= 1"));
                }
                for g in c.gamma.check("gamma")? {
                    check_gamma(g)?;
                }
                c.k.check("k")?;
                if let Some(jit) = &c.jitter {
                    if !(jit.rel_sigma >= 0.0) || jit.nodes == 0 {
                        return Err(config_err("jitter needs rel_sigma >= 0 and at least one node"));
                    }
                }
            }
            Experiment::Serf(c) => {
                let params = c.resolved_params()?;
                params.validate().map_err(|e| config_err(format!("serf: {e}")))?;
                c.schedule.validate().map_err(|e| config_err(format!("serf schedule: {e}")))?;
                if c.schedule.periods == 0 {
                    return Err(config_err("serf: `periods` must be >= 1"));
                }
                if c.readouts.is_empty() {
                    return Err(config_err("serf: `readouts` is empty"));
                }
                if !(c.atoms > 0.0) {
                    return Err(config_err("serf: `atoms` must be positive"));
                }
            }
        }
        Ok(())
    }

    /// SHA-256 over the experiment and seed. Output path, worker count and
    /// preset notes do not affect results and are left out.
    pub fn hash(&self) -> String {
        let body = serde_json::json!({ "experiment": self.experiment, "seed": self.seed });
        let digest = Sha256::digest(body.to_string().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn sidecar_path(&self) -> PathBuf {
        self.output.with_extension("json")
    }

    pub fn checkpoint_path(&self) -> PathBuf {
        self.output.with_extension("checkpoint.jsonl")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scaling() -> ExperimentConfig {
        ExperimentConfig::from_json(
            r#"{"kind": "qfi-scaling", "j": [8, 16], "k": [30], "t": [1, 2, 4], "output": "out.csv"}"#,
        )
        .unwrap()
    }

    #[test]
    fn parses_with_defaults() {
        let c = scaling();
        c.validate().unwrap();
        match &c.experiment {
            Experiment::QfiScaling(q) => assert_eq!(q.alpha, FRAC_PI_2),
            _ => panic!("wrong kind"),
        }
        assert_eq!(c.seed, 0);
    }

    #[test]
    fn hash_ignores_output_and_workers() {
        let a = scaling();
        let mut b = a.clone();
        b.output = "elsewhere/x.csv".into();
        b.workers = 7;
        assert_eq!(a.hash(), b.hash());
        b.seed = 1;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn invalid_configs() {
        let bad = [
            r#"{"kind": "qfi-scaling", "j": [], "k": [30], "t": [1], "output": "o.csv"}"#,
            r#"{"kind": "qfi-scaling", "j": [0.3], "k": [30], "t": [1], "output": "o.csv"}"#,
            r#"{"kind": "qfi-scaling", "j": [2], "k": [30], "t": [0], "output": "o.csv"}"#,
            r#"{"kind": "heatmap", "j": 4, "k": 3, "t": 4, "phi": [0], "z": [1.5], "output": "o.csv"}"#,
            r#"{"kind": "dissipative-scan", "k": 30, "scans": [], "horizon": 100, "output": "o.csv"}"#,
            r#"{"kind": "dissipative-scan", "k": 30, "scans": [{"j": 2, "gamma": -1}], "horizon": 100, "output": "o.csv"}"#,
            r#"{"kind": "jy-fisher", "j": 2, "t": 2, "gamma": [0], "k": {"start": 0, "stop": 1, "points": 0}, "output": "o.csv"}"#,
        ];
        for text in bad {
            let parsed = ExperimentConfig::from_json(text);
            assert!(parsed.is_err() || parsed.unwrap().validate().is_err(), "{text}");
        }
        assert!(ExperimentConfig::from_json(r#"{"kind": "nope", "output": "o.csv"}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"kind": "qfi-scaling", "j": [2], "k": [1], "t": [1]}"#).is_err());
    }

    #[test]
    fn serf_overrides() {
        let run = SerfRun {
            params: serde_json::from_str(r#"{"b_field": 1e-14}"#).unwrap(),
            schedule: SerfSchedule::default(),
            readouts: default_readouts(),
            atoms: 1.0,
        };
        assert_eq!(run.resolved_params().unwrap().b_field, 1e-14);
        let typo = SerfRun { params: serde_json::from_str(r#"{"bfield": 1}"#).unwrap(), ..run };
        assert!(matches!(typo.resolved_params(), Err(Error::Config(_))));
    }
}
