use std::f64::consts::PI;
use std::path::PathBuf;

use crate::dissipative::StateSearch;
use crate::error::{Error, Result};
use crate::estimation::KJitter;
use crate::serf::{Readout, SerfSchedule};

use super::config::{
    DissipativeScan, Experiment, ExperimentConfig, Heatmap, JyFisher, LyapunovMapSpec, LyapunovSettings, PresetInfo,
    QfiScaling, ScanPoint, SerfRun,
};
use super::grid::Grid;

pub const PRESET_NAMES: [&str; 7] = ["fig2", "fig3-heatmap", "fig4", "fig5", "fig6", "fig7", "lyapunov"];

const HALF_PI: f64 = PI / 2.0;

/// Roughly log-spaced integers `1..=max`.
fn log_times(max: usize) -> Vec<usize> {
    let mut out = vec![1usize];
    let mut t = 1.0f64;
    while (t as usize) < max {
        t *= 1.25;
        let next = (t.round() as usize).min(max);
        if next > *out.last().unwrap() {
            out.push(next);
        }
    }
    out
}

fn info(name: &str, description: &str, full: bool, reduced: &[&str]) -> PresetInfo {
    PresetInfo {
        name: name.to_string(),
        description: description.to_string(),
        full_scale: full,
        reduced: if full { Vec::new() } else { reduced.iter().map(|s| s.to_string()).collect() },
    }
}

fn phase_grid(points: usize) -> (Grid, Grid) {
    // cell centres, so the poles and the seam at phi = +-pi are avoided
    let phi = Grid::Linear { start: -PI + PI / points as f64, stop: PI - PI / points as f64, points };
    let z = Grid::Linear { start: -1.0 + 1.0 / points as f64, stop: 1.0 - 1.0 / points as f64, points };
    (phi, z)
}

/// Named configuration. Desk-scale unless `full`; reductions are listed in
/// the preset metadata.
pub fn preset(name: &str, full: bool) -> Result<ExperimentConfig> {
    let (experiment, meta) = match name {
        "fig2" => {
            let j = if full {
                vec![32.0, 64.0, 128.0, 256.0, 512.0, 1000.0, 2000.0, 4000.0]
            } else {
                vec![32.0, 45.0, 64.0, 90.0, 128.0, 181.0, 256.0]
            };
            let t = log_times(if full { 1 << 15 } else { 1 << 12 });
            (
                Experiment::QfiScaling(QfiScaling { j: j.into(), k: vec![30.0].into(), alpha: HALF_PI, theta: HALF_PI, phi: HALF_PI, t }),
                info("fig2", "QFI against j and t for the strongly chaotic top, k = 30, coherent state (pi/2, pi/2)", full, &[
                    "j up to 256 instead of 4000",
                    "t up to 2^12 instead of 2^15",
                ]),
            )
        }
        "fig3-heatmap" => {
            let (phi, z) = phase_grid(if full { 128 } else { 32 });
            let lyapunov = if full {
                LyapunovSettings { samples: 100, steps: 10_000, renorm_every: 10, disk_area: None }
            } else {
                LyapunovSettings { samples: 20, steps: 2_000, renorm_every: 10, disk_area: None }
            };
            (
                Experiment::Heatmap(Heatmap {
                    j: if full { 4000.0 } else { 128.0 },
                    k: 3.0,
                    alpha: HALF_PI,
                    t: if full { 1 << 15 } else { 1 << 12 },
                    phi,
                    z,
                    lyapunov: Some(lyapunov),
                }),
                info("fig3-heatmap", "QFI, gain and classical Lyapunov exponent over the mixed phase space, k = 3", full, &[
                    "j = 128 instead of 4000",
                    "t = 2^12 instead of 2^15",
                    "32 x 32 grid",
                    "Lyapunov: 20 samples of 2000 steps",
                ]),
            )
        }
        "fig4" => {
            let gammas = Grid::Log { log_start: -4.0, log_stop: -2.0, points: 11 }.values();
            let js: &[f64] = if full {
                &[4.0, 6.0, 8.0, 10.0, 12.0, 16.0, 20.0, 24.0, 32.0, 40.0, 48.0, 60.0, 80.0, 100.0]
            } else {
                &[4.0, 6.0, 8.0, 10.0, 12.0, 16.0, 20.0, 24.0, 32.0, 40.0, 48.0, 60.0]
            };
            let mut scans: Vec<ScanPoint> = gammas.into_iter().map(|gamma| ScanPoint { j: 15.0, gamma }).collect();
            scans.extend(js.iter().map(|&j| ScanPoint { j, gamma: 0.5e-3 }));
            (
                Experiment::DissipativeScan(DissipativeScan {
                    k: 30.0,
                    alpha: HALF_PI,
                    scans,
                    horizon: 20_000,
                    theta: HALF_PI,
                    phi: HALF_PI,
                    optimize: false,
                    state_search: None,
                    theta_search: None,
                }),
                info("fig4", "QFI peak time of the damped top and damped kicked top: j = 15 gamma scan, gamma = 0.5e-3 j scan, k = 30", full, &[
                    "j scan up to 60",
                ]),
            )
        }
        "fig5" => {
            let j = if full { 100.0 } else { 50.0 };
            let points = if full { 17 } else { 9 };
            let scans = Grid::Log { log_start: -5.0, log_stop: -1.0, points }
                .values()
                .into_iter()
                .map(|gamma| ScanPoint { j, gamma })
                .collect();
            (
                Experiment::DissipativeScan(DissipativeScan {
                    k: 30.0,
                    alpha: HALF_PI,
                    scans,
                    horizon: 20_000,
                    theta: HALF_PI,
                    phi: HALF_PI,
                    optimize: true,
                    state_search: Some(if full {
                        StateSearch::default()
                    } else {
                        StateSearch { theta_points: 8, phi_points: 8, refine_rounds: 2 }
                    }),
                    theta_search: None,
                }),
                info("fig5", "State-optimised max QFI/t of the damped kicked top against the damped top over gamma, k = 30", full, &[
                    "j = 50 instead of 100",
                    "9 damping values",
                    "8 x 8 state grid with 2 refinement rounds",
                ]),
            )
        }
        "fig6" => (
            Experiment::JyFisher(JyFisher {
                j: 200.0,
                alpha: HALF_PI,
                theta: HALF_PI,
                phi: HALF_PI,
                t: 2,
                gamma: vec![0.0, 0.5e-3].into(),
                k: Grid::Linear { start: 0.0, stop: 30.0, points: if full { 121 } else { 61 } },
                jitter: Some(KJitter { rel_sigma: 0.05, nodes: 21 }),
            }),
            info("fig6", "J_y readout Fisher information after two kicks against k, j = 200, with 5% kick-strength jitter", full, &[
                "k step 0.5",
            ]),
        ),
        "fig7" => {
            let schedule = if full {
                SerfSchedule { periods: 80_000, dt_free: 1e-5, dt_pulse: 2e-8, record_every: 500, kicked: true, doppler_nodes: 15 }
            } else {
                SerfSchedule { periods: 60_000, dt_free: 1e-4, dt_pulse: 2e-7, record_every: 1000, kicked: true, doppler_nodes: 15 }
            };
            (
                Experiment::Serf(SerfRun {
                    params: serde_json::Map::new(),
                    schedule,
                    readouts: vec![Readout::Optimal, Readout::Sz],
                    atoms: 2e10,
                }),
                info("fig7", "Cesium SERF magnetometer with and without kicks: B = 40 fT along y, tau = 1 ms, 2 us pulses", full, &[
                    "60 s horizon",
                    "Euler steps 100 us free and 0.2 us in the pulse",
                ]),
            )
        }
        "lyapunov" => {
            let (phi, z) = phase_grid(if full { 128 } else { 48 });
            (
                Experiment::LyapunovMap(LyapunovMapSpec {
                    k: 3.0,
                    alpha: HALF_PI,
                    j: 4000.0,
                    phi,
                    z,
                    sampling: if full {
                        LyapunovSettings { samples: 100, steps: 10_000, renorm_every: 10, disk_area: None }
                    } else {
                        LyapunovSettings { samples: 20, steps: 2_000, renorm_every: 10, disk_area: None }
                    },
                }),
                info("lyapunov", "Classical Lyapunov exponents of the k = 3 map", full, &["48 x 48 grid", "20 samples of 2000 steps"]),
            )
        }
        other => {
            return Err(Error::Config(format!("unknown preset `{other}`; available: {}", PRESET_NAMES.join(", "))));
        }
    };
    let suffix = if full { "-full" } else { "" };
    Ok(ExperimentConfig {
        experiment,
        output: PathBuf::from(format!("results/{name}{suffix}.csv")),
        seed: 0,
        workers: 0,
        preset: Some(meta),
    })
}
