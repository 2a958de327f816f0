//! Grid layout, per-point kernels and summaries for each experiment kind.

use std::collections::BTreeMap;

use serde_json::{json, Value};

use crate::classical::{lyapunov_estimate, ClassicalState};
use crate::dissipative::{
    dkt_optimized, dt_benchmark, dt_series, t_max_scan, DampingParams, DissipativeTrajectory, Objective, SeriesStop,
    SuperradiancePropagator,
};
use crate::error::{Error, Result};
use crate::estimation::{
    benchmark_top_cs_optimal, fisher_with_k_jitter, jy_projective_povm, loglog_slope, max_rescaled,
    qfi_mixed_sld, qfi_pure, EstimationMeta, EstimationResult, PreparedState,
};
use crate::exec::{map_collect, Execution};
use crate::floquet::{evolve_with_derivative, qfi_series, DerivativeTrajectory, FloquetCache, KickedTopParams};
use crate::serf::{
    effective_kick_strength, improvement, sensitivity_report, thermal_initial_state, Readout, SensitivityPoint,
    SerfModel, SerfPropagator, SerfSchedule,
};
use crate::spin::{coherent_state, PhaseAngles, SpinQuantum};

use super::config::{DissipativeScan, Experiment, Heatmap, JyFisher, LyapunovMapSpec, QfiScaling, SerfRun};

/// Column names of one experiment kind.
#[derive(Clone, Debug, PartialEq)]
pub struct Schema {
    pub params: Vec<String>,
    pub values: Vec<String>,
}

fn names(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

/// Independent piece of work producing one or more rows.
#[derive(Clone, Debug)]
pub(crate) struct Unit {
    pub params: Vec<Vec<f64>>,
    task: Task,
}

#[derive(Clone, Copy, Debug)]
enum Task {
    Scaling { j: f64, k: f64 },
    Cell { phi: f64, z: f64 },
    Scan { j: f64, gamma: f64 },
    Jy { gamma: f64 },
    Serf { kicked: bool },
}

/// Values of one row; a message marks values that could not be computed.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct RowOut {
    pub values: Vec<f64>,
    pub note: Option<String>,
}

impl RowOut {
    fn ok(values: Vec<f64>) -> Self {
        Self { values, note: None }
    }
}

fn readout_name(r: Readout) -> &'static str {
    match r {
        Readout::Optimal => "optimal",
        Readout::Sz => "sz",
    }
}

pub fn schema(exp: &Experiment) -> Schema {
    match exp {
        Experiment::QfiScaling(_) => Schema {
            params: names(&["j", "k", "alpha", "theta", "phi", "t"]),
            values: names(&["qfi", "rescaled", "gain"]),
        },
        Experiment::Heatmap(_) => Schema {
            params: names(&["phi", "z", "j", "k", "alpha", "t"]),
            values: names(&["qfi", "gain", "lyapunov", "lyapunov_error"]),
        },
        Experiment::LyapunovMap(_) => Schema {
            params: names(&["phi", "z", "k", "alpha"]),
            values: names(&["lyapunov", "lyapunov_error"]),
        },
        Experiment::DissipativeScan(_) => Schema {
            params: names(&["j", "gamma", "two_gamma_j2", "k", "alpha"]),
            values: names(&[
                "dt_t_max",
                "dkt_t_max",
                "dt_rescaled",
                "dt_t",
                "dt_theta",
                "dkt_rescaled",
                "dkt_t",
                "dkt_theta",
                "dkt_phi",
                "gain",
            ]),
        },
        Experiment::JyFisher(_) => Schema {
            params: names(&["j", "gamma", "k", "t", "alpha", "theta", "phi"]),
            values: names(&["fisher", "qfi", "fisher_jitter", "benchmark", "gain"]),
        },
        Experiment::Serf(c) => Schema {
            params: names(&["kicked", "periods", "t"]),
            values: c
                .readouts
                .iter()
                .flat_map(|&r| ["fisher", "rescaled", "delta_b"].map(|v| format!("{v}_{}", readout_name(r))))
                .collect(),
        },
    }
}

fn cells(phis: &[f64], zs: &[f64]) -> Vec<(f64, f64)> {
    zs.iter().flat_map(|&z| phis.iter().map(move |&p| (p, z))).collect()
}

fn serf_periods(schedule: &SerfSchedule) -> Vec<usize> {
    (1..=schedule.periods)
        .filter(|p| p % schedule.record_every == 0 || *p == schedule.periods)
        .collect()
}

/// Units in grid order. Assumes a validated config.
pub(crate) fn plan(exp: &Experiment) -> Result<Vec<Unit>> {
    let units = match exp {
        Experiment::QfiScaling(c) => {
            let mut out = Vec::new();
            for j in c.j.check("j")? {
                for k in c.k.check("k")? {
                    let params = c.t.iter().map(|&t| vec![j, k, c.alpha, c.theta, c.phi, t as f64]).collect();
                    out.push(Unit { params, task: Task::Scaling { j, k } });
                }
            }
            out
        }
        Experiment::Heatmap(c) => cells(&c.phi.check("phi")?, &c.z.check("z")?)
            .into_iter()
            .map(|(phi, z)| Unit {
                params: vec![vec![phi, z, c.j, c.k, c.alpha, c.t as f64]],
                task: Task::Cell { phi, z },
            })
            .collect(),
        Experiment::LyapunovMap(c) => cells(&c.phi.check("phi")?, &c.z.check("z")?)
            .into_iter()
            .map(|(phi, z)| Unit {
                params: vec![vec![phi, z, c.k, c.alpha]],
                task: Task::Cell { phi, z },
            })
            .collect(),
        Experiment::DissipativeScan(c) => c
            .scans
            .iter()
            .map(|p| {
                let big_j = p.j + 0.5;
                Unit {
                    params: vec![vec![p.j, p.gamma, 2.0 * p.gamma * big_j * big_j, c.k, c.alpha]],
                    task: Task::Scan { j: p.j, gamma: p.gamma },
                }
            })
            .collect(),
        Experiment::JyFisher(c) => {
            let ks = c.k.check("k")?;
            c.gamma
                .check("gamma")?
                .into_iter()
                .map(|gamma| Unit {
                    params: ks.iter().map(|&k| vec![c.j, gamma, k, c.t as f64, c.alpha, c.theta, c.phi]).collect(),
                    task: Task::Jy { gamma },
                })
                .collect()
        }
        Experiment::Serf(c) => {
            let tau = c.resolved_params()?.tau;
            let periods = serf_periods(&c.schedule);
            [false, true]
                .into_iter()
                .map(|kicked| Unit {
                    params: periods.iter().map(|&p| vec![kicked as u8 as f64, p as f64, p as f64 * tau]).collect(),
                    task: Task::Serf { kicked },
                })
                .collect()
        }
    };
    Ok(units)
}

/// Runs one unit; `exec` governs parallelism inside it.
pub(crate) fn execute(exp: &Experiment, unit: &Unit, seed: u64, exec: Execution) -> Result<Vec<RowOut>> {
    match (exp, unit.task) {
        (Experiment::QfiScaling(c), Task::Scaling { j, k }) => scaling(c, j, k),
        (Experiment::Heatmap(c), Task::Cell { phi, z }) => heat_cell(c, phi, z, seed, exec).map(|r| vec![r]),
        (Experiment::LyapunovMap(c), Task::Cell { phi, z }) => lyapunov_cell(c, phi, z, seed, exec).map(|r| vec![r]),
        (Experiment::DissipativeScan(c), Task::Scan { j, gamma }) => scan_point(c, j, gamma, exec).map(|r| vec![r]),
        (Experiment::JyFisher(c), Task::Jy { gamma }) => jy_curve(c, gamma, exec),
        (Experiment::Serf(c), Task::Serf { kicked }) => serf_run(c, kicked, exec),
        _ => unreachable!("unit does not belong to this experiment"),
    }
}

fn scaling(c: &QfiScaling, j: f64, k: f64) -> Result<Vec<RowOut>> {
    let spin = SpinQuantum::from_j(j)?;
    let cache = FloquetCache::new(spin)?;
    let params = KickedTopParams::new(c.alpha, k)?;
    let psi = coherent_state(spin, PhaseAngles::new(c.theta, c.phi)?);
    let t_max = c.t.iter().copied().max().unwrap_or(0);
    let series = qfi_series(&psi, &cache, params, t_max)?;
    Ok(c.t
        .iter()
        .map(|&t| {
            let q = series[t];
            RowOut::ok(vec![q, q / t as f64, q / benchmark_top_cs_optimal(j, t as f64)])
        })
        .collect())
}

fn heat_cell(c: &Heatmap, phi: f64, z: f64, seed: u64, exec: Execution) -> Result<RowOut> {
    let spin = SpinQuantum::from_j(c.j)?;
    let cache = FloquetCache::new(spin)?;
    let params = KickedTopParams::new(c.alpha, c.k)?;
    let psi = coherent_state(spin, PhaseAngles::from_z_phi(z, phi)?);
    let mut traj = DerivativeTrajectory::new(&psi, &cache, params)?;
    for _ in 0..c.t {
        traj.step();
    }
    let q = traj.qfi();
    let (lyap, err) = match &c.lyapunov {
        Some(s) => {
            let est = lyapunov_estimate(&ClassicalState::from_z_phi(z, phi)?, params, &s.config(c.j, seed), exec)?;
            (est.mean, est.std_error)
        }
        None => (f64::NAN, f64::NAN),
    };
    Ok(RowOut::ok(vec![q, q / benchmark_top_cs_optimal(c.j, c.t as f64), lyap, err]))
}

fn lyapunov_cell(c: &LyapunovMapSpec, phi: f64, z: f64, seed: u64, exec: Execution) -> Result<RowOut> {
    let params = KickedTopParams::new(c.alpha, c.k)?;
    let est = lyapunov_estimate(&ClassicalState::from_z_phi(z, phi)?, params, &c.sampling.config(c.j, seed), exec)?;
    Ok(RowOut::ok(vec![est.mean, est.std_error]))
}

/// Series that stops at `horizon`, or once the value has fallen below half
/// its running maximum at least twice as late as that maximum.
fn until_peak_passed(horizon: usize, mut next: impl FnMut() -> Result<(usize, f64)>) -> Result<Vec<(usize, f64)>> {
    let mut out: Vec<(usize, f64)> = Vec::new();
    let (mut best_t, mut best) = (0, f64::NEG_INFINITY);
    loop {
        let (t, v) = next()?;
        out.push((t, v));
        if v > best {
            (best_t, best) = (t, v);
        }
        if t >= horizon || (v < 0.5 * best && t >= 2 * best_t) {
            return Ok(out);
        }
    }
}

fn scan_point(c: &DissipativeScan, j: f64, gamma: f64, exec: Execution) -> Result<RowOut> {
    let spin = SpinQuantum::from_j(j)?;
    let cache = FloquetCache::new(spin)?;
    let prop = SuperradiancePropagator::new(spin, DampingParams::new(gamma)?, 1.0)?;
    let params = KickedTopParams::new(c.alpha, c.k)?;
    let meta = EstimationMeta { j, k: c.k, alpha: c.alpha, gamma, theta: c.theta, phi: c.phi };

    let initial = coherent_state(spin, PhaseAngles::new(c.theta, c.phi)?).to_density();
    let mut traj = DissipativeTrajectory::new(&initial, &cache, &prop, params)?;
    let dkt: Vec<EstimationResult> = until_peak_passed(c.horizon, || {
        traj.step()?;
        Ok((traj.time(), traj.qfi()?))
    })?
    .into_iter()
    .map(|(t, v)| EstimationResult::new(v, t, meta))
    .collect();
    let dt = dt_series(&prop, c.theta, SeriesStop::fixed(c.horizon))?;

    let mut notes = Vec::new();
    let mut peak = |name: &str, series: &[EstimationResult]| match t_max_scan(series) {
        Ok(t) => t as f64,
        Err(e) => {
            notes.push(format!("{name} t_max: {e}"));
            f64::NAN
        }
    };
    let dt_t_max = peak("dt", &dt);
    let dkt_t_max = peak("dkt", &dkt);

    let (dt_best, dkt_best) = if c.optimize {
        let stop = SeriesStop { t_max: c.horizon, rescaled_drop: Some(0.25) };
        let dt_best = dt_benchmark(&prop, stop, Objective::MaxRescaled, c.theta_search.unwrap_or_default(), exec)?;
        let search = c.state_search.unwrap_or_default();
        let dkt_best = dkt_optimized(&cache, &prop, params, stop, Objective::MaxRescaled, search, exec)?;
        (dt_best, dkt_best)
    } else {
        let mut dkt_best = max_rescaled(&dkt)?;
        dkt_best.meta = meta;
        (max_rescaled(&dt)?, dkt_best)
    };
    Ok(RowOut {
        values: vec![
            dt_t_max,
            dkt_t_max,
            dt_best.rescaled,
            dt_best.t as f64,
            dt_best.meta.theta,
            dkt_best.rescaled,
            dkt_best.t as f64,
            dkt_best.meta.theta,
            dkt_best.meta.phi,
            dkt_best.rescaled / dt_best.rescaled,
        ],
        note: (!notes.is_empty()).then(|| notes.join("; ")),
    })
}

/// State after `t` kicks, with its alpha-derivative.
fn prepare_kicked(
    cache: &FloquetCache,
    prop: &SuperradiancePropagator,
    angles: PhaseAngles,
    alpha: f64,
    k: f64,
    t: usize,
) -> Result<PreparedState> {
    let spin = cache.spin();
    let params = KickedTopParams::new(alpha, k)?;
    if prop.gamma() == 0.0 {
        let (state, derivative) = evolve_with_derivative(&coherent_state(spin, angles), cache, params, t)?;
        return Ok(PreparedState::Pure { state, derivative });
    }
    let mut traj = DissipativeTrajectory::new(&coherent_state(spin, angles).to_density(), cache, prop, params)?;
    for _ in 0..t {
        traj.step()?;
    }
    Ok(PreparedState::Mixed { rho: traj.density(), drho: traj.drho().clone() })
}

fn jy_curve(c: &JyFisher, gamma: f64, exec: Execution) -> Result<Vec<RowOut>> {
    let spin = SpinQuantum::from_j(c.j)?;
    let cache = FloquetCache::new(spin)?;
    let prop = SuperradiancePropagator::new(spin, DampingParams::new(gamma)?, 1.0)?;
    let povm = jy_projective_povm(spin)?;
    let angles = PhaseAngles::new(c.theta, c.phi)?;
    let benchmark = dt_benchmark(&prop, SeriesStop::fixed(c.t), Objective::MaxValue, Default::default(), exec)?.value;
    let ks = c.k.values();
    let rows = map_collect(exec, &ks, |&k| -> Result<RowOut> {
        let prepared = prepare_kicked(&cache, &prop, angles, c.alpha, k, c.t)?;
        let fisher = prepared.outcome_distribution(&povm)?.fisher();
        let qfi = match &prepared {
            PreparedState::Pure { state, derivative } => qfi_pure(state, derivative)?,
            PreparedState::Mixed { rho, drho } => qfi_mixed_sld(rho, drho)?,
        };
        let jittered = match c.jitter {
            Some(jit) => fisher_with_k_jitter(
                &povm,
                |kk| prepare_kicked(&cache, &prop, angles, c.alpha, kk, c.t),
                k,
                jit,
                Execution::Sequential,
            )?,
            None => f64::NAN,
        };
        Ok(RowOut::ok(vec![fisher, qfi, jittered, benchmark, fisher / benchmark]))
    });
    rows.into_iter().collect()
}

fn serf_run(c: &SerfRun, kicked: bool, exec: Execution) -> Result<Vec<RowOut>> {
    let model = SerfModel::new(c.resolved_params()?)?;
    let schedule = SerfSchedule { kicked, ..c.schedule };
    let prop = SerfPropagator::new(&model, schedule, exec)?;
    let samples = prop.run(&thermal_initial_state(&model.basis, model.params.q)?)?;
    let reports = c
        .readouts
        .iter()
        .map(|&r| sensitivity_report(&samples, &model.basis, r, c.atoms))
        .collect::<Result<Vec<_>>>()?;
    Ok((0..samples.len())
        .map(|i| RowOut::ok(reports.iter().flat_map(|rep| [rep[i].fisher, rep[i].rescaled, rep[i].delta_b]).collect()))
        .collect())
}

/// A finished row as seen by the summaries.
pub(crate) struct Finished<'a> {
    pub params: &'a [f64],
    pub values: &'a [f64],
}

fn slope_or_null(xs: &[f64], ys: &[f64]) -> Value {
    loglog_slope(xs, ys).map(|s| json!(s)).unwrap_or(Value::Null)
}

/// Key for grouping rows by a floating-point parameter.
fn key(v: f64) -> u64 {
    v.to_bits()
}

/// Points with an integer-resolved peak time enter the slope fits.
const MIN_FIT_T_MAX: f64 = 10.0;

/// Headline numbers written to the sidecar.
pub(crate) fn summarize(exp: &Experiment, rows: &[Finished<'_>]) -> Value {
    match exp {
        Experiment::QfiScaling(c) => {
            let mut by_kt: BTreeMap<(u64, usize), (f64, Vec<f64>, Vec<f64>)> = BTreeMap::new();
            let mut by_jk: BTreeMap<(u64, u64), (f64, f64, Vec<f64>, Vec<f64>)> = BTreeMap::new();
            for r in rows {
                let (j, k, t, q) = (r.params[0], r.params[1], r.params[5], r.values[0]);
                let e = by_kt.entry((key(k), t as usize)).or_insert((k, Vec::new(), Vec::new()));
                e.1.push(j);
                e.2.push(q);
                let e = by_jk.entry((key(j), key(k))).or_insert((j, k, Vec::new(), Vec::new()));
                e.2.push(t);
                e.3.push(q);
            }
            let j_slopes: Vec<Value> = by_kt
                .into_iter()
                .map(|((_, t), (k, js, qs))| json!({ "k": k, "t": t, "slope": slope_or_null(&js, &qs) }))
                .collect();
            let half = c.t.len() / 2;
            let t_slopes: Vec<Value> = by_jk
                .into_values()
                .map(|(j, k, ts, qs)| {
                    let mut pairs: Vec<(f64, f64)> = ts.into_iter().zip(qs).collect();
                    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
                    let (ts, qs): (Vec<f64>, Vec<f64>) = pairs[half..].iter().copied().unzip();
                    json!({ "j": j, "k": k, "late_time_slope": slope_or_null(&ts, &qs) })
                })
                .collect();
            json!({ "j_slopes": j_slopes, "t_slopes": t_slopes })
        }
        Experiment::Heatmap(_) => {
            let best = rows.iter().filter(|r| r.values[1].is_finite()).max_by(|a, b| a.values[1].total_cmp(&b.values[1]));
            let finite: Vec<f64> = rows.iter().map(|r| r.values[1]).filter(|g| g.is_finite()).collect();
            json!({
                "max_gain": best.map(|r| json!({ "phi": r.params[0], "z": r.params[1], "gain": r.values[1] })),
                "mean_gain": if finite.is_empty() { Value::Null } else { json!(finite.iter().sum::<f64>() / finite.len() as f64) },
            })
        }
        Experiment::LyapunovMap(_) => {
            let vals: Vec<f64> = rows.iter().map(|r| r.values[0]).filter(|v| v.is_finite()).collect();
            json!({
                "cells": rows.len(),
                "mean_lyapunov": if vals.is_empty() { Value::Null } else { json!(vals.iter().sum::<f64>() / vals.len() as f64) },
                "max_lyapunov": vals.iter().copied().reduce(f64::max),
            })
        }
        Experiment::DissipativeScan(c) => dissipative_summary(c, rows),
        Experiment::JyFisher(_) => {
            let mut by_gamma: BTreeMap<u64, (f64, Vec<(f64, f64, f64, f64)>)> = BTreeMap::new();
            for r in rows {
                let e = by_gamma.entry(key(r.params[1])).or_insert((r.params[1], Vec::new()));
                e.1.push((r.params[2], r.values[0], r.values[2], r.values[3]));
            }
            let curves: Vec<Value> = by_gamma
                .into_values()
                .map(|(gamma, mut pts)| {
                    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
                    let ks: Vec<f64> = pts.iter().map(|p| p.0).collect();
                    let excess: Vec<f64> = pts.iter().map(|p| p.1 - p.3).collect();
                    let jitter_change = pts
                        .iter()
                        .filter(|p| p.2.is_finite() && p.1 > 0.0)
                        .map(|p| (p.2 - p.1).abs() / p.1)
                        .reduce(f64::max);
                    json!({
                        "gamma": gamma,
                        "benchmark": pts.first().map(|p| p.3),
                        "crossing_k": last_upward_crossing(&ks, &excess),
                        "max_relative_jitter_change": jitter_change,
                    })
                })
                .collect();
            json!({ "curves": curves })
        }
        Experiment::Serf(c) => serf_summary(c, rows),
    }
}

/// `x` where `y` last changes sign from negative to positive, linearly
/// interpolated; `None` if `y` does not end positive after a negative value.
pub fn last_upward_crossing(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let last_neg = ys.iter().rposition(|&y| y <= 0.0)?;
    if last_neg + 1 >= ys.len() {
        return None;
    }
    let (x0, x1, y0, y1) = (xs[last_neg], xs[last_neg + 1], ys[last_neg], ys[last_neg + 1]);
    Some(x0 + (x1 - x0) * (-y0) / (y1 - y0))
}

fn dissipative_summary(c: &DissipativeScan, rows: &[Finished<'_>]) -> Value {
    let fit = |group: usize, abscissa: usize, value: usize| -> Vec<Value> {
        let mut groups: BTreeMap<u64, (f64, Vec<f64>, Vec<f64>)> = BTreeMap::new();
        for r in rows {
            let (x, y) = (r.params[abscissa], r.values[value]);
            if y.is_finite() && y >= MIN_FIT_T_MAX {
                let e = groups.entry(key(r.params[group])).or_insert((r.params[group], Vec::new(), Vec::new()));
                e.1.push(x);
                e.2.push(y);
            }
        }
        groups
            .into_values()
            .filter(|g| g.1.len() >= 3)
            .map(|(g, xs, ys)| json!({ "fixed": g, "points": xs.len(), "slope": slope_or_null(&xs, &ys) }))
            .collect()
    };
    let mut summary = json!({
        "t_max_vs_gamma": { "dt": fit(0, 1, 0), "dkt": fit(0, 1, 1) },
        "t_max_vs_j": { "dt": fit(1, 0, 0), "dkt": fit(1, 0, 1) },
    });
    if c.optimize {
        let mut by_j: BTreeMap<u64, Vec<(f64, f64)>> = BTreeMap::new();
        for r in rows {
            by_j.entry(key(r.params[0])).or_default().push((r.params[2], r.values[9]));
        }
        let windows: Vec<Value> = by_j
            .into_iter()
            .map(|(jk, mut pts)| {
                pts.sort_by(|a, b| a.0.total_cmp(&b.0));
                json!({ "j": f64::from_bits(jk), "windows": gain_windows(&pts) })
            })
            .collect();
        summary["gain_windows"] = json!(windows);
    }
    summary
}

/// Maximal runs of consecutive points with gain above 1, as
/// `[first, last]` abscissae.
pub fn gain_windows(points: &[(f64, f64)]) -> Vec<[f64; 2]> {
    let mut out = Vec::new();
    let mut open: Option<[f64; 2]> = None;
    for &(x, g) in points {
        if g > 1.0 {
            open = Some(open.map_or([x, x], |w| [w[0], x]));
        } else if let Some(w) = open.take() {
            out.push(w);
        }
    }
    out.extend(open);
    out
}

fn serf_summary(c: &SerfRun, rows: &[Finished<'_>]) -> Value {
    let k_eff = c
        .resolved_params()
        .and_then(SerfModel::new)
        .and_then(|m| effective_kick_strength(&m, c.schedule.doppler_nodes))
        .map(|k| json!(k))
        .unwrap_or(Value::Null);
    let points = |kicked: f64, idx: usize| -> Vec<SensitivityPoint> {
        rows.iter()
            .filter(|r| r.params[0] == kicked)
            .map(|r| SensitivityPoint {
                t: r.params[2],
                fisher: r.values[3 * idx],
                rescaled: r.values[3 * idx + 1],
                delta_b: r.values[3 * idx + 2],
            })
            .collect()
    };
    let readouts: Vec<Value> = c
        .readouts
        .iter()
        .enumerate()
        .map(|(idx, &r)| {
            let (reference, kicked) = (points(0.0, idx), points(1.0, idx));
            json!({
                "readout": readout_name(r),
                "improvement": improvement(&reference, &kicked).ok(),
                "min_delta_b_reference": reference.iter().map(|p| p.delta_b).filter(|d| d.is_finite()).reduce(f64::min),
                "min_delta_b_kicked": kicked.iter().map(|p| p.delta_b).filter(|d| d.is_finite()).reduce(f64::min),
            })
        })
        .collect();
    json!({ "effective_kick_strength": k_eff, "readouts": readouts })
}

/// Failure placeholder: NaN values and the error text.
pub(crate) fn failed(unit: &Unit, width: usize, err: &Error) -> Vec<RowOut> {
    unit.params
        .iter()
        .map(|_| RowOut { values: vec![f64::NAN; width], note: Some(err.to_string()) })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn crossing_interpolates() {
        let xs = [0.0, 1.0, 2.0, 3.0, 4.0];
        assert_eq!(last_upward_crossing(&xs, &[-1.0, 1.0, -1.0, -1.0, 3.0]), Some(3.25));
        assert_eq!(last_upward_crossing(&xs, &[1.0; 5]), None);
        assert_eq!(last_upward_crossing(&xs, &[1.0, 1.0, 1.0, 1.0, -1.0]), None);
    }

    #[test]
    fn windows_are_contiguous_runs() {
        let pts = [(1.0, 0.5), (2.0, 1.2), (3.0, 1.5), (4.0, 0.9), (5.0, 2.0)];
        assert_eq!(gain_windows(&pts), vec![[2.0, 3.0], [5.0, 5.0]]);
        assert!(gain_windows(&[(1.0, 0.3)]).is_empty());
    }

    #[test]
    fn peak_stop_rule() {
        let values = [1.0, 4.0, 9.0, 8.0, 5.0, 4.0, 3.0, 2.0, 1.0, 0.5];
        let mut i = 0;
        let series = until_peak_passed(100, || {
            i += 1;
            Ok((i, values[i - 1]))
        })
        .unwrap();
        // peak 9 at t = 3; stops at t = 6 with 4 < 4.5
        assert_eq!(series.len(), 6);
    }
}
