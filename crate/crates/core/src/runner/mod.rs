//! Config-driven experiment runs with CSV output, a JSON sidecar and
//! per-unit checkpoints.
//!
//! A run expands its config into units (one grid point, or one curve for
//! kinds that share work along an axis), computes them on a worker pool and
//! hands finished units to a single writer thread that appends them to the
//! checkpoint. Rows are written in grid order once everything is done, so
//! the CSV does not depend on scheduling.

mod config;
mod grid;
mod kinds;
mod output;
mod presets;

pub use config::{
    DissipativeScan, Experiment, ExperimentConfig, Heatmap, JyFisher, LyapunovMapSpec, LyapunovSettings, PresetInfo,
    QfiScaling, ScanPoint, SerfRun,
};
pub use grid::Grid;
pub use kinds::{gain_windows, last_upward_crossing, schema, Schema};
pub use output::CODE_VERSION;
pub use presets::{preset, PRESET_NAMES};

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::mpsc;
use std::time::{SystemTime, UNIX_EPOCH};

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::exec::{map_collect, with_workers, Execution};

use kinds::{Finished, RowOut};
use output::{load_checkpoint, write_csv, Checkpoint};

/// Overrides the configured worker count.
pub const WORKERS_ENV: &str = "CHAOS_SENSOR_WORKERS";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RunOptions {
    pub exec: Execution,
    /// Reuse finished units from a checkpoint written under the same hash.
    pub resume: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { exec: Execution::Parallel, resume: true }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunReport {
    pub csv: PathBuf,
    pub sidecar: PathBuf,
    pub rows: usize,
    /// Rows whose status is not `ok`.
    pub flagged: usize,
    pub resumed_units: usize,
    pub summary: Value,
}

/// Worker count after applying the environment override.
pub fn effective_workers(configured: usize) -> usize {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => v.trim().parse().unwrap_or_else(|_| {
            log::warn!("ignoring {WORKERS_ENV}={v}: not a number");
            configured
        }),
        Err(_) => configured,
    }
}

pub fn run(config: &ExperimentConfig, options: RunOptions) -> Result<RunReport> {
    config.validate()?;
    let units = kinds::plan(&config.experiment)?;
    let schema = schema(&config.experiment);
    let width = schema.values.len();
    let hash = config.hash();

    if let Some(dir) = config.output.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let checkpoint_path = config.checkpoint_path();
    let shape: Vec<usize> = units.iter().map(|u| u.params.len()).collect();
    let mut done = if options.resume {
        load_checkpoint(&checkpoint_path, &hash, &shape, width)?
    } else {
        if checkpoint_path.exists() {
            std::fs::remove_file(&checkpoint_path)?;
        }
        BTreeMap::new()
    };
    let resumed_units = done.len();
    let todo: Vec<usize> = (0..units.len()).filter(|i| !done.contains_key(i)).collect();
    log::info!(
        "{}: {} units ({} from checkpoint), hash {}",
        config.experiment.kind(),
        units.len(),
        resumed_units,
        &hash[..12]
    );

    let mut checkpoint = Checkpoint::append(&checkpoint_path, &hash)?;
    let workers = effective_workers(config.workers);
    let exec = options.exec;
    let (tx, rx) = mpsc::channel::<(usize, Vec<RowOut>)>();
    let computed = std::thread::scope(|scope| -> Result<BTreeMap<usize, Vec<RowOut>>> {
        let writer = scope.spawn(move || -> Result<BTreeMap<usize, Vec<RowOut>>> {
            let mut out = BTreeMap::new();
            for (index, rows) in rx {
                checkpoint.record(index, &rows)?;
                out.insert(index, rows);
            }
            Ok(out)
        });
        with_workers(workers, || {
            map_collect(exec, &todo, |&index| {
                let unit = &units[index];
                let rows = match kinds::execute(&config.experiment, unit, config.seed, exec) {
                    Ok(rows) if rows.len() == unit.params.len() => rows,
                    Ok(rows) => {
                        let err = Error::DimensionMismatch { expected: unit.params.len(), got: rows.len() };
                        kinds::failed(unit, width, &err)
                    }
                    Err(err) => {
                        log::warn!("unit {index} failed: {err}");
                        kinds::failed(unit, width, &err)
                    }
                };
                // a closed channel means the writer failed; its error is reported below
                let _ = tx.send((index, rows));
            })
        });
        drop(tx);
        writer.join().expect("writer thread panicked")
    })?;
    done.extend(computed);

    let table: Vec<(Vec<f64>, RowOut)> = units
        .iter()
        .enumerate()
        .flat_map(|(i, unit)| unit.params.iter().cloned().zip(done.remove(&i).expect("every unit finished")))
        .collect();
    write_csv(&config.output, &schema, &table, &hash)?;

    let finished: Vec<Finished<'_>> = table.iter().map(|(p, r)| Finished { params: p, values: &r.values }).collect();
    let summary = kinds::summarize(&config.experiment, &finished);
    let flagged = table.iter().filter(|(_, r)| r.note.is_some()).count();
    let created = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let sidecar = json!({
        "config": config,
        "code_version": CODE_VERSION,
        "config_hash": hash,
        "created_unix": created,
        "columns": { "params": schema.params, "values": schema.values },
        "rows": table.len(),
        "flagged_rows": flagged,
        "summary": summary,
    });
    let sidecar_path = config.sidecar_path();
    std::fs::write(&sidecar_path, serde_json::to_string_pretty(&sidecar)? + "\n")?;
    std::fs::remove_file(&checkpoint_path)?;

    Ok(RunReport {
        csv: config.output.clone(),
        sidecar: sidecar_path,
        rows: table.len(),
        flagged,
        resumed_units,
        summary,
    })
}
