use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;

use super::kinds::{RowOut, Schema};

/// Crate version stamped on every row.
pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Values are kept as text so NaN and infinities survive JSON.
#[derive(Serialize, Deserialize)]
struct CheckpointRow {
    values: Vec<String>,
    note: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct CheckpointLine {
    hash: String,
    unit: usize,
    rows: Vec<CheckpointRow>,
}

pub(crate) struct Checkpoint {
    file: File,
    hash: String,
}

impl Checkpoint {
    pub fn append(path: &Path, hash: &str) -> Result<Self> {
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self { file, hash: hash.to_string() })
    }

    pub fn record(&mut self, unit: usize, rows: &[RowOut]) -> Result<()> {
        let line = CheckpointLine {
            hash: self.hash.clone(),
            unit,
            rows: rows
                .iter()
                .map(|r| CheckpointRow {
                    values: r.values.iter().map(|v| v.to_string()).collect(),
                    note: r.note.clone(),
                })
                .collect(),
        };
        writeln!(self.file, "{}", serde_json::to_string(&line)?)?;
        self.file.flush()?;
        Ok(())
    }
}

/// Completed units recorded under `hash`. Lines from another config, torn
/// final lines and units with the wrong shape are skipped.
pub(crate) fn load_checkpoint(path: &Path, hash: &str, shape: &[usize], width: usize) -> Result<BTreeMap<usize, Vec<RowOut>>> {
    let mut done = BTreeMap::new();
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(done),
        Err(e) => return Err(e.into()),
    };
    for line in BufReader::new(file).lines() {
        let line = line?;
        let Ok(entry) = serde_json::from_str::<CheckpointLine>(&line) else {
            log::warn!("skipping unreadable checkpoint line");
            continue;
        };
        if entry.hash != hash {
            continue;
        }
        if shape.get(entry.unit) != Some(&entry.rows.len()) {
            continue;
        }
        let rows: Option<Vec<RowOut>> = entry
            .rows
            .into_iter()
            .map(|r| {
                let values: Option<Vec<f64>> = r.values.iter().map(|v| v.parse().ok()).collect();
                values.filter(|v| v.len() == width).map(|values| RowOut { values, note: r.note })
            })
            .collect();
        if let Some(rows) = rows {
            done.insert(entry.unit, rows);
        }
    }
    Ok(done)
}

/// Writes the table through a temporary file so a crash never leaves a
/// truncated CSV behind.
pub(crate) fn write_csv(path: &Path, schema: &Schema, rows: &[(Vec<f64>, RowOut)], hash: &str) -> Result<()> {
    let tmp = path.with_extension("csv.tmp");
    {
        let mut w = csv::Writer::from_path(&tmp)?;
        let mut header = vec!["grid_index".to_string()];
        header.extend(schema.params.iter().cloned());
        header.extend(schema.values.iter().cloned());
        header.extend(["status", "code_version", "config_hash"].map(String::from));
        w.write_record(&header)?;
        for (index, (params, out)) in rows.iter().enumerate() {
            let mut record = vec![index.to_string()];
            record.extend(params.iter().map(|v| v.to_string()));
            record.extend(out.values.iter().map(|v| v.to_string()));
            record.push(out.note.clone().unwrap_or_else(|| "ok".to_string()));
            record.push(CODE_VERSION.to_string());
            record.push(hash.to_string());
            w.write_record(&record)?;
        }
        w.flush()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}
