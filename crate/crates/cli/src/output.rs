//! CSV tables and sidecar metadata.

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde_json::{json, Value};

use crate::error::CliError;
use crate::experiments::{Cell, ResultRecord, Table};

/// Seventeen significant digits, enough to round-trip any f64.
pub fn format_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "NaN".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn render(cell: &Cell) -> String {
    match cell {
        Cell::Num(v) => format_float(*v),
        Cell::Int(i) => i.to_string(),
        Cell::Text(s) => s.clone(),
        Cell::Empty => String::new(),
    }
}

/// Writes one table, replacing any existing file.
pub fn emit_csv(table: &Table, path: &Path) -> Result<(), CliError> {
    let io = |e: csv::Error| CliError::io(format!("writing {}", path.display()), e.into());
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    w.write_record(&table.columns).map_err(io)?;
    for row in &table.rows {
        if row.len() != table.columns.len() {
            return Err(CliError::Config(vec![format!(
                "row has {} cells but the header has {} columns",
                row.len(),
                table.columns.len()
            )]));
        }
        w.write_record(row.iter().map(render)).map_err(io)?;
    }
    w.flush().map_err(|e| CliError::io(format!("flushing {}", path.display()), e))
}

pub fn table_path(dir: &Path, scenario: &str, table: &Table) -> PathBuf {
    match &table.suffix {
        Some(s) => dir.join(format!("{scenario}_{s}.csv")),
        None => dir.join(format!("{scenario}.csv")),
    }
}

pub fn metadata(record: &ResultRecord, wall: Duration) -> Value {
    let timestamp = std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64());
    json!({
        "scenario": record.scenario,
        "experiment": record.experiment,
        "version": env!("CARGO_PKG_VERSION"),
        "timestamp_unix": timestamp,
        "wall_time_s": wall.as_secs_f64(),
        "tolerances": record.tolerances,
        "summary": record.summary,
        "tables": record.tables.iter().map(|t| json!({
            "suffix": t.suffix,
            "columns": t.columns,
            "rows": t.rows.len(),
        })).collect::<Vec<_>>(),
    })
}

/// Writes every table plus `<scenario>.meta.json` into `dir`; returns the written paths.
pub fn write_record(record: &ResultRecord, dir: &Path, wall: Duration) -> Result<Vec<PathBuf>, CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(format!("creating {}", dir.display()), e))?;
    let mut paths = Vec::with_capacity(record.tables.len() + 1);
    for table in &record.tables {
        let path = table_path(dir, &record.scenario, table);
        emit_csv(table, &path)?;
        paths.push(path);
    }
    let meta = dir.join(format!("{}.meta.json", record.scenario));
    let text = serde_json::to_string_pretty(&metadata(record, wall)).expect("metadata is plain JSON");
    std::fs::write(&meta, text + "\n").map_err(|e| CliError::io(format!("writing {}", meta.display()), e))?;
    paths.push(meta);
    Ok(paths)
}
