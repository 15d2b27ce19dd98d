//! Path CSV files, metadata sidecars and JSON helpers.
//!
//! Floats are written with 17 significant digits (`{:.16e}`), which
//! round-trips every `f64` exactly.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fbm::{Generator, Provenance, SamplePath, TimeGrid};

/// 17-significant-digit decimal representation.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Sidecar describing how a path CSV was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathMetadata {
    pub label: String,
    pub t0: f64,
    pub dt: f64,
    pub n_steps: usize,
    #[serde(rename = "H")]
    pub hurst: Option<f64>,
    pub seed: Option<u64>,
    pub generator: Generator,
}

impl PathMetadata {
    pub fn of(path: &SamplePath) -> Self {
        let g = path.grid();
        let p = path.provenance();
        PathMetadata {
            label: path.label().to_owned(),
            t0: g.t0,
            dt: g.dt,
            n_steps: g.n_steps,
            hurst: p.hurst,
            seed: p.seed,
            generator: p.generator,
        }
    }
}

fn create(file: &Path) -> Result<BufWriter<File>> {
    File::create(file)
        .map(BufWriter::new)
        .map_err(|e| Error::io(file, e))
}

/// Writes `t,value` rows, one per grid point.
pub fn write_path_csv(path: &SamplePath, file: &Path) -> Result<()> {
    let mut w = create(file)?;
    let mut body = String::with_capacity(path.grid().len() * 48 + 8);
    body.push_str("t,value\n");
    for (t, v) in path.grid().times().zip(path.values()) {
        body.push_str(&format_f64(t));
        body.push(',');
        body.push_str(&format_f64(*v));
        body.push('\n');
    }
    w.write_all(body.as_bytes())
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(file, e))
}

/// Reads a `t,value` CSV; the time column must be a uniform grid.
///
/// If a metadata sidecar is passed, it supplies the exact grid, label and provenance.
pub fn read_path_csv(file: &Path, metadata: Option<&PathMetadata>) -> Result<SamplePath> {
    let mut reader = csv::Reader::from_path(file).map_err(|e| Error::csv(file, e))?;
    let headers = reader.headers().map_err(|e| Error::csv(file, e))?.clone();
    if headers.len() != 2 || &headers[0] != "t" || &headers[1] != "value" {
        return Err(Error::Config(format!(
            "{}: expected header `t,value`",
            file.display()
        )));
    }
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::csv(file, e))?;
        let parse = |s: &str| {
            s.trim().parse::<f64>().map_err(|_| {
                Error::Config(format!(
                    "{}: row {}: bad number `{s}`",
                    file.display(),
                    row + 1
                ))
            })
        };
        times.push(parse(&record[0])?);
        values.push(parse(&record[1])?);
    }
    if times.len() < 2 {
        return Err(Error::Config(format!(
            "{}: a path needs at least two rows",
            file.display()
        )));
    }
    let (grid, label, provenance) = match metadata {
        Some(m) => (
            TimeGrid::new(m.t0, m.dt, m.n_steps)?,
            m.label.clone(),
            Provenance {
                hurst: m.hurst,
                seed: m.seed,
                generator: m.generator,
            },
        ),
        None => {
            let n = times.len() - 1;
            let dt = (times[n] - times[0]) / n as f64;
            (
                TimeGrid::new(times[0], dt, n)?,
                "X".to_owned(),
                Provenance {
                    hurst: None,
                    seed: None,
                    generator: Generator::External,
                },
            )
        }
    };
    let tol = 1e-9 * grid.dt.max(grid.end().abs() * 1e-3);
    if let Some(i) = (0..times.len()).find(|&i| (times[i] - grid.time(i)).abs() > tol) {
        return Err(Error::Config(format!(
            "{}: time column is not uniform at row {}",
            file.display(),
            i + 1
        )));
    }
    SamplePath::new(grid, values, label, provenance)
}

/// Writes pretty JSON.
pub fn write_json<T: Serialize>(value: &T, file: &Path) -> Result<()> {
    let mut w = create(file)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Error::json(file, e))?;
    w.write_all(b"\n")
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(file, e))
}

pub fn read_json<T: DeserializeOwned>(file: &Path) -> Result<T> {
    let text = std::fs::read_to_string(file).map_err(|e| Error::io(file, e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(file, e))
}

/// Writes the path CSV and its `<stem>.json` sidecar next to it.
pub fn write_path_with_metadata(path: &SamplePath, csv_file: &Path) -> Result<()> {
    write_path_csv(path, csv_file)?;
    write_json(&PathMetadata::of(path), &csv_file.with_extension("json"))
}
