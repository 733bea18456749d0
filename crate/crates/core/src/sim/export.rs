//! Ensemble persistence: CSV (`t_s, z_m_trace0, ...`) or raw little-endian
//! `f64` in sample-major order with a JSON sidecar holding the metadata.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{EnsembleMeta, TrajectoryEnsemble};
use crate::error::{Error, Result};

pub const BINARY_FORMAT: &str = "f64le-row-major";
pub const CSV_FORMAT: &str = "csv";

/// Authoritative metadata record written next to the ensemble data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSidecar {
    pub format: String,
    /// Data file name, relative to the sidecar.
    pub data_file: String,
    /// Momentum data file (same layout), when recorded.
    pub momentum_file: Option<String>,
    /// Rows are samples, columns are traces.
    pub layout: String,
    pub dt_s: f64,
    pub n_traces: usize,
    pub n_samples: usize,
    pub seeds: Vec<u64>,
    pub meta: EnsembleMeta,
    /// Detection noise already added to the traces, m/√Hz.
    pub measurement_floor_m_rthz: f64,
    /// Snapshot of the experiment configuration that produced the data.
    pub config: Option<serde_json::Value>,
}

fn sidecar_for(ens: &TrajectoryEnsemble, format: &str, data_file: String, momentum_file: Option<String>) -> EnsembleSidecar {
    EnsembleSidecar {
        format: format.to_string(),
        data_file,
        momentum_file,
        layout: "rows=samples,cols=traces".into(),
        dt_s: ens.dt,
        n_traces: ens.n_traces(),
        n_samples: ens.n_samples(),
        seeds: ens.seeds.clone(),
        meta: ens.meta.clone(),
        measurement_floor_m_rthz: 0.0,
        config: None,
    }
}

fn write_f64_rows(path: &Path, columns: &[Vec<f64>], n_samples: usize) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for k in 0..n_samples {
        for col in columns {
            w.write_all(&col[k].to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes `<stem>.bin` (+ `<stem>.momentum.bin`) and `<stem>.json` into `dir`
/// and returns the sidecar path.
pub fn write_ensemble_binary(
    ens: &TrajectoryEnsemble,
    dir: &Path,
    stem: &str,
    measurement_floor: f64,
    config: Option<serde_json::Value>,
) -> Result<PathBuf> {
    let data_file = format!("{stem}.bin");
    write_f64_rows(&dir.join(&data_file), &ens.traces, ens.n_samples())?;
    let momentum_file = match &ens.momenta {
        Some(m) => {
            let name = format!("{stem}.momentum.bin");
            write_f64_rows(&dir.join(&name), m, ens.n_samples())?;
            Some(name)
        }
        None => None,
    };
    let mut sidecar = sidecar_for(ens, BINARY_FORMAT, data_file, momentum_file);
    sidecar.measurement_floor_m_rthz = measurement_floor;
    sidecar.config = config;
    let path = dir.join(format!("{stem}.json"));
    std::fs::write(&path, serde_json::to_string_pretty(&sidecar)?)?;
    Ok(path)
}

/// Writes `<stem>.csv` with a `t_s` column and one `z_m_traceN` column per
/// trace, plus the JSON sidecar.
pub fn write_ensemble_csv(
    ens: &TrajectoryEnsemble,
    dir: &Path,
    stem: &str,
    measurement_floor: f64,
    config: Option<serde_json::Value>,
) -> Result<PathBuf> {
    let data_file = format!("{stem}.csv");
    let mut w = csv::Writer::from_path(dir.join(&data_file))?;
    let mut header = vec!["t_s".to_string()];
    header.extend((0..ens.n_traces()).map(|i| format!("z_m_trace{i}")));
    w.write_record(&header)?;
    let mut row = Vec::with_capacity(ens.n_traces() + 1);
    for k in 0..ens.n_samples() {
        row.clear();
        row.push(format!("{:e}", k as f64 * ens.dt));
        row.extend(ens.traces.iter().map(|t| format!("{:e}", t[k])));
        w.write_record(&row)?;
    }
    w.flush()?;
    let mut sidecar = sidecar_for(ens, CSV_FORMAT, data_file, None);
    sidecar.measurement_floor_m_rthz = measurement_floor;
    sidecar.config = config;
    let path = dir.join(format!("{stem}.json"));
    std::fs::write(&path, serde_json::to_string_pretty(&sidecar)?)?;
    Ok(path)
}

fn read_f64_rows(path: &Path, n_traces: usize, n_samples: usize) -> Result<Vec<Vec<f64>>> {
    let mut bytes = Vec::new();
    BufReader::new(File::open(path)?).read_to_end(&mut bytes)?;
    let expected = n_traces * n_samples * 8;
    if bytes.len() != expected {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            message: format!("expected {expected} bytes, found {}", bytes.len()),
        });
    }
    let mut cols = vec![Vec::with_capacity(n_samples); n_traces];
    for (i, chunk) in bytes.chunks_exact(8).enumerate() {
        let v = f64::from_le_bytes(chunk.try_into().expect("8-byte chunk"));
        cols[i % n_traces].push(v);
    }
    Ok(cols)
}

/// Loads an ensemble from its JSON sidecar.
pub fn read_ensemble(sidecar_path: &Path) -> Result<(TrajectoryEnsemble, EnsembleSidecar)> {
    let text = std::fs::read_to_string(sidecar_path)?;
    let sidecar: EnsembleSidecar = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: sidecar_path.to_path_buf(),
        message: e.to_string(),
    })?;
    let dir = sidecar_path.parent().unwrap_or(Path::new("."));
    let (traces, momenta) = match sidecar.format.as_str() {
        BINARY_FORMAT => {
            let traces = read_f64_rows(&dir.join(&sidecar.data_file), sidecar.n_traces, sidecar.n_samples)?;
            let momenta = match &sidecar.momentum_file {
                Some(f) => Some(read_f64_rows(&dir.join(f), sidecar.n_traces, sidecar.n_samples)?),
                None => None,
            };
            (traces, momenta)
        }
        CSV_FORMAT => {
            let (_, cols) = read_csv_columns(&dir.join(&sidecar.data_file))?;
            (cols, None)
        }
        other => {
            return Err(Error::Parse {
                path: sidecar_path.to_path_buf(),
                message: format!("unknown ensemble format {other:?}"),
            })
        }
    };
    if traces.len() != sidecar.n_traces || traces.iter().any(|t| t.len() != sidecar.n_samples) {
        return Err(Error::Parse {
            path: sidecar_path.to_path_buf(),
            message: "data shape does not match the sidecar".into(),
        });
    }
    let ens = TrajectoryEnsemble {
        dt: sidecar.dt_s,
        traces,
        momenta,
        seeds: sidecar.seeds.clone(),
        meta: sidecar.meta.clone(),
    };
    Ok((ens, sidecar))
}

/// Reads a CSV whose first column is time and the remaining columns are
/// traces. Returns `(times, columns)`.
fn read_csv_columns(path: &Path) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let mut rdr = csv::Reader::from_path(path)?;
    let n_cols = rdr.headers()?.len();
    if n_cols < 2 {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            message: "expected a time column and at least one trace column".into(),
        });
    }
    let mut times = Vec::new();
    let mut cols = vec![Vec::new(); n_cols - 1];
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let parse = |i: usize| -> Result<f64> {
            rec.get(i)
                .and_then(|s| s.trim().parse::<f64>().ok())
                .ok_or_else(|| Error::Parse {
                    path: path.to_path_buf(),
                    message: format!("row {}: column {i} is not a number", line + 2),
                })
        };
        times.push(parse(0)?);
        for (j, col) in cols.iter_mut().enumerate() {
            col.push(parse(j + 1)?);
        }
    }
    Ok((times, cols))
}

/// Reads a single trace: `(dt, z)` from the first data column of a CSV with a
/// leading `t_s` column.
pub fn read_trace_csv(path: &Path) -> Result<(f64, Vec<f64>)> {
    let (times, cols) = read_csv_columns(path)?;
    if times.len() < 2 {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            message: "need at least two samples".into(),
        });
    }
    let dt = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            message: "time column must be increasing".into(),
        });
    }
    Ok((dt, cols.into_iter().next().unwrap_or_default()))
}
