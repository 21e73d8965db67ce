//! Metrics CSV: one row per evaluation.
//!
//! Columns, in order: `step,success,return,ep_len,noise_scale,dgn_nll,kl,wall_s`.
//! Optional columns are left empty when they do not apply (non-DGN methods
//! have no noise scale or fit loss, `kl` needs a BC reference, `wall_s` is
//! only filled when wall-clock recording is switched on). Reals are written
//! in shortest round-trip form.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const HEADER: &str = "step,success,return,ep_len,noise_scale,dgn_nll,kl,wall_s";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub step: usize,
    pub success: f64,
    #[serde(rename = "return")]
    pub mean_return: f64,
    pub ep_len: f64,
    pub noise_scale: Option<f64>,
    pub dgn_nll: Option<f64>,
    pub kl: Option<f64>,
    pub wall_s: Option<f64>,
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line: e.position().map_or(0, |p| p.line() as usize),
        msg: e.to_string(),
    }
}

pub fn to_csv(rows: &[MetricsRow]) -> String {
    let mut w = csv::WriterBuilder::new().has_headers(true).from_writer(Vec::new());
    for r in rows {
        w.serialize(r).expect("in-memory csv write");
    }
    if rows.is_empty() {
        return format!("{HEADER}\n");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv flush")).expect("csv is utf-8")
}

pub fn write_csv(path: &Path, rows: &[MetricsRow]) -> Result<()> {
    std::fs::write(path, to_csv(rows)).map_err(|e| Error::io(path, e))
}

pub fn read_csv(path: &Path) -> Result<Vec<MetricsRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let header = r.headers().map_err(|e| csv_err(path, e))?.clone();
    if header.iter().collect::<Vec<_>>().join(",") != HEADER {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            msg: format!("expected header `{HEADER}`"),
        });
    }
    r.deserialize()
        .map(|row| row.map_err(|e| csv_err(path, e)))
        .collect()
}

/// First evaluated step whose success rate reaches `threshold`.
pub fn first_step_reaching(rows: &[MetricsRow], threshold: f64) -> Option<usize> {
    rows.iter().find(|r| r.success >= threshold).map(|r| r.step)
}
