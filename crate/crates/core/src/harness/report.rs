use std::io::Write;

use serde::Serialize;

use super::scaling::{Method, ScalingReport};
use crate::error::{Error, Result};

pub const REPORT_VERSION: u32 = 1;

#[derive(Serialize)]
struct CellRow {
    method: Method,
    n_qubits: usize,
    shots: usize,
    repeat: usize,
    subsample_seed: u64,
    train_seed: Option<u64>,
    f_c: f64,
    f_c_exact: f64,
    f_q: Option<f64>,
    f_q_ideal: Option<f64>,
    epochs: Option<usize>,
    best_epoch: Option<usize>,
    wall_time_s: Option<f64>,
}

#[derive(Serialize)]
struct SeriesRow {
    method: Method,
    n_qubits: usize,
    shots: usize,
    mean: f64,
    std: f64,
    ns_star: Option<usize>,
    censored: bool,
}

fn csv_err(e: csv::Error) -> Error {
    Error::Validation(format!("csv: {e}"))
}

/// One row per `(method, N, N_s, repeat)` cell; empty fields for absent values.
pub fn write_cells_csv(report: &ScalingReport, w: impl Write) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for c in &report.cells {
        out.serialize(CellRow {
            method: c.method,
            n_qubits: c.n_qubits,
            shots: c.shots,
            repeat: c.repeat,
            subsample_seed: c.subsample_seed,
            train_seed: c.train_seed,
            f_c: c.f_c,
            f_c_exact: c.f_c_exact,
            f_q: c.state.as_ref().map(|s| s.f_q),
            f_q_ideal: c.state.as_ref().map(|s| s.f_q_ideal),
            epochs: c.epochs,
            best_epoch: c.best_epoch,
            wall_time_s: c.wall_time_s,
        })
        .map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

/// Mean curve per method and qubit count, with `N_s*` repeated on every row.
pub fn write_series_csv(report: &ScalingReport, w: impl Write) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for s in &report.series {
        for (method, ns) in [(Method::Rnn, &s.rnn), (Method::Baseline, &s.baseline)] {
            let Some(ns) = ns else { continue };
            for p in &ns.curve {
                out.serialize(SeriesRow {
                    method,
                    n_qubits: s.n_qubits,
                    shots: p.shots,
                    mean: p.mean,
                    std: p.std,
                    ns_star: ns.value,
                    censored: ns.censored,
                })
                .map_err(csv_err)?;
            }
        }
    }
    out.flush()?;
    Ok(())
}
