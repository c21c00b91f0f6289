//! Trajectory CSV output and the matching audit reader.
//!
//! Columns: `t, trace, energy, purity, entropy, eig_1..eig_d`, then for
//! bipartite runs `entropy_H, entropy_K, entropy_total, mutual_info,
//! global_eig_1..global_eig_d`, then optionally the full state as
//! `rho_i_j_re, rho_i_j_im` pairs (1-based, row-major). Floats carry 17
//! significant digits so values round-trip exactly.

use std::io::{Read, Write};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, C64, CLIP_FLOOR};
use crate::propagation::Trajectory;
use crate::state::DensityMatrix;

const TRACE_TOL: f64 = 1e-12;

fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv_err(e: csv::Error) -> Error {
    Error::validation(format!("csv: {e}"))
}

pub fn header(traj: &Trajectory, dump_states: bool) -> Vec<String> {
    let d = traj.dim();
    let mut cols: Vec<String> = ["t", "trace", "energy", "purity", "entropy"].map(String::from).to_vec();
    cols.extend((1..=d).map(|i| format!("eig_{i}")));
    if traj.bipartite.is_some() {
        cols.extend(["entropy_H", "entropy_K", "entropy_total", "mutual_info"].map(String::from));
        cols.extend((1..=d).map(|i| format!("global_eig_{i}")));
    }
    if dump_states {
        for i in 1..=d {
            for j in 1..=d {
                cols.push(format!("rho_{i}_{j}_re"));
                cols.push(format!("rho_{i}_{j}_im"));
            }
        }
    }
    cols
}

pub fn write_csv<W: Write>(out: W, traj: &Trajectory, dump_states: bool) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header(traj, dump_states)).map_err(csv_err)?;
    for (k, m) in traj.monitors.iter().enumerate() {
        let mut row = vec![fmt(traj.times[k]), fmt(m.trace), fmt(m.energy), fmt(m.purity), fmt(m.entropy)];
        row.extend(m.eigenvalues.iter().copied().map(fmt));
        if let Some(bp) = &traj.bipartite {
            let b = &bp[k];
            row.extend([b.entropy_h, b.entropy_k, b.entropy_total, b.mutual_info].map(fmt));
            row.extend(m.eigenvalues.iter().copied().map(fmt));
        }
        if dump_states {
            for z in traj.states[k].matrix().transpose().iter() {
                row.push(fmt(z.re));
                row.push(fmt(z.im));
            }
        }
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::validation(format!("csv: {e}")))?;
    Ok(())
}

pub fn to_csv_string(traj: &Trajectory, dump_states: bool) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(&mut buf, traj, dump_states)?;
    Ok(String::from_utf8(buf).expect("csv output is ascii"))
}

#[derive(Debug, Clone, Serialize)]
pub struct RowFailure {
    /// 1-based data row.
    pub row: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct CsvAudit {
    pub rows: usize,
    /// Rows whose full state was present and rebuilt.
    pub states_checked: usize,
    pub failures: Vec<RowFailure>,
}

impl CsvAudit {
    pub fn ok(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Check every row against the density-matrix invariants. Full states are
/// rebuilt and validated when present; otherwise the trace and eigenvalue
/// columns are checked.
pub fn verify_csv<R: Read>(input: R) -> Result<CsvAudit> {
    let mut reader = csv::Reader::from_reader(input);
    let headers = reader.headers().map_err(csv_err)?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let trace_col = col("trace").ok_or_else(|| Error::validation("missing 'trace' column"))?;
    let eig_cols: Vec<usize> = (1..).map_while(|i| col(&format!("eig_{i}"))).collect();
    if eig_cols.is_empty() {
        return Err(Error::validation("missing eigenvalue columns"));
    }
    let d = eig_cols.len();
    let state_cols: Option<Vec<(usize, usize)>> = (0..d * d)
        .map(|k| {
            let (i, j) = (k / d + 1, k % d + 1);
            Some((col(&format!("rho_{i}_{j}_re"))?, col(&format!("rho_{i}_{j}_im"))?))
        })
        .collect();

    let mut audit = CsvAudit { rows: 0, states_checked: 0, failures: Vec::new() };
    for (idx, record) in reader.records().enumerate() {
        let record = record.map_err(csv_err)?;
        let row = idx + 1;
        audit.rows += 1;
        let num = |c: usize| -> Result<f64> {
            let s = record.get(c).ok_or_else(|| Error::validation(format!("row {row}: short record")))?;
            s.trim().parse().map_err(|_| Error::validation(format!("row {row}: bad number '{s}'")))
        };
        let mut fail = |reason: String| audit.failures.push(RowFailure { row, reason });

        let tr = num(trace_col)?;
        if (tr - 1.0).abs() > TRACE_TOL {
            fail(format!("trace {tr} deviates from 1"));
        }
        for &c in &eig_cols {
            let e = num(c)?;
            if e < CLIP_FLOOR {
                fail(format!("eigenvalue {e:e} below {CLIP_FLOOR:e}"));
            }
        }
        if let Some(cols) = &state_cols {
            let entries = cols
                .iter()
                .map(|&(re, im)| Ok(C64::new(num(re)?, num(im)?)))
                .collect::<Result<Vec<_>>>()?;
            if let Err(e) = DensityMatrix::new(ComplexMatrix::from_row_slice(d, d, &entries)) {
                fail(format!("state: {e}"));
            }
            audit.states_checked += 1;
        }
    }
    Ok(audit)
}
