//! JSON reports. Every report carries a top-level `passed` flag that
//! `--strict` turns into the exit code.

use std::fs;
use std::io::Write;
use std::path::Path;

use nlqd_core::entanglement::{BipartiteState, CpReport, CpSampleReport};
use nlqd_core::export::CsvAudit;
use nlqd_core::generators::{Classification, ZeroMeanReport};
use nlqd_core::measurement::CorrelationReport;
use nlqd_core::{DensityMatrix, Trajectory};
use serde::Serialize;

use crate::error::CliError;
use crate::scenario::Kind;

/// Invariant limits applied to every recorded step of a run.
pub const TRACE_LIMIT: f64 = 1e-9;
pub const EIGENVALUE_FLOOR: f64 = -1e-10;
/// Largest accepted gap between the two correlation routes.
pub const ROUTE_GAP_LIMIT: f64 = 1e-6;

pub fn emit_json<T: Serialize>(output: Option<&Path>, report: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(report).expect("reports serialize");
    match output {
        Some(path) => fs::write(path, text + "\n").map_err(|e| CliError::io(path, e)),
        None => {
            let mut out = std::io::stdout().lock();
            writeln!(out, "{text}").map_err(|e| CliError::io("stdout", e))
        }
    }
}

#[derive(Serialize)]
pub struct FinalValues {
    pub t: f64,
    pub energy: f64,
    pub purity: f64,
    pub entropy: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mutual_info: Option<f64>,
}

#[derive(Serialize)]
pub struct TrajectoryReport {
    pub kind: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    pub rows: usize,
    pub max_trace_deviation: f64,
    pub min_eigenvalue: f64,
    pub max_norm_drift: f64,
    #[serde(rename = "final")]
    pub last: FinalValues,
    pub passed: bool,
}

pub fn trajectory(kind: Kind, traj: &Trajectory, output: Option<&Path>) -> TrajectoryReport {
    let m = traj.monitors.last().expect("trajectories are never empty");
    let max_trace_deviation = traj.max_trace_deviation();
    let min_eigenvalue = traj.min_eigenvalue();
    TrajectoryReport {
        kind: kind.name(),
        output: output.map(|p| p.display().to_string()),
        rows: traj.len(),
        max_trace_deviation,
        min_eigenvalue,
        max_norm_drift: traj.max_norm_drift,
        last: FinalValues {
            t: *traj.times.last().unwrap(),
            energy: m.energy,
            purity: m.purity,
            entropy: m.entropy,
            mutual_info: traj.bipartite.as_ref().and_then(|b| b.last()).map(|b| b.mutual_info),
        },
        passed: max_trace_deviation <= TRACE_LIMIT && min_eigenvalue >= EIGENVALUE_FLOOR,
    }
}

#[derive(Serialize)]
pub struct CorrelationOut {
    #[serde(flatten)]
    pub report: CorrelationReport,
    pub passed: bool,
}

pub fn correlation(report: CorrelationReport) -> CorrelationOut {
    CorrelationOut { passed: report.route_gap <= ROUTE_GAP_LIMIT, report }
}

#[derive(Serialize)]
pub struct Witness<'a, R: Serialize> {
    pub index: usize,
    pub state: &'a DensityMatrix,
    pub detail: R,
}

#[derive(Serialize)]
pub struct CpAuditOut<'a> {
    pub criterion: &'static str,
    pub samples: usize,
    pub failures: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness<'a, &'a CpSampleReport>>,
    pub worst_min_eigenvalue: f64,
    pub worst_local_h_residual: f64,
    pub worst_remote_k_residual: f64,
    pub per_sample: &'a [CpSampleReport],
    pub passed: bool,
}

pub fn cp_audit<'a>(audit: &'a CpReport, states: &'a [BipartiteState]) -> CpAuditOut<'a> {
    let s = &audit.samples;
    CpAuditOut {
        criterion: "cp_audit",
        samples: s.len(),
        failures: s.iter().filter(|r| !r.passed).count(),
        witness: audit.first_failure.map(|i| Witness { index: i, state: states[i].state(), detail: &s[i] }),
        worst_min_eigenvalue: s.iter().map(|r| r.min_eigenvalue).fold(f64::INFINITY, f64::min),
        worst_local_h_residual: s.iter().map(|r| r.local_h_residual).fold(0.0, f64::max),
        worst_remote_k_residual: s.iter().map(|r| r.remote_k_residual).fold(0.0, f64::max),
        per_sample: s,
        passed: audit.all_passed,
    }
}

#[derive(Serialize)]
pub struct ClassifyOut {
    pub criterion: &'static str,
    #[serde(flatten)]
    pub classification: Classification,
    /// False when a state violating the support condition was found.
    pub passed: bool,
}

pub fn classify(c: Classification) -> ClassifyOut {
    ClassifyOut { criterion: "classify", passed: !c.is_essential(), classification: c }
}

#[derive(Serialize)]
pub struct ZeroMeanOut<'a> {
    pub criterion: &'static str,
    pub samples: usize,
    pub max_residual: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness<'a, f64>>,
    pub passed: bool,
}

pub fn zero_mean<'a>(z: ZeroMeanReport, states: &'a [DensityMatrix]) -> ZeroMeanOut<'a> {
    let worst = z.residuals.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).map(|(i, &r)| (i, r));
    ZeroMeanOut {
        criterion: "zero_mean",
        samples: states.len(),
        max_residual: z.max_residual,
        witness: worst.filter(|_| !z.passed).map(|(i, r)| Witness { index: i, state: &states[i], detail: r }),
        passed: z.passed,
    }
}

#[derive(Serialize)]
pub struct VerifyOut<'a> {
    #[serde(flatten)]
    pub audit: &'a CsvAudit,
    pub passed: bool,
}

pub fn verify_report(audit: &CsvAudit) -> VerifyOut<'_> {
    VerifyOut { audit, passed: audit.ok() }
}
