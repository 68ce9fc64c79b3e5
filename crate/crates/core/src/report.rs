//! Per-solver run reports and their CSV / table / spectrum renderings.

use std::fmt::Write as _;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Dacg,
    Jd,
    Irlm,
}

impl SolverKind {
    /// Report ordering.
    pub const ALL: [SolverKind; 3] = [SolverKind::Dacg, SolverKind::Jd, SolverKind::Irlm];

    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Dacg => "dacg",
            SolverKind::Jd => "jd",
            SolverKind::Irlm => "irlm",
        }
    }
}

impl std::fmt::Display for SolverKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dacg" => Ok(SolverKind::Dacg),
            "jd" => Ok(SolverKind::Jd),
            "irlm" => Ok(SolverKind::Irlm),
            other => Err(Error::InvalidArgument(format!("unknown solver {other:?}"))),
        }
    }
}

/// Cost counters and outcome of one solver run.
///
/// `mvp` counts every matrix-vector product, split as
/// `mvp = inner_its_total + aux_mvp`: products spent inside inner PCG solves
/// and all others (subspace expansion, residual checks, line searches).
#[derive(Clone, Debug, PartialEq)]
pub struct SolverReport {
    pub solver: SolverKind,
    pub neig: usize,
    pub delta: f64,
    pub mvp: u64,
    /// Inner linear systems solved; zero for DACG.
    pub outer_its: usize,
    pub inner_its_total: usize,
    pub aux_mvp: u64,
    pub wall_seconds: f64,
    pub converged: bool,
    pub per_pair_residuals: Vec<f64>,
    pub eigenvalues: Vec<f64>,
    /// Iterations spent on each eigenpair (outer iterations for JD,
    /// nonlinear CG iterations for DACG, empty for IRLM).
    pub pair_iterations: Vec<usize>,
    pub note: Option<String>,
}

impl SolverReport {
    pub fn new(solver: SolverKind, neig: usize, delta: f64) -> Self {
        Self {
            solver,
            neig,
            delta,
            mvp: 0,
            outer_its: 0,
            inner_its_total: 0,
            aux_mvp: 0,
            wall_seconds: 0.0,
            converged: false,
            per_pair_residuals: Vec::new(),
            eigenvalues: Vec::new(),
            pair_iterations: Vec::new(),
            note: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Table,
    Csv,
}

#[derive(Debug, PartialEq, Serialize, Deserialize)]
struct CsvRow {
    solver: SolverKind,
    neig: usize,
    delta: f64,
    mvp: u64,
    outer_its: usize,
    inner_its_total: usize,
    wall_seconds: f64,
    converged: bool,
}

fn ordered(reports: &[SolverReport]) -> Vec<&SolverReport> {
    let mut out: Vec<&SolverReport> = reports.iter().collect();
    out.sort_by_key(|r| r.solver);
    out
}

/// Renders reports as CSV or as a table laid out like the classic
/// DACG / JD / IRLM comparison tables (one line per `(neig, delta)`).
pub fn emit_report<W: Write>(reports: &[SolverReport], format: ReportFormat, out: W) -> Result<()> {
    if reports.is_empty() {
        return Err(Error::InvalidArgument("no reports to emit".into()));
    }
    match format {
        ReportFormat::Csv => emit_csv(reports, out),
        ReportFormat::Table => emit_table(reports, out),
    }
}

fn emit_csv<W: Write>(reports: &[SolverReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in ordered(reports) {
        w.serialize(CsvRow {
            solver: r.solver,
            neig: r.neig,
            delta: r.delta,
            mvp: r.mvp,
            outer_its: r.outer_its,
            inner_its_total: r.inner_its_total,
            wall_seconds: r.wall_seconds,
            converged: r.converged,
        })?;
    }
    w.flush()?;
    Ok(())
}

/// Reads back the CSV columns written by [`emit_report`]. Fields that the
/// CSV does not carry are left at their defaults.
pub fn parse_csv_report<R: Read>(input: R) -> Result<Vec<SolverReport>> {
    let mut rd = csv::Reader::from_reader(input);
    let mut out = Vec::new();
    for row in rd.deserialize() {
        let row: CsvRow = row?;
        let mut r = SolverReport::new(row.solver, row.neig, row.delta);
        r.mvp = row.mvp;
        r.outer_its = row.outer_its;
        r.inner_its_total = row.inner_its_total;
        r.wall_seconds = row.wall_seconds;
        r.converged = row.converged;
        out.push(r);
    }
    Ok(out)
}

fn emit_table<W: Write>(reports: &[SolverReport], mut out: W) -> Result<()> {
    let mut keys: Vec<(usize, f64)> = Vec::new();
    for r in reports {
        if !keys.iter().any(|&(n, d)| n == r.neig && d == r.delta) {
            keys.push((r.neig, r.delta));
        }
    }
    let mut s = String::new();
    let _ = writeln!(s, "{:>5} {:>8} | {:>17} | {:>27} | {:>27}", "", "", "DACG", "JD", "IRLM");
    let _ = writeln!(
        s,
        "{:>5} {:>8} | {:>7} {:>9} | {:>7} {:>9} {:>9} | {:>7} {:>9} {:>9}",
        "neig", "delta", "MVP", "CPU", "outer", "MVP", "CPU", "outer", "MVP", "CPU"
    );
    let _ = writeln!(s, "{}", "-".repeat(98));
    for (neig, delta) in keys {
        let _ = write!(s, "{neig:>5} {delta:>8.0e}");
        for kind in SolverKind::ALL {
            let r = reports.iter().find(|r| r.solver == kind && r.neig == neig && r.delta == delta);
            let mark = |r: &SolverReport| if r.converged { "" } else { "*" };
            match (kind, r) {
                (SolverKind::Dacg, Some(r)) => {
                    let _ = write!(s, " | {:>7} {:>8.3}{:1}", r.mvp, r.wall_seconds, mark(r));
                }
                (SolverKind::Dacg, None) => {
                    let _ = write!(s, " | {:>7} {:>9}", "-", "-");
                }
                (_, Some(r)) => {
                    let _ = write!(s, " | {:>7} {:>9} {:>8.3}{:1}", r.outer_its, r.mvp, r.wall_seconds, mark(r));
                }
                (_, None) => {
                    let _ = write!(s, " | {:>7} {:>9} {:>9}", "-", "-", "-");
                }
            }
        }
        s.push('\n');
    }
    if reports.iter().any(|r| !r.converged) {
        s.push_str("* not converged\n");
    }
    out.write_all(s.as_bytes())?;
    Ok(())
}

/// Two columns `j  lambda_j / lambda_2` for `j = 2, 3, ...`, as gnuplot input.
pub fn emit_spectrum<W: Write>(values: &[f64], mut out: W) -> Result<()> {
    let first = *values.first().ok_or_else(|| Error::InvalidArgument("empty spectrum".into()))?;
    if !(first > 0.0) {
        return Err(Error::InvalidArgument("spectrum must start with a positive eigenvalue".into()));
    }
    writeln!(out, "# j  lambda_j/lambda_2")?;
    for (k, v) in values.iter().enumerate() {
        writeln!(out, "{} {}", k + 2, v / first)?;
    }
    Ok(())
}
