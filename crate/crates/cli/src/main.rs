use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use anyhow::{bail, Context};
use clap::{Parser, ValueEnum};
use lapeig::graph::{stats, InputFormat};
use lapeig::harness::prepare_laplacian;
use lapeig::{
    emit_report, emit_spectrum, fixtures, read_graph_file, run, DeflationBasis, EdgeList, ReportFormat, RunConfig,
    SigmaPolicy, SolverKind,
};

const EXIT_SOLVER_FAILED: u8 = 2;
const EXIT_INPUT: u8 = 3;

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Edgelist,
    Mtx,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum SolverArg {
    Dacg,
    Jd,
    Irlm,
    All,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ReportArg {
    Table,
    Csv,
}

/// Built-in test graph, `kind:size`.
#[derive(Clone, Debug)]
enum Fixture {
    Path(usize),
    Cycle(usize),
    Complete(usize),
    Star(usize),
    Grid(usize, usize),
    Random(usize),
    Geometric(usize),
    Clustered(usize),
}

impl FromStr for Fixture {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (kind, size) = s.split_once(':').ok_or("expected kind:size, e.g. grid:20x30 or random:1000")?;
        let num = |t: &str| t.parse::<usize>().map_err(|_| format!("bad size {t:?}"));
        Ok(match kind {
            "path" => Fixture::Path(num(size)?),
            "cycle" => Fixture::Cycle(num(size)?),
            "complete" => Fixture::Complete(num(size)?),
            "star" => Fixture::Star(num(size)?),
            "grid" => {
                let (r, c) = size.split_once('x').ok_or("grid size is RxC")?;
                Fixture::Grid(num(r)?, num(c)?)
            }
            "random" => Fixture::Random(num(size)?),
            "rgg" => Fixture::Geometric(num(size)?),
            "clustered" => Fixture::Clustered(num(size)?),
            _ => {
                return Err(format!(
                    "unknown fixture {kind:?}; try path, cycle, complete, star, grid, random, rgg, clustered"
                ))
            }
        })
    }
}

impl Fixture {
    fn build(&self, seed: u64) -> anyhow::Result<EdgeList> {
        let min = |n: usize, m: usize| if n < m { bail!("fixture needs at least {m} nodes") } else { Ok(()) };
        Ok(match *self {
            Fixture::Path(n) => {
                min(n, 2)?;
                fixtures::path(n)
            }
            Fixture::Cycle(n) => {
                min(n, 3)?;
                fixtures::cycle(n)
            }
            Fixture::Complete(n) => {
                min(n, 2)?;
                fixtures::complete(n)
            }
            Fixture::Star(n) => {
                min(n, 2)?;
                fixtures::star(n)
            }
            Fixture::Grid(r, c) => {
                min(r * c, 2)?;
                fixtures::grid(r, c)
            }
            Fixture::Random(n) => {
                min(n, 2)?;
                fixtures::random_connected(n, 6.0, seed)
            }
            Fixture::Geometric(n) => {
                min(n, 2)?;
                fixtures::random_geometric(n, (8.0 / (std::f64::consts::PI * n as f64)).sqrt(), seed)
            }
            Fixture::Clustered(n) => {
                min(n, 2)?;
                fixtures::clustered(n, seed)
            }
        })
    }
}

/// Smallest eigenpairs of a graph Laplacian with DACG, Jacobi-Davidson and
/// inverse Lanczos, reporting matrix-vector products and timings.
#[derive(Debug, Parser)]
#[command(name = "lapeig", version)]
struct Cli {
    /// Graph file: an edge list (`n` on the first line, then `i j [w]`) or Matrix Market.
    #[arg(long, required_unless_present = "fixture", conflicts_with = "fixture")]
    input: Option<PathBuf>,
    /// Built-in graph instead of a file, e.g. `grid:40x40`, `random:2000`, `rgg:5000`, `clustered:1000`.
    #[arg(long)]
    fixture: Option<Fixture>,
    /// Input format; by default `.mtx` files are Matrix Market and everything else an edge list.
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Merge repeated (directed) edges instead of rejecting them.
    #[arg(long)]
    symmetrize: bool,
    #[arg(long, value_enum, default_value = "all")]
    solver: SolverArg,
    /// Number of positive eigenpairs.
    #[arg(long, default_value_t = 5)]
    neig: usize,
    /// Relative residual tolerance.
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    /// Inner PCG tolerance for JD and IRLM (defaults: 1e-2 for JD, tol/100 for IRLM).
    #[arg(long)]
    pcg_tol: Option<f64>,
    /// JD inner iteration cap.
    #[arg(long, default_value_t = 20)]
    itmax_inner: usize,
    /// JD search space size after a restart.
    #[arg(long, default_value_t = 5)]
    mmin: usize,
    /// JD maximal search space size.
    #[arg(long, default_value_t = 10)]
    mmax: usize,
    /// IRLM Krylov basis size; chosen from `neig` by default.
    #[arg(long)]
    ncv: Option<usize>,
    /// Shift policy for shifted pseudoinverse approximations.
    #[arg(long, default_value = "midpoint", value_parser = SigmaPolicy::from_str)]
    sigma: SigmaPolicy,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, value_enum, default_value = "table")]
    report: ReportArg,
    /// Write `j  lambda_j / lambda_2` for the computed eigenvalues to this file.
    #[arg(long)]
    emit_spectrum: Option<PathBuf>,
    /// Solve on the largest connected component of a disconnected graph.
    #[arg(long)]
    allow_disconnected: bool,
    /// Run the solvers concurrently.
    #[arg(long)]
    parallel: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_SOLVER_FAILED),
        Err(Failure::Input(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_INPUT)
        }
        Err(Failure::Other(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_SOLVER_FAILED)
        }
    }
}

enum Failure {
    Input(anyhow::Error),
    Other(anyhow::Error),
}

fn load(cli: &Cli) -> anyhow::Result<EdgeList> {
    if let Some(f) = &cli.fixture {
        return f.build(cli.seed);
    }
    let path = cli.input.as_ref().expect("clap enforces input or fixture");
    let format = match cli.format {
        Some(Format::Edgelist) => InputFormat::EdgeList,
        Some(Format::Mtx) => InputFormat::MatrixMarket,
        None => InputFormat::from_path(path),
    };
    read_graph_file(path, format, cli.symmetrize).with_context(|| format!("reading {}", path.display()))
}

fn execute(cli: &Cli) -> Result<bool, Failure> {
    let g = load(cli).map_err(Failure::Input)?;
    let s = stats(&g);
    eprintln!("graph: n = {}, nnz = {}, anzr = {:.2}, components = {}", s.n, s.nnz, s.anzr, s.components);
    let (a, map) = prepare_laplacian(&g, cli.allow_disconnected).map_err(|e| Failure::Input(e.into()))?;
    if map.is_some() {
        eprintln!("using the largest component: n = {}", a.n());
    }

    let solvers = match cli.solver {
        SolverArg::Dacg => vec![SolverKind::Dacg],
        SolverArg::Jd => vec![SolverKind::Jd],
        SolverArg::Irlm => vec![SolverKind::Irlm],
        SolverArg::All => SolverKind::ALL.to_vec(),
    };
    let cfg = RunConfig {
        solvers,
        neig: cli.neig,
        delta: cli.tol,
        delta_pcg: cli.pcg_tol,
        itmax_inner: cli.itmax_inner,
        m_min: cli.mmin,
        m_max: cli.mmax,
        ncv: cli.ncv,
        sigma: cli.sigma,
        seed: cli.seed,
        parallel: cli.parallel,
        ..RunConfig::default()
    };
    if !(cfg.delta > 0.0 && cfg.delta < 1.0) {
        return Err(Failure::Input(anyhow::anyhow!("--tol must lie in (0, 1)")));
    }
    if cfg.m_min == 0 || cfg.m_max <= cfg.m_min {
        return Err(Failure::Input(anyhow::anyhow!("need 0 < --mmin < --mmax")));
    }
    let outcome = match run(&a, &DeflationBasis::kernel(a.n()), &cfg) {
        Ok(o) => o,
        Err(e @ lapeig::Error::InvalidArgument(_)) => return Err(Failure::Input(e.into())),
        Err(e) => return Err(Failure::Other(e.into())),
    };
    eprintln!("IC(0) factorization: {:.3} s, shift {:e}", outcome.factor_seconds, outcome.ic0_shift_used);
    for r in &outcome.runs {
        if let Some(note) = &r.report.note {
            eprintln!("{}: {note}", r.report.solver);
        }
    }
    for d in &outcome.disagreements {
        eprintln!("warning: {d}");
    }

    let format = match cli.report {
        ReportArg::Table => ReportFormat::Table,
        ReportArg::Csv => ReportFormat::Csv,
    };
    let stdout = io::stdout();
    let mut out = BufWriter::new(stdout.lock());
    emit_report(&outcome.reports(), format, &mut out).map_err(|e| Failure::Other(e.into()))?;
    out.flush().map_err(|e| Failure::Other(e.into()))?;

    if let Some(path) = &cli.emit_spectrum {
        let values = outcome
            .runs
            .iter()
            .find(|r| r.report.converged)
            .map(|r| r.report.eigenvalues.clone())
            .ok_or_else(|| Failure::Other(anyhow::anyhow!("no converged solver to take the spectrum from")))?;
        let file =
            File::create(path).with_context(|| format!("creating {}", path.display())).map_err(Failure::Input)?;
        emit_spectrum(&values, BufWriter::new(file)).map_err(|e| Failure::Other(e.into()))?;
    }
    Ok(outcome.all_converged())
}
