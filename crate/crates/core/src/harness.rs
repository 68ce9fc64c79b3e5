//! Runs the solvers on one Laplacian with a shared preconditioner, then
//! re-verifies every returned pair with fresh products.

use std::time::Instant;

use crate::dacg::{dacg_smallest, DacgParams};
use crate::eigenpairs::EigenPairSet;
use crate::error::{Error, Result};
use crate::graph::{build_laplacian, connected_components, largest_component, CsrMatrix, EdgeList};
use crate::ic0::{ic0_factorize, Ic0Factor};
use crate::irlm::{irlm_smallest, IrlmParams};
use crate::jd::{jd_smallest, JdParams};
use crate::kernels::{axpy, norm, spmv, MvpCounter};
use crate::pcg::DeflationBasis;
use crate::report::{SolverKind, SolverReport};
use crate::spectral::{SigmaPolicy, DEFAULT_IC0_SHIFT};

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub solvers: Vec<SolverKind>,
    pub neig: usize,
    pub delta: f64,
    /// Inner tolerance for JD and IRLM. JD defaults to `1e-2`, IRLM to `delta / 100`.
    pub delta_pcg: Option<f64>,
    pub itmax_inner: usize,
    pub m_min: usize,
    pub m_max: usize,
    pub ncv: Option<usize>,
    pub sigma: SigmaPolicy,
    pub seed: u64,
    pub ic0_shift: f64,
    /// Run the solvers on separate threads.
    pub parallel: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            solvers: SolverKind::ALL.to_vec(),
            neig: 5,
            delta: 1e-6,
            delta_pcg: None,
            itmax_inner: 20,
            m_min: 5,
            m_max: 10,
            ncv: None,
            sigma: SigmaPolicy::Midpoint,
            seed: 42,
            ic0_shift: DEFAULT_IC0_SHIFT,
            parallel: false,
        }
    }
}

impl RunConfig {
    fn echo(&self, kind: SolverKind) -> String {
        let pcg = |d: f64| self.delta_pcg.unwrap_or(d);
        match kind {
            SolverKind::Dacg => format!("seed={} ic0_shift={:e}", self.seed, self.ic0_shift),
            SolverKind::Jd => format!(
                "seed={} ic0_shift={:e} delta_pcg={:e} itmax_inner={} m_min={} m_max={}",
                self.seed,
                self.ic0_shift,
                pcg(1e-2),
                self.itmax_inner,
                self.m_min,
                self.m_max
            ),
            SolverKind::Irlm => format!(
                "seed={} ic0_shift={:e} delta_pcg={:e} ncv={}",
                self.seed,
                self.ic0_shift,
                pcg(1e-2 * self.delta),
                self.ncv.map_or("auto".to_string(), |v| v.to_string())
            ),
        }
    }
}

/// One solver's result. `pairs` is `None` when the solver failed.
#[derive(Clone, Debug)]
pub struct SolverRun {
    pub report: SolverReport,
    pub pairs: Option<EigenPairSet>,
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub runs: Vec<SolverRun>,
    pub factor_seconds: f64,
    pub ic0_shift_used: f64,
    /// Cross-solver disagreements, empty when all converged runs agree.
    pub disagreements: Vec<String>,
}

impl RunOutcome {
    pub fn reports(&self) -> Vec<SolverReport> {
        self.runs.iter().map(|r| r.report.clone()).collect()
    }

    pub fn all_converged(&self) -> bool {
        self.runs.iter().all(|r| r.report.converged)
    }
}

/// Laplacian of `g`, or of its largest component when `allow_disconnected`.
/// Returns the node map of the component (`None` when the graph is kept whole).
pub fn prepare_laplacian(g: &EdgeList, allow_disconnected: bool) -> Result<(CsrMatrix, Option<Vec<usize>>)> {
    let (count, _) = connected_components(g);
    if count == 1 {
        return Ok((build_laplacian(g), None));
    }
    if !allow_disconnected {
        return Err(Error::Disconnected { components: count });
    }
    let (sub, map) = largest_component(g);
    Ok((build_laplacian(&sub), Some(map)))
}

fn run_solver(a: &CsrMatrix, f: &Ic0Factor, null: &DeflationBasis, cfg: &RunConfig, kind: SolverKind) -> SolverRun {
    let neig = cfg.neig;
    let result = match kind {
        SolverKind::Dacg => {
            let mut p = DacgParams::new(neig, cfg.delta);
            p.seed = cfg.seed;
            dacg_smallest(a, f, null, &p)
        }
        SolverKind::Jd => {
            let mut p = JdParams::new(neig, cfg.delta);
            p.seed = cfg.seed;
            p.itmax_inner = cfg.itmax_inner;
            p.m_min = cfg.m_min;
            p.m_max = cfg.m_max;
            if let Some(d) = cfg.delta_pcg {
                p.delta_pcg = d;
            }
            jd_smallest(a, f, null, &p)
        }
        SolverKind::Irlm => {
            let mut p = IrlmParams::new(neig, cfg.delta);
            p.seed = cfg.seed;
            p.ncv = cfg.ncv;
            p.delta_pcg = cfg.delta_pcg;
            irlm_smallest(a, f, null, &p)
        }
    };
    let mut run = match result {
        Ok((pairs, report)) => SolverRun { report, pairs: Some(pairs) },
        Err(Error::NoConvergence { report, detail, .. }) => {
            let mut report = *report;
            report.note = Some(detail);
            SolverRun { report, pairs: None }
        }
        Err(e) => {
            let mut report = SolverReport::new(kind, neig, cfg.delta);
            report.note = Some(e.to_string());
            SolverRun { report, pairs: None }
        }
    };
    let echo = cfg.echo(kind);
    run.report.note = Some(match run.report.note.take() {
        Some(n) => format!("{n}; {echo}"),
        None => echo,
    });
    if let Some(pairs) = &run.pairs {
        if let Err(msg) = verify_pairs(a, pairs, cfg.delta) {
            run.report.converged = false;
            run.report.note = Some(format!("verification failed: {msg}"));
        }
    }
    run
}

/// Recomputes `|A u - lambda u| / lambda` for every reported pair with fresh
/// products.
pub fn verify_pairs(a: &CsrMatrix, pairs: &EigenPairSet, delta: f64) -> std::result::Result<Vec<f64>, String> {
    let mut counter = MvpCounter::new();
    let mut out = Vec::with_capacity(pairs.len());
    for (j, (u, &lambda)) in pairs.vectors.iter().zip(&pairs.values).enumerate() {
        let mut r = spmv(a, u, &mut counter).map_err(|e| e.to_string())?;
        axpy(-lambda, u, &mut r);
        let res = if lambda > 0.0 { norm(&r) / lambda } else { f64::INFINITY };
        if !(res <= delta) {
            return Err(format!("pair {j}: residual {res:.3e} exceeds {delta:.1e}"));
        }
        out.push(res);
    }
    Ok(out)
}

/// Relative disagreements above `10 delta` between converged eigenvalue lists.
pub fn cross_check(runs: &[SolverRun], delta: f64) -> Vec<String> {
    let done: Vec<&SolverRun> = runs.iter().filter(|r| r.report.converged && r.pairs.is_some()).collect();
    let mut out = Vec::new();
    for (i, a) in done.iter().enumerate() {
        for b in &done[i + 1..] {
            let (va, vb) = (&a.pairs.as_ref().unwrap().values, &b.pairs.as_ref().unwrap().values);
            for (j, (x, y)) in va.iter().zip(vb).enumerate() {
                if (x - y).abs() > 10.0 * delta * x.abs().max(y.abs()) {
                    out.push(format!(
                        "{} and {} differ at pair {}: {x:e} vs {y:e}",
                        a.report.solver,
                        b.report.solver,
                        j + 1
                    ));
                }
            }
        }
    }
    out
}

/// Factorizes `a` once and runs every selected solver for the smallest
/// positive eigenpairs, deflating `null`.
pub fn run(a: &CsrMatrix, null: &DeflationBasis, cfg: &RunConfig) -> Result<RunOutcome> {
    let avail = a.n().saturating_sub(null.len());
    if cfg.neig == 0 || cfg.neig > avail {
        return Err(Error::InvalidArgument(format!("neig = {} must lie in 1..={avail}", cfg.neig)));
    }
    let t0 = Instant::now();
    let f = ic0_factorize(a, cfg.ic0_shift)?;
    let factor_seconds = t0.elapsed().as_secs_f64();

    let mut kinds = cfg.solvers.clone();
    kinds.sort();
    kinds.dedup();
    let runs: Vec<SolverRun> = if cfg.parallel {
        std::thread::scope(|s| {
            let f = &f;
            let handles: Vec<_> = kinds.iter().map(|&k| s.spawn(move || run_solver(a, f, null, cfg, k))).collect();
            handles.into_iter().map(|h| h.join().expect("solver thread panicked")).collect()
        })
    } else {
        kinds.iter().map(|&k| run_solver(a, &f, null, cfg, k)).collect()
    };
    let disagreements = if a.n() <= 2000 { cross_check(&runs, cfg.delta) } else { Vec::new() };
    Ok(RunOutcome { runs, factor_seconds, ic0_shift_used: f.shift(), disagreements })
}
