//! Thick-restart Lanczos on the inverse operator `A^{-1}` restricted to the
//! complement of the kernel. The largest Ritz values `mu` of `A^{-1}` give the
//! smallest positive eigenvalues `1 / mu` of `A`. Each Lanczos step solves one
//! linear system with IC(0)-preconditioned CG.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dense::{dense_sym_eig, tridiag_eig, DenseSym, SymEigen};
use crate::eigenpairs::EigenPairSet;
use crate::error::{Error, Result};
use crate::graph::CsrMatrix;
use crate::ic0::Ic0Factor;
use crate::kernels::{
    axpy, combine, dot, mgs_orthonormalize, norm, orthogonalize_against, random_orthonormal, rayleigh_ritz_polish,
    scale, spmv, MvpCounter,
};
use crate::pcg::{pcg_solve, DeflationBasis, Preconditioner};
use crate::report::{SolverKind, SolverReport};

#[derive(Clone, Debug)]
pub struct IrlmParams {
    pub neig: usize,
    /// Basis size before a restart; [`default_ncv`] when `None`.
    pub ncv: Option<usize>,
    pub delta: f64,
    /// Inner PCG tolerance, `delta / 100` when `None`.
    pub delta_pcg: Option<f64>,
    pub max_restarts: usize,
    /// Inner PCG iteration cap, `max(2n, 2000)` when `None`.
    pub pcg_maxit: Option<usize>,
    pub seed: u64,
}

impl IrlmParams {
    pub fn new(neig: usize, delta: f64) -> Self {
        Self { neig, ncv: None, delta, delta_pcg: None, max_restarts: 200, pcg_maxit: None, seed: 0 }
    }
}

/// Basis size for `neig` wanted pairs: 15, 30, 60 and 120 at 1, 5, 20 and
/// 50 pairs, linear in between and growing by 2 per pair beyond 50.
pub fn default_ncv(neig: usize) -> usize {
    const ANCHORS: [(usize, usize); 4] = [(1, 15), (5, 30), (20, 60), (50, 120)];
    if neig <= 1 {
        return 15;
    }
    for w in ANCHORS.windows(2) {
        let ((k0, v0), (k1, v1)) = (w[0], w[1]);
        if neig <= k1 {
            let num = (v1 - v0) * (neig - k0);
            return v0 + num.div_ceil(k1 - k0);
        }
    }
    120 + 2 * (neig - 50)
}

/// Lanczos basis and projected matrix.
///
/// After a thick restart the first `k` columns are Ritz vectors: the
/// projected matrix has `mu_1..mu_k` on its leading diagonal, an arrow row
/// (`spike`) coupling them to column `k`, and a tridiagonal tail.
#[derive(Clone, Debug)]
pub struct LanczosState {
    basis: Vec<Vec<f64>>,
    alpha: Vec<f64>,
    /// `beta[j]` couples columns `j` and `j + 1`; zero inside the restarted block.
    beta: Vec<f64>,
    spike: Vec<f64>,
    next: Option<Vec<f64>>,
    next_beta: f64,
}

impl LanczosState {
    /// Starts from `start`, which is normalized.
    pub fn new(start: &[f64]) -> Result<Self> {
        let (v, _) = mgs_orthonormalize(start, &[])?;
        Ok(Self {
            basis: Vec::new(),
            alpha: Vec::new(),
            beta: Vec::new(),
            spike: Vec::new(),
            next: Some(v),
            next_beta: 0.0,
        })
    }

    pub fn len(&self) -> usize {
        self.basis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.basis.is_empty()
    }

    pub fn basis(&self) -> &[Vec<f64>] {
        &self.basis
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn spike(&self) -> &[f64] {
        &self.spike
    }

    /// Norm of the residual vector that will become the next basis column.
    pub fn residual_norm(&self) -> f64 {
        self.next_beta
    }

    /// The next basis column, `None` once the Krylov space is exhausted.
    pub fn next(&self) -> Option<&[f64]> {
        self.next.as_deref()
    }

    /// The projected matrix `T_m`.
    pub fn projected(&self) -> DenseSym {
        let m = self.len();
        let mut t = DenseSym::from_diagonal(&self.alpha);
        let k = self.spike.len();
        for (i, &s) in self.spike.iter().enumerate() {
            if k < m {
                t.set_sym(i, k, s);
            }
        }
        for (j, &b) in self.beta.iter().enumerate() {
            if j >= k {
                t.set_sym(j, j + 1, b);
            }
        }
        t
    }

    /// Eigen-decomposition of `T_m`, ascending.
    pub fn ritz(&self) -> Result<SymEigen> {
        if self.spike.is_empty() {
            tridiag_eig(&self.alpha, &self.beta)
        } else {
            dense_sym_eig(&self.projected())
        }
    }

    /// Keeps the Ritz vectors of the `keep` largest Ritz values and the
    /// residual direction, which becomes the next column.
    fn thick_restart<R: Rng>(&mut self, keep: usize, rng: &mut R, null: &DeflationBasis) -> Result<()> {
        let m = self.len();
        let n = self.basis[0].len();
        let eig = self.ritz()?;
        let mut basis = Vec::with_capacity(keep);
        let mut alpha = Vec::with_capacity(keep);
        let mut spike = Vec::with_capacity(keep);
        for i in (m - keep..m).rev() {
            let y = &eig.vectors[i];
            let mut u = combine(&self.basis, y, n);
            orthogonalize_against(&mut u, &basis);
            let nu = norm(&u);
            scale(1.0 / nu, &mut u);
            basis.push(u);
            alpha.push(eig.values[i]);
            spike.push(self.next_beta * y[m - 1]);
        }
        self.basis = basis;
        self.alpha = alpha;
        self.beta = vec![0.0; keep - 1];
        if self.next.is_none() {
            self.next = random_orthonormal(rng, n, &[&self.basis, null.columns()]);
            self.next_beta = 0.0;
            spike.iter_mut().for_each(|s| *s = 0.0);
        }
        self.spike = spike;
        Ok(())
    }
}

/// Outcome of one Lanczos step.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StepInfo {
    pub pcg_iterations: usize,
    /// The new residual vanished and the next column was drawn at random.
    pub breakdown: bool,
}

/// Relative size of the residual below which the Krylov space is invariant.
const BREAKDOWN_TOL: f64 = 1e-12;

/// Appends the pending column `v` to the basis and computes
/// `w = A^{-1} v` by PCG to relative tolerance `tol` on the complement of
/// `null`, then orthogonalizes `w` against the whole basis.
#[allow(clippy::too_many_arguments)]
pub fn inverse_lanczos_step<R: Rng>(
    state: &mut LanczosState,
    a: &CsrMatrix,
    f: &dyn Preconditioner,
    tol: f64,
    maxit: usize,
    null: &DeflationBasis,
    counter: &mut MvpCounter,
    rng: &mut R,
) -> Result<StepInfo> {
    let v = state.next.take().ok_or_else(|| Error::InvalidArgument("Krylov space exhausted".into()))?;
    let n = v.len();
    let j = state.len();
    let out = pcg_solve(a, f, &v, tol, maxit, null, counter)?;
    if !out.converged {
        state.next = Some(v);
        return Err(Error::InnerSolve {
            solver: "irlm",
            outer: j,
            detail: format!(
                "PCG {:?} after {} iterations, relres {:.3e}",
                out.status, out.iterations, out.final_relres
            ),
        });
    }
    let mut w = out.solution;
    let alpha = dot(&w, &v);
    let w_norm = norm(&w);
    if j > 0 {
        let coupling = if j == state.spike.len() { 0.0 } else { state.next_beta };
        state.beta.push(coupling);
    }
    state.alpha.push(alpha);
    state.basis.push(v);
    for _ in 0..2 {
        orthogonalize_against(&mut w, &state.basis);
        null.project(&mut w);
    }
    let beta = norm(&w);
    let breakdown = !(beta > BREAKDOWN_TOL * w_norm);
    if breakdown {
        state.next_beta = 0.0;
        state.next = random_orthonormal(rng, n, &[&state.basis, null.columns()]);
    } else {
        scale(1.0 / beta, &mut w);
        state.next_beta = beta;
        state.next = Some(w);
    }
    Ok(StepInfo { pcg_iterations: out.iterations, breakdown })
}

/// Tolerance of the first, cheap pass when probing for missed copies of a
/// repeated eigenvalue.
const PROBE_DELTA: f64 = 1e-3;

struct Check {
    /// The estimated residual must fall below `delta * scale` before paying
    /// for an explicit check.
    scale: f64,
    explicit_checks: usize,
}

fn check_convergence(
    state: &LanczosState,
    a: &CsrMatrix,
    null: &DeflationBasis,
    neig: usize,
    delta: f64,
    check: &mut Check,
    counter: &mut MvpCounter,
) -> Result<Option<EigenPairSet>> {
    let m = state.len();
    if m < neig {
        return Ok(None);
    }
    let eig = state.ritz()?;
    let wanted: Vec<usize> = (m - neig..m).rev().collect();
    if wanted.iter().any(|&i| !(eig.values[i] > 0.0)) {
        return Ok(None);
    }
    let rho: Vec<f64> = wanted.iter().map(|&i| (state.next_beta * eig.vectors[i][m - 1]).abs()).collect();
    let rho_max = rho.iter().copied().fold(0.0, f64::max);
    let bound = delta * check.scale;
    if let Some(next) = state.next() {
        // |A r| >= lambda_min |r| on the complement of the kernel
        let lambda_low = 1.0 / eig.values[m - 1];
        if 0.5 * rho_max * lambda_low > bound {
            return Ok(None);
        }
        let gamma = norm(&spmv(a, next, counter)?);
        if rho_max * gamma > bound {
            return Ok(None);
        }
    }

    check.explicit_checks += 1;
    let n = a.n();
    let mut values = Vec::with_capacity(neig);
    let mut vectors = Vec::with_capacity(neig);
    let mut residuals = Vec::with_capacity(neig);
    for &i in &wanted {
        let mut u = combine(&state.basis, &eig.vectors[i], n);
        null.project(&mut u);
        let nu = norm(&u);
        scale(1.0 / nu, &mut u);
        let w = spmv(a, &u, counter)?;
        let theta = dot(&u, &w);
        let mut r = w;
        axpy(-theta, &u, &mut r);
        null.project(&mut r);
        let res = if theta > 0.0 { norm(&r) / theta } else { f64::INFINITY };
        values.push(theta);
        vectors.push(u);
        residuals.push(res);
    }
    if residuals.iter().all(|&r| r <= delta) {
        Ok(Some(EigenPairSet::new(values, vectors, residuals)))
    } else {
        check.scale = (check.scale * 0.1).max(1e-6);
        Ok(None)
    }
}

/// The `neig` smallest eigenpairs of `a` on the orthogonal complement of
/// `null` (normally the kernel).
pub fn irlm_smallest(
    a: &CsrMatrix,
    f: &Ic0Factor,
    null: &DeflationBasis,
    params: &IrlmParams,
) -> Result<(EigenPairSet, SolverReport)> {
    let started = Instant::now();
    let n = a.n();
    let neig = params.neig;
    let avail = n.saturating_sub(null.len());
    if neig == 0 || neig > avail {
        return Err(Error::InvalidArgument(format!("neig = {neig} must lie in 1..={avail}")));
    }
    if !(params.delta > 0.0) {
        return Err(Error::InvalidArgument("delta must be positive".into()));
    }
    let ncv = params.ncv.unwrap_or_else(|| default_ncv(neig));
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut counter = MvpCounter::new();
    let mut report = SolverReport::new(SolverKind::Irlm, neig, params.delta);

    let finish = |mut report: SolverReport, counter: &MvpCounter, pairs: &EigenPairSet, converged: bool| {
        report.mvp = counter.get();
        report.aux_mvp = report.mvp - report.inner_its_total as u64;
        report.converged = converged;
        report.eigenvalues = pairs.values.clone();
        report.per_pair_residuals = pairs.residuals.clone();
        report.wall_seconds = started.elapsed().as_secs_f64();
        report
    };
    let fail = |report: SolverReport, counter: &MvpCounter, pairs: &EigenPairSet, detail: String| {
        let converged = pairs.len();
        let report = finish(report, counter, pairs, false);
        Err(Error::NoConvergence { solver: "irlm", pair: converged, converged, detail, report: Box::new(report) })
    };

    let mut pairs = match lanczos_pairs(a, f, null, neig, ncv, params, &mut rng, &mut counter, &mut report)? {
        Ok(p) => p,
        Err(detail) => return fail(report, &counter, &EigenPairSet::default(), detail),
    };

    // A single Krylov sequence holds at most one copy of a repeated
    // eigenvalue, up to roundoff. Probe the complement of the found pairs.
    for _ in 0..=neig {
        if null.len() + neig >= n {
            break;
        }
        let mut cols = null.columns().to_vec();
        cols.extend(pairs.vectors.iter().cloned());
        let locked = DeflationBasis::from_columns(cols)?;
        let largest = pairs.values[neig - 1];
        // A loose pass first; the Ritz value bounds the smallest remaining
        // eigenvalue from above, so only a low one needs the full tolerance.
        let loose = IrlmParams { delta: PROBE_DELTA.max(params.delta), delta_pcg: None, ..params.clone() };
        let mut probe = None;
        for p in [&loose, params] {
            match lanczos_pairs(a, f, &locked, 1, default_ncv(1), p, &mut rng, &mut counter, &mut report)? {
                Ok(found) if found.values[0] < largest * (1.0 + p.delta) => probe = Some(found),
                Ok(_) => {
                    probe = None;
                    break;
                }
                Err(detail) => return fail(report, &counter, &pairs, format!("probe: {detail}")),
            }
        }
        let Some(probe) = probe.filter(|p| p.values[0] < largest * (1.0 - params.delta)) else {
            break;
        };
        let mut basis = pairs.vectors.clone();
        basis.push(probe.vectors[0].clone());
        let (values, vectors, residuals) = rayleigh_ritz_polish(a, &basis, &mut counter)?;
        if residuals[..neig].iter().any(|&r| r > params.delta) {
            let detail = format!(
                "residual {:.3e} after merging a missed pair",
                residuals[..neig].iter().copied().fold(0.0, f64::max)
            );
            return fail(report, &counter, &pairs, detail);
        }
        pairs = EigenPairSet::new(values[..neig].to_vec(), vectors[..neig].to_vec(), residuals[..neig].to_vec());
    }
    let report = finish(report, &counter, &pairs, true);
    Ok((pairs, report))
}

/// Thick-restart inverse Lanczos until `neig` pairs pass the explicit check.
/// The inner `Err` carries a description when restarts run out.
#[allow(clippy::too_many_arguments)]
fn lanczos_pairs(
    a: &CsrMatrix,
    f: &Ic0Factor,
    null: &DeflationBasis,
    neig: usize,
    ncv: usize,
    params: &IrlmParams,
    rng: &mut ChaCha8Rng,
    counter: &mut MvpCounter,
    report: &mut SolverReport,
) -> Result<std::result::Result<EigenPairSet, String>> {
    let n = a.n();
    let avail = n - null.len();
    let ncv = ncv.max(neig + 1).min(avail);
    let tol = params.delta_pcg.unwrap_or(1e-2 * params.delta);
    let maxit = params.pcg_maxit.unwrap_or((2 * n).max(2000));
    let start = random_orthonormal(rng, n, &[null.columns()]).expect("complement is nonempty");
    let mut state = LanczosState::new(&start)?;
    let mut check = Check { scale: 1.0, explicit_checks: 0 };
    let mut restarts = 0;
    loop {
        while state.len() < ncv && state.next().is_some() {
            let info = inverse_lanczos_step(&mut state, a, f, tol, maxit, null, counter, rng)?;
            report.outer_its += 1;
            report.inner_its_total += info.pcg_iterations;
            if let Some(pairs) = check_convergence(&state, a, null, neig, params.delta, &mut check, counter)? {
                return Ok(Ok(pairs));
            }
        }
        let keep = (neig + 1).min(state.len() - 1).max(neig);
        if restarts >= params.max_restarts || (keep >= state.len() && keep + null.len() >= n) {
            return Ok(Err(format!("{restarts} restarts, {} explicit residual checks", check.explicit_checks)));
        }
        restarts += 1;
        state.thick_restart(keep, rng, null)?;
    }
}
