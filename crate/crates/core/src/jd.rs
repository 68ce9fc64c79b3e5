//! Jacobi-Davidson for the smallest eigenpairs, one pair at a time with
//! locking. The correction equation is solved inexactly by a few projected
//! PCG steps.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dense::{dense_sym_eig, DenseSym};
use crate::eigenpairs::EigenPairSet;
use crate::error::{Error, Result};
use crate::graph::CsrMatrix;
use crate::ic0::Ic0Factor;
use crate::kernels::{axpy, combine, dot, mgs_orthonormalize_multi, norm, random_orthonormal, spmv, MvpCounter};
use crate::pcg::{jd_correction_solve, DeflationBasis, Preconditioner};
use crate::report::{SolverKind, SolverReport};

#[derive(Clone, Debug)]
pub struct JdParams {
    pub neig: usize,
    pub delta: f64,
    pub delta_pcg: f64,
    /// Inner PCG iterations per correction equation.
    pub itmax_inner: usize,
    pub m_min: usize,
    pub m_max: usize,
    /// Outer iterations allowed for a single pair.
    pub max_outer_per_pair: usize,
    pub seed: u64,
    /// Initial search direction; random when `None`.
    pub start: Option<Vec<f64>>,
}

impl JdParams {
    pub fn new(neig: usize, delta: f64) -> Self {
        Self {
            neig,
            delta,
            delta_pcg: 1e-2,
            itmax_inner: 20,
            m_min: 5,
            m_max: 10,
            max_outer_per_pair: 1000,
            seed: 0,
            start: None,
        }
    }
}

/// Search space `V`, its image `W = A V` and the projection `H = V^T W`.
#[derive(Clone, Debug)]
pub struct JdWorkspace {
    v: Vec<Vec<f64>>,
    w: Vec<Vec<f64>>,
    h: DenseSym,
}

impl JdWorkspace {
    pub fn new() -> Self {
        Self { v: Vec::new(), w: Vec::new(), h: DenseSym::zeros(0) }
    }

    pub fn dim(&self) -> usize {
        self.v.len()
    }

    pub fn v(&self) -> &[Vec<f64>] {
        &self.v
    }

    pub fn w(&self) -> &[Vec<f64>] {
        &self.w
    }

    pub fn h(&self) -> &DenseSym {
        &self.h
    }

    /// Appends a unit vector `v` orthogonal to the space, with `w = A v`.
    /// The new row and column of `H` are symmetrized.
    pub fn expand(&mut self, v: Vec<f64>, w: Vec<f64>) {
        let col: Vec<f64> = self.v.iter().zip(&self.w).map(|(vi, wi)| 0.5 * (dot(vi, &w) + dot(&v, wi))).collect();
        let corner = dot(&v, &w);
        self.h.grow(&col, corner);
        self.v.push(v);
        self.w.push(w);
    }

    /// Replaces the space by `V Y` for the given columns of `Y`, whose
    /// Ritz values become the diagonal of `H`. No products are needed.
    fn compress(&mut self, y: &[&[f64]], theta: &[f64]) {
        let n = self.v[0].len();
        self.v = y.iter().map(|c| combine(&self.v, c, n)).collect();
        self.w = y.iter().map(|c| combine(&self.w, c, n)).collect();
        self.h = DenseSym::from_diagonal(theta);
    }
}

impl Default for JdWorkspace {
    fn default() -> Self {
        Self::new()
    }
}

/// The smallest Ritz pair of the search space.
#[derive(Clone, Debug)]
pub struct RitzPair {
    pub theta: f64,
    pub u: Vec<f64>,
    /// `A u - theta u`
    pub residual: Vec<f64>,
}

pub fn rayleigh_ritz_extract(ws: &JdWorkspace) -> Result<RitzPair> {
    if ws.dim() == 0 {
        return Err(Error::InvalidArgument("empty search space".into()));
    }
    let eig = dense_sym_eig(&ws.h)?;
    let y = &eig.vectors[0];
    let theta = eig.values[0];
    let n = ws.v[0].len();
    let u = combine(&ws.v, y, n);
    let mut residual = combine(&ws.w, y, n);
    axpy(-theta, &u, &mut residual);
    Ok(RitzPair { theta, u, residual })
}

/// Shrinks the space to the `m_min` Ritz vectors with the smallest Ritz values.
pub fn jd_restart(ws: &mut JdWorkspace, m_min: usize) -> Result<()> {
    if ws.dim() <= m_min {
        return Ok(());
    }
    let eig = dense_sym_eig(&ws.h)?;
    let y: Vec<&[f64]> = eig.vectors[..m_min].iter().map(|c| c.as_slice()).collect();
    ws.compress(&y, &eig.values[..m_min]);
    Ok(())
}

/// Removes the smallest Ritz vector (just locked) and keeps the others.
fn drop_smallest(ws: &mut JdWorkspace) -> Result<()> {
    let eig = dense_sym_eig(&ws.h)?;
    let y: Vec<&[f64]> = eig.vectors[1..].iter().map(|c| c.as_slice()).collect();
    ws.compress(&y, &eig.values[1..]);
    Ok(())
}

/// The `neig` smallest eigenpairs of `a` on the complement of `null`.
pub fn jd_smallest(
    a: &CsrMatrix,
    f: &Ic0Factor,
    null: &DeflationBasis,
    params: &JdParams,
) -> Result<(EigenPairSet, SolverReport)> {
    let started = Instant::now();
    let n = a.n();
    let neig = params.neig;
    let avail = n.saturating_sub(null.len());
    if neig == 0 || neig > avail {
        return Err(Error::InvalidArgument(format!("neig = {neig} must lie in 1..={avail}")));
    }
    if !(params.delta > 0.0) || params.m_min == 0 || params.m_max <= params.m_min {
        return Err(Error::InvalidArgument("need delta > 0 and 0 < m_min < m_max".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut counter = MvpCounter::new();
    let mut report = SolverReport::new(SolverKind::Jd, neig, params.delta);
    let mut ws = JdWorkspace::new();
    let mut locked: Vec<Vec<f64>> = Vec::new();
    let mut values = Vec::new();
    let mut residuals = Vec::new();
    let mut pair_outer = 0;

    let finish = |mut report: SolverReport, counter: &MvpCounter, values: &[f64], residuals: &[f64], ok: bool| {
        report.mvp = counter.get();
        report.aux_mvp = report.mvp - report.inner_its_total as u64;
        report.converged = ok;
        report.eigenvalues = values.to_vec();
        report.per_pair_residuals = residuals.to_vec();
        report.wall_seconds = started.elapsed().as_secs_f64();
        report
    };

    let mut pending = match &params.start {
        Some(s) if s.len() != n => return Err(Error::DimensionMismatch { expected: n, found: s.len() }),
        Some(s) => Some(s.clone()),
        None => random_orthonormal(&mut rng, n, &[null.columns()]),
    };

    loop {
        if let Some(t) = pending.take() {
            if ws.dim() >= params.m_max {
                jd_restart(&mut ws, params.m_min)?;
            }
            let bases = [null.columns(), locked.as_slice(), ws.v()];
            let v = match mgs_orthonormalize_multi(&t, &bases) {
                Ok((v, _)) => Some(v),
                Err(Error::LinearDependence { .. }) => random_orthonormal(&mut rng, n, &bases),
                Err(e) => return Err(e),
            };
            if let Some(v) = v {
                let w = spmv(a, &v, &mut counter)?;
                ws.expand(v, w);
            }
        }

        let rp = rayleigh_ritz_extract(&ws)?;
        let rnorm = norm(&rp.residual);
        let res = if rp.theta > 0.0 { rnorm / rp.theta } else { f64::INFINITY };
        if res <= params.delta {
            values.push(rp.theta);
            residuals.push(res);
            locked.push(rp.u);
            report.pair_iterations.push(pair_outer);
            pair_outer = 0;
            if locked.len() == neig {
                break;
            }
            drop_smallest(&mut ws)?;
            // A fresh direction per lock, otherwise further copies of a
            // repeated eigenvalue can be missing from the search space.
            pending = random_orthonormal(&mut rng, n, &[null.columns(), locked.as_slice()]);
            continue;
        }

        if !locked.is_empty() && null.len() + locked.len() + ws.dim() >= n {
            // The space is exhausted, so earlier inexact locks limit this
            // pair. Unlock everything; Rayleigh-Ritz on the full space is exact.
            for u in locked.drain(..) {
                let w = spmv(a, &u, &mut counter)?;
                ws.expand(u, w);
            }
            values.clear();
            residuals.clear();
            report.pair_iterations.clear();
            continue;
        }

        if pair_outer >= params.max_outer_per_pair {
            let report = finish(report, &counter, &values, &residuals, false);
            return Err(Error::NoConvergence {
                solver: "jd",
                pair: locked.len(),
                converged: locked.len(),
                detail: format!("residual {res:.3e} after {pair_outer} outer iterations"),
                report: Box::new(report),
            });
        }

        let mut q = DeflationBasis::from_columns(null.columns().to_vec())?;
        for u in &locked {
            q.push(u.clone());
        }
        q.push(rp.u.clone());
        let out =
            jd_correction_solve(a, rp.theta, &q, &rp.residual, f, params.delta_pcg, params.itmax_inner, &mut counter)?;
        report.outer_its += 1;
        report.inner_its_total += out.iterations;
        pair_outer += 1;
        let mut t = out.solution;
        if norm(&t) == 0.0 {
            // fall back to the preconditioned residual
            f.apply(&rp.residual, &mut t);
        }
        pending = Some(t);
    }

    let pairs = EigenPairSet::new(values, locked, residuals);
    let report = finish(report, &counter, &pairs.values, &pairs.residuals, true);
    Ok((pairs, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::graph::build_laplacian;
    use crate::ic0::ic0_factorize;

    fn dense_smallest(a: &CsrMatrix, k: usize) -> Vec<f64> {
        let h = DenseSym::from_rows(&a.to_dense()).unwrap();
        dense_sym_eig(&h).unwrap().values[1..=k].to_vec()
    }

    #[test]
    fn workspace_projection_is_consistent() {
        let a = build_laplacian(&fixtures::random_connected(30, 4.0, 1));
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut ws = JdWorkspace::new();
        let mut c = MvpCounter::new();
        for _ in 0..6 {
            let v = random_orthonormal(&mut rng, 30, &[ws.v()]).unwrap();
            let w = spmv(&a, &v, &mut c).unwrap();
            ws.expand(v, w);
        }
        for i in 0..6 {
            for j in 0..6 {
                assert!((ws.h().get(i, j) - dot(&ws.v()[i], &ws.w()[j])).abs() < 1e-12);
            }
        }
        let before = rayleigh_ritz_extract(&ws).unwrap().theta;
        jd_restart(&mut ws, 3).unwrap();
        assert_eq!(ws.dim(), 3);
        let after = rayleigh_ritz_extract(&ws).unwrap();
        assert!((after.theta - before).abs() < 1e-12 * before.abs());
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((dot(&ws.v()[i], &ws.v()[j]) - want).abs() < 1e-12);
            }
            let w = spmv(&a, &ws.v()[i], &mut c).unwrap();
            let diff: f64 = w.iter().zip(&ws.w()[i]).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            assert!(diff < 1e-12);
        }
    }

    #[test]
    fn one_dimensional_space() {
        let mut ws = JdWorkspace::new();
        ws.expand(vec![0.6, 0.8], vec![1.2, 2.4]);
        let rp = rayleigh_ritz_extract(&ws).unwrap();
        assert!((rp.theta - 2.64).abs() < 1e-15);
        assert!(rayleigh_ritz_extract(&JdWorkspace::new()).is_err());
    }

    #[test]
    fn exact_start_needs_no_correction() {
        // P4: lambda_2 = 2 - sqrt(2), v_i = cos(pi (i + 1/2) / 4)
        let a = build_laplacian(&fixtures::path(4));
        let f = ic0_factorize(&a, 1e-2).unwrap();
        let v: Vec<f64> = (0..4).map(|i| (std::f64::consts::PI * (i as f64 + 0.5) / 4.0).cos()).collect();
        let mut p = JdParams::new(1, 1e-10);
        p.start = Some(v);
        let (pairs, report) = jd_smallest(&a, &f, &DeflationBasis::kernel(4), &p).unwrap();
        assert_eq!(report.outer_its, 0);
        assert_eq!(report.mvp, 1);
        assert!((pairs.values[0] - (2.0 - 2f64.sqrt())).abs() < 1e-12);
    }

    #[test]
    fn matches_dense_on_random_graph() {
        let a = build_laplacian(&fixtures::random_geometric(300, 0.12, 2));
        let f = ic0_factorize(&a, 1e-2).unwrap();
        let null = DeflationBasis::kernel(300);
        let (pairs, report) = jd_smallest(&a, &f, &null, &JdParams::new(8, 1e-8)).unwrap();
        let want = dense_smallest(&a, 8);
        for (g, w) in pairs.values.iter().zip(&want) {
            assert!((g - w).abs() <= 1e-6 * w, "{g} vs {w}");
        }
        assert!(report.converged);
        assert_eq!(report.pair_iterations.len(), 8);
        assert_eq!(report.mvp, report.inner_its_total as u64 + report.aux_mvp);
        assert!(pairs.orthonormality_error() < 1e-10);
        assert!(pairs.max_overlap(&null) < 1e-10);
    }

    #[test]
    fn repeated_eigenvalues() {
        let a = build_laplacian(&fixtures::complete(6));
        let f = ic0_factorize(&a, 1e-2).unwrap();
        let (pairs, _) = jd_smallest(&a, &f, &DeflationBasis::kernel(6), &JdParams::new(5, 1e-10)).unwrap();
        assert!(pairs.values.iter().all(|v| (v - 6.0).abs() < 1e-9));
        assert!(pairs.orthonormality_error() < 1e-10);
    }
}
