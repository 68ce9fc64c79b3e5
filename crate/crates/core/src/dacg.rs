//! Deflation-accelerated conjugate gradient: minimizes the Rayleigh quotient
//! by preconditioned nonlinear CG on the complement of the kernel and of the
//! eigenvectors already found, one pair at a time.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::eigenpairs::EigenPairSet;
use crate::error::{Error, Result};
use crate::graph::CsrMatrix;
use crate::ic0::Ic0Factor;
use crate::kernels::{axpy, dot, norm, random_orthonormal, rayleigh_ritz_polish, scale, spmv, MvpCounter};
use crate::pcg::{DeflationBasis, Preconditioner};
use crate::report::{SolverKind, SolverReport};

#[derive(Clone, Debug)]
pub struct DacgParams {
    pub neig: usize,
    pub delta: f64,
    pub max_its_per_pair: usize,
    /// Steepest-descent restart period, `max(n / 10, 1)` when `None`.
    pub restart_every: Option<usize>,
    /// Period for recomputing the cached `A x` exactly.
    pub refresh_every: usize,
    pub seed: u64,
}

impl DacgParams {
    pub fn new(neig: usize, delta: f64) -> Self {
        Self { neig, delta, max_its_per_pair: 20_000, restart_every: None, refresh_every: 50, seed: 0 }
    }
}

/// Rayleigh quotient `q = x^T A x / x^T x` and its gradient
/// `g = 2 (A x - q x) / x^T x`.
#[derive(Clone, Debug)]
pub struct RqGradient {
    pub q: f64,
    pub gradient: Vec<f64>,
    pub ax: Vec<f64>,
}

/// Costs one product.
pub fn rq_gradient(a: &CsrMatrix, x: &[f64], counter: &mut MvpCounter) -> Result<RqGradient> {
    let ax = spmv(a, x, counter)?;
    let xx = dot(x, x);
    if !(xx > 0.0) {
        return Err(Error::InvalidArgument("zero vector has no Rayleigh quotient".into()));
    }
    let q = dot(x, &ax) / xx;
    let gradient = ax.iter().zip(x).map(|(ai, xi)| 2.0 * (ai - q * xi) / xx).collect();
    Ok(RqGradient { q, gradient, ax })
}

/// Minimum of the Rayleigh quotient on the plane `span{x, p}`.
#[derive(Clone, Debug)]
pub struct PlaneMinimum {
    /// The minimum value.
    pub q: f64,
    /// Step with `x + t p` parallel to the minimizer; infinite when the
    /// minimizer is `p` itself.
    pub t: f64,
    /// Unit minimizer, with sign chosen so that `x^T x_new >= 0`.
    pub x_new: Vec<f64>,
    pub ax_new: Vec<f64>,
}

/// Exact line search for the Rayleigh quotient along `p` through a 2x2
/// Rayleigh-Ritz problem. `ax` must equal `A x`; costs one product for `A p`.
pub fn rq_line_search(
    a: &CsrMatrix,
    x: &[f64],
    ax: &[f64],
    p: &[f64],
    counter: &mut MvpCounter,
) -> Result<PlaneMinimum> {
    let nx = norm(x);
    let np = norm(p);
    if !(nx > 0.0) || !(np > 0.0) {
        return Err(Error::DegeneratePlane);
    }
    let ap = spmv(a, p, counter)?;
    // orthonormal basis {xh, ph} of the plane
    let xh: Vec<f64> = x.iter().map(|v| v / nx).collect();
    let axh: Vec<f64> = ax.iter().map(|v| v / nx).collect();
    let c = dot(&xh, p);
    let mut ph = p.to_vec();
    axpy(-c, &xh, &mut ph);
    let mut aph = ap;
    axpy(-c, &axh, &mut aph);
    let npp = norm(&ph);
    // the 2x2 projection loses about eps / (npp / np) relative accuracy
    if !(npp > 1e-8 * np) {
        return Err(Error::DegeneratePlane);
    }
    scale(1.0 / npp, &mut ph);
    scale(1.0 / npp, &mut aph);

    let a11 = dot(&xh, &axh);
    let a22 = dot(&ph, &aph);
    let a12 = 0.5 * (dot(&xh, &aph) + dot(&ph, &axh));
    let mean = 0.5 * (a11 + a22);
    let half = 0.5 * (a11 - a22);
    let q = mean - half.hypot(a12);
    let (mut c1, mut c2) = if a12 == 0.0 {
        if a11 <= a22 {
            (1.0, 0.0)
        } else {
            (0.0, 1.0)
        }
    } else {
        let (u, w) = ((a12, q - a11), (q - a22, a12));
        let (y1, y2) = if u.0.hypot(u.1) >= w.0.hypot(w.1) { u } else { w };
        let s = y1.hypot(y2);
        (y1 / s, y2 / s)
    };
    if c1 < 0.0 {
        c1 = -c1;
        c2 = -c2;
    }
    let n = x.len();
    let mut x_new = vec![0.0; n];
    let mut ax_new = vec![0.0; n];
    axpy(c1, &xh, &mut x_new);
    axpy(c2, &ph, &mut x_new);
    axpy(c1, &axh, &mut ax_new);
    axpy(c2, &aph, &mut ax_new);
    // x_new = c1 xh + c2 (p - c xh) / npp, so t = coefficient of p over that of x
    let x_coef = c1 / nx - c2 * c / (npp * nx);
    let p_coef = c2 / npp;
    let t = if x_coef == 0.0 { f64::INFINITY } else { p_coef / x_coef };
    Ok(PlaneMinimum { q, t, x_new, ax_new })
}

/// Iteration history of one pair, for diagnostics.
#[derive(Clone, Debug, Default)]
pub struct DacgTrace {
    /// Rayleigh quotient after every iteration.
    pub q: Vec<f64>,
}

/// The `neig` smallest eigenpairs of `a` on the complement of `null`.
pub fn dacg_smallest(
    a: &CsrMatrix,
    f: &Ic0Factor,
    null: &DeflationBasis,
    params: &DacgParams,
) -> Result<(EigenPairSet, SolverReport)> {
    dacg_smallest_traced(a, f, null, params, &mut Vec::new())
}

/// [`dacg_smallest`] recording one [`DacgTrace`] per pair.
pub fn dacg_smallest_traced(
    a: &CsrMatrix,
    f: &Ic0Factor,
    null: &DeflationBasis,
    params: &DacgParams,
    traces: &mut Vec<DacgTrace>,
) -> Result<(EigenPairSet, SolverReport)> {
    let started = Instant::now();
    let n = a.n();
    let neig = params.neig;
    let avail = n.saturating_sub(null.len());
    if neig == 0 || neig > avail {
        return Err(Error::InvalidArgument(format!("neig = {neig} must lie in 1..={avail}")));
    }
    if !(params.delta > 0.0) || params.refresh_every == 0 {
        return Err(Error::InvalidArgument("need delta > 0 and refresh_every > 0".into()));
    }
    let restart_every = params.restart_every.unwrap_or((n / 10).max(1)).max(1);

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut counter = MvpCounter::new();
    let mut report = SolverReport::new(SolverKind::Dacg, neig, params.delta);
    let mut u = DeflationBasis::from_columns(null.columns().to_vec())?;
    let mut values = Vec::new();
    let mut vectors = Vec::new();
    let mut residuals = Vec::new();

    for pair in 0..neig {
        let mut trace = DacgTrace::default();
        let mut x = random_orthonormal(&mut rng, n, &[u.columns()]).expect("complement is nonempty");
        let mut ax = spmv(a, &x, &mut counter)?;
        let mut q = dot(&x, &ax);
        let mut fresh = true;
        let mut since_refresh = 0;
        let mut p: Vec<f64> = vec![0.0; n];
        let mut z_prev: Vec<f64> = Vec::new();
        let mut gz_prev = 0.0;
        let mut its = 0;
        let mut accepted = None;
        let mut polished = false;
        let mut polish_budget = 3;

        while its <= params.max_its_per_pair {
            // residual A x - q x, which is half the gradient for unit x
            let mut r = ax.clone();
            axpy(-q, &x, &mut r);
            let res = if q > 0.0 { norm(&r) / q } else { f64::INFINITY };
            if res <= params.delta {
                if fresh {
                    accepted = Some(res);
                    break;
                }
                ax = spmv(a, &x, &mut counter)?;
                q = dot(&x, &ax);
                fresh = true;
                since_refresh = 0;
                continue;
            }
            if fresh && polish_budget > 0 && !vectors.is_empty() {
                let mut pr = r.clone();
                u.project(&mut pr);
                if norm(&pr) <= params.delta * q {
                    // Converged on the complement; what is left lives in the
                    // span of the inexact locked vectors.
                    polish_budget -= 1;
                    if let Some(p) = polish(a, null, &vectors, &x, params.delta, &mut counter)? {
                        (values, vectors, residuals, u) = p;
                        polished = true;
                        break;
                    }
                }
            }
            if its == params.max_its_per_pair {
                break;
            }
            its += 1;

            let g: Vec<f64> = r.iter().map(|v| 2.0 * v).collect();
            let mut z = vec![0.0; n];
            f.apply(&g, &mut z);
            u.project(&mut z);
            let gz = dot(&g, &z);
            let mut beta = 0.0;
            if its % restart_every != 1 && restart_every > 1 && !z_prev.is_empty() && gz_prev > 0.0 {
                let diff: f64 = g.iter().zip(z.iter().zip(&z_prev)).map(|(gi, (zi, zp))| gi * (zi - zp)).sum();
                beta = (diff / gz_prev).max(0.0);
            }
            for (pi, zi) in p.iter_mut().zip(&z) {
                *pi = -zi + beta * *pi;
            }
            u.project(&mut p);
            let step = match rq_line_search(a, &x, &ax, &p, &mut counter) {
                Ok(s) => s,
                Err(Error::DegeneratePlane) => {
                    // restart along steepest descent
                    p = z.iter().map(|v| -v).collect();
                    match rq_line_search(a, &x, &ax, &p, &mut counter) {
                        Ok(s) => s,
                        Err(Error::DegeneratePlane) => {
                            // No descent direction is left in the complement.
                            if let Some(p) = polish(a, null, &vectors, &x, params.delta, &mut counter)? {
                                (values, vectors, residuals, u) = p;
                                polished = true;
                            }
                            break;
                        }
                        Err(e) => return Err(e),
                    }
                }
                Err(e) => return Err(e),
            };
            x = step.x_new;
            ax = step.ax_new;
            u.project(&mut x);
            let nx = norm(&x);
            scale(1.0 / nx, &mut x);
            scale(1.0 / nx, &mut ax);
            q = dot(&x, &ax);
            trace.q.push(q);
            z_prev = z;
            gz_prev = gz;
            fresh = false;
            since_refresh += 1;
            if since_refresh >= params.refresh_every {
                ax = spmv(a, &x, &mut counter)?;
                q = dot(&x, &ax);
                fresh = true;
                since_refresh = 0;
            }
        }

        traces.push(trace);
        report.pair_iterations.push(its);
        if polished {
            continue;
        }
        match accepted {
            Some(res) => {
                values.push(q);
                residuals.push(res);
                u.push(x.clone());
                vectors.push(x);
            }
            None => {
                report.mvp = counter.get();
                report.aux_mvp = report.mvp;
                report.eigenvalues = values;
                report.per_pair_residuals = residuals;
                report.wall_seconds = started.elapsed().as_secs_f64();
                return Err(Error::NoConvergence {
                    solver: "dacg",
                    pair,
                    converged: pair,
                    detail: format!("no convergence in {} iterations", params.max_its_per_pair),
                    report: Box::new(report),
                });
            }
        }
    }

    let pairs = EigenPairSet::new(values, vectors, residuals);
    report.mvp = counter.get();
    report.aux_mvp = report.mvp;
    report.converged = true;
    report.eigenvalues = pairs.values.clone();
    report.per_pair_residuals = pairs.residuals.clone();
    report.wall_seconds = started.elapsed().as_secs_f64();
    Ok((pairs, report))
}

type Polished = (Vec<f64>, Vec<Vec<f64>>, Vec<f64>, DeflationBasis);

/// Rayleigh-Ritz on the locked vectors plus `x`; `None` unless every pair
/// meets `delta`.
fn polish(
    a: &CsrMatrix,
    null: &DeflationBasis,
    locked: &[Vec<f64>],
    x: &[f64],
    delta: f64,
    counter: &mut MvpCounter,
) -> Result<Option<Polished>> {
    let mut basis = locked.to_vec();
    basis.push(x.to_vec());
    let (values, vectors, residuals) = rayleigh_ritz_polish(a, &basis, counter)?;
    if residuals.iter().any(|&r| r > delta) {
        return Ok(None);
    }
    let mut u = DeflationBasis::from_columns(null.columns().to_vec())?;
    for v in &vectors {
        u.push(v.clone());
    }
    Ok(Some((values, vectors, residuals, u)))
}
