//! Preconditioned conjugate gradient with deflation, and the Jacobi-Davidson
//! correction-equation solve built on it.

use crate::error::{Error, Result};
use crate::graph::CsrMatrix;
use crate::ic0::Ic0Factor;
use crate::kernels::{axpy, dot, norm, orthogonalize_against, LinearOperator, MvpCounter};

/// Orthonormal columns whose span is excluded from an iteration (the known
/// Laplacian kernel, locked eigenvectors, the current Ritz vector).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DeflationBasis {
    cols: Vec<Vec<f64>>,
}

const ORTHO_TOL: f64 = 1e-10;

impl DeflationBasis {
    pub fn empty() -> Self {
        Self::default()
    }

    /// `e / sqrt(n)`, the kernel of a connected graph Laplacian.
    pub fn kernel(n: usize) -> Self {
        Self { cols: vec![vec![1.0 / (n as f64).sqrt(); n]] }
    }

    /// Normalized indicator vectors of each component; spans the kernel of a
    /// Laplacian with `count` components.
    pub fn kernel_of_components(count: usize, labels: &[usize]) -> Self {
        let mut sizes = vec![0usize; count];
        for &l in labels {
            sizes[l] += 1;
        }
        let cols = (0..count)
            .map(|c| {
                let s = 1.0 / (sizes[c] as f64).sqrt();
                labels.iter().map(|&l| if l == c { s } else { 0.0 }).collect()
            })
            .collect();
        Self { cols }
    }

    /// Validates orthonormality to `1e-10`.
    pub fn from_columns(cols: Vec<Vec<f64>>) -> Result<Self> {
        for (a, ca) in cols.iter().enumerate() {
            if ca.len() != cols[0].len() {
                return Err(Error::DimensionMismatch { expected: cols[0].len(), found: ca.len() });
            }
            for (b, cb) in cols.iter().enumerate().take(a + 1) {
                let g = dot(ca, cb);
                let want = if a == b { 1.0 } else { 0.0 };
                if (g - want).abs() > ORTHO_TOL {
                    return Err(Error::InvalidArgument(format!(
                        "deflation columns {b} and {a} are not orthonormal (inner product {g:e})"
                    )));
                }
            }
        }
        Ok(Self { cols })
    }

    /// Appends a unit vector already orthogonal to the existing columns.
    pub fn push(&mut self, v: Vec<f64>) {
        debug_assert!((norm(&v) - 1.0).abs() < 1e-8);
        self.cols.push(v);
    }

    pub fn with(&self, v: Vec<f64>) -> Self {
        let mut out = self.clone();
        out.push(v);
        out
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.cols
    }

    pub fn len(&self) -> usize {
        self.cols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cols.is_empty()
    }

    /// `x <- (I - Q Q^T) x`
    pub fn project(&self, x: &mut [f64]) {
        orthogonalize_against(x, &self.cols);
    }

    /// Largest `|q^T x|` over the columns.
    pub fn max_overlap(&self, x: &[f64]) -> f64 {
        self.cols.iter().map(|q| dot(q, x).abs()).fold(0.0, f64::max)
    }
}

/// Approximate inverse `M ~ A^{-1}` applied as `z = M r`.
pub trait Preconditioner {
    fn apply(&self, r: &[f64], z: &mut [f64]);
}

#[derive(Clone, Copy, Debug, Default)]
pub struct IdentityPreconditioner;

impl Preconditioner for IdentityPreconditioner {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        z.copy_from_slice(r);
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PcgStatus {
    Converged,
    MaxIterations,
    /// `p^T A p <= 0` (or a non-positive preconditioned residual product):
    /// the operator is not positive definite on the search space.
    Indefinite,
}

#[derive(Clone, Debug)]
pub struct PcgOutcome {
    pub solution: Vec<f64>,
    pub iterations: usize,
    pub final_relres: f64,
    pub converged: bool,
    pub status: PcgStatus,
}

/// Solves `A x = b` on the orthogonal complement of `deflation`.
///
/// `b` is projected first, and the projection is re-applied to the residual
/// and preconditioned residual every iteration. Stops when
/// `|b_hat - A x| / |b_hat| <= tol` (recursive residual), after `maxit`
/// iterations, or on non-positive curvature. Each iteration costs one
/// operator application. Without convergence the iterate with the smallest
/// residual is returned.
pub fn pcg_solve(
    op: &dyn LinearOperator,
    precond: &dyn Preconditioner,
    b: &[f64],
    tol: f64,
    maxit: usize,
    deflation: &DeflationBasis,
    counter: &mut MvpCounter,
) -> Result<PcgOutcome> {
    pcg_solve_observed(op, precond, b, tol, maxit, deflation, counter, &mut |_, _| {})
}

/// [`pcg_solve`] calling `observer(k, x_k)` after every iteration.
#[allow(clippy::too_many_arguments)]
pub fn pcg_solve_observed(
    op: &dyn LinearOperator,
    precond: &dyn Preconditioner,
    b: &[f64],
    tol: f64,
    maxit: usize,
    deflation: &DeflationBasis,
    counter: &mut MvpCounter,
    observer: &mut dyn FnMut(usize, &[f64]),
) -> Result<PcgOutcome> {
    let n = op.dim();
    if b.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: b.len() });
    }
    if let Some(q) = deflation.columns().iter().find(|q| q.len() != n) {
        return Err(Error::DimensionMismatch { expected: n, found: q.len() });
    }

    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    deflation.project(&mut r);
    let bnorm = norm(&r);
    if bnorm == 0.0 {
        return Ok(PcgOutcome {
            solution: x,
            iterations: 0,
            final_relres: 0.0,
            converged: true,
            status: PcgStatus::Converged,
        });
    }

    let precondition = |r: &[f64], z: &mut [f64]| {
        precond.apply(r, z);
        deflation.project(z);
    };

    let mut z = vec![0.0; n];
    precondition(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut q = vec![0.0; n];

    let mut best = (1.0, x.clone());
    let mut relres = 1.0;
    let mut status = PcgStatus::MaxIterations;
    let mut iterations = 0;
    if !(rz > 0.0) {
        status = PcgStatus::Indefinite;
    } else {
        for k in 1..=maxit {
            iterations = k;
            op.apply(&p, &mut q, counter);
            deflation.project(&mut q);
            let pq = dot(&p, &q);
            if !(pq > 0.0) || !pq.is_finite() {
                status = PcgStatus::Indefinite;
                break;
            }
            let alpha = rz / pq;
            axpy(alpha, &p, &mut x);
            axpy(-alpha, &q, &mut r);
            deflation.project(&mut r);
            relres = norm(&r) / bnorm;
            observer(k, &x);
            if relres < best.0 {
                best.0 = relres;
                best.1.copy_from_slice(&x);
            }
            if relres <= tol {
                status = PcgStatus::Converged;
                break;
            }
            precondition(&r, &mut z);
            let rz_new = dot(&r, &z);
            if !(rz_new > 0.0) {
                status = PcgStatus::Indefinite;
                break;
            }
            let beta = rz_new / rz;
            rz = rz_new;
            for (pi, zi) in p.iter_mut().zip(&z) {
                *pi = zi + beta * *pi;
            }
        }
    }

    let (final_relres, mut solution) = match status {
        PcgStatus::Converged => (relres, x),
        _ => best,
    };
    deflation.project(&mut solution);
    Ok(PcgOutcome { solution, iterations, final_relres, converged: status == PcgStatus::Converged, status })
}

/// `(I - QQ^T)(A - theta I)(I - QQ^T)`
struct ProjectedShifted<'a> {
    a: &'a CsrMatrix,
    theta: f64,
    q: &'a DeflationBasis,
}

impl LinearOperator for ProjectedShifted<'_> {
    fn dim(&self) -> usize {
        self.a.n()
    }

    fn apply(&self, x: &[f64], y: &mut [f64], counter: &mut MvpCounter) {
        let mut t = x.to_vec();
        self.q.project(&mut t);
        self.a.apply(&t, y, counter);
        axpy(-self.theta, &t, y);
        self.q.project(y);
    }
}

/// `(I - QQ^T) P (I - QQ^T)` with `P` the IC(0) solve.
struct ProjectedIc0<'a> {
    f: &'a Ic0Factor,
    q: &'a DeflationBasis,
}

impl Preconditioner for ProjectedIc0<'_> {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        let mut t = r.to_vec();
        self.q.project(&mut t);
        self.f.apply(&t, z);
        self.q.project(z);
    }
}

/// Approximately solves the Jacobi-Davidson correction equation
/// `(I - QQ^T)(A - theta I)(I - QQ^T) s = -residual` by PCG with the
/// projected IC(0) preconditioner, for at most `itmax` iterations.
///
/// `q` must contain the current Ritz vector. An inexact answer is the normal
/// outcome. If PCG meets negative curvature before taking any step, the
/// projected preconditioned residual `-M r` is returned instead so that the
/// outer iteration always receives a usable expansion vector.
#[allow(clippy::too_many_arguments)]
pub fn jd_correction_solve(
    a: &CsrMatrix,
    theta: f64,
    q: &DeflationBasis,
    residual: &[f64],
    f: &Ic0Factor,
    tol: f64,
    itmax: usize,
    counter: &mut MvpCounter,
) -> Result<PcgOutcome> {
    let op = ProjectedShifted { a, theta, q };
    let precond = ProjectedIc0 { f, q };
    let rhs: Vec<f64> = residual.iter().map(|v| -v).collect();
    let mut out = pcg_solve(&op, &precond, &rhs, tol, itmax, q, counter)?;
    if out.status == PcgStatus::Indefinite && norm(&out.solution) == 0.0 {
        let mut z = vec![0.0; rhs.len()];
        precond.apply(&rhs, &mut z);
        out.solution = z;
    }
    Ok(out)
}
