//! Incomplete Cholesky factorization with no fill-in, with a global diagonal
//! shift for (semi)singular matrices such as graph Laplacians.

use crate::error::{Error, Result};
use crate::graph::CsrMatrix;
use crate::pcg::{DeflationBasis, Preconditioner};

/// Lower-triangular `L` with the sparsity of `lower(A)`, so that
/// `L L^T ~ A + shift * diag(A)`.
#[derive(Clone, Debug)]
pub struct Ic0Factor {
    l: CsrMatrix,
    shift: f64,
    attempts: usize,
}

/// A pivot fails when it is at most this fraction of the original diagonal.
const PIVOT_TOL: f64 = 1e-14;

impl Ic0Factor {
    pub fn identity(n: usize) -> Self {
        Self { l: CsrMatrix::identity(n), shift: 0.0, attempts: 0 }
    }

    /// The factor; each row stores its diagonal last.
    pub fn l(&self) -> &CsrMatrix {
        &self.l
    }

    /// The shift `alpha` that produced the factor.
    pub fn shift(&self) -> f64 {
        self.shift
    }

    /// Number of shift escalations before success.
    pub fn attempts(&self) -> usize {
        self.attempts
    }

    pub fn n(&self) -> usize {
        self.l.n()
    }

    /// Solves `L L^T z = r`.
    pub fn solve(&self, r: &[f64]) -> Vec<f64> {
        let mut z = vec![0.0; r.len()];
        self.apply(r, &mut z);
        z
    }
}

impl Preconditioner for Ic0Factor {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        let (rp, ci, va) = (self.l.row_ptr(), self.l.col_idx(), self.l.values());
        let n = self.l.n();
        for i in 0..n {
            let (start, diag) = (rp[i], rp[i + 1] - 1);
            let mut s = r[i];
            for k in start..diag {
                s -= va[k] * z[ci[k]];
            }
            z[i] = s / va[diag];
        }
        for i in (0..n).rev() {
            let (start, diag) = (rp[i], rp[i + 1] - 1);
            z[i] /= va[diag];
            let zi = z[i];
            for k in start..diag {
                z[ci[k]] -= va[k] * zi;
            }
        }
    }
}

/// The shifts tried in order: `shift0`, then every value of the fixed
/// schedule larger than it.
pub fn shift_schedule(a: &CsrMatrix, shift0: f64) -> Vec<f64> {
    let max_diag = a.diagonal().into_iter().fold(0.0, f64::max);
    let mut fixed = vec![1e-8, 1e-6, 1e-4, 1e-3, 1e-2, 0.1 * max_diag];
    fixed.sort_by(f64::total_cmp);
    let mut out = vec![shift0];
    for s in fixed {
        if s > *out.last().unwrap() {
            out.push(s);
        }
    }
    out
}

/// IC(0) of `a`, escalating the diagonal shift until every pivot succeeds.
pub fn ic0_factorize(a: &CsrMatrix, shift0: f64) -> Result<Ic0Factor> {
    if !a.is_symmetric() {
        return Err(Error::NotSymmetric { asymmetry: a.asymmetry() });
    }
    if !(shift0 >= 0.0) {
        return Err(Error::InvalidArgument(format!("shift must be nonnegative, got {shift0}")));
    }
    let diag = a.diagonal();
    if let Some(i) = diag.iter().position(|&d| !(d > 0.0)) {
        return Err(Error::InvalidArgument(format!("diagonal entry {i} is not positive")));
    }

    // lower pattern with the diagonal last in each row
    let n = a.n();
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut col_idx = Vec::new();
    let mut base = Vec::new();
    row_ptr.push(0);
    for i in 0..n {
        for (j, v) in a.row(i).filter(|&(j, _)| j <= i) {
            col_idx.push(j);
            base.push(v);
        }
        row_ptr.push(col_idx.len());
    }

    let mut last_failure = (0, shift0);
    for (attempt, shift) in shift_schedule(a, shift0).into_iter().enumerate() {
        match factor_pattern(&row_ptr, &col_idx, &base, &diag, shift) {
            Ok(values) => {
                let l = CsrMatrix::from_raw(n, row_ptr, col_idx, values, false)?;
                return Ok(Ic0Factor { l, shift, attempts: attempt });
            }
            Err(row) => last_failure = (row, shift),
        }
    }
    Err(Error::Ic0Failed { row: last_failure.0, shift: last_failure.1 })
}

/// Row-oriented IC(0) restricted to the given lower pattern. Returns the
/// failing row on a bad pivot.
fn factor_pattern(
    row_ptr: &[usize],
    col_idx: &[usize],
    base: &[f64],
    diag: &[f64],
    shift: f64,
) -> std::result::Result<Vec<f64>, usize> {
    let n = diag.len();
    let mut l = base.to_vec();
    for i in 0..n {
        let (start, end) = (row_ptr[i], row_ptr[i + 1]);
        let dpos = end - 1;
        for p in start..dpos {
            let k = col_idx[p];
            // sum_{j<k} L_ij L_kj over the shared pattern
            let (mut a, mut b) = (start, row_ptr[k]);
            let (a_end, b_end) = (p, row_ptr[k + 1] - 1);
            let mut s = 0.0;
            while a < a_end && b < b_end {
                match col_idx[a].cmp(&col_idx[b]) {
                    std::cmp::Ordering::Less => a += 1,
                    std::cmp::Ordering::Greater => b += 1,
                    std::cmp::Ordering::Equal => {
                        s += l[a] * l[b];
                        a += 1;
                        b += 1;
                    }
                }
            }
            l[p] = (l[p] - s) / l[row_ptr[k + 1] - 1];
        }
        let sq: f64 = l[start..dpos].iter().map(|v| v * v).sum();
        let pivot = diag[i] * (1.0 + shift) - sq;
        if !(pivot > PIVOT_TOL * diag[i]) {
            return Err(i);
        }
        l[dpos] = pivot.sqrt();
    }
    Ok(l)
}

/// `z = L^{-T} L^{-1} r`
pub fn precond_apply(f: &Ic0Factor, r: &[f64]) -> Result<Vec<f64>> {
    if r.len() != f.n() {
        return Err(Error::DimensionMismatch { expected: f.n(), found: r.len() });
    }
    Ok(f.solve(r))
}

/// `z = (I - QQ^T) P (I - QQ^T) r` with `P` the IC(0) solve.
pub fn projected_precond_apply(f: &Ic0Factor, q: &DeflationBasis, r: &[f64]) -> Result<Vec<f64>> {
    if r.len() != f.n() {
        return Err(Error::DimensionMismatch { expected: f.n(), found: r.len() });
    }
    let mut t = r.to_vec();
    q.project(&mut t);
    let mut z = f.solve(&t);
    q.project(&mut z);
    Ok(z)
}
