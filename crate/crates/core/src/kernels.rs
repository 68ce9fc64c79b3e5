//! Vector kernels, the counted sparse matrix-vector product and modified
//! Gram-Schmidt.

use rand::Rng;

use crate::dense::{dense_sym_eig, DenseSym};
use crate::error::{Error, Result};
use crate::graph::CsrMatrix;

/// Counts matrix-vector products. One tick per operator application.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MvpCounter {
    count: u64,
}

impl MvpCounter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self) -> u64 {
        self.count
    }

    pub(crate) fn tick(&mut self) {
        self.count += 1;
    }
}

/// A square linear operator whose applications are charged to an [`MvpCounter`].
pub trait LinearOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64], counter: &mut MvpCounter);
}

impl LinearOperator for CsrMatrix {
    fn dim(&self) -> usize {
        self.n()
    }

    fn apply(&self, x: &[f64], y: &mut [f64], counter: &mut MvpCounter) {
        spmv_into(self, x, y);
        counter.tick();
    }
}

/// `y = A x` without counting.
pub(crate) fn spmv_into(a: &CsrMatrix, x: &[f64], y: &mut [f64]) {
    let (rp, ci, va) = (a.row_ptr(), a.col_idx(), a.values());
    for (i, yi) in y.iter_mut().enumerate() {
        let mut s = 0.0;
        for k in rp[i]..rp[i + 1] {
            s += va[k] * x[ci[k]];
        }
        *yi = s;
    }
}

/// `A x`, charging one product to `counter`.
pub fn spmv(a: &CsrMatrix, x: &[f64], counter: &mut MvpCounter) -> Result<Vec<f64>> {
    if x.len() != a.n() {
        return Err(Error::DimensionMismatch { expected: a.n(), found: x.len() });
    }
    let mut y = vec![0.0; a.n()];
    a.apply(x, &mut y, counter);
    Ok(y)
}

#[inline]
pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

#[inline]
pub fn norm(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

/// `y += alpha x`
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[inline]
pub fn scale(alpha: f64, x: &mut [f64]) {
    for xi in x.iter_mut() {
        *xi *= alpha;
    }
}

/// `sum_k coeffs[k] * cols[k]`
pub fn combine(cols: &[Vec<f64>], coeffs: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n];
    for (c, col) in coeffs.iter().zip(cols) {
        axpy(*c, col, &mut out);
    }
    out
}

/// One modified Gram-Schmidt sweep of `v` against orthonormal `basis`.
pub fn orthogonalize_against(v: &mut [f64], basis: &[Vec<f64>]) {
    for q in basis {
        let c = dot(q, v);
        axpy(-c, q, v);
    }
}

const REORTH_FACTOR: f64 = 0.7;
const BREAKDOWN_RATIO: f64 = 1e-14;

/// Orthogonalizes `v` against the orthonormal columns of `basis` and normalizes it.
///
/// A second sweep runs whenever the first one shrinks the norm below 0.7 of
/// its input. Returns the unit vector and its norm just before normalization.
/// Fails with [`Error::LinearDependence`] when `v` lies in the span of the
/// basis (remaining norm below `1e-14 * |v|`).
pub fn mgs_orthonormalize(v: &[f64], basis: &[Vec<f64>]) -> Result<(Vec<f64>, f64)> {
    mgs_orthonormalize_multi(v, &[basis])
}

/// [`mgs_orthonormalize`] against the union of several mutually orthogonal
/// orthonormal sets.
pub fn mgs_orthonormalize_multi(v: &[f64], bases: &[&[Vec<f64>]]) -> Result<(Vec<f64>, f64)> {
    if let Some(q) = bases.iter().flat_map(|b| b.iter()).find(|q| q.len() != v.len()) {
        return Err(Error::DimensionMismatch { expected: v.len(), found: q.len() });
    }
    let original = norm(v);
    let mut out = v.to_vec();
    let mut before = original;
    for _ in 0..2 {
        for basis in bases {
            orthogonalize_against(&mut out, basis);
        }
        let after = norm(&out);
        if after >= REORTH_FACTOR * before {
            break;
        }
        before = after;
    }
    let nrm = norm(&out);
    if !(nrm > BREAKDOWN_RATIO * original) {
        return Err(Error::LinearDependence { residual: nrm });
    }
    scale(1.0 / nrm, &mut out);
    Ok((out, nrm))
}

/// Random unit vector orthogonal to every column of `against`, or `None`
/// when those columns already span the space.
pub(crate) fn random_orthonormal<R: Rng>(rng: &mut R, n: usize, against: &[&[Vec<f64>]]) -> Option<Vec<f64>> {
    if against.iter().map(|b| b.len()).sum::<usize>() >= n {
        return None;
    }
    for _ in 0..10 {
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        if let Ok((u, _)) = mgs_orthonormalize_multi(&v, against) {
            return Some(u);
        }
    }
    None
}

/// Rayleigh quotient `theta` of `u` and the relative residual
/// `|A u - theta u| / (|theta| |u|)`. Costs one product.
pub fn rayleigh_residual(a: &CsrMatrix, u: &[f64], counter: &mut MvpCounter) -> Result<(f64, f64)> {
    let au = spmv(a, u, counter)?;
    let uu = dot(u, u);
    let theta = dot(u, &au) / uu;
    let mut r = au;
    axpy(-theta, u, &mut r);
    Ok((theta, norm(&r) / (theta.abs() * uu.sqrt())))
}

/// Ritz values, Ritz vectors and relative residuals.
pub(crate) type RitzTriple = (Vec<f64>, Vec<Vec<f64>>, Vec<f64>);

/// Rayleigh-Ritz on the span of the orthonormal `basis`, returning ascending
/// values, Ritz vectors and relative residuals. Costs one product per column.
pub(crate) fn rayleigh_ritz_polish(a: &CsrMatrix, basis: &[Vec<f64>], counter: &mut MvpCounter) -> Result<RitzTriple> {
    let n = a.n();
    let k = basis.len();
    let images = basis.iter().map(|v| spmv(a, v, counter)).collect::<Result<Vec<_>>>()?;
    let mut h = DenseSym::zeros(k);
    for i in 0..k {
        for j in 0..=i {
            let hij = 0.5 * (dot(&basis[i], &images[j]) + dot(&basis[j], &images[i]));
            h.set_sym(i, j, hij);
        }
    }
    let eig = dense_sym_eig(&h)?;
    let mut vectors = Vec::with_capacity(k);
    let mut residuals = Vec::with_capacity(k);
    for (theta, y) in eig.values.iter().zip(&eig.vectors) {
        let v = combine(basis, y, n);
        let mut r = combine(&images, y, n);
        axpy(-theta, &v, &mut r);
        residuals.push(if *theta > 0.0 { norm(&r) / theta } else { f64::INFINITY });
        vectors.push(v);
    }
    Ok((eig.values, vectors, residuals))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_laplacian, EdgeList};

    #[test]
    fn spmv_examples() {
        let p3 = build_laplacian(&EdgeList::unweighted(3, &[(0, 1), (1, 2)]).unwrap());
        let mut c = MvpCounter::new();
        assert_eq!(spmv(&p3, &[0.0; 3], &mut c).unwrap(), vec![0.0; 3]);
        assert_eq!(spmv(&p3, &[1.0; 3], &mut c).unwrap(), vec![0.0; 3]);
        let id = CsrMatrix::identity(4);
        assert_eq!(spmv(&id, &[1.0, -2.0, 3.0, 0.5], &mut c).unwrap(), vec![1.0, -2.0, 3.0, 0.5]);
        assert_eq!(c.get(), 3);
        assert!(matches!(spmv(&p3, &[1.0; 2], &mut c), Err(Error::DimensionMismatch { .. })));
        assert_eq!(c.get(), 3);
    }

    #[test]
    fn mgs_examples() {
        let e1 = vec![1.0, 0.0, 0.0];
        let basis = vec![e1.clone()];
        assert!(matches!(mgs_orthonormalize(&e1, &basis), Err(Error::LinearDependence { .. })));

        let (u, nrm) = mgs_orthonormalize(&[0.0, 3.0, 4.0], &basis).unwrap();
        for (got, want) in u.iter().zip([0.0, 0.6, 0.8]) {
            assert!((got - want).abs() <= 1e-15);
        }
        assert_eq!(nrm, 5.0);

        let (u, nrm) = mgs_orthonormalize(&[1.0, 1.0, 0.0], &basis).unwrap();
        assert_eq!(u, vec![0.0, 1.0, 0.0]);
        assert_eq!(nrm, 1.0);
    }

    #[test]
    fn mgs_reorthogonalizes_nearly_dependent_input() {
        // almost parallel to the first basis vector: a single sweep loses digits
        let s = 1.0 / 2f64.sqrt();
        let basis = vec![vec![s, s, 0.0, 0.0], vec![0.0, 0.0, 1.0, 0.0]];
        let v = vec![s + 1e-9, s, 1e-9, 1e-9];
        let (u, _) = mgs_orthonormalize(&v, &basis).unwrap();
        for q in &basis {
            assert!(dot(q, &u).abs() < 1e-10);
        }
        assert!((norm(&u) - 1.0).abs() < 1e-14);
    }
}
