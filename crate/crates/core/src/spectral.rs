//! Spectral graph tools: Fiedler pair, relaxed two-way partitioning, gap and
//! separation ratios, and low-rank approximations of the Laplacian
//! pseudoinverse.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dacg::{dacg_smallest, DacgParams};
use crate::dense::{dense_sym_eig_capped, DenseSym};
use crate::eigenpairs::EigenPairSet;
use crate::error::{Error, Result};
use crate::graph::CsrMatrix;
use crate::ic0::ic0_factorize;
use crate::irlm::{irlm_smallest, IrlmParams};
use crate::jd::{jd_smallest, JdParams};
use crate::kernels::{axpy, dot, norm, scale, spmv, MvpCounter};
use crate::pcg::DeflationBasis;
use crate::report::SolverKind;

/// Shift used when factorizing a Laplacian for preconditioning.
pub const DEFAULT_IC0_SHIFT: f64 = 1e-3;

/// Dense pseudoinverses are refused above this dimension.
pub const MATERIALIZE_CAP: usize = 2000;

/// Runs one solver for the `neig` smallest positive eigenpairs of a
/// connected graph's Laplacian, deflating the constant vector.
pub fn smallest_pairs(a: &CsrMatrix, solver: SolverKind, neig: usize, delta: f64, seed: u64) -> Result<EigenPairSet> {
    let (count, _) = a.components();
    if count != 1 {
        return Err(Error::Disconnected { components: count });
    }
    let f = ic0_factorize(a, DEFAULT_IC0_SHIFT)?;
    let null = DeflationBasis::kernel(a.n());
    let pairs = match solver {
        SolverKind::Dacg => {
            let mut p = DacgParams::new(neig, delta);
            p.seed = seed;
            dacg_smallest(a, &f, &null, &p)?.0
        }
        SolverKind::Jd => {
            let mut p = JdParams::new(neig, delta);
            p.seed = seed;
            jd_smallest(a, &f, &null, &p)?.0
        }
        SolverKind::Irlm => {
            let mut p = IrlmParams::new(neig, delta);
            p.seed = seed;
            irlm_smallest(a, &f, &null, &p)?.0
        }
    };
    Ok(pairs)
}

/// Algebraic connectivity `lambda_2` and a unit Fiedler vector.
pub fn fiedler(a: &CsrMatrix, solver: SolverKind, delta: f64) -> Result<(f64, Vec<f64>)> {
    let mut pairs = smallest_pairs(a, solver, 1, delta, 0)?;
    Ok((pairs.values[0], pairs.vectors.swap_remove(0)))
}

/// The `k` smallest positive eigenpairs from a dense eigen-decomposition,
/// for graphs small enough to handle densely. Errors on a disconnected graph.
pub fn dense_smallest_pairs(a: &CsrMatrix, k: usize) -> Result<EigenPairSet> {
    let n = a.n();
    let (count, _) = a.components();
    if count != 1 {
        return Err(Error::Disconnected { components: count });
    }
    if k + 1 > n {
        return Err(Error::InvalidArgument(format!("k = {k} exceeds n - 1 = {}", n - 1)));
    }
    let eig = dense_sym_eig_capped(&DenseSym::from_rows(&a.to_dense())?, MATERIALIZE_CAP)?;
    let mut counter = MvpCounter::new();
    let mut residuals = Vec::with_capacity(k);
    for v in &eig.vectors[1..=k] {
        residuals.push(crate::kernels::rayleigh_residual(a, v, &mut counter)?.1);
    }
    Ok(EigenPairSet::new(eig.values[1..=k].to_vec(), eig.vectors[1..=k].to_vec(), residuals))
}

/// Relaxed solution `x = (n1 - n2)/(2n) e + sqrt(n1 n2 / n) v_2` of the
/// two-way partition problem and its value `(n1 n2 / n) lambda_2`, a lower
/// bound on the cut of any split into parts of sizes `n1` and `n2`.
pub fn partition_relaxed(pairs: &EigenPairSet, n1: usize, n2: usize) -> Result<(Vec<f64>, f64)> {
    let v2 = pairs.vectors.first().ok_or_else(|| Error::InvalidArgument("no Fiedler pair available".into()))?;
    let n = v2.len();
    if n1 + n2 != n || n1 == 0 || n2 == 0 {
        return Err(Error::InvalidArgument(format!("split ({n1}, {n2}) is not a proper split of {n} nodes")));
    }
    let nf = n as f64;
    let (a, b) = (n1 as f64, n2 as f64);
    let c0 = (a - b) / (2.0 * nf);
    let c2 = (a * b / nf).sqrt() / norm(v2);
    let x = v2.iter().map(|v| c0 + c2 * v).collect();
    Ok((x, a * b / nf * pairs.values[0]))
}

/// Labels `true` for the `n1` nodes with the largest entries of `x`, ties
/// going to the smaller index.
pub fn sign_partition(x: &[f64], n1: usize, n2: usize) -> Result<Vec<bool>> {
    if n1 + n2 != x.len() {
        return Err(Error::InvalidArgument(format!("split ({n1}, {n2}) does not cover {} nodes", x.len())));
    }
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&i, &j| x[j].total_cmp(&x[i]).then(i.cmp(&j)));
    let mut labels = vec![false; x.len()];
    for &i in &order[..n1] {
        labels[i] = true;
    }
    Ok(labels)
}

/// Total weight of the edges crossing a two-way split.
pub fn cut_weight(a: &CsrMatrix, labels: &[bool]) -> f64 {
    let mut cut = 0.0;
    for i in 0..a.n() {
        for (j, v) in a.row(i) {
            if j > i && labels[i] != labels[j] {
                cut -= v;
            }
        }
    }
    cut
}

/// Value of `xi_j` reported when `lambda_{j+1} = lambda_j`.
pub const XI_INFINITE: f64 = f64::INFINITY;

/// Gap `lambda_last / lambda_first` and separation ratios
/// `xi_j = lambda_j / (lambda_{j+1} - lambda_j)` for ascending positive values.
/// Neighbours equal to 12 significant digits count as a multiple eigenvalue.
pub fn gap_ratios(values: &[f64]) -> Result<(f64, Vec<f64>)> {
    let (first, last) = match (values.first(), values.last()) {
        (Some(&f), Some(&l)) => (f, l),
        _ => return Err(Error::InvalidArgument("no eigenvalues".into())),
    };
    if !(first > 0.0) || values.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidArgument("eigenvalues must be positive and ascending".into()));
    }
    let xi = values
        .windows(2)
        .map(|w| {
            let d = w[1] - w[0];
            if d <= 1e-12 * w[1] {
                XI_INFINITE
            } else {
                w[0] / d
            }
        })
        .collect();
    Ok((last / first, xi))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PinvKind {
    /// `T^(k) = sum_{i=2}^k v_i v_i^T / lambda_i`
    Truncated,
    /// `S^(k) = (I - e e^T / n) / sigma + sum_{i=2}^k (1/lambda_i - 1/sigma) v_i v_i^T`
    Shifted,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum SigmaPolicy {
    /// `(lambda_k + lambda_n) / 2`
    #[default]
    Midpoint,
    /// `lambda_k`
    LambdaK,
}

impl std::str::FromStr for SigmaPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "midpoint" => Ok(SigmaPolicy::Midpoint),
            "lambdak" => Ok(SigmaPolicy::LambdaK),
            other => Err(Error::InvalidArgument(format!("unknown sigma policy {other:?}"))),
        }
    }
}

/// Low-rank approximation of the Laplacian pseudoinverse built from the
/// eigenpairs `lambda_2..lambda_k` (`k` counts the zero eigenvalue, so
/// `k = n` with all positive pairs gives the exact pseudoinverse).
#[derive(Clone, Debug)]
pub struct PinvApprox<'a> {
    kind: PinvKind,
    k: usize,
    sigma: f64,
    pairs: &'a EigenPairSet,
}

impl<'a> PinvApprox<'a> {
    pub fn truncated(pairs: &'a EigenPairSet, k: usize) -> Result<Self> {
        Self::check_rank(pairs, k)?;
        Ok(Self { kind: PinvKind::Truncated, k, sigma: 0.0, pairs })
    }

    pub fn shifted(pairs: &'a EigenPairSet, k: usize, sigma: f64) -> Result<Self> {
        Self::check_rank(pairs, k)?;
        if !(sigma > 0.0) {
            return Err(Error::InvalidArgument(format!("sigma must be positive, got {sigma}")));
        }
        Ok(Self { kind: PinvKind::Shifted, k, sigma, pairs })
    }

    fn check_rank(pairs: &EigenPairSet, k: usize) -> Result<()> {
        if k == 0 || k - 1 > pairs.len() {
            return Err(Error::InvalidArgument(format!(
                "rank k = {k} needs {} positive pairs, have {}",
                k.max(1) - 1,
                pairs.len()
            )));
        }
        Ok(())
    }

    pub fn kind(&self) -> PinvKind {
        self.kind
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }
}

/// Applies the approximation to `v` without forming a matrix.
pub fn pinv_apply(p: &PinvApprox<'_>, v: &[f64]) -> Result<Vec<f64>> {
    let n = p.pairs.vectors.first().map_or(v.len(), |u| u.len());
    if v.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: v.len() });
    }
    let mut out = vec![0.0; n];
    let tail = match p.kind {
        PinvKind::Truncated => 0.0,
        PinvKind::Shifted => {
            let mean = v.iter().sum::<f64>() / n as f64;
            for (o, x) in out.iter_mut().zip(v) {
                *o = (x - mean) / p.sigma;
            }
            1.0 / p.sigma
        }
    };
    for (lambda, u) in p.pairs.values.iter().zip(&p.pairs.vectors).take(p.k - 1) {
        axpy((1.0 / lambda - tail) * dot(u, v), u, &mut out);
    }
    Ok(out)
}

/// Dense matrix of the approximation; refused above [`MATERIALIZE_CAP`].
pub fn pinv_materialize(p: &PinvApprox<'_>, n: usize) -> Result<Vec<Vec<f64>>> {
    if n > MATERIALIZE_CAP {
        return Err(Error::TooLarge { dim: n, cap: MATERIALIZE_CAP });
    }
    let mut cols = Vec::with_capacity(n);
    let mut e = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        cols.push(pinv_apply(p, &e)?);
        e[j] = 0.0;
    }
    // symmetric, so columns are rows
    Ok(cols)
}

/// Estimates `lambda_n` by `iters` power iterations from a seeded random
/// start, returning the last Rayleigh quotient (a lower bound).
pub fn estimate_lambda_max(a: &CsrMatrix, iters: usize, seed: u64, counter: &mut MvpCounter) -> Result<f64> {
    let n = a.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let nx = norm(&x);
    scale(1.0 / nx, &mut x);
    let mut q = 0.0;
    for _ in 0..iters.max(1) {
        let y = spmv(a, &x, counter)?;
        q = dot(&x, &y);
        let ny = norm(&y);
        if ny == 0.0 {
            break;
        }
        x = y;
        scale(1.0 / ny, &mut x);
    }
    Ok(q)
}

/// Power iterations used for the midpoint shift.
pub const POWER_ITERATIONS: usize = 20;

/// The shift `sigma` for [`PinvKind::Shifted`] with rank `k`.
pub fn choose_sigma(a: &CsrMatrix, pairs: &EigenPairSet, k: usize, policy: SigmaPolicy, seed: u64) -> Result<f64> {
    PinvApprox::check_rank(pairs, k)?;
    let lambda_k = if k == 1 { 0.0 } else { pairs.values[k - 2] };
    let sigma = match policy {
        SigmaPolicy::LambdaK => lambda_k,
        SigmaPolicy::Midpoint => {
            let lambda_n = estimate_lambda_max(a, POWER_ITERATIONS, seed, &mut MvpCounter::new())?;
            0.5 * (lambda_k + lambda_n.max(lambda_k))
        }
    };
    if !(sigma > 0.0) {
        return Err(Error::InvalidArgument(format!("sigma = {sigma} is not positive")));
    }
    Ok(sigma)
}

/// Dense Moore-Penrose pseudoinverse of a connected graph's Laplacian,
/// `(G + J/n)^{-1} - J/n`, for reference computations on small graphs.
pub fn dense_pseudoinverse(a: &CsrMatrix) -> Result<Vec<Vec<f64>>> {
    let n = a.n();
    if n > MATERIALIZE_CAP {
        return Err(Error::TooLarge { dim: n, cap: MATERIALIZE_CAP });
    }
    let eig = dense_sym_eig_capped(&DenseSym::from_rows(&a.to_dense())?, MATERIALIZE_CAP)?;
    let mut out = vec![vec![0.0; n]; n];
    let tol = 1e-10 * eig.values.last().copied().unwrap_or(0.0).abs().max(1.0);
    for (lambda, v) in eig.values.iter().zip(&eig.vectors) {
        if *lambda <= tol {
            continue;
        }
        for i in 0..n {
            let s = v[i] / lambda;
            for j in 0..n {
                out[i][j] += s * v[j];
            }
        }
    }
    Ok(out)
}
