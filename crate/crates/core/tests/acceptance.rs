//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.

use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use lapeig::graph::{read_graph_file, stats, InputFormat};
use lapeig::harness::verify_pairs;
use lapeig::ic0::ic0_factorize;
use lapeig::pcg::{pcg_solve, DeflationBasis};
use lapeig::spectral::{
    choose_sigma, cut_weight, dense_smallest_pairs, gap_ratios, partition_relaxed, pinv_apply, pinv_materialize,
    PinvApprox, SigmaPolicy,
};
use lapeig::{build_laplacian, fixtures, run, CsrMatrix, EdgeList, MvpCounter, RunConfig, SolverKind};

type Outcome = Result<String, String>;

struct Fixture {
    name: &'static str,
    a: CsrMatrix,
}

fn corpus() -> Vec<Fixture> {
    let f = |name, g: EdgeList| Fixture { name, a: build_laplacian(&g) };
    vec![
        f("P3", fixtures::path(3)),
        f("P4", fixtures::path(4)),
        f("C4", fixtures::cycle(4)),
        f("K3", fixtures::complete(3)),
        f("S4", fixtures::star(4)),
        f("random n=50", fixtures::random_connected(50, 4.0, 50)),
        f("random n=200", fixtures::random_connected(200, 5.0, 200)),
        f("geometric n=1000", fixtures::random_geometric(1000, 0.07, 1000)),
    ]
}

/// Ascending eigenvalues and matching eigenvectors from nalgebra.
fn oracle(a: &CsrMatrix) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.n();
    let m = DMatrix::from_fn(n, n, |i, j| a.get(i, j));
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = order.iter().map(|&i| eig.eigenvectors.column(i).iter().copied().collect()).collect();
    (values, vectors)
}

fn config(neig: usize, delta: f64, seed: u64) -> RunConfig {
    RunConfig { neig, delta, seed, ..RunConfig::default() }
}

fn kernel(a: &CsrMatrix) -> DeflationBasis {
    DeflationBasis::kernel(a.n())
}

fn neig_values(n: usize) -> Vec<usize> {
    let mut v: Vec<usize> = [1, 5, 20].iter().map(|&k| k.min(n - 1)).collect();
    v.dedup();
    v
}

fn oracle_equivalence(corpus: &[Fixture]) -> Outcome {
    let started = Instant::now();
    let mut worst: f64 = 0.0;
    let mut runs = 0;
    for fx in corpus {
        let (want, _) = oracle(&fx.a);
        for neig in neig_values(fx.a.n()) {
            let out = run(&fx.a, &kernel(&fx.a), &config(neig, 1e-6, 7)).map_err(|e| format!("{}: {e}", fx.name))?;
            for r in &out.runs {
                let rep = &r.report;
                if !rep.converged {
                    return Err(format!("{} neig={neig}: {} did not converge ({:?})", fx.name, rep.solver, rep.note));
                }
                for (got, w) in rep.eigenvalues.iter().zip(&want[1..]) {
                    let rel = (got - w).abs() / w;
                    worst = worst.max(rel);
                    if rel > 1e-5 {
                        return Err(format!("{} neig={neig} {}: {got} vs {w} (rel {rel:.2e})", fx.name, rep.solver));
                    }
                }
                runs += 1;
            }
        }
    }
    let secs = started.elapsed().as_secs_f64();
    if secs > 10.0 {
        return Err(format!("values match but took {secs:.1} s"));
    }
    Ok(format!("{runs} solver runs, worst relative error {worst:.1e}, {secs:.2} s"))
}

fn residual_contract(corpus: &[Fixture], clustered: &CsrMatrix) -> Outcome {
    let mut checked = 0;
    let mut worst: f64 = 0.0;
    let all = corpus.iter().map(|f| (f.name, &f.a)).chain(std::iter::once(("clustered", clustered)));
    for (name, a) in all {
        for delta in [1e-3, 1e-6] {
            let neig = 5.min(a.n() - 1);
            let out = run(a, &kernel(a), &config(neig, delta, 3)).map_err(|e| e.to_string())?;
            for r in &out.runs {
                let pairs = r.pairs.as_ref().ok_or(format!("{name}: {} failed", r.report.solver))?;
                let res = verify_pairs(a, pairs, delta)
                    .map_err(|e| format!("{name} {} delta={delta}: {e}", r.report.solver))?;
                worst = worst.max(res.iter().copied().fold(0.0, f64::max) / delta);
                checked += res.len();
            }
        }
    }
    Ok(format!("{checked} pairs, worst residual {worst:.2} x delta"))
}

fn orthogonality(corpus: &[Fixture]) -> Outcome {
    let mut worst_gram: f64 = 0.0;
    let mut worst_kernel: f64 = 0.0;
    for fx in corpus {
        let n = fx.a.n();
        for neig in neig_values(n) {
            let out = run(&fx.a, &kernel(&fx.a), &config(neig, 1e-6, 11)).map_err(|e| e.to_string())?;
            for r in &out.runs {
                let pairs = r.pairs.as_ref().ok_or(format!("{}: {} failed", fx.name, r.report.solver))?;
                let v = &pairs.vectors;
                for i in 0..v.len() {
                    let s: f64 = v[i].iter().sum();
                    worst_kernel = worst_kernel.max(s.abs() / (n as f64).sqrt());
                    for j in i + 1..v.len() {
                        let d: f64 = v[i].iter().zip(&v[j]).map(|(x, y)| x * y).sum();
                        worst_gram = worst_gram.max(d.abs());
                    }
                }
            }
        }
    }
    if worst_gram > 1e-8 || worst_kernel > 1e-8 {
        return Err(format!("gram {worst_gram:.1e}, kernel overlap {worst_kernel:.1e}"));
    }
    Ok(format!("max off-diagonal gram {worst_gram:.1e}, max kernel overlap {worst_kernel:.1e}"))
}

fn ic0_exactness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut cases: Vec<(Vec<f64>, Vec<f64>)> =
        vec![(vec![2.0; 50], vec![-1.0; 49]), (vec![4.0, 5.0, 6.0], vec![1.0, -2.0])];
    for n in [2, 10, 100] {
        let off: Vec<f64> = (0..n - 1).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let diag: Vec<f64> = (0..n).map(|_| 2.0 + rng.gen_range(0.0..1.0)).collect();
        cases.push((diag, off));
    }
    let mut worst: f64 = 0.0;
    let mut max_its = 0;
    for (diag, off) in &cases {
        let n = diag.len();
        let a = CsrMatrix::tridiagonal(diag, off).map_err(|e| e.to_string())?;
        let f = ic0_factorize(&a, 0.0).map_err(|e| e.to_string())?;
        if f.shift() != 0.0 {
            return Err(format!("n={n}: needed shift {}", f.shift()));
        }
        let dense = DMatrix::from_fn(n, n, |i, j| a.get(i, j));
        let chol = dense.cholesky().ok_or("oracle Cholesky failed")?;
        let l = chol.l();
        let got = f.l().to_dense();
        for i in 0..n {
            for j in 0..n {
                worst = worst.max((got[i][j] - l[(i, j)]).abs());
            }
        }
        let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let out = pcg_solve(&a, &f, &b, 1e-12, 10, &DeflationBasis::empty(), &mut MvpCounter::new())
            .map_err(|e| e.to_string())?;
        if !out.converged || out.iterations > 2 {
            return Err(format!("n={n}: PCG took {} iterations (converged {})", out.iterations, out.converged));
        }
        max_its = max_its.max(out.iterations);
    }
    if worst > 1e-14 {
        return Err(format!("max entry difference {worst:.1e}"));
    }
    Ok(format!("{} tridiagonal matrices, max difference {worst:.1e}, PCG iterations <= {max_its}", cases.len()))
}

/// Smallest cut over all splits with `n1` nodes on one side.
fn brute_min_cut(a: &CsrMatrix, n1: usize) -> f64 {
    let n = a.n();
    let mut best = f64::INFINITY;
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != n1 {
            continue;
        }
        let labels: Vec<bool> = (0..n).map(|i| mask >> i & 1 == 1).collect();
        best = best.min(cut_weight(a, &labels));
    }
    best
}

fn check_partition_bound(g: &EdgeList) -> Result<bool, String> {
    let a = build_laplacian(g);
    if a.components().0 != 1 {
        return Ok(false);
    }
    let n = a.n();
    let pairs = dense_smallest_pairs(&a, 1).map_err(|e| e.to_string())?;
    for n1 in 1..n {
        let n2 = n - n1;
        let (x, value) = partition_relaxed(&pairs, n1, n2).map_err(|e| e.to_string())?;
        let xx: f64 = x.iter().map(|v| v * v).sum();
        let ex: f64 = x.iter().sum();
        if (xx - n as f64 / 4.0).abs() > 1e-10 || (ex - (n1 as f64 - n2 as f64) / 2.0).abs() > 1e-10 {
            return Err(format!("constraints violated on {g:?} split ({n1},{n2}): x'x={xx}, e'x={ex}"));
        }
        let cut = brute_min_cut(&a, n1);
        if value > cut + 1e-10 {
            return Err(format!("relaxed value {value} exceeds min cut {cut} on {g:?} split ({n1},{n2})"));
        }
    }
    Ok(true)
}

fn partition_relaxation() -> Outcome {
    let started = Instant::now();
    let mut graphs = 0;
    // every labeled graph on up to 6 nodes
    for n in 2..=6usize {
        let slots: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
        for mask in 0u32..(1 << slots.len()) {
            let pairs: Vec<(usize, usize)> =
                slots.iter().enumerate().filter(|(k, _)| mask >> k & 1 == 1).map(|(_, &p)| p).collect();
            if pairs.len() + 1 < n {
                continue;
            }
            let g = EdgeList::unweighted(n, &pairs).map_err(|e| e.to_string())?;
            if check_partition_bound(&g)? {
                graphs += 1;
            }
        }
    }
    // random connected graphs on 7 to 10 nodes, sparse to dense
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut sampled = 0;
    for n in 7..=10usize {
        for _ in 0..150 {
            let p = rng.gen_range(0.15..0.9);
            let pairs: Vec<(usize, usize)> =
                (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).filter(|_| rng.gen_bool(p)).collect();
            let g = EdgeList::unweighted(n, &pairs).map_err(|e| e.to_string())?;
            if check_partition_bound(&g)? {
                sampled += 1;
            }
        }
    }
    let secs = started.elapsed().as_secs_f64();
    if secs > 5.0 {
        return Err(format!("bound holds but took {secs:.1} s"));
    }
    Ok(format!("{graphs} connected graphs with n <= 6 (all), {sampled} random with n = 7..10, {secs:.2} s"))
}

fn frobenius_diff(a: &[Vec<f64>], b: &DMatrix<f64>) -> f64 {
    let mut s = 0.0;
    for (i, row) in a.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            s += (v - b[(i, j)]).powi(2);
        }
    }
    s.sqrt()
}

fn dense_pinv(a: &CsrMatrix) -> DMatrix<f64> {
    let (values, vectors) = oracle(a);
    let n = a.n();
    let mut g = DMatrix::zeros(n, n);
    for (l, v) in values.iter().zip(&vectors).skip(1) {
        let v = nalgebra::DVector::from_column_slice(v);
        g += &v * v.transpose() / *l;
    }
    g
}

fn pseudoinverse(corpus: &[Fixture]) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst_exact: f64 = 0.0;
    let mut comparisons = 0;
    for fx in corpus {
        let a = &fx.a;
        let n = a.n();
        let gplus = dense_pinv(a);
        if n <= 100 {
            // all positive pairs, k = n in the T^(k) indexing
            let pairs = dense_smallest_pairs(a, n - 1).map_err(|e| e.to_string())?;
            let t = PinvApprox::truncated(&pairs, n).map_err(|e| e.to_string())?;
            for _ in 0..5 {
                let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let got = pinv_apply(&t, &v).map_err(|e| e.to_string())?;
                let want = &gplus * nalgebra::DVector::from_column_slice(&v);
                for i in 0..n {
                    worst_exact = worst_exact.max((got[i] - want[i]).abs());
                }
            }
        }
        for k in [2usize, 5, 10] {
            if k > n {
                continue;
            }
            let out = run(a, &kernel(a), &RunConfig { solvers: vec![SolverKind::Jd], ..config(k - 1, 1e-10, 2) })
                .map_err(|e| e.to_string())?;
            let pairs = out.runs[0].pairs.clone().ok_or(format!("{}: JD failed", fx.name))?;
            let sigma = choose_sigma(a, &pairs, k, SigmaPolicy::Midpoint, 9).map_err(|e| e.to_string())?;
            let t = PinvApprox::truncated(&pairs, k).map_err(|e| e.to_string())?;
            let s = PinvApprox::shifted(&pairs, k, sigma).map_err(|e| e.to_string())?;
            let et = frobenius_diff(&pinv_materialize(&t, n).map_err(|e| e.to_string())?, &gplus);
            let es = frobenius_diff(&pinv_materialize(&s, n).map_err(|e| e.to_string())?, &gplus);
            // equal up to rounding when no eigenvalue is left out (k = n)
            if es > et + 1e-12 * gplus.norm() {
                return Err(format!("{} k={k}: |G+ - S| = {es:.4e} > |G+ - T| = {et:.4e}", fx.name));
            }
            comparisons += 1;
        }
    }
    if worst_exact > 1e-8 {
        return Err(format!("full-rank truncated operator off by {worst_exact:.1e}"));
    }
    Ok(format!("exact action error {worst_exact:.1e}; shifted beats truncated in {comparisons}/{comparisons} cases"))
}

fn cost_ordering(clustered: &CsrMatrix) -> Outcome {
    let out = run(clustered, &kernel(clustered), &config(20, 1e-6, 1)).map_err(|e| e.to_string())?;
    let mvp =
        |k: SolverKind| out.runs.iter().find(|r| r.report.solver == k).map(|r| (r.report.mvp, r.report.converged));
    let (dacg, jd, irlm) =
        (mvp(SolverKind::Dacg).unwrap(), mvp(SolverKind::Jd).unwrap(), mvp(SolverKind::Irlm).unwrap());
    let line = format!("MVP dacg {} jd {} irlm {}", dacg.0, jd.0, irlm.0);
    if !(dacg.1 && jd.1 && irlm.1) {
        return Err(format!("not all converged: {line}"));
    }
    if jd.0 <= irlm.0 && dacg.0 > jd.0 {
        Ok(line)
    } else {
        Err(line)
    }
}

fn determinism(clustered: &CsrMatrix) -> Outcome {
    let a = build_laplacian(&fixtures::random_connected(200, 5.0, 200));
    let mut compared = 0;
    for (m, parallel) in [(&a, false), (clustered, false), (clustered, true)] {
        let cfg = RunConfig { parallel, ..config(10, 1e-6, 99) };
        let first = run(m, &kernel(m), &cfg).map_err(|e| e.to_string())?;
        let second = run(m, &kernel(m), &RunConfig { parallel: false, ..cfg.clone() }).map_err(|e| e.to_string())?;
        for (x, y) in first.runs.iter().zip(&second.runs) {
            let bits = |v: &[f64]| v.iter().map(|f| f.to_bits()).collect::<Vec<_>>();
            if bits(&x.report.eigenvalues) != bits(&y.report.eigenvalues)
                || x.report.mvp != y.report.mvp
                || x.report.outer_its != y.report.outer_its
                || x.report.inner_its_total != y.report.inner_its_total
            {
                return Err(format!("{} differs between identical runs", x.report.solver));
            }
            compared += 1;
        }
    }
    Ok(format!("{compared} repeated solver runs bit-identical"))
}

struct Dataset {
    name: &'static str,
    n: usize,
    nnz: usize,
    anzr: f64,
    gap: f64,
}

const DATASETS: [Dataset; 4] = [
    Dataset { name: "protein", n: 1453, nnz: 5344, anzr: 3.7, gap: 7.28 },
    Dataset { name: "internet", n: 22963, nnz: 119835, anzr: 5.2, gap: 4.39 },
    Dataset { name: "www", n: 325729, nnz: 2505945, anzr: 7.8, gap: 23.25 },
    Dataset { name: "dblp", n: 928498, nnz: 8628378, anzr: 9.3, gap: 2.11 },
];

fn find_dataset(dir: &Path, name: &str) -> Option<PathBuf> {
    ["mtx", "txt", "edges", "el"].iter().map(|ext| dir.join(format!("{name}.{ext}"))).find(|p| p.exists())
}

/// `None` when no dataset directory is configured.
fn gap_statistics() -> Option<Outcome> {
    let dir = PathBuf::from(std::env::var_os("LAPEIG_DATASETS")?);
    let mut lines = Vec::new();
    for d in &DATASETS {
        let Some(path) = find_dataset(&dir, d.name) else {
            lines.push(format!("{} absent", d.name));
            continue;
        };
        let result = (|| -> Outcome {
            let g = read_graph_file(&path, InputFormat::from_path(&path), true).map_err(|e| e.to_string())?;
            let s = stats(&g);
            if s.n != d.n || s.nnz != d.nnz || format!("{:.1}", s.anzr) != format!("{:.1}", d.anzr) {
                return Err(format!("{}: stats n={} nnz={} anzr={:.1}", d.name, s.n, s.nnz, s.anzr));
            }
            let (a, _) = lapeig::harness::prepare_laplacian(&g, true).map_err(|e| e.to_string())?;
            let out = run(&a, &kernel(&a), &RunConfig { solvers: vec![SolverKind::Jd], ..config(50, 1e-6, 1) })
                .map_err(|e| e.to_string())?;
            let (gap, _) = gap_ratios(&out.runs[0].report.eigenvalues).map_err(|e| e.to_string())?;
            if (gap - d.gap).abs() > 0.005 * d.gap {
                return Err(format!("{}: gap {gap:.3} vs {}", d.name, d.gap));
            }
            Ok(format!("{} gap {gap:.2}", d.name))
        })();
        match result {
            Ok(l) => lines.push(l),
            Err(e) => return Some(Err(e)),
        }
    }
    Some(Ok(lines.join(", ")))
}

fn main() {
    let corpus = corpus();
    let clustered = build_laplacian(&fixtures::clustered(1000, 1));
    let mut failed = 0;
    let mut report = |id: usize, name: &str, outcome: Option<Outcome>| match outcome {
        Some(Ok(detail)) => println!("[PASS] {id}. {name}: {detail}"),
        Some(Err(detail)) => {
            failed += 1;
            println!("[FAIL] {id}. {name}: {detail}");
        }
        None => println!("[SKIP] {id}. {name}: LAPEIG_DATASETS not set"),
    };
    report(1, "oracle equivalence", Some(oracle_equivalence(&corpus)));
    report(2, "residual contract", Some(residual_contract(&corpus, &clustered)));
    report(3, "orthogonality", Some(orthogonality(&corpus)));
    report(4, "IC(0) exactness on tridiagonal matrices", Some(ic0_exactness()));
    report(5, "partition relaxation lower bound", Some(partition_relaxation()));
    report(6, "pseudoinverse approximations", Some(pseudoinverse(&corpus)));
    report(7, "solver cost ordering on the clustered fixture", Some(cost_ordering(&clustered)));
    report(8, "determinism", Some(determinism(&clustered)));
    report(9, "dataset statistics and spectral gaps", gap_statistics());
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
