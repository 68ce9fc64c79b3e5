use lapeig::harness::{prepare_laplacian, verify_pairs};
use lapeig::jd::{jd_restart, rayleigh_ritz_extract, JdWorkspace};
use lapeig::kernels::mgs_orthonormalize;
use lapeig::{
    build_laplacian, dacg_smallest, fixtures, ic0_factorize, irlm_smallest, jd_smallest, run, spmv, CsrMatrix,
    DacgParams, DeflationBasis, EdgeList, IrlmParams, JdParams, MvpCounter, RunConfig, SolverKind,
};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn oracle(a: &CsrMatrix, k: usize) -> Vec<f64> {
    let n = a.n();
    let d = a.to_dense();
    let mut v: Vec<f64> =
        DMatrix::from_fn(n, n, |i, j| d[i][j]).symmetric_eigen().eigenvalues.iter().copied().collect();
    v.sort_by(|x, y| x.partial_cmp(y).unwrap());
    v[1..=k].to_vec()
}

fn check_all(name: &str, a: &CsrMatrix, neig: usize, delta: f64, seed: u64) {
    let want = oracle(a, neig);
    let cfg = RunConfig { neig, delta, seed, ..Default::default() };
    let out = run(a, &DeflationBasis::kernel(a.n()), &cfg).unwrap();
    assert!(out.disagreements.is_empty(), "{name}: {:?}", out.disagreements);
    for r in &out.runs {
        let pairs = r.pairs.as_ref().unwrap_or_else(|| panic!("{name} {}: {:?}", r.report.solver, r.report.note));
        for (g, w) in pairs.values.iter().zip(&want) {
            assert!((g - w).abs() <= 1e-5 * w, "{name} {}: {g} vs {w}", r.report.solver);
        }
        assert!(pairs.residuals.iter().all(|&x| x <= delta));
        assert!(pairs.orthonormality_error() < 1e-8);
    }
}

#[test]
fn repeated_eigenvalues_are_found_with_multiplicity() {
    check_all("star", &build_laplacian(&fixtures::star(30)), 6, 1e-8, 1);
    check_all("grid", &build_laplacian(&fixtures::grid(6, 6)), 10, 1e-6, 2);
    check_all("cycle", &build_laplacian(&fixtures::cycle(24)), 7, 1e-8, 3);
    check_all("complete", &build_laplacian(&fixtures::complete(12)), 5, 1e-8, 4);
}

#[test]
fn whole_spectrum_of_small_graphs() {
    for (name, g) in
        [("path", fixtures::path(15)), ("rc", fixtures::random_connected(20, 2.5, 7)), ("grid", fixtures::grid(4, 5))]
    {
        let a = build_laplacian(&g);
        check_all(name, &a, a.n() - 1, 1e-8, 5);
    }
}

#[test]
fn medium_graphs_loose_and_tight() {
    let a = build_laplacian(&fixtures::random_geometric(600, 0.08, 11));
    check_all("rgg", &a, 8, 1e-3, 1);
    check_all("rgg", &a, 8, 1e-9, 1);
    let a = build_laplacian(&fixtures::clustered(500, 3));
    check_all("clustered", &a, 12, 1e-6, 2);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn random_graphs_match_oracle(n in 6usize..40, deg in 2.0f64..6.0, seed in 0u64..10_000, neig in 1usize..6) {
        let a = build_laplacian(&fixtures::random_connected(n, deg, seed));
        check_all("random", &a, neig.min(n - 1), 1e-7, seed);
    }
}

#[test]
fn solvers_are_deterministic() {
    let a = build_laplacian(&fixtures::random_connected(150, 5.0, 9));
    let f = ic0_factorize(&a, 1e-3).unwrap();
    let null = DeflationBasis::kernel(150);
    let mut dp = DacgParams::new(4, 1e-7);
    dp.seed = 8;
    let mut jp = JdParams::new(4, 1e-7);
    jp.seed = 8;
    let mut ip = IrlmParams::new(4, 1e-7);
    ip.seed = 8;
    for _ in 0..2 {
        let (x, rx) = dacg_smallest(&a, &f, &null, &dp).unwrap();
        let (y, ry) = dacg_smallest(&a, &f, &null, &dp).unwrap();
        assert_eq!(x.values, y.values);
        assert_eq!(rx.mvp, ry.mvp);
        let (x, _) = jd_smallest(&a, &f, &null, &jp).unwrap();
        let (y, _) = jd_smallest(&a, &f, &null, &jp).unwrap();
        assert_eq!(x.vectors, y.vectors);
        let (x, _) = irlm_smallest(&a, &f, &null, &ip).unwrap();
        let (y, _) = irlm_smallest(&a, &f, &null, &ip).unwrap();
        assert_eq!(x.vectors, y.vectors);
    }
}

#[test]
fn reports_account_for_every_product() {
    let a = build_laplacian(&fixtures::grid(10, 10));
    let out = run(&a, &DeflationBasis::kernel(100), &RunConfig { neig: 4, ..Default::default() }).unwrap();
    assert!(out.all_converged());
    for r in out.reports() {
        assert_eq!(r.mvp, r.inner_its_total as u64 + r.aux_mvp);
        assert_eq!(r.eigenvalues.len(), 4);
        assert!(r.wall_seconds >= 0.0);
        match r.solver {
            SolverKind::Dacg => assert_eq!((r.outer_its, r.inner_its_total), (0, 0)),
            _ => assert!(r.outer_its > 0 && r.inner_its_total > 0),
        }
    }
}

#[test]
fn disconnected_graph_uses_largest_component() {
    let g =
        EdgeList::new(9, [(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (3, 0, 1.0), (0, 2, 1.0), (5, 6, 1.0), (7, 8, 1.0)])
            .unwrap();
    assert!(prepare_laplacian(&g, false).is_err());
    let (a, map) = prepare_laplacian(&g, true).unwrap();
    assert_eq!(a.n(), 4);
    assert_eq!(map.unwrap(), vec![0, 1, 2, 3]);
    check_all("component", &a, 3, 1e-9, 0);
}

#[test]
fn verification_rejects_wrong_pairs() {
    let a = build_laplacian(&fixtures::path(30));
    let f = ic0_factorize(&a, 1e-3).unwrap();
    let (mut pairs, _) = jd_smallest(&a, &f, &DeflationBasis::kernel(30), &JdParams::new(3, 1e-8)).unwrap();
    assert!(verify_pairs(&a, &pairs, 1e-8).is_ok());
    pairs.values[1] *= 1.01;
    assert!(verify_pairs(&a, &pairs, 1e-8).is_err());
}

#[test]
fn jd_restart_keeps_ritz_space() {
    let a = build_laplacian(&fixtures::random_geometric(120, 0.2, 4));
    let null = DeflationBasis::kernel(120);
    let mut ws = JdWorkspace::new();
    let mut c = MvpCounter::new();
    for k in 0..9 {
        let raw: Vec<f64> = (0..120).map(|i| ((i * (k + 2) * 37) % 23) as f64 - 11.0).collect();
        let mut cols = null.columns().to_vec();
        cols.extend(ws.v().iter().cloned());
        let (v, _) = mgs_orthonormalize(&raw, &cols).unwrap();
        let w = spmv(&a, &v, &mut c).unwrap();
        ws.expand(v, w);
    }
    let before = rayleigh_ritz_extract(&ws).unwrap();
    jd_restart(&mut ws, 4).unwrap();
    assert_eq!(ws.dim(), 4);
    let after = rayleigh_ritz_extract(&ws).unwrap();
    assert!((after.theta - before.theta).abs() <= 1e-12 * before.theta);
    let diff = before.u.iter().zip(&after.u).map(|(x, y)| (x.abs() - y.abs()).abs()).fold(0.0, f64::max);
    assert!(diff < 1e-10);
}
