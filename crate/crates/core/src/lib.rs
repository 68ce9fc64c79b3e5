//! Sparse symmetric eigensolvers for the smallest eigenpairs of graph
//! Laplacians: deflation-accelerated conjugate gradient (DACG),
//! Jacobi-Davidson (JD) and implicitly restarted inverse Lanczos (IRLM),
//! plus spectral graph tools built on top of them.
//!
//! ```
//! use lapeig::{build_laplacian, fixtures, run, DeflationBasis, RunConfig};
//!
//! let a = build_laplacian(&fixtures::grid(20, 20));
//! let cfg = RunConfig { neig: 3, ..RunConfig::default() };
//! let out = run(&a, &DeflationBasis::kernel(a.n()), &cfg).unwrap();
//! assert!(out.all_converged());
//! for r in out.reports() {
//!     println!("{}: {:?} in {} products", r.solver, r.eigenvalues, r.mvp);
//! }
//! ```

// `!(x > 0.0)` is used on purpose so that NaN takes the failure branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dacg;
pub mod dense;
pub mod eigenpairs;
pub mod error;
pub mod fixtures;
pub mod graph;
pub mod harness;
pub mod ic0;
pub mod irlm;
pub mod jd;
pub mod kernels;
pub mod pcg;
pub mod report;
pub mod spectral;

pub use dacg::{dacg_smallest, DacgParams};
pub use eigenpairs::EigenPairSet;
pub use error::{Error, Result};
pub use graph::{build_laplacian, load_edge_list, read_graph_file, CsrMatrix, Edge, EdgeList, GraphStats, InputFormat};
pub use harness::{run, RunConfig, RunOutcome, SolverRun};
pub use ic0::{ic0_factorize, Ic0Factor};
pub use irlm::{irlm_smallest, IrlmParams};
pub use jd::{jd_smallest, JdParams};
pub use kernels::{spmv, LinearOperator, MvpCounter};
pub use pcg::{pcg_solve, DeflationBasis, PcgOutcome, PcgStatus, Preconditioner};
pub use report::{emit_report, emit_spectrum, parse_csv_report, ReportFormat, SolverKind, SolverReport};
pub use spectral::{
    fiedler, gap_ratios, partition_relaxed, pinv_apply, sign_partition, PinvApprox, PinvKind, SigmaPolicy,
};
