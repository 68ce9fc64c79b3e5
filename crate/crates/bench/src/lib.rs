//! Shared inputs for the criterion benchmarks.

use lapeig::{build_laplacian, fixtures, CsrMatrix};

/// Laplacian of a connected random graph with average degree 6.
pub fn random_laplacian(n: usize, seed: u64) -> CsrMatrix {
    build_laplacian(&fixtures::random_connected(n, 6.0, seed))
}

/// Laplacian of the preferential-attachment fixture.
pub fn clustered_laplacian(n: usize, seed: u64) -> CsrMatrix {
    build_laplacian(&fixtures::clustered(n, seed))
}
