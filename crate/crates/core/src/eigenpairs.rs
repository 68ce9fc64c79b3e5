//! Converged eigenpairs as returned by the solvers.

use crate::kernels::dot;
use crate::pcg::DeflationBasis;

/// Eigenpairs sorted by ascending eigenvalue, with unit eigenvectors and
/// their relative residuals `|A u - lambda u| / lambda`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EigenPairSet {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
    pub residuals: Vec<f64>,
}

impl EigenPairSet {
    /// Sorts the pairs by eigenvalue.
    pub fn new(values: Vec<f64>, vectors: Vec<Vec<f64>>, residuals: Vec<f64>) -> Self {
        assert_eq!(values.len(), vectors.len());
        assert_eq!(values.len(), residuals.len());
        let mut order: Vec<usize> = (0..values.len()).collect();
        order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
        Self {
            values: order.iter().map(|&i| values[i]).collect(),
            vectors: order.iter().map(|&i| vectors[i].clone()).collect(),
            residuals: order.iter().map(|&i| residuals[i]).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `max |U^T U - I|` over all entries.
    pub fn orthonormality_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, u) in self.vectors.iter().enumerate() {
            for (j, v) in self.vectors.iter().enumerate().skip(i) {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((dot(u, v) - target).abs());
            }
        }
        worst
    }

    /// Largest `|q^T u|` between a basis column and an eigenvector.
    pub fn max_overlap(&self, basis: &DeflationBasis) -> f64 {
        self.vectors.iter().map(|u| basis.max_overlap(u)).fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sorted_on_construction() {
        let p = EigenPairSet::new(vec![3.0, 1.0], vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![1e-9, 2e-9]);
        assert_eq!(p.values, vec![1.0, 3.0]);
        assert_eq!(p.vectors[0], vec![0.0, 1.0]);
        assert_eq!(p.residuals, vec![2e-9, 1e-9]);
        assert_eq!(p.orthonormality_error(), 0.0);
        let q = DeflationBasis::from_columns(vec![vec![1.0, 0.0]]).unwrap();
        assert_eq!(p.max_overlap(&q), 1.0);
    }
}
