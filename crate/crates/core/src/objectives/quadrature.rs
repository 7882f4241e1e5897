//! Gauss–Hermite quadrature for expectations under a standard normal.

use std::sync::OnceLock;

use nalgebra::{DMatrix, SymmetricEigen};

/// Number of nodes used by [`standard_normal_rule`].
pub const GH_POINTS: usize = 64;

/// Nodes and weights of the `n`-point rule for `E f(Z)`, `Z ~ N(0, 1)`,
/// computed by the Golub–Welsch eigenvalue method. Weights sum to one.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0, "quadrature needs at least one node");
    // Jacobi matrix of the monic probabilists' Hermite recurrence:
    // He_{k+1} = t He_k − k He_{k−1}.
    let jacobi = DMatrix::from_fn(n, n, |i, j| {
        if i + 1 == j || j + 1 == i {
            (i.max(j) as f64).sqrt()
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(jacobi);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|k| (eig.eigenvalues[k], eig.eigenvectors[(0, k)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total: f64 = pairs.iter().map(|p| p.1).sum();
    pairs.iter().map(|&(x, w)| (x, w / total)).unzip()
}

/// Cached 64-point rule.
pub fn standard_normal_rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_hermite(GH_POINTS))
}

/// `E f(m + s·Z)` with the 64-point rule.
pub fn normal_expectation(m: f64, s: f64, f: impl Fn(f64) -> f64) -> f64 {
    let (nodes, weights) = standard_normal_rule();
    nodes.iter().zip(weights).map(|(&z, &w)| w * f(m + s * z)).sum()
}
