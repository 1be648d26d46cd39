use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;

use super::kcluster::{lloyd, CenterRule};
use crate::error::{CalfError, Result};
use crate::matrix::DenseMatrix;
use crate::model::Network;

/// Regularized spectral clustering.
///
/// Degrees are inflated by `τ = mean degree`, the operator
/// `D_τ^{-1/2} A D_τ^{-1/2}` is eigendecomposed, and the rows of its `K`
/// leading eigenvectors (largest eigenvalues, i.e. the bottom of the normalized
/// Laplacian) are scaled to unit length and clustered by k-means.
pub fn spectral_clustering<R: Rng + ?Sized>(net: &Network, k: usize, rng: &mut R) -> Result<Vec<usize>> {
    let n = net.n();
    if k == 0 || k > n {
        return Err(CalfError::TooManyClusters { k, n });
    }
    let tau = net.mean_degree().max(1e-12);
    let inv_sqrt: Vec<f64> = net.degrees().iter().map(|&d| 1.0 / (d as f64 + tau).sqrt()).collect();
    let op = DMatrix::from_fn(n, n, |i, j| {
        if net.has_edge(i, j) {
            inv_sqrt[i] * inv_sqrt[j]
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::try_new(op, 1e-12, 10_000).ok_or(CalfError::EigenFailure)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));

    let mut embed = DenseMatrix::from_fn(n, k, |i, c| eig.eigenvectors[(i, order[c])]);
    for i in 0..n {
        let row = embed.row_mut(i);
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            row.iter_mut().for_each(|v| *v /= norm);
        }
    }
    Ok(lloyd(&embed, k, CenterRule::Mean, 10, 300, rng)?.labels)
}
