//! Two-dimensional projection for display.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::data::Dataset;

/// Coordinates of every instance on the first two principal components.
/// Each component's sign is fixed so its largest-magnitude loading is
/// positive. Missing components (one feature, or no variance) are zero.
pub fn pca_2d(d: &Dataset) -> Vec<[f64; 2]> {
    let n = d.len();
    let f = d.n_features();
    if n == 0 {
        return Vec::new();
    }
    let mean: Vec<f64> = (0..f)
        .map(|j| d.rows().map(|r| r[j]).sum::<f64>() / n as f64)
        .collect();
    let centered = DMatrix::from_fn(n, f, |i, j| d.row(i)[j] - mean[j]);
    let cov = centered.transpose() * &centered / n as f64;
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..f).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));

    let mut out = vec![[0.0; 2]; n];
    for (slot, &c) in order.iter().take(2).enumerate() {
        if eig.eigenvalues[c] <= 1e-12 {
            continue;
        }
        let mut v = eig.eigenvectors.column(c).clone_owned();
        let lead = v.iter().copied().fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
        if lead < 0.0 {
            v = -v;
        }
        let proj = &centered * v;
        for i in 0..n {
            out[i][slot] = proj[i];
        }
    }
    out
}
