//! Leading eigenpairs of symmetric operators.
//!
//! Small problems go straight to a dense symmetric eigendecomposition. Larger
//! ones use a restarted block Krylov method with Rayleigh-Ritz extraction,
//! falling back to the dense path if it fails to converge. The block size
//! exceeds the number of requested pairs so repeated eigenvalues (one per
//! connected component of a graph) are captured.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::rng;

/// Below this dimension the dense solver is used directly.
pub const DENSE_LIMIT: usize = 400;

const BLOCK_SLACK: usize = 6;
const KRYLOV_COLUMNS: usize = 180;
const MAX_RESTARTS: usize = 200;
const RESIDUAL_TOL: f64 = 1e-8;

pub trait SymmetricOperator: Sync {
    fn dim(&self) -> usize;

    /// `A * x` for an `n x b` block.
    fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64>;

    fn to_dense(&self) -> DMatrix<f64> {
        self.apply(&DMatrix::identity(self.dim(), self.dim()))
    }
}

impl SymmetricOperator for DMatrix<f64> {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        self * x
    }

    fn to_dense(&self) -> DMatrix<f64> {
        self.clone()
    }
}

/// Compressed sparse rows; the caller keeps the pattern symmetric.
#[derive(Clone, Debug)]
pub struct SparseSymmetric {
    n: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseSymmetric {
    /// Builds from per-row `(column, value)` lists.
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Self {
        let n = rows.len();
        let mut indptr = Vec::with_capacity(n + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for row in rows {
            for (j, v) in row {
                indices.push(j);
                values.push(v);
            }
            indptr.push(indices.len());
        }
        Self {
            n,
            indptr,
            indices,
            values,
        }
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.indptr[i]..self.indptr[i + 1];
        self.indices[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }
}

impl SymmetricOperator for SparseSymmetric {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut y = DMatrix::zeros(self.n, x.ncols());
        for c in 0..x.ncols() {
            let xc = x.column(c);
            let mut yc = y.column_mut(c);
            for i in 0..self.n {
                yc[i] = self.row(i).map(|(j, v)| v * xc[j]).sum();
            }
        }
        y
    }
}

/// Eigenpairs ordered by decreasing eigenvalue; vectors are columns.
#[derive(Clone, Debug)]
pub struct EigenPairs {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

/// The `nev` algebraically largest eigenpairs of `op`.
pub fn top_eigenpairs(op: &dyn SymmetricOperator, nev: usize, seed: u64) -> Result<EigenPairs> {
    let n = op.dim();
    if nev == 0 || nev > n {
        return Err(Error::Eigen(format!("cannot extract {nev} eigenpairs of a {n}x{n} operator")));
    }
    if n <= DENSE_LIMIT || 3 * (nev + BLOCK_SLACK) >= n {
        return dense_top_eigenpairs(op.to_dense(), nev);
    }
    match block_krylov(op, nev, seed) {
        Some(pairs) => Ok(pairs),
        None => {
            log::warn!("block Krylov did not converge (n = {n}, nev = {nev}); using dense solver");
            dense_top_eigenpairs(op.to_dense(), nev)
        }
    }
}

pub fn dense_top_eigenpairs(m: DMatrix<f64>, nev: usize) -> Result<EigenPairs> {
    let n = m.nrows();
    let eig = SymmetricEigen::try_new(m, f64::EPSILON, 0)
        .ok_or_else(|| Error::Eigen(format!("dense eigensolver failed on {n}x{n} matrix")))?;
    let order = descending(eig.eigenvalues.as_slice());
    let take = nev.min(n);
    let values = order[..take].iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = eig.eigenvectors.select_columns(&order[..take]);
    Ok(EigenPairs { values, vectors })
}

fn descending(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    order
}

/// Orthogonalizes the columns of `w` against `q[:, ..m]` (two passes) and
/// appends the surviving ones. Returns the new column count.
fn append_orthonormal(q: &mut DMatrix<f64>, mut m: usize, w: &DMatrix<f64>) -> usize {
    let cap = q.ncols();
    for c in 0..w.ncols() {
        if m == cap {
            break;
        }
        let mut v: DVector<f64> = w.column(c).into_owned();
        let start = v.norm();
        if start == 0.0 {
            continue;
        }
        for _ in 0..2 {
            if m > 0 {
                let basis = q.columns(0, m);
                let h = basis.tr_mul(&v);
                v -= basis * h;
            }
        }
        let norm = v.norm();
        if norm > 1e-10 * start {
            q.set_column(m, &(v / norm));
            m += 1;
        }
    }
    m
}

fn block_krylov(op: &dyn SymmetricOperator, nev: usize, seed: u64) -> Option<EigenPairs> {
    let n = op.dim();
    let b = (nev + BLOCK_SLACK).min(n);
    let cap = (KRYLOV_COLUMNS.max(4 * b)).min(n);
    let mut r = rng::rng(seed);
    let mut x = DMatrix::from_fn(n, b, |_, _| StandardNormal.sample(&mut r));

    for _ in 0..MAX_RESTARTS {
        let mut q = DMatrix::zeros(n, cap);
        let mut m = append_orthonormal(&mut q, 0, &x);
        let mut start = 0;
        while m < cap {
            let newest = q.columns(start, m - start).into_owned();
            let w = op.apply(&newest);
            start = m;
            m = append_orthonormal(&mut q, m, &w);
            if m == start {
                break;
            }
        }
        if m < nev {
            return None;
        }
        let basis = q.columns(0, m).into_owned();
        let a_basis = op.apply(&basis);
        let mut t = basis.tr_mul(&a_basis);
        t = (&t + t.transpose()) * 0.5;
        let eig = SymmetricEigen::try_new(t, f64::EPSILON, 0)?;
        let order = descending(eig.eigenvalues.as_slice());
        let keep = b.min(m);
        let y = eig.eigenvectors.select_columns(&order[..keep]);
        let ritz = &basis * &y;
        let a_ritz = &a_basis * &y;

        let mut worst: f64 = 0.0;
        for (c, &idx) in order[..nev].iter().enumerate() {
            let theta = eig.eigenvalues[idx];
            let res = (a_ritz.column(c) - ritz.column(c) * theta).norm();
            worst = worst.max(res);
        }
        if worst <= RESIDUAL_TOL {
            let values = order[..nev].iter().map(|&i| eig.eigenvalues[i]).collect();
            let vectors = ritz.columns(0, nev).into_owned();
            return Some(EigenPairs { values, vectors });
        }
        x = ritz;
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_symmetric(n: usize, seed: u64) -> DMatrix<f64> {
        let mut r = rng::rng(seed);
        let a = DMatrix::from_fn(n, n, |_, _| StandardNormal.sample(&mut r));
        (&a + a.transpose()) * 0.5
    }

    #[test]
    fn dense_matches_known_spectrum() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 5.0, 3.0, -2.0]));
        let pairs = dense_top_eigenpairs(m, 2).unwrap();
        assert_eq!(pairs.values, vec![5.0, 3.0]);
        assert_eq!(pairs.vectors.column(0).iter().map(|v| v.abs()).collect::<Vec<_>>(), vec![0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn krylov_agrees_with_dense() {
        let n = 500;
        // A graph-like spectrum: a few large eigenvalues over a random bulk.
        let mut m = random_symmetric(n, 3) * (0.2 / (n as f64).sqrt());
        let mut r = rng::rng(9);
        for k in 0..4 {
            let u: DVector<f64> = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut r));
            let u = &u / u.norm();
            m += &u * u.transpose() * (1.0 + k as f64 * 0.1);
        }
        let dense = dense_top_eigenpairs(m.clone(), 5).unwrap();
        let krylov = block_krylov(&m, 5, 1).expect("converges");
        for (a, b) in dense.values.iter().zip(&krylov.values) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
        for c in 0..5 {
            let dot = dense.vectors.column(c).dot(&krylov.vectors.column(c)).abs();
            assert!((dot - 1.0).abs() < 1e-6, "column {c}: {dot}");
        }
    }

    #[test]
    fn krylov_captures_repeated_eigenvalue() {
        // Three disconnected cliques: eigenvalue 1 of the normalized adjacency
        // has multiplicity three.
        let n = 450;
        let rows = (0..n)
            .map(|i| {
                let block = i / 150;
                (block * 150..(block + 1) * 150)
                    .filter(|&j| j != i)
                    .map(|j| (j, 1.0 / 149.0))
                    .collect()
            })
            .collect();
        let op = SparseSymmetric::from_rows(rows);
        let pairs = top_eigenpairs(&op, 3, 5).unwrap();
        for v in &pairs.values {
            assert!((v - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn sparse_apply_matches_dense() {
        let rows = vec![vec![(1, 2.0)], vec![(0, 2.0), (2, -1.0)], vec![(1, -1.0)]];
        let op = SparseSymmetric::from_rows(rows);
        let dense = op.to_dense();
        assert_eq!(dense[(0, 1)], 2.0);
        assert_eq!(dense[(2, 1)], -1.0);
        assert_eq!(op.nnz(), 4);
    }
}
