//! Rank-k subspace extraction from a (noisy) aggregated outer-product matrix.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::points::Points;

/// `sum_i p_i p_i^T`, accumulated row by row in input order.
pub fn outer_product(points: &Points) -> DMatrix<f64> {
    let d = points.dim();
    let mut m = vec![0.0; d * d];
    accumulate_outer(points, &mut m);
    DMatrix::from_row_slice(d, d, &m)
}

/// Adds `sum_i p_i p_i^T` into a row-major `d x d` buffer.
pub fn accumulate_outer(points: &Points, out: &mut [f64]) {
    let d = points.dim();
    for p in points.rows() {
        for i in 0..d {
            let pi = p[i];
            let row = &mut out[i * d..(i + 1) * d];
            for j in 0..d {
                row[j] += pi * p[j];
            }
        }
    }
}

/// Orthogonal projector onto the span of the top-k eigenvectors.
///
/// Holds both the dense `d x d` matrix and the `d x k` orthonormal basis;
/// projection goes through the basis.
#[derive(Debug, Clone, PartialEq)]
pub struct Projector {
    matrix: DMatrix<f64>,
    basis: DMatrix<f64>,
    eigenvalues: Vec<f64>,
}

impl Projector {
    pub fn identity(d: usize) -> Self {
        Self {
            matrix: DMatrix::identity(d, d),
            basis: DMatrix::identity(d, d),
            eigenvalues: vec![1.0; d],
        }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    /// Retained eigenvalues, descending.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn rank(&self) -> usize {
        self.basis.ncols()
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// `Pi p` computed as `V (V^T p)`.
    pub fn apply(&self, p: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; p.len()];
        self.apply_into(p, &mut out);
        out
    }

    pub fn apply_into(&self, p: &[f64], out: &mut [f64]) {
        let (d, k) = (self.basis.nrows(), self.basis.ncols());
        let mut coeff = vec![0.0; k];
        for (c, col) in coeff.iter_mut().zip(self.basis.column_iter()) {
            *c = (0..d).map(|i| col[i] * p[i]).sum();
        }
        for (i, o) in out.iter_mut().enumerate().take(d) {
            *o = (0..k).map(|c| self.basis[(i, c)] * coeff[c]).sum();
        }
    }

    pub fn project(&self, points: &Points) -> Result<Points> {
        points.ensure_dim(self.dim())?;
        Ok(points.map_rows(self.dim(), |src, dst| self.apply_into(src, dst)))
    }
}

/// Projector onto the eigenvectors of the `k` largest eigenvalues of the
/// symmetrized input. Ties in eigenvalue keep the solver's original order.
pub fn top_k_projector(m: &DMatrix<f64>, k: usize) -> Result<Projector> {
    let d = m.nrows();
    if m.ncols() != d {
        return Err(Error::DimensionMismatch { expected: d, got: m.ncols() });
    }
    if k == 0 || k > d {
        return Err(Error::InvalidArgument(format!("rank k = {k} must lie in 1..={d}")));
    }
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..d).collect();
    // stable: equal eigenvalues keep ascending original index
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let keep = &order[..k];
    let columns: Vec<DVector<f64>> = keep.iter().map(|&i| eig.eigenvectors.column(i).normalize()).collect();
    let basis = DMatrix::from_columns(&columns);
    let matrix = &basis * basis.transpose();
    Ok(Projector {
        matrix,
        basis,
        eigenvalues: keep.iter().map(|&i| eig.eigenvalues[i]).collect(),
    })
}
