//! Dense row-major point containers shared by every module.

use crate::error::{Error, Result};

/// `n` points in `R^d`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Points {
    data: Vec<f64>,
    dim: usize,
}

impl Points {
    pub fn empty(dim: usize) -> Self {
        Self { data: Vec::new(), dim }
    }

    pub fn with_capacity(dim: usize, n: usize) -> Self {
        Self { data: Vec::with_capacity(dim * n), dim }
    }

    pub fn from_flat(data: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("dimension must be positive".into()));
        }
        if !data.len().is_multiple_of(dim) {
            return Err(Error::InvalidArgument(format!(
                "flat buffer of length {} is not a multiple of dimension {dim}",
                data.len()
            )));
        }
        Ok(Self { data, dim })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let first = rows.first().ok_or(Error::Empty("rows"))?;
        let dim = first.as_ref().len();
        let mut out = Self::with_capacity(dim, rows.len());
        for r in rows {
            out.push(r.as_ref())?;
        }
        Ok(out)
    }

    pub fn push(&mut self, row: &[f64]) -> Result<()> {
        if row.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: row.len() });
        }
        self.data.extend_from_slice(row);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.data.len().checked_div(self.dim).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    pub fn into_flat(self) -> Vec<f64> {
        self.data
    }

    /// Apply `f` to every row, producing a new set of the given output dimension.
    pub fn map_rows(&self, out_dim: usize, mut f: impl FnMut(&[f64], &mut [f64])) -> Points {
        let mut data = vec![0.0; self.len() * out_dim];
        for (src, dst) in self.rows().zip(data.chunks_exact_mut(out_dim)) {
            f(src, dst);
        }
        Points { data, dim: out_dim }
    }

    pub fn select(&self, indices: &[usize]) -> Points {
        let mut out = Points::with_capacity(self.dim, indices.len());
        for &i in indices {
            out.data.extend_from_slice(self.row(i));
        }
        out
    }

    pub fn extend(&mut self, other: &Points) -> Result<()> {
        if other.dim != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: other.dim });
        }
        self.data.extend_from_slice(&other.data);
        Ok(())
    }

    /// Largest Euclidean norm of any row (0 for an empty set).
    pub fn max_norm(&self) -> f64 {
        self.rows().map(norm).fold(0.0, f64::max)
    }

    pub fn ensure_dim(&self, dim: usize) -> Result<()> {
        if self.dim != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: self.dim });
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// An ordered set of `k` cluster centers.
#[derive(Debug, Clone, PartialEq)]
pub struct CenterSet(Points);

impl CenterSet {
    pub fn new(points: Points) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Empty("center set"));
        }
        Ok(Self(points))
    }

    pub fn k(&self) -> usize {
        self.0.len()
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn center(&self, r: usize) -> &[f64] {
        self.0.row(r)
    }

    pub fn center_mut(&mut self, r: usize) -> &mut [f64] {
        self.0.row_mut(r)
    }

    pub fn points(&self) -> &Points {
        &self.0
    }

    pub fn into_points(self) -> Points {
        self.0
    }

    pub fn iter(&self) -> std::slice::ChunksExact<'_, f64> {
        self.0.rows()
    }

    pub fn is_finite(&self) -> bool {
        self.0.is_finite()
    }
}

/// Points paired with per-point weights (the server-side proxy dataset).
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedPoints {
    pub points: Points,
    pub weights: Vec<f64>,
}

impl WeightedPoints {
    pub fn new(points: Points, weights: Vec<f64>) -> Result<Self> {
        if points.len() != weights.len() {
            return Err(Error::InvalidArgument(format!(
                "{} points but {} weights",
                points.len(),
                weights.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidArgument("weights must be finite".into()));
        }
        Ok(Self { points, weights })
    }

    pub fn unit(points: Points) -> Self {
        let weights = vec![1.0; points.len()];
        Self { points, weights }
    }

    /// Copy with negative weights clamped to zero.
    pub fn clamped(&self) -> Self {
        Self {
            points: self.points.clone(),
            weights: self.weights.iter().map(|w| w.max(0.0)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points.dim()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }
}

pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Index and squared distance of the nearest center; the lowest index wins ties.
pub fn nearest(p: &[f64], centers: &Points) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centers.rows().enumerate() {
        let d = sq_dist(p, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}
