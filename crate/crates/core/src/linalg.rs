//! Dense and row-sparse complex matrices.
//!
//! Dense work goes through `nalgebra`; the row-sparse [`SparseRows`] form is
//! what the time-domain channel operator looks like at frame scale, where a
//! dense matrix would not fit.

use nalgebra::DMatrix;
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;

pub const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
pub const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };

/// Matrix stored as one sorted `(column, value)` list per row.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseRows {
    pub ncols: usize,
    pub rows: Vec<Vec<(usize, Complex64)>>,
}

impl SparseRows {
    /// Builds from unsorted triplets per row; duplicate columns are summed.
    pub fn from_unsorted(ncols: usize, rows: Vec<Vec<(usize, Complex64)>>) -> Self {
        let rows = rows.into_iter().map(merge_row).collect();
        Self { ncols, rows }
    }

    pub fn nrows(&self) -> usize {
        self.rows.len()
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.ncols);
        self.rows
            .iter()
            .map(|r| r.iter().map(|(j, v)| v * x[*j]).sum())
            .collect()
    }

    /// `self * rhs`.
    pub fn mul(&self, rhs: &SparseRows) -> SparseRows {
        assert_eq!(self.ncols, rhs.nrows());
        let rows = self
            .rows
            .iter()
            .map(|r| {
                let mut acc = Vec::new();
                for (k, a) in r {
                    for (j, b) in &rhs.rows[*k] {
                        acc.push((*j, a * b));
                    }
                }
                acc
            })
            .collect();
        SparseRows::from_unsorted(rhs.ncols, rows)
    }

    pub fn to_dense(&self) -> CMatrix {
        let mut m = CMatrix::zeros(self.nrows(), self.ncols);
        for (i, r) in self.rows.iter().enumerate() {
            for (j, v) in r {
                m[(i, *j)] += v;
            }
        }
        m
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.rows
            .iter()
            .flat_map(|r| r.iter().map(|(_, v)| v.norm_sqr()))
            .sum()
    }

    /// `||self - other||_F^2` by merging sorted rows.
    pub fn diff_frobenius_sq(&self, other: &SparseRows) -> f64 {
        assert_eq!(self.nrows(), other.nrows());
        let mut total = 0.0;
        for (a, b) in self.rows.iter().zip(&other.rows) {
            let (mut i, mut j) = (0, 0);
            while i < a.len() || j < b.len() {
                let ca = a.get(i).map_or(usize::MAX, |e| e.0);
                let cb = b.get(j).map_or(usize::MAX, |e| e.0);
                if ca == cb {
                    total += (a[i].1 - b[j].1).norm_sqr();
                    i += 1;
                    j += 1;
                } else if ca < cb {
                    total += a[i].1.norm_sqr();
                    i += 1;
                } else {
                    total += b[j].1.norm_sqr();
                    j += 1;
                }
            }
        }
        total
    }
}

fn merge_row(mut r: Vec<(usize, Complex64)>) -> Vec<(usize, Complex64)> {
    r.sort_by_key(|e| e.0);
    let mut out: Vec<(usize, Complex64)> = Vec::with_capacity(r.len());
    for (j, v) in r {
        match out.last_mut() {
            Some(last) if last.0 == j => last.1 += v,
            _ => out.push((j, v)),
        }
    }
    out
}

/// Applies a vector map to every column of `m`.
pub fn map_columns(m: &CMatrix, f: impl Fn(&[Complex64]) -> Vec<Complex64>) -> CMatrix {
    let mut out = CMatrix::zeros(m.nrows(), m.ncols());
    for j in 0..m.ncols() {
        let col: Vec<Complex64> = m.column(j).iter().copied().collect();
        let y = f(&col);
        assert_eq!(y.len(), m.nrows());
        for (i, v) in y.into_iter().enumerate() {
            out[(i, j)] = v;
        }
    }
    out
}

/// `U m U^H` for a unitary `U` given as a vector map and its adjoint.
pub fn conjugate_by(
    m: &CMatrix,
    u: impl Fn(&[Complex64]) -> Vec<Complex64>,
) -> CMatrix {
    // U m, then (U (U m)^H)^H = U m U^H
    let um = map_columns(m, &u);
    map_columns(&um.adjoint(), &u).adjoint()
}

pub fn frobenius_sq(m: &CMatrix) -> f64 {
    m.iter().map(|v| v.norm_sqr()).sum()
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|v| v.norm()).fold(0.0, f64::max)
}

pub fn max_off_diagonal(m: &CMatrix) -> f64 {
    let mut best = 0.0f64;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if i != j {
                best = best.max(m[(i, j)].norm());
            }
        }
    }
    best
}
