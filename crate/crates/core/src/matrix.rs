//! Oriented dense real matrices.
//!
//! A [`Matrix`] stores its elements as a sequence of equally long
//! *constituent vectors*: the rows for [`Orientation::Row`], the columns for
//! [`Orientation::Col`]. The vectors are laid out back to back in one buffer.
//!
//! Flipping orientation together with the shape ([`Matrix::transpose`]) does not
//! touch the buffer, while keeping the logical matrix and switching its storage
//! ([`Matrix::change_orientation`]) is a full copy. [`multiply`] only accepts a
//! row-oriented left operand and a column-oriented right operand so that every
//! output element is a dot product of two contiguous slices; callers convert
//! explicitly and pay for it where they do.
//!
//! All values are IEEE-754 binary64. Dot products and folds accumulate in index
//! order, so results are bit-reproducible.

use std::fmt;

use crate::error::{Error, Result};
use crate::rng::RngState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Orientation {
    Row,
    Col,
}

impl Orientation {
    pub fn flipped(self) -> Self {
        match self {
            Orientation::Row => Orientation::Col,
            Orientation::Col => Orientation::Row,
        }
    }
}

impl fmt::Display for Orientation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Orientation::Row => f.write_str("row-oriented"),
            Orientation::Col => f.write_str("column-oriented"),
        }
    }
}

#[derive(Clone, PartialEq)]
pub struct Matrix {
    orientation: Orientation,
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix({}x{}, {})", self.rows, self.cols, self.orientation)?;
        for i in 0..self.rows {
            let row: Vec<f64> = (0..self.cols).map(|j| self.get(i, j)).collect();
            writeln!(f, "  {row:?}")?;
        }
        Ok(())
    }
}

fn check_shape(rows: usize, cols: usize) -> Result<()> {
    if rows == 0 || cols == 0 {
        return Err(Error::dim(format!("matrix shape must be non-empty, got {rows}x{cols}")));
    }
    Ok(())
}

impl Matrix {
    pub fn filled(value: f64, rows: usize, cols: usize, orientation: Orientation) -> Result<Self> {
        check_shape(rows, cols)?;
        Ok(Matrix {
            orientation,
            rows,
            cols,
            data: vec![value; rows * cols],
        })
    }

    pub fn zeros(rows: usize, cols: usize, orientation: Orientation) -> Result<Self> {
        Self::filled(0.0, rows, cols, orientation)
    }

    /// Builds a matrix from elements listed in row-major order, stored with the
    /// requested orientation.
    pub fn from_row_major(
        values: &[f64],
        rows: usize,
        cols: usize,
        orientation: Orientation,
    ) -> Result<Self> {
        check_shape(rows, cols)?;
        if values.len() != rows * cols {
            return Err(Error::dim(format!(
                "{} elements cannot fill a {rows}x{cols} matrix",
                values.len()
            )));
        }
        let m = Matrix {
            orientation: Orientation::Row,
            rows,
            cols,
            data: values.to_vec(),
        };
        Ok(match orientation {
            Orientation::Row => m,
            Orientation::Col => m.change_orientation(),
        })
    }

    /// Builds a matrix whose constituent vectors (rows for `Row`, columns for
    /// `Col`) are `vectors`.
    pub fn from_vectors(
        vectors: Vec<Vec<f64>>,
        rows: usize,
        cols: usize,
        orientation: Orientation,
    ) -> Result<Self> {
        check_shape(rows, cols)?;
        let (count, len) = match orientation {
            Orientation::Row => (rows, cols),
            Orientation::Col => (cols, rows),
        };
        if vectors.len() != count {
            return Err(Error::dim(format!(
                "expected {count} constituent vectors for a {rows}x{cols} {orientation} matrix, got {}",
                vectors.len()
            )));
        }
        let mut data = Vec::with_capacity(rows * cols);
        for (i, v) in vectors.into_iter().enumerate() {
            if v.len() != len {
                return Err(Error::dim(format!(
                    "constituent vector {i} has length {}, expected {len}",
                    v.len()
                )));
            }
            data.extend(v);
        }
        Ok(Matrix {
            orientation,
            rows,
            cols,
            data,
        })
    }

    /// Each element drawn independently from U[-max, +max], in storage order.
    pub fn uniform(
        rng: &mut RngState,
        max: f64,
        rows: usize,
        cols: usize,
        orientation: Orientation,
    ) -> Result<Self> {
        check_shape(rows, cols)?;
        if max.is_nan() || max < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "uniform bound must be non-negative, got {max}"
            )));
        }
        let data = (0..rows * cols).map(|_| rng.uniform_symmetric(max)).collect();
        Ok(Matrix {
            orientation,
            rows,
            cols,
            data,
        })
    }

    pub fn identity(n: usize, orientation: Orientation) -> Result<Self> {
        let mut m = Self::zeros(n, n, orientation)?;
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        Ok(m)
    }

    pub fn orientation(&self) -> Orientation {
        self.orientation
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn vector_count(&self) -> usize {
        match self.orientation {
            Orientation::Row => self.rows,
            Orientation::Col => self.cols,
        }
    }

    pub fn vector_len(&self) -> usize {
        match self.orientation {
            Orientation::Row => self.cols,
            Orientation::Col => self.rows,
        }
    }

    /// The `i`-th constituent vector.
    pub fn vector(&self, i: usize) -> &[f64] {
        let len = self.vector_len();
        &self.data[i * len..(i + 1) * len]
    }

    pub fn vectors(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.vector_len())
    }

    /// Raw storage: constituent vectors back to back.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    fn offset(&self, i: usize, j: usize) -> usize {
        match self.orientation {
            Orientation::Row => i * self.cols + j,
            Orientation::Col => j * self.rows + i,
        }
    }

    /// Element at zero-based `(row, col)`.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        assert!(i < self.rows && j < self.cols, "index ({i}, {j}) out of bounds");
        self.data[self.offset(i, j)]
    }

    pub fn to_row_major(&self) -> Vec<f64> {
        match self.orientation {
            Orientation::Row => self.data.clone(),
            Orientation::Col => self.change_orientation().data,
        }
    }

    pub fn check_valid(&self) -> bool {
        self.rows >= 1
            && self.cols >= 1
            && self.data.len() == self.rows * self.cols
            && self.vectors().count() == self.vector_count()
    }

    /// Transpose by reinterpreting storage: shape swaps and orientation flips,
    /// the buffer is reused as is.
    pub fn transpose(self) -> Matrix {
        Matrix {
            orientation: self.orientation.flipped(),
            rows: self.cols,
            cols: self.rows,
            data: self.data,
        }
    }

    /// Transpose that keeps the storage orientation, rebuilding the buffer.
    pub fn transpose_keep_orientation(&self) -> Matrix {
        self.change_orientation().transpose()
    }

    /// Same logical matrix, opposite storage orientation.
    pub fn change_orientation(&self) -> Matrix {
        let (count, len) = (self.vector_count(), self.vector_len());
        let mut data = Vec::with_capacity(self.data.len());
        for k in 0..len {
            for v in 0..count {
                data.push(self.data[v * len + k]);
            }
        }
        Matrix {
            orientation: self.orientation.flipped(),
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        Matrix {
            orientation: self.orientation,
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    /// Per-constituent-vector fold (per row for `Row`, per column for `Col`).
    pub fn fold_per_vector<A: Clone>(&self, init: A, f: impl Fn(f64, A) -> A) -> Vec<A> {
        self.vectors()
            .map(|v| v.iter().fold(init.clone(), |acc, &x| f(x, acc)))
            .collect()
    }

    pub fn sum_per_vector(&self) -> Vec<f64> {
        self.fold_per_vector(0.0, |x, acc| acc + x)
    }

    pub fn max_per_vector(&self) -> Vec<f64> {
        self.fold_per_vector(f64::NEG_INFINITY, |x, acc| if x > acc { x } else { acc })
    }
}

fn same_layout(a: &Matrix, b: &Matrix) -> Result<()> {
    if a.orientation != b.orientation {
        return Err(Error::Orientation {
            expected: match a.orientation {
                Orientation::Row => "row-oriented",
                Orientation::Col => "column-oriented",
            },
            actual: b.orientation,
        });
    }
    if a.shape() != b.shape() {
        return Err(Error::dim(format!(
            "cannot combine {}x{} with {}x{}",
            a.rows, a.cols, b.rows, b.cols
        )));
    }
    Ok(())
}

/// Elementwise `f(a_ij, b_ij)`; operands must agree in shape and orientation.
pub fn merge(a: &Matrix, b: &Matrix, f: impl Fn(f64, f64) -> f64) -> Result<Matrix> {
    same_layout(a, b)?;
    Ok(Matrix {
        orientation: a.orientation,
        rows: a.rows,
        cols: a.cols,
        data: a.data.iter().zip(&b.data).map(|(&x, &y)| f(x, y)).collect(),
    })
}

/// Replaces every constituent vector `w` of `m` by `f(v, w)` elementwise.
/// For a row-oriented activation batch this adds a bias to each sample.
pub fn broadcast_rowvector(v: &[f64], m: &Matrix, f: impl Fn(f64, f64) -> f64) -> Result<Matrix> {
    if v.len() != m.vector_len() {
        return Err(Error::dim(format!(
            "vector of length {} cannot broadcast over constituent vectors of length {}",
            v.len(),
            m.vector_len()
        )));
    }
    let data = m
        .vectors()
        .flat_map(|w| v.iter().zip(w).map(|(&a, &b)| f(a, b)))
        .collect();
    Ok(Matrix {
        orientation: m.orientation,
        rows: m.rows,
        cols: m.cols,
        data,
    })
}

/// Replaces the `i`-th constituent vector of `m` by `x -> f(s[i], x)`.
pub fn broadcast_scalars(s: &[f64], m: &Matrix, f: impl Fn(f64, f64) -> f64) -> Result<Matrix> {
    if s.len() != m.vector_count() {
        return Err(Error::dim(format!(
            "{} scalars for {} constituent vectors",
            s.len(),
            m.vector_count()
        )));
    }
    let data = m
        .vectors()
        .zip(s)
        .flat_map(|(w, &a)| w.iter().map(move |&x| (a, x)))
        .map(|(a, x)| f(a, x))
        .collect();
    Ok(Matrix {
        orientation: m.orientation,
        rows: m.rows,
        cols: m.cols,
        data,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

/// Matrix product `a * b` for a row-oriented `a` and a column-oriented `b`.
pub fn multiply(a: &Matrix, b: &Matrix, result: Orientation) -> Result<Matrix> {
    if a.orientation != Orientation::Row {
        return Err(Error::Orientation {
            expected: "row-oriented left operand",
            actual: a.orientation,
        });
    }
    if b.orientation != Orientation::Col {
        return Err(Error::Orientation {
            expected: "column-oriented right operand",
            actual: b.orientation,
        });
    }
    if a.cols != b.rows {
        return Err(Error::dim(format!(
            "cannot multiply {}x{} by {}x{}",
            a.rows, a.cols, b.rows, b.cols
        )));
    }
    let mut data = Vec::with_capacity(a.rows * b.cols);
    match result {
        Orientation::Row => {
            for row in a.vectors() {
                data.extend(b.vectors().map(|col| dot(row, col)));
            }
        }
        Orientation::Col => {
            for col in b.vectors() {
                data.extend(a.vectors().map(|row| dot(row, col)));
            }
        }
    }
    Ok(Matrix {
        orientation: result,
        rows: a.rows,
        cols: b.cols,
        data,
    })
}
