use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::LinAlgError;

/// Dense real matrix, row-major storage.
///
/// All entries are required to be finite; constructors reject NaN and
/// infinity so downstream factorizations never see them. The serialized
/// form is a nested row-major array of numbers.
#[derive(Clone, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Serialize for Mat {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.to_nested().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Mat {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(deserializer)?;
        Mat::from_nested(&rows).map_err(D::Error::custom)
    }
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, LinAlgError> {
        if data.len() != rows * cols {
            return Err(LinAlgError::Shape {
                what: "element count does not match dimensions",
                rows,
                cols,
            });
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(LinAlgError::NonFinite);
        }
        Ok(Mat { rows, cols, data })
    }

    /// Build from nested row slices; panics on ragged input. Intended for
    /// literal matrices in code and tests.
    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let c = if r == 0 { 0 } else { rows[0].len() };
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Mat::from_vec(r, c, data).expect("finite entries")
    }

    pub fn col_vec(entries: &[f64]) -> Self {
        Mat::from_vec(entries.len(), 1, entries.to_vec()).expect("finite entries")
    }

    pub fn row_vec(entries: &[f64]) -> Self {
        Mat::from_vec(1, entries.len(), entries.to_vec()).expect("finite entries")
    }

    pub fn scalar(x: f64) -> Self {
        Mat::from_vec(1, 1, vec![x]).expect("finite entries")
    }

    pub fn diag(entries: &[f64]) -> Self {
        let n = entries.len();
        let mut m = Mat::zeros(n, n);
        for (i, &x) in entries.iter().enumerate() {
            m[(i, i)] = x;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0 || self.cols == 0
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Mat {
        let mut t = Mat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn scale(&self, s: f64) -> Mat {
        let data = self.data.iter().map(|x| x * s).collect();
        Mat { rows: self.rows, cols: self.cols, data }
    }

    /// `self + s * other`, dimensions must match.
    pub fn axpy(&self, s: f64, other: &Mat) -> Mat {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "axpy shape");
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + s * b)
            .collect();
        Mat { rows: self.rows, cols: self.cols, data }
    }

    /// Symmetric part `(A + Aᵀ)/2`.
    pub fn symmetrize(&self) -> Mat {
        assert!(self.is_square(), "symmetrize requires square");
        let mut s = Mat::zeros(self.rows, self.rows);
        for i in 0..self.rows {
            for j in 0..self.rows {
                s[(i, j)] = 0.5 * (self[(i, j)] + self[(j, i)]);
            }
        }
        s
    }

    /// `A + Aᵀ` (the `sym(·)` shorthand used for quadratic-form blocks).
    pub fn sym(&self) -> Mat {
        assert!(self.is_square(), "sym requires square");
        self.add_ref(&self.transpose())
    }

    pub fn add_ref(&self, other: &Mat) -> Mat {
        self.axpy(1.0, other)
    }

    pub fn sub_ref(&self, other: &Mat) -> Mat {
        self.axpy(-1.0, other)
    }

    pub fn matmul(&self, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.rows, "matmul inner dimensions");
        let mut out = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                let orow = &other.data[k * other.cols..(k + 1) * other.cols];
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, &b) in dst.iter_mut().zip(orow) {
                    *d += a * b;
                }
            }
        }
        out
    }

    /// Frobenius norm.
    pub fn norm_fro(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Largest absolute entry; 0 for empty matrices.
    pub fn norm_max(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }

    /// Maximum absolute column sum.
    pub fn norm_one(&self) -> f64 {
        let mut best = 0.0f64;
        for j in 0..self.cols {
            let mut s = 0.0;
            for i in 0..self.rows {
                s += self[(i, j)].abs();
            }
            best = best.max(s);
        }
        best
    }

    pub fn trace(&self) -> f64 {
        assert!(self.is_square(), "trace requires square");
        (0..self.rows).map(|i| self[(i, i)]).sum()
    }

    /// Frobenius inner product `⟨A, B⟩ = Σ aᵢⱼ bᵢⱼ`.
    pub fn dot(&self, other: &Mat) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "dot shape");
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn block(&self, row0: usize, col0: usize, rows: usize, cols: usize) -> Mat {
        assert!(row0 + rows <= self.rows && col0 + cols <= self.cols, "block bounds");
        let mut b = Mat::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                b[(i, j)] = self[(row0 + i, col0 + j)];
            }
        }
        b
    }

    pub fn set_block(&mut self, row0: usize, col0: usize, b: &Mat) {
        assert!(row0 + b.rows <= self.rows && col0 + b.cols <= self.cols, "block bounds");
        for i in 0..b.rows {
            for j in 0..b.cols {
                self[(row0 + i, col0 + j)] = b[(i, j)];
            }
        }
    }

    /// Stack matrices vertically; all must share a column count.
    pub fn vstack(parts: &[&Mat]) -> Mat {
        assert!(!parts.is_empty(), "vstack of nothing");
        let cols = parts[0].cols;
        let rows = parts.iter().map(|p| p.rows).sum();
        let mut out = Mat::zeros(rows, cols);
        let mut r = 0;
        for p in parts {
            assert_eq!(p.cols, cols, "vstack column mismatch");
            out.set_block(r, 0, p);
            r += p.rows;
        }
        out
    }

    /// Stack matrices horizontally; all must share a row count.
    pub fn hstack(parts: &[&Mat]) -> Mat {
        assert!(!parts.is_empty(), "hstack of nothing");
        let rows = parts[0].rows;
        let cols = parts.iter().map(|p| p.cols).sum();
        let mut out = Mat::zeros(rows, cols);
        let mut c = 0;
        for p in parts {
            assert_eq!(p.rows, rows, "hstack row mismatch");
            out.set_block(0, c, p);
            c += p.cols;
        }
        out
    }

    pub fn is_symmetric(&self, rel_tol: f64) -> bool {
        if !self.is_square() {
            return false;
        }
        let scale = 1.0 + self.norm_max();
        for i in 0..self.rows {
            for j in (i + 1)..self.rows {
                if (self[(i, j)] - self[(j, i)]).abs() > rel_tol * scale {
                    return false;
                }
            }
        }
        true
    }

    pub fn rows_iter(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.cols.max(1))
    }

    /// Nested row-major vectors, the JSON wire form for matrices.
    pub fn to_nested(&self) -> Vec<Vec<f64>> {
        self.rows_iter().map(|r| r.to_vec()).take(self.rows).collect()
    }

    pub fn from_nested(rows: &[Vec<f64>]) -> Result<Self, LinAlgError> {
        let r = rows.len();
        let c = rows.first().map_or(0, |x| x.len());
        if rows.iter().any(|row| row.len() != c) {
            return Err(LinAlgError::Shape { what: "ragged rows", rows: r, cols: c });
        }
        Mat::from_vec(r, c, rows.concat())
    }
}

impl Index<(usize, usize)> for Mat {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Mat {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl Add for &Mat {
    type Output = Mat;
    fn add(self, rhs: &Mat) -> Mat {
        self.add_ref(rhs)
    }
}

impl Sub for &Mat {
    type Output = Mat;
    fn sub(self, rhs: &Mat) -> Mat {
        self.sub_ref(rhs)
    }
}

impl Mul for &Mat {
    type Output = Mat;
    fn mul(self, rhs: &Mat) -> Mat {
        self.matmul(rhs)
    }
}

impl Neg for &Mat {
    type Output = Mat;
    fn neg(self) -> Mat {
        self.scale(-1.0)
    }
}

impl fmt::Display for Mat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Mat {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for j in 0..self.cols {
                write!(f, "{:>12.6} ", self[(i, j)])?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl fmt::Debug for Mat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_finite() {
        assert!(matches!(
            Mat::from_vec(1, 2, vec![1.0, f64::NAN]),
            Err(LinAlgError::NonFinite)
        ));
    }

    #[test]
    fn block_and_stack_round_trip() {
        let a = Mat::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let b = Mat::from_rows(&[&[5.0, 6.0]]);
        let s = Mat::vstack(&[&a, &b]);
        assert_eq!(s.rows(), 3);
        assert_eq!(s.block(2, 0, 1, 2), b);
        let h = Mat::hstack(&[&a, &a]);
        assert_eq!(h.cols(), 4);
        assert_eq!(h[(1, 3)], 4.0);
    }

    #[test]
    fn matmul_matches_hand_product() {
        let a = Mat::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let b = Mat::from_rows(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let c = &a * &b;
        assert_eq!(c, Mat::from_rows(&[&[2.0, 1.0], &[4.0, 3.0]]));
    }
}
