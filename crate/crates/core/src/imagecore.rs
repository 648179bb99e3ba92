//! Dense row-major matrices and the first-order difference operators used by
//! the destriping model.
//!
//! Differences shrink the differenced dimension by one: `diff_y` maps an
//! `m x n` matrix to `(m-1) x n` and `diff_x` maps it to `m x (n-1)`. There is
//! no padding or wrap-around, so the adjoints below are exact transposes.

use std::fmt;
use std::ops::{Index, IndexMut};

use crate::error::{dim_err, DestripeError, Result};

/// An `m x n` real matrix holding an image, a stripe component or any of the
/// solver's matrix-valued variables.
///
/// `peak` records the declared intensity range (`1.0` for unit-range floats,
/// `255.0` for 8-bit data). Intermediate solver variables keep the default.
#[derive(Clone, PartialEq)]
pub struct ImageMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
    peak: f64,
}

impl fmt::Debug for ImageMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ImageMatrix {}x{} (peak {})", self.rows, self.cols, self.peak)?;
        for i in 0..self.rows.min(8) {
            let row = self.row(i);
            let shown: Vec<String> = row.iter().take(8).map(|v| format!("{v:.6}")).collect();
            writeln!(f, "  [{}{}]", shown.join(", "), if row.len() > 8 { ", ..." } else { "" })?;
        }
        Ok(())
    }
}

impl ImageMatrix {
    pub const DEFAULT_PEAK: f64 = 1.0;

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
            peak: Self::DEFAULT_PEAK,
        }
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Self {
            rows,
            cols,
            data: vec![value; rows * cols],
            peak: Self::DEFAULT_PEAK,
        }
    }

    /// Builds a matrix from row-major data, rejecting wrong lengths and
    /// non-finite entries.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(dim_err("from_vec", format!("empty shape {rows}x{cols}")));
        }
        if data.len() != rows * cols {
            return Err(dim_err(
                "from_vec",
                format!("{} values for a {rows}x{cols} matrix", data.len()),
            ));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(DestripeError::NonFinite("from_vec"));
        }
        Ok(Self {
            rows,
            cols,
            data,
            peak: Self::DEFAULT_PEAK,
        })
    }

    /// Builds a matrix from nested rows. Panics on ragged input; meant for
    /// literals in tests and examples.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let m = rows.len();
        let n = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(m * n);
        for r in rows {
            assert_eq!(r.as_ref().len(), n, "ragged rows");
            data.extend_from_slice(r.as_ref());
        }
        Self {
            rows: m,
            cols: n,
            data,
            peak: Self::DEFAULT_PEAK,
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self {
            rows,
            cols,
            data,
            peak: Self::DEFAULT_PEAK,
        }
    }

    pub fn with_peak(mut self, peak: f64) -> Self {
        self.peak = peak;
        self
    }

    pub fn set_peak(&mut self, peak: f64) {
        self.peak = peak;
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn peak(&self) -> f64 {
        self.peak
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Copies column `j` into `buf` (cleared first).
    pub fn column_into(&self, j: usize, buf: &mut Vec<f64>) {
        buf.clear();
        buf.extend((0..self.rows).map(|i| self.data[i * self.cols + j]));
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        let mut buf = Vec::with_capacity(self.rows);
        self.column_into(j, &mut buf);
        buf
    }

    pub fn set_column(&mut self, j: usize, values: &[f64]) {
        debug_assert_eq!(values.len(), self.rows);
        for (i, v) in values.iter().enumerate() {
            self.data[i * self.cols + j] = *v;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn same_shape(&self, other: &ImageMatrix) -> bool {
        self.shape() == other.shape()
    }

    pub(crate) fn check_same_shape(&self, other: &ImageMatrix, op: &'static str) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(dim_err(
                op,
                format!(
                    "{}x{} vs {}x{}",
                    self.rows, self.cols, other.rows, other.cols
                ),
            ))
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ImageMatrix {
        ImageMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
            peak: self.peak,
        }
    }

    /// Entrywise combination of two same-shaped matrices. Panics on shape
    /// mismatch; callers validate shapes at the public boundary.
    pub fn zip_map(&self, other: &ImageMatrix, f: impl Fn(f64, f64) -> f64) -> ImageMatrix {
        assert!(self.same_shape(other), "zip_map shape mismatch");
        ImageMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
            peak: self.peak,
        }
    }

    pub fn add(&self, other: &ImageMatrix) -> ImageMatrix {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &ImageMatrix) -> ImageMatrix {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn scale(&self, c: f64) -> ImageMatrix {
        self.map(|v| c * v)
    }

    /// `self += alpha * other`
    pub fn axpy(&mut self, alpha: f64, other: &ImageMatrix) {
        assert!(self.same_shape(other), "axpy shape mismatch");
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
    }

    /// Frobenius inner product.
    pub fn dot(&self, other: &ImageMatrix) -> f64 {
        assert!(self.same_shape(other), "dot shape mismatch");
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// Entrywise l1 norm, `||.||_{1,1}`.
    pub fn norm_l1(&self) -> f64 {
        self.data.iter().map(|v| v.abs()).sum()
    }

    pub fn norm_inf(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    /// Sum of column Euclidean norms, `||.||_{2,1}`.
    pub fn norm_l21(&self) -> f64 {
        column_norms(self).iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub fn max_abs_diff(&self, other: &ImageMatrix) -> f64 {
        assert!(self.same_shape(other), "max_abs_diff shape mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |acc, (a, b)| acc.max((a - b).abs()))
    }

    /// Matrix transpose.
    pub fn transpose(&self) -> ImageMatrix {
        ImageMatrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)]).with_peak(self.peak)
    }

    /// Rotates by 90 degrees counter-clockwise, turning horizontal stripes
    /// into vertical ones.
    pub fn rotate90_ccw(&self) -> ImageMatrix {
        let (m, n) = self.shape();
        ImageMatrix::from_fn(n, m, |i, j| self[(j, n - 1 - i)]).with_peak(self.peak)
    }

    /// Inverse of [`ImageMatrix::rotate90_ccw`].
    pub fn rotate90_cw(&self) -> ImageMatrix {
        let (m, n) = self.shape();
        ImageMatrix::from_fn(n, m, |i, j| self[(m - 1 - j, i)]).with_peak(self.peak)
    }
}

impl Index<(usize, usize)> for ImageMatrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for ImageMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

/// Vertical forward difference: `out[i,j] = s[i+1,j] - s[i,j]`.
pub fn diff_y(s: &ImageMatrix) -> Result<ImageMatrix> {
    let (m, n) = s.shape();
    if m < 2 {
        return Err(dim_err("diff_y", format!("need at least 2 rows, got {m}")));
    }
    let mut out = ImageMatrix::zeros(m - 1, n);
    for i in 0..m - 1 {
        let (lo, hi) = (s.row(i), s.row(i + 1));
        for ((o, a), b) in out.row_mut(i).iter_mut().zip(lo).zip(hi) {
            *o = b - a;
        }
    }
    Ok(out)
}

/// Adjoint of [`diff_y`]; maps `(m-1) x n` back to `m x n`.
pub fn diff_y_adjoint(g: &ImageMatrix) -> Result<ImageMatrix> {
    let (k, n) = g.shape();
    if k < 1 {
        return Err(dim_err("diff_y_adjoint", "input has no rows"));
    }
    let m = k + 1;
    let mut out = ImageMatrix::zeros(m, n);
    for j in 0..n {
        out[(0, j)] = -g[(0, j)];
        for i in 1..m - 1 {
            out[(i, j)] = g[(i - 1, j)] - g[(i, j)];
        }
        out[(m - 1, j)] = g[(m - 2, j)];
    }
    Ok(out)
}

/// Horizontal forward difference: `out[i,j] = s[i,j+1] - s[i,j]`.
pub fn diff_x(s: &ImageMatrix) -> Result<ImageMatrix> {
    let (m, n) = s.shape();
    if n < 2 {
        return Err(dim_err("diff_x", format!("need at least 2 columns, got {n}")));
    }
    let mut out = ImageMatrix::zeros(m, n - 1);
    for i in 0..m {
        let src = s.row(i);
        for (o, w) in out.row_mut(i).iter_mut().zip(src.windows(2)) {
            *o = w[1] - w[0];
        }
    }
    Ok(out)
}

/// Adjoint of [`diff_x`]; maps `m x (n-1)` back to `m x n`.
pub fn diff_x_adjoint(g: &ImageMatrix) -> Result<ImageMatrix> {
    let (m, k) = g.shape();
    if k < 1 {
        return Err(dim_err("diff_x_adjoint", "input has no columns"));
    }
    let n = k + 1;
    let mut out = ImageMatrix::zeros(m, n);
    for i in 0..m {
        let src = g.row(i);
        let dst = out.row_mut(i);
        dst[0] = -src[0];
        for j in 1..n - 1 {
            dst[j] = src[j - 1] - src[j];
        }
        dst[n - 1] = src[n - 2];
    }
    Ok(out)
}

/// Column Euclidean norms `h(v)`.
pub fn column_norms(v: &ImageMatrix) -> Vec<f64> {
    let mut acc = vec![0.0; v.cols()];
    for i in 0..v.rows() {
        for (a, x) in acc.iter_mut().zip(v.row(i)) {
            *a += x * x;
        }
    }
    acc.iter_mut().for_each(|a| *a = a.sqrt());
    acc
}
