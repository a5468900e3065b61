use super::{check_len, LinalgError};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    n_rows: usize,
    n_cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Self {
            n_rows,
            n_cols,
            data: vec![0.0; n_rows * n_cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_row_major(n_rows: usize, n_cols: usize, data: Vec<f64>) -> Result<Self, LinalgError> {
        check_len(n_rows * n_cols, data.len())?;
        Ok(Self { n_rows, n_cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, LinalgError> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(n_rows * n_cols);
        for r in rows {
            check_len(n_cols, r.len())?;
            data.extend_from_slice(r);
        }
        Ok(Self { n_rows, n_cols, data })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn set_column(&mut self, j: usize, col: &[f64]) -> Result<(), LinalgError> {
        check_len(self.n_rows, col.len())?;
        for (i, v) in col.iter().enumerate() {
            self.data[i * self.n_cols + j] = *v;
        }
        Ok(())
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.n_cols, self.n_rows);
        for i in 0..self.n_rows {
            for j in 0..self.n_cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    /// `y = A x`, row-major accumulation.
    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>, LinalgError> {
        check_len(self.n_cols, x.len())?;
        Ok((0..self.n_rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect())
    }

    pub fn matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix, LinalgError> {
        check_len(self.n_cols, other.n_rows)?;
        let mut out = DenseMatrix::zeros(self.n_rows, other.n_cols);
        for i in 0..self.n_rows {
            for k in 0..self.n_cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.n_cols {
                    out.data[i * other.n_cols + j] += a * other[(k, j)];
                }
            }
        }
        Ok(out)
    }

    pub fn scale(&mut self, factor: f64) {
        self.data.iter_mut().for_each(|v| *v *= factor);
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

impl std::ops::Index<(usize, usize)> for DenseMatrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.n_cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.n_cols + j]
    }
}

/// A dense block placed at `(row_offset, col_offset)` inside a larger host matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseBlock {
    pub row_offset: usize,
    pub col_offset: usize,
    pub data: DenseMatrix,
}

impl DenseBlock {
    pub fn new(row_offset: usize, col_offset: usize, data: DenseMatrix) -> Self {
        Self {
            row_offset,
            col_offset,
            data,
        }
    }

    pub fn fits_within(&self, n_rows: usize, n_cols: usize) -> bool {
        self.row_offset + self.data.n_rows() <= n_rows && self.col_offset + self.data.n_cols() <= n_cols
    }

    /// `y[block rows] += B x[block cols]`.
    pub fn add_product(&self, x: &[f64], y: &mut [f64]) {
        let nc = self.data.n_cols();
        let xs = &x[self.col_offset..self.col_offset + nc];
        for i in 0..self.data.n_rows() {
            let s: f64 = self.data.row(i).iter().zip(xs).map(|(a, b)| a * b).sum();
            y[self.row_offset + i] += s;
        }
    }

    pub fn add_into(&self, host: &mut DenseMatrix) {
        for i in 0..self.data.n_rows() {
            for j in 0..self.data.n_cols() {
                host[(self.row_offset + i, self.col_offset + j)] += self.data[(i, j)];
            }
        }
    }
}
