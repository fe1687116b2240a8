//! Small dense matrices with a partial-pivot LU.
//!
//! Used for element-local blocks (at most a few dozen rows), Schur
//! complements in static condensation, and as the independent dense oracle
//! in tests. The global sparse path never goes through this module.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DenseError {
    #[error("singular dense block: no pivot in column {col} (|max| = {max:.3e})")]
    Singular { col: usize, max: f64 },
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DMat {
    pub nrows: usize,
    pub ncols: usize,
    data: Vec<f64>,
}

impl DMat {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self { nrows, ncols, data: vec![0.0; nrows * ncols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let nrows = rows.len();
        let ncols = if nrows == 0 { 0 } else { rows[0].len() };
        let mut m = Self::zeros(nrows, ncols);
        for (i, r) in rows.iter().enumerate() {
            assert_eq!(r.len(), ncols);
            m.data[i * ncols..(i + 1) * ncols].copy_from_slice(r);
        }
        m
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.ncols..(i + 1) * self.ncols]
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols);
        let mut y = vec![0.0; self.nrows];
        for i in 0..self.nrows {
            let r = self.row(i);
            let mut s = 0.0;
            for (a, b) in r.iter().zip(x) {
                s += a * b;
            }
            y[i] = s;
        }
        y
    }

    pub fn matmul(&self, other: &DMat) -> DMat {
        assert_eq!(self.ncols, other.nrows);
        let mut out = DMat::zeros(self.nrows, other.ncols);
        for i in 0..self.nrows {
            for k in 0..self.ncols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.ncols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn transpose(&self) -> DMat {
        let mut out = DMat::zeros(self.ncols, self.nrows);
        for i in 0..self.nrows {
            for j in 0..self.ncols {
                out[(j, i)] = self[(i, j)];
            }
        }
        out
    }

    /// LU factorization with partial pivoting; `self` must be square.
    pub fn lu(&self) -> Result<DenseLu, DenseError> {
        assert_eq!(self.nrows, self.ncols);
        let n = self.nrows;
        let mut lu = self.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for col in 0..n {
            let mut p = col;
            let mut max = lu[(col, col)].abs();
            for r in col + 1..n {
                let v = lu[(r, col)].abs();
                if v > max {
                    max = v;
                    p = r;
                }
            }
            if max == 0.0 || !max.is_finite() {
                return Err(DenseError::Singular { col, max });
            }
            if p != col {
                perm.swap(p, col);
                for j in 0..n {
                    let a = lu[(col, j)];
                    lu[(col, j)] = lu[(p, j)];
                    lu[(p, j)] = a;
                }
            }
            let piv = lu[(col, col)];
            for r in col + 1..n {
                let m = lu[(r, col)] / piv;
                lu[(r, col)] = m;
                for j in col + 1..n {
                    lu[(r, j)] -= m * lu[(col, j)];
                }
            }
        }
        Ok(DenseLu { lu, perm })
    }

    /// Direct solve of `self * x = b`.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>, DenseError> {
        Ok(self.lu()?.solve(b))
    }
}

impl std::ops::Index<(usize, usize)> for DMat {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.ncols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for DMat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.ncols + j]
    }
}

/// Factored form of a square [`DMat`].
#[derive(Debug)]
pub struct DenseLu {
    lu: DMat,
    perm: Vec<usize>,
}

impl DenseLu {
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.lu.nrows;
        assert_eq!(b.len(), n);
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 1..n {
            let mut s = x[i];
            for j in 0..i {
                s -= self.lu[(i, j)] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..n {
                s -= self.lu[(i, j)] * x[j];
            }
            x[i] = s / self.lu[(i, i)];
        }
        x
    }

    /// Solves for every column of `b`, returning the solution matrix.
    pub fn solve_mat(&self, b: &DMat) -> DMat {
        let mut out = DMat::zeros(b.nrows, b.ncols);
        let mut col = vec![0.0; b.nrows];
        for j in 0..b.ncols {
            for i in 0..b.nrows {
                col[i] = b[(i, j)];
            }
            let x = self.solve(&col);
            for i in 0..b.nrows {
                out[(i, j)] = x[i];
            }
        }
        out
    }
}
