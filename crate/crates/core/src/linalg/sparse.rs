use super::{DenseMatrix, Mode, C64, ZERO};
use crate::error::{Error, Result};

/// Compressed-row complex sparse matrix.
///
/// Column indices are strictly increasing within each row.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexSparseMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<C64>,
}

impl ComplexSparseMatrix {
    /// Builds a matrix from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        mut triplets: Vec<(usize, usize, C64)>,
    ) -> Result<Self> {
        for &(r, c, v) in &triplets {
            if r >= nrows || c >= ncols {
                return Err(Error::OutOfBounds {
                    row: r,
                    col: c,
                    nrows,
                    ncols,
                });
            }
            if !(v.re.is_finite() && v.im.is_finite()) {
                return Err(Error::NonFinite("sparse matrix entry"));
            }
        }
        triplets.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut indptr = vec![0usize; nrows + 1];
        let mut indices = Vec::with_capacity(triplets.len());
        let mut values: Vec<C64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                indices.push(c);
                values.push(v);
                indptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..nrows {
            indptr[i + 1] += indptr[i];
        }
        Ok(Self {
            nrows,
            ncols,
            indptr,
            indices,
            values,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            nrows: n,
            ncols: n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            values: vec![C64::new(1.0, 0.0); n],
        }
    }

    pub fn from_dense(a: &DenseMatrix) -> Self {
        let mut trip = Vec::new();
        for i in 0..a.nrows() {
            for j in 0..a.ncols() {
                let v = a[(i, j)];
                if v != ZERO {
                    trip.push((i, j, v));
                }
            }
        }
        Self::from_triplets(a.nrows(), a.ncols(), trip).expect("dense entries in bounds")
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn indptr(&self) -> &[usize] {
        &self.indptr
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[C64]) {
        let span = self.indptr[i]..self.indptr[i + 1];
        (&self.indices[span.clone()], &self.values[span])
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(p) => vals[p],
            Err(_) => ZERO,
        }
    }

    /// Sparse product in the requested mode; `Adjoint` applies the conjugate transpose.
    pub fn spmv(&self, x: &[C64], mode: Mode) -> Result<Vec<C64>> {
        let expected = match mode {
            Mode::Normal => self.ncols,
            Mode::Transpose | Mode::Adjoint => self.nrows,
        };
        if x.len() != expected {
            return Err(Error::DimensionMismatch {
                context: "spmv",
                expected,
                got: x.len(),
            });
        }
        Ok(match mode {
            Mode::Normal => self.mul_vec(x),
            Mode::Transpose => self.mul_vec_transposed(x, false),
            Mode::Adjoint => self.mul_vec_transposed(x, true),
        })
    }

    /// `A x`; panics on a dimension mismatch.
    pub fn mul_vec(&self, x: &[C64]) -> Vec<C64> {
        assert_eq!(x.len(), self.ncols, "spmv dimension mismatch");
        (0..self.nrows)
            .map(|i| {
                let (cols, vals) = self.row(i);
                cols.iter().zip(vals).map(|(&j, v)| v * x[j]).sum()
            })
            .collect()
    }

    /// `Aᴴ x`; panics on a dimension mismatch.
    pub fn adjoint_mul_vec(&self, x: &[C64]) -> Vec<C64> {
        assert_eq!(x.len(), self.nrows, "spmv dimension mismatch");
        self.mul_vec_transposed(x, true)
    }

    fn mul_vec_transposed(&self, x: &[C64], conjugate: bool) -> Vec<C64> {
        let mut y = vec![ZERO; self.ncols];
        for (i, &xi) in x.iter().enumerate() {
            let (cols, vals) = self.row(i);
            for (&j, v) in cols.iter().zip(vals) {
                y[j] += if conjugate { v.conj() } else { *v } * xi;
            }
        }
        y
    }

    pub fn transpose(&self) -> Self {
        let mut trip = Vec::with_capacity(self.nnz());
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                trip.push((j, i, v));
            }
        }
        Self::from_triplets(self.ncols, self.nrows, trip).expect("transpose stays in bounds")
    }

    /// Submatrix made of the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let mut indptr = Vec::with_capacity(rows.len() + 1);
        indptr.push(0);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        for &r in rows {
            let (cols, vals) = self.row(r);
            indices.extend_from_slice(cols);
            values.extend_from_slice(vals);
            indptr.push(indices.len());
        }
        Self {
            nrows: rows.len(),
            ncols: self.ncols,
            indptr,
            indices,
            values,
        }
    }

    /// Exact entrywise symmetry `A = Aᵀ`.
    pub fn is_symmetric(&self) -> bool {
        self.nrows == self.ncols && *self == self.transpose()
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut d = DenseMatrix::zeros(self.nrows, self.ncols);
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                d[(i, j)] = v;
            }
        }
        d
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}
