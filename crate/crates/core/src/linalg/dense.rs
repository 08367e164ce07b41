use std::ops::{Index, IndexMut};

use super::{dot, norm, Mode, C64, ONE, ZERO};
use crate::error::{Error, Result};

/// Column-major dense complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix {
    nrows: usize,
    ncols: usize,
    data: Vec<C64>,
}

impl DenseMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            data: vec![ZERO; nrows * ncols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    /// Builds a matrix from columns of equal length `nrows`.
    pub fn from_columns(nrows: usize, columns: &[Vec<C64>]) -> Self {
        let mut data = Vec::with_capacity(nrows * columns.len());
        for c in columns {
            assert_eq!(c.len(), nrows, "column length mismatch");
            data.extend_from_slice(c);
        }
        Self {
            nrows,
            ncols: columns.len(),
            data,
        }
    }

    pub fn from_fn(nrows: usize, ncols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut m = Self::zeros(nrows, ncols);
        for j in 0..ncols {
            for i in 0..nrows {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn col(&self, j: usize) -> &[C64] {
        &self.data[j * self.nrows..(j + 1) * self.nrows]
    }

    pub fn col_mut(&mut self, j: usize) -> &mut [C64] {
        &mut self.data[j * self.nrows..(j + 1) * self.nrows]
    }

    pub fn columns(&self) -> impl Iterator<Item = &[C64]> {
        (0..self.ncols).map(move |j| self.col(j))
    }

    /// First `k` columns.
    pub fn leading_columns(&self, k: usize) -> Self {
        let k = k.min(self.ncols);
        Self {
            nrows: self.nrows,
            ncols: k,
            data: self.data[..k * self.nrows].to_vec(),
        }
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.ncols, self.nrows, |i, j| self[(j, i)].conj())
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.ncols, other.nrows, "matmul dimension mismatch");
        let mut out = Self::zeros(self.nrows, other.ncols);
        for j in 0..other.ncols {
            let oc = out.col_mut(j);
            for (k, &b) in other.col(j).iter().enumerate() {
                if b == ZERO {
                    continue;
                }
                for (o, a) in oc.iter_mut().zip(self.col(k)) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub fn matvec(&self, x: &[C64]) -> Vec<C64> {
        assert_eq!(x.len(), self.ncols, "matvec dimension mismatch");
        let mut y = vec![ZERO; self.nrows];
        for (j, &xj) in x.iter().enumerate() {
            for (yi, a) in y.iter_mut().zip(self.col(j)) {
                *yi += a * xj;
            }
        }
        y
    }

    /// `Aᴴ x`
    pub fn adjoint_matvec(&self, x: &[C64]) -> Vec<C64> {
        assert_eq!(x.len(), self.nrows, "matvec dimension mismatch");
        (0..self.ncols).map(|j| dot(self.col(j), x)).collect()
    }

    pub fn frobenius_norm(&self) -> f64 {
        norm(&self.data)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[j * self.nrows + i]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[j * self.nrows + i]
    }
}

/// Dense LU with partial pivoting, `P A = L U`.
#[derive(Clone, Debug)]
pub struct DenseLu {
    lu: DenseMatrix,
    perm: Vec<usize>,
}

impl DenseLu {
    pub fn factorize(a: &DenseMatrix) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::DimensionMismatch {
                context: "dense LU (square)",
                expected: n,
                got: a.ncols(),
            });
        }
        let scale = a.data.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (p, pmax) = (k..n)
                .map(|i| (i, lu[(i, k)].norm()))
                .fold((k, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
            if pmax <= f64::EPSILON * scale * n as f64 || pmax == 0.0 {
                return Err(Error::SingularMatrix { step: k });
            }
            if p != k {
                perm.swap(p, k);
                for j in 0..n {
                    let t = lu[(p, j)];
                    lu[(p, j)] = lu[(k, j)];
                    lu[(k, j)] = t;
                }
            }
            let pivot = lu[(k, k)];
            for i in k + 1..n {
                lu[(i, k)] /= pivot;
            }
            for j in k + 1..n {
                let ukj = lu[(k, j)];
                if ukj == ZERO {
                    continue;
                }
                for i in k + 1..n {
                    let lik = lu[(i, k)];
                    lu[(i, j)] -= lik * ukj;
                }
            }
        }
        Ok(Self { lu, perm })
    }

    pub fn dim(&self) -> usize {
        self.perm.len()
    }

    /// Solves `A x = b` (`Normal`) or `Aᴴ x = b` (`Adjoint`).
    pub fn solve(&self, b: &[C64], mode: Mode) -> Vec<C64> {
        let n = self.dim();
        assert_eq!(b.len(), n, "dense LU solve dimension mismatch");
        let lu = &self.lu;
        match mode {
            Mode::Normal => {
                let mut x: Vec<C64> = self.perm.iter().map(|&p| b[p]).collect();
                for j in 0..n {
                    let xj = x[j];
                    for i in j + 1..n {
                        x[i] -= lu[(i, j)] * xj;
                    }
                }
                for j in (0..n).rev() {
                    x[j] /= lu[(j, j)];
                    let xj = x[j];
                    for i in 0..j {
                        x[i] -= lu[(i, j)] * xj;
                    }
                }
                x
            }
            Mode::Adjoint | Mode::Transpose => {
                let cj = |v: C64| if mode == Mode::Adjoint { v.conj() } else { v };
                // Uᴴ w = b, then Lᴴ y = w, then x = Pᵀ y
                let mut w = b.to_vec();
                for j in 0..n {
                    let mut s = w[j];
                    for i in 0..j {
                        s -= cj(lu[(i, j)]) * w[i];
                    }
                    w[j] = s / cj(lu[(j, j)]);
                }
                for j in (0..n).rev() {
                    let mut s = w[j];
                    for i in j + 1..n {
                        s -= cj(lu[(i, j)]) * w[i];
                    }
                    w[j] = s;
                }
                let mut x = vec![ZERO; n];
                for (k, &p) in self.perm.iter().enumerate() {
                    x[p] = w[k];
                }
                x
            }
        }
    }
}

/// Orthonormal basis of the column span of `y` by twice-iterated modified
/// Gram-Schmidt. Numerically dependent columns are dropped, so the result
/// may have fewer columns than `y`.
pub fn thin_qr(y: &DenseMatrix) -> DenseMatrix {
    let scale = y.columns().map(norm).fold(0.0, f64::max);
    let drop_tol = 1e-12 * scale.max(f64::MIN_POSITIVE);
    let mut q: Vec<Vec<C64>> = Vec::with_capacity(y.ncols());
    for col in y.columns() {
        let mut v = col.to_vec();
        for _ in 0..2 {
            for qk in &q {
                let h = dot(qk, &v);
                for (vi, qi) in v.iter_mut().zip(qk) {
                    *vi -= h * qi;
                }
            }
        }
        let nv = norm(&v);
        if nv > drop_tol {
            let inv = 1.0 / nv;
            v.iter_mut().for_each(|x| *x *= inv);
            q.push(v);
        }
    }
    DenseMatrix::from_columns(y.nrows(), &q)
}

/// Thin singular value decomposition `B = U diag(σ) Vᴴ`, σ descending.
#[derive(Clone, Debug)]
pub struct Svd {
    pub u: DenseMatrix,
    pub sigma: Vec<f64>,
    pub v: DenseMatrix,
}

/// One-sided (Hestenes) Jacobi SVD; intended for matrices whose smaller
/// dimension is at most a few hundred.
pub fn small_svd(b: &DenseMatrix) -> Svd {
    if b.nrows() >= b.ncols() {
        jacobi_svd_tall(b)
    } else {
        let t = jacobi_svd_tall(&b.adjoint());
        Svd {
            u: t.v,
            sigma: t.sigma,
            v: t.u,
        }
    }
}

fn jacobi_svd_tall(b: &DenseMatrix) -> Svd {
    let (m, n) = (b.nrows(), b.ncols());
    let mut a = b.clone();
    let mut v = DenseMatrix::identity(n);
    let eps = 1e-15;
    for _sweep in 0..80 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha: f64 = a.col(p).iter().map(|x| x.norm_sqr()).sum();
                let beta: f64 = a.col(q).iter().map(|x| x.norm_sqr()).sum();
                let gamma = dot(a.col(p), a.col(q));
                let g = gamma.norm();
                if g == 0.0 || g <= eps * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let phase = gamma / g;
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut a, p, q, c, s, phase);
                rotate(&mut v, p, q, c, s, phase);
            }
        }
        if !rotated {
            break;
        }
    }
    let mut order: Vec<(usize, f64)> = (0..n).map(|j| (j, norm(a.col(j)))).collect();
    order.sort_by(|x, y| y.1.total_cmp(&x.1));
    let sigma: Vec<f64> = order.iter().map(|&(_, s)| s).collect();
    let smax = sigma.first().copied().unwrap_or(0.0);
    let mut ucols: Vec<Vec<C64>> = Vec::with_capacity(n);
    let mut vcols = Vec::with_capacity(n);
    for &(j, s) in &order {
        vcols.push(v.col(j).to_vec());
        if s > 1e-300 && s > 1e-14 * smax {
            ucols.push(a.col(j).iter().map(|x| x / s).collect());
        } else {
            ucols.push(vec![ZERO; m]);
        }
    }
    complete_orthonormal(&mut ucols, &sigma, smax, m);
    Svd {
        u: DenseMatrix::from_columns(m, &ucols),
        sigma,
        v: DenseMatrix::from_columns(n, &vcols),
    }
}

/// Columns `(p, q)` ← `(c·x_p − s·e^{-iφ}x_q, s·x_p + c·e^{-iφ}x_q)`.
fn rotate(a: &mut DenseMatrix, p: usize, q: usize, c: f64, s: f64, phase: C64) {
    let ph = phase.conj();
    let m = a.nrows();
    for i in 0..m {
        let xp = a[(i, p)];
        let xq = ph * a[(i, q)];
        a[(i, p)] = xp * c - xq * s;
        a[(i, q)] = xp * s + xq * c;
    }
}

/// Replaces left singular vectors of (numerically) zero singular values with
/// an orthonormal completion.
fn complete_orthonormal(cols: &mut [Vec<C64>], sigma: &[f64], smax: f64, m: usize) {
    let mut unit = 0;
    for j in 0..cols.len() {
        if sigma[j] > 1e-300 && sigma[j] > 1e-14 * smax {
            continue;
        }
        loop {
            assert!(unit < m, "cannot complete orthonormal basis");
            let mut v = vec![ZERO; m];
            v[unit] = ONE;
            unit += 1;
            for _ in 0..2 {
                for (k, ck) in cols.iter().enumerate() {
                    if k == j {
                        continue;
                    }
                    let h = dot(ck, &v);
                    for (vi, ci) in v.iter_mut().zip(ck) {
                        *vi -= h * ci;
                    }
                }
            }
            let nv = norm(&v);
            if nv > 1e-8 {
                cols[j] = v.iter().map(|x| x / nv).collect();
                break;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{complex_gaussian, keyed_rng};

    fn random(seed: u64, m: usize, n: usize) -> DenseMatrix {
        let mut rng = keyed_rng(seed, 11);
        DenseMatrix::from_fn(m, n, |_, _| complex_gaussian(&mut rng))
    }

    fn gram_defect(q: &DenseMatrix) -> f64 {
        q.adjoint()
            .matmul(q)
            .max_abs_diff(&DenseMatrix::identity(q.ncols()))
    }

    #[test]
    fn dense_lu_roundtrip_and_adjoint() {
        let a = random(1, 12, 12);
        let lu = DenseLu::factorize(&a).unwrap();
        let x = random(2, 12, 1).col(0).to_vec();
        let b = a.matvec(&x);
        let y = lu.solve(&b, Mode::Normal);
        assert!(norm(&crate::linalg::sub(&x, &y)) <= 1e-11 * norm(&x));
        let z = lu.solve(&b, Mode::Adjoint);
        let back = a.adjoint_matvec(&z);
        assert!(norm(&crate::linalg::sub(&back, &b)) <= 1e-11 * norm(&b));
    }

    #[test]
    fn dense_lu_singular() {
        let mut a = DenseMatrix::identity(3);
        a[(2, 2)] = ZERO;
        assert!(matches!(
            DenseLu::factorize(&a),
            Err(Error::SingularMatrix { step: 2 })
        ));
    }

    #[test]
    fn qr_of_orthonormal_is_itself_up_to_phase() {
        let q0 = thin_qr(&random(3, 10, 4));
        let q1 = thin_qr(&q0);
        for j in 0..4 {
            let h = dot(q0.col(j), q1.col(j));
            assert!((h.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn qr_two_columns() {
        let y = DenseMatrix::from_columns(
            2,
            &[
                vec![C64::new(3.0, 0.0), C64::new(3.0, 0.0)],
                vec![C64::new(0.5, 0.0), C64::new(-0.5, 0.0)],
            ],
        );
        let q = thin_qr(&y);
        assert_eq!(q.ncols(), 2);
        assert!(gram_defect(&q) <= 1e-14);
    }

    #[test]
    fn qr_projector_identity() {
        let y = random(5, 50, 8);
        let q = thin_qr(&y);
        assert!(gram_defect(&q) <= 1e-12);
        let proj = q.matmul(&q.adjoint().matmul(&y));
        let mut diff = proj.clone();
        for j in 0..8 {
            for i in 0..50 {
                diff[(i, j)] -= y[(i, j)];
            }
        }
        assert!(diff.frobenius_norm() <= 1e-12 * y.frobenius_norm());
    }

    #[test]
    fn qr_drops_dependent_columns() {
        let mut y = random(6, 20, 3);
        for i in 0..20 {
            let v = y[(i, 0)] * C64::new(2.0, -1.0);
            y[(i, 2)] = v;
        }
        assert_eq!(thin_qr(&y).ncols(), 2);
    }

    #[test]
    fn svd_identity() {
        let s = small_svd(&DenseMatrix::identity(3));
        for &x in &s.sigma {
            assert!((x - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn svd_embedded_diagonal() {
        let mut b = DenseMatrix::zeros(3, 5);
        b[(0, 0)] = C64::new(3.0, 0.0);
        b[(1, 1)] = C64::new(2.0, 0.0);
        b[(2, 2)] = C64::new(1.0, 0.0);
        let s = small_svd(&b);
        assert_eq!(s.sigma.len(), 3);
        for (x, e) in s.sigma.iter().zip([3.0, 2.0, 1.0]) {
            assert!((x - e).abs() < 1e-14);
        }
        for j in 0..3 {
            assert!((s.v[(j, j)].norm() - 1.0).abs() < 1e-12);
        }
    }

    fn check_svd(b: &DenseMatrix) {
        let s = small_svd(b);
        let mut us = s.u.clone();
        for j in 0..us.ncols() {
            for x in us.col_mut(j) {
                *x *= s.sigma[j];
            }
        }
        let rec = us.matmul(&s.v.adjoint());
        assert!(rec.max_abs_diff(b) <= 1e-10 * b.frobenius_norm());
        assert!(gram_defect(&s.u) <= 1e-12);
        assert!(gram_defect(&s.v) <= 1e-12);
        assert!(s.sigma.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn svd_wide_and_tall() {
        check_svd(&random(7, 6, 40));
        check_svd(&random(8, 40, 6));
        check_svd(&random(9, 15, 15));
    }

    #[test]
    fn svd_rank_deficient_completes_u() {
        let mut b = random(10, 8, 4);
        for i in 0..8 {
            let v = b[(i, 0)];
            b[(i, 3)] = v;
        }
        check_svd(&b);
        assert!(small_svd(&b).sigma[3] < 1e-12);
    }
}
