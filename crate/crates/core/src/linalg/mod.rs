//! Complex linear algebra kernels.

mod dense;
mod gmres;
mod lu;
mod sparse;

pub use dense::{small_svd, thin_qr, DenseLu, DenseMatrix, Svd};
pub use gmres::{gmres, GmresOptions, GmresOutcome};
pub use lu::{reverse_cuthill_mckee, SparseLu};
pub use sparse::ComplexSparseMatrix;

pub use num_complex::Complex64 as C64;

pub type ComplexVector = Vec<C64>;

/// How a matrix (or factorization) is applied.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Normal,
    Transpose,
    Adjoint,
}

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

/// Euclidean inner product `⟨x, y⟩ = Σ conj(x_i) y_i`.
pub fn dot(x: &[C64], y: &[C64]) -> C64 {
    debug_assert_eq!(x.len(), y.len());
    x.iter().zip(y).map(|(a, b)| a.conj() * b).sum()
}

pub fn norm(x: &[C64]) -> f64 {
    x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

/// `y += alpha * x`
pub fn axpy(alpha: C64, x: &[C64], y: &mut [C64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn sub(x: &[C64], y: &[C64]) -> Vec<C64> {
    x.iter().zip(y).map(|(a, b)| a - b).collect()
}

pub fn scale(alpha: C64, x: &mut [C64]) {
    for v in x {
        *v *= alpha;
    }
}

pub fn conj(x: &[C64]) -> Vec<C64> {
    x.iter().map(|v| v.conj()).collect()
}

pub fn all_finite(x: &[C64]) -> bool {
    x.iter().all(|v| v.re.is_finite() && v.im.is_finite())
}
