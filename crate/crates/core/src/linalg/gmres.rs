//! Full (unrestarted) right-preconditioned GMRES.
//!
//! Arnoldi with modified Gram-Schmidt, Givens rotations on the Hessenberg
//! matrix. The preconditioned directions `z_k = M v_k` are stored, so the
//! iterate is `x = Σ y_k z_k` without an extra preconditioner application.

use super::{axpy, dot, norm, sub, C64, ZERO};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug)]
pub struct GmresOptions {
    /// Stop once `‖b − A x‖₂ / ‖b‖₂ < tolerance`.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for GmresOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-5,
            max_iterations: 500,
        }
    }
}

#[derive(Clone, Debug)]
pub struct GmresOutcome {
    pub x: Vec<C64>,
    /// Number of Arnoldi steps taken.
    pub iterations: usize,
    /// Relative residual estimates, starting with 1 for `x = 0`.
    pub residual_history: Vec<f64>,
    /// True relative residual of the returned iterate.
    pub final_relres: f64,
    pub converged: bool,
}

/// Solves `A x = b` with right preconditioning: GMRES on `A M y = b`, `x = M y`.
pub fn gmres<A, M>(apply_a: A, apply_m: M, b: &[C64], opts: &GmresOptions) -> Result<GmresOutcome>
where
    A: Fn(&[C64]) -> Vec<C64>,
    M: Fn(&[C64]) -> Vec<C64>,
{
    if !(opts.tolerance.is_finite() && opts.tolerance > 0.0) {
        return Err(Error::config("GMRES tolerance must be positive"));
    }
    if opts.max_iterations == 0 {
        return Err(Error::config("GMRES needs max_iterations >= 1"));
    }
    let n = b.len();
    let beta = norm(b);
    if beta == 0.0 {
        return Ok(GmresOutcome {
            x: vec![ZERO; n],
            iterations: 0,
            residual_history: vec![0.0],
            final_relres: 0.0,
            converged: true,
        });
    }

    let mut v: Vec<Vec<C64>> = vec![b.iter().map(|x| x / beta).collect()];
    let mut z: Vec<Vec<C64>> = Vec::new();
    // Hessenberg columns after rotation (upper triangular R)
    let mut r: Vec<Vec<C64>> = Vec::new();
    let mut rotations: Vec<(f64, C64)> = Vec::new();
    let mut g = vec![C64::new(beta, 0.0)];
    let mut history = vec![1.0];
    let mut best: Option<(Vec<C64>, f64)> = None;

    for k in 0..opts.max_iterations {
        let zk = apply_m(&v[k]);
        check_len(&zk, n, "preconditioner output")?;
        let mut w = apply_a(&zk);
        check_len(&w, n, "operator output")?;
        z.push(zk);
        let wnorm = norm(&w);

        let mut h = Vec::with_capacity(k + 2);
        for vi in &v {
            let hik = dot(vi, &w);
            axpy(-hik, vi, &mut w);
            h.push(hik);
        }
        let hnext = norm(&w);
        h.push(C64::new(hnext, 0.0));

        for (i, &(c, s)) in rotations.iter().enumerate() {
            let (a, bb) = (h[i], h[i + 1]);
            h[i] = a * c + s * bb;
            h[i + 1] = -s.conj() * a + bb * c;
        }
        let (c, s, rho) = givens(h[k], h[k + 1]);
        h[k] = rho;
        h[k + 1] = ZERO;
        rotations.push((c, s));
        let gk = g[k];
        g[k] = gk * c;
        g.push(-s.conj() * gk);
        h.truncate(k + 1);
        r.push(h);

        let estimate = g[k + 1].norm() / beta;
        history.push(estimate);
        let breakdown = hnext <= 1e-14 * wnorm;

        if estimate < opts.tolerance || breakdown || k + 1 == opts.max_iterations {
            let x = assemble_iterate(&r, &g, &z, n);
            let relres = norm(&sub(b, &apply_a(&x))) / beta;
            if relres < opts.tolerance {
                return Ok(GmresOutcome {
                    x,
                    iterations: k + 1,
                    residual_history: history,
                    final_relres: relres,
                    converged: true,
                });
            }
            if breakdown || k + 1 == opts.max_iterations {
                return Ok(GmresOutcome {
                    x,
                    iterations: k + 1,
                    residual_history: history,
                    final_relres: relres,
                    converged: false,
                });
            }
            best = Some((x, relres));
        }
        v.push(w.iter().map(|x| x / hnext).collect());
    }
    // unreachable: the loop returns on its last step
    let (x, relres) = best.unwrap_or_else(|| (vec![ZERO; n], 1.0));
    Ok(GmresOutcome {
        x,
        iterations: opts.max_iterations,
        residual_history: history,
        final_relres: relres,
        converged: false,
    })
}

fn check_len(v: &[C64], n: usize, context: &'static str) -> Result<()> {
    if v.len() != n {
        return Err(Error::DimensionMismatch {
            context,
            expected: n,
            got: v.len(),
        });
    }
    Ok(())
}

/// Rotation `[[c, s], [-s̄, c]]` mapping `(a, b)` to `(ρ, 0)`.
fn givens(a: C64, b: C64) -> (f64, C64, C64) {
    let an = a.norm();
    let bn = b.norm();
    if bn == 0.0 {
        return (1.0, ZERO, a);
    }
    if an == 0.0 {
        return (0.0, C64::new(1.0, 0.0), b);
    }
    let rho = an.hypot(bn);
    let phase = a / an;
    (an / rho, phase * b.conj() / rho, phase * rho)
}

fn assemble_iterate(r: &[Vec<C64>], g: &[C64], z: &[Vec<C64>], n: usize) -> Vec<C64> {
    let k = r.len();
    let mut y = vec![ZERO; k];
    for i in (0..k).rev() {
        let mut s = g[i];
        for j in i + 1..k {
            s -= r[j][i] * y[j];
        }
        y[i] = s / r[i][i];
    }
    let mut x = vec![ZERO; n];
    for (yj, zj) in y.iter().zip(z) {
        axpy(*yj, zj, &mut x);
    }
    x
}
