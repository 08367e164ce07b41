//! Optimised restricted additive Schwarz with coarse correction, its
//! recursive hierarchical form, and the GMRES outer solve.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decomposition::Hierarchy;
use crate::error::{Error, Result};
use crate::fem::{AssembledProblem, WavenumberField};
use crate::interface::{build_coarse_space, CoarseSpace, Level, LocalSolver};
use crate::linalg::{gmres, norm, sub, ComplexSparseMatrix, GmresOptions, SparseLu, C64, ZERO};
use crate::rng::{keyed_rng, subdomain_stream};

/// Method parameters. Level `l` (1-based) holds the children of level
/// `l - 1`; `n_c[l - 1]` modes are taken per child at level `l`, and a
/// context for a node at level `l` runs `n_i[l]` steps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodParams {
    pub n_c: Vec<usize>,
    pub n_i: Vec<usize>,
    pub overlap_elems: usize,
    pub oversampling: usize,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub seed: u64,
}

impl Default for MethodParams {
    fn default() -> Self {
        Self {
            n_c: vec![0],
            n_i: vec![1],
            overlap_elems: 2,
            oversampling: 5,
            tolerance: 1e-5,
            max_iterations: 500,
            seed: 1,
        }
    }
}

impl MethodParams {
    /// `levels` levels with `n_c(l) = 2^(levels - l) · finest`.
    pub fn doubling(levels: usize, finest: usize) -> Self {
        Self {
            n_c: doubled_counts(levels, &[finest]),
            n_i: vec![1; levels],
            ..Self::default()
        }
    }

    /// Checks the per-level vectors against a tree of depth `levels`.
    pub fn validate(&self, levels: usize) -> Result<()> {
        if self.n_c.len() != levels {
            return Err(Error::config(format!(
                "n_c has {} entries for {levels} levels",
                self.n_c.len()
            )));
        }
        if self.n_i.len() != levels {
            return Err(Error::config(format!(
                "n_i has {} entries for {levels} levels",
                self.n_i.len()
            )));
        }
        if self.n_i.contains(&0) {
            return Err(Error::config("n_i must be at least 1"));
        }
        if !(self.tolerance.is_finite() && self.tolerance > 0.0) || self.max_iterations == 0 {
            return Err(Error::config(
                "tolerance and max_iterations must be positive",
            ));
        }
        Ok(())
    }
}

/// Expands coarse counts given for the finest levels to all `levels`
/// levels, doubling towards the root: `[3]` over 3 levels is `[12, 6, 3]`.
pub fn doubled_counts(levels: usize, finest: &[usize]) -> Vec<usize> {
    let given = finest.len().min(levels);
    let tail = &finest[finest.len() - given..];
    let mut out = vec![0; levels];
    out[levels - given..].copy_from_slice(tail);
    for l in (0..levels - given).rev() {
        out[l] = 2 * out[l + 1];
    }
    out
}

/// One Schwarz level: the matrix on the parent's node set, its children,
/// and the optional coarse space.
#[derive(Debug)]
pub struct SchwarzContext {
    pub node: usize,
    pub matrix: ComplexSparseMatrix,
    pub level: Level,
    pub coarse: Option<CoarseSpace>,
    pub steps: usize,
}

/// Summary of a context tree, per parent node.
#[derive(Clone, Debug, Default, Serialize)]
pub struct SetupReport {
    /// `(node, coarse dimension)` in post-order.
    pub coarse_dims: Vec<(usize, usize)>,
    /// Children whose rsvd returned fewer modes than requested.
    pub reduced_blocks: usize,
    pub max_sigma: f64,
}

impl SchwarzContext {
    /// Builds the context tree rooted at `node`, whose level matrix is
    /// `matrix` (the global `A` for the root). Children are built first.
    pub fn build(
        tree: &Hierarchy,
        field: &WavenumberField,
        node: usize,
        matrix: ComplexSparseMatrix,
        params: &MethodParams,
    ) -> Result<(Self, SetupReport)> {
        params.validate(tree.depth())?;
        let depth = tree.node(node).level;
        let reports = std::sync::Mutex::new(Vec::new());
        let level = Level::build(tree, field, node, |c, a| {
            if tree.node(c).is_leaf() {
                Ok(LocalSolver::Exact(SparseLu::factorize(a)?))
            } else {
                let (ctx, rep) = Self::build(tree, field, c, a.clone(), params)?;
                reports.lock().unwrap().push((c, rep));
                Ok(LocalSolver::Iterative(Box::new(ctx)))
            }
        })?;
        let (coarse, crep) = build_coarse_space(
            &level,
            params.n_c[depth],
            params.oversampling,
            &matrix,
            |id| keyed_rng(params.seed, subdomain_stream(id)),
        )?;
        let mut child_reports = reports.into_inner().unwrap();
        child_reports.sort_by_key(|(c, _)| *c);
        let mut report = SetupReport::default();
        for (_, r) in child_reports {
            report.coarse_dims.extend(r.coarse_dims);
            report.reduced_blocks += r.reduced_blocks;
            report.max_sigma = report.max_sigma.max(r.max_sigma);
        }
        report
            .coarse_dims
            .push((node, coarse.as_ref().map_or(0, CoarseSpace::dim)));
        report.reduced_blocks += crep.reduced.len();
        report.max_sigma = crep
            .sigma
            .iter()
            .flatten()
            .fold(report.max_sigma, |m, &s| m.max(s));
        let ctx = Self {
            node,
            matrix,
            level,
            coarse,
            steps: params.n_i[depth],
        };
        Ok((ctx, report))
    }

    pub fn size(&self) -> usize {
        self.matrix.nrows()
    }

    /// `Σ_i P_i S_i R_i r`.
    pub fn ras_apply(&self, r: &[C64]) -> Vec<C64> {
        let locals: Vec<Vec<C64>> = self
            .level
            .subdomains
            .par_iter()
            .map(|s| s.solver.solve(&s.restrict(r)))
            .collect();
        let mut out = vec![ZERO; self.size()];
        for (s, w) in self.level.subdomains.iter().zip(&locals) {
            for (a, &g) in s.restriction.iter().enumerate() {
                if s.owned_mask[a] {
                    out[g] += w[a];
                }
            }
        }
        out
    }

    /// `Σ_i R_iᵀ S_iᴴ P_iᵀ r`, summed in ascending subdomain order.
    pub fn ras_adjoint(&self, r: &[C64]) -> Vec<C64> {
        let locals: Vec<Vec<C64>> = self
            .level
            .subdomains
            .par_iter()
            .map(|s| {
                let x: Vec<C64> = s
                    .restriction
                    .iter()
                    .zip(&s.owned_mask)
                    .map(|(&g, &own)| if own { r[g] } else { ZERO })
                    .collect();
                s.solver.solve_adjoint(&x)
            })
            .collect();
        let mut out = vec![ZERO; self.size()];
        for (s, w) in self.level.subdomains.iter().zip(&locals) {
            for (a, &g) in s.restriction.iter().enumerate() {
                out[g] += w[a];
            }
        }
        out
    }

    /// One step `u ↦ ũ + C A_c⁻¹ Cᴴ (f − A ũ)` with `ũ = u + Ras(f − A u)`.
    pub fn schwarz_step(&self, u: &[C64], f: &[C64]) -> Vec<C64> {
        let r = sub(f, &self.matrix.mul_vec(u));
        self.step_from_residual(u, f, &r)
    }

    fn step_from_residual(&self, u: &[C64], f: &[C64], r: &[C64]) -> Vec<C64> {
        let mut ut = self.ras_apply(r);
        for (a, b) in ut.iter_mut().zip(u) {
            *a += b;
        }
        if let Some(cs) = &self.coarse {
            let rt = sub(f, &self.matrix.mul_vec(&ut));
            for (a, b) in ut.iter_mut().zip(cs.correct(&rt)) {
                *a += b;
            }
        }
        ut
    }

    /// `n_i` Schwarz steps on `A e = r` from `e = 0`; linear in `r`.
    pub fn precond_apply(&self, r: &[C64]) -> Vec<C64> {
        let mut e = self.step_from_residual(&vec![ZERO; r.len()], r, r);
        for _ in 1..self.steps {
            e = self.schwarz_step(&e, r);
        }
        e
    }

    /// Hermitian transpose of [`precond_apply`](Self::precond_apply).
    pub fn precond_adjoint(&self, y: &[C64]) -> Vec<C64> {
        let mut z = y.to_vec();
        let mut out = vec![ZERO; y.len()];
        for k in 0..self.steps {
            let qz = self.coarse.as_ref().map(|cs| cs.correct_adjoint(&z));
            let w = match &qz {
                Some(qz) => sub(&z, &self.matrix.adjoint_mul_vec(qz)),
                None => z.clone(),
            };
            let rw = self.ras_adjoint(&w);
            for (o, v) in out.iter_mut().zip(&rw) {
                *o += v;
            }
            if let Some(qz) = &qz {
                for (o, v) in out.iter_mut().zip(qz) {
                    *o += v;
                }
            }
            if k + 1 < self.steps {
                z = sub(&w, &self.matrix.adjoint_mul_vec(&rw));
            }
        }
        out
    }

    /// Visits this context and all nested ones, parents first.
    pub fn for_each_context<'a>(&'a self, f: &mut dyn FnMut(&'a SchwarzContext)) {
        f(self);
        for s in &self.level.subdomains {
            if let LocalSolver::Iterative(ctx) = &s.solver {
                ctx.for_each_context(f);
            }
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SolveReport {
    #[serde(skip)]
    pub x: Vec<C64>,
    pub iterations: usize,
    pub history: Vec<f64>,
    pub final_relres: f64,
    pub converged: bool,
    /// Coarse dimension of the top level.
    pub coarse_dim: usize,
    pub setup: SetupReport,
    pub setup_seconds: f64,
    pub solve_seconds: f64,
    /// `‖x − u_true‖ / ‖u_true‖` when the exact solution is known.
    pub error: Option<f64>,
}

/// Builds the preconditioner and runs right-preconditioned GMRES from zero.
pub fn solve(
    problem: &AssembledProblem,
    tree: &Hierarchy,
    params: &MethodParams,
) -> Result<SolveReport> {
    if problem.matrix.nrows() != tree.root().local_size() {
        return Err(Error::DimensionMismatch {
            context: "problem vs decomposition",
            expected: tree.root().local_size(),
            got: problem.matrix.nrows(),
        });
    }
    let t0 = Instant::now();
    let (ctx, setup) =
        SchwarzContext::build(tree, &problem.field, 0, problem.matrix.clone(), params)?;
    let setup_seconds = t0.elapsed().as_secs_f64();
    let t1 = Instant::now();
    let opts = GmresOptions {
        tolerance: params.tolerance,
        max_iterations: params.max_iterations,
    };
    let out = gmres(
        |x| problem.matrix.mul_vec(x),
        |r| ctx.precond_apply(r),
        &problem.rhs,
        &opts,
    )?;
    let solve_seconds = t1.elapsed().as_secs_f64();
    let error = problem
        .exact
        .as_ref()
        .map(|u| norm(&sub(&out.x, u)) / norm(u));
    Ok(SolveReport {
        iterations: out.iterations,
        history: out.residual_history,
        final_relres: out.final_relres,
        converged: out.converged,
        coarse_dim: ctx.coarse.as_ref().map_or(0, CoarseSpace::dim),
        setup,
        setup_seconds,
        solve_seconds,
        error,
        x: out.x,
    })
}
