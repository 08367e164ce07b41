//! Interface maps `T_i`, their randomized SVD, and the coarse spaces built
//! from the leading right singular vectors.

use rand::Rng;
use rayon::prelude::*;

use crate::decomposition::{Hierarchy, NeighborTraceMap};
use crate::error::{Error, Result};
use crate::fem::WavenumberField;
use crate::linalg::{
    small_svd, thin_qr, ComplexSparseMatrix, DenseLu, DenseMatrix, Mode, SparseLu, C64, ZERO,
};
use crate::rng::complex_gaussian;
use crate::schwarz::SchwarzContext;

/// Approximate local inverse `S_i ≈ Ã_i⁻¹`.
#[derive(Debug)]
pub enum LocalSolver {
    Exact(SparseLu),
    /// A few Schwarz steps on the child's own subdivision.
    Iterative(Box<SchwarzContext>),
}

impl LocalSolver {
    pub fn solve(&self, b: &[C64]) -> Vec<C64> {
        match self {
            Self::Exact(lu) => lu.solve(b, Mode::Normal).expect("local solve dimensions"),
            Self::Iterative(ctx) => ctx.precond_apply(b),
        }
    }

    /// Exact Hermitian transpose of [`solve`](Self::solve).
    pub fn solve_adjoint(&self, b: &[C64]) -> Vec<C64> {
        match self {
            Self::Exact(lu) => lu.solve(b, Mode::Adjoint).expect("local solve dimensions"),
            Self::Iterative(ctx) => ctx.precond_adjoint(b),
        }
    }
}

/// One child of a Schwarz level.
#[derive(Debug)]
pub struct Subdomain {
    pub id: usize,
    pub restriction: Vec<usize>,
    pub owned_mask: Vec<bool>,
    pub artificial: Vec<usize>,
    /// `Ã_i`.
    pub matrix: ComplexSparseMatrix,
    pub solver: LocalSolver,
}

impl Subdomain {
    pub fn size(&self) -> usize {
        self.restriction.len()
    }

    /// `R_i r`.
    pub fn restrict(&self, r: &[C64]) -> Vec<C64> {
        self.restriction.iter().map(|&g| r[g]).collect()
    }

    /// `B_iᵀ g`.
    pub fn lift_interface(&self, g: &[C64]) -> Vec<C64> {
        let mut x = vec![ZERO; self.size()];
        for (&p, &v) in self.artificial.iter().zip(g) {
            x[p] = v;
        }
        x
    }
}

/// The children of one parent with their local solvers and trace maps.
#[derive(Debug)]
pub struct Level {
    pub subdomains: Vec<Subdomain>,
    /// `traces[i]`: maps from subdomain `i` to each neighbour with kept rows.
    pub traces: Vec<Vec<NeighborTraceMap>>,
}

impl Level {
    /// Builds the children of `parent`. `solver_for` creates each child's
    /// local solver from its matrix; children are processed in parallel.
    pub fn build<F>(
        tree: &Hierarchy,
        field: &WavenumberField,
        parent: usize,
        solver_for: F,
    ) -> Result<Self>
    where
        F: Fn(usize, &ComplexSparseMatrix) -> Result<LocalSolver> + Sync,
    {
        let children = &tree.node(parent).children;
        let subdomains = children
            .par_iter()
            .map(|&c| {
                let node = tree.node(c);
                let matrix = tree.assemble_local(c, field);
                let solver = solver_for(c, &matrix)?;
                Ok(Subdomain {
                    id: c,
                    restriction: node.restriction.clone(),
                    owned_mask: node.owned_mask.clone(),
                    artificial: node.artificial.clone(),
                    matrix,
                    solver,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let position = |id: usize| children.iter().position(|&c| c == id).expect("sibling");
        let traces = children
            .iter()
            .map(|&i| {
                tree.node(i)
                    .neighbors
                    .iter()
                    .filter_map(|&j| {
                        NeighborTraceMap::build(tree, i, j, &subdomains[position(j)].matrix)
                    })
                    .collect()
            })
            .collect();
        Ok(Self { subdomains, traces })
    }

    /// Children of `parent` with sparse-LU local solvers.
    pub fn build_exact(tree: &Hierarchy, field: &WavenumberField, parent: usize) -> Result<Self> {
        Self::build(tree, field, parent, |_, a| {
            Ok(LocalSolver::Exact(SparseLu::factorize(a)?))
        })
    }

    pub fn len(&self) -> usize {
        self.subdomains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subdomains.is_empty()
    }

    pub fn interface_operator(&self, index: usize) -> InterfaceOperator<'_> {
        InterfaceOperator {
            subdomain: &self.subdomains[index],
            traces: &self.traces[index],
        }
    }
}

/// A linear map given only through its action and that of its adjoint.
pub trait LinearMap {
    fn in_dim(&self) -> usize;
    fn out_dim(&self) -> usize;
    fn forward(&self, x: &[C64]) -> Vec<C64>;
    fn adjoint(&self, y: &[C64]) -> Vec<C64>;

    fn apply(&self, x: &[C64], mode: Mode) -> Result<Vec<C64>> {
        let (expected, adjoint) = match mode {
            Mode::Normal => (self.in_dim(), false),
            Mode::Adjoint => (self.out_dim(), true),
            Mode::Transpose => {
                return Err(Error::config(
                    "linear maps support forward and adjoint only",
                ))
            }
        };
        if x.len() != expected {
            return Err(Error::DimensionMismatch {
                context: "linear map input",
                expected,
                got: x.len(),
            });
        }
        Ok(if adjoint {
            self.adjoint(x)
        } else {
            self.forward(x)
        })
    }
}

impl LinearMap for DenseMatrix {
    fn in_dim(&self) -> usize {
        self.ncols()
    }
    fn out_dim(&self) -> usize {
        self.nrows()
    }
    fn forward(&self, x: &[C64]) -> Vec<C64> {
        self.matvec(x)
    }
    fn adjoint(&self, y: &[C64]) -> Vec<C64> {
        self.adjoint_matvec(y)
    }
}

/// `T_i = B_i^o S_i B_iᵀ`: Robin datum on the artificial boundary of `Ω_i`
/// to the stacked Robin residuals it induces on neighbouring interfaces.
#[derive(Clone, Copy, Debug)]
pub struct InterfaceOperator<'a> {
    pub subdomain: &'a Subdomain,
    pub traces: &'a [NeighborTraceMap],
}

impl InterfaceOperator<'_> {
    /// `S_i B_iᵀ g`, the local field generated by interface datum `g`.
    pub fn local_field(&self, g: &[C64]) -> Vec<C64> {
        self.subdomain
            .solver
            .solve(&self.subdomain.lift_interface(g))
    }
}

impl LinearMap for InterfaceOperator<'_> {
    fn in_dim(&self) -> usize {
        self.subdomain.artificial.len()
    }

    fn out_dim(&self) -> usize {
        self.traces.iter().map(NeighborTraceMap::output_dim).sum()
    }

    fn forward(&self, g: &[C64]) -> Vec<C64> {
        let w = self.local_field(g);
        self.traces.iter().flat_map(|t| t.apply(&w)).collect()
    }

    fn adjoint(&self, y: &[C64]) -> Vec<C64> {
        let mut acc = vec![ZERO; self.subdomain.size()];
        let mut offset = 0;
        for t in self.traces {
            let m = t.output_dim();
            t.apply_adjoint_into(&y[offset..offset + m], &mut acc);
            offset += m;
        }
        let w = self.subdomain.solver.solve_adjoint(&acc);
        self.subdomain.artificial.iter().map(|&p| w[p]).collect()
    }
}

/// Dense matrix of a linear map, built column by column.
pub fn materialize(op: &dyn LinearMap) -> DenseMatrix {
    let n = op.in_dim();
    let cols: Vec<Vec<C64>> = (0..n)
        .map(|k| {
            let mut e = vec![ZERO; n];
            e[k] = C64::new(1.0, 0.0);
            op.forward(&e)
        })
        .collect();
    DenseMatrix::from_columns(op.out_dim(), &cols)
}

#[derive(Clone, Debug)]
pub struct RsvdResult {
    /// Leading right singular vectors, `in_dim × kept`.
    pub v: DenseMatrix,
    pub sigma: Vec<f64>,
    /// Number of random samples drawn.
    pub samples: usize,
    /// Fewer than the requested vectors survived orthogonalization.
    pub reduced: bool,
}

/// Randomized SVD with `n_c + oversampling` Gaussian samples (clamped to the
/// input dimension) and no power iterations.
pub fn rsvd<R: Rng + ?Sized>(
    op: &dyn LinearMap,
    n_c: usize,
    oversampling: usize,
    rng: &mut R,
) -> RsvdResult {
    let n = op.in_dim();
    let samples = (n_c + oversampling).min(n);
    if n_c == 0 || samples == 0 {
        return RsvdResult {
            v: DenseMatrix::zeros(n, 0),
            sigma: Vec::new(),
            samples: 0,
            reduced: n_c > 0,
        };
    }
    let g: Vec<Vec<C64>> = (0..samples)
        .map(|_| (0..n).map(|_| complex_gaussian(rng)).collect())
        .collect();
    let y: Vec<Vec<C64>> = g.iter().map(|col| op.forward(col)).collect();
    let q = thin_qr(&DenseMatrix::from_columns(op.out_dim(), &y));
    let z: Vec<Vec<C64>> = q.columns().map(|col| op.adjoint(col)).collect();
    // Zᴴ = Qᴴ T ≈ Ũ Σ Vᴴ
    let svd = small_svd(&DenseMatrix::from_columns(n, &z).adjoint());
    let kept = n_c.min(svd.sigma.len());
    RsvdResult {
        v: svd.v.leading_columns(kept),
        sigma: svd.sigma[..kept].to_vec(),
        samples,
        reduced: kept < n_c,
    }
}

/// Columns of `C` belonging to one child: dense values on the parent nodes
/// the child owns.
#[derive(Clone, Debug)]
pub struct CoarseBlock {
    pub support: Vec<usize>,
    /// `support.len() × n_c`.
    pub values: DenseMatrix,
}

impl CoarseBlock {
    /// `P_i W` for a local matrix `W` whose columns live on `Ω_i`.
    pub fn prolongate(sub: &Subdomain, local: &DenseMatrix) -> Self {
        Self::from_local(&sub.restriction, &sub.owned_mask, local)
    }

    /// Same as [`prolongate`](Self::prolongate) with explicit index maps.
    pub fn from_local(restriction: &[usize], owned_mask: &[bool], local: &DenseMatrix) -> Self {
        let owned: Vec<usize> = (0..restriction.len()).filter(|&a| owned_mask[a]).collect();
        let support = owned.iter().map(|&a| restriction[a]).collect();
        let values = DenseMatrix::from_fn(owned.len(), local.ncols(), |r, c| local[(owned[r], c)]);
        Self { support, values }
    }

    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }
}

/// `C = (C_i)` with the factorized Galerkin matrix `A_c = Cᴴ A C`.
#[derive(Debug)]
pub struct CoarseSpace {
    pub blocks: Vec<CoarseBlock>,
    pub galerkin: DenseMatrix,
    lu: DenseLu,
    offsets: Vec<usize>,
    nrows: usize,
}

impl CoarseSpace {
    /// Returns `None` when the blocks have no columns at all.
    pub fn new(blocks: Vec<CoarseBlock>, a: &ComplexSparseMatrix) -> Result<Option<Self>> {
        let mut offsets = vec![0];
        for b in &blocks {
            offsets.push(offsets.last().unwrap() + b.ncols());
        }
        let dim = *offsets.last().unwrap();
        if dim == 0 {
            return Ok(None);
        }
        let n = a.nrows();
        // A C_j, one block at a time; each column is dense on the parent
        // but we only need it on the supports of the other blocks.
        let panels: Vec<Vec<C64>> = blocks
            .par_iter()
            .map(|bj| {
                let mut panel = vec![ZERO; dim * bj.ncols()];
                let mut x = vec![ZERO; n];
                for c in 0..bj.ncols() {
                    for (r, &g) in bj.support.iter().enumerate() {
                        x[g] = bj.values[(r, c)];
                    }
                    let ax = a.mul_vec(&x);
                    for (bi, &off) in blocks.iter().zip(&offsets) {
                        for ci in 0..bi.ncols() {
                            let mut s = ZERO;
                            for (r, &g) in bi.support.iter().enumerate() {
                                s += bi.values[(r, ci)].conj() * ax[g];
                            }
                            panel[c * dim + off + ci] = s;
                        }
                    }
                    for &g in &bj.support {
                        x[g] = ZERO;
                    }
                }
                panel
            })
            .collect();
        let mut galerkin = DenseMatrix::zeros(dim, dim);
        for (j, panel) in panels.iter().enumerate() {
            for c in 0..blocks[j].ncols() {
                galerkin
                    .col_mut(offsets[j] + c)
                    .copy_from_slice(&panel[c * dim..(c + 1) * dim]);
            }
        }
        let lu = DenseLu::factorize(&galerkin).map_err(|e| match e {
            Error::SingularMatrix { step } => Error::Config(format!(
                "coarse matrix is singular at pivot {step}; coarse modes are redundant"
            )),
            other => other,
        })?;
        Ok(Some(Self {
            blocks,
            galerkin,
            lu,
            offsets,
            nrows: n,
        }))
    }

    pub fn dim(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn block_sizes(&self) -> Vec<usize> {
        self.blocks.iter().map(CoarseBlock::ncols).collect()
    }

    /// `Cᴴ r`.
    pub fn restrict(&self, r: &[C64]) -> Vec<C64> {
        let mut out = Vec::with_capacity(self.dim());
        for b in &self.blocks {
            for c in 0..b.ncols() {
                out.push(
                    b.support
                        .iter()
                        .enumerate()
                        .map(|(k, &g)| b.values[(k, c)].conj() * r[g])
                        .sum(),
                );
            }
        }
        out
    }

    /// `C y`.
    pub fn prolongate(&self, y: &[C64]) -> Vec<C64> {
        let mut out = vec![ZERO; self.nrows];
        for (b, &off) in self.blocks.iter().zip(&self.offsets) {
            for c in 0..b.ncols() {
                let yc = y[off + c];
                for (k, &g) in b.support.iter().enumerate() {
                    out[g] += b.values[(k, c)] * yc;
                }
            }
        }
        out
    }

    /// `C A_c⁻¹ Cᴴ r`.
    pub fn correct(&self, r: &[C64]) -> Vec<C64> {
        self.prolongate(&self.lu.solve(&self.restrict(r), Mode::Normal))
    }

    /// `C A_c⁻ᴴ Cᴴ r`.
    pub fn correct_adjoint(&self, r: &[C64]) -> Vec<C64> {
        self.prolongate(&self.lu.solve(&self.restrict(r), Mode::Adjoint))
    }

    /// `C` as a dense matrix.
    pub fn to_dense(&self) -> DenseMatrix {
        let mut m = DenseMatrix::zeros(self.nrows, self.dim());
        for (b, &off) in self.blocks.iter().zip(&self.offsets) {
            for c in 0..b.ncols() {
                for (k, &g) in b.support.iter().enumerate() {
                    m[(g, off + c)] = b.values[(k, c)];
                }
            }
        }
        m
    }
}

/// Per-child rsvd statistics of one coarse space.
#[derive(Clone, Debug, Default)]
pub struct CoarseReport {
    pub sigma: Vec<Vec<f64>>,
    pub reduced: Vec<usize>,
}

/// Coarse space of a level from `n_c` modes per child; `rng_for(id)` yields
/// the sampling stream of child `id`.
pub fn build_coarse_space<R, F>(
    level: &Level,
    n_c: usize,
    oversampling: usize,
    a_parent: &ComplexSparseMatrix,
    rng_for: F,
) -> Result<(Option<CoarseSpace>, CoarseReport)>
where
    R: Rng,
    F: Fn(usize) -> R + Sync,
{
    if n_c == 0 {
        return Ok((None, CoarseReport::default()));
    }
    let parts: Vec<(CoarseBlock, RsvdResult)> = (0..level.len())
        .into_par_iter()
        .map(|i| {
            let op = level.interface_operator(i);
            let mut rng = rng_for(op.subdomain.id);
            let res = rsvd(&op, n_c, oversampling, &mut rng);
            let cols: Vec<Vec<C64>> = res.v.columns().map(|v| op.local_field(v)).collect();
            let local = DenseMatrix::from_columns(op.subdomain.size(), &cols);
            (CoarseBlock::prolongate(op.subdomain, &local), res)
        })
        .collect();
    let mut report = CoarseReport::default();
    let mut blocks = Vec::with_capacity(parts.len());
    for (block, res) in parts {
        if res.reduced {
            report.reduced.push(blocks.len());
        }
        report.sigma.push(res.sigma);
        blocks.push(block);
    }
    Ok((CoarseSpace::new(blocks, a_parent)?, report))
}
