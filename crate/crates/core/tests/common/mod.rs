#![allow(dead_code)]

use helmwave_core::decomposition::{Hierarchy, LevelSpec};
use helmwave_core::fem::{assemble_global, RectMesh, WavenumberField};
use helmwave_core::rng::{gaussian_vector, keyed_rng};
use helmwave_core::{ComplexSparseMatrix, DenseMatrix, C64};
use nalgebra::DMatrix;

pub fn to_na(m: &DenseMatrix) -> DMatrix<C64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

pub fn sparse_to_na(a: &ComplexSparseMatrix) -> DMatrix<C64> {
    to_na(&a.to_dense())
}

pub fn na_vec(v: &[C64]) -> DMatrix<C64> {
    DMatrix::from_column_slice(v.len(), 1, v)
}

pub fn random_vec(seed: u64, n: usize) -> Vec<C64> {
    gaussian_vector(&mut keyed_rng(seed, 99), n)
}

pub fn rel_diff(a: &[C64], b: &[C64]) -> f64 {
    let num: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm_sqr())
        .sum::<f64>()
        .sqrt();
    let den: f64 = b.iter().map(|y| y.norm_sqr()).sum::<f64>().sqrt();
    num / den.max(f64::MIN_POSITIVE)
}

/// Mesh, tree, and global matrix for `spec` with `n` elements per leaf and
/// `k h = 1`.
pub fn setup(spec: &str, n: usize) -> (RectMesh, Hierarchy, WavenumberField, ComplexSparseMatrix) {
    let spec = LevelSpec::parse(spec, 2).unwrap();
    let (mx, my) = spec.leaf_grid();
    let mesh = RectMesh::new(mx * n, my * n).unwrap();
    let field = WavenumberField::Constant { k: mesh.nx as f64 };
    let tree = Hierarchy::build(&mesh, &spec).unwrap();
    let a = assemble_global(&mesh, &field);
    (mesh, tree, field, a)
}

/// Boolean `R` (local × parent) of a child.
pub fn restriction_matrix(restriction: &[usize], parent_size: usize) -> DMatrix<C64> {
    let mut r = DMatrix::zeros(restriction.len(), parent_size);
    for (a, &g) in restriction.iter().enumerate() {
        r[(a, g)] = C64::new(1.0, 0.0);
    }
    r
}

/// Boolean restricted prolongation `P` (parent × local) of a child.
pub fn prolongation_matrix(
    restriction: &[usize],
    owned_mask: &[bool],
    parent_size: usize,
) -> DMatrix<C64> {
    let mut p = DMatrix::zeros(parent_size, restriction.len());
    for (a, &g) in restriction.iter().enumerate() {
        if owned_mask[a] {
            p[(g, a)] = C64::new(1.0, 0.0);
        }
    }
    p
}

use helmwave_core::interface::{materialize, Level};
use helmwave_core::schwarz::SchwarzContext;

pub fn max_abs(m: &DMatrix<C64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// `B_j Ã_j R_j P_i` assembled densely, all artificial rows of `Ω_j`.
pub fn dense_bij(level: &Level, i: usize, j: usize, parent_size: usize) -> DMatrix<C64> {
    let (si, sj) = (&level.subdomains[i], &level.subdomains[j]);
    let aj = sparse_to_na(&sj.matrix);
    let rj = restriction_matrix(&sj.restriction, parent_size);
    let pi = prolongation_matrix(&si.restriction, &si.owned_mask, parent_size);
    let full = aj * rj * pi;
    DMatrix::from_fn(sj.artificial.len(), si.size(), |r, c| {
        full[(sj.artificial[r], c)]
    })
}

/// Largest relative deviation of the trace maps from the dense `B_ij`,
/// counting dropped nonzero rows and missing maps as full errors. Also
/// returns the number of maps compared.
pub fn bij_oracle_error(level: &Level, parent_size: usize) -> (f64, usize) {
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for i in 0..level.len() {
        for j in (0..level.len()).filter(|&j| j != i) {
            let dense = dense_bij(level, i, j, parent_size);
            let scale = max_abs(&dense);
            let tid = level.subdomains[j].id;
            let Some(map) = level.traces[i].iter().find(|t| t.target == tid) else {
                if scale > 0.0 {
                    worst = f64::INFINITY;
                }
                continue;
            };
            let art = &level.subdomains[j].artificial;
            let pos: Vec<usize> = map
                .kept_rows
                .iter()
                .map(|p| art.iter().position(|q| q == p).unwrap())
                .collect();
            for r in (0..art.len()).filter(|r| !pos.contains(r)) {
                if dense.row(r).iter().any(|z| z.norm() != 0.0) {
                    worst = f64::INFINITY;
                }
            }
            let si = level.subdomains[i].size();
            for c in 0..si {
                let mut e = vec![C64::new(0.0, 0.0); si];
                e[c] = C64::new(1.0, 0.0);
                let y = map.apply(&e);
                for (k, &r) in pos.iter().enumerate() {
                    worst = worst.max((y[k] - dense[(r, c)]).norm() / scale);
                }
            }
            count += 1;
        }
    }
    (worst, count)
}

/// Largest relative deviation of materialized `T_i` from
/// `B_i^o Ã_i⁻¹ B_iᵀ` built from dense factors.
pub fn ti_oracle_error(level: &Level, parent_size: usize) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..level.len() {
        let op = level.interface_operator(i);
        let s = op.subdomain;
        let ai_inv = sparse_to_na(&s.matrix).try_inverse().unwrap();
        let mut bt = DMatrix::<C64>::zeros(s.size(), s.artificial.len());
        for (c, &p) in s.artificial.iter().enumerate() {
            bt[(p, c)] = C64::new(1.0, 0.0);
        }
        let mut blocks = Vec::new();
        for t in op.traces {
            let j = level
                .subdomains
                .iter()
                .position(|x| x.id == t.target)
                .unwrap();
            let full = dense_bij(level, i, j, parent_size);
            let art = &level.subdomains[j].artificial;
            let rows: Vec<usize> = t
                .kept_rows
                .iter()
                .map(|p| art.iter().position(|q| q == p).unwrap())
                .collect();
            blocks.push(full.select_rows(rows.iter()));
        }
        let nrows: usize = blocks.iter().map(|b| b.nrows()).sum();
        let mut bo = DMatrix::<C64>::zeros(nrows, s.size());
        let mut off = 0;
        for b in &blocks {
            bo.view_mut((off, 0), (b.nrows(), b.ncols())).copy_from(b);
            off += b.nrows();
        }
        let oracle = bo * ai_inv * bt;
        let t = to_na(&materialize(&op));
        if t.shape() != oracle.shape() {
            return f64::INFINITY;
        }
        worst = worst.max(max_abs(&(t - &oracle)) / max_abs(&oracle).max(1.0));
    }
    worst
}

/// Relative deviation of `ras_apply` from the dense `Σ P_i Ã_i⁻¹ R_i` on a
/// few random vectors.
pub fn ras_oracle_error(ctx: &SchwarzContext, trials: u64) -> f64 {
    let n = ctx.size();
    let mut m = DMatrix::<C64>::zeros(n, n);
    for s in &ctx.level.subdomains {
        let r = restriction_matrix(&s.restriction, n);
        let p = prolongation_matrix(&s.restriction, &s.owned_mask, n);
        m += p * sparse_to_na(&s.matrix).try_inverse().unwrap() * r;
    }
    (0..trials)
        .map(|seed| {
            let r = random_vec(seed, n);
            let want: Vec<C64> = (&m * na_vec(&r)).iter().copied().collect();
            rel_diff(&ctx.ras_apply(&r), &want)
        })
        .fold(0.0, f64::max)
}
