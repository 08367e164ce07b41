//! The 1D model problem `-u'' - k²u = f` on (0, 1) with
//! `-(u' + iku)(0) = g0` and `(u' - iku)(1) = g1`, discretised by P1
//! elements, and the exact a-harmonic interface coarse basis.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::interface::{CoarseBlock, CoarseSpace};
use crate::linalg::{norm, sub, ComplexSparseMatrix, DenseMatrix, Mode, SparseLu, C64, ZERO};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mesh1D {
    pub n: usize,
    pub h: f64,
}

impl Mesh1D {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::config("1D mesh needs at least 2 elements"));
        }
        Ok(Self {
            n,
            h: 1.0 / n as f64,
        })
    }

    pub fn node_count(&self) -> usize {
        self.n + 1
    }

    pub fn x(&self, p: usize) -> f64 {
        p as f64 * self.h
    }
}

/// P1 matrix on elements `e0..e1` with the impedance term at both ends.
/// Local nodes are `e0..=e1`.
pub fn assemble_interval(mesh: &Mesh1D, k: f64, e0: usize, e1: usize) -> ComplexSparseMatrix {
    let h = mesh.h;
    let (kd, ko) = (1.0 / h, -1.0 / h);
    let (md, mo) = (h / 3.0, h / 6.0);
    let mut trip = Vec::with_capacity(4 * (e1 - e0) + 2);
    for e in 0..e1 - e0 {
        let (a, b) = (e, e + 1);
        let d = C64::new(kd - k * k * md, 0.0);
        let o = C64::new(ko - k * k * mo, 0.0);
        trip.extend([(a, a, d), (b, b, d), (a, b, o), (b, a, o)]);
    }
    let last = e1 - e0;
    trip.push((0, 0, C64::new(0.0, -k)));
    trip.push((last, last, C64::new(0.0, -k)));
    ComplexSparseMatrix::from_triplets(last + 1, last + 1, trip).expect("interval assembly")
}

/// Global matrix and the boundary load for data `g0`, `g1`.
pub fn assemble_1d(
    mesh: &Mesh1D,
    k: f64,
    g0: C64,
    g1: C64,
) -> Result<(ComplexSparseMatrix, Vec<C64>)> {
    if !(k.is_finite() && k > 0.0) {
        return Err(Error::config("1D wavenumber must be positive"));
    }
    let a = assemble_interval(mesh, k, 0, mesh.n);
    let mut f = vec![ZERO; mesh.node_count()];
    f[0] += g0;
    f[mesh.n] += g1;
    Ok((a, f))
}

/// An interval node of the bisection tree; element ranges are half-open.
#[derive(Clone, Debug)]
pub struct Interval1D {
    pub id: usize,
    pub level: usize,
    pub owned: (usize, usize),
    pub extended: (usize, usize),
    /// Closed element range where the prolongation is nonzero.
    pub ownership: (usize, usize),
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    pub restriction: Vec<usize>,
    pub owned_mask: Vec<bool>,
    /// Local indices of the interior ends (not on the parent's ends).
    pub artificial: Vec<usize>,
}

impl Interval1D {
    pub fn size(&self) -> usize {
        self.extended.1 - self.extended.0 + 1
    }
}

/// Repeated bisection of (0, 1) with overlap `overlap_elems` on each side.
#[derive(Clone, Debug)]
pub struct Bisection1D {
    pub nodes: Vec<Interval1D>,
    pub levels: usize,
}

impl Bisection1D {
    pub fn build(mesh: &Mesh1D, levels: usize, overlap_elems: usize) -> Result<Self> {
        if levels == 0 {
            return Err(Error::config("bisection needs at least one level"));
        }
        if !mesh.n.is_multiple_of(1 << levels) {
            return Err(Error::config(format!(
                "{} elements cannot be bisected {levels} times",
                mesh.n
            )));
        }
        let root = Interval1D {
            id: 0,
            level: 0,
            owned: (0, mesh.n),
            extended: (0, mesh.n),
            ownership: (0, mesh.n),
            parent: None,
            children: Vec::new(),
            restriction: (0..=mesh.n).collect(),
            owned_mask: vec![true; mesh.n + 1],
            artificial: Vec::new(),
        };
        let mut nodes = vec![root];
        let mut frontier = vec![0];
        for level in 1..=levels {
            let mut next = Vec::new();
            for &pid in &frontier {
                let p = nodes[pid].clone();
                let mid = (p.owned.0 + p.owned.1) / 2;
                for (c, owned) in [(p.owned.0, mid), (mid, p.owned.1)].into_iter().enumerate() {
                    let extended = (
                        owned.0.saturating_sub(overlap_elems).max(p.extended.0),
                        (owned.1 + overlap_elems).min(p.extended.1),
                    );
                    let ownership = if c == 0 {
                        (p.extended.0, mid)
                    } else {
                        (mid, p.extended.1)
                    };
                    let restriction: Vec<usize> = (extended.0..=extended.1)
                        .map(|g| g - p.extended.0)
                        .collect();
                    // the shared node `mid` goes to the first child
                    let owned_mask = (extended.0..=extended.1)
                        .map(|g| g >= ownership.0 && g <= ownership.1 && !(c == 1 && g == mid))
                        .collect();
                    let artificial = [extended.0, extended.1]
                        .into_iter()
                        .filter(|&g| g != p.extended.0 && g != p.extended.1)
                        .map(|g| g - extended.0)
                        .collect();
                    let id = nodes.len();
                    nodes.push(Interval1D {
                        id,
                        level,
                        owned,
                        extended,
                        ownership,
                        parent: Some(pid),
                        children: Vec::new(),
                        restriction,
                        owned_mask,
                        artificial,
                    });
                    nodes[pid].children.push(id);
                    next.push(id);
                }
            }
            frontier = next;
        }
        Ok(Self { nodes, levels })
    }

    pub fn node(&self, id: usize) -> &Interval1D {
        &self.nodes[id]
    }
}

/// Local fields `U_i = Ã_i⁻¹ e_b`, one per artificial end `b` of each child
/// of `parent`, as `(child id, U_i)`.
pub fn interface_fields(
    mesh: &Mesh1D,
    k: f64,
    tree: &Bisection1D,
    parent: usize,
) -> Result<Vec<(usize, Vec<C64>)>> {
    let mut out = Vec::new();
    for &c in &tree.node(parent).children {
        let node = tree.node(c);
        let lu = SparseLu::factorize(&assemble_interval(
            mesh,
            k,
            node.extended.0,
            node.extended.1,
        ))?;
        for &b in &node.artificial {
            let mut e = vec![ZERO; node.size()];
            e[b] = C64::new(1.0, 0.0);
            out.push((c, lu.solve(&e, Mode::Normal)?));
        }
    }
    Ok(out)
}

fn basis_blocks(
    mesh: &Mesh1D,
    k: f64,
    tree: &Bisection1D,
    parent: usize,
) -> Result<Vec<CoarseBlock>> {
    Ok(interface_fields(mesh, k, tree, parent)?
        .into_iter()
        .map(|(c, u)| {
            let node = tree.node(c);
            let local = DenseMatrix::from_columns(u.len(), &[u]);
            CoarseBlock::from_local(&node.restriction, &node.owned_mask, &local)
        })
        .collect())
}

/// `C = (P_i U_i)` on the node set of `parent`'s extended interval.
pub fn exact_interface_basis(
    mesh: &Mesh1D,
    k: f64,
    tree: &Bisection1D,
    parent: usize,
) -> Result<DenseMatrix> {
    let n = tree.node(parent).size();
    let blocks = basis_blocks(mesh, k, tree, parent)?;
    let mut c = DenseMatrix::zeros(n, blocks.len());
    for (j, b) in blocks.iter().enumerate() {
        for (r, &g) in b.support.iter().enumerate() {
            c[(g, j)] = b.values[(r, 0)];
        }
    }
    Ok(c)
}

#[derive(Clone, Debug)]
pub struct OneStep {
    pub u: Vec<C64>,
    pub direct: Vec<C64>,
    /// `‖u − u_direct‖ / ‖u_direct‖` after sweep and coarse correction.
    pub rel_error: f64,
    /// The same after the subdomain sweep alone.
    pub sweep_error: Vec<C64>,
}

/// One step `u ↦ ũ + C A_c⁻¹ Cᴴ (f − A ũ)` from `u = 0` on the first
/// bisection level, with exact local solves and the exact interface basis.
pub fn one_step_solve(mesh: &Mesh1D, k: f64, tree: &Bisection1D, f: &[C64]) -> Result<OneStep> {
    let a = assemble_interval(mesh, k, 0, mesh.n);
    if f.len() != a.nrows() {
        return Err(Error::DimensionMismatch {
            context: "1D load",
            expected: a.nrows(),
            got: f.len(),
        });
    }
    let mut ut = vec![ZERO; f.len()];
    for &c in &tree.node(0).children {
        let node = tree.node(c);
        let lu = SparseLu::factorize(&assemble_interval(
            mesh,
            k,
            node.extended.0,
            node.extended.1,
        ))?;
        let local: Vec<C64> = node.restriction.iter().map(|&g| f[g]).collect();
        let w = lu.solve(&local, Mode::Normal)?;
        for (p, &g) in node.restriction.iter().enumerate() {
            if node.owned_mask[p] {
                ut[g] += w[p];
            }
        }
    }
    let direct = SparseLu::factorize(&a)?.solve(f, Mode::Normal)?;
    let sweep_error = sub(&direct, &ut);
    let mut u = ut.clone();
    if let Some(cs) = CoarseSpace::new(basis_blocks(mesh, k, tree, 0)?, &a)? {
        let r = sub(f, &a.mul_vec(&ut));
        for (x, d) in u.iter_mut().zip(cs.correct(&r)) {
            *x += d;
        }
    }
    let dn = norm(&direct);
    let rel_error = if dn == 0.0 {
        norm(&u)
    } else {
        norm(&sub(&u, &direct)) / dn
    };
    Ok(OneStep {
        u,
        direct,
        rel_error,
        sweep_error,
    })
}

/// One row of the basis dump.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BasisRow {
    pub node_x: f64,
    pub re: f64,
    pub im: f64,
    pub basis_id: usize,
    pub level: usize,
}

/// Interface bases of every parent in the bisection tree, columns numbered
/// consecutively in node order. `level` is that of the children spanning it.
pub fn basis_rows(mesh: &Mesh1D, k: f64, tree: &Bisection1D) -> Result<Vec<BasisRow>> {
    let mut rows = Vec::new();
    let mut basis_id = 0;
    for parent in tree.nodes.iter().filter(|n| !n.children.is_empty()) {
        let c = exact_interface_basis(mesh, k, tree, parent.id)?;
        for j in 0..c.ncols() {
            for (p, v) in c.col(j).iter().enumerate() {
                rows.push(BasisRow {
                    node_x: mesh.x(parent.extended.0 + p),
                    re: v.re,
                    im: v.im,
                    basis_id,
                    level: parent.level + 1,
                });
            }
            basis_id += 1;
        }
    }
    Ok(rows)
}
