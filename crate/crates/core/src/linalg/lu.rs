//! Sparse LU factorization for complex matrices.
//!
//! The matrix is first permuted symmetrically with reverse Cuthill-McKee to
//! confine fill to a band, then factored column by column with the left-looking
//! Gilbert-Peierls algorithm and threshold partial pivoting that prefers the
//! diagonal entry.

use std::collections::VecDeque;

use super::{ComplexSparseMatrix, Mode, C64, ONE, ZERO};
use crate::error::{Error, Result};

const NONE: usize = usize::MAX;

/// A diagonal pivot is kept when `|a_kk| >= PIVOT_THRESHOLD * max_i |a_ik|`.
const PIVOT_THRESHOLD: f64 = 0.1;

#[derive(Clone, Debug, Default)]
struct Csc {
    colptr: Vec<usize>,
    rowind: Vec<usize>,
    values: Vec<C64>,
}

impl Csc {
    fn col(&self, j: usize) -> std::ops::Range<usize> {
        self.colptr[j]..self.colptr[j + 1]
    }
}

/// `P_r · A(q, q) = L · U` with unit lower `L`.
///
/// In each column of `L` the unit diagonal is stored first; in each column of
/// `U` the diagonal is stored last.
#[derive(Clone, Debug)]
pub struct SparseLu {
    n: usize,
    /// symmetric permutation: row/column `i` of the factored matrix is `q[i]` of `A`
    q: Vec<usize>,
    /// row `i` of `A(q, q)` becomes pivot row `pinv[i]`
    pinv: Vec<usize>,
    l: Csc,
    u: Csc,
}

impl SparseLu {
    pub fn factorize(a: &ComplexSparseMatrix) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::DimensionMismatch {
                context: "sparse LU (square)",
                expected: n,
                got: a.ncols(),
            });
        }
        let q = reverse_cuthill_mckee(a);
        let mut qinv = vec![0; n];
        for (i, &qi) in q.iter().enumerate() {
            qinv[qi] = i;
        }
        // B = A(q, q) stored by columns: column j of A is row j of Aᵀ.
        let at = a.transpose();
        let mut b = Csc {
            colptr: Vec::with_capacity(n + 1),
            ..Default::default()
        };
        b.colptr.push(0);
        for &qj in &q {
            let (rows, vals) = at.row(qj);
            for (&r, &v) in rows.iter().zip(vals) {
                b.rowind.push(qinv[r]);
                b.values.push(v);
            }
            b.colptr.push(b.rowind.len());
        }

        let mut l = Csc::default();
        let mut u = Csc::default();
        l.colptr.push(0);
        u.colptr.push(0);
        let mut pinv = vec![NONE; n];
        let mut x = vec![ZERO; n];
        let mut xi = vec![0usize; n];
        let mut mark = vec![NONE; n];
        let mut stack: Vec<(usize, usize)> = Vec::new();

        for k in 0..n {
            // pattern of L \ B(:,k) via depth-first search in the graph of L
            let mut top = n;
            for p in b.col(k) {
                let start = b.rowind[p];
                if mark[start] == k {
                    continue;
                }
                mark[start] = k;
                stack.push((start, first_child(&l, &pinv, start)));
                while let Some(entry) = stack.last_mut() {
                    let node = entry.0;
                    let end = child_end(&l, &pinv, node);
                    let mut pushed = None;
                    while entry.1 < end {
                        let child = l.rowind[entry.1];
                        entry.1 += 1;
                        if mark[child] != k {
                            pushed = Some(child);
                            break;
                        }
                    }
                    match pushed {
                        Some(child) => {
                            mark[child] = k;
                            stack.push((child, first_child(&l, &pinv, child)));
                        }
                        None => {
                            stack.pop();
                            top -= 1;
                            xi[top] = node;
                        }
                    }
                }
            }
            // sparse triangular solve
            for p in b.col(k) {
                x[b.rowind[p]] = b.values[p];
            }
            for &j in &xi[top..] {
                let col = pinv[j];
                if col == NONE {
                    continue;
                }
                let xj = x[j];
                for p in l.col(col).skip(1) {
                    x[l.rowind[p]] -= l.values[p] * xj;
                }
            }
            // pivot selection
            let mut ipiv = NONE;
            let mut amax = -1.0;
            for &i in &xi[top..] {
                if pinv[i] == NONE {
                    let t = x[i].norm();
                    if t > amax {
                        amax = t;
                        ipiv = i;
                    }
                } else {
                    u.rowind.push(pinv[i]);
                    u.values.push(x[i]);
                }
            }
            if ipiv == NONE || amax <= 0.0 {
                return Err(Error::SingularMatrix { step: k });
            }
            if pinv[k] == NONE && x[k].norm() >= PIVOT_THRESHOLD * amax {
                ipiv = k;
            }
            let pivot = x[ipiv];
            u.rowind.push(k);
            u.values.push(pivot);
            u.colptr.push(u.rowind.len());
            pinv[ipiv] = k;
            l.rowind.push(ipiv);
            l.values.push(ONE);
            for &i in &xi[top..] {
                if pinv[i] == NONE {
                    l.rowind.push(i);
                    l.values.push(x[i] / pivot);
                }
                x[i] = ZERO;
            }
            l.colptr.push(l.rowind.len());
        }
        for r in &mut l.rowind {
            *r = pinv[*r];
        }
        Ok(Self { n, q, pinv, l, u })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Stored entries in `L` and `U` (unit diagonal of `L` included).
    pub fn factor_nnz(&self) -> usize {
        self.l.rowind.len() + self.u.rowind.len()
    }

    /// Solves `A x = b` (`Normal`) or `Aᴴ x = b` (`Adjoint`).
    pub fn solve(&self, b: &[C64], mode: Mode) -> Result<Vec<C64>> {
        if b.len() != self.n {
            return Err(Error::DimensionMismatch {
                context: "sparse LU solve",
                expected: self.n,
                got: b.len(),
            });
        }
        Ok(self.solve_unchecked(b, mode))
    }

    pub(crate) fn solve_unchecked(&self, b: &[C64], mode: Mode) -> Vec<C64> {
        let n = self.n;
        let (l, u) = (&self.l, &self.u);
        let mut w = vec![ZERO; n];
        match mode {
            Mode::Normal => {
                for i in 0..n {
                    w[self.pinv[i]] = b[self.q[i]];
                }
                for j in 0..n {
                    let wj = w[j];
                    if wj == ZERO {
                        continue;
                    }
                    for p in l.col(j).skip(1) {
                        w[l.rowind[p]] -= l.values[p] * wj;
                    }
                }
                for j in (0..n).rev() {
                    let range = u.col(j);
                    let diag = range.end - 1;
                    w[j] /= u.values[diag];
                    let wj = w[j];
                    for p in range.start..diag {
                        w[u.rowind[p]] -= u.values[p] * wj;
                    }
                }
                let mut x = vec![ZERO; n];
                for i in 0..n {
                    x[self.q[i]] = w[i];
                }
                x
            }
            Mode::Adjoint | Mode::Transpose => {
                let cj = |v: C64| if mode == Mode::Adjoint { v.conj() } else { v };
                for i in 0..n {
                    w[i] = b[self.q[i]];
                }
                for j in 0..n {
                    let range = u.col(j);
                    let diag = range.end - 1;
                    let mut s = w[j];
                    for p in range.start..diag {
                        s -= cj(u.values[p]) * w[u.rowind[p]];
                    }
                    w[j] = s / cj(u.values[diag]);
                }
                for j in (0..n).rev() {
                    let mut s = w[j];
                    for p in l.col(j).skip(1) {
                        s -= cj(l.values[p]) * w[l.rowind[p]];
                    }
                    w[j] = s;
                }
                let mut x = vec![ZERO; n];
                for i in 0..n {
                    x[self.q[i]] = w[self.pinv[i]];
                }
                x
            }
        }
    }
}

fn first_child(l: &Csc, pinv: &[usize], node: usize) -> usize {
    match pinv[node] {
        NONE => 0,
        c => l.colptr[c],
    }
}

fn child_end(l: &Csc, pinv: &[usize], node: usize) -> usize {
    match pinv[node] {
        NONE => 0,
        c => l.colptr[c + 1],
    }
}

/// Reverse Cuthill-McKee ordering of the symmetrised pattern of `a`.
pub fn reverse_cuthill_mckee(a: &ComplexSparseMatrix) -> Vec<usize> {
    let n = a.nrows();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        for &j in a.row(i).0 {
            if i != j {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
    }
    for nb in &mut adj {
        nb.sort_unstable();
        nb.dedup();
    }
    let degree: Vec<usize> = adj.iter().map(Vec::len).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    while order.len() < n {
        let seed = (0..n)
            .filter(|&i| !visited[i])
            .min_by_key(|&i| (degree[i], i))
            .unwrap();
        let start = pseudo_peripheral(seed, &adj, &degree, &visited);
        let mut queue = VecDeque::from([start]);
        visited[start] = true;
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut next: Vec<usize> = adj[v].iter().copied().filter(|&w| !visited[w]).collect();
            next.sort_unstable_by_key(|&w| (degree[w], w));
            for w in next {
                visited[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

fn bfs_levels(start: usize, adj: &[Vec<usize>], blocked: &[bool]) -> Vec<Vec<usize>> {
    let mut seen = blocked.to_vec();
    seen[start] = true;
    let mut levels = vec![vec![start]];
    loop {
        let mut next = Vec::new();
        for &v in levels.last().unwrap() {
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    next.push(w);
                }
            }
        }
        if next.is_empty() {
            return levels;
        }
        levels.push(next);
    }
}

fn pseudo_peripheral(seed: usize, adj: &[Vec<usize>], degree: &[usize], blocked: &[bool]) -> usize {
    let mut node = seed;
    let mut ecc = 0;
    for _ in 0..8 {
        let levels = bfs_levels(node, adj, blocked);
        let depth = levels.len();
        if depth <= ecc {
            break;
        }
        ecc = depth;
        node = *levels
            .last()
            .unwrap()
            .iter()
            .min_by_key(|&&w| (degree[w], w))
            .unwrap();
    }
    node
}
