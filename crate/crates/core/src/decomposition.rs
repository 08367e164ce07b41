//! Hierarchical overlapping decomposition of a structured mesh.
//!
//! Each tree node carries an owned (non-overlapping) element box and an
//! extended box grown by `overlap_elems` elements and clipped to the parent's
//! extended box. Children split the parent's owned box evenly. All index maps
//! of a child are expressed relative to the parent's extended-box node
//! numbering, which is the node set the parent's Schwarz level works on.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::fem::{assemble_box, RectMesh, WavenumberField};
use crate::linalg::{ComplexSparseMatrix, C64, ZERO};

/// Half-open element index ranges `[i0, i1) × [j0, j1)`; its nodes are the
/// closed ranges `i0..=i1 × j0..=j1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ElementBox {
    pub i0: usize,
    pub i1: usize,
    pub j0: usize,
    pub j1: usize,
}

impl ElementBox {
    pub fn new(i0: usize, i1: usize, j0: usize, j1: usize) -> Self {
        debug_assert!(i0 < i1 && j0 < j1, "empty element box");
        Self { i0, i1, j0, j1 }
    }

    pub fn width(&self) -> usize {
        self.i1 - self.i0
    }

    pub fn height(&self) -> usize {
        self.j1 - self.j0
    }

    pub fn element_count(&self) -> usize {
        self.width() * self.height()
    }

    pub fn node_count(&self) -> usize {
        (self.width() + 1) * (self.height() + 1)
    }

    /// Lexicographic (x fastest) index of global node `(i, j)` inside the box.
    pub fn local_node(&self, i: usize, j: usize) -> usize {
        debug_assert!(self.contains_node(i, j));
        (i - self.i0) + (j - self.j0) * (self.width() + 1)
    }

    /// Global node coordinates of local node `p`.
    pub fn node_at(&self, p: usize) -> (usize, usize) {
        let w = self.width() + 1;
        (self.i0 + p % w, self.j0 + p / w)
    }

    pub fn nodes(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (self.j0..=self.j1).flat_map(move |j| (self.i0..=self.i1).map(move |i| (i, j)))
    }

    pub fn contains_node(&self, i: usize, j: usize) -> bool {
        (self.i0..=self.i1).contains(&i) && (self.j0..=self.j1).contains(&j)
    }

    pub fn node_on_boundary(&self, i: usize, j: usize) -> bool {
        self.contains_node(i, j) && (i == self.i0 || i == self.i1 || j == self.j0 || j == self.j1)
    }

    pub fn contains_box(&self, other: &ElementBox) -> bool {
        self.i0 <= other.i0 && other.i1 <= self.i1 && self.j0 <= other.j0 && other.j1 <= self.j1
    }

    /// Closed boxes share at least one node.
    pub fn intersects_closed(&self, other: &ElementBox) -> bool {
        self.i0 <= other.i1 && other.i0 <= self.i1 && self.j0 <= other.j1 && other.j0 <= self.j1
    }

    /// Grown by `d` elements on each side, clipped to `bound`.
    pub fn grown_within(&self, d: usize, bound: &ElementBox) -> Self {
        Self::new(
            self.i0.saturating_sub(d).max(bound.i0),
            (self.i1 + d).min(bound.i1),
            self.j0.saturating_sub(d).max(bound.j0),
            (self.j1 + d).min(bound.j1),
        )
    }
}

impl fmt::Display for ElementBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{},{})x[{},{})", self.i0, self.i1, self.j0, self.j1)
    }
}

/// Per-level splits `[mx1×my1, mx2×my2, …]` and the overlap width.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LevelSpec {
    pub splits: Vec<(usize, usize)>,
    pub overlap_elems: usize,
}

impl LevelSpec {
    pub fn new(splits: Vec<(usize, usize)>, overlap_elems: usize) -> Result<Self> {
        if splits.is_empty() {
            return Err(Error::config("decomposition needs at least one level"));
        }
        if let Some((l, _)) = splits
            .iter()
            .enumerate()
            .find(|(_, s)| s.0 == 0 || s.1 == 0)
        {
            return Err(Error::config(format!("level {} has a zero split", l + 1)));
        }
        Ok(Self {
            splits,
            overlap_elems,
        })
    }

    /// `levels` repetitions of `m×m`.
    pub fn uniform(m: usize, levels: usize, overlap_elems: usize) -> Result<Self> {
        Self::new(vec![(m, m); levels], overlap_elems)
    }

    pub fn levels(&self) -> usize {
        self.splits.len()
    }

    /// Subdomain counts per direction at the finest level.
    pub fn leaf_grid(&self) -> (usize, usize) {
        self.splits
            .iter()
            .fold((1, 1), |(x, y), &(mx, my)| (x * mx, y * my))
    }

    /// Parses `"MXxMY,MXxMY,…"` (overlap set separately).
    pub fn parse(s: &str, overlap_elems: usize) -> Result<Self> {
        let mut splits = Vec::new();
        for part in s.split(',') {
            let part = part.trim();
            let (a, b) = part
                .split_once(['x', 'X'])
                .ok_or_else(|| Error::config(format!("bad level '{part}', expected MXxMY")))?;
            let parse = |t: &str| {
                t.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::config(format!("bad level '{part}', expected MXxMY")))
            };
            splits.push((parse(a)?, parse(b)?));
        }
        Self::new(splits, overlap_elems)
    }
}

impl FromStr for LevelSpec {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::parse(s, 2)
    }
}

impl fmt::Display for LevelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .splits
            .iter()
            .map(|(x, y)| format!("{x}x{y}"))
            .collect();
        write!(f, "{}", parts.join(","))
    }
}

#[derive(Clone, Debug)]
pub struct HierarchyNode {
    pub id: usize,
    /// 0 for the root, `ℓ` for leaves.
    pub level: usize,
    pub owned: ElementBox,
    pub extended: ElementBox,
    /// Region of the parent's extended box where this node's prolongation is
    /// nonzero: the owned box, with sides on the parent's owned boundary
    /// pushed out to the parent's extended boundary.
    pub ownership: ElementBox,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    /// Siblings whose closed extended boxes meet this one.
    pub neighbors: Vec<usize>,
    /// Local node → node of the parent's extended box (`R_i`).
    pub restriction: Vec<usize>,
    /// Local nodes owned by this node at the parent's level (boolean `P_i`).
    pub owned_mask: Vec<bool>,
    /// Local indices of artificial-boundary nodes (`B_i`).
    pub artificial: Vec<usize>,
}

impl HierarchyNode {
    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    pub fn local_size(&self) -> usize {
        self.extended.node_count()
    }
}

/// The decomposition tree; node 0 is the root, ids are assigned breadth-first.
#[derive(Clone, Debug)]
pub struct Hierarchy {
    pub mesh: RectMesh,
    pub spec: LevelSpec,
    pub nodes: Vec<HierarchyNode>,
}

impl Hierarchy {
    pub fn build(mesh: &RectMesh, spec: &LevelSpec) -> Result<Self> {
        let mut div = (1usize, 1usize);
        for (l, &(mx, my)) in spec.splits.iter().enumerate() {
            div = (div.0 * mx, div.1 * my);
            if !mesh.nx.is_multiple_of(div.0) || !mesh.ny.is_multiple_of(div.1) {
                return Err(Error::config(format!(
                    "level {}: {}x{} elements cannot be split into {}x{} subdomains",
                    l + 1,
                    mesh.nx,
                    mesh.ny,
                    div.0,
                    div.1
                )));
            }
        }
        let whole = mesh.whole();
        let root = HierarchyNode {
            id: 0,
            level: 0,
            owned: whole,
            extended: whole,
            ownership: whole,
            parent: None,
            children: Vec::new(),
            neighbors: Vec::new(),
            restriction: (0..whole.node_count()).collect(),
            owned_mask: vec![true; whole.node_count()],
            artificial: Vec::new(),
        };
        let mut nodes = vec![root];
        let mut frontier = vec![0usize];
        for (level, &(mx, my)) in spec.splits.iter().enumerate() {
            let mut next = Vec::new();
            for &pid in &frontier {
                let parent = nodes[pid].clone();
                let (w, h) = (parent.owned.width() / mx, parent.owned.height() / my);
                let first = nodes.len();
                for cy in 0..my {
                    for cx in 0..mx {
                        let o = parent.owned;
                        let owned = ElementBox::new(
                            o.i0 + cx * w,
                            o.i0 + (cx + 1) * w,
                            o.j0 + cy * h,
                            o.j0 + (cy + 1) * h,
                        );
                        let extended = owned.grown_within(spec.overlap_elems, &parent.extended);
                        let pe = parent.extended;
                        let ownership = ElementBox::new(
                            if owned.i0 == o.i0 { pe.i0 } else { owned.i0 },
                            if owned.i1 == o.i1 { pe.i1 } else { owned.i1 },
                            if owned.j0 == o.j0 { pe.j0 } else { owned.j0 },
                            if owned.j1 == o.j1 { pe.j1 } else { owned.j1 },
                        );
                        let restriction =
                            extended.nodes().map(|(i, j)| pe.local_node(i, j)).collect();
                        let artificial = extended
                            .nodes()
                            .enumerate()
                            .filter(|&(_, (i, j))| {
                                extended.node_on_boundary(i, j) && !pe.node_on_boundary(i, j)
                            })
                            .map(|(p, _)| p)
                            .collect();
                        nodes.push(HierarchyNode {
                            id: nodes.len(),
                            level: level + 1,
                            owned,
                            extended,
                            ownership,
                            parent: Some(pid),
                            children: Vec::new(),
                            neighbors: Vec::new(),
                            restriction,
                            owned_mask: Vec::new(),
                            artificial,
                        });
                    }
                }
                let ids: Vec<usize> = (first..nodes.len()).collect();
                for &a in &ids {
                    nodes[a].neighbors = ids
                        .iter()
                        .copied()
                        .filter(|&b| {
                            b != a && nodes[a].extended.intersects_closed(&nodes[b].extended)
                        })
                        .collect();
                }
                nodes[pid].children = ids.clone();
                next.extend(ids);
            }
            frontier = next;
        }
        let mut tree = Self {
            mesh: *mesh,
            spec: spec.clone(),
            nodes,
        };
        for pid in 0..tree.nodes.len() {
            if tree.nodes[pid].is_leaf() {
                continue;
            }
            let owner = tree.ownership(pid);
            for (c, &cid) in tree.nodes[pid].children.clone().iter().enumerate() {
                let mask = tree.nodes[cid]
                    .restriction
                    .iter()
                    .map(|&g| owner[g] == c)
                    .collect();
                tree.nodes[cid].owned_mask = mask;
            }
        }
        Ok(tree)
    }

    pub fn root(&self) -> &HierarchyNode {
        &self.nodes[0]
    }

    pub fn node(&self, id: usize) -> &HierarchyNode {
        &self.nodes[id]
    }

    pub fn depth(&self) -> usize {
        self.spec.levels()
    }

    pub fn leaves(&self) -> impl Iterator<Item = &HierarchyNode> {
        self.nodes.iter().filter(|n| n.is_leaf())
    }

    pub fn at_level(&self, level: usize) -> impl Iterator<Item = &HierarchyNode> {
        self.nodes.iter().filter(move |n| n.level == level)
    }

    /// For every node of `parent`'s extended box, the position (in
    /// `children`) of the owning child: the lowest one whose closed ownership
    /// box contains it.
    pub fn ownership(&self, parent: usize) -> Vec<usize> {
        let p = &self.nodes[parent];
        p.extended
            .nodes()
            .map(|(i, j)| {
                p.children
                    .iter()
                    .position(|&c| self.nodes[c].ownership.contains_node(i, j))
                    .expect("ownership boxes tile the parent")
            })
            .collect()
    }

    /// Artificial-boundary nodes of `target` (local indices) whose row of
    /// `Ã_target` couples to a node owned by its sibling `source`: the
    /// nonzero rows of `B_t Ã_t R_t P_s`.
    pub fn kept_rows(&self, source: usize, target: usize) -> Vec<usize> {
        let (s, t) = (&self.nodes[source], &self.nodes[target]);
        let parent = &self.nodes[s.parent.expect("siblings have a parent")];
        let pos = parent
            .children
            .iter()
            .position(|&c| c == source)
            .expect("sibling");
        let owner = self.ownership(parent.id);
        let pe = parent.extended;
        let te = t.extended;
        t.artificial
            .iter()
            .copied()
            .filter(|&p| {
                let (i, j) = te.node_at(p);
                (j.saturating_sub(1).max(te.j0)..=(j + 1).min(te.j1)).any(|jj| {
                    (i.saturating_sub(1).max(te.i0)..=(i + 1).min(te.i1))
                        .any(|ii| owner[pe.local_node(ii, jj)] == pos)
                })
            })
            .collect()
    }

    /// Artificial-boundary nodes of each child of `parent` that no sibling's
    /// kept rows cover, as `(child id, local node)`.
    pub fn uncovered_interface_nodes(&self, parent: usize) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for &j in &self.nodes[parent].children {
            let t = &self.nodes[j];
            let covered: Vec<usize> = t
                .neighbors
                .iter()
                .flat_map(|&i| self.kept_rows(i, j))
                .collect();
            out.extend(
                t.artificial
                    .iter()
                    .filter(|p| !covered.contains(p))
                    .map(|&p| (j, p)),
            );
        }
        out
    }

    /// The impedance matrix `Ã_i` on the node's extended box.
    pub fn assemble_local(&self, id: usize, field: &WavenumberField) -> ComplexSparseMatrix {
        assemble_box(&self.mesh, field, &self.nodes[id].extended)
    }
}

/// `B_ij = B_j Ã_j R_j P_i` restricted to its nonzero rows: maps a local
/// vector on `Ω_i` to the Robin residual it induces on the part of `Ω_j`'s
/// artificial boundary inside `Ω_i`'s ownership region.
#[derive(Clone, Debug)]
pub struct NeighborTraceMap {
    pub source: usize,
    pub target: usize,
    /// Local node indices in `Ω_j`.
    pub kept_rows: Vec<usize>,
    /// `(local in Ω_i, local in Ω_j)` for nodes owned by `Ω_i` inside `Ω_j`.
    transfer: Vec<(usize, usize)>,
    /// Rows `kept_rows` of `Ã_j`.
    rows: ComplexSparseMatrix,
    source_size: usize,
}

impl NeighborTraceMap {
    /// Returns `None` when no kept rows exist.
    pub fn build(
        tree: &Hierarchy,
        source: usize,
        target: usize,
        target_matrix: &ComplexSparseMatrix,
    ) -> Option<Self> {
        let kept_rows = tree.kept_rows(source, target);
        if kept_rows.is_empty() {
            return None;
        }
        let (s, t) = (tree.node(source), tree.node(target));
        let transfer = s
            .extended
            .nodes()
            .enumerate()
            .filter(|&(a, (i, j))| s.owned_mask[a] && t.extended.contains_node(i, j))
            .map(|(a, (i, j))| (a, t.extended.local_node(i, j)))
            .collect();
        Some(Self {
            source,
            target,
            rows: target_matrix.select_rows(&kept_rows),
            kept_rows,
            transfer,
            source_size: s.local_size(),
        })
    }

    pub fn output_dim(&self) -> usize {
        self.kept_rows.len()
    }

    pub fn apply(&self, u: &[C64]) -> Vec<C64> {
        assert_eq!(u.len(), self.source_size, "trace map input size");
        let mut v = vec![ZERO; self.rows.ncols()];
        for &(a, b) in &self.transfer {
            v[b] = u[a];
        }
        self.rows.mul_vec(&v)
    }

    /// Hermitian transpose, accumulated into `out` (a local vector on `Ω_i`).
    pub fn apply_adjoint_into(&self, y: &[C64], out: &mut [C64]) {
        let z = self.rows.adjoint_mul_vec(y);
        for &(a, b) in &self.transfer {
            out[a] += z[b];
        }
    }
}
