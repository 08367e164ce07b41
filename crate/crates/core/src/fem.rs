//! Q1 finite elements for `-Δu - k²u = f` on a rectangle with the impedance
//! condition `∂ₙu - iku = g` on its boundary.
//!
//! Nodes are numbered lexicographically with x fastest.

use crate::decomposition::ElementBox;
use crate::error::{Error, Result};
use crate::linalg::{ComplexSparseMatrix, C64, ZERO};
use crate::rng::{gaussian_vector, keyed_rng, SOLUTION_STREAM};

/// Structured mesh of square elements of size `h = 1/nx`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RectMesh {
    pub nx: usize,
    pub ny: usize,
    pub h: f64,
}

impl RectMesh {
    pub fn new(nx: usize, ny: usize) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::config(
                "mesh needs at least one element per direction",
            ));
        }
        Ok(Self {
            nx,
            ny,
            h: 1.0 / nx as f64,
        })
    }

    pub fn unit_square(n: usize) -> Result<Self> {
        Self::new(n, n)
    }

    pub fn node_count(&self) -> usize {
        (self.nx + 1) * (self.ny + 1)
    }

    pub fn node(&self, i: usize, j: usize) -> usize {
        i + j * (self.nx + 1)
    }

    pub fn coords(&self, p: usize) -> (f64, f64) {
        let i = p % (self.nx + 1);
        let j = p / (self.nx + 1);
        (i as f64 * self.h, j as f64 * self.h)
    }

    pub fn height(&self) -> f64 {
        self.ny as f64 * self.h
    }

    pub fn whole(&self) -> ElementBox {
        ElementBox::new(0, self.nx, 0, self.ny)
    }
}

/// Wavenumber `k(x, y)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum WavenumberField {
    Constant {
        k: f64,
    },
    /// `k = ω / c(y)` with `c` alternating between 1 and `c0` on `nlayers`
    /// equal horizontal layers. The bottom layer has speed 1 when
    /// `bottom_slow` is set, `c0` otherwise.
    LayeredY {
        omega: f64,
        c0: f64,
        nlayers: usize,
        bottom_slow: bool,
    },
}

impl WavenumberField {
    pub fn layered(omega: f64, c0: f64, nlayers: usize) -> Self {
        WavenumberField::LayeredY {
            omega,
            c0,
            nlayers,
            bottom_slow: true,
        }
    }

    /// Value at `(x, y)`; `height` is the domain height. Points on a layer
    /// interface belong to the upper layer, except at the top of the domain.
    pub fn at(&self, _x: f64, y: f64, height: f64) -> f64 {
        match *self {
            WavenumberField::Constant { k } => k,
            WavenumberField::LayeredY {
                omega,
                c0,
                nlayers,
                bottom_slow,
            } => {
                let layer =
                    ((y / height * nlayers as f64).floor().max(0.0) as usize).min(nlayers - 1);
                let slow = layer.is_multiple_of(2) == bottom_slow;
                omega / if slow { 1.0 } else { c0 }
            }
        }
    }

    pub fn k_max(&self) -> f64 {
        match *self {
            WavenumberField::Constant { k } => k,
            WavenumberField::LayeredY { omega, c0, .. } => omega / c0.min(1.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            WavenumberField::Constant { k } if k.is_finite() && k >= 0.0 => Ok(()),
            WavenumberField::LayeredY {
                omega, c0, nlayers, ..
            } if omega.is_finite() && omega >= 0.0 && c0 > 0.0 && nlayers >= 1 => Ok(()),
            _ => Err(Error::config(format!("invalid wavenumber field {self:?}"))),
        }
    }
}

fn stiffness_1d(h: f64) -> [[f64; 2]; 2] {
    [[1.0 / h, -1.0 / h], [-1.0 / h, 1.0 / h]]
}

fn mass_1d(h: f64) -> [[f64; 2]; 2] {
    [[h / 3.0, h / 6.0], [h / 6.0, h / 3.0]]
}

/// Element stiffness and mass for a `hx × hy` rectangle, local node order
/// SW, SE, NW, NE.
pub fn q1_element_matrices(hx: f64, hy: f64) -> ([[f64; 4]; 4], [[f64; 4]; 4]) {
    let (kx, ky, mx, my) = (stiffness_1d(hx), stiffness_1d(hy), mass_1d(hx), mass_1d(hy));
    let mut k = [[0.0; 4]; 4];
    let mut m = [[0.0; 4]; 4];
    for a in 0..4 {
        let (ax, ay) = (a % 2, a / 2);
        for b in 0..4 {
            let (bx, by) = (b % 2, b / 2);
            k[a][b] = kx[ax][bx] * my[ay][by] + mx[ax][bx] * ky[ay][by];
            m[a][b] = mx[ax][bx] * my[ay][by];
        }
    }
    (k, m)
}

/// Trace mass matrix of a boundary edge of length `h`.
pub fn edge_mass(h: f64) -> [[f64; 2]; 2] {
    mass_1d(h)
}

/// Assembles the Helmholtz matrix on the whole mesh.
pub fn assemble_global(mesh: &RectMesh, field: &WavenumberField) -> ComplexSparseMatrix {
    assemble_box(mesh, field, &mesh.whole())
}

/// Assembles `K - k²M - ik·M_∂` over the elements of `bx`, with the impedance
/// term on every edge of the box boundary. Local nodes are numbered
/// lexicographically inside the box.
///
/// `k` is sampled at element centres for the volume term. For the boundary
/// term it is sampled a quarter element inside the edge midpoint, which is the
/// midpoint value unless the edge lies on a layer interface.
pub fn assemble_box(
    mesh: &RectMesh,
    field: &WavenumberField,
    bx: &ElementBox,
) -> ComplexSparseMatrix {
    let h = mesh.h;
    let height = mesh.height();
    let (ke, me) = q1_element_matrices(h, h);
    let em = edge_mass(h);
    let local = |i: usize, j: usize| bx.local_node(i, j);
    let mut trip = Vec::with_capacity(16 * bx.element_count() + 16 * (bx.width() + bx.height()));
    for ej in bx.j0..bx.j1 {
        for ei in bx.i0..bx.i1 {
            let k = field.at((ei as f64 + 0.5) * h, (ej as f64 + 0.5) * h, height);
            let nodes = [
                local(ei, ej),
                local(ei + 1, ej),
                local(ei, ej + 1),
                local(ei + 1, ej + 1),
            ];
            for a in 0..4 {
                for b in 0..4 {
                    trip.push((
                        nodes[a],
                        nodes[b],
                        C64::new(ke[a][b] - k * k * me[a][b], 0.0),
                    ));
                }
            }
        }
    }
    let mut edge = |p: usize, q: usize, k: f64| {
        let nodes = [p, q];
        for a in 0..2 {
            for b in 0..2 {
                trip.push((nodes[a], nodes[b], C64::new(0.0, -k * em[a][b])));
            }
        }
    };
    for ei in bx.i0..bx.i1 {
        let xm = (ei as f64 + 0.5) * h;
        let kb = field.at(xm, bx.j0 as f64 * h + 0.25 * h, height);
        edge(local(ei, bx.j0), local(ei + 1, bx.j0), kb);
        let kt = field.at(xm, bx.j1 as f64 * h - 0.25 * h, height);
        edge(local(ei, bx.j1), local(ei + 1, bx.j1), kt);
    }
    for ej in bx.j0..bx.j1 {
        let ym = (ej as f64 + 0.5) * h;
        let kl = field.at(bx.i0 as f64 * h + 0.25 * h, ym, height);
        edge(local(bx.i0, ej), local(bx.i0, ej + 1), kl);
        let kr = field.at(bx.i1 as f64 * h - 0.25 * h, ym, height);
        edge(local(bx.i1, ej), local(bx.i1, ej + 1), kr);
    }
    let n = bx.node_count();
    ComplexSparseMatrix::from_triplets(n, n, trip).expect("assembly indices are in range")
}

/// Draws `u_true` with standard-normal real and imaginary parts from the
/// stream keyed by `seed` and returns `(A u_true, u_true)`.
pub fn rhs_from_random_solution(a: &ComplexSparseMatrix, seed: u64) -> (Vec<C64>, Vec<C64>) {
    let mut rng = keyed_rng(seed, SOLUTION_STREAM);
    let u = gaussian_vector(&mut rng, a.ncols());
    (a.mul_vec(&u), u)
}

/// A discretised problem `A u = f`.
#[derive(Clone, Debug)]
pub struct AssembledProblem {
    pub matrix: ComplexSparseMatrix,
    pub rhs: Vec<C64>,
    pub exact: Option<Vec<C64>>,
    pub mesh: RectMesh,
    pub field: WavenumberField,
}

impl AssembledProblem {
    /// Problem with a random exact discrete solution.
    pub fn random_solution(mesh: RectMesh, field: WavenumberField, seed: u64) -> Result<Self> {
        field.validate()?;
        let matrix = assemble_global(&mesh, &field);
        let (rhs, u) = rhs_from_random_solution(&matrix, seed);
        Ok(Self {
            matrix,
            rhs,
            exact: Some(u),
            mesh,
            field,
        })
    }
}

/// Plane wave `exp(ik d·x)` with `f = 0` and impedance data
/// `g = (∂ₙ - ik) u = ik(d·n - 1) u`. `exact` holds the nodal interpolant.
pub fn planewave_problem(
    mesh: &RectMesh,
    k: f64,
    direction: (f64, f64),
) -> Result<AssembledProblem> {
    let (dx, dy) = direction;
    if ((dx * dx + dy * dy).sqrt() - 1.0).abs() > 1e-12 {
        return Err(Error::config("plane wave direction must be a unit vector"));
    }
    let field = WavenumberField::Constant { k };
    let matrix = assemble_global(mesh, &field);
    let h = mesh.h;
    let wave = |x: f64, y: f64| C64::new(0.0, k * (dx * x + dy * y)).exp();
    // 3-point Gauss-Legendre on [0, 1]
    let s15 = (0.6f64).sqrt();
    let gauss = [
        (0.5 * (1.0 - s15), 5.0 / 18.0),
        (0.5, 8.0 / 18.0),
        (0.5 * (1.0 + s15), 5.0 / 18.0),
    ];
    let mut rhs = vec![ZERO; mesh.node_count()];
    let mut edge_load = |p: usize, q: usize, normal: (f64, f64)| {
        let (xp, yp) = mesh.coords(p);
        let (xq, yq) = mesh.coords(q);
        let dn = dx * normal.0 + dy * normal.1;
        for &(t, w) in &gauss {
            let (x, y) = (xp + t * (xq - xp), yp + t * (yq - yp));
            let g = C64::new(0.0, k * (dn - 1.0)) * wave(x, y);
            rhs[p] += g * (1.0 - t) * w * h;
            rhs[q] += g * t * w * h;
        }
    };
    for i in 0..mesh.nx {
        edge_load(mesh.node(i, 0), mesh.node(i + 1, 0), (0.0, -1.0));
        edge_load(mesh.node(i, mesh.ny), mesh.node(i + 1, mesh.ny), (0.0, 1.0));
    }
    for j in 0..mesh.ny {
        edge_load(mesh.node(0, j), mesh.node(0, j + 1), (-1.0, 0.0));
        edge_load(mesh.node(mesh.nx, j), mesh.node(mesh.nx, j + 1), (1.0, 0.0));
    }
    let exact = (0..mesh.node_count())
        .map(|p| {
            let (x, y) = mesh.coords(p);
            wave(x, y)
        })
        .collect();
    Ok(AssembledProblem {
        matrix,
        rhs,
        exact: Some(exact),
        mesh: *mesh,
        field,
    })
}
