//! Experiment driver: configuration, single runs, spectra, and the preset
//! grids used by sweeps.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decomposition::{Hierarchy, LevelSpec};
use crate::error::{Error, Result};
use crate::fem::{AssembledProblem, RectMesh, WavenumberField};
use crate::interface::{materialize, rsvd, Level, LinearMap};
use crate::linalg::small_svd;
use crate::rng::{keyed_rng, subdomain_stream};
use crate::schwarz::{doubled_counts, solve, MethodParams, SolveReport};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Problem {
    Free,
    Layered,
}

impl FromStr for Problem {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "free" => Ok(Self::Free),
            "layered" => Ok(Self::Layered),
            other => Err(Error::config(format!(
                "unknown problem '{other}' (free|layered)"
            ))),
        }
    }
}

impl fmt::Display for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Free => "free",
            Self::Layered => "layered",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub problem: Problem,
    /// `k` (free) or `ω` (layered); `None` keeps `k_max h = 1`.
    pub wavenumber: Option<f64>,
    pub c0: f64,
    pub nlayers: usize,
    /// The bottom layer has speed 1 (otherwise `c0`).
    pub bottom_slow: bool,
    pub levels: LevelSpec,
    /// Elements per leaf subdomain in each direction.
    pub n: usize,
    /// Coarse counts for the finest levels; coarser ones are doubled.
    pub n_c: Vec<usize>,
    /// Inner steps per level; a single entry applies to all levels.
    pub n_i: Vec<usize>,
    pub oversampling: usize,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            problem: Problem::Free,
            wavenumber: None,
            c0: 5.0,
            nlayers: 8,
            bottom_slow: true,
            levels: LevelSpec::uniform(2, 1, 2).expect("valid"),
            n: 4,
            n_c: vec![0],
            n_i: vec![1],
            oversampling: 5,
            tolerance: 1e-5,
            max_iterations: 500,
            seed: 1,
        }
    }
}

impl ExperimentConfig {
    pub fn mesh(&self) -> Result<RectMesh> {
        if self.n == 0 {
            return Err(Error::config("n must be positive"));
        }
        let (mx, my) = self.levels.leaf_grid();
        RectMesh::new(mx * self.n, my * self.n)
    }

    pub fn field(&self) -> Result<WavenumberField> {
        let mesh = self.mesh()?;
        let kh_one = mesh.nx as f64;
        let field = match self.problem {
            Problem::Free => WavenumberField::Constant {
                k: self.wavenumber.unwrap_or(kh_one),
            },
            Problem::Layered => {
                // k_max = ω / min(1, c0)
                let omega = self.wavenumber.unwrap_or(kh_one * self.c0.min(1.0));
                WavenumberField::LayeredY {
                    omega,
                    c0: self.c0,
                    nlayers: self.nlayers,
                    bottom_slow: self.bottom_slow,
                }
            }
        };
        field.validate()?;
        if self.problem == Problem::Layered && mesh.ny % self.nlayers != 0 {
            return Err(Error::config(format!(
                "{} layers do not align with {} element rows",
                self.nlayers, mesh.ny
            )));
        }
        Ok(field)
    }

    pub fn params(&self) -> Result<MethodParams> {
        let levels = self.levels.levels();
        if self.n_c.is_empty() || self.n_c.len() > levels {
            return Err(Error::config(format!(
                "n_c needs between 1 and {levels} entries, got {}",
                self.n_c.len()
            )));
        }
        let n_i = match self.n_i.len() {
            1 => vec![self.n_i[0]; levels],
            l if l == levels => self.n_i.clone(),
            l => {
                return Err(Error::config(format!(
                    "n_i has {l} entries for {levels} levels"
                )))
            }
        };
        let params = MethodParams {
            n_c: doubled_counts(levels, &self.n_c),
            n_i,
            overlap_elems: self.levels.overlap_elems,
            oversampling: self.oversampling,
            tolerance: self.tolerance,
            max_iterations: self.max_iterations,
            seed: self.seed,
        };
        params.validate(levels)?;
        Ok(params)
    }

    pub fn problem_instance(&self) -> Result<AssembledProblem> {
        AssembledProblem::random_solution(self.mesh()?, self.field()?, self.seed)
    }

    pub fn hierarchy(&self) -> Result<Hierarchy> {
        Hierarchy::build(&self.mesh()?, &self.levels)
    }
}

/// One CSV row per run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub problem: Problem,
    pub k: f64,
    pub c0: Option<f64>,
    pub nlayers: Option<usize>,
    pub levels: String,
    pub n: usize,
    pub n_c: String,
    pub n_i: String,
    pub coarse_dim_total: usize,
    pub iterations: usize,
    pub final_relres: f64,
    pub setup_seconds: f64,
    pub solve_seconds: f64,
    pub seed: u64,
    pub converged: bool,
}

fn join(v: &[usize]) -> String {
    v.iter().map(usize::to_string).collect::<Vec<_>>().join("/")
}

impl ResultRow {
    fn new(
        cfg: &ExperimentConfig,
        params: &MethodParams,
        field: &WavenumberField,
        report: &SolveReport,
    ) -> Self {
        let (k, c0, nlayers) = match *field {
            WavenumberField::Constant { k } => (k, None, None),
            WavenumberField::LayeredY {
                omega, c0, nlayers, ..
            } => (omega, Some(c0), Some(nlayers)),
        };
        Self {
            problem: cfg.problem,
            k,
            c0,
            nlayers,
            levels: cfg.levels.to_string(),
            n: cfg.n,
            n_c: join(&params.n_c),
            n_i: join(&params.n_i),
            coarse_dim_total: report.setup.coarse_dims.iter().map(|&(_, d)| d).sum(),
            iterations: report.iterations,
            final_relres: report.final_relres,
            setup_seconds: report.setup_seconds,
            solve_seconds: report.solve_seconds,
            seed: cfg.seed,
            converged: report.converged,
        }
    }
}

/// Assembles, builds the preconditioner, and solves one configuration.
pub fn run_solve(cfg: &ExperimentConfig) -> Result<(ResultRow, SolveReport)> {
    let params = cfg.params()?;
    let problem = cfg.problem_instance()?;
    let tree = cfg.hierarchy()?;
    let report = solve(&problem, &tree, &params)?;
    Ok((
        ResultRow::new(cfg, &params, &problem.field, &report),
        report,
    ))
}

/// Runs `cfg` once per seed and returns all rows, in seed order.
pub fn run_seeds(cfg: &ExperimentConfig, seeds: &[u64]) -> Result<Vec<ResultRow>> {
    seeds
        .iter()
        .map(|&seed| {
            let c = ExperimentConfig {
                seed,
                ..cfg.clone()
            };
            run_solve(&c).map(|(row, _)| row)
        })
        .collect()
}

/// The row whose iteration count is the (lower) median.
pub fn median_row(rows: &[ResultRow]) -> Option<ResultRow> {
    let mut sorted: Vec<&ResultRow> = rows.iter().collect();
    sorted.sort_by_key(|r| (r.iterations, r.seed));
    sorted
        .get((sorted.len().max(1) - 1) / 2)
        .map(|r| (*r).clone())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumRow {
    pub subdomain_id: usize,
    pub index: usize,
    pub sigma: f64,
}

/// Singular values of `T_i` for the children of the root, with exact local
/// solves. `rank = None` takes a full SVD of the materialized operator;
/// `Some(r)` uses rsvd for the leading `r` values.
pub fn run_spectrum(cfg: &ExperimentConfig, rank: Option<usize>) -> Result<Vec<SpectrumRow>> {
    let field = cfg.field()?;
    let tree = cfg.hierarchy()?;
    let level = Level::build_exact(&tree, &field, 0)?;
    let per_child: Vec<Vec<SpectrumRow>> = (0..level.len())
        .into_par_iter()
        .map(|i| {
            let op = level.interface_operator(i);
            let id = op.subdomain.id;
            let sigma = if op.in_dim() == 0 || op.out_dim() == 0 {
                Vec::new()
            } else {
                match rank {
                    None => small_svd(&materialize(&op)).sigma,
                    Some(r) => {
                        let mut rng = keyed_rng(cfg.seed, subdomain_stream(id));
                        rsvd(&op, r, cfg.oversampling, &mut rng).sigma
                    }
                }
            };
            sigma
                .into_iter()
                .enumerate()
                .map(|(index, sigma)| SpectrumRow {
                    subdomain_id: id,
                    index,
                    sigma,
                })
                .collect()
        })
        .collect();
    Ok(per_child.into_iter().flatten().collect())
}

/// Named grids of `(n, column, n_c values)`; the column is `m` for flat
/// grids and `ℓ` for hierarchical ones.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    Table1,
    Table2,
    Table3,
    Table3C10,
    Table3C10L64,
    Table4,
}

const NS: [usize; 4] = [4, 8, 16, 32];
const COLS: [usize; 4] = [1, 2, 3, 4];

type Grid = [[[usize; 4]; 4]; 4];

const FREE_FLAT: Grid = [
    [[0, 2, 3, 4], [0, 4, 5, 6], [0, 6, 7, 8], [0, 6, 7, 8]],
    [
        [0, 1, 5, 7],
        [0, 10, 11, 13],
        [0, 11, 13, 14],
        [0, 11, 13, 14],
    ],
    [
        [0, 11, 12, 13],
        [0, 19, 23, 25],
        [0, 21, 23, 25],
        [0, 22, 24, 25],
    ],
    [
        [0, 27, 28, 29],
        [0, 39, 43, 47],
        [0, 42, 45, 48],
        [0, 43, 45, 49],
    ],
];
const FREE_HIER: Grid = [
    [[0, 2, 3, 4], [0, 3, 4, 5], [0, 4, 5, 6], [0, 4, 5, 6]],
    [[0, 1, 5, 7], [0, 6, 7, 8], [0, 7, 8, 9], [0, 7, 8, 9]],
    [
        [0, 11, 12, 13],
        [0, 13, 14, 15],
        [0, 15, 16, 17],
        [0, 15, 16, 17],
    ],
    [
        [0, 27, 28, 29],
        [0, 29, 30, 31],
        [0, 31, 32, 33],
        [0, 32, 33, 34],
    ],
];
const LAYERED_FLAT: Grid = [
    [[0, 2, 3, 4], [0, 4, 5, 6], [0, 4, 5, 7], [0, 6, 7, 8]],
    [
        [0, 4, 5, 6],
        [0, 9, 10, 11],
        [0, 10, 11, 13],
        [0, 11, 12, 13],
    ],
    [
        [0, 9, 10, 11],
        [0, 17, 19, 20],
        [0, 19, 21, 22],
        [0, 22, 23, 25],
    ],
    [
        [0, 17, 20, 21],
        [0, 35, 37, 40],
        [0, 39, 40, 44],
        [0, 43, 44, 47],
    ],
];
const LAYERED_C10_FLAT: [[[usize; 4]; 4]; 2] = [
    [
        [0, 9, 10, 11],
        [0, 17, 19, 20],
        [0, 19, 21, 22],
        [0, 22, 23, 25],
    ],
    [
        [0, 17, 20, 21],
        [0, 36, 37, 40],
        [0, 39, 40, 44],
        [0, 43, 44, 48],
    ],
];
const LAYERED_C10_L64_FLAT: [[usize; 4]; 4] = [
    [0, 21, 22, 23],
    [0, 33, 35, 38],
    [0, 39, 41, 43],
    [0, 40, 42, 44],
];
const LAYERED_HIER: Grid = [
    [[0, 2, 3, 4], [0, 3, 4, 5], [0, 3, 4, 5], [0, 4, 5, 6]],
    [[0, 4, 5, 6], [0, 5, 6, 7], [0, 6, 7, 8], [0, 7, 8, 9]],
    [
        [0, 9, 10, 11],
        [0, 10, 11, 12],
        [0, 12, 13, 14],
        [0, 14, 15, 16],
    ],
    [
        [0, 17, 20, 21],
        [0, 23, 24, 25],
        [0, 26, 27, 28],
        [0, 28, 29, 30],
    ],
];

impl FromStr for Preset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "table1" => Self::Table1,
            "table2" => Self::Table2,
            "table3" => Self::Table3,
            "table3-c10" => Self::Table3C10,
            "table3-c10-l64" => Self::Table3C10L64,
            "table4" => Self::Table4,
            other => {
                return Err(Error::config(format!(
                "unknown preset '{other}' (table1|table2|table3|table3-c10|table3-c10-l64|table4)"
            )))
            }
        })
    }
}

impl Preset {
    pub fn hierarchical(self) -> bool {
        matches!(self, Self::Table2 | Self::Table4)
    }

    /// Column labels: `m` for flat presets, `ℓ` for hierarchical ones.
    pub fn columns(self) -> Vec<usize> {
        if self.hierarchical() {
            COLS.to_vec()
        } else {
            COLS.iter().map(|&c| 1 << c).collect()
        }
    }

    /// Coarse counts for `(n, column)`, if the grid has that cell.
    pub fn counts(self, n: usize, column: usize) -> Option<[usize; 4]> {
        let row = NS.iter().position(|&x| x == n)?;
        let col = self.columns().iter().position(|&x| x == column)?;
        match self {
            Self::Table1 => Some(FREE_FLAT[row][col]),
            Self::Table2 => Some(FREE_HIER[row][col]),
            Self::Table3 => Some(LAYERED_FLAT[row][col]),
            Self::Table3C10 => row.checked_sub(2).map(|r| LAYERED_C10_FLAT[r][col]),
            Self::Table3C10L64 => (row == 3).then(|| LAYERED_C10_L64_FLAT[col]),
            Self::Table4 => Some(LAYERED_HIER[row][col]),
        }
    }

    /// Base configuration of the preset's problem.
    pub fn base(self) -> ExperimentConfig {
        let (problem, c0, nlayers) = match self {
            Self::Table1 | Self::Table2 => (Problem::Free, 5.0, 8),
            Self::Table3 | Self::Table4 => (Problem::Layered, 5.0, 8),
            Self::Table3C10 => (Problem::Layered, 10.0, 8),
            Self::Table3C10L64 => (Problem::Layered, 10.0, 64),
        };
        ExperimentConfig {
            problem,
            c0,
            nlayers,
            ..ExperimentConfig::default()
        }
    }

    /// Cell configurations in `(n, column, n_c)` order for the requested
    /// rows and columns; cells absent from the grid are skipped.
    pub fn cells(
        self,
        ns: &[usize],
        columns: &[usize],
        overlap_elems: usize,
    ) -> Result<Vec<ExperimentConfig>> {
        let mut out = Vec::new();
        for &n in ns {
            for &col in columns {
                let Some(counts) = self.counts(n, col) else {
                    continue;
                };
                let levels = if self.hierarchical() {
                    LevelSpec::uniform(2, col, overlap_elems)?
                } else {
                    LevelSpec::uniform(col, 1, overlap_elems)?
                };
                for nc in counts {
                    out.push(ExperimentConfig {
                        levels: levels.clone(),
                        n,
                        n_c: vec![nc],
                        ..self.base()
                    });
                }
            }
        }
        Ok(out)
    }
}
