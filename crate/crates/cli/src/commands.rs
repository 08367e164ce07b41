use std::fs::OpenOptions;
use std::io::{self, Write};
use std::path::Path;

use rayon::prelude::*;

use helmwave_core::decomposition::LevelSpec;
use helmwave_core::experiment::{
    median_row, run_seeds, run_solve, run_spectrum, ExperimentConfig, Preset, Problem, ResultRow,
};
use helmwave_core::oned::{basis_rows, one_step_solve, Bisection1D, Mesh1D};
use helmwave_core::rng::{gaussian_vector, keyed_rng, SOLUTION_STREAM};

use crate::config::{FileConfig, List, SpecList};
use crate::{OnedArgs, ProblemArgs, SweepArgs};

pub enum Outcome {
    Done,
    NotConverged,
}

pub const RESULT_HEADER: [&str; 15] = [
    "problem",
    "k",
    "c0",
    "nlayers",
    "levels",
    "n",
    "n_c",
    "n_i",
    "coarse_dim_total",
    "iterations",
    "final_relres",
    "setup_seconds",
    "solve_seconds",
    "seed",
    "converged",
];

type CmdResult = Result<Outcome, String>;

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn load(path: Option<&Path>) -> Result<FileConfig, String> {
    path.map(FileConfig::load)
        .transpose()
        .map(Option::unwrap_or_default)
}

/// CSV writer on `path` (stdout when `None`). With `append`, an existing
/// non-empty file keeps its header. Returns whether a header is needed.
fn open_csv(
    path: Option<&Path>,
    append: bool,
) -> Result<(csv::Writer<Box<dyn Write>>, bool), String> {
    let (sink, header): (Box<dyn Write>, bool) = match path {
        None => (Box::new(io::stdout()), true),
        Some(p) => {
            let existing = append && p.metadata().map(|m| m.len() > 0).unwrap_or(false);
            let file = OpenOptions::new()
                .create(true)
                .write(true)
                .append(append)
                .truncate(!append)
                .open(p)
                .map_err(|e| format!("cannot open {}: {e}", p.display()))?;
            (Box::new(file), !existing)
        }
    };
    Ok((
        csv::WriterBuilder::new()
            .has_headers(false)
            .from_writer(sink),
        header,
    ))
}

fn write_rows(path: Option<&Path>, append: bool, rows: &[ResultRow]) -> Result<(), String> {
    let (mut w, header) = open_csv(path, append)?;
    if header {
        w.write_record(RESULT_HEADER).map_err(err)?;
    }
    for row in rows {
        w.serialize(row).map_err(err)?;
    }
    w.flush().map_err(err)
}

/// Applies flags and file values to `cfg`. `shape` also takes the
/// decomposition, `n` and `n_c`; presets supply those themselves.
fn configure(
    mut cfg: ExperimentConfig,
    args: &ProblemArgs,
    file: &FileConfig,
    shape: bool,
) -> Result<ExperimentConfig, String> {
    if let Some(p) = file.pick(args.problem.clone(), "problem")? {
        cfg.problem = p.parse::<Problem>().map_err(err)?;
    }
    let k = file.pick(args.k, "k")?;
    cfg.wavenumber = match k {
        Some(k) => Some(k),
        None => file.pick(None, "omega")?.or(cfg.wavenumber),
    };
    if let Some(c0) = file.pick(args.c0, "c0")? {
        cfg.c0 = c0;
    }
    if let Some(nl) = file.pick(args.nlayers, "nlayers")? {
        cfg.nlayers = nl;
    }
    if let Some(first) = file.pick(args.first_layer.clone(), "first-layer")? {
        cfg.bottom_slow = match first.as_str() {
            "c1" => true,
            "c0" => false,
            other => return Err(format!("first-layer must be c1 or c0, got '{other}'")),
        };
    }
    let overlap = file
        .pick(args.overlap, "overlap")?
        .unwrap_or(cfg.levels.overlap_elems);
    if shape {
        let levels = file
            .pick(args.levels.clone(), "levels")?
            .unwrap_or_else(|| cfg.levels.to_string());
        cfg.levels = LevelSpec::parse(&levels, overlap).map_err(err)?;
        if let Some(n) = file.pick(args.n, "n")? {
            cfg.n = n;
        }
        if let Some(List(nc)) = file.pick(args.nc.clone(), "nc")? {
            cfg.n_c = nc;
        }
    } else {
        cfg.levels.overlap_elems = overlap;
    }
    if let Some(List(ni)) = file.pick(args.ni.clone(), "ni")? {
        cfg.n_i = ni;
    }
    if let Some(os) = file.pick(args.oversampling, "oversampling")? {
        cfg.oversampling = os;
    }
    if let Some(t) = file.pick(args.tol, "tol")? {
        cfg.tolerance = t;
    }
    if let Some(m) = file.pick(args.max_iter, "max-iter")? {
        cfg.max_iterations = m;
    }
    if let Some(s) = file.pick(args.seed, "seed")? {
        cfg.seed = s;
    }
    // surface configuration errors before any work
    cfg.params().map_err(err)?;
    cfg.field().map_err(err)?;
    Ok(cfg)
}

fn output_path(
    args: &ProblemArgs,
    file: &FileConfig,
) -> Result<Option<std::path::PathBuf>, String> {
    file.pick(args.output.clone(), "output")
}

pub fn solve(args: &ProblemArgs) -> CmdResult {
    let file = load(args.config.as_deref())?;
    let cfg = configure(ExperimentConfig::default(), args, &file, true)?;
    let (row, _) = run_solve(&cfg).map_err(err)?;
    write_rows(
        output_path(args, &file)?.as_deref(),
        true,
        std::slice::from_ref(&row),
    )?;
    Ok(if row.converged {
        Outcome::Done
    } else {
        Outcome::NotConverged
    })
}

pub fn spectrum(args: &ProblemArgs, rank: Option<usize>) -> CmdResult {
    let file = load(args.config.as_deref())?;
    let cfg = configure(ExperimentConfig::default(), args, &file, true)?;
    let rank = file.pick(rank, "rank")?;
    let rows = run_spectrum(&cfg, rank).map_err(err)?;
    let (mut w, _) = open_csv(output_path(args, &file)?.as_deref(), false)?;
    w.write_record(["subdomain_id", "index", "sigma"])
        .map_err(err)?;
    for r in &rows {
        w.serialize(r).map_err(err)?;
    }
    w.flush().map_err(err)?;
    Ok(Outcome::Done)
}

pub fn oned(args: &OnedArgs) -> CmdResult {
    let file = load(args.config.as_deref())?;
    let n = file.pick(args.n, "n")?.unwrap_or(64);
    let k = file.pick(args.k, "k")?.unwrap_or(n as f64 / 4.0);
    let depth = file.pick(args.bisections, "bisections")?.unwrap_or(2);
    let overlap = file.pick(args.overlap, "overlap")?.unwrap_or(2);
    let seed = file.pick(args.seed, "seed")?.unwrap_or(1);
    let output = file.pick(args.output.clone(), "output")?;

    let mesh = Mesh1D::new(n).map_err(err)?;
    if !(k.is_finite() && k > 0.0) {
        return Err("k must be positive".into());
    }
    let tree = Bisection1D::build(&mesh, depth, overlap).map_err(err)?;
    let f = gaussian_vector(&mut keyed_rng(seed, SOLUTION_STREAM), mesh.node_count());
    let step = one_step_solve(&mesh, k, &tree, &f).map_err(err)?;
    let rows = basis_rows(&mesh, k, &tree).map_err(err)?;

    let (mut w, _) = open_csv(output.as_deref(), false)?;
    w.write_record(["node_x", "re", "im", "basis_id", "level"])
        .map_err(err)?;
    for r in &rows {
        w.serialize(r).map_err(err)?;
    }
    w.flush().map_err(err)?;
    let columns = rows.last().map_or(0, |r| r.basis_id + 1);
    let report = format!(
        "one-step relative error: {:.3e} (n={n}, k={k}, basis columns={columns})",
        step.rel_error
    );
    if output.is_some() {
        println!("{report}");
    } else {
        eprintln!("{report}");
    }
    Ok(Outcome::Done)
}

fn sweep_cells(args: &SweepArgs, file: &FileConfig) -> Result<Vec<ExperimentConfig>, String> {
    let ns = file.pick(args.ns.clone(), "ns")?;
    if let Some(name) = file.pick(args.preset.clone(), "preset")? {
        let preset: Preset = name.parse().map_err(err)?;
        let ns = ns.map_or_else(|| vec![4, 8, 16, 32], |l| l.0);
        let cols = file
            .pick(args.cols.clone(), "cols")?
            .map_or_else(|| preset.columns(), |l| l.0);
        let base = configure(preset.base(), &args.problem, file, false)?;
        let cells = preset
            .cells(&ns, &cols, base.levels.overlap_elems)
            .map_err(err)?
            .into_iter()
            .map(|c| ExperimentConfig {
                levels: c.levels,
                n: c.n,
                n_c: c.n_c,
                ..base.clone()
            })
            .collect();
        return Ok(cells);
    }
    let base = configure(ExperimentConfig::default(), &args.problem, file, true)?;
    let specs = file
        .pick(args.grid_levels.clone(), "grid-levels")?
        .map_or_else(|| vec![base.levels.to_string()], |SpecList(v)| v);
    let ns = ns.map_or_else(|| vec![base.n], |l| l.0);
    let ncs = file.pick(args.ncs.clone(), "ncs")?.map_or_else(
        || vec![base.n_c.clone()],
        |l| l.0.into_iter().map(|c| vec![c]).collect(),
    );
    let mut cells = Vec::new();
    for spec in &specs {
        let levels = LevelSpec::parse(spec, base.levels.overlap_elems).map_err(err)?;
        for &n in &ns {
            for nc in &ncs {
                cells.push(ExperimentConfig {
                    levels: levels.clone(),
                    n,
                    n_c: nc.clone(),
                    ..base.clone()
                });
            }
        }
    }
    Ok(cells)
}

pub fn sweep(args: &SweepArgs) -> CmdResult {
    let file = load(args.problem.config.as_deref())?;
    let cells = sweep_cells(args, &file)?;
    let seeds = file
        .pick(args.seeds.clone(), "seeds")?
        .map_or_else(|| vec![1, 2, 3], |l| l.0);
    if seeds.is_empty() {
        return Err("at least one seed is required".into());
    }
    let all_seeds = args.all_seeds || file.pick(None::<bool>, "all-seeds")?.unwrap_or(false);
    let jobs = file.pick(args.jobs, "jobs")?.unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(err)?;
    let results: Vec<Result<Vec<ResultRow>, String>> = pool.install(|| {
        cells
            .par_iter()
            .map(|cell| run_seeds(cell, &seeds).map_err(err))
            .collect()
    });
    let mut rows = Vec::new();
    let mut failed = false;
    for (cell, res) in cells.iter().zip(results) {
        match res {
            Ok(r) if all_seeds => rows.extend(r),
            Ok(r) => rows.extend(median_row(&r)),
            Err(e) => {
                eprintln!(
                    "cell levels={} n={} n_c={:?}: {e}",
                    cell.levels, cell.n, cell.n_c
                );
                failed = true;
            }
        }
    }
    write_rows(output_path(&args.problem, &file)?.as_deref(), false, &rows)?;
    failed |= rows.iter().any(|r| !r.converged);
    Ok(if failed {
        Outcome::NotConverged
    } else {
        Outcome::Done
    })
}
