//! End-to-end behaviour of the Schwarz preconditioner and the outer solve.

mod common;

use common::*;
use helmwave_core::decomposition::{Hierarchy, LevelSpec};
use helmwave_core::fem::{AssembledProblem, RectMesh, WavenumberField};
use helmwave_core::interface::LinearMap;
use helmwave_core::linalg::{norm, SparseLu};
use helmwave_core::schwarz::{solve, MethodParams, SchwarzContext};
use helmwave_core::Mode;

fn params(n_c: Vec<usize>) -> MethodParams {
    let levels = n_c.len();
    MethodParams {
        n_c,
        n_i: vec![1; levels],
        ..MethodParams::default()
    }
}

#[test]
fn hierarchical_equals_flat_without_coarse() {
    let (_, flat, field, a) = setup("4x4", 4);
    let (_, hier, _, _) = setup("2x2,2x2", 4);
    let (fc, _) = SchwarzContext::build(&flat, &field, 0, a.clone(), &params(vec![0])).unwrap();
    let (hc, _) = SchwarzContext::build(&hier, &field, 0, a.clone(), &params(vec![0, 0])).unwrap();
    for seed in 0..5 {
        let r = random_vec(seed, a.nrows());
        assert!(rel_diff(&hc.precond_apply(&r), &fc.precond_apply(&r)) <= 1e-12);
    }
    let problem = AssembledProblem::random_solution(flat.mesh, field, 1).unwrap();
    let f = solve(&problem, &flat, &params(vec![0])).unwrap();
    let h = solve(&problem, &hier, &params(vec![0, 0])).unwrap();
    assert_eq!(f.iterations, h.iterations);
}

#[test]
fn single_subdomain_is_exact() {
    let (mesh, tree, field, a) = setup("1x1", 8);
    let (ctx, _) = SchwarzContext::build(&tree, &field, 0, a.clone(), &params(vec![0])).unwrap();
    let r = random_vec(3, a.nrows());
    let exact = SparseLu::factorize(&a)
        .unwrap()
        .solve(&r, Mode::Normal)
        .unwrap();
    assert!(rel_diff(&ctx.ras_apply(&r), &exact) <= 1e-12);
    let problem = AssembledProblem::random_solution(mesh, field, 1).unwrap();
    assert_eq!(
        solve(&problem, &tree, &params(vec![0])).unwrap().iterations,
        1
    );
}

#[test]
fn solution_matches_direct_solve() {
    let (mesh, tree, field, _) = setup("2x2", 4);
    let problem = AssembledProblem::random_solution(mesh, field, 2).unwrap();
    let report = solve(&problem, &tree, &params(vec![3])).unwrap();
    assert!(report.converged);
    let direct = SparseLu::factorize(&problem.matrix)
        .unwrap()
        .solve(&problem.rhs, Mode::Normal)
        .unwrap();
    assert!(rel_diff(&report.x, &direct) <= 1e-3);
    assert!(report.error.unwrap() <= 1e-3);
    assert!(report.final_relres < 1e-5);
}

#[test]
fn exact_solution_is_a_fixed_point() {
    let (mesh, tree, field, a) = setup("2x2,2x2", 4);
    let problem = AssembledProblem::random_solution(mesh, field, 5).unwrap();
    let (ctx, _) = SchwarzContext::build(&tree, &field, 0, a, &params(vec![6, 3])).unwrap();
    let u = problem.exact.unwrap();
    assert!(rel_diff(&ctx.schwarz_step(&u, &problem.rhs), &u) <= 1e-12);
}

#[test]
fn one_step_without_coarse_is_ras() {
    let (_, tree, field, a) = setup("3x2", 3);
    let (ctx, _) = SchwarzContext::build(&tree, &field, 0, a.clone(), &params(vec![0])).unwrap();
    let r = random_vec(8, a.nrows());
    assert_eq!(ctx.precond_apply(&r), ctx.ras_apply(&r));
}

#[test]
fn coarse_dimensions_follow_counts() {
    let (_, tree, field, a) = setup("2x2,2x2", 4);
    let (ctx, report) = SchwarzContext::build(&tree, &field, 0, a, &params(vec![6, 3])).unwrap();
    assert_eq!(ctx.coarse.as_ref().unwrap().dim(), 24);
    let mut dims = Vec::new();
    ctx.for_each_context(&mut |c| dims.push((c.node, c.coarse.as_ref().map_or(0, |cs| cs.dim()))));
    assert_eq!(dims, vec![(0, 24), (1, 12), (2, 12), (3, 12), (4, 12)]);
    assert_eq!(report.coarse_dims.last(), Some(&(0, 24)));
    assert_eq!(report.coarse_dims.len(), 5);
}

#[test]
fn no_coarse_counts_build_no_coarse_spaces() {
    let (_, tree, field, a) = setup("2x2,2x2", 4);
    let (ctx, _) = SchwarzContext::build(&tree, &field, 0, a, &params(vec![0, 0])).unwrap();
    let mut any = false;
    ctx.for_each_context(&mut |c| any |= c.coarse.is_some());
    assert!(!any);
}

#[test]
fn coarse_columns_are_discretely_harmonic() {
    let (_, tree, field, a) = setup("2x2", 4);
    let (ctx, _) = SchwarzContext::build(&tree, &field, 0, a, &params(vec![4])).unwrap();
    for i in 0..ctx.level.len() {
        let op = ctx.level.interface_operator(i);
        let s = op.subdomain;
        for seed in 0..3 {
            let w = op.local_field(&random_vec(seed, op.in_dim()));
            let aw = s.matrix.mul_vec(&w);
            let scale = norm(&aw);
            for (p, v) in aw.iter().enumerate() {
                if !s.artificial.contains(&p) {
                    assert!(v.norm() <= 1e-11 * scale, "row {p}: {v}");
                }
            }
        }
    }
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let (mesh, tree, field, _) = setup("2x2,2x2", 4);
    let problem = AssembledProblem::random_solution(mesh, field, 4).unwrap();
    let p = params(vec![8, 4]);
    let serial = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap()
        .install(|| solve(&problem, &tree, &p).unwrap());
    let parallel = rayon::ThreadPoolBuilder::new()
        .num_threads(4)
        .build()
        .unwrap()
        .install(|| solve(&problem, &tree, &p).unwrap());
    assert_eq!(serial.x, parallel.x);
    assert_eq!(serial.history, parallel.history);
}

#[test]
fn layered_problem_converges() {
    let spec = LevelSpec::parse("2x2", 2).unwrap();
    let mesh = RectMesh::unit_square(16).unwrap();
    let field = WavenumberField::layered(16.0, 5.0, 8);
    let tree = Hierarchy::build(&mesh, &spec).unwrap();
    let problem = AssembledProblem::random_solution(mesh, field, 1).unwrap();
    let report = solve(&problem, &tree, &params(vec![6])).unwrap();
    assert!(
        report.converged && report.iterations <= 10,
        "{}",
        report.iterations
    );
}

#[test]
fn wrong_parameter_lengths_are_rejected() {
    let (_, tree, field, a) = setup("2x2,2x2", 4);
    assert!(SchwarzContext::build(&tree, &field, 0, a.clone(), &params(vec![3])).is_err());
    let mut p = params(vec![0, 0]);
    p.n_i = vec![1, 0];
    assert!(SchwarzContext::build(&tree, &field, 0, a, &p).is_err());
    let problem = AssembledProblem::random_solution(
        RectMesh::unit_square(6).unwrap(),
        WavenumberField::Constant { k: 6.0 },
        1,
    )
    .unwrap();
    assert!(solve(&problem, &tree, &params(vec![0, 0])).is_err());
}
