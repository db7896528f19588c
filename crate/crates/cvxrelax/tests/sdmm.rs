use cvxrelax::prelude::*;
use cvxrelax::sdmm::TracePoint;

/// Dense inequality rows `⟨a, x⟩ ≤ b` encoding a uniform block's second differences.
fn uniform_rows(block: &ConstraintBlock, n: usize) -> Vec<(Vec<f64>, f64)> {
    let dense = |r: &EvalRow| {
        let mut v = vec![0.0; n];
        for (i, w) in r.iter() {
            v[i] += w;
        }
        (v, r.offset)
    };
    block
        .rows
        .windows(3)
        .map(|w| {
            let (a, oa) = dense(&w[0]);
            let (b, ob) = dense(&w[1]);
            let (c, oc) = dense(&w[2]);
            let row = (0..n).map(|i| b[i] - 0.5 * (a[i] + c[i])).collect();
            (row, 0.5 * (oa + oc) - ob)
        })
        .collect()
}

/// Small denoising problem on a 5×5 grid with at most 20 convexity inequalities.
fn small_problem() -> (SdmmProblem, Vec<f64>, DenseQp) {
    let mesh = build_grid_mesh(&Domain::unit_square(), 4).unwrap();
    let n = mesh.num_vertices();
    let target: Vec<f64> = (0..n)
        .map(|i| {
            let p = mesh.vertex(i);
            (p[0] - 0.5).powi(2) - 0.8 * (3.0 * p[1]).sin() + 0.1 * ((i * 7 % 5) as f64 - 2.0)
        })
        .collect();
    let u = sample_boundary(&Domain::unit_square(), 0.5).unwrap();
    let mut blocks = Vec::new();
    let mut ineq = Vec::new();
    for b in build_convexity_blocks(&mesh, &u, 0.25).unwrap() {
        let rows = uniform_rows(&b, n);
        if ineq.len() + rows.len() > 20 {
            continue;
        }
        ineq.extend(rows);
        blocks.push(b);
    }
    assert!(ineq.len() >= 10);
    let mut p = SdmmProblem::new(n);
    p.push(Block::identity(ProxTerm::l2(target.clone())));
    p.extend(blocks);
    let qp = DenseQp::projection(&target, ineq, vec![]);
    (p, target, qp)
}

fn cfg(gamma: f64, iters: usize) -> SolverConfig {
    SolverConfig { gamma, max_iterations: iters, primal_residual_tol: 1e-12, log_every: 0, parallel: false }
}

#[test]
fn matches_dense_oracle() {
    let (p, target, qp) = small_problem();
    let exact = qp_oracle(&qp).unwrap();
    let (x, report) = solve(&p, &cfg(1.0, 10_000), &target, None).unwrap();
    let err = x.values.iter().zip(&exact).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    assert!(err <= 1e-5, "err {err}, {} iterations", report.iterations);
}

#[test]
fn limit_does_not_depend_on_gamma() {
    let (p, target, qp) = small_problem();
    let exact = qp_oracle(&qp).unwrap();
    for gamma in [0.3, 3.0, 30.0] {
        let (x, _) = solve(&p, &cfg(gamma, 20_000), &target, None).unwrap();
        let err = x.values.iter().zip(&exact).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err <= 1e-5, "γ = {gamma}: err {err}");
    }
}

#[test]
fn parallel_is_bitwise_deterministic() {
    let mesh = build_grid_mesh(&Domain::unit_square(), 10).unwrap();
    let u = sample_boundary(&Domain::unit_square(), 0.2).unwrap();
    let target: Vec<f64> = (0..mesh.num_vertices()).map(|i| ((i * 13 % 7) as f64).sin()).collect();
    let mut p = SdmmProblem::new(mesh.num_vertices());
    p.push(Block::identity(ProxTerm::l2(target.clone())));
    p.extend(build_convexity_blocks(&mesh, &u, 0.2).unwrap());
    let serial = solve(&p, &cfg(1.0, 200), &target, None).unwrap().0;
    let par = solve(&p, &SolverConfig { parallel: true, ..cfg(1.0, 200) }, &target, None).unwrap().0;
    assert_eq!(serial.values, par.values);
}

#[test]
fn point_block_pins_the_solution() {
    let h0 = vec![0.3, -1.0, 2.0];
    let mut p = SdmmProblem::new(3);
    p.push(ConstraintBlock::identity(3, Cone::Point { target: h0.clone() }).unwrap());
    let (x, _) = solve(&p, &cfg(1.0, 5), &[1.0, 1.0, 1.0], None).unwrap();
    for (a, b) in x.values.iter().zip(&h0) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn trace_and_report() {
    let (p, target, _) = small_problem();
    let mut seen = 0;
    let mut cb = |_: &TracePoint| seen += 1;
    let cfg = SolverConfig { log_every: 10, ..cfg(1.0, 50) };
    let (_, report) = solve(&p, &cfg, &target, Some(&mut cb)).unwrap();
    assert!(seen >= 5);
    assert_eq!(report.trace.len(), seen);
    assert!(report.trace_csv().lines().count() > seen);
}

#[test]
fn rejects_bad_input() {
    let (p, target, _) = small_problem();
    assert!(solve(&p, &cfg(0.0, 10), &target, None).is_err());
    assert!(solve(&p, &cfg(1.0, 10), &target[1..], None).is_err());
    assert!(solve(&SdmmProblem::new(3), &cfg(1.0, 10), &[0.0; 3], None).is_err());
}
