//! Invariant suites run by the `verify` command. Each check records the
//! measured quantity next to its bound; failures are report entries, not errors.

use crate::experiments::{chone_lemeur, ChoneParams, CHONE_GAMMA, ENVELOPE_GAMMA};
use anyhow::Result;
use cvxrelax::cones::{project_uniform_convex, project_weighted_cyclic, CyclicWorkspace, Hinge1DWorkspace};
use cvxrelax::constraints::{build_convexity_blocks, build_spherical_blocks, verify_feasibility};
use cvxrelax::envelope::{convex_envelope, lipschitz_constant, qp_oracle, DenseQp};
use cvxrelax::functionals::{assemble_quadrature, lumped_l2_term};
use cvxrelax::mesh::{build_grid_mesh, interpolate, sample_boundary, Domain, NodalField};
use cvxrelax::sdmm::{solve, Block, SdmmProblem, SolverConfig};
use cvxrelax::sphere::{build_geodesic_sphere, sample_great_circles};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

pub const SUITES: &[&str] = &["lemma-2.12", "lemma-3.5", "interpolation", "cones-oracle", "envelope-bound", "chone-lemeur"];

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub suite: String,
    pub name: String,
    pub measured: f64,
    pub bound: f64,
    pub pass: bool,
}

impl Check {
    fn at_most(suite: &str, name: String, measured: f64, bound: f64) -> Self {
        Check { suite: suite.into(), name, measured, bound, pass: measured <= bound }
    }

    fn at_least(suite: &str, name: String, measured: f64, bound: f64) -> Self {
        Check { suite: suite.into(), name, measured, bound, pass: measured >= bound }
    }
}

pub fn run_suite(name: &str, seed: u64) -> Result<Vec<Check>> {
    match name {
        "lemma-2.12" => quadratic_gaps(),
        "lemma-3.5" => constant_on_circles(),
        "interpolation" => interpolation(seed),
        "cones-oracle" => cones_oracle(seed, 1000),
        "envelope-bound" => envelope_bound(seed, 100),
        "chone-lemeur" => chone(),
        "all" => {
            let mut out = Vec::new();
            for s in SUITES {
                out.extend(run_suite(s, seed)?);
            }
            Ok(out)
        }
        _ => anyhow::bail!("unknown suite {name:?}; available: {} or all", SUITES.join(", ")),
    }
}

/// `max ℓ(s_δ) ≤ δ² − ε²` for `s = ‖x − x₀‖²` with `x₀` the square's center.
pub fn quadratic_gaps() -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for target in [0.1, 0.05] {
        let dom = Domain::unit_square();
        let cells = (2f64.sqrt() / target).ceil() as usize;
        let mesh = build_grid_mesh(&dom, cells)?;
        let delta = mesh.delta();
        let eps = 2.0 * delta;
        let s = interpolate(|x| (x[0] - 0.5).powi(2) + (x[1] - 0.5).powi(2), &mesh)?;
        let blocks = build_convexity_blocks(&mesh, &sample_boundary(&dom, eps)?, eps)?;
        let worst = blocks
            .iter()
            .flat_map(|b| b.cone.constraint_values(&b.values(&s.values)))
            .fold(f64::NEG_INFINITY, f64::max);
        out.push(Check::at_most("lemma-2.12", format!("delta={delta:.4}"), worst, delta * delta - eps * eps + 1e-12));
    }
    Ok(out)
}

/// The constant function 1, sampled exactly at the circle points, evaluates
/// every consecutive triple to `cos ε − 1`. The block weight must also equal the
/// norm of the chord midpoint between neighbours.
pub fn constant_on_circles() -> Result<Vec<Check>> {
    let circles = sample_great_circles(50, 0.1, 1)?;
    let sphere = build_geodesic_sphere(6);
    let blocks = build_spherical_blocks(&sphere, &circles)?;
    let mut dev = 0.0f64;
    for (b, c) in blocks.iter().zip(&circles) {
        let n = c.points.len();
        let e = c.eps.cos() - 1.0;
        for v in b.cone.constraint_values(&vec![1.0; n]) {
            dev = dev.max((v - e).abs());
        }
        if let cvxrelax::constraints::Cone::WeightedCyclicConvex1D { weight } = b.cone {
            for i in 0..n {
                let (x, y) = (c.points[(i + n - 1) % n], c.points[(i + 1) % n]);
                let mid = (0..3).map(|k| (0.5 * (x[k] + y[k])).powi(2)).sum::<f64>().sqrt();
                dev = dev.max((mid - weight).abs());
            }
        }
    }
    Ok(vec![Check::at_most("lemma-3.5", "constant function".into(), dev, 1e-12)])
}

/// Interpolation stability and approximation bounds on random separable test
/// functions `Σ aᵢ sin(bᵢ xᵢ + cᵢ)` over `[−1, 1]^d`, with `bᵢ ≥ π` so every
/// derivative bound is attained.
pub fn interpolation(seed: u64) -> Result<Vec<Check>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for (dim, cells) in [(2usize, 16usize), (3, 6)] {
        let mesh = build_grid_mesh(&Domain::cube(-1.0, 1.0, dim), cells)?;
        let delta = mesh.delta();
        let (mut l1, mut l2, mut l3) = (f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for _ in 0..20 {
            let a: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            let b: Vec<f64> = (0..dim).map(|_| rng.random_range(3.2..6.0)).collect();
            let c: Vec<f64> = (0..dim).map(|_| rng.random_range(0.0..6.3)).collect();
            let f = |x: &[f64]| (0..dim).map(|i| a[i] * (b[i] * x[i] + c[i]).sin()).sum::<f64>();
            let lip = (0..dim).map(|i| (a[i] * b[i]).powi(2)).sum::<f64>().sqrt();
            let lip_grad = (0..dim).map(|i| a[i].abs() * b[i] * b[i]).fold(0.0, f64::max);
            let field = interpolate(f, &mesh)?;
            let lip_i = lipschitz_constant(&mesh, &field);
            let mut err = 0.0f64;
            for _ in 0..200 {
                let x: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
                err = err.max((f(&x) - mesh.evaluate(&field.values, &x)?).abs());
            }
            l1 = l1.max(lip_i / lip);
            l2 = l2.max(err / (delta * lip));
            l3 = l3.max(err / (0.5 * delta * delta * lip_grad));
        }
        for (name, v) in [("L1", l1), ("L2", l2), ("L3", l3)] {
            out.push(Check::at_most("interpolation", format!("{name} ratio d={dim}"), v, 1.0 + 1e-12));
        }
    }
    Ok(out)
}

fn convex_rows(n: usize, cyclic: Option<f64>) -> Vec<(Vec<f64>, f64)> {
    let idx: Vec<usize> = match cyclic {
        Some(_) => (0..n).collect(),
        None => (1..n - 1).collect(),
    };
    idx.into_iter()
        .map(|i| {
            let mut a = vec![0.0; n];
            a[i] += cyclic.unwrap_or(1.0);
            a[(i + n - 1) % n] -= 0.5;
            a[(i + 1) % n] -= 0.5;
            (a, 0.0)
        })
        .collect()
}

/// Random cone projections against the exhaustive QP oracle, and warm against cold starts.
pub fn cones_oracle(seed: u64, count: usize) -> Result<Vec<Check>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut du, mut dc, mut wu, mut wc) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let mut warm_u = Hinge1DWorkspace::new();
    let mut warm_c = CyclicWorkspace::new();
    for _ in 0..count {
        let n = rng.random_range(3..=12);
        let f: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let g = project_uniform_convex(&f, &mut warm_u);
        let cold = project_uniform_convex(&f, &mut Hinge1DWorkspace::new());
        let o = qp_oracle(&DenseQp::projection(&f, convex_rows(n, None), vec![]))?;
        du = du.max(cvxrelax::linalg::max_abs_diff(&g, &o));
        wu = wu.max(cvxrelax::linalg::max_abs_diff(&g, &cold));

        let n = rng.random_range(4..=12);
        let w = rng.random_range(0.5..=1.0);
        let f: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let g = project_weighted_cyclic(&f, w, &mut warm_c);
        let cold = project_weighted_cyclic(&f, w, &mut CyclicWorkspace::new());
        let o = qp_oracle(&DenseQp::projection(&f, convex_rows(n, Some(w)), vec![]))?;
        dc = dc.max(cvxrelax::linalg::max_abs_diff(&g, &o));
        wc = wc.max(cvxrelax::linalg::max_abs_diff(&g, &cold));
    }
    Ok(vec![
        Check::at_most("cones-oracle", "uniform vs oracle".into(), du, 1e-8),
        Check::at_most("cones-oracle", "cyclic vs oracle".into(), dc, 1e-8),
        Check::at_most("cones-oracle", "uniform warm vs cold".into(), wu, 1e-12),
        Check::at_most("cones-oracle", "cyclic warm vs cold".into(), wc, 1e-12),
    ])
}

/// Random fields projected onto the relaxed set satisfy `‖g − ḡ‖_∞ ≤ 12 d ε Lip(g)`.
/// The measured value is the largest ratio `‖g − ḡ‖_∞ / (12 d ε Lip(g))`.
pub fn envelope_bound(seed: u64, count: usize) -> Result<Vec<Check>> {
    let dom = Domain::unit_square();
    let mesh = build_grid_mesh(&dom, 8)?;
    let eps = 2.0 * mesh.delta();
    let blocks = build_convexity_blocks(&mesh, &sample_boundary(&dom, eps)?, eps)?;
    let q = assemble_quadrature(&mesh)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = SolverConfig { gamma: ENVELOPE_GAMMA, max_iterations: 3000, primal_residual_tol: 1e-10, log_every: 0, parallel: false };
    let (mut ratio, mut infeasible) = (0.0f64, 0.0f64);
    for _ in 0..count {
        let y: Vec<f64> = (0..mesh.num_vertices()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut p = SdmmProblem::new(mesh.num_vertices());
        p.push(Block::identity(lumped_l2_term(&q, y.clone())));
        p.extend(blocks.iter().cloned());
        let (g, _) = solve(&p, &cfg, &y, None)?;
        infeasible = infeasible.max(verify_feasibility(&g.values, &blocks, 0.0).global_max);
        let env = convex_envelope(&mesh, &NodalField::new(g.values.clone()))?;
        let lip = lipschitz_constant(&mesh, &g);
        if lip > 0.0 {
            ratio = ratio.max(env.max_gap / (12.0 * 2.0 * eps * lip));
        }
    }
    Ok(vec![
        Check::at_most("envelope-bound", "gap ratio".into(), ratio, 1.0),
        Check::at_most("envelope-bound", "feasibility".into(), infeasible, 1e-6),
    ])
}

/// Grid phenomenon: tiny `ε` keeps the corner error near 0.2; `ε = 2δ` is checked against 0.05.
pub fn chone() -> Result<Vec<Check>> {
    let cfg = SolverConfig { gamma: CHONE_GAMMA, max_iterations: 8000, primal_residual_tol: 1e-8, log_every: 0, parallel: true };
    let mut out = Vec::new();
    for cells in [10usize, 20, 40] {
        let delta = 1.0 / cells as f64;
        let fine = chone_lemeur(&ChoneParams { cells, eps: delta / 8.0, boundary_spacing: 0.1 }, &cfg)?;
        out.push(Check::at_least("chone-lemeur", format!("corner eps=delta/8 delta=1/{cells}"), fine.corner_error, 0.15));
        let coarse = chone_lemeur(&ChoneParams { cells, eps: 2.0 * delta, boundary_spacing: 2.0 * delta }, &cfg)?;
        out.push(Check::at_most("chone-lemeur", format!("max error eps=2delta delta=1/{cells}"), coarse.max_error, 0.05));
    }
    Ok(out)
}
