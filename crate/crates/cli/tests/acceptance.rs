//! Acceptance run: every criterion prints one PASS/FAIL line; the process
//! exits nonzero when any fails. Reference values are recomputed here from
//! closed forms, brute force or the exhaustive QP oracle, never taken from the
//! solver's own diagnostics.
//!
//! `cargo test -p cvxrelax-cli --test acceptance -- 3 9` runs a subset.

use cvxrelax::cones::{project_uniform_convex, project_weighted_cyclic, CyclicWorkspace, Hinge1DWorkspace};
use cvxrelax::constraints::{build_convexity_blocks, build_spherical_blocks, Cone, ConstraintBlock};
use cvxrelax::envelope::{qp_oracle, radial_pa_oracle, DenseQp};
use cvxrelax::functionals::{assemble_quadrature, lumped_l2_term};
use cvxrelax::mesh::{build_grid_mesh, interpolate, sample_boundary, Domain, SimplicialMesh};
use cvxrelax::sdmm::{solve, Block, SdmmProblem, SolverConfig};
use cvxrelax::sphere::{build_geodesic_sphere, sample_great_circles};
use cvxrelax_cli::experiments::*;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

type Outcome = anyhow::Result<(bool, String)>;

fn solver(gamma: f64, iters: usize, tol: f64) -> SolverConfig {
    SolverConfig { gamma, max_iterations: iters, primal_residual_tol: tol, log_every: 0, parallel: false }
}

fn max_abs(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Largest discrete convexity gap `g_i − ½(g_{i−1} + g_{i+1})` (uniform) or
/// `w g_i − ½(…)` (cyclic) over the blocks, recomputed from the rows.
fn worst_gap(blocks: &[ConstraintBlock], x: &[f64]) -> f64 {
    let mut worst = f64::NEG_INFINITY;
    for b in blocks {
        let s: Vec<f64> = b.rows.iter().map(|r| r.apply(x)).collect();
        let n = s.len();
        match b.cone {
            Cone::UniformConvex1D => {
                for i in 1..n.saturating_sub(1) {
                    worst = worst.max(s[i] - 0.5 * (s[i - 1] + s[i + 1]));
                }
            }
            Cone::WeightedCyclicConvex1D { weight } => {
                for i in 0..n {
                    worst = worst.max(weight * s[i] - 0.5 * (s[(i + n - 1) % n] + s[(i + 1) % n]));
                }
            }
            _ => {}
        }
    }
    worst
}

/// Gradient of the linear interpolant on simplex `s`.
fn simplex_gradient(mesh: &SimplicialMesh, s: usize, values: &[f64]) -> Vec<f64> {
    let d = mesh.dim();
    let vs = mesh.simplex(s);
    let p0 = mesh.vertex(vs[0]);
    let m = DMatrix::from_fn(d, d, |i, k| mesh.vertex(vs[i + 1])[k] - p0[k]);
    let rhs = DVector::from_fn(d, |i, _| values[vs[i + 1]] - values[vs[0]]);
    m.lu().solve(&rhs).expect("nondegenerate simplex").iter().copied().collect()
}

fn lipschitz(mesh: &SimplicialMesh, values: &[f64]) -> f64 {
    (0..mesh.num_simplices())
        .map(|s| simplex_gradient(mesh, s, values).iter().map(|g| g * g).sum::<f64>().sqrt())
        .fold(0.0, f64::max)
}

fn find_vertex(mesh: &SimplicialMesh, p: &[f64]) -> usize {
    (0..mesh.num_vertices())
        .find(|&i| mesh.vertex(i).iter().zip(p).all(|(a, b)| (a - b).abs() < 1e-12))
        .expect("vertex present")
}

// ---------------------------------------------------------------- criterion 1

fn pa_pieces() -> [(f64, [f64; 2]); 4] {
    let a = 2.0 / 3.0;
    let b = (4.0 - 2f64.sqrt()) / 3.0;
    [(0.0, [0.0, 0.0]), (-a, [1.0, 0.0]), (-a, [0.0, 1.0]), (-b, [1.0, 1.0])]
}

fn u_opt(x: &[f64]) -> f64 {
    pa_pieces().iter().map(|(c, g)| c + g[0] * x[0] + g[1] * x[1]).fold(f64::NEG_INFINITY, f64::max)
}

/// `∫ (u − x·∇u)` for the exact solution. On each affine piece the integrand is
/// the piece's constant; for fixed `x` the active piece changes only where two
/// pieces cross, so each vertical line is integrated exactly and the resulting
/// piecewise-linear function of `x` by a fine midpoint rule.
fn m_opt() -> f64 {
    let pieces = pa_pieces();
    let line = |x: f64| {
        let mut cuts = vec![0.0, 1.0];
        for i in 0..4 {
            for j in i + 1..4 {
                let (ci, gi) = pieces[i];
                let (cj, gj) = pieces[j];
                let dy = gi[1] - gj[1];
                if dy != 0.0 {
                    let y = -((ci - cj) + (gi[0] - gj[0]) * x) / dy;
                    if (0.0..1.0).contains(&y) {
                        cuts.push(y);
                    }
                }
            }
        }
        cuts.sort_by(f64::total_cmp);
        cuts.windows(2)
            .map(|w| {
                let y = 0.5 * (w[0] + w[1]);
                let (c, _) = pieces
                    .iter()
                    .max_by(|p, q| (p.0 + p.1[0] * x + p.1[1] * y).total_cmp(&(q.0 + q.1[0] * x + q.1[1] * y)))
                    .unwrap();
                c * (w[1] - w[0])
            })
            .sum::<f64>()
    };
    let n = 200_000;
    (0..n).map(|k| line((k as f64 + 0.5) / n as f64)).sum::<f64>() / n as f64
}

/// `∫ (u − x·∇u)` of a piecewise-linear `u`: the integrand is affine per
/// triangle, so the centroid rule is exact.
fn m_discrete(mesh: &SimplicialMesh, u: &[f64]) -> f64 {
    (0..mesh.num_simplices())
        .map(|s| {
            let g = simplex_gradient(mesh, s, u);
            let vs = mesh.simplex(s);
            let mean_u = vs.iter().map(|&v| u[v]).sum::<f64>() / 3.0;
            let c: Vec<f64> = (0..2).map(|k| vs.iter().map(|&v| mesh.vertex(v)[k]).sum::<f64>() / 3.0).collect();
            mesh.simplex_volume(s) * (mean_u - g[0] * c[0] - g[1] * c[1])
        })
        .sum()
}

fn linear_principal_agent() -> Outcome {
    let t = Instant::now();
    let r = linear_pa(&LinearPaParams { points: 30, eps: 0.06 }, &solver(LINEAR_PA_GAMMA, 8000, 1e-10))?;
    let secs = t.elapsed().as_secs_f64();
    let mesh = &r.mesh;
    let m = m_discrete(mesh, &r.solved.x);
    let mo = m_opt();
    let linf = max_abs((0..mesh.num_vertices()).map(|i| r.solved.x[i] - u_opt(mesh.vertex(i))));
    let pass = (m - mo).abs() <= 1e-3 && linf <= 3e-2 && secs <= 600.0;
    Ok((pass, format!("|M - M_opt| = {:.3e} (M_opt = {mo:.6}), L∞ = {linf:.3e}, {secs:.0} s", (m - mo).abs())))
}

// ---------------------------------------------------------------- criterion 2

fn radial_principal_agent() -> Outcome {
    let r = radial_pa(&RadialPaParams { delta: 1.0 / 30.0, eps: 0.06, oracle_n: 600 }, &solver(RADIAL_PA_GAMMA, 1500, 1e-10))?;
    let oracle = radial_pa_oracle(600)?;
    let n = 600.0;
    let profile = |rad: f64| {
        let t = (rad.min(1.0) * n).min(n - 1e-9);
        let k = t.floor() as usize;
        oracle.values[k] + (t - k as f64) * (oracle.values[k + 1] - oracle.values[k])
    };
    let mesh = &r.mesh;
    let linf = max_abs((0..mesh.num_vertices()).map(|i| {
        let v = mesh.vertex(i);
        r.solved.x[i] - profile(v[0].hypot(v[1]))
    }));
    Ok((linf <= 1e-2, format!("L∞ vs oracle = {linf:.3e} at {} vertices", mesh.num_vertices())))
}

// ---------------------------------------------------------------- criterion 3

fn grid_phenomenon() -> Outcome {
    let cfg = solver(CHONE_GAMMA, 8000, 1e-8);
    let (mut pass, mut log, mut prev) = (true, Vec::new(), f64::INFINITY);
    for cells in [10usize, 20, 40] {
        let delta = 1.0 / cells as f64;
        let f = |x: &[f64]| (x[0] + x[1] - 1.0).max(0.0);
        let fine = chone_lemeur(&ChoneParams { cells, eps: delta / 8.0, boundary_spacing: 0.1 }, &cfg)?;
        let corner = [[1.0, 0.0], [0.0, 1.0]]
            .iter()
            .map(|p| (fine.solved.x[find_vertex(&fine.mesh, p)] - f(p)).abs())
            .fold(0.0, f64::max);
        let coarse = chone_lemeur(&ChoneParams { cells, eps: 2.0 * delta, boundary_spacing: 2.0 * delta }, &cfg)?;
        let err = max_abs((0..coarse.mesh.num_vertices()).map(|i| coarse.solved.x[i] - f(coarse.mesh.vertex(i))));
        pass &= corner >= 0.15 && err <= 0.05 && err < prev;
        prev = err;
        log.push(format!("1/{cells}: corner {corner:.3}, max err (eps=2δ) {err:.3e}"));
    }
    Ok((pass, log.join("; ")))
}

// ---------------------------------------------------------------- criterion 4

fn quadratic_gap_bound() -> Outcome {
    let (mut pass, mut log) = (true, Vec::new());
    for delta in [0.1f64, 0.05] {
        let dom = Domain::unit_square();
        // diameter √2/cells ≤ δ
        let mesh = build_grid_mesh(&dom, (2f64.sqrt() / delta).ceil() as usize)?;
        let eps = 2.0 * delta;
        let s = interpolate(|x| (x[0] - 0.5).powi(2) + (x[1] - 0.5).powi(2), &mesh)?;
        let blocks = build_convexity_blocks(&mesh, &sample_boundary(&dom, eps)?, eps)?;
        let worst = worst_gap(&blocks, &s.values);
        let bound = delta * delta - eps * eps;
        pass &= worst <= bound + 1e-12;
        log.push(format!("δ={delta}: max ℓ = {worst:.6e} ≤ {bound:.6e} over {} blocks", blocks.len()));
    }
    Ok((pass, log.join("; ")))
}

// ---------------------------------------------------------------- criterion 5

/// Lower convex envelope at the points of a planar set by enumerating every
/// triangle and segment that contains each point.
fn brute_envelope(pts: &[[f64; 2]], g: &[f64]) -> Vec<f64> {
    let n = pts.len();
    let cross = |a: [f64; 2], b: [f64; 2], c: [f64; 2]| (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
    let mut env = g.to_vec();
    for i in 0..n {
        for j in i + 1..n {
            let (a, b) = (pts[i], pts[j]);
            for (v, &x) in pts.iter().enumerate() {
                if cross(a, b, x).abs() < 1e-12 {
                    let len2 = (b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2);
                    let t = ((x[0] - a[0]) * (b[0] - a[0]) + (x[1] - a[1]) * (b[1] - a[1])) / len2;
                    if (0.0..=1.0).contains(&t) {
                        env[v] = env[v].min((1.0 - t) * g[i] + t * g[j]);
                    }
                }
            }
            for k in j + 1..n {
                let c = pts[k];
                let area = cross(a, b, c);
                if area.abs() < 1e-12 {
                    continue;
                }
                let (lo, hi) = ([a[0].min(b[0]).min(c[0]), a[1].min(b[1]).min(c[1])], [a[0].max(b[0]).max(c[0]), a[1].max(b[1]).max(c[1])]);
                for (v, &x) in pts.iter().enumerate() {
                    if x[0] < lo[0] || x[0] > hi[0] || x[1] < lo[1] || x[1] > hi[1] {
                        continue;
                    }
                    let l = [cross(b, c, x) / area, cross(c, a, x) / area, cross(a, b, x) / area];
                    if l.iter().all(|&w| w >= -1e-12) {
                        env[v] = env[v].min(l[0] * g[i] + l[1] * g[j] + l[2] * g[k]);
                    }
                }
            }
        }
    }
    env
}

fn envelope_gap_bound() -> Outcome {
    let dom = Domain::unit_square();
    let mesh = build_grid_mesh(&dom, 8)?;
    let eps = 2.0 * 2f64.sqrt() / 8.0;
    let blocks = build_convexity_blocks(&mesh, &sample_boundary(&dom, eps)?, eps)?;
    let q = assemble_quadrature(&mesh)?;
    let pts: Vec<[f64; 2]> = (0..mesh.num_vertices()).map(|i| [mesh.vertex(i)[0], mesh.vertex(i)[1]]).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut ratio, mut infeasible) = (0.0f64, f64::NEG_INFINITY);
    for _ in 0..100 {
        let y: Vec<f64> = (0..pts.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut p = SdmmProblem::new(pts.len());
        p.push(Block::identity(lumped_l2_term(&q, y.clone())));
        p.extend(blocks.iter().cloned());
        let (g, _) = solve(&p, &solver(ENVELOPE_GAMMA, 3000, 1e-10), &y, None)?;
        infeasible = infeasible.max(worst_gap(&blocks, &g.values));
        let env = brute_envelope(&pts, &g.values);
        let gap = max_abs(g.values.iter().zip(&env).map(|(a, b)| a - b));
        let lip = lipschitz(&mesh, &g.values);
        if lip > 0.0 {
            ratio = ratio.max(gap / (12.0 * 2.0 * eps * lip));
        }
    }
    Ok((ratio <= 1.0 && infeasible <= 1e-6, format!("max gap/(12 d ε Lip) = {ratio:.4}, field feasibility {infeasible:.2e}")))
}

// ---------------------------------------------------------------- criterion 6

fn convex_rows(n: usize, w: Option<f64>) -> Vec<(Vec<f64>, f64)> {
    let idx: Vec<usize> = if w.is_some() { (0..n).collect() } else { (1..n - 1).collect() };
    idx.into_iter()
        .map(|i| {
            let mut a = vec![0.0; n];
            a[i] += w.unwrap_or(1.0);
            a[(i + n - 1) % n] -= 0.5;
            a[(i + 1) % n] -= 0.5;
            (a, 0.0)
        })
        .collect()
}

fn cone_oracle_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (mut du, mut dc, mut wu, mut wc) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let (mut hinge, mut cyc) = (Hinge1DWorkspace::new(), CyclicWorkspace::new());
    let diff = |a: &[f64], b: &[f64]| max_abs(a.iter().zip(b).map(|(x, y)| x - y));
    for _ in 0..1000 {
        let n = rng.random_range(3..=12);
        let f: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let warm = project_uniform_convex(&f, &mut hinge);
        let cold = project_uniform_convex(&f, &mut Hinge1DWorkspace::new());
        du = du.max(diff(&warm, &qp_oracle(&DenseQp::projection(&f, convex_rows(n, None), vec![]))?));
        wu = wu.max(diff(&warm, &cold));
    }
    for _ in 0..1000 {
        let n = rng.random_range(4..=12);
        let w = rng.random_range(0.5..=1.0);
        let f: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let warm = project_weighted_cyclic(&f, w, &mut cyc);
        let cold = project_weighted_cyclic(&f, w, &mut CyclicWorkspace::new());
        dc = dc.max(diff(&warm, &qp_oracle(&DenseQp::projection(&f, convex_rows(n, Some(w)), vec![]))?));
        wc = wc.max(diff(&warm, &cold));
    }
    let pass = du <= 1e-8 && dc <= 1e-8 && wu <= 1e-12 && wc <= 1e-12;
    Ok((pass, format!("uniform {du:.1e} / cyclic {dc:.1e} vs oracle; warm vs cold {wu:.1e} / {wc:.1e}")))
}

// ---------------------------------------------------------------- criterion 7

fn splitting_vs_oracle() -> Outcome {
    let dom = Domain::unit_square();
    let mesh = build_grid_mesh(&dom, 4)?;
    let n = mesh.num_vertices();
    let q = assemble_quadrature(&mesh)?;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    let (mut rows_used, mut active) = (0, 0);
    for _ in 0..5 {
        let eps = 0.25;
        let mut blocks = Vec::new();
        let mut rows = 0;
        let mut all = build_convexity_blocks(&mesh, &sample_boundary(&dom, 0.5)?, eps)?;
        // a random subset of at most 20 rows
        for k in (1..all.len()).rev() {
            all.swap(k, rng.random_range(0..=k));
        }
        for b in all {
            if b.len() >= 3 && rows + b.len() <= 20 {
                rows += b.len();
                blocks.push(b);
            }
        }
        rows_used = rows_used.max(rows);
        let target: Vec<f64> = (0..n)
            .map(|i| {
                let p = mesh.vertex(i);
                0.5 * (p[0] - p[0] * p[0]) - (p[1] - 0.6).powi(2) + 0.3 * rng.random_range(-1.0..1.0)
            })
            .collect();
        // oracle: min Σ m_i (x_i − t_i)² subject to the second differences
        let mut ineq = Vec::new();
        for b in &blocks {
            let dense: Vec<(Vec<f64>, f64)> = b
                .rows
                .iter()
                .map(|r| {
                    let mut v = vec![0.0; n];
                    r.iter().for_each(|(i, w)| v[i] += w);
                    (v, r.offset)
                })
                .collect();
            for w in dense.windows(3) {
                let a = (0..n).map(|i| w[1].0[i] - 0.5 * (w[0].0[i] + w[2].0[i])).collect();
                ineq.push((a, 0.5 * (w[0].1 + w[2].1) - w[1].1));
            }
        }
        let qp = DenseQp {
            h: DMatrix::from_diagonal(&DVector::from_iterator(n, q.lumped.iter().map(|m| 2.0 * m))),
            c: q.lumped.iter().zip(&target).map(|(m, t)| -2.0 * m * t).collect(),
            ineq,
            eq: vec![],
        };
        let exact = qp_oracle(&qp)?;
        active += qp.ineq.iter().filter(|(a, b)| a.iter().zip(&exact).map(|(a, x)| a * x).sum::<f64>() > b - 1e-9).count();
        let mut p = SdmmProblem::new(n);
        p.push(Block::identity(lumped_l2_term(&q, target.clone())));
        p.extend(blocks);
        let (x, _) = solve(&p, &solver(10.0, 10_000, 0.0), &target, None)?;
        worst = worst.max(max_abs(x.values.iter().zip(&exact).map(|(a, b)| a - b)));
    }
    Ok((worst <= 1e-5, format!("max |x - x_oracle| = {worst:.2e} over 5 instances (≤ {rows_used} rows, {active} active constraints)")))
}

// ---------------------------------------------------------------- criterion 8

fn denoising_3d() -> Outcome {
    let points = 20;
    let h = 2.0 / (points - 1) as f64;
    let eps = 2.0 * 3f64.sqrt() * h;
    let t = Instant::now();
    let r = denoise(&DenoiseParams { dim: 3, points, eps, noise: 1.0 / 40.0, seed: 1 }, &solver(DENOISE_GAMMA, 3000, 1e-9))?;
    let secs = t.elapsed().as_secs_f64();
    let dom = Domain::cube(-1.0, 1.0, 3);
    let blocks = build_convexity_blocks(&r.mesh, &sample_boundary(&dom, eps)?, eps)?;
    let violation = worst_gap(&blocks, &r.solved.x).max(0.0);
    // trapezoidal L² norm on the tensor grid
    let weight = |i: usize| {
        let p = r.mesh.vertex(i);
        p.iter().map(|c| if (c.abs() - 1.0).abs() < 1e-12 { 0.5 * h } else { h }).product::<f64>()
    };
    let norm = |v: &dyn Fn(usize) -> f64| (0..r.mesh.num_vertices()).map(|i| weight(i) * v(i).powi(2)).sum::<f64>().sqrt();
    let err = norm(&|i| r.solved.x[i] - r.u_star[i]);
    let noisy = norm(&|i| r.u0[i] - r.u_star[i]);
    let star = norm(&|i| r.u_star[i]);
    let pass = violation <= 1e-6 && err <= noisy + 1e-3 * star && secs <= 900.0;
    Ok((pass, format!("violation {violation:.2e}, ‖u-u*‖ = {err:.4} vs ‖u0-u*‖ = {noisy:.4}, {secs:.0} s")))
}

// ---------------------------------------------------------------- criterion 9

fn polytope_measures(p: &cvxrelax::bodies::Polytope) -> (f64, f64) {
    let (mut vol, mut area) = (0.0, 0.0);
    for f in &p.faces {
        let a = p.vertices[f[0]];
        for k in 1..f.len() - 1 {
            let (b, c) = (p.vertices[f[k]], p.vertices[f[k + 1]]);
            let u = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
            let v = [c[0] - a[0], c[1] - a[1], c[2] - a[2]];
            let n = [u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]];
            area += 0.5 * (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
            vol += (a[0] * n[0] + a[1] * n[1] + a[2] * n[2]) / 6.0;
        }
    }
    (vol.abs(), area)
}

fn constant_width_bodies() -> Outcome {
    let mut log = Vec::new();
    let mut pass = true;
    for norm in [Norm::L2, Norm::L1, Norm::LInf] {
        let p = WidthParams {
            freq: 10,
            circles: 500,
            circle_step: WIDTH_CIRCLE_STEP,
            norm,
            alpha: None,
            edge: 1.0,
            seed: 1,
            input: None,
        };
        let r = constant_width(&p, &solver(WIDTH_GAMMA, WIDTH_ITERS, 1e-9))?;
        let dirs = r.sphere.directions();
        let widths: Vec<f64> = (0..dirs.len())
            .map(|i| {
                let j = (0..dirs.len())
                    .min_by(|&a, &b| {
                        let da: f64 = (0..3).map(|k| (dirs[a][k] + dirs[i][k]).powi(2)).sum();
                        let db: f64 = (0..3).map(|k| (dirs[b][k] + dirs[i][k]).powi(2)).sum();
                        da.total_cmp(&db)
                    })
                    .unwrap();
                r.solved.x[i] + r.solved.x[j]
            })
            .collect();
        let (lo, hi) = widths.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &w| (l.min(w), h.max(w)));
        let mean = widths.iter().sum::<f64>() / widths.len() as f64;
        let rel = (hi - lo) / mean;
        let (vol, area) = polytope_measures(&r.body);
        let ok = if norm == Norm::L2 {
            rel <= 0.01 && (vol / 0.34312 - 1.0).abs() <= 0.15 && (area / 2.5191 - 1.0).abs() <= 0.15
        } else {
            rel.is_finite() && vol > 0.0 && area > 0.0
        };
        pass &= ok;
        log.push(format!("{norm}: width err {:.3}%, vol {vol:.4}, surf {area:.4}", 100.0 * rel));
    }
    Ok((pass, log.join("; ")))
}

// --------------------------------------------------------------- criterion 10

fn spherical_interior_point() -> Outcome {
    let circles = sample_great_circles(50, 0.1, 1)?;
    let blocks = build_spherical_blocks(&build_geodesic_sphere(6), &circles)?;
    let mut dev = 0.0f64;
    for (b, c) in blocks.iter().zip(&circles) {
        let Cone::WeightedCyclicConvex1D { weight } = b.cone else { anyhow::bail!("unexpected cone {}", b.cone.tag()) };
        let n = c.points.len();
        for i in 0..n {
            // cos ε from consecutive samples
            let (p, q) = (c.points[i], c.points[(i + 1) % n]);
            let cos_eps = p[0] * q[0] + p[1] * q[1] + p[2] * q[2];
            // the constant 1 at the three samples
            let value = weight * 1.0 - 0.5 * (1.0 + 1.0);
            dev = dev.max((value - (cos_eps - 1.0)).abs());
        }
    }
    Ok((dev <= 1e-12, format!("max |ℓ(1) - (cos ε - 1)| = {dev:.2e} over {} circles", blocks.len())))
}

// --------------------------------------------------------------- criterion 11

fn interpolation_properties() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (mut l1, mut l2, mut l3) = (0.0f64, 0.0f64, 0.0f64);
    for (dim, cells) in [(2usize, 16usize), (3, 6)] {
        let mesh = build_grid_mesh(&Domain::cube(-1.0, 1.0, dim), cells)?;
        let delta = (dim as f64).sqrt() * 2.0 / cells as f64;
        for _ in 0..20 {
            let a: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            let b: Vec<f64> = (0..dim).map(|_| rng.random_range(3.2..6.0)).collect();
            let c: Vec<f64> = (0..dim).map(|_| rng.random_range(0.0..6.3)).collect();
            let f = |x: &[f64]| (0..dim).map(|i| a[i] * (b[i] * x[i] + c[i]).sin()).sum::<f64>();
            let lip = (0..dim).map(|i| (a[i] * b[i]).powi(2)).sum::<f64>().sqrt();
            let lip_grad = (0..dim).map(|i| a[i].abs() * b[i] * b[i]).fold(0.0, f64::max);
            let field = interpolate(f, &mesh)?;
            let mut err = 0.0f64;
            for _ in 0..200 {
                let x: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
                err = err.max((f(&x) - mesh.evaluate(&field.values, &x)?).abs());
            }
            l1 = l1.max(lipschitz(&mesh, &field.values) / lip);
            l2 = l2.max(err / (delta * lip));
            l3 = l3.max(err / (0.5 * delta * delta * lip_grad));
        }
    }
    let pass = l1 <= 1.0 + 1e-12 && l2 <= 1.0 && l3 <= 1.0;
    Ok((pass, format!("ratios to the C_I = 1 bounds: L1 {l1:.3}, L2 {l2:.3}, L3 {l3:.3}")))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("linear principal-agent", linear_principal_agent),
        ("radial principal-agent", radial_principal_agent),
        ("grid phenomenon", grid_phenomenon),
        ("quadratic gap bound", quadratic_gap_bound),
        ("envelope gap bound", envelope_gap_bound),
        ("cone projection oracle", cone_oracle_equivalence),
        ("splitting solver vs oracle", splitting_vs_oracle),
        ("3D denoising", denoising_3d),
        ("constant width", constant_width_bodies),
        ("spherical interior point", spherical_interior_point),
        ("interpolation properties", interpolation_properties),
    ];
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let id = k + 1;
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let t = Instant::now();
        let (pass, detail) = match std::panic::catch_unwind(run) {
            Ok(Ok(r)) => r,
            Ok(Err(e)) => (false, format!("error: {e:#}")),
            Err(_) => (false, "panicked".into()),
        };
        failed += usize::from(!pass);
        println!("{} {id:>2} {name}: {detail} [{:.1} s]", if pass { "PASS" } else { "FAIL" }, t.elapsed().as_secs_f64());
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
