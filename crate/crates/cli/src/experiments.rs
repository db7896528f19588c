//! The experiment drivers. Each one builds its mesh, blocks and objective,
//! runs the solver and returns a typed result with the reported metrics.

use anyhow::{ensure, Context, Result};
use cvxrelax::bodies::{reconstruct_body, support_of_polytope, surface_area, volume, width_stats, Polytope, WidthStats};
use cvxrelax::constraints::{
    build_convexity_blocks, build_lower_bound_block, build_spherical_blocks, build_width_block, verify_feasibility, Cone,
    ConstraintBlock,
};
use cvxrelax::envelope::{radial_pa_oracle, RadialProfile};
use cvxrelax::functionals::{assemble_geometric_pa, assemble_linear_pa, assemble_quadrature, lumped_l2_term, ProxTerm};
use cvxrelax::mesh::{
    build_disk_mesh, build_grid_mesh, build_grid_mesh_with, interpolate, sample_boundary, Diagonal, Domain, SimplicialMesh,
};
use cvxrelax::sdmm::{solve, Block, SdmmProblem, SolverConfig, SolverReport};
use cvxrelax::sphere::{build_geodesic_sphere, sample_great_circles, SphereMesh};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use std::sync::Arc;

/// Solver output shared by all experiments.
#[derive(Debug, Clone)]
pub struct Solved {
    pub x: Vec<f64>,
    pub report: SolverReport,
    /// Largest violation over the constraint blocks.
    pub violation: f64,
    pub num_blocks: usize,
    pub num_rows: usize,
}

fn run(problem: &SdmmProblem, solver: &SolverConfig, xi0: &[f64], constraints: &[ConstraintBlock]) -> Result<Solved> {
    let (x, report) = solve(problem, solver, xi0, None).context("solver failed")?;
    let violation = verify_feasibility(&x.values, constraints, 0.0).global_max;
    Ok(Solved {
        x: x.values,
        report,
        violation,
        num_blocks: problem.blocks.len(),
        num_rows: problem.num_rows(),
    })
}

fn normal_noise(n: usize, scale: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            scale * z
        })
        .collect()
}

/// `‖v‖_{L²}` with lumped masses.
fn lumped_norm(mass: &[f64], v: &[f64]) -> f64 {
    mass.iter().zip(v).map(|(m, v)| m * v * v).sum::<f64>().sqrt()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Grid mesh of `[lo, hi]^dim` with `points` vertices per axis.
pub fn grid(dim: usize, lo: f64, hi: f64, points: usize) -> Result<(Domain, SimplicialMesh)> {
    ensure!(points >= 2, "need at least 2 points per axis");
    let dom = Domain::cube(lo, hi, dim);
    let mesh = build_grid_mesh(&dom, points - 1)?;
    Ok((dom, mesh))
}

// ---------------------------------------------------------------- denoising

#[derive(Debug, Clone)]
pub struct DenoiseParams {
    pub dim: usize,
    pub points: usize,
    pub eps: f64,
    pub noise: f64,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct DenoiseResult {
    pub mesh: Arc<SimplicialMesh>,
    pub u_star: Vec<f64>,
    pub u0: Vec<f64>,
    pub solved: Solved,
    pub l2_noisy: f64,
    pub l2_error: f64,
    pub linf_error: f64,
    pub l2_star: f64,
}

/// `u* = x²/3 + y²/4 (+ z²/8)` on `[−1, 1]^d`, perturbed by `c·N(0,1)` at the
/// vertices, projected in L² onto the relaxed convex set.
pub fn denoise(p: &DenoiseParams, solver: &SolverConfig) -> Result<DenoiseResult> {
    let (dom, mesh) = grid(p.dim, -1.0, 1.0, p.points)?;
    let coef = [1.0 / 3.0, 1.0 / 4.0, 1.0 / 8.0];
    let u_star = interpolate(|x| x.iter().zip(coef).map(|(x, c)| c * x * x).sum(), &mesh)?.values;
    let noise = normal_noise(u_star.len(), p.noise, p.seed);
    let u0: Vec<f64> = u_star.iter().zip(&noise).map(|(a, b)| a + b).collect();
    let q = assemble_quadrature(&mesh)?;
    let u = sample_boundary(&dom, p.eps)?;
    let blocks = build_convexity_blocks(&mesh, &u, p.eps)?;
    let mut problem = SdmmProblem::new(mesh.num_vertices());
    problem.push(Block::identity(lumped_l2_term(&q, u0.clone())));
    problem.extend(blocks.iter().cloned());
    let solved = run(&problem, solver, &u0, &blocks)?;
    let diff = |v: &[f64]| v.iter().zip(&u_star).map(|(a, b)| a - b).collect::<Vec<_>>();
    Ok(DenoiseResult {
        l2_noisy: lumped_norm(&q.lumped, &diff(&u0)),
        l2_error: lumped_norm(&q.lumped, &diff(&solved.x)),
        linf_error: max_abs_diff(&solved.x, &u_star),
        l2_star: lumped_norm(&q.lumped, &u_star),
        mesh: Arc::new(mesh),
        u_star,
        u0,
        solved,
    })
}

// ------------------------------------------------------- support functions

#[derive(Debug, Clone)]
pub struct SupportParams {
    /// Geodesic frequency of the sphere mesh (`10 f² + 2` directions).
    pub freq: usize,
    pub circles: usize,
    pub circle_step: f64,
    pub noise: f64,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct SupportResult {
    pub sphere: Arc<SphereMesh>,
    pub h_star: Vec<f64>,
    pub h0: Vec<f64>,
    pub solved: Solved,
    pub body: Polytope,
    pub volume: f64,
    pub surface: f64,
    pub widths: WidthStats,
    /// `max_i (h_K(ν_i) − h_i)` for the reconstructed body `K`.
    pub support_excess: f64,
    pub max_change: f64,
}

fn sphere_problem(sphere: &SphereMesh, circles: usize, step: f64, seed: u64) -> Result<Vec<ConstraintBlock>> {
    let c = sample_great_circles(circles, step, seed)?;
    Ok(build_spherical_blocks(sphere, &c)?)
}

fn area_weights(sphere: &SphereMesh) -> Vec<f64> {
    sphere.vertex_weights()
}

/// Noisy support function of the unit icosahedron projected onto the relaxed
/// set of support functions.
pub fn project_support(p: &SupportParams, solver: &SolverConfig) -> Result<SupportResult> {
    let sphere = build_geodesic_sphere(p.freq);
    let h_star = support_of_polytope(&Polytope::icosahedron(), &sphere).values;
    let noise = normal_noise(h_star.len(), p.noise, p.seed);
    let h0: Vec<f64> = h_star.iter().zip(&noise).map(|(a, b)| a + b).collect();
    let blocks = sphere_problem(&sphere, p.circles, p.circle_step, p.seed)?;
    let mut problem = SdmmProblem::new(sphere.len());
    problem.push(Block::identity(ProxTerm::ScaledL2 { target: h0.clone(), weights: area_weights(&sphere) }));
    problem.extend(blocks.iter().cloned());
    let solved = run(&problem, solver, &h0, &blocks)?;
    let rec = reconstruct_body(&sphere, &solved.x)?;
    let support = support_of_polytope(&rec.polytope, &sphere).values;
    Ok(SupportResult {
        support_excess: support.iter().zip(&solved.x).map(|(a, b)| a - b).fold(f64::NEG_INFINITY, f64::max),
        max_change: max_abs_diff(&solved.x, &h0),
        volume: volume(&rec.polytope),
        surface: surface_area(&rec.polytope),
        widths: width_stats(&sphere, &solved.x),
        body: rec.polytope,
        sphere: Arc::new(sphere),
        h_star,
        h0,
        solved,
    })
}

// ------------------------------------------------------------ constant width

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Norm {
    L1,
    L2,
    LInf,
}

impl std::str::FromStr for Norm {
    type Err = anyhow::Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "1" | "l1" => Ok(Norm::L1),
            "2" | "l2" => Ok(Norm::L2),
            "inf" | "linf" | "infinity" => Ok(Norm::LInf),
            _ => anyhow::bail!("unknown norm {s:?} (expected 1, 2 or inf)"),
        }
    }
}

impl std::fmt::Display for Norm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Norm::L1 => "L1",
            Norm::L2 => "L2",
            Norm::LInf => "Linf",
        })
    }
}

#[derive(Debug, Clone)]
pub struct WidthParams {
    pub freq: usize,
    pub circles: usize,
    pub circle_step: f64,
    pub norm: Norm,
    /// Prescribed width, or `None` to leave it free.
    pub alpha: Option<f64>,
    /// Edge length of the regular tetrahedron whose support function is projected.
    pub edge: f64,
    pub seed: u64,
    /// Start from (and project) this field instead of the tetrahedron, if given.
    pub input: Option<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct WidthResult {
    pub sphere: Arc<SphereMesh>,
    pub h0: Vec<f64>,
    pub solved: Solved,
    pub body: Polytope,
    pub volume: f64,
    pub surface: f64,
    pub widths: WidthStats,
}

/// Projection of the regular tetrahedron's support function onto the relaxed
/// set of constant-width support functions in L¹, L² or L∞.
pub fn constant_width(p: &WidthParams, solver: &SolverConfig) -> Result<WidthResult> {
    let sphere = build_geodesic_sphere(p.freq);
    let h0 = match &p.input {
        Some(h) => {
            ensure!(h.len() == sphere.len(), "input field has the wrong length");
            h.clone()
        }
        None => support_of_polytope(&Polytope::regular_tetrahedron(p.edge), &sphere).values,
    };
    let w = area_weights(&sphere);
    let term = match p.norm {
        Norm::L1 => ProxTerm::L1 { target: h0.clone(), weights: w },
        Norm::L2 => ProxTerm::ScaledL2 { target: h0.clone(), weights: w },
        Norm::LInf => ProxTerm::LInf { target: h0.clone(), scale: 1.0 },
    };
    let mut blocks = sphere_problem(&sphere, p.circles, p.circle_step, p.seed)?;
    blocks.push(build_width_block(&sphere, p.alpha)?);
    let mut problem = SdmmProblem::new(sphere.len());
    problem.push(Block::identity(term));
    problem.extend(blocks.iter().cloned());
    let solved = run(&problem, solver, &h0, &blocks)?;
    let rec = reconstruct_body(&sphere, &solved.x)?;
    Ok(WidthResult {
        volume: volume(&rec.polytope),
        surface: surface_area(&rec.polytope),
        widths: width_stats(&sphere, &solved.x),
        body: rec.polytope,
        sphere: Arc::new(sphere),
        h0,
        solved,
    })
}

// ------------------------------------------------------------ principal-agent

#[derive(Debug, Clone)]
pub struct LinearPaParams {
    pub points: usize,
    pub eps: f64,
}

#[derive(Debug, Clone)]
pub struct LinearPaResult {
    pub mesh: Arc<SimplicialMesh>,
    pub solved: Solved,
    pub u_opt: Vec<f64>,
    pub m_value: f64,
    pub m_opt: f64,
    pub m_error: f64,
    pub linf_error: f64,
    /// `M` of the interpolated exact solution and its constraint violation.
    pub m_interpolant: f64,
    pub interpolant_violation: f64,
}

/// Exact solution parameters of the linear problem.
pub const LINEAR_PA_A: f64 = 2.0 / 3.0;

pub fn linear_pa_b() -> f64 {
    (4.0 - 2f64.sqrt()) / 3.0
}

/// `max{0, x₁ − a, x₂ − a, x₁ + x₂ − b}`.
pub fn linear_pa_exact(x: &[f64]) -> f64 {
    let (a, b) = (LINEAR_PA_A, linear_pa_b());
    0f64.max(x[0] - a).max(x[1] - a).max(x[0] + x[1] - b)
}

/// `∫_{[0,1]²} (u − ⟨∇u, x⟩)` for the exact solution. The integrand is `0`,
/// `−a`, `−a` and `−b` on the four pieces, whose areas are obtained by clipping
/// the square with the half-planes where each piece is the maximum.
pub fn linear_pa_optimal_value() -> f64 {
    let (a, b) = (LINEAR_PA_A, linear_pa_b());
    // affine pieces c₀ + c·x
    let pieces = [(0.0, [0.0, 0.0]), (-a, [1.0, 0.0]), (-a, [0.0, 1.0]), (-b, [1.0, 1.0])];
    let mut total = 0.0;
    for (k, &(c0, c)) in pieces.iter().enumerate() {
        let mut poly = vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        for (j, &(d0, d)) in pieces.iter().enumerate() {
            if j != k {
                // keep (c − d)·x + (c0 − d0) ≥ 0
                poly = clip(&poly, [c[0] - d[0], c[1] - d[1]], c0 - d0);
            }
        }
        let area = 0.5
            * (0..poly.len())
                .map(|i| {
                    let (p, q) = (poly[i], poly[(i + 1) % poly.len()]);
                    p[0] * q[1] - p[1] * q[0]
                })
                .sum::<f64>();
        // u − ⟨∇u, x⟩ = c0 on this piece
        total += c0 * area.abs();
    }
    total
}

fn clip(poly: &[[f64; 2]], n: [f64; 2], c: f64) -> Vec<[f64; 2]> {
    let f = |p: &[f64; 2]| n[0] * p[0] + n[1] * p[1] + c;
    let mut out = Vec::new();
    for i in 0..poly.len() {
        let (p, q) = (poly[i], poly[(i + 1) % poly.len()]);
        let (fp, fq) = (f(&p), f(&q));
        if fp >= 0.0 {
            out.push(p);
        }
        if (fp >= 0.0) != (fq >= 0.0) {
            let t = fp / (fp - fq);
            out.push([p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]);
        }
    }
    out
}

/// Minimizes `∫ (u − ⟨∇u, x⟩)` over relaxed convex `u ≥ 0` with `∇u ∈ [0,1]²`.
/// The grid is split along the anti-diagonal, parallel to the solution's
/// oblique crease `x₁ + x₂ = b`.
pub fn linear_pa(p: &LinearPaParams, solver: &SolverConfig) -> Result<LinearPaResult> {
    ensure!(p.points >= 2, "need at least 2 points per axis");
    let dom = Domain::unit_square();
    let mesh = build_grid_mesh_with(&dom, p.points - 1, Diagonal::Anti)?;
    let (term, mut blocks) = assemble_linear_pa(&mesh)?;
    blocks.push(build_lower_bound_block(&mesh, |_| 0.0)?);
    let u = sample_boundary(&dom, p.eps)?;
    blocks.extend(build_convexity_blocks(&mesh, &u, p.eps)?);
    let mut problem = SdmmProblem::new(mesh.num_vertices());
    problem.push(Block::identity(term.clone()));
    problem.extend(blocks.iter().cloned());
    let xi0 = vec![0.0; mesh.num_vertices()];
    let solved = run(&problem, solver, &xi0, &blocks)?;
    let u_opt = interpolate(linear_pa_exact, &mesh)?.values;
    let m_value = term.value(&solved.x);
    let m_opt = linear_pa_optimal_value();
    Ok(LinearPaResult {
        m_interpolant: term.value(&u_opt),
        interpolant_violation: verify_feasibility(&u_opt, &blocks, 0.0).global_max,
        m_error: (m_value - m_opt).abs(),
        linf_error: max_abs_diff(&solved.x, &u_opt),
        mesh: Arc::new(mesh),
        solved,
        u_opt,
        m_value,
        m_opt,
    })
}

#[derive(Debug, Clone)]
pub struct RadialPaParams {
    pub delta: f64,
    pub eps: f64,
    pub oracle_n: usize,
}

#[derive(Debug, Clone)]
pub struct RadialPaResult {
    pub mesh: Arc<SimplicialMesh>,
    pub solved: Solved,
    pub oracle: RadialProfile,
    /// `L(u)` of the computed solution.
    pub l_value: f64,
    /// `2π` times the oracle's radial objective.
    pub l_oracle: f64,
    /// Largest vertex deviation from the oracle profile at the vertex radius.
    pub linf_error: f64,
}

fn geometric_pa(
    mesh: &SimplicialMesh,
    dom: &Domain,
    eps: f64,
    solver: &SolverConfig,
) -> Result<(Solved, Arc<cvxrelax::functionals::QuadraticForm>)> {
    let (form, lower) = assemble_geometric_pa(mesh, |_| 1.0, &[vec![0.0, 0.0]])?;
    let form = Arc::new(form);
    // boundary samples on the meshed boundary so every segment stays inside
    let sample_dom = match dom {
        Domain::Ball { .. } => mesh.boundary_polygon()?,
        d => d.clone(),
    };
    let u = sample_boundary(&sample_dom, eps)?;
    let mut blocks = build_convexity_blocks(mesh, &u, eps)?;
    let xi0 = match &lower.cone {
        Cone::LowerBound { psi } => psi.clone(),
        _ => unreachable!("lower bound block"),
    };
    blocks.push(lower);
    let mut problem = SdmmProblem::new(mesh.num_vertices());
    problem.push(Block::identity(ProxTerm::QuadraticForm(form.clone())));
    problem.extend(blocks.iter().cloned());
    Ok((run(&problem, solver, &xi0, &blocks)?, form))
}

/// Geometric principal-agent problem on the unit disk with `K = {0}`, compared
/// with the radial oracle.
pub fn radial_pa(p: &RadialPaParams, solver: &SolverConfig) -> Result<RadialPaResult> {
    let dom = Domain::disk(1.0);
    let mesh = build_disk_mesh(&dom, p.delta)?;
    let (solved, form) = geometric_pa(&mesh, &dom, p.eps, solver)?;
    let oracle = radial_pa_oracle(p.oracle_n)?;
    let linf_error = (0..mesh.num_vertices())
        .map(|i| {
            let v = mesh.vertex(i);
            (solved.x[i] - oracle.eval(v[0].hypot(v[1]))).abs()
        })
        .fold(0.0, f64::max);
    Ok(RadialPaResult {
        l_value: form.value(&solved.x),
        l_oracle: 2.0 * std::f64::consts::PI * oracle.objective,
        linf_error,
        mesh: Arc::new(mesh),
        solved,
        oracle,
    })
}

#[derive(Debug, Clone)]
pub struct RochetChoneParams {
    pub points: usize,
    pub eps: f64,
}

#[derive(Debug, Clone)]
pub struct RochetChoneResult {
    pub mesh: Arc<SimplicialMesh>,
    pub solved: Solved,
    pub l_value: f64,
    /// Gradient per simplex.
    pub gradients: Vec<[f64; 2]>,
    /// Fraction of the area where `u = 0` (non-participating agents).
    pub zero_fraction: f64,
}

/// Geometric principal-agent problem on `[1, 2]²` with `K = {0}`.
pub fn rochet_chone(p: &RochetChoneParams, solver: &SolverConfig) -> Result<RochetChoneResult> {
    let (dom, mesh) = grid(2, 1.0, 2.0, p.points)?;
    let (solved, form) = geometric_pa(&mesh, &dom, p.eps, solver)?;
    let gradients = (0..mesh.num_simplices())
        .map(|s| {
            let g = mesh.gradient(s, &solved.x);
            [g[0], g[1]]
        })
        .collect();
    let q = assemble_quadrature(&mesh)?;
    let zero_fraction = q.lumped.iter().zip(&solved.x).filter(|(_, u)| **u <= 1e-6).map(|(m, _)| m).sum::<f64>()
        / q.lumped.iter().sum::<f64>();
    Ok(RochetChoneResult { l_value: form.value(&solved.x), gradients, zero_fraction, mesh: Arc::new(mesh), solved })
}

// ------------------------------------------------------------ grid phenomenon

#[derive(Debug, Clone)]
pub struct ChoneParams {
    /// Cells per axis of the unit-square grid.
    pub cells: usize,
    pub eps: f64,
    /// Spacing of the boundary samples (the segment step stays `eps`).
    pub boundary_spacing: f64,
}

#[derive(Debug, Clone)]
pub struct ChoneResult {
    pub mesh: Arc<SimplicialMesh>,
    pub solved: Solved,
    pub f: Vec<f64>,
    pub max_error: f64,
    /// Errors at the corners `(1, 0)` and `(0, 1)`.
    pub corner_error: f64,
}

/// L² projection of `max(0, x + y − 1)` onto the relaxed convex set of a grid.
pub fn chone_lemeur(p: &ChoneParams, solver: &SolverConfig) -> Result<ChoneResult> {
    let (dom, mesh) = grid(2, 0.0, 1.0, p.cells + 1)?;
    let f = interpolate(|x| (x[0] + x[1] - 1.0).max(0.0), &mesh)?.values;
    let q = assemble_quadrature(&mesh)?;
    let u = sample_boundary(&dom, p.boundary_spacing)?;
    let blocks = build_convexity_blocks(&mesh, &u, p.eps)?;
    let mut problem = SdmmProblem::new(mesh.num_vertices());
    problem.push(Block::identity(lumped_l2_term(&q, f.clone())));
    problem.extend(blocks.iter().cloned());
    let solved = run(&problem, solver, &f, &blocks)?;
    let n = p.cells;
    let corners = [n, n * (n + 1)];
    let corner_error = corners.iter().map(|&i| (solved.x[i] - f[i]).abs()).fold(0.0, f64::max);
    Ok(ChoneResult { max_error: max_abs_diff(&solved.x, &f), corner_error, mesh: Arc::new(mesh), solved, f })
}

/// Step sizes that work well at the default resolutions. Lumped L² terms have
/// weights of order `h^d`, so the useful `γ` grows as the grid is refined.
pub const LINEAR_PA_GAMMA: f64 = 300.0;
pub const RADIAL_PA_GAMMA: f64 = 100.0;
pub const DENOISE_GAMMA: f64 = 100.0;
pub const CHONE_GAMMA: f64 = 100.0;
pub const ENVELOPE_GAMMA: f64 = 50.0;
pub const WIDTH_GAMMA: f64 = 1.0;
pub const WIDTH_ITERS: usize = 4000;
pub const WIDTH_CIRCLE_STEP: f64 = 0.05;
