//! Proximable objective terms and the assemblers that turn the variational
//! problems (denoising, principal-agent, constant width) into such terms.
//!
//! Prox convention: `prox_γ f(y) = argmin_x f(x) + (1/γ)‖x − y‖²`.

use crate::cones::{project_uniform_convex_into, project_weighted_cyclic_into, CyclicWorkspace, Hinge1DWorkspace};
use crate::constraints::{build_gradient_box_blocks, build_lower_bound_block, principal_agent_bound, Cone, ConstraintBlock};
use crate::error::{Error, Result};
use crate::linalg::{CsrMatrix, SparseCholesky};
use crate::mesh::SimplicialMesh;
use crate::row::EvalRow;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

/// `f(x) = ½ xᵀ H x + bᵀ x + constant` with `H` symmetric positive semidefinite.
#[derive(Debug, Clone)]
pub struct QuadraticForm {
    pub h: CsrMatrix,
    pub b: Vec<f64>,
    pub constant: f64,
}

impl QuadraticForm {
    pub fn dim(&self) -> usize {
        self.b.len()
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        0.5 * self.h.quad_form(x) + self.b.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + self.constant
    }

    /// `H x + b`.
    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.dim()];
        self.h.mul_vec(x, &mut g);
        g.iter_mut().zip(&self.b).for_each(|(g, b)| *g += b);
        g
    }

    /// Symmetry plus `xᵀHx ≥ 0` on 10 seeded random vectors.
    pub fn validate(&self) -> Result<()> {
        let n = self.dim();
        if self.h.nrows != n || self.h.ncols != n {
            return Err(Error::InvalidInput("quadratic form dimension mismatch".into()));
        }
        let scale = self.h.val.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
        if !self.h.is_symmetric(1e-12 * scale) {
            return Err(Error::InvalidInput("quadratic form is not symmetric".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        for _ in 0..10 {
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let nx: f64 = x.iter().map(|v| v * v).sum();
            if self.h.quad_form(&x) < -1e-10 * scale * nx {
                return Err(Error::InvalidInput("quadratic form is not positive semidefinite".into()));
            }
        }
        Ok(())
    }
}

/// An objective term with a closed-form or exact prox.
#[derive(Debug, Clone)]
pub enum ProxTerm {
    /// `Σ w_i (x_i − t_i)²`.
    ScaledL2 { target: Vec<f64>, weights: Vec<f64> },
    /// `Σ w_i |x_i − t_i|`.
    L1 { target: Vec<f64>, weights: Vec<f64> },
    /// `scale · max_i |x_i − t_i|`.
    LInf { target: Vec<f64>, scale: f64 },
    /// `⟨c, x⟩`.
    Linear { c: Vec<f64> },
    QuadraticForm(Arc<QuadraticForm>),
    /// Indicator of the block cone; the prox is the metric projection.
    Indicator(Cone),
}

impl ProxTerm {
    /// Unweighted `‖x − t‖²`.
    pub fn l2(target: Vec<f64>) -> Self {
        let weights = vec![1.0; target.len()];
        ProxTerm::ScaledL2 { target, weights }
    }

    pub fn is_indicator(&self) -> bool {
        matches!(self, ProxTerm::Indicator(_))
    }

    /// Dimension the term acts on, when fixed by its data.
    pub fn dimension(&self) -> Option<usize> {
        match self {
            ProxTerm::ScaledL2 { target, .. } | ProxTerm::L1 { target, .. } | ProxTerm::LInf { target, .. } => {
                Some(target.len())
            }
            ProxTerm::Linear { c } => Some(c.len()),
            ProxTerm::QuadraticForm(q) => Some(q.dim()),
            ProxTerm::Indicator(cone) => match cone {
                Cone::PairSumEquality { pairing, .. } => Some(pairing.len()),
                Cone::Box { lower, .. } => Some(lower.len()),
                Cone::LowerBound { psi } => Some(psi.len()),
                Cone::Point { target } => Some(target.len()),
                Cone::Halfspace { normal, .. } => Some(normal.len()),
                Cone::UniformConvex1D | Cone::WeightedCyclicConvex1D { .. } => None,
            },
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if let Some(d) = self.dimension() {
            if d != n {
                return Err(Error::InvalidInput(format!("term of dimension {d} on a block of {n} rows")));
            }
        }
        let nonneg = |w: &[f64]| w.iter().all(|v| *v >= 0.0 && v.is_finite());
        match self {
            ProxTerm::ScaledL2 { weights, .. } | ProxTerm::L1 { weights, .. } if weights.len() != n || !nonneg(weights) => {
                Err(Error::InvalidInput("weights must be nonnegative with block length".into()))
            }
            ProxTerm::LInf { scale, .. } if !(*scale >= 0.0) => Err(Error::InvalidInput("L∞ scale must be ≥ 0".into())),
            ProxTerm::QuadraticForm(q) => q.validate(),
            ProxTerm::Indicator(cone) => cone.validate(n),
            _ => Ok(()),
        }
    }

    /// Objective value; indicators contribute 0 (their feasibility is reported separately).
    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            ProxTerm::ScaledL2 { target, weights } => {
                x.iter().zip(target).zip(weights).map(|((x, t), w)| w * (x - t) * (x - t)).sum()
            }
            ProxTerm::L1 { target, weights } => {
                x.iter().zip(target).zip(weights).map(|((x, t), w)| w * (x - t).abs()).sum()
            }
            ProxTerm::LInf { target, scale } => {
                scale * x.iter().zip(target).map(|(x, t)| (x - t).abs()).fold(0.0, f64::max)
            }
            ProxTerm::Linear { c } => c.iter().zip(x).map(|(a, b)| a * b).sum(),
            ProxTerm::QuadraticForm(q) => q.value(x),
            ProxTerm::Indicator(_) => 0.0,
        }
    }

    /// Workspace suited to this term.
    pub fn workspace(&self) -> ProxWorkspace {
        match self {
            ProxTerm::Indicator(Cone::UniformConvex1D) => ProxWorkspace::Hinge(Hinge1DWorkspace::new()),
            ProxTerm::Indicator(Cone::WeightedCyclicConvex1D { .. }) => ProxWorkspace::Cyclic(CyclicWorkspace::new()),
            _ => ProxWorkspace::None,
        }
    }

    /// `out = prox_γ f(y)`.
    pub fn prox_into(&self, gamma: f64, y: &[f64], out: &mut [f64], ws: &mut ProxWorkspace) -> Result<()> {
        debug_assert!(gamma > 0.0);
        match self {
            ProxTerm::ScaledL2 { target, weights } => {
                let ig = 1.0 / gamma;
                for i in 0..y.len() {
                    out[i] = (weights[i] * target[i] + y[i] * ig) / (weights[i] + ig);
                }
            }
            ProxTerm::L1 { target, weights } => {
                for i in 0..y.len() {
                    let u = y[i] - target[i];
                    let th = 0.5 * gamma * weights[i];
                    out[i] = target[i] + u.signum() * (u.abs() - th).max(0.0);
                }
            }
            ProxTerm::LInf { target, scale } => {
                let u: Vec<f64> = y.iter().zip(target).map(|(a, b)| a - b).collect();
                let p = project_l1_ball(&u, 0.5 * gamma * scale);
                for i in 0..y.len() {
                    out[i] = target[i] + u[i] - p[i];
                }
            }
            ProxTerm::Linear { c } => {
                for i in 0..y.len() {
                    out[i] = y[i] - 0.5 * gamma * c[i];
                }
            }
            ProxTerm::QuadraticForm(q) => {
                let refactor = !matches!(ws, ProxWorkspace::Quadratic { gamma: g, .. } if *g == gamma);
                if refactor {
                    let n = q.dim();
                    let mut trip = Vec::with_capacity(q.h.nnz() + n);
                    for r in 0..n {
                        let (cols, vals) = q.h.row(r);
                        trip.extend(cols.iter().zip(vals).map(|(&c, &v)| (r, c, v)));
                        trip.push((r, r, 2.0 / gamma));
                    }
                    let m = CsrMatrix::from_triplets(n, n, trip);
                    *ws = ProxWorkspace::Quadratic { gamma, chol: SparseCholesky::factor(&m, 1e-14)?, scratch: Vec::new() };
                }
                let ProxWorkspace::Quadratic { chol, scratch, .. } = ws else { unreachable!() };
                let rhs: Vec<f64> = y.iter().zip(&q.b).map(|(y, b)| 2.0 / gamma * y - b).collect();
                chol.solve(&rhs, out, scratch);
            }
            ProxTerm::Indicator(cone) => project_onto(cone, y, out, ws),
        }
        Ok(())
    }
}

/// Scratch state reused across prox calls of one term.
#[derive(Debug, Clone, Default)]
pub enum ProxWorkspace {
    #[default]
    None,
    Hinge(Hinge1DWorkspace),
    Cyclic(CyclicWorkspace),
    Quadratic { gamma: f64, chol: SparseCholesky, scratch: Vec<f64> },
}

/// `prox_γ f(y)` with a throwaway workspace.
pub fn prox(term: &ProxTerm, gamma: f64, y: &[f64]) -> Result<Vec<f64>> {
    if !(gamma > 0.0) {
        return Err(Error::InvalidInput("γ must be positive".into()));
    }
    term.validate(y.len())?;
    let mut out = vec![0.0; y.len()];
    term.prox_into(gamma, y, &mut out, &mut term.workspace())?;
    Ok(out)
}

fn project_onto(cone: &Cone, y: &[f64], out: &mut [f64], ws: &mut ProxWorkspace) {
    match cone {
        Cone::UniformConvex1D => {
            if !matches!(ws, ProxWorkspace::Hinge(_)) {
                *ws = ProxWorkspace::Hinge(Hinge1DWorkspace::new());
            }
            let ProxWorkspace::Hinge(h) = ws else { unreachable!() };
            project_uniform_convex_into(y, out, h);
        }
        Cone::WeightedCyclicConvex1D { weight } => {
            if !matches!(ws, ProxWorkspace::Cyclic(_)) {
                *ws = ProxWorkspace::Cyclic(CyclicWorkspace::new());
            }
            let ProxWorkspace::Cyclic(c) = ws else { unreachable!() };
            project_weighted_cyclic_into(y, *weight, out, c);
        }
        Cone::PairSumEquality { pairing, alpha } => {
            out.copy_from_slice(&prox_pair_sum(pairing, *alpha, y));
        }
        Cone::Box { lower, upper } => {
            for i in 0..y.len() {
                out[i] = y[i].clamp(lower[i], upper[i]);
            }
        }
        Cone::LowerBound { psi } => {
            for i in 0..y.len() {
                out[i] = y[i].max(psi[i]);
            }
        }
        Cone::Point { target } => out.copy_from_slice(target),
        Cone::Halfspace { normal, offset } => {
            let ip: f64 = normal.iter().zip(y).map(|(a, b)| a * b).sum();
            let nn: f64 = normal.iter().map(|a| a * a).sum();
            let t = if ip > *offset && nn > 0.0 { (ip - offset) / nn } else { 0.0 };
            for i in 0..y.len() {
                out[i] = y[i] - t * normal[i];
            }
        }
    }
}

/// Projection onto `{g : g_a + g_{pairing[a]} = α}`; with `alpha = None` the
/// common value is free and every pair sum moves to their mean.
pub fn prox_pair_sum(pairing: &[usize], alpha: Option<f64>, y: &[f64]) -> Vec<f64> {
    let pairs: Vec<(usize, usize)> = (0..y.len()).filter(|&a| a < pairing[a]).map(|a| (a, pairing[a])).collect();
    let target = alpha.unwrap_or_else(|| {
        pairs.iter().map(|&(a, b)| y[a] + y[b]).sum::<f64>() / pairs.len().max(1) as f64
    });
    let mut out = y.to_vec();
    for (a, b) in pairs {
        let d = 0.5 * (target - y[a] - y[b]);
        out[a] += d;
        out[b] += d;
    }
    out
}

/// Euclidean projection onto the ℓ¹ ball of the given radius (sort-based).
pub fn project_l1_ball(v: &[f64], radius: f64) -> Vec<f64> {
    let l1: f64 = v.iter().map(|x| x.abs()).sum();
    if l1 <= radius {
        return v.to_vec();
    }
    if radius <= 0.0 {
        return vec![0.0; v.len()];
    }
    let mut u: Vec<f64> = v.iter().map(|x| x.abs()).collect();
    u.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (k, &uk) in u.iter().enumerate() {
        cum += uk;
        let t = (cum - radius) / (k + 1) as f64;
        if uk > t {
            theta = t;
        } else {
            break;
        }
    }
    v.iter().map(|x| x.signum() * (x.abs() - theta).max(0.0)).collect()
}

/// Per-simplex volumes and constant-gradient operators plus lumped vertex masses.
#[derive(Debug, Clone)]
pub struct QuadratureTable {
    pub dim: usize,
    pub volumes: Vec<f64>,
    /// `d × (d+1)` gradient coefficients per simplex, row-major.
    pub gradients: Vec<f64>,
    pub lumped: Vec<f64>,
}

impl QuadratureTable {
    pub fn gradient_matrix(&self, s: usize) -> &[f64] {
        let k = self.dim * (self.dim + 1);
        &self.gradients[s * k..(s + 1) * k]
    }

    /// Rows evaluating the components of the gradient on simplex `s`.
    pub fn gradient_rows(&self, mesh: &SimplicialMesh, s: usize) -> Vec<EvalRow> {
        let g = self.gradient_matrix(s);
        let vs = mesh.simplex(s);
        (0..self.dim)
            .map(|a| EvalRow::new(vs.iter().enumerate().map(|(k, &v)| (v, g[a * (self.dim + 1) + k])).collect()))
            .collect()
    }
}

/// Volumes, gradient operators and lumped masses; every gradient operator is
/// checked to differentiate the coordinate functions exactly.
pub fn assemble_quadrature(mesh: &SimplicialMesh) -> Result<QuadratureTable> {
    let d = mesh.dim();
    let ns = mesh.num_simplices();
    let mut volumes = Vec::with_capacity(ns);
    let mut gradients = Vec::with_capacity(ns * d * (d + 1));
    let mut lumped = vec![0.0; mesh.num_vertices()];
    for s in 0..ns {
        let vol = mesh.simplex_volume(s);
        if !(vol > 0.0) {
            return Err(Error::DegenerateSimplex(s));
        }
        let g = mesh.gradient_coefficients(s);
        let vs = mesh.simplex(s);
        let scale = mesh.diameter().max(1e-300);
        for a in 0..d {
            for b in 0..d {
                let grad: f64 = vs.iter().enumerate().map(|(k, &v)| g[a][k] * mesh.vertex(v)[b]).sum();
                let want = if a == b { 1.0 } else { 0.0 };
                if (grad - want).abs() > 1e-8 * (1.0 + scale) {
                    return Err(Error::DegenerateSimplex(s));
                }
            }
        }
        for row in &g {
            gradients.extend_from_slice(row);
        }
        for &v in vs {
            lumped[v] += vol / (d + 1) as f64;
        }
        volumes.push(vol);
    }
    Ok(QuadratureTable { dim: d, volumes, gradients, lumped })
}

/// `Σ m_i (x_i − t_i)²` with lumped masses `m_i`: the squared L² distance to
/// the interpolant of the target.
pub fn lumped_l2_term(q: &QuadratureTable, target: Vec<f64>) -> ProxTerm {
    ProxTerm::ScaledL2 { target, weights: q.lumped.clone() }
}

/// `∫_T x_a x_b` over a simplex.
fn second_moment(mesh: &SimplicialMesh, s: usize, a: usize, b: usize) -> f64 {
    let d = mesh.dim();
    let vs = mesh.simplex(s);
    let (mut sab, mut sa, mut sb) = (0.0, 0.0, 0.0);
    for &v in vs {
        let p = mesh.vertex(v);
        sab += p[a] * p[b];
        sa += p[a];
        sb += p[b];
    }
    mesh.simplex_volume(s) / ((d + 1) * (d + 2)) as f64 * (sab + sa * sb)
}

/// `(Σ_T w_T vol_T [1_T/(d+1) − G_Tᵀ c_T])`: the vector `c` with
/// `⟨c, ξ⟩ = ∫ (v − ⟨∇v, x⟩) w` for piecewise-constant weights.
fn value_minus_transport(mesh: &SimplicialMesh, q: &QuadratureTable, weight: &[f64]) -> Vec<f64> {
    let d = mesh.dim();
    let mut c = vec![0.0; mesh.num_vertices()];
    for s in 0..mesh.num_simplices() {
        let w = weight[s] * q.volumes[s];
        let g = q.gradient_matrix(s);
        let cen = mesh.centroid(s);
        for (k, &v) in mesh.simplex(s).iter().enumerate() {
            let gc: f64 = (0..d).map(|a| g[a * (d + 1) + k] * cen[a]).sum();
            c[v] += w * (1.0 / (d + 1) as f64 - gc);
        }
    }
    c
}

/// `L(v) = ∫ [v + ½‖∇v − x‖²] ρ` as a quadratic form over nodal values, with
/// `ρ` sampled at simplex centroids, and the lower bound `v ≥ max_{y∈K} ⟨·,y⟩ − ½‖y‖²`.
/// Exact for piecewise-linear `v` and piecewise-constant `ρ`.
pub fn assemble_geometric_pa(
    mesh: &SimplicialMesh,
    rho: impl Fn(&[f64]) -> f64,
    k: &[Vec<f64>],
) -> Result<(QuadraticForm, ConstraintBlock)> {
    let d = mesh.dim();
    let q = assemble_quadrature(mesh)?;
    let rhos: Vec<f64> = (0..mesh.num_simplices()).map(|s| rho(&mesh.centroid(s))).collect();
    if rhos.iter().any(|r| !(*r >= 0.0)) {
        return Err(Error::InvalidInput("density must be nonnegative".into()));
    }
    let mut trip = Vec::new();
    let mut constant = 0.0;
    for s in 0..mesh.num_simplices() {
        let w = rhos[s] * q.volumes[s];
        let g = q.gradient_matrix(s);
        let vs = mesh.simplex(s);
        for (i, &vi) in vs.iter().enumerate() {
            for (j, &vj) in vs.iter().enumerate() {
                let gg: f64 = (0..d).map(|a| g[a * (d + 1) + i] * g[a * (d + 1) + j]).sum();
                trip.push((vi, vj, w * gg));
            }
        }
        constant += 0.5 * rhos[s] * (0..d).map(|a| second_moment(mesh, s, a, a)).sum::<f64>();
    }
    let n = mesh.num_vertices();
    let form = QuadraticForm { h: CsrMatrix::from_triplets(n, n, trip), b: value_minus_transport(mesh, &q, &rhos), constant };
    let lower = build_lower_bound_block(mesh, principal_agent_bound(k))?;
    Ok((form, lower))
}

/// `M(u) = ∫ (u − ⟨∇u, x⟩)` on a planar mesh as a linear term, plus the
/// gradient-box blocks for `∇u ∈ [0,1]²`.
pub fn assemble_linear_pa(mesh: &SimplicialMesh) -> Result<(ProxTerm, Vec<ConstraintBlock>)> {
    if mesh.dim() != 2 {
        return Err(Error::UnsupportedDimension(mesh.dim()));
    }
    let q = assemble_quadrature(mesh)?;
    let c = value_minus_transport(mesh, &q, &vec![1.0; mesh.num_simplices()]);
    let boxes = build_gradient_box_blocks(mesh, &[0.0, 0.0], &[1.0, 1.0])?;
    Ok((ProxTerm::Linear { c }, boxes))
}
