//! Relaxed convexity constraints on discrete segments, great-circle constraints
//! for support functions, width equalities, gradient boxes and lower bounds,
//! all expressed as blocks of evaluation rows paired with a cone.

use crate::error::{Error, Result};
use crate::mesh::SimplicialMesh;
use crate::row::EvalRow;
use crate::sphere::{GreatCircleSample, SphereMesh};

/// The set a block's row values must belong to.
#[derive(Debug, Clone, PartialEq)]
pub enum Cone {
    /// Discrete convex sequences: `2 g_i ≤ g_{i−1} + g_{i+1}`.
    UniformConvex1D,
    /// Cyclic `w g_i ≤ ½ (g_{i−1} + g_{i+1})`.
    WeightedCyclicConvex1D { weight: f64 },
    /// `g_a + g_{pairing[a]} = α` for every pair; `alpha = None` leaves the common value free.
    PairSumEquality { pairing: Vec<usize>, alpha: Option<f64> },
    Box { lower: Vec<f64>, upper: Vec<f64> },
    LowerBound { psi: Vec<f64> },
    Point { target: Vec<f64> },
    /// `⟨normal, g⟩ ≤ offset`.
    Halfspace { normal: Vec<f64>, offset: f64 },
}

impl Cone {
    pub fn tag(&self) -> &'static str {
        match self {
            Cone::UniformConvex1D => "uniform_convex",
            Cone::WeightedCyclicConvex1D { .. } => "weighted_cyclic",
            Cone::PairSumEquality { .. } => "pair_sum",
            Cone::Box { .. } => "box",
            Cone::LowerBound { .. } => "lower_bound",
            Cone::Point { .. } => "point",
            Cone::Halfspace { .. } => "halfspace",
        }
    }

    /// Checks the cone parameters against the number of rows.
    pub fn validate(&self, n: usize) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidInput(m.to_string()));
        match self {
            Cone::UniformConvex1D if n < 3 => bad("uniform convex blocks need at least 3 rows"),
            Cone::WeightedCyclicConvex1D { weight } if n < 4 || !(*weight > 0.0 && *weight <= 1.0) => {
                bad("weighted cyclic blocks need n ≥ 4 and 0 < w ≤ 1")
            }
            Cone::PairSumEquality { pairing, .. } => {
                if pairing.len() != n
                    || pairing.iter().enumerate().any(|(i, &j)| j >= n || j == i || pairing[j] != i)
                {
                    bad("pairing must be a fixed-point-free involution")
                } else {
                    Ok(())
                }
            }
            Cone::Box { lower, upper } => {
                if lower.len() != n || upper.len() != n || lower.iter().zip(upper).any(|(a, b)| a > b) {
                    bad("box bounds must have block length with lower ≤ upper")
                } else {
                    Ok(())
                }
            }
            Cone::LowerBound { psi } if psi.len() != n => bad("lower bound length mismatch"),
            Cone::Point { target } if target.len() != n => bad("point target length mismatch"),
            Cone::Halfspace { normal, .. } if normal.len() != n => bad("halfspace normal length mismatch"),
            _ => Ok(()),
        }
    }

    /// Values of the individual inequality functionals on `s` (nonpositive when
    /// satisfied). Only the convexity cones have a per-triple form; other cones
    /// return an empty list.
    pub fn constraint_values(&self, s: &[f64]) -> Vec<f64> {
        let n = s.len();
        match self {
            Cone::UniformConvex1D => (1..n.saturating_sub(1)).map(|i| s[i] - 0.5 * (s[i - 1] + s[i + 1])).collect(),
            Cone::WeightedCyclicConvex1D { weight } => {
                (0..n).map(|i| weight * s[i] - 0.5 * (s[(i + n - 1) % n] + s[(i + 1) % n])).collect()
            }
            _ => Vec::new(),
        }
    }

    /// Positive part of the largest constraint violation of `s`
    /// (absolute residual for equalities).
    pub fn violation(&self, s: &[f64]) -> f64 {
        let n = s.len();
        let pos = |v: f64| v.max(0.0);
        match self {
            Cone::UniformConvex1D => (1..n.saturating_sub(1))
                .map(|i| pos(s[i] - 0.5 * (s[i - 1] + s[i + 1])))
                .fold(0.0, f64::max),
            Cone::WeightedCyclicConvex1D { weight } => (0..n)
                .map(|i| pos(weight * s[i] - 0.5 * (s[(i + n - 1) % n] + s[(i + 1) % n])))
                .fold(0.0, f64::max),
            Cone::PairSumEquality { pairing, alpha } => {
                let sums: Vec<f64> = (0..n).filter(|&i| i < pairing[i]).map(|i| s[i] + s[pairing[i]]).collect();
                let target = alpha.unwrap_or_else(|| sums.iter().sum::<f64>() / sums.len().max(1) as f64);
                sums.iter().map(|v| (v - target).abs()).fold(0.0, f64::max)
            }
            Cone::Box { lower, upper } => (0..n)
                .map(|i| pos(lower[i] - s[i]).max(pos(s[i] - upper[i])))
                .fold(0.0, f64::max),
            Cone::LowerBound { psi } => (0..n).map(|i| pos(psi[i] - s[i])).fold(0.0, f64::max),
            Cone::Point { target } => (0..n).map(|i| (s[i] - target[i]).abs()).fold(0.0, f64::max),
            Cone::Halfspace { normal, offset } => {
                pos(normal.iter().zip(s).map(|(a, b)| a * b).sum::<f64>() - offset)
            }
        }
    }
}

/// A stack of evaluation rows `L_i` paired with the set its values must lie in.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintBlock {
    pub rows: Vec<EvalRow>,
    pub cone: Cone,
}

impl ConstraintBlock {
    pub fn new(rows: Vec<EvalRow>, cone: Cone) -> Result<Self> {
        cone.validate(rows.len())?;
        Ok(ConstraintBlock { rows, cone })
    }

    /// Block acting on all `n` coordinates directly.
    pub fn identity(n: usize, cone: Cone) -> Result<Self> {
        Self::new((0..n).map(EvalRow::unit).collect(), cone)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn values(&self, x: &[f64]) -> Vec<f64> {
        self.rows.iter().map(|r| r.apply(x)).collect()
    }

    pub fn violation(&self, x: &[f64]) -> f64 {
        self.cone.violation(&self.values(x))
    }
}

/// Discrete segment `p + εi(q−p)/‖q−p‖`, `0 ≤ i ≤ ‖q−p‖/ε`.
pub fn discrete_segment(p: &[f64], q: &[f64], eps: f64) -> Vec<Vec<f64>> {
    let len = p.iter().zip(q).map(|(a, b)| (b - a).powi(2)).sum::<f64>().sqrt();
    if len == 0.0 || !(eps > 0.0) {
        return vec![p.to_vec()];
    }
    let m = (len / eps * (1.0 + 1e-12)).floor() as usize;
    (0..=m)
        .map(|i| {
            let t = eps * i as f64 / len;
            p.iter().zip(q).map(|(a, b)| a + t * (b - a)).collect()
        })
        .collect()
}

/// Convexity gap `g(z) − λ g(x) − (1−λ) g(y)` with `λ = ‖zy‖/‖xy‖`.
/// `g` holds the values at `(x, y, z)`.
pub fn ell_xyz(g: [f64; 3], x: &[f64], y: &[f64], z: &[f64]) -> Result<f64> {
    let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(u, v)| (u - v).powi(2)).sum::<f64>().sqrt();
    let xy = dist(x, y);
    let (xz, zy) = (dist(x, z), dist(z, y));
    if xy == 0.0 || (xz + zy - xy).abs() > 1e-9 * xy.max(1.0) {
        return Err(Error::InvalidInput("z must lie on the segment [x, y]".into()));
    }
    let lam = zy / xy;
    Ok(g[2] - lam * g[0] - (1.0 - lam) * g[1])
}

/// One uniform-convexity block per unordered pair of `U_ε` whose discrete segment
/// keeps at least 3 points inside the mesh. Points within `1e-6 · diam` of the mesh
/// are snapped; the longest run of located points is kept.
pub fn build_convexity_blocks(mesh: &SimplicialMesh, u: &[Vec<f64>], eps: f64) -> Result<Vec<ConstraintBlock>> {
    if !(eps > 0.0) || u.len() < 2 {
        return Err(Error::InvalidInput("need ε > 0 and at least two boundary samples".into()));
    }
    let tol = 1e-6 * mesh.diameter();
    let mut blocks = Vec::new();
    for a in 0..u.len() {
        for b in a + 1..u.len() {
            if let Some(rows) = segment_rows(mesh, &u[a], &u[b], eps, tol) {
                blocks.push(ConstraintBlock { rows, cone: Cone::UniformConvex1D });
            }
        }
    }
    Ok(blocks)
}

/// Rows for the located part of the discrete segment from `p` to `q`, if at least 3.
pub fn segment_rows(mesh: &SimplicialMesh, p: &[f64], q: &[f64], eps: f64, tol: f64) -> Option<Vec<EvalRow>> {
    let pts = discrete_segment(p, q, eps);
    if pts.len() < 3 {
        return None;
    }
    let mut best: Vec<EvalRow> = Vec::new();
    let mut cur: Vec<EvalRow> = Vec::new();
    for x in &pts {
        match mesh.interpolation_row_tol(x, tol) {
            Ok(r) => cur.push(r),
            Err(_) => {
                if cur.len() > best.len() {
                    best = std::mem::take(&mut cur);
                }
                cur.clear();
            }
        }
    }
    if cur.len() > best.len() {
        best = cur;
    }
    (best.len() >= 3).then_some(best)
}

/// One weighted cyclic block per great circle; rows interpolate the nodal sphere
/// field at the circle points with gnomonic weights, `w = cos ε`.
pub fn build_spherical_blocks(sphere: &SphereMesh, circles: &[GreatCircleSample]) -> Result<Vec<ConstraintBlock>> {
    if sphere.dim() != 3 {
        return Err(Error::UnsupportedDimension(sphere.dim()));
    }
    let mut hint = 0;
    circles
        .iter()
        .map(|c| {
            let rows = c
                .points
                .iter()
                .map(|p| {
                    let n = crate::sphere::dot3(p, p).sqrt();
                    if (n - 1.0).abs() > 1e-9 {
                        return Err(Error::InvalidInput("circle point off the unit sphere".into()));
                    }
                    sphere.interpolation_row(p, &mut hint)
                })
                .collect::<Result<Vec<_>>>()?;
            ConstraintBlock::new(rows, Cone::WeightedCyclicConvex1D { weight: c.weight })
        })
        .collect()
}

/// For a circle mesh (d = 2) the whole direction set is one closed equispaced
/// circle: a single cyclic block with `w = cos(2π/n)`.
pub fn build_circle_block(sphere: &SphereMesh) -> Result<ConstraintBlock> {
    if sphere.dim() != 2 {
        return Err(Error::UnsupportedDimension(sphere.dim()));
    }
    let n = sphere.len();
    ConstraintBlock::identity(n, Cone::WeightedCyclicConvex1D { weight: (2.0 * std::f64::consts::PI / n as f64).cos() })
}

/// Constant-width equalities `h(ν) + h(−ν) = α` over all antipodal pairs.
pub fn build_width_block(sphere: &SphereMesh, alpha: Option<f64>) -> Result<ConstraintBlock> {
    if let Some(a) = alpha {
        if !(a > 0.0) {
            return Err(Error::InvalidInput("width must be positive".into()));
        }
    }
    ConstraintBlock::identity(sphere.len(), Cone::PairSumEquality { pairing: sphere.antipode().to_vec(), alpha })
}

/// Per-simplex gradient rows constrained to the box `[lower, upper]`. Each row
/// is normalized to unit length (bounds scaled alike), which leaves the feasible
/// set unchanged and keeps these rows on the same scale as interpolation rows.
pub fn build_gradient_box_blocks(mesh: &SimplicialMesh, lower: &[f64], upper: &[f64]) -> Result<Vec<ConstraintBlock>> {
    let d = mesh.dim();
    if lower.len() != d || upper.len() != d {
        return Err(Error::InvalidInput("box bounds must have the mesh dimension".into()));
    }
    (0..mesh.num_simplices())
        .map(|s| {
            let vs = mesh.simplex(s);
            let (mut rows, mut lo, mut hi) = (Vec::with_capacity(d), Vec::with_capacity(d), Vec::with_capacity(d));
            for (a, g) in mesh.gradient_coefficients(s).iter().enumerate() {
                let t = 1.0 / g.iter().map(|v| v * v).sum::<f64>().sqrt();
                rows.push(EvalRow::new(vs.iter().copied().zip(g.iter().map(|v| v * t)).collect()));
                lo.push(lower[a] * t);
                hi.push(upper[a] * t);
            }
            ConstraintBlock::new(rows, Cone::Box { lower: lo, upper: hi })
        })
        .collect()
}

/// `ξ ≥ ψ` at every vertex.
pub fn build_lower_bound_block(mesh: &SimplicialMesh, psi: impl Fn(&[f64]) -> f64) -> Result<ConstraintBlock> {
    let psi: Vec<f64> = (0..mesh.num_vertices()).map(|i| psi(mesh.vertex(i))).collect();
    if psi.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite lower bound".into()));
    }
    ConstraintBlock::identity(mesh.num_vertices(), Cone::LowerBound { psi })
}

/// The lower bound `max_{y∈K} ⟨x, y⟩ − ½‖y‖²`.
pub fn principal_agent_bound(k: &[Vec<f64>]) -> impl Fn(&[f64]) -> f64 + '_ {
    move |x: &[f64]| {
        k.iter()
            .map(|y| x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>() - 0.5 * y.iter().map(|b| b * b).sum::<f64>())
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Per-block violations of `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintViolationReport {
    pub per_block: Vec<f64>,
    pub global_max: f64,
    pub worst_block: Option<usize>,
    pub tol: f64,
}

impl ConstraintViolationReport {
    pub fn is_feasible(&self) -> bool {
        self.global_max <= self.tol
    }
}

pub fn verify_feasibility(x: &[f64], blocks: &[ConstraintBlock], tol: f64) -> ConstraintViolationReport {
    let per_block: Vec<f64> = blocks.iter().map(|b| b.violation(x)).collect();
    let mut worst = None;
    let mut gm = 0.0;
    for (i, &v) in per_block.iter().enumerate() {
        if v > gm || (worst.is_none() && v >= gm) {
            gm = v;
            worst = Some(i);
        }
    }
    ConstraintViolationReport { per_block, global_max: gm, worst_block: worst, tol }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_grid_mesh, interpolate, sample_boundary, Domain};

    #[test]
    fn segment_examples() {
        let s = discrete_segment(&[0.0, 0.0], &[1.0, 0.0], 0.3);
        assert_eq!(s.len(), 4);
        for (i, p) in s.iter().enumerate() {
            assert!((p[0] - 0.3 * i as f64).abs() < 1e-15 && p[1] == 0.0);
        }
        assert_eq!(discrete_segment(&[0.0, 0.0], &[1.0, 0.0], 1.0).len(), 2);
        assert_eq!(discrete_segment(&[0.0, 0.0], &[1.0, 0.0], 1.5).len(), 1);
    }

    #[test]
    fn ell_examples() {
        let (x, y, z) = ([0.0, 0.0], [1.0, 1.0], [0.5, 0.5]);
        let g = |p: &[f64]| (p[0] + p[1] - 1.0).max(0.0);
        assert!((ell_xyz([g(&x), g(&y), g(&z)], &x, &y, &z).unwrap() + 0.5).abs() < 1e-15);
        let aff = |p: &[f64]| 2.0 * p[0] - p[1] + 0.3;
        let z2 = [0.2, 0.2];
        assert!(ell_xyz([aff(&x), aff(&y), aff(&z2)], &x, &y, &z2).unwrap().abs() < 1e-15);
        let eps = 0.1;
        let sq = |t: f64| t * t;
        let v = ell_xyz([sq(0.0), sq(2.0 * eps), sq(eps)], &[0.0], &[2.0 * eps], &[eps]).unwrap();
        assert!((v + eps * eps).abs() < 1e-15);
        assert!(ell_xyz([0.0; 3], &x, &y, &[0.7, 0.1]).is_err());
    }

    #[test]
    fn corner_pairs_on_square() {
        let m = build_grid_mesh(&Domain::unit_square(), 4).unwrap();
        let u = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0]];
        let blocks = build_convexity_blocks(&m, &u, 0.5).unwrap();
        // four sides of length 1 give 3 points, two diagonals 3 points (i ≤ 2.83)
        assert_eq!(blocks.len(), 6);
        assert!(blocks.iter().all(|b| b.len() == 3));
    }

    #[test]
    fn rows_reproduce_segment_points_and_affine_fields() {
        let m = build_grid_mesh(&Domain::unit_square(), 6).unwrap();
        let u = sample_boundary(&Domain::unit_square(), 0.25).unwrap();
        let eps = 0.1;
        let blocks = build_convexity_blocks(&m, &u, eps).unwrap();
        let xs: Vec<f64> = (0..m.num_vertices()).map(|i| m.vertex(i)[0]).collect();
        let ys: Vec<f64> = (0..m.num_vertices()).map(|i| m.vertex(i)[1]).collect();
        let aff = interpolate(|p| 3.0 * p[0] - 2.0 * p[1] + 1.0, &m).unwrap();
        for b in &blocks {
            let px = b.values(&xs);
            let py = b.values(&ys);
            for i in 1..b.len() {
                let step = ((px[i] - px[i - 1]).powi(2) + (py[i] - py[i - 1]).powi(2)).sqrt();
                assert!((step - eps).abs() < 1e-12);
            }
            assert!(b.violation(&aff.values) < 1e-12);
        }
        let r = verify_feasibility(&aff.values, &blocks, 1e-12);
        assert!(r.is_feasible());
    }

    #[test]
    fn crease_is_infeasible_for_small_eps() {
        let m = build_grid_mesh(&Domain::unit_square(), 10).unwrap();
        let f = interpolate(|p| (p[0] + p[1] - 1.0).max(0.0), &m).unwrap();
        let eps = m.delta() / 4.0;
        let u = sample_boundary(&Domain::unit_square(), 0.1).unwrap();
        let blocks = build_convexity_blocks(&m, &u, eps).unwrap();
        let r = verify_feasibility(&f.values, &blocks, 1e-12);
        assert!(r.global_max > 1e-6);
    }

    #[test]
    fn gradient_rows_on_unit_triangle() {
        let m = SimplicialMesh::new(2, vec![0.0, 0.0, 1.0, 0.0, 0.0, 1.0], vec![0, 1, 2]).unwrap();
        let b = build_gradient_box_blocks(&m, &[0.0, 0.0], &[1.0, 1.0]).unwrap();
        let u = [0.3, 1.1, -0.4];
        // rows are normalized: ∂ₓ has coefficients (−1, 1, 0)/√2
        let g = b[0].values(&u);
        let r2 = 2f64.sqrt();
        assert!((g[0] * r2 - 0.8).abs() < 1e-15 && (g[1] * r2 + 0.7).abs() < 1e-15);
        assert_eq!(b[0].cone, Cone::Box { lower: vec![0.0, 0.0], upper: vec![1.0 / r2, 1.0 / r2] });
        let grid = build_grid_mesh(&Domain::unit_square(), 5).unwrap();
        let blocks = build_gradient_box_blocks(&grid, &[0.0, 0.0], &[1.0, 1.0]).unwrap();
        let ok = interpolate(|p| 0.5 * p[0] + 0.5 * p[1], &grid).unwrap();
        let bad = interpolate(|p| 2.0 * p[0], &grid).unwrap();
        assert!(verify_feasibility(&ok.values, &blocks, 1e-12).is_feasible());
        for b in &blocks {
            // ∂ₓu = 2 exceeds 1 by 1, scaled by h/√2
            assert!((b.violation(&bad.values) - 0.2 / 2f64.sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn lower_bound_examples() {
        let m = build_grid_mesh(&Domain::unit_square(), 3).unwrap();
        let k0 = vec![vec![0.0, 0.0]];
        let b = build_lower_bound_block(&m, principal_agent_bound(&k0)).unwrap();
        assert!(matches!(&b.cone, Cone::LowerBound { psi } if psi.iter().all(|&v| v == 0.0)));
        let k1 = vec![vec![0.4, -0.2]];
        let psi = principal_agent_bound(&k1);
        let b = build_lower_bound_block(&m, &psi).unwrap();
        let v = interpolate(&psi, &m).unwrap();
        assert_eq!(b.violation(&v.values), 0.0);
    }

    #[test]
    fn width_block_pairs() {
        let s = crate::sphere::build_sphere_mesh(1);
        let b = build_width_block(&s, Some(2.0)).unwrap();
        assert_eq!(b.violation(&vec![1.0; s.len()]), 0.0);
        let cube: Vec<f64> = s.directions().iter().map(|d| d[0].abs() + d[1].abs() + d[2].abs()).collect();
        let b = build_width_block(&s, Some(2.0 * 3f64.sqrt())).unwrap();
        assert!(b.violation(&cube) > 0.1);
    }

    #[test]
    fn constant_field_on_circles_gives_cos_eps_minus_one() {
        let s = crate::sphere::build_sphere_mesh(2);
        let circles = crate::sphere::sample_great_circles(3, 0.2, 5).unwrap();
        let blocks = build_spherical_blocks(&s, &circles).unwrap();
        for (b, c) in blocks.iter().zip(&circles) {
            let Cone::WeightedCyclicConvex1D { weight } = b.cone else { panic!() };
            assert_eq!(weight, c.eps.cos());
            for v in b.cone.constraint_values(&vec![1.0; b.len()]) {
                assert!((v - (c.eps.cos() - 1.0)).abs() < 1e-15);
            }
        }
    }
}
