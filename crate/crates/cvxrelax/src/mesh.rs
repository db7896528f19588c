//! Convex domains, simplicial meshes, boundary samplings and the nodal
//! piecewise-linear interpolation operator.

use crate::error::{Error, Result};
use crate::row::EvalRow;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::OnceLock;

/// A bounded convex domain in dimension 2 or 3.
#[derive(Debug, Clone, PartialEq)]
pub enum Domain {
    Box { lower: Vec<f64>, upper: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
    /// Counterclockwise convex polygon.
    Polygon { vertices: Vec<[f64; 2]> },
}

impl Domain {
    pub fn unit_square() -> Self {
        Domain::Box { lower: vec![0.0, 0.0], upper: vec![1.0, 1.0] }
    }

    pub fn cube(lower: f64, upper: f64, dim: usize) -> Self {
        Domain::Box { lower: vec![lower; dim], upper: vec![upper; dim] }
    }

    pub fn disk(radius: f64) -> Self {
        Domain::Ball { center: vec![0.0, 0.0], radius }
    }

    pub fn dim(&self) -> usize {
        match self {
            Domain::Box { lower, .. } => lower.len(),
            Domain::Ball { center, .. } => center.len(),
            Domain::Polygon { .. } => 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        if d != 2 && d != 3 {
            return Err(Error::UnsupportedDimension(d));
        }
        match self {
            Domain::Box { lower, upper } => {
                if upper.len() != d || lower.iter().zip(upper).any(|(a, b)| !(a < b)) {
                    return Err(Error::InvalidInput("box needs lower < upper componentwise".into()));
                }
            }
            Domain::Ball { radius, .. } => {
                if !(*radius > 0.0) {
                    return Err(Error::InvalidInput("ball radius must be positive".into()));
                }
            }
            Domain::Polygon { vertices } => {
                let n = vertices.len();
                if n < 3 {
                    return Err(Error::InvalidInput("polygon needs at least 3 vertices".into()));
                }
                for i in 0..n {
                    let (a, b, c) = (vertices[i], vertices[(i + 1) % n], vertices[(i + 2) % n]);
                    let cross = (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0]);
                    if cross < -1e-12 {
                        return Err(Error::InvalidInput(
                            "polygon must be convex and counterclockwise".into(),
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn volume(&self) -> f64 {
        match self {
            Domain::Box { lower, upper } => lower.iter().zip(upper).map(|(a, b)| b - a).product(),
            Domain::Ball { center, radius } => match center.len() {
                2 => PI * radius * radius,
                _ => 4.0 / 3.0 * PI * radius.powi(3),
            },
            Domain::Polygon { vertices } => polygon_area(vertices),
        }
    }

    pub fn diameter(&self) -> f64 {
        match self {
            Domain::Box { lower, upper } => {
                lower.iter().zip(upper).map(|(a, b)| (b - a) * (b - a)).sum::<f64>().sqrt()
            }
            Domain::Ball { radius, .. } => 2.0 * radius,
            Domain::Polygon { vertices } => {
                let mut d: f64 = 0.0;
                for a in vertices {
                    for b in vertices {
                        d = d.max(((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt());
                    }
                }
                d
            }
        }
    }

    /// Dense points on the boundary with spacing at most `spacing`, for covering checks.
    pub fn probe_boundary(&self, spacing: f64) -> Vec<Vec<f64>> {
        match self {
            Domain::Box { lower, upper } if lower.len() == 2 => {
                let c = box_corners_2d(lower, upper);
                polygon_edge_fill(&c, spacing, true)
            }
            Domain::Box { lower, upper } => box_surface_grid(lower, upper, spacing),
            Domain::Ball { center, radius } if center.len() == 2 => {
                let n = ((2.0 * PI * radius / spacing).ceil() as usize).max(3);
                (0..n)
                    .map(|k| {
                        let t = 2.0 * PI * k as f64 / n as f64;
                        vec![center[0] + radius * t.cos(), center[1] + radius * t.sin()]
                    })
                    .collect()
            }
            Domain::Ball { center, radius } => {
                let n = ((4.0 * PI * radius * radius / (spacing * spacing)).ceil() as usize).max(20);
                fibonacci_sphere(n)
                    .into_iter()
                    .map(|p| (0..3).map(|k| center[k] + radius * p[k]).collect())
                    .collect()
            }
            Domain::Polygon { vertices } => polygon_edge_fill(vertices, spacing, true),
        }
    }
}

fn polygon_area(v: &[[f64; 2]]) -> f64 {
    let n = v.len();
    0.5 * (0..n)
        .map(|i| {
            let (a, b) = (v[i], v[(i + 1) % n]);
            a[0] * b[1] - a[1] * b[0]
        })
        .sum::<f64>()
}

fn box_corners_2d(lo: &[f64], hi: &[f64]) -> Vec<[f64; 2]> {
    vec![[lo[0], lo[1]], [hi[0], lo[1]], [hi[0], hi[1]], [lo[0], hi[1]]]
}

/// Polygon vertices followed by equally spaced interior edge points (spacing ≤ `eps`).
fn polygon_edge_fill(v: &[[f64; 2]], eps: f64, include_vertices: bool) -> Vec<Vec<f64>> {
    let n = v.len();
    let mut out: Vec<Vec<f64>> = Vec::new();
    if include_vertices {
        out.extend(v.iter().map(|p| p.to_vec()));
    }
    for i in 0..n {
        let (a, b) = (v[i], v[(i + 1) % n]);
        let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
        let m = (len / eps - 1e-12).ceil().max(1.0) as usize;
        for k in 1..m {
            let t = k as f64 / m as f64;
            out.push(vec![a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
        }
    }
    out
}

/// Lattice points on the surface of a 3D box, spacing ≤ `eps` along each face axis
/// (corners and edges included).
fn box_surface_grid(lo: &[f64], hi: &[f64], eps: f64) -> Vec<Vec<f64>> {
    let m: Vec<usize> = (0..3).map(|k| ((hi[k] - lo[k]) / eps - 1e-12).ceil().max(1.0) as usize).collect();
    let mut out = Vec::new();
    for i in 0..=m[0] {
        for j in 0..=m[1] {
            for k in 0..=m[2] {
                let on = i == 0 || i == m[0] || j == 0 || j == m[1] || k == 0 || k == m[2];
                if on {
                    let idx = [i, j, k];
                    out.push(
                        (0..3)
                            .map(|a| lo[a] + (hi[a] - lo[a]) * idx[a] as f64 / m[a] as f64)
                            .collect(),
                    );
                }
            }
        }
    }
    out
}

pub(crate) fn fibonacci_sphere(n: usize) -> Vec<[f64; 3]> {
    let ga = PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|k| {
            let z = 1.0 - (2.0 * k as f64 + 1.0) / n as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let t = ga * k as f64;
            [r * t.cos(), r * t.sin(), z]
        })
        .collect()
}

/// Boundary sampling `U_ε`: corners (or extreme points) first, then equally spaced
/// fill of edges, faces or arcs with spacing at most `eps`. Duplicates are removed.
pub fn sample_boundary(domain: &Domain, eps: f64) -> Result<Vec<Vec<f64>>> {
    domain.validate()?;
    if !(eps > 0.0) {
        return Err(Error::InvalidInput("sampling step must be positive".into()));
    }
    let pts = match domain {
        Domain::Box { lower, upper } if lower.len() == 2 => {
            polygon_edge_fill(&box_corners_2d(lower, upper), eps, true)
        }
        Domain::Box { lower, upper } => {
            let mut pts = box_surface_grid(lower, upper, eps);
            // corners first
            pts.sort_by_key(|p| {
                let on = p.iter().enumerate().filter(|(a, x)| **x == lower[*a] || **x == upper[*a]).count();
                std::cmp::Reverse(on)
            });
            pts
        }
        Domain::Ball { center, radius } if center.len() == 2 => {
            let n = ((2.0 * PI * radius / eps - 1e-12).ceil() as usize).max(3);
            (0..n)
                .map(|k| {
                    let t = 2.0 * PI * k as f64 / n as f64;
                    vec![center[0] + radius * t.cos(), center[1] + radius * t.sin()]
                })
                .collect()
        }
        Domain::Ball { center, radius } => {
            // geodesic sphere whose edges are shorter than eps
            let freq = ((1.3 * radius / eps).ceil() as usize).max(1);
            let s = crate::sphere::build_geodesic_sphere(freq);
            s.directions()
                .iter()
                .map(|p| (0..3).map(|k| center[k] + radius * p[k]).collect())
                .collect()
        }
        Domain::Polygon { vertices } => polygon_edge_fill(vertices, eps, true),
    };
    Ok(dedup_points(pts, 1e-12 * domain.diameter().max(1.0)))
}

fn dedup_points(pts: Vec<Vec<f64>>, tol: f64) -> Vec<Vec<f64>> {
    let mut seen: HashMap<Vec<i64>, ()> = HashMap::new();
    let mut out = Vec::with_capacity(pts.len());
    for p in pts {
        let key: Vec<i64> = p.iter().map(|x| (x / tol.max(1e-300) / 1e3).round() as i64).collect();
        if seen.insert(key, ()).is_none() {
            out.push(p);
        }
    }
    out
}

/// A conforming simplicial mesh (triangles in 2D, tetrahedra in 3D).
#[derive(Debug)]
pub struct SimplicialMesh {
    dim: usize,
    coords: Vec<f64>,
    simplices: Vec<usize>,
    boundary: Vec<usize>,
    delta: f64,
    volumes: Vec<f64>,
    /// Per simplex, the row-major inverse of `[v1−v0 … vd−v0]`.
    inv: Vec<f64>,
    locator: OnceLock<Locator>,
}

impl Clone for SimplicialMesh {
    fn clone(&self) -> Self {
        SimplicialMesh {
            dim: self.dim,
            coords: self.coords.clone(),
            simplices: self.simplices.clone(),
            boundary: self.boundary.clone(),
            delta: self.delta,
            volumes: self.volumes.clone(),
            inv: self.inv.clone(),
            locator: OnceLock::new(),
        }
    }
}

impl SimplicialMesh {
    /// Builds a mesh from flat coordinates (`dim` per vertex) and flat simplices
    /// (`dim + 1` per simplex). Boundary vertices are those on facets used once.
    pub fn new(dim: usize, coords: Vec<f64>, simplices: Vec<usize>) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::UnsupportedDimension(dim));
        }
        let nv = coords.len() / dim;
        if coords.len() % dim != 0 || simplices.len() % (dim + 1) != 0 {
            return Err(Error::InvalidInput("ragged coordinate or simplex array".into()));
        }
        if simplices.iter().any(|&v| v >= nv) {
            return Err(Error::InvalidInput("simplex references a missing vertex".into()));
        }
        let ns = simplices.len() / (dim + 1);
        let mut volumes = Vec::with_capacity(ns);
        let mut inv = Vec::with_capacity(ns * dim * dim);
        let mut delta: f64 = 0.0;
        let fact = if dim == 2 { 0.5 } else { 1.0 / 6.0 };
        for s in 0..ns {
            let vs = &simplices[s * (dim + 1)..(s + 1) * (dim + 1)];
            let v0 = &coords[vs[0] * dim..vs[0] * dim + dim];
            let mut t = [0.0; 9];
            for k in 0..dim {
                let vk = &coords[vs[k + 1] * dim..vs[k + 1] * dim + dim];
                for c in 0..dim {
                    t[c * dim + k] = vk[c] - v0[c];
                }
            }
            let (det, m) = invert_small(&t[..dim * dim], dim);
            let scale = (0..dim * dim).map(|k| t[k].abs()).fold(0.0, f64::max);
            if det.abs() <= 1e-14 * scale.powi(dim as i32) {
                return Err(Error::DegenerateSimplex(s));
            }
            volumes.push(det.abs() * fact);
            inv.extend_from_slice(&m[..dim * dim]);
            for a in 0..=dim {
                for b in a + 1..=dim {
                    let pa = &coords[vs[a] * dim..vs[a] * dim + dim];
                    let pb = &coords[vs[b] * dim..vs[b] * dim + dim];
                    let l = pa.iter().zip(pb).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
                    delta = delta.max(l);
                }
            }
        }
        let mut facets: HashMap<Vec<usize>, usize> = HashMap::new();
        for s in 0..ns {
            let vs = &simplices[s * (dim + 1)..(s + 1) * (dim + 1)];
            for skip in 0..=dim {
                let mut f: Vec<usize> =
                    vs.iter().enumerate().filter(|(k, _)| *k != skip).map(|(_, &v)| v).collect();
                f.sort_unstable();
                *facets.entry(f).or_insert(0) += 1;
            }
        }
        let mut on_b = vec![false; nv];
        for (f, c) in &facets {
            if *c == 1 {
                for &v in f {
                    on_b[v] = true;
                }
            }
        }
        let boundary = (0..nv).filter(|&v| on_b[v]).collect();
        Ok(SimplicialMesh { dim, coords, simplices, boundary, delta, volumes, inv, locator: OnceLock::new() })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_vertices(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn num_simplices(&self) -> usize {
        self.volumes.len()
    }

    pub fn vertex(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn simplex(&self, s: usize) -> &[usize] {
        &self.simplices[s * (self.dim + 1)..(s + 1) * (self.dim + 1)]
    }

    pub fn boundary_vertices(&self) -> &[usize] {
        &self.boundary
    }

    /// Maximum edge length δ.
    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn simplex_volume(&self, s: usize) -> f64 {
        self.volumes[s]
    }

    pub fn total_volume(&self) -> f64 {
        self.volumes.iter().sum()
    }

    pub fn centroid(&self, s: usize) -> Vec<f64> {
        let d = self.dim;
        let mut c = vec![0.0; d];
        for &v in self.simplex(s) {
            for k in 0..d {
                c[k] += self.vertex(v)[k] / (d + 1) as f64;
            }
        }
        c
    }

    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        let d = self.dim;
        let mut lo = vec![f64::INFINITY; d];
        let mut hi = vec![f64::NEG_INFINITY; d];
        for i in 0..self.num_vertices() {
            for k in 0..d {
                lo[k] = lo[k].min(self.vertex(i)[k]);
                hi[k] = hi[k].max(self.vertex(i)[k]);
            }
        }
        (lo, hi)
    }

    pub fn diameter(&self) -> f64 {
        let (lo, hi) = self.bounding_box();
        lo.iter().zip(&hi).map(|(a, b)| (b - a).powi(2)).sum::<f64>().sqrt()
    }

    /// Gradient coefficients of the P1 basis on simplex `s`: entry `[c][k]` is
    /// `∂λ_k/∂x_c` for the `k`-th local vertex.
    pub fn gradient_coefficients(&self, s: usize) -> Vec<Vec<f64>> {
        let d = self.dim;
        let inv = &self.inv[s * d * d..(s + 1) * d * d];
        (0..d)
            .map(|c| {
                let mut row = vec![0.0; d + 1];
                for k in 1..=d {
                    row[k] = inv[(k - 1) * d + c];
                    row[0] -= row[k];
                }
                row
            })
            .collect()
    }

    /// Constant gradient of the P1 field `values` on simplex `s`.
    pub fn gradient(&self, s: usize, values: &[f64]) -> Vec<f64> {
        let vs = self.simplex(s);
        self.gradient_coefficients(s)
            .iter()
            .map(|row| row.iter().zip(vs).map(|(g, &v)| g * values[v]).sum())
            .collect()
    }

    /// Barycentric coordinates of `x` with respect to simplex `s`.
    pub fn barycentric(&self, s: usize, x: &[f64]) -> [f64; 4] {
        let d = self.dim;
        let inv = &self.inv[s * d * d..(s + 1) * d * d];
        let v0 = self.vertex(self.simplex(s)[0]);
        let mut lam = [0.0; 4];
        let mut sum = 0.0;
        for k in 0..d {
            let mut acc = 0.0;
            for c in 0..d {
                acc += inv[k * d + c] * (x[c] - v0[c]);
            }
            lam[k + 1] = acc;
            sum += acc;
        }
        lam[0] = 1.0 - sum;
        lam
    }

    fn locator(&self) -> &Locator {
        self.locator.get_or_init(|| Locator::new(self))
    }

    /// Locates `x`, snapping points within `tol` of the mesh. Returns the simplex
    /// and nonnegative barycentric weights summing to one.
    pub fn locate(&self, x: &[f64], tol: f64) -> Result<(usize, [f64; 4])> {
        if x.len() != self.dim {
            return Err(Error::InvalidInput("point dimension does not match mesh".into()));
        }
        self.locator().locate(self, x, tol).ok_or_else(|| Error::OutsideDomain(x.to_vec()))
    }

    /// Default snapping tolerance: `1e-9 · max(1, diam)`.
    pub fn default_tolerance(&self) -> f64 {
        1e-9 * self.diameter().max(1.0)
    }

    /// Point evaluation row `P_x` (barycentric weights of the containing simplex).
    pub fn interpolation_row(&self, x: &[f64]) -> Result<EvalRow> {
        self.interpolation_row_tol(x, self.default_tolerance())
    }

    pub fn interpolation_row_tol(&self, x: &[f64], tol: f64) -> Result<EvalRow> {
        let (s, lam) = self.locate(x, tol)?;
        let vs = self.simplex(s);
        let pairs = (0..=self.dim).filter(|&k| lam[k] != 0.0).map(|k| (vs[k], lam[k])).collect();
        Ok(EvalRow::new(pairs))
    }

    pub fn evaluate(&self, values: &[f64], x: &[f64]) -> Result<f64> {
        Ok(self.interpolation_row(x)?.dot(values))
    }

    /// Checks that simplex volumes add up to the domain volume (relative `tol`).
    pub fn covers(&self, domain: &Domain, tol: f64) -> bool {
        let v = domain.volume();
        (self.total_volume() - v).abs() <= tol * v
    }

    /// The boundary loop of a 2D mesh as a counterclockwise polygon.
    pub fn boundary_polygon(&self) -> Result<Domain> {
        if self.dim != 2 {
            return Err(Error::UnsupportedDimension(self.dim));
        }
        let mut count: HashMap<(usize, usize), usize> = HashMap::new();
        for s in 0..self.num_simplices() {
            let vs = self.simplex(s);
            for (a, b) in [(vs[0], vs[1]), (vs[1], vs[2]), (vs[2], vs[0])] {
                *count.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        let mut next: HashMap<usize, Vec<usize>> = HashMap::new();
        for (&(a, b), &c) in &count {
            if c == 1 {
                next.entry(a).or_default().push(b);
                next.entry(b).or_default().push(a);
            }
        }
        let start = *next.keys().min().ok_or_else(|| Error::InvalidInput("empty mesh".into()))?;
        let mut loop_ = vec![start];
        let mut prev = usize::MAX;
        let mut cur = start;
        loop {
            let nb = &next[&cur];
            let nxt = if nb[0] != prev { nb[0] } else { nb[1] };
            if nxt == start {
                break;
            }
            loop_.push(nxt);
            prev = cur;
            cur = nxt;
            if loop_.len() > next.len() {
                return Err(Error::InvalidInput("boundary is not a single loop".into()));
            }
        }
        let mut verts: Vec<[f64; 2]> = loop_.iter().map(|&v| [self.vertex(v)[0], self.vertex(v)[1]]).collect();
        if polygon_area(&verts) < 0.0 {
            verts.reverse();
        }
        Ok(Domain::Polygon { vertices: verts })
    }
}

/// Inverse and determinant of a `d × d` row-major matrix, `d ≤ 3`.
fn invert_small(t: &[f64], d: usize) -> (f64, [f64; 9]) {
    let mut m = [0.0; 9];
    match d {
        2 => {
            let det = t[0] * t[3] - t[1] * t[2];
            m[0] = t[3] / det;
            m[1] = -t[1] / det;
            m[2] = -t[2] / det;
            m[3] = t[0] / det;
            (det, m)
        }
        _ => {
            let c00 = t[4] * t[8] - t[5] * t[7];
            let c01 = t[5] * t[6] - t[3] * t[8];
            let c02 = t[3] * t[7] - t[4] * t[6];
            let det = t[0] * c00 + t[1] * c01 + t[2] * c02;
            m[0] = c00 / det;
            m[1] = (t[2] * t[7] - t[1] * t[8]) / det;
            m[2] = (t[1] * t[5] - t[2] * t[4]) / det;
            m[3] = c01 / det;
            m[4] = (t[0] * t[8] - t[2] * t[6]) / det;
            m[5] = (t[2] * t[3] - t[0] * t[5]) / det;
            m[6] = c02 / det;
            m[7] = (t[1] * t[6] - t[0] * t[7]) / det;
            m[8] = (t[0] * t[4] - t[1] * t[3]) / det;
            (det, m)
        }
    }
}

/// Uniform bucket grid over the bounding box for point location.
#[derive(Debug)]
struct Locator {
    lo: [f64; 3],
    h: f64,
    n: [usize; 3],
    buckets: Vec<Vec<u32>>,
}

impl Locator {
    fn new(mesh: &SimplicialMesh) -> Self {
        let d = mesh.dim;
        let (blo, bhi) = mesh.bounding_box();
        let mut lo = [0.0; 3];
        let mut ext = [0.0f64; 3];
        for k in 0..d {
            lo[k] = blo[k];
            ext[k] = (bhi[k] - blo[k]).max(1e-300);
        }
        let vol: f64 = ext[..d].iter().product();
        let per = (vol / mesh.num_simplices().max(1) as f64).powf(1.0 / d as f64);
        let h = (2.0 * per).max(1e-300);
        let mut n = [1usize; 3];
        for k in 0..d {
            n[k] = ((ext[k] / h).ceil() as usize).clamp(1, 4096);
        }
        let total: usize = n[..d].iter().product();
        let mut buckets = vec![Vec::new(); total];
        for s in 0..mesh.num_simplices() {
            let mut smin = [usize::MAX; 3];
            let mut smax = [0usize; 3];
            for &v in mesh.simplex(s) {
                let p = mesh.vertex(v);
                for k in 0..d {
                    let c = (((p[k] - lo[k]) / h).floor().max(0.0) as usize).min(n[k] - 1);
                    smin[k] = smin[k].min(c);
                    smax[k] = smax[k].max(c);
                }
            }
            for k in d..3 {
                smin[k] = 0;
                smax[k] = 0;
            }
            for i in smin[0]..=smax[0] {
                for j in smin[1]..=smax[1] {
                    for l in smin[2]..=smax[2] {
                        buckets[i + n[0] * (j + n[1] * l)].push(s as u32);
                    }
                }
            }
        }
        Locator { lo, h, n, buckets }
    }

    fn cell(&self, x: &[f64], d: usize) -> [isize; 3] {
        let mut c = [0isize; 3];
        for k in 0..d {
            c[k] = ((x[k] - self.lo[k]) / self.h).floor() as isize;
            c[k] = c[k].clamp(0, self.n[k] as isize - 1);
        }
        c
    }

    fn locate(&self, mesh: &SimplicialMesh, x: &[f64], tol: f64) -> Option<(usize, [f64; 4])> {
        let d = mesh.dim;
        let c = self.cell(x, d);
        let mut best: Option<(f64, usize, [f64; 4])> = None;
        let b = &self.buckets[c[0] as usize + self.n[0] * (c[1] as usize + self.n[1] * c[2] as usize)];
        for &s in b {
            let lam = mesh.barycentric(s as usize, x);
            let m = lam[..=d].iter().copied().fold(f64::INFINITY, f64::min);
            if best.as_ref().is_none_or(|bb| m > bb.0) {
                best = Some((m, s as usize, lam));
            }
        }
        if let Some((m, s, lam)) = best {
            if m >= -1e-12 {
                return Some((s, clamp_bary(lam, d)));
            }
        }
        // Snap: nearest clamped point among neighbouring buckets.
        let mut snap: Option<(f64, usize, [f64; 4])> = None;
        let r = |k: usize| if k < d { -1isize..=1 } else { 0..=0 };
        for di in r(0) {
            for dj in r(1) {
                for dl in r(2) {
                    let (i, j, l) = (c[0] + di, c[1] + dj, c[2] + dl);
                    if i < 0 || j < 0 || l < 0 || i >= self.n[0] as isize || j >= self.n[1] as isize || l >= self.n[2] as isize {
                        continue;
                    }
                    for &s in &self.buckets[i as usize + self.n[0] * (j as usize + self.n[1] * l as usize)] {
                        let lam = clamp_bary(mesh.barycentric(s as usize, x), d);
                        let vs = mesh.simplex(s as usize);
                        let mut dist2 = 0.0;
                        for k in 0..d {
                            let p: f64 = (0..=d).map(|a| lam[a] * mesh.vertex(vs[a])[k]).sum();
                            dist2 += (p - x[k]).powi(2);
                        }
                        if snap.as_ref().is_none_or(|sb| dist2 < sb.0) {
                            snap = Some((dist2, s as usize, lam));
                        }
                    }
                }
            }
        }
        match snap {
            Some((d2, s, lam)) if d2.sqrt() <= tol => Some((s, lam)),
            _ => None,
        }
    }
}

fn clamp_bary(mut lam: [f64; 4], d: usize) -> [f64; 4] {
    let mut sum = 0.0;
    for l in lam[..=d].iter_mut() {
        if *l < 1e-15 {
            *l = 0.0;
        }
        sum += *l;
    }
    for l in lam[..=d].iter_mut() {
        *l /= sum;
    }
    lam
}

/// Which cell diagonal a grid mesh is split along.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Diagonal {
    /// From the lower corner to the upper corner, direction `(1, …, 1)`.
    #[default]
    Main,
    /// The main split mirrored in the first axis, direction `(−1, 1, …, 1)`.
    Anti,
}

/// Regular lattice mesh of a box. Every cell is split along its main diagonal
/// (Kuhn/Freudenthal split): 2 triangles sharing the diagonal from the lower-left
/// to the upper-right corner in 2D, 6 tetrahedra sharing the main diagonal in 3D.
pub fn build_grid_mesh(domain: &Domain, cells_per_axis: usize) -> Result<SimplicialMesh> {
    build_grid_mesh_with(domain, cells_per_axis, Diagonal::Main)
}

/// [`build_grid_mesh`] with a choice of split diagonal.
pub fn build_grid_mesh_with(domain: &Domain, cells_per_axis: usize, diagonal: Diagonal) -> Result<SimplicialMesh> {
    domain.validate()?;
    let Domain::Box { lower, upper } = domain else {
        return Err(Error::InvalidInput("grid meshes need a box domain".into()));
    };
    if cells_per_axis == 0 {
        return Err(Error::InvalidInput("cells_per_axis must be at least 1".into()));
    }
    let d = lower.len();
    let n = cells_per_axis;
    let m = n + 1;
    let nv = m.pow(d as u32);
    let mut coords = Vec::with_capacity(nv * d);
    for flat in 0..nv {
        let mut r = flat;
        for k in 0..d {
            let i = r % m;
            r /= m;
            coords.push(lower[k] + (upper[k] - lower[k]) * i as f64 / n as f64);
        }
    }
    let perms: Vec<Vec<usize>> = if d == 2 {
        vec![vec![0, 1], vec![1, 0]]
    } else {
        vec![vec![0, 1, 2], vec![0, 2, 1], vec![1, 0, 2], vec![1, 2, 0], vec![2, 0, 1], vec![2, 1, 0]]
    };
    let stride: Vec<usize> = (0..d).map(|k| m.pow(k as u32)).collect();
    let mut simplices = Vec::with_capacity(n.pow(d as u32) * perms.len() * (d + 1));
    for cell in 0..n.pow(d as u32) {
        let mut r = cell;
        let mut base = 0;
        for s in &stride {
            base += (r % n) * s;
            r /= n;
        }
        for p in &perms {
            let mut v = base;
            simplices.push(v);
            for &axis in p {
                v += stride[axis];
                simplices.push(v);
            }
        }
    }
    if diagonal == Diagonal::Anti {
        // mirror the first lattice index
        for v in simplices.iter_mut() {
            let i0 = *v % m;
            *v = *v - i0 + (n - i0);
        }
    }
    SimplicialMesh::new(d, coords, simplices)
}

/// Ring mesh of a disk: concentric rings at radial spacing `(√3/2)·δ` with
/// tangential spacing at most `δ`, neighbouring rings stitched by an angular sweep.
pub fn build_disk_mesh(domain: &Domain, target_delta: f64) -> Result<SimplicialMesh> {
    domain.validate()?;
    let Domain::Ball { center, radius } = domain else {
        return Err(Error::InvalidInput("disk meshes need a ball domain".into()));
    };
    if center.len() != 2 {
        return Err(Error::UnsupportedDimension(center.len()));
    }
    if !(target_delta > 0.0) || target_delta > *radius {
        return Err(Error::InvalidInput("target δ must lie in (0, radius]".into()));
    }
    let rings = (radius / (target_delta * 3f64.sqrt() / 2.0)).ceil() as usize;
    let hr = radius / rings as f64;
    let mut coords = vec![center[0], center[1]];
    let mut ring_start = vec![0usize];
    let mut ring_len = vec![1usize];
    let mut ring_angles: Vec<Vec<f64>> = vec![vec![0.0]];
    for k in 1..=rings {
        let r = hr * k as f64;
        let nk = ((2.0 * PI * r / target_delta).ceil() as usize).max(6);
        let off = if k % 2 == 1 { PI / nk as f64 } else { 0.0 };
        ring_start.push(coords.len() / 2);
        ring_len.push(nk);
        let mut angs = Vec::with_capacity(nk);
        for j in 0..nk {
            let t = off + 2.0 * PI * j as f64 / nk as f64;
            angs.push(t);
            coords.push(center[0] + r * t.cos());
            coords.push(center[1] + r * t.sin());
        }
        ring_angles.push(angs);
    }
    let mut simplices = Vec::new();
    // fan around the center
    for j in 0..ring_len[1] {
        simplices.extend([0, ring_start[1] + j, ring_start[1] + (j + 1) % ring_len[1]]);
    }
    for k in 1..rings {
        let (p, q) = (ring_len[k], ring_len[k + 1]);
        let (sa, sb) = (ring_start[k], ring_start[k + 1]);
        let a0 = ring_angles[k][0];
        // unwrapped angles of the outer ring starting near a0
        let j0 = (0..q)
            .min_by(|&x, &y| {
                ang_dist(ring_angles[k + 1][x], a0).total_cmp(&ang_dist(ring_angles[k + 1][y], a0))
            })
            .unwrap();
        let mut bang = Vec::with_capacity(q + 1);
        let mut base = ring_angles[k + 1][j0];
        while base < a0 - PI {
            base += 2.0 * PI;
        }
        while base > a0 + PI {
            base -= 2.0 * PI;
        }
        for t in 0..=q {
            bang.push(base + 2.0 * PI * t as f64 / q as f64);
        }
        let aang = |i: usize| a0 + 2.0 * PI * i as f64 / p as f64;
        let (mut i, mut j) = (0usize, 0usize);
        while i < p || j < q {
            let adv_a = j == q || (i < p && aang(i + 1) < bang[j + 1]);
            let ai = sa + i % p;
            let bj = sb + (j0 + j) % q;
            if adv_a {
                simplices.extend([ai, sa + (i + 1) % p, bj]);
                i += 1;
            } else {
                simplices.extend([ai, sb + (j0 + j + 1) % q, bj]);
                j += 1;
            }
        }
    }
    SimplicialMesh::new(2, coords, simplices)
}

fn ang_dist(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(2.0 * PI);
    d.min(2.0 * PI - d)
}

/// Nodal coefficient vector of a P1 field (or of a field on a sphere mesh).
#[derive(Debug, Clone, PartialEq)]
pub struct NodalField {
    pub values: Vec<f64>,
}

impl NodalField {
    pub fn new(values: Vec<f64>) -> Self {
        NodalField { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Nodal interpolation `I_δ f`.
pub fn interpolate(f: impl Fn(&[f64]) -> f64, mesh: &SimplicialMesh) -> Result<NodalField> {
    let mut values = Vec::with_capacity(mesh.num_vertices());
    for i in 0..mesh.num_vertices() {
        let v = f(mesh.vertex(i));
        if !v.is_finite() {
            return Err(Error::InvalidInput(format!("non-finite sample at vertex {i}")));
        }
        values.push(v);
    }
    Ok(NodalField { values })
}
