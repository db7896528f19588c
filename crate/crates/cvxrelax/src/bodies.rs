//! Support-function geometry: support values of polytopes, reconstruction of
//! the body `∩_i {⟨x, ν_i⟩ ≤ h_i}` by polar duality, and volume, surface and
//! width diagnostics.

use crate::error::{Error, Result};
use crate::mesh::NodalField;
use crate::sphere::{cross, dot3, SphereMesh};
use std::collections::HashMap;

/// A convex polytope in ℝ² or ℝ³. Planar polytopes keep `z = 0` and a single
/// counter-clockwise face listing the boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct Polytope {
    pub dim: usize,
    pub vertices: Vec<[f64; 3]>,
    /// Outward-oriented (counter-clockwise seen from outside) vertex cycles.
    pub faces: Vec<Vec<usize>>,
}

fn sub(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn norm(a: &[f64; 3]) -> f64 {
    dot3(a, a).sqrt()
}

/// Newell normal of a polygon; its length is twice the area.
fn newell(pts: &[[f64; 3]], cycle: &[usize]) -> [f64; 3] {
    let mut n = [0.0; 3];
    for k in 0..cycle.len() {
        let a = &pts[cycle[k]];
        let b = &pts[cycle[(k + 1) % cycle.len()]];
        let c = cross(a, b);
        n[0] += c[0];
        n[1] += c[1];
        n[2] += c[2];
    }
    n
}

impl Polytope {
    /// Convex hull of a point set (`dim` 2 or 3). Three-dimensional faces are triangles.
    pub fn from_points(dim: usize, points: &[[f64; 3]]) -> Result<Self> {
        match dim {
            2 => {
                let hull = hull_2d(points);
                if hull.len() < 3 {
                    return Err(Error::InvalidInput("degenerate planar hull".into()));
                }
                let vertices: Vec<[f64; 3]> = hull.iter().map(|&i| [points[i][0], points[i][1], 0.0]).collect();
                let faces = vec![(0..vertices.len()).collect()];
                Ok(Polytope { dim, vertices, faces })
            }
            3 => {
                let hull = Hull3::build(points)?;
                let mut remap = HashMap::new();
                let mut vertices = Vec::new();
                let mut faces = Vec::new();
                for f in hull.faces.iter().filter(|f| f.alive) {
                    let cyc: Vec<usize> = f
                        .v
                        .iter()
                        .map(|&i| {
                            *remap.entry(i).or_insert_with(|| {
                                vertices.push(points[i]);
                                vertices.len() - 1
                            })
                        })
                        .collect();
                    faces.push(cyc);
                }
                Ok(Polytope { dim, vertices, faces })
            }
            _ => Err(Error::UnsupportedDimension(dim)),
        }
    }

    /// Axis-aligned cube `[lo, hi]^d`.
    pub fn cube(lo: f64, hi: f64, dim: usize) -> Result<Self> {
        let pts: Vec<[f64; 3]> = if dim == 2 {
            vec![[lo, lo, 0.0], [hi, lo, 0.0], [hi, hi, 0.0], [lo, hi, 0.0]]
        } else {
            (0..8)
                .map(|k| [if k & 1 == 0 { lo } else { hi }, if k & 2 == 0 { lo } else { hi }, if k & 4 == 0 { lo } else { hi }])
                .collect()
        };
        Self::from_points(dim, &pts)
    }

    /// Regular tetrahedron with the given edge length and centroid at the origin.
    pub fn regular_tetrahedron(edge: f64) -> Self {
        let s = edge / (2.0 * 2f64.sqrt());
        let pts = [[s, s, s], [s, -s, -s], [-s, s, -s], [-s, -s, s]];
        Self::from_points(3, &pts).expect("tetrahedron hull")
    }

    /// Regular icosahedron inscribed in the unit sphere.
    pub fn icosahedron() -> Self {
        let p = (1.0 + 5f64.sqrt()) / 2.0;
        let r = (1.0 + p * p).sqrt();
        let mut pts = Vec::new();
        for &a in &[-1.0, 1.0] {
            for &b in &[-p, p] {
                pts.push([0.0, a / r, b / r]);
                pts.push([a / r, b / r, 0.0]);
                pts.push([b / r, 0.0, a / r]);
            }
        }
        Self::from_points(3, &pts).expect("icosahedron hull")
    }

    pub fn centroid(&self) -> [f64; 3] {
        let n = self.vertices.len() as f64;
        let mut c = [0.0; 3];
        for v in &self.vertices {
            for k in 0..3 {
                c[k] += v[k] / n;
            }
        }
        c
    }

    /// `max_p ⟨ν, p⟩`.
    pub fn support(&self, nu: &[f64]) -> f64 {
        self.vertices
            .iter()
            .map(|p| (0..nu.len()).map(|k| nu[k] * p[k]).sum::<f64>())
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Every face is planar within `tol`, faces point away from the vertex
    /// centroid, and every vertex lies on a face.
    pub fn validate(&self, tol: f64) -> Result<()> {
        let c = self.centroid();
        let mut used = vec![false; self.vertices.len()];
        for f in &self.faces {
            f.iter().for_each(|&i| used[i] = true);
            if self.dim == 3 {
                let n = newell(&self.vertices, f);
                let a = norm(&n);
                if a <= 0.0 {
                    continue;
                }
                let u = [n[0] / a, n[1] / a, n[2] / a];
                let off = dot3(&u, &self.vertices[f[0]]);
                if f.iter().any(|&i| (dot3(&u, &self.vertices[i]) - off).abs() > tol) || dot3(&u, &c) >= off {
                    return Err(Error::InvalidInput("face is not planar or not outward".into()));
                }
            }
        }
        if used.iter().any(|u| !u) {
            return Err(Error::InvalidInput("vertex outside every face".into()));
        }
        Ok(())
    }
}

/// Support values of a polytope on the sphere directions.
pub fn support_of_polytope(p: &Polytope, sphere: &SphereMesh) -> NodalField {
    NodalField::new((0..sphere.len()).map(|i| p.support(sphere.direction(i))).collect())
}

/// Enclosed volume (area in 2D).
pub fn volume(p: &Polytope) -> f64 {
    if p.dim == 2 {
        return 0.5 * newell(&p.vertices, &p.faces[0])[2].abs();
    }
    let c = p.centroid();
    let mut v = 0.0;
    for f in &p.faces {
        for k in 1..f.len().saturating_sub(1) {
            let a = sub(&p.vertices[f[0]], &c);
            let b = sub(&p.vertices[f[k]], &c);
            let d = sub(&p.vertices[f[k + 1]], &c);
            v += dot3(&a, &cross(&b, &d)) / 6.0;
        }
    }
    v.abs()
}

/// Facet-area sum (perimeter in 2D).
pub fn surface_area(p: &Polytope) -> f64 {
    if p.dim == 2 {
        let f = &p.faces[0];
        return (0..f.len()).map(|k| norm(&sub(&p.vertices[f[(k + 1) % f.len()]], &p.vertices[f[k]]))).sum();
    }
    p.faces.iter().map(|f| 0.5 * norm(&newell(&p.vertices, f))).sum()
}

/// Statistics of the widths `h_i + h_{antipode(i)}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WidthStats {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    /// `(max − min) / mean`.
    pub relative_error: f64,
}

pub fn width_stats(sphere: &SphereMesh, h: &[f64]) -> WidthStats {
    let w: Vec<f64> = (0..sphere.len()).map(|i| h[i] + h[sphere.antipode()[i]]).collect();
    let min = w.iter().copied().fold(f64::INFINITY, f64::min);
    let max = w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mean = w.iter().sum::<f64>() / w.len() as f64;
    WidthStats { min, max, mean, relative_error: (max - min) / mean }
}

/// Steiner point estimate `(1/|S|) d Σ a_i h_i ν_i` from the vertex weights `a_i`.
pub fn steiner_point(sphere: &SphereMesh, h: &[f64]) -> [f64; 3] {
    let w = sphere.vertex_weights();
    let total: f64 = w.iter().sum();
    let d = sphere.dim() as f64;
    let mut s = [0.0; 3];
    for i in 0..sphere.len() {
        let nu = sphere.direction(i);
        for k in 0..nu.len() {
            s[k] += d * w[i] * h[i] * nu[k] / total;
        }
    }
    s
}

/// Reconstructed body and the translation applied before dualizing.
#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub polytope: Polytope,
    /// `t` such that the input was recentered to `h_i − ⟨ν_i, t⟩`.
    pub shift: [f64; 3],
    /// Face index per direction (`None` for redundant halfspaces; 3D only).
    pub face_of: Vec<Option<usize>>,
}

/// `K = ∩_i {x : ⟨x, ν_i⟩ ≤ h_i}` via the convex hull of `ν_i / h_i`. When
/// `min h ≤ 10⁻³ max |h|` the data are first recentered at the Steiner point.
pub fn reconstruct_body(sphere: &SphereMesh, h: &[f64]) -> Result<Reconstruction> {
    if h.len() != sphere.len() {
        return Err(Error::InvalidInput("support field length does not match the sphere".into()));
    }
    let hmax = h.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let hmin = h.iter().copied().fold(f64::INFINITY, f64::min);
    let shift = if hmin <= 1e-3 * hmax { steiner_point(sphere, h) } else { [0.0; 3] };
    let hs: Vec<f64> = (0..sphere.len())
        .map(|i| h[i] - sphere.direction(i).iter().zip(&shift).map(|(a, b)| a * b).sum::<f64>())
        .collect();
    if hs.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::Infeasible("support data do not enclose an interior point".into()));
    }
    let dual: Vec<[f64; 3]> = (0..sphere.len())
        .map(|i| {
            let nu = sphere.direction(i);
            [nu[0] / hs[i], nu[1] / hs[i], if nu.len() > 2 { nu[2] / hs[i] } else { 0.0 }]
        })
        .collect();
    let translate = |p: [f64; 3]| [p[0] + shift[0], p[1] + shift[1], p[2] + shift[2]];
    if sphere.dim() == 2 {
        let hull = hull_2d(&dual);
        let mut vertices = Vec::new();
        for k in 0..hull.len() {
            let a = dual[hull[k]];
            let b = dual[hull[(k + 1) % hull.len()]];
            // line through a and b: n·q = 1 gives the vertex n
            let det = a[0] * b[1] - a[1] * b[0];
            if !(det > 0.0) {
                return Err(Error::Infeasible("origin not interior to the polar hull".into()));
            }
            let n = [(b[1] - a[1]) / det, (a[0] - b[0]) / det, 0.0];
            vertices.push(translate(n));
        }
        let face_of = vec![None; sphere.len()];
        let faces = vec![(0..vertices.len()).collect()];
        return Ok(Reconstruction { polytope: Polytope { dim: 2, vertices, faces }, shift, face_of });
    }
    let hull = Hull3::build(&dual)?;
    // K vertices: hull facets, with coplanar neighbouring facets merged
    let alive: Vec<usize> = (0..hull.faces.len()).filter(|&f| hull.faces[f].alive).collect();
    let mut parent: Vec<usize> = (0..hull.faces.len()).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    for &f in &alive {
        let fa = &hull.faces[f];
        if !(fa.c > 0.0) {
            return Err(Error::Infeasible("origin not interior to the polar hull".into()));
        }
        for k in 0..3 {
            let (a, b) = (fa.v[k], fa.v[(k + 1) % 3]);
            if let Some(&g) = hull.edges.get(&(b, a)) {
                let fb = &hull.faces[g];
                let dn = norm(&sub(&fa.n, &fb.n));
                if dn <= 1e-10 && (fa.c - fb.c).abs() <= 1e-10 * fa.c {
                    let (ra, rb) = (find(&mut parent, f), find(&mut parent, g));
                    parent[ra] = rb;
                }
            }
        }
    }
    let mut vid = HashMap::new();
    let mut vertices = Vec::new();
    for &f in &alive {
        let r = find(&mut parent, f);
        vid.entry(r).or_insert_with(|| {
            let fa = &hull.faces[r];
            vertices.push(translate([fa.n[0] / fa.c, fa.n[1] / fa.c, fa.n[2] / fa.c]));
            vertices.len() - 1
        });
    }
    // K faces: cycles of hull facets around each hull vertex
    let mut incident: HashMap<usize, usize> = HashMap::new();
    for &f in &alive {
        for &v in &hull.faces[f].v {
            incident.entry(v).or_insert(f);
        }
    }
    let mut faces = Vec::new();
    let mut face_of = vec![None; sphere.len()];
    let mut keys: Vec<usize> = incident.keys().copied().collect();
    keys.sort_unstable();
    for i in keys {
        let start = incident[&i];
        let mut cyc: Vec<usize> = Vec::new();
        let mut f = start;
        loop {
            let id = vid[&find(&mut parent, f)];
            if cyc.last() != Some(&id) {
                cyc.push(id);
            }
            let fv = hull.faces[f].v;
            let pos = fv.iter().position(|&v| v == i).unwrap();
            let a = fv[(pos + 1) % 3];
            f = *hull.edges.get(&(a, i)).ok_or_else(|| Error::InvalidInput("open polar hull".into()))?;
            if f == start {
                break;
            }
        }
        while cyc.len() > 1 && cyc.first() == cyc.last() {
            cyc.pop();
        }
        if cyc.len() < 3 {
            continue;
        }
        let nu = sphere.direction(i);
        let n = newell(&vertices, &cyc);
        if n[0] * nu[0] + n[1] * nu[1] + n[2] * nu[2] < 0.0 {
            cyc.reverse();
        }
        face_of[i] = Some(faces.len());
        faces.push(cyc);
    }
    Ok(Reconstruction { polytope: Polytope { dim: 3, vertices, faces }, shift, face_of })
}

/// Indices of the counter-clockwise convex hull (monotone chain, collinear points dropped).
fn hull_2d(points: &[[f64; 3]]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..points.len()).collect();
    idx.sort_by(|&a, &b| points[a][0].total_cmp(&points[b][0]).then(points[a][1].total_cmp(&points[b][1])));
    let turn = |o: usize, a: usize, b: usize| {
        (points[a][0] - points[o][0]) * (points[b][1] - points[o][1])
            - (points[a][1] - points[o][1]) * (points[b][0] - points[o][0])
    };
    let scale = points.iter().fold(0.0f64, |m, p| m.max(p[0].abs()).max(p[1].abs())).max(1e-300);
    let eps = 1e-13 * scale * scale;
    let mut hull: Vec<usize> = Vec::with_capacity(2 * idx.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &usize>> = if pass == 0 { Box::new(idx.iter()) } else { Box::new(idx.iter().rev()) };
        for &p in iter {
            while hull.len() >= start + 2 && turn(hull[hull.len() - 2], hull[hull.len() - 1], p) <= eps {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

#[derive(Debug, Clone)]
struct HullFace {
    v: [usize; 3],
    n: [f64; 3],
    c: f64,
    alive: bool,
}

/// Incremental 3D convex hull with outward unit normals.
struct Hull3 {
    faces: Vec<HullFace>,
    /// Directed edge `(a, b)` to the live face containing it.
    edges: HashMap<(usize, usize), usize>,
}

impl Hull3 {
    fn build(p: &[[f64; 3]]) -> Result<Self> {
        let n = p.len();
        if n < 4 {
            return Err(Error::InvalidInput("need at least 4 points for a 3D hull".into()));
        }
        let scale = p.iter().fold(0.0f64, |m, q| m.max(norm(q))).max(1e-300);
        let tol = 1e-11 * scale;
        let i0 = 0;
        let i1 = (0..n).max_by(|&a, &b| norm(&sub(&p[a], &p[i0])).total_cmp(&norm(&sub(&p[b], &p[i0])))).unwrap();
        let e = sub(&p[i1], &p[i0]);
        let i2 = (0..n)
            .max_by(|&a, &b| norm(&cross(&e, &sub(&p[a], &p[i0]))).total_cmp(&norm(&cross(&e, &sub(&p[b], &p[i0])))))
            .unwrap();
        let nrm = cross(&e, &sub(&p[i2], &p[i0]));
        let i3 = (0..n)
            .max_by(|&a, &b| dot3(&nrm, &sub(&p[a], &p[i0])).abs().total_cmp(&dot3(&nrm, &sub(&p[b], &p[i0])).abs()))
            .unwrap();
        if norm(&nrm) <= tol * scale || dot3(&nrm, &sub(&p[i3], &p[i0])).abs() <= tol * norm(&nrm) {
            return Err(Error::InvalidInput("points are coplanar".into()));
        }
        let interior = {
            let mut c = [0.0; 3];
            for &i in &[i0, i1, i2, i3] {
                for k in 0..3 {
                    c[k] += p[i][k] / 4.0;
                }
            }
            c
        };
        let mut h = Hull3 { faces: Vec::new(), edges: HashMap::new() };
        for tri in [[i0, i1, i2], [i0, i1, i3], [i0, i2, i3], [i1, i2, i3]] {
            let mut t = tri;
            let nn = cross(&sub(&p[t[1]], &p[t[0]]), &sub(&p[t[2]], &p[t[0]]));
            if dot3(&nn, &sub(&interior, &p[t[0]])) > 0.0 {
                t.swap(1, 2);
            }
            h.add_face(p, t);
        }
        let seed = [i0, i1, i2, i3];
        for q in 0..n {
            if seed.contains(&q) {
                continue;
            }
            let visible: Vec<usize> = (0..h.faces.len())
                .filter(|&f| h.faces[f].alive && dot3(&h.faces[f].n, &p[q]) - h.faces[f].c > tol)
                .collect();
            if visible.is_empty() {
                continue;
            }
            let mut horizon = Vec::new();
            for &f in &visible {
                let v = h.faces[f].v;
                for k in 0..3 {
                    let (a, b) = (v[k], v[(k + 1) % 3]);
                    let twin = h.edges[&(b, a)];
                    if !visible.contains(&twin) {
                        horizon.push((a, b));
                    }
                }
            }
            for &f in &visible {
                h.faces[f].alive = false;
                let v = h.faces[f].v;
                for k in 0..3 {
                    h.edges.remove(&(v[k], v[(k + 1) % 3]));
                }
            }
            for (a, b) in horizon {
                h.add_face(p, [a, b, q]);
            }
        }
        Ok(h)
    }

    fn add_face(&mut self, p: &[[f64; 3]], v: [usize; 3]) {
        let nn = cross(&sub(&p[v[1]], &p[v[0]]), &sub(&p[v[2]], &p[v[0]]));
        let l = norm(&nn);
        let n = [nn[0] / l, nn[1] / l, nn[2] / l];
        let c = dot3(&n, &p[v[0]]);
        let id = self.faces.len();
        self.faces.push(HullFace { v, n, c, alive: true });
        for k in 0..3 {
            self.edges.insert((v[k], v[(k + 1) % 3]), id);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::{build_circle_mesh, build_sphere_mesh};
    use std::f64::consts::PI;

    #[test]
    fn cube_measures() {
        let c = Polytope::cube(0.0, 1.0, 3).unwrap();
        c.validate(1e-12).unwrap();
        assert!((volume(&c) - 1.0).abs() < 1e-12);
        assert!((surface_area(&c) - 6.0).abs() < 1e-12);
        assert_eq!(c.support(&[1.0, 0.0, 0.0]), 1.0);
    }

    #[test]
    fn tetrahedron_measures() {
        let t = Polytope::regular_tetrahedron(1.0);
        assert!((volume(&t) - 2f64.sqrt() / 12.0).abs() < 1e-12);
        let v = t.vertices[0];
        let r = norm(&v);
        assert!((r - (3.0f64 / 8.0).sqrt()).abs() < 1e-12);
        assert!((t.support(&[v[0] / r, v[1] / r, v[2] / r]) - r).abs() < 1e-12);
    }

    #[test]
    fn ball_reconstruction() {
        let s = build_sphere_mesh(3);
        let rec = reconstruct_body(&s, &vec![1.0; s.len()]).unwrap();
        let v = volume(&rec.polytope);
        assert!(v >= 4.0 * PI / 3.0 && v <= 1.02 * 4.0 * PI / 3.0, "{v}");
        rec.polytope.validate(1e-9).unwrap();
    }

    #[test]
    fn cube_support_reconstruction() {
        let s = build_sphere_mesh(3);
        let cube = Polytope::cube(-1.0, 1.0, 3).unwrap();
        let h = support_of_polytope(&cube, &s);
        for i in 0..s.len() {
            let nu = s.direction(i);
            assert!((h.values[i] - nu.iter().map(|v| v.abs()).sum::<f64>()).abs() < 1e-12);
        }
        let rec = reconstruct_body(&s, &h.values).unwrap();
        let v = volume(&rec.polytope);
        assert!((v - 8.0).abs() < 1e-9, "{v}");
        let w = width_stats(&s, &h.values);
        assert!((w.min - 2.0).abs() < 1e-12 && w.max <= 2.0 * 3f64.sqrt() + 1e-12);
    }

    #[test]
    fn translation_invariance() {
        let s = build_sphere_mesh(2);
        let t = [0.3, -0.2, 0.5];
        let h: Vec<f64> = (0..s.len()).map(|i| 1.0 + dot3(&s.directions()[i], &t)).collect();
        let a = reconstruct_body(&s, &vec![1.0; s.len()]).unwrap();
        let b = reconstruct_body(&s, &h).unwrap();
        assert!((volume(&a.polytope) - volume(&b.polytope)).abs() < 1e-9);
        assert!((surface_area(&a.polytope) - surface_area(&b.polytope)).abs() < 1e-9);
    }

    #[test]
    fn planar_reconstruction() {
        let c = build_circle_mesh(64).unwrap();
        let rec = reconstruct_body(&c, &vec![1.0; c.len()]).unwrap();
        let a = volume(&rec.polytope);
        let exact = 64.0 * (PI / 64.0).tan();
        assert!((a - exact).abs() < 1e-10);
        let w = width_stats(&c, &vec![0.5; c.len()]);
        assert_eq!((w.min, w.max, w.relative_error), (1.0, 1.0, 0.0));
    }
}
