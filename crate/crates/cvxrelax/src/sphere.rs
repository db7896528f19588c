//! Antipodally symmetric direction sets on `S^{d-1}` and great-circle samplings.

use crate::error::{Error, Result};
use crate::row::EvalRow;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;
use std::f64::consts::PI;

/// Directions on the unit circle (d = 2) or sphere (d = 3) with the antipodal
/// pairing and a cell complex (arcs or triangles) used for interpolation and
/// area weights.
#[derive(Debug, Clone)]
pub struct SphereMesh {
    dim: usize,
    dirs: Vec<[f64; 3]>,
    antipode: Vec<usize>,
    /// `dim` vertex indices per cell.
    cells: Vec<usize>,
    /// Per cell and local vertex, the neighbouring cell across the opposite facet.
    neighbors: Vec<usize>,
}

fn key(p: &[f64; 3]) -> [i64; 3] {
    [(p[0] * 1e9).round() as i64, (p[1] * 1e9).round() as i64, (p[2] * 1e9).round() as i64]
}

fn normalize(p: [f64; 3]) -> [f64; 3] {
    let n = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
    [p[0] / n, p[1] / n, p[2] / n]
}

pub(crate) fn cross(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

pub(crate) fn dot3(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

impl SphereMesh {
    /// Assembles a mesh from directions and cells; directions are normalized,
    /// the set is closed under negation and the antipode map is computed.
    pub fn from_parts(dim: usize, dirs: Vec<[f64; 3]>, cells: Vec<usize>) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::UnsupportedDimension(dim));
        }
        let mut dirs: Vec<[f64; 3]> = dirs.into_iter().map(normalize).collect();
        let mut index: HashMap<[i64; 3], usize> = HashMap::new();
        for (i, p) in dirs.iter().enumerate() {
            index.insert(key(p), i);
        }
        let n0 = dirs.len();
        for i in 0..n0 {
            let q = [-dirs[i][0], -dirs[i][1], -dirs[i][2]];
            if !index.contains_key(&key(&q)) {
                index.insert(key(&q), dirs.len());
                dirs.push(q);
            }
        }
        if dirs.len() != n0 {
            return Err(Error::InvalidInput(
                "direction set is not antipodally closed; its cell complex cannot cover the negations".into(),
            ));
        }
        let antipode: Vec<usize> = dirs
            .iter()
            .map(|p| index[&key(&[-p[0], -p[1], -p[2]])])
            .collect();
        let mut edge: HashMap<Vec<usize>, (usize, usize)> = HashMap::new();
        let nc = cells.len() / dim;
        let mut neighbors = vec![usize::MAX; cells.len()];
        for c in 0..nc {
            for k in 0..dim {
                let mut f: Vec<usize> = (0..dim).filter(|&j| j != k).map(|j| cells[c * dim + j]).collect();
                f.sort_unstable();
                if let Some(&(oc, ok)) = edge.get(&f) {
                    neighbors[c * dim + k] = oc;
                    neighbors[oc * dim + ok] = c;
                } else {
                    edge.insert(f, (c, k));
                }
            }
        }
        Ok(SphereMesh { dim, dirs, antipode, cells, neighbors })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.dirs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dirs.is_empty()
    }

    pub fn direction(&self, i: usize) -> &[f64] {
        &self.dirs[i][..self.dim]
    }

    pub fn directions(&self) -> &[[f64; 3]] {
        &self.dirs
    }

    pub fn antipode(&self) -> &[usize] {
        &self.antipode
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len() / self.dim
    }

    pub fn cell(&self, c: usize) -> &[usize] {
        &self.cells[c * self.dim..(c + 1) * self.dim]
    }

    /// Area (d = 3) or arc length (d = 2) attached to each direction: one third
    /// (one half) of the spherical measure of the incident cells. Sums to |S^{d-1}|.
    pub fn vertex_weights(&self) -> Vec<f64> {
        let mut w = vec![0.0; self.len()];
        for c in 0..self.num_cells() {
            let vs = self.cell(c);
            if self.dim == 3 {
                let (a, b, cc) = (&self.dirs[vs[0]], &self.dirs[vs[1]], &self.dirs[vs[2]]);
                let num = dot3(a, &cross(b, cc)).abs();
                let den = 1.0 + dot3(a, b) + dot3(b, cc) + dot3(cc, a);
                let area = 2.0 * num.atan2(den);
                for &v in vs {
                    w[v] += area / 3.0;
                }
            } else {
                let ang = dot3(&self.dirs[vs[0]], &self.dirs[vs[1]]).clamp(-1.0, 1.0).acos();
                w[vs[0]] += ang / 2.0;
                w[vs[1]] += ang / 2.0;
            }
        }
        w
    }

    /// Gnomonic coefficients of `p` in cell `c` (`p = Σ μ_k v_k`).
    fn gnomonic(&self, c: usize, p: &[f64; 3]) -> [f64; 3] {
        let vs = self.cell(c);
        if self.dim == 2 {
            let (a, b) = (&self.dirs[vs[0]], &self.dirs[vs[1]]);
            let det = a[0] * b[1] - a[1] * b[0];
            [(p[0] * b[1] - p[1] * b[0]) / det, (a[0] * p[1] - a[1] * p[0]) / det, 0.0]
        } else {
            let (a, b, cc) = (&self.dirs[vs[0]], &self.dirs[vs[1]], &self.dirs[vs[2]]);
            let det = dot3(a, &cross(b, cc));
            [
                dot3(p, &cross(b, cc)) / det,
                dot3(a, &cross(p, cc)) / det,
                dot3(a, &cross(b, p)) / det,
            ]
        }
    }

    /// Locates the cell whose cone contains `p`, walking from `hint`.
    pub fn locate(&self, p: &[f64], hint: &mut usize) -> Result<(usize, [f64; 3])> {
        let mut q = [0.0; 3];
        q[..self.dim].copy_from_slice(&p[..self.dim]);
        let nc = self.num_cells();
        let mut c = (*hint).min(nc.saturating_sub(1));
        for _ in 0..4 * nc + 10 {
            let mu = self.gnomonic(c, &q);
            let (k, m) = (0..self.dim)
                .map(|k| (k, mu[k]))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap();
            if m >= -1e-12 {
                *hint = c;
                return Ok((c, clamp_mu(mu, self.dim)));
            }
            let nb = self.neighbors[c * self.dim + k];
            if nb == usize::MAX {
                break;
            }
            c = nb;
        }
        // exhaustive fallback
        let mut best: Option<(f64, usize, [f64; 3])> = None;
        for c in 0..nc {
            let mu = self.gnomonic(c, &q);
            if mu[..self.dim].iter().sum::<f64>() <= 0.0 {
                continue;
            }
            let m = mu[..self.dim].iter().copied().fold(f64::INFINITY, f64::min);
            if best.as_ref().is_none_or(|b| m > b.0) {
                best = Some((m, c, mu));
            }
        }
        match best {
            Some((m, c, mu)) if m >= -1e-9 => {
                *hint = c;
                Ok((c, clamp_mu(mu, self.dim)))
            }
            _ => Err(Error::OutsideDomain(p.to_vec())),
        }
    }

    /// Evaluation row of the 1-homogeneous interpolant at the unit vector `p`.
    pub fn interpolation_row(&self, p: &[f64], hint: &mut usize) -> Result<EvalRow> {
        let (c, mu) = self.locate(p, hint)?;
        let vs = self.cell(c);
        Ok(EvalRow::new((0..self.dim).filter(|&k| mu[k] != 0.0).map(|k| (vs[k], mu[k])).collect()))
    }
}

fn clamp_mu(mut mu: [f64; 3], d: usize) -> [f64; 3] {
    for m in mu[..d].iter_mut() {
        if *m < 1e-15 {
            *m = 0.0;
        }
    }
    mu
}

const ICO_FACES: [[usize; 3]; 20] = [
    [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
    [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
    [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
    [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
];

fn icosahedron() -> Vec<[f64; 3]> {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    vec![
        [-1.0, t, 0.0], [1.0, t, 0.0], [-1.0, -t, 0.0], [1.0, -t, 0.0],
        [0.0, -1.0, t], [0.0, 1.0, t], [0.0, -1.0, -t], [0.0, 1.0, -t],
        [t, 0.0, -1.0], [t, 0.0, 1.0], [-t, 0.0, -1.0], [-t, 0.0, 1.0],
    ]
}

/// Geodesic sphere: every icosahedron face split into `freq²` triangles,
/// vertices projected to the sphere; `10·freq² + 2` directions.
pub fn build_geodesic_sphere(freq: usize) -> SphereMesh {
    let f = freq.max(1);
    let ico = icosahedron();
    let mut index: HashMap<[i64; 3], usize> = HashMap::new();
    let mut dirs: Vec<[f64; 3]> = Vec::new();
    let mut cells = Vec::new();
    let mut id = |p: [f64; 3], dirs: &mut Vec<[f64; 3]>| -> usize {
        let p = normalize(p);
        *index.entry(key(&p)).or_insert_with(|| {
            dirs.push(p);
            dirs.len() - 1
        })
    };
    for face in ICO_FACES {
        let (a, b, c) = (ico[face[0]], ico[face[1]], ico[face[2]]);
        let pt = |i: usize, j: usize| -> [f64; 3] {
            let k = f - i - j;
            let mut p = [0.0; 3];
            for m in 0..3 {
                p[m] = (i as f64 * a[m] + j as f64 * b[m] + k as f64 * c[m]) / f as f64;
            }
            p
        };
        let mut grid = vec![vec![0usize; f + 1]; f + 1];
        for i in 0..=f {
            for j in 0..=f - i {
                grid[i][j] = id(pt(i, j), &mut dirs);
            }
        }
        for i in 0..f {
            for j in 0..f - i {
                // orientation matching (a, b, c) ordering: (i+1,j) ~ a, (i,j+1) ~ b, (i,j) ~ c
                cells.extend([grid[i + 1][j], grid[i][j + 1], grid[i][j]]);
                if i + j + 2 <= f {
                    cells.extend([grid[i + 1][j], grid[i + 1][j + 1], grid[i][j + 1]]);
                }
            }
        }
    }
    SphereMesh::from_parts(3, dirs, cells).expect("geodesic spheres are antipodally closed")
}

/// Icosphere at the given subdivision level (frequency `2^level`).
pub fn build_sphere_mesh(level: u32) -> SphereMesh {
    build_geodesic_sphere(1usize << level)
}

/// `n` equally spaced directions on the unit circle (`n` even, `n ≥ 4`).
pub fn build_circle_mesh(n: usize) -> Result<SphereMesh> {
    if n < 4 || n % 2 != 0 {
        return Err(Error::InvalidInput("circle meshes need an even count ≥ 4".into()));
    }
    let dirs = (0..n)
        .map(|k| {
            let t = 2.0 * PI * k as f64 / n as f64;
            [t.cos(), t.sin(), 0.0]
        })
        .collect();
    let cells = (0..n).flat_map(|k| [k, (k + 1) % n]).collect();
    SphereMesh::from_parts(2, dirs, cells)
}

/// A cyclic ε-sampling of the great circle orthogonal to `normal`.
#[derive(Debug, Clone)]
pub struct GreatCircleSample {
    pub normal: [f64; 3],
    pub points: Vec<[f64; 3]>,
    /// Realized angular step `2π/n`.
    pub eps: f64,
    /// `cos ε`.
    pub weight: f64,
}

impl GreatCircleSample {
    /// Samples the circle with `n = round(2π/ε)` points.
    pub fn new(normal: [f64; 3], eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps <= PI / 2.0) {
            return Err(Error::InvalidInput("circle step must lie in (0, π/2]".into()));
        }
        let u = normalize(normal);
        // in-plane basis from the coordinate axis least aligned with u
        let ax = (0..3).min_by(|&a, &b| u[a].abs().total_cmp(&u[b].abs())).unwrap();
        let mut e = [0.0; 3];
        e[ax] = 1.0;
        // e1 = component of the axis orthogonal to u
        let d = dot3(&e, &u);
        let e1 = normalize([e[0] - d * u[0], e[1] - d * u[1], e[2] - d * u[2]]);
        let e2 = cross(&u, &e1);
        let n = (2.0 * PI / eps).round() as usize;
        let step = 2.0 * PI / n as f64;
        let points = (0..n)
            .map(|k| {
                let (s, c) = (step * k as f64).sin_cos();
                [c * e1[0] + s * e2[0], c * e1[1] + s * e2[1], c * e1[2] + s * e2[2]]
            })
            .collect();
        Ok(GreatCircleSample { normal: u, points, eps: step, weight: step.cos() })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// `count` great circles with quasi-uniform normals: a Fibonacci lattice on the
/// upper hemisphere (`z_k = 1 − k/count`), rotated by a random rotation drawn
/// from `seed` (seed 0 keeps the lattice unrotated).
pub fn sample_great_circles(count: usize, eps: f64, seed: u64) -> Result<Vec<GreatCircleSample>> {
    if count == 0 {
        return Err(Error::InvalidInput("need at least one circle".into()));
    }
    if !(eps > 0.0 && eps < PI / 2.0 + 1e-12) {
        return Err(Error::InvalidInput("circle step must lie in (0, π/2)".into()));
    }
    let rot = if seed == 0 { [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]] } else { random_rotation(seed) };
    let ga = PI * (3.0 - 5f64.sqrt());
    (0..count)
        .map(|k| {
            let z = 1.0 - k as f64 / count as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let t = ga * k as f64;
            let u = [r * t.cos(), r * t.sin(), z];
            let ru = [dot3(&rot[0], &u), dot3(&rot[1], &u), dot3(&rot[2], &u)];
            GreatCircleSample::new(ru, eps)
        })
        .collect()
}

fn random_rotation(seed: u64) -> [[f64; 3]; 3] {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (u1, u2, u3): (f64, f64, f64) = (rng.random(), rng.random(), rng.random());
    let (a, b) = ((1.0 - u1).sqrt(), u1.sqrt());
    let (w, x, y, z) = (a * (2.0 * PI * u2).sin(), a * (2.0 * PI * u2).cos(), b * (2.0 * PI * u3).sin(), b * (2.0 * PI * u3).cos());
    [
        [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - z * w), 2.0 * (x * z + y * w)],
        [2.0 * (x * y + z * w), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - x * w)],
        [2.0 * (x * z - y * w), 2.0 * (y * z + x * w), 1.0 - 2.0 * (x * x + y * y)],
    ]
}
