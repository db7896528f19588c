//! Verification oracles: the convex envelope of nodal data, Lipschitz
//! constants, an exhaustive active-set QP solver for small instances, and the
//! radial reduction of the geometric principal-agent problem.

use crate::active_set::{column_incidence, SparseQp, SparseRow};
use crate::error::{Error, Result};
use crate::linalg::solve_dense;
use crate::mesh::{NodalField, SimplicialMesh};
use nalgebra::DMatrix;

/// Convex envelope values at the mesh vertices.
#[derive(Debug, Clone)]
pub struct EnvelopeResult {
    pub values: Vec<f64>,
    /// `max_i (g_i − ḡ_i)`.
    pub max_gap: f64,
    pub witness: usize,
}

/// `min Σ λ_k g_k` subject to `Σ λ_k p_k = x`, `Σ λ_k = 1`, `λ ≥ 0`, by the
/// revised simplex method with Bland's rule. `basis` lists `d + 1` starting
/// columns forming a feasible basis; indices `≥ N` denote artificial unit
/// columns for the coordinate rows (at value zero), which are pivoted out first.
fn envelope_lp(dim: usize, pts: &[f64], g: &[f64], x: &[f64], mut basis: Vec<usize>) -> Result<f64> {
    let np = g.len();
    let m = dim + 1;
    let col = |k: usize, out: &mut [f64]| {
        if k < np {
            out[..dim].copy_from_slice(&pts[k * dim..(k + 1) * dim]);
            out[dim] = 1.0;
        } else {
            out.iter_mut().for_each(|v| *v = 0.0);
            out[k - np] = 1.0;
        }
    };
    let cost = |k: usize| if k < np { g[k] } else { 0.0 };
    let scale = g.iter().fold(0.0f64, |a, v| a.max(v.abs())) + 1.0;
    let pscale = pts.iter().fold(0.0f64, |a, v| a.max(v.abs())) + 1.0;
    let mut bmat = vec![0.0; m * m];
    let mut a = vec![0.0; m];
    let rhs: Vec<f64> = x.iter().copied().chain(std::iter::once(1.0)).collect();
    // B⁻¹ applied through fresh dense solves; m ≤ 4
    let solve_b = |basis: &[usize], b: &[f64], transpose: bool, bm: &mut [f64]| -> Option<Vec<f64>> {
        let mut c = vec![0.0; m];
        for (j, &k) in basis.iter().enumerate() {
            col(k, &mut c);
            for i in 0..m {
                if transpose {
                    bm[j * m + i] = c[i];
                } else {
                    bm[i * m + j] = c[i];
                }
            }
        }
        let mut out = b.to_vec();
        solve_dense(bm, &mut out, m, 1e-13)?;
        Some(out)
    };
    let singular = || Error::InvalidInput("degenerate envelope basis".into());
    let mut in_basis = vec![false; np];
    for &k in &basis {
        if k < np {
            in_basis[k] = true;
        }
    }
    // drive artificials out with degenerate pivots
    for pos in 0..m {
        if basis[pos] < np {
            continue;
        }
        let mut e = vec![0.0; m];
        e[pos] = 1.0;
        let row = solve_b(&basis, &e, true, &mut bmat).ok_or_else(singular)?;
        let pick = (0..np).find(|&k| {
            if in_basis[k] {
                return false;
            }
            col(k, &mut a);
            (0..m).map(|i| row[i] * a[i]).sum::<f64>().abs() > 1e-9 * pscale
        });
        if let Some(k) = pick {
            basis[pos] = k;
            in_basis[k] = true;
        }
    }
    let mut lam = solve_b(&basis, &rhs, false, &mut bmat).ok_or_else(singular)?;
    let cap = 50 * (np + m) + 1000;
    for _ in 0..cap {
        let cb: Vec<f64> = basis.iter().map(|&k| cost(k)).collect();
        let pi = solve_b(&basis, &cb, true, &mut bmat).ok_or_else(singular)?;
        let enter = (0..np).find(|&k| {
            if in_basis[k] {
                return false;
            }
            col(k, &mut a);
            g[k] - (0..m).map(|i| pi[i] * a[i]).sum::<f64>() < -1e-12 * scale
        });
        let Some(k) = enter else {
            return Ok(basis.iter().zip(&lam).map(|(&k, l)| cost(k) * l).sum());
        };
        col(k, &mut a);
        let u = solve_b(&basis, &a, false, &mut bmat).ok_or_else(singular)?;
        let mut leave: Option<usize> = None;
        let mut best = f64::INFINITY;
        for i in 0..m {
            if u[i] > 1e-12 {
                let r = lam[i].max(0.0) / u[i];
                let better = match leave {
                    None => true,
                    Some(l) => r < best - 1e-15 || (r <= best + 1e-15 && basis[i] < basis[l]),
                };
                if better {
                    best = r;
                    leave = Some(i);
                }
            }
        }
        let Some(l) = leave else {
            return Err(Error::InvalidInput("unbounded envelope LP".into()));
        };
        if basis[l] < np {
            in_basis[basis[l]] = false;
        }
        basis[l] = k;
        in_basis[k] = true;
        lam = solve_b(&basis, &rhs, false, &mut bmat).ok_or_else(singular)?;
    }
    Err(Error::NoConvergence("envelope simplex iteration cap reached".into()))
}

/// The convex envelope of nodal data: `ḡ(x) = min Σ λ_i g_i` over convex
/// combinations of vertices with barycenter `x`.
pub struct Envelope<'a> {
    mesh: &'a SimplicialMesh,
    g: &'a [f64],
}

impl<'a> Envelope<'a> {
    pub fn new(mesh: &'a SimplicialMesh, g: &'a [f64]) -> Result<Self> {
        if g.len() != mesh.num_vertices() {
            return Err(Error::InvalidInput("field length does not match the mesh".into()));
        }
        Ok(Envelope { mesh, g })
    }

    /// `ḡ(x)` for `x` in the mesh; the LP starts from the containing simplex.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        let (s, _) = self.mesh.locate(x, self.mesh.default_tolerance())?;
        envelope_lp(self.mesh.dim(), self.mesh.coords(), self.g, x, self.mesh.simplex(s).to_vec())
    }

    /// `ḡ` at vertex `v`.
    pub fn at_vertex(&self, v: usize) -> Result<f64> {
        let d = self.mesh.dim();
        let n = self.g.len();
        let basis: Vec<usize> = (0..d).map(|i| n + i).chain(std::iter::once(v)).collect();
        envelope_lp(d, self.mesh.coords(), self.g, self.mesh.vertex(v), basis)
    }
}

/// Envelope values at every vertex.
pub fn convex_envelope(mesh: &SimplicialMesh, field: &NodalField) -> Result<EnvelopeResult> {
    let env = Envelope::new(mesh, &field.values)?;
    let values = (0..mesh.num_vertices()).map(|v| env.at_vertex(v)).collect::<Result<Vec<_>>>()?;
    let (mut max_gap, mut witness) = (f64::NEG_INFINITY, 0);
    for (i, (g, e)) in field.values.iter().zip(&values).enumerate() {
        if g - e > max_gap {
            max_gap = g - e;
            witness = i;
        }
    }
    Ok(EnvelopeResult { values, max_gap, witness })
}

/// Lower convex envelope of scattered data `g` at points `pts` (flat, `dim`
/// coordinates each), evaluated at the points themselves. Works in any dimension.
pub fn convex_envelope_points(dim: usize, pts: &[f64], g: &[f64]) -> Result<Vec<f64>> {
    if dim == 0 || pts.len() != dim * g.len() {
        return Err(Error::InvalidInput("point array does not match the data".into()));
    }
    let n = g.len();
    (0..n)
        .map(|v| {
            let basis: Vec<usize> = (0..dim).map(|i| n + i).chain(std::iter::once(v)).collect();
            envelope_lp(dim, pts, g, &pts[v * dim..(v + 1) * dim], basis)
        })
        .collect()
}

/// Largest gradient norm over the simplices.
pub fn lipschitz_constant(mesh: &SimplicialMesh, field: &NodalField) -> f64 {
    (0..mesh.num_simplices())
        .map(|s| mesh.gradient(s, &field.values).iter().map(|v| v * v).sum::<f64>().sqrt())
        .fold(0.0, f64::max)
}

/// `min ½ xᵀ H x + cᵀ x` subject to `a_i·x ≤ b_i` and `e_j·x = f_j`.
#[derive(Debug, Clone)]
pub struct DenseQp {
    pub h: DMatrix<f64>,
    pub c: Vec<f64>,
    pub ineq: Vec<(Vec<f64>, f64)>,
    pub eq: Vec<(Vec<f64>, f64)>,
}

impl DenseQp {
    /// Projection of `y` onto the polyhedron: `H = I`, `c = −y`.
    pub fn projection(y: &[f64], ineq: Vec<(Vec<f64>, f64)>, eq: Vec<(Vec<f64>, f64)>) -> Self {
        DenseQp { h: DMatrix::identity(y.len(), y.len()), c: y.iter().map(|v| -v).collect(), ineq, eq }
    }
}

/// Global minimizer by enumerating active inequality subsets in ascending size
/// (at most 20 inequalities). Each subset's KKT system is solved through the
/// Schur complement of `H`; the first primal- and dual-feasible point wins.
pub fn qp_oracle(qp: &DenseQp) -> Result<Vec<f64>> {
    let n = qp.c.len();
    let mi = qp.ineq.len();
    if mi > 20 {
        return Err(Error::InvalidInput("exhaustive oracle limited to 20 inequalities".into()));
    }
    if qp.h.nrows() != n || qp.h.ncols() != n {
        return Err(Error::InvalidInput("dimension mismatch".into()));
    }
    let chol = qp
        .h
        .clone()
        .cholesky()
        .ok_or_else(|| Error::InvalidInput("oracle objective must be strictly convex".into()))?;
    let hinv = chol.inverse();
    let x0: Vec<f64> = (-(&hinv * nalgebra::DVector::from_column_slice(&qp.c))).iter().copied().collect();
    // all constraint rows: equalities first
    let rows: Vec<(&[f64], f64)> =
        qp.eq.iter().chain(&qp.ineq).map(|(a, b)| (a.as_slice(), *b)).collect();
    let ne = qp.eq.len();
    let hinv_rows: Vec<Vec<f64>> = rows
        .iter()
        .map(|(a, _)| (0..n).map(|i| (0..n).map(|j| hinv[(i, j)] * a[j]).sum()).collect())
        .collect();
    let gram = |p: usize, q: usize| -> f64 { rows[p].0.iter().zip(&hinv_rows[q]).map(|(a, b)| a * b).sum() };
    let scale = 1.0 + x0.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tol = 1e-9 * scale;
    let eval = |set: &[usize]| -> Option<Vec<f64>> {
        let k = set.len();
        let mut m = vec![0.0; k * k];
        let mut r = vec![0.0; k];
        for (i, &p) in set.iter().enumerate() {
            for (j, &q) in set.iter().enumerate() {
                m[i * k + j] = gram(p, q);
            }
            r[i] = rows[p].0.iter().zip(&x0).map(|(a, b)| a * b).sum::<f64>() - rows[p].1;
        }
        if k > 0 {
            solve_dense(&mut m, &mut r, k, 1e-12)?;
        }
        let mut x = x0.clone();
        for (i, &p) in set.iter().enumerate() {
            for j in 0..n {
                x[j] -= r[i] * hinv_rows[p][j];
            }
        }
        // multipliers of inequalities must be nonnegative
        if set.iter().zip(&r).any(|(&p, &mu)| p >= ne && mu < -tol) {
            return None;
        }
        let feasible = qp.ineq.iter().all(|(a, b)| a.iter().zip(&x).map(|(a, x)| a * x).sum::<f64>() <= b + tol)
            && qp.eq.iter().all(|(a, b)| (a.iter().zip(&x).map(|(a, x)| a * x).sum::<f64>() - b).abs() <= tol);
        feasible.then_some(x)
    };
    for size in 0..=mi {
        let mut comb: Vec<usize> = (0..size).collect();
        loop {
            let set: Vec<usize> = (0..ne).chain(comb.iter().map(|c| c + ne)).collect();
            if let Some(x) = eval(&set) {
                return Ok(x);
            }
            // next combination in lexicographic order
            let mut i = size;
            while i > 0 && comb[i - 1] == mi - size + i - 1 {
                i -= 1;
            }
            if i == 0 {
                break;
            }
            comb[i - 1] += 1;
            for j in i..size {
                comb[j] = comb[j - 1] + 1;
            }
        }
    }
    Err(Error::Infeasible("no active subset satisfies the KKT conditions".into()))
}

/// Discrete optimal radial profile on `[0, 1]` with nodes `r_i = i/n`.
#[derive(Debug, Clone)]
pub struct RadialProfile {
    pub radii: Vec<f64>,
    pub values: Vec<f64>,
    /// Slope on each segment `[r_k, r_{k+1}]`.
    pub slopes: Vec<f64>,
    /// Radial objective `∫ [v + ½ (v′ − r)²] r dr` (without the factor 2π).
    pub objective: f64,
    /// Largest violation among primal feasibility, dual sign, complementarity and stationarity.
    pub kkt_residual: f64,
    pub iterations: usize,
}

impl RadialProfile {
    /// Piecewise-linear interpolation of the profile.
    pub fn eval(&self, r: f64) -> f64 {
        let n = self.slopes.len();
        let t = (r.clamp(0.0, 1.0) * n as f64).min(n as f64 - 1e-12);
        let k = t.floor() as usize;
        self.values[k] + (t - k as f64) / n as f64 * self.slopes[k]
    }
}

/// Radial reduction of `∫ [v + ½‖∇v − x‖²]` over the unit disk with `v ≥ 0`
/// convex. A radial convex `v` has a nondecreasing nonnegative slope; the
/// value term makes `v(0) = 0` optimal, so the unknowns are the segment slopes.
pub fn radial_pa_oracle(n: usize) -> Result<RadialProfile> {
    radial_pa_oracle_with(n, 1.0)
}

/// As [`radial_pa_oracle`] with the value term `∫ v r dr` scaled by `weight ≥ 0`.
pub fn radial_pa_oracle_with(n: usize, weight: f64) -> Result<RadialProfile> {
    if n < 10 {
        return Err(Error::InvalidInput("radial oracle needs n ≥ 10".into()));
    }
    if !(weight >= 0.0) {
        return Err(Error::InvalidInput("value weight must be nonnegative".into()));
    }
    let h = 1.0 / n as f64;
    let r = |i: usize| i as f64 * h;
    // hat-function moments ∫ φ_i r dr
    let mass: Vec<f64> = (0..=n)
        .map(|i| {
            let mut m = 0.0;
            if i < n {
                m += h * (r(i) / 2.0 + h / 6.0);
            }
            if i > 0 {
                m += h * (r(i - 1) / 2.0 + h / 3.0);
            }
            m
        })
        .collect();
    // ∫ v r dr = Σ_k s_k d_k with d_k = h Σ_{i>k} m_i
    let mut d = vec![0.0; n];
    let mut tail = 0.0;
    for k in (0..n).rev() {
        tail += mass[k + 1];
        d[k] = h * tail;
    }
    let a: Vec<f64> = (0..n).map(|k| (r(k + 1).powi(2) - r(k).powi(2)) / 2.0).collect();
    let b: Vec<f64> = (0..n).map(|k| (r(k + 1).powi(3) - r(k).powi(3)) / 3.0).collect();
    let c: Vec<f64> = (0..n).map(|k| (r(k + 1).powi(4) - r(k).powi(4)) / 4.0).collect();
    let target: Vec<f64> = (0..n).map(|k| (b[k] - weight * d[k]) / a[k]).collect();
    let mut rows = vec![SparseRow { cols: vec![0], vals: vec![-1.0], rhs: 0.0 }];
    for k in 1..n {
        rows.push(SparseRow { cols: vec![k - 1, k], vals: vec![1.0, -1.0], rhs: 0.0 });
    }
    let inc = column_incidence(&rows, n);
    let qp = SparseQp { diag: &a, target: &target, rows: &rows, col_rows: &inc };
    let mut s: Vec<f64> = (0..n).map(|k| (k as f64 + 0.5) * h).collect();
    let mut work = Vec::new();
    let sol = qp.solve(&mut s, &mut work, 10 * n)?;

    // KKT: A_k (s_k − t_k) + Σ μ_j a_jk = 0, μ ≥ 0, μ_j (a_j·s) = 0, a_j·s ≤ 0
    let mut stat: Vec<f64> = (0..n).map(|k| a[k] * (s[k] - target[k])).collect();
    let mut kkt = 0.0f64;
    for (j, row) in rows.iter().enumerate() {
        let mu = sol.multipliers[j];
        let val: f64 = row.cols.iter().zip(&row.vals).map(|(&c, &v)| v * s[c]).sum();
        kkt = kkt.max(val).max((mu * val).abs());
        for (&c, &v) in row.cols.iter().zip(&row.vals) {
            stat[c] += mu * v;
        }
    }
    kkt = kkt.max(stat.iter().fold(0.0f64, |m, v| m.max(v.abs())) / h);
    if kkt > 1e-9 {
        return Err(Error::NoConvergence(format!("radial oracle KKT residual {kkt:e}")));
    }
    let mut values = vec![0.0; n + 1];
    for k in 0..n {
        values[k + 1] = values[k] + h * s[k];
    }
    let objective = (0..n).map(|k| 0.5 * (s[k] * s[k] * a[k] - 2.0 * s[k] * b[k] + c[k])).sum::<f64>()
        + weight * values.iter().zip(&mass).map(|(v, m)| v * m).sum::<f64>();
    Ok(RadialProfile {
        radii: (0..=n).map(r).collect(),
        values,
        slopes: s,
        objective,
        kkt_residual: kkt,
        iterations: sol.iterations,
    })
}

/// Closed-form optimal radial profile: zero up to `1/√3`, then
/// `3r²/4 − ½ ln r − ¼ − ¼ ln 3`.
pub fn radial_pa_exact(r: f64) -> f64 {
    if r <= 1.0 / 3f64.sqrt() {
        0.0
    } else {
        0.75 * r * r - 0.5 * r.ln() - 0.25 - 0.25 * 3f64.ln()
    }
}
