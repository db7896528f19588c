//! Exact Euclidean projections onto the cone of discrete convex sequences and
//! onto the weighted cyclic cone of great-circle constraints.
//!
//! The uniform cone is handled in its hinge parameterization
//! `g = α·1 + β·i + Σ_j c_j (i−j)₊`, `c ≥ 0`, as a nonnegative least-squares
//! problem. For a passive set of hinges the least-squares fit is a linear spline
//! with those knots, so each subproblem is a tridiagonal solve.

use crate::active_set::{column_incidence, lawson_hanson, LsModel, SparseQp, SparseRow};
use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};

/// Which 1D cone a projection targets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConeSpec {
    /// `n + 1` entries with `2 g_i ≤ g_{i−1} + g_{i+1}`.
    UniformConvex1D { n: usize },
    /// `n` cyclic entries with `w g_i ≤ ½ (g_{i−1} + g_{i+1})`.
    WeightedCyclicConvex1D { n: usize, weight: f64 },
}

impl ConeSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ConeSpec::UniformConvex1D { n } if n < 2 => {
                Err(Error::InvalidInput("uniform cone needs at least 3 entries".into()))
            }
            ConeSpec::WeightedCyclicConvex1D { n, weight } if n < 4 || !(weight > 0.0 && weight <= 1.0) => {
                Err(Error::InvalidInput("cyclic cone needs n ≥ 4 and 0 < w ≤ 1".into()))
            }
            _ => Ok(()),
        }
    }
}

/// Warm-start state for uniform-cone projections.
#[derive(Debug, Clone, Default)]
pub struct Hinge1DWorkspace {
    len: usize,
    /// Active hinges (knot positions in `1..n`).
    pub active: Vec<usize>,
    coef: Vec<f64>,
    model: HingeScratch,
    /// Active-set changes in the last projection.
    pub last_changes: usize,
}

impl Hinge1DWorkspace {
    pub fn new() -> Self {
        Self::default()
    }
}

#[derive(Debug, Clone, Default)]
struct HingeScratch {
    diag: Vec<f64>,
    off: Vec<f64>,
    rhs: Vec<f64>,
    knots: Vec<usize>,
    g: Vec<f64>,
}

struct HingeModel<'a> {
    f: &'a [f64],
    s: &'a mut HingeScratch,
    solves: usize,
}

impl HingeModel<'_> {
    /// Linear spline least-squares fit with the given interior knots; fills `s.g`
    /// with fitted values and returns knot values in `s.rhs`.
    fn fit(&mut self, interior: impl Iterator<Item = usize>) {
        let n = self.f.len() - 1;
        let s = &mut *self.s;
        s.knots.clear();
        s.knots.push(0);
        s.knots.extend(interior);
        s.knots.push(n);
        let m = s.knots.len() - 1;
        s.diag.clear();
        s.diag.resize(m + 1, 0.0);
        s.off.clear();
        s.off.resize(m, 0.0);
        s.rhs.clear();
        s.rhs.resize(m + 1, 0.0);
        for k in 0..m {
            let (a, b) = (s.knots[k], s.knots[k + 1]);
            let len = (b - a) as f64;
            for i in a..b {
                let t = (i - a) as f64 / len;
                let (pa, pb) = (1.0 - t, t);
                s.diag[k] += pa * pa;
                s.diag[k + 1] += pb * pb;
                s.off[k] += pa * pb;
                s.rhs[k] += pa * self.f[i];
                s.rhs[k + 1] += pb * self.f[i];
            }
        }
        s.diag[m] += 1.0;
        s.rhs[m] += self.f[n];
        // tridiagonal LDLᵀ
        for k in 1..=m {
            let l = s.off[k - 1] / s.diag[k - 1];
            s.diag[k] -= l * s.off[k - 1];
            s.rhs[k] -= l * s.rhs[k - 1];
            s.off[k - 1] = l;
        }
        s.rhs[m] /= s.diag[m];
        for k in (0..m).rev() {
            s.rhs[k] = s.rhs[k] / s.diag[k] - s.off[k] * s.rhs[k + 1];
        }
        s.g.clear();
        s.g.resize(n + 1, 0.0);
        for k in 0..m {
            let (a, b) = (s.knots[k], s.knots[k + 1]);
            let len = (b - a) as f64;
            for i in a..b {
                let t = (i - a) as f64 / len;
                s.g[i] = (1.0 - t) * s.rhs[k] + t * s.rhs[k + 1];
            }
        }
        s.g[n] = s.rhs[m];
        self.solves += 1;
    }
}

impl LsModel for HingeModel<'_> {
    fn ncoef(&self) -> usize {
        self.f.len()
    }
    fn nfree(&self) -> usize {
        2
    }
    fn solve(&mut self, passive: &[usize], coef: &mut [f64]) -> Result<()> {
        // coefficient index k ≥ 2 is the hinge at knot k − 1
        self.fit(passive.iter().filter(|&&k| k >= 2).map(|&k| k - 1));
        coef.iter_mut().for_each(|c| *c = 0.0);
        let s = &*self.s;
        let m = s.knots.len() - 1;
        let slope = |k: usize| (s.rhs[k + 1] - s.rhs[k]) / (s.knots[k + 1] - s.knots[k]) as f64;
        coef[0] = s.rhs[0];
        coef[1] = slope(0);
        for k in 1..m {
            coef[s.knots[k] + 1] = slope(k) - slope(k - 1);
        }
        Ok(())
    }
    fn dual(&mut self, coef: &[f64], w: &mut [f64]) {
        let n = self.f.len() - 1;
        // g from coefficients: increments are β plus the hinges already passed
        let mut g = coef[0];
        let mut slope = coef[1];
        let mut r = vec![0.0; n + 1];
        r[0] = self.f[0] - g;
        for i in 1..=n {
            g += slope;
            r[i] = self.f[i] - g;
            if i < n {
                slope += coef[i + 1];
            }
        }
        // w_hinge(j) = Σ_{i>j} (i−j) r_i = Σ_{t>j} S_t with S_t = Σ_{i≥t} r_i
        let mut suffix = 0.0;
        let mut acc = 0.0;
        for j in (0..=n).rev() {
            // acc = Σ_{t>j} S_t
            if j >= 1 && j < n {
                w[j + 1] = acc;
            }
            suffix += r[j];
            acc += suffix;
        }
        w[0] = r.iter().sum();
        w[1] = r.iter().enumerate().map(|(i, v)| i as f64 * v).sum();
    }
    fn tol(&self) -> f64 {
        let n = self.f.len() as f64;
        let fmax = self.f.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        1e-13 * (1.0 + fmax) * n * n
    }
}

/// Projection of `f` (length `n + 1 ≥ 3`) onto the discrete convex cone.
pub fn project_uniform_convex(f: &[f64], ws: &mut Hinge1DWorkspace) -> Vec<f64> {
    let mut out = vec![0.0; f.len()];
    project_uniform_convex_into(f, &mut out, ws);
    out
}

/// In-place variant of [`project_uniform_convex`].
pub fn project_uniform_convex_into(f: &[f64], out: &mut [f64], ws: &mut Hinge1DWorkspace) {
    let len = f.len();
    assert!(len >= 3, "uniform convex projection needs at least 3 entries");
    if ws.len != len {
        ws.len = len;
        ws.active.clear();
    }
    // already convex: the projection is the input itself
    if (1..len - 1).all(|i| f[i] - 0.5 * (f[i - 1] + f[i + 1]) <= 0.0) {
        out.copy_from_slice(f);
        ws.last_changes = 0;
        return;
    }
    ws.coef.clear();
    ws.coef.resize(len, 0.0);
    let warm: Vec<usize> = ws.active.iter().map(|&j| j + 1).collect();
    let mut model = HingeModel { f, s: &mut ws.model, solves: 0 };
    let passive = lawson_hanson(&mut model, &warm, &mut ws.coef)
        .expect("spline subproblems are always full rank");
    // refit on the final knots for exact values
    model.fit(passive.iter().map(|&k| k - 1));
    out.copy_from_slice(&model.s.g);
    ws.last_changes = model.solves;
    ws.active = passive.iter().map(|&k| k - 1).collect();
}

/// Columns `[1, i, (i−1)₊, …, (i−(n−1))₊]` of the hinge parameterization,
/// `(n+1) × (n+1)`.
pub fn hinge_design_matrix(n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n + 1, n + 1, |i, c| match c {
        0 => 1.0,
        1 => i as f64,
        _ => (i as f64 - (c - 1) as f64).max(0.0),
    })
}

struct DenseModel<'a> {
    a: &'a DMatrix<f64>,
    b: &'a DVector<f64>,
    nfree: usize,
    tol: f64,
}

impl LsModel for DenseModel<'_> {
    fn ncoef(&self) -> usize {
        self.a.ncols()
    }
    fn nfree(&self) -> usize {
        self.nfree
    }
    fn solve(&mut self, passive: &[usize], coef: &mut [f64]) -> Result<()> {
        coef.iter_mut().for_each(|c| *c = 0.0);
        if passive.is_empty() {
            return Ok(());
        }
        let sub = self.a.select_columns(passive);
        let qr = sub.clone().qr();
        let r = qr.r();
        let rmax = (0..r.ncols()).map(|k| r[(k, k)].abs()).fold(0.0, f64::max);
        if (0..r.ncols()).any(|k| r[(k, k)].abs() <= 1e-12 * rmax.max(1e-300)) || sub.nrows() < sub.ncols() {
            return Err(Error::RankDeficient(passive.to_vec()));
        }
        let qtb = qr.q().transpose() * self.b;
        let sol = r.solve_upper_triangular(&qtb).ok_or_else(|| Error::RankDeficient(passive.to_vec()))?;
        for (k, &j) in passive.iter().enumerate() {
            coef[j] = sol[k];
        }
        Ok(())
    }
    fn dual(&mut self, coef: &[f64], w: &mut [f64]) {
        let x = DVector::from_column_slice(coef);
        let r = self.b - self.a * x;
        let g = self.a.transpose() * r;
        w.copy_from_slice(g.as_slice());
    }
    fn tol(&self) -> f64 {
        self.tol
    }
}

/// `min ‖A x − b‖` with the first `free_count` variables unconstrained and the
/// rest nonnegative, warm-started from the index set `warm`. Returns the
/// solution and the final set of positive constrained variables.
pub fn nnls_active_set(
    a: &DMatrix<f64>,
    b: &[f64],
    free_count: usize,
    warm: &[usize],
) -> Result<(Vec<f64>, Vec<usize>)> {
    if b.len() != a.nrows() || free_count > a.ncols() {
        return Err(Error::InvalidInput("dimension mismatch".into()));
    }
    let bv = DVector::from_column_slice(b);
    let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs())) * bv.amax().max(1.0);
    let mut model = DenseModel { a, b: &bv, nfree: free_count, tol: 1e-12 * scale * a.nrows() as f64 };
    let mut x = vec![0.0; a.ncols()];
    let act = lawson_hanson(&mut model, warm, &mut x)?;
    Ok((x, act))
}

/// Warm-start state for cyclic-cone projections.
#[derive(Debug, Clone, Default)]
pub struct CyclicWorkspace {
    n: usize,
    weight: f64,
    rows: Vec<SparseRow>,
    incidence: Vec<Vec<usize>>,
    /// Active constraint indices from the last projection.
    pub active: Vec<usize>,
    pub last_iterations: usize,
}

impl CyclicWorkspace {
    pub fn new() -> Self {
        Self::default()
    }

    fn prepare(&mut self, n: usize, w: f64) {
        if self.n == n && self.weight == w {
            return;
        }
        self.n = n;
        self.weight = w;
        self.rows = (0..n)
            .map(|i| SparseRow {
                cols: vec![(i + n - 1) % n, i, (i + 1) % n],
                vals: vec![-0.5, w, -0.5],
                rhs: 0.0,
            })
            .collect();
        self.incidence = column_incidence(&self.rows, n);
        self.active.clear();
    }
}

/// Projection of `f` (length `n ≥ 4`) onto `{g : w g_i ≤ ½ (g_{i−1} + g_{i+1})}`.
pub fn project_weighted_cyclic(f: &[f64], w: f64, ws: &mut CyclicWorkspace) -> Vec<f64> {
    let mut out = vec![0.0; f.len()];
    project_weighted_cyclic_into(f, w, &mut out, ws);
    out
}

pub fn project_weighted_cyclic_into(f: &[f64], w: f64, out: &mut [f64], ws: &mut CyclicWorkspace) {
    let n = f.len();
    assert!(n >= 4 && w > 0.0 && w <= 1.0, "cyclic projection needs n ≥ 4 and 0 < w ≤ 1");
    ws.prepare(n, w);
    let ones = vec![1.0; n];
    let qp = SparseQp { diag: &ones, target: f, rows: &ws.rows, col_rows: &ws.incidence };
    // every constraint is active at the origin, so any warm set is admissible there
    out.iter_mut().for_each(|v| *v = 0.0);
    let mut work = std::mem::take(&mut ws.active);
    let sol = match qp.solve(out, &mut work, 50 * n + 100) {
        Ok(s) => s,
        Err(_) => {
            out.iter_mut().for_each(|v| *v = 0.0);
            let mut cold = Vec::new();
            qp.solve(out, &mut cold, 500 * n + 1000).expect("cyclic projection failed from a cold start")
        }
    };
    ws.last_iterations = sol.iterations;
    ws.active = sol.active;
}
