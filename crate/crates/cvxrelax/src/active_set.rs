//! Active-set engines shared by the cone projections and the radial oracle.
//!
//! * [`lawson_hanson`]: NNLS with free variables over a pluggable least-squares
//!   model, warm-started from a passive set.
//! * [`SparseQp`]: primal active-set method for `min ½ Σ D_k (x_k − t_k)²`
//!   subject to sparse inequality rows, with profile-Cholesky equality solves.

use crate::error::{Error, Result};
use crate::linalg::Skyline;

/// Least-squares model `min ‖A x − b‖` restricted to passive columns.
pub(crate) trait LsModel {
    fn ncoef(&self) -> usize;
    fn nfree(&self) -> usize;
    /// Least-squares coefficients on the sorted `passive` set (all free indices
    /// included); entries outside `passive` are set to zero.
    fn solve(&mut self, passive: &[usize], coef: &mut [f64]) -> Result<()>;
    /// `w = Aᵀ (b − A x)`.
    fn dual(&mut self, coef: &[f64], w: &mut [f64]);
    /// Threshold on `w` below which a variable is not released.
    fn tol(&self) -> f64;
}

/// Lawson–Hanson iterations from the warm passive set. Entering variable: the
/// largest dual entry (smallest index among ties); ratio-test ties leave by
/// smallest index. Returns the constrained indices of the final passive set.
pub(crate) fn lawson_hanson<M: LsModel>(m: &mut M, warm: &[usize], x: &mut [f64]) -> Result<Vec<usize>> {
    let n = m.ncoef();
    let nf = m.nfree();
    let mut in_p = vec![false; n];
    in_p[..nf].iter_mut().for_each(|v| *v = true);
    for &j in warm {
        if j >= nf && j < n {
            in_p[j] = true;
        }
    }
    let passive = |in_p: &[bool]| (0..n).filter(|&j| in_p[j]).collect::<Vec<_>>();
    let mut z = vec![0.0; n];

    // Feasible start: drop the most negative coefficient until all are nonnegative.
    loop {
        let p = passive(&in_p);
        if let Err(e) = m.solve(&p, &mut z) {
            if p.len() > nf {
                // drop the warm start entirely
                in_p[nf..].iter_mut().for_each(|v| *v = false);
                continue;
            }
            return Err(e);
        }
        let worst = p
            .iter()
            .copied()
            .filter(|&j| j >= nf && z[j] < 0.0)
            .min_by(|&a, &b| z[a].total_cmp(&z[b]).then(a.cmp(&b)));
        match worst {
            Some(j) => in_p[j] = false,
            None => {
                x.copy_from_slice(&z);
                break;
            }
        }
    }

    let tol = m.tol();
    let mut w = vec![0.0; n];
    let mut blocked = vec![false; n];
    let cap = 10 * n + 100;
    let mut outer = 0;
    loop {
        outer += 1;
        if outer > cap {
            return Err(Error::NoConvergence("Lawson–Hanson iteration cap reached".into()));
        }
        m.dual(x, &mut w);
        let mut t = None;
        let mut best = tol;
        for j in nf..n {
            if !in_p[j] && !blocked[j] && w[j] > best {
                best = w[j];
                t = Some(j);
            }
        }
        let Some(t) = t else { break };
        in_p[t] = true;
        let mut first = true;
        loop {
            let p = passive(&in_p);
            m.solve(&p, &mut z)?;
            if first && z[t] <= 0.0 {
                // numerically useless direction
                in_p[t] = false;
                blocked[t] = true;
                break;
            }
            first = false;
            let mut alpha = f64::INFINITY;
            let mut leave = None;
            for &j in &p {
                if j >= nf && z[j] <= 0.0 {
                    let a = x[j] / (x[j] - z[j]);
                    if a < alpha {
                        alpha = a;
                        leave = Some(j);
                    }
                }
            }
            match leave {
                None => {
                    x.copy_from_slice(&z);
                    blocked.iter_mut().for_each(|b| *b = false);
                    break;
                }
                Some(l) => {
                    for &j in &p {
                        x[j] += alpha * (z[j] - x[j]);
                    }
                    x[l] = 0.0;
                    in_p[l] = false;
                    for &j in &p {
                        if j >= nf && j != l && x[j] <= 0.0 {
                            x[j] = 0.0;
                            in_p[j] = false;
                        }
                    }
                }
            }
        }
    }
    Ok((nf..n).filter(|&j| in_p[j]).collect())
}

/// A sparse inequality row `Σ a_k x_k ≤ b`.
#[derive(Debug, Clone)]
pub(crate) struct SparseRow {
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
    pub rhs: f64,
}

impl SparseRow {
    fn dot(&self, x: &[f64]) -> f64 {
        self.cols.iter().zip(&self.vals).map(|(&c, &v)| v * x[c]).sum()
    }
}

/// `min ½ Σ D_k (x_k − t_k)²` subject to `rows`.
pub(crate) struct SparseQp<'a> {
    pub diag: &'a [f64],
    pub target: &'a [f64],
    pub rows: &'a [SparseRow],
    /// Rows touching each column.
    pub col_rows: &'a [Vec<usize>],
}

/// Outcome of [`SparseQp::solve`].
pub(crate) struct QpSolution {
    pub active: Vec<usize>,
    pub multipliers: Vec<f64>,
    pub iterations: usize,
}

pub(crate) fn column_incidence(rows: &[SparseRow], ncols: usize) -> Vec<Vec<usize>> {
    let mut inc = vec![Vec::new(); ncols];
    for (r, row) in rows.iter().enumerate() {
        for &c in &row.cols {
            inc[c].push(r);
        }
    }
    inc
}

impl SparseQp<'_> {
    /// Solves the equality-constrained subproblem on `work` (sorted). Returns
    /// `Err(pos)` when the row at position `pos` is numerically dependent.
    fn eqp(&self, work: &[usize], pos_of: &mut [usize], mu: &mut Vec<f64>, xs: &mut [f64]) -> std::result::Result<(), usize> {
        let k = work.len();
        for (p, &r) in work.iter().enumerate() {
            pos_of[r] = p;
        }
        let mut first: Vec<usize> = (0..k).collect();
        for (p, &r) in work.iter().enumerate() {
            for &c in &self.rows[r].cols {
                for &r2 in &self.col_rows[c] {
                    let q = pos_of[r2];
                    if q != usize::MAX && q < first[p] {
                        first[p] = q;
                    }
                }
            }
        }
        let mut sky = Skyline::with_profile(first);
        for &r in work {
            let p = pos_of[r];
            for (&c, &v) in self.rows[r].cols.iter().zip(&self.rows[r].vals) {
                for &r2 in &self.col_rows[c] {
                    let q = pos_of[r2];
                    if q != usize::MAX && q <= p {
                        let row2 = &self.rows[r2];
                        let v2 = row2.vals[row2.cols.iter().position(|&cc| cc == c).unwrap()];
                        sky.add(p, q, v * v2 / self.diag[c]);
                    }
                }
            }
        }
        let res = sky.factor(1e-11);
        for &r in work {
            pos_of[r] = usize::MAX;
        }
        if let Err((p, _)) = res {
            return Err(p);
        }
        mu.clear();
        mu.extend(work.iter().map(|&r| self.rows[r].dot(self.target) - self.rows[r].rhs));
        sky.solve_in_place(mu);
        xs.copy_from_slice(self.target);
        for (p, &r) in work.iter().enumerate() {
            for (&c, &v) in self.rows[r].cols.iter().zip(&self.rows[r].vals) {
                xs[c] -= mu[p] * v / self.diag[c];
            }
        }
        Ok(())
    }

    /// Primal active-set iterations from the feasible `x` with the working set
    /// `work` (rows active at `x`). Bland's rule: blocking ties and dropped rows
    /// are chosen by smallest index.
    pub fn solve(&self, x: &mut [f64], work: &mut Vec<usize>, cap: usize) -> Result<QpSolution> {
        let n = x.len();
        let nr = self.rows.len();
        work.sort_unstable();
        work.dedup();
        let mut in_w = vec![false; nr];
        for &r in work.iter() {
            in_w[r] = true;
        }
        let mut pos_of = vec![usize::MAX; nr];
        let mut mu = Vec::new();
        let mut xs = vec![0.0; n];
        let scale = self.target.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(
            x.iter().fold(0.0f64, |a, v| a.max(v.abs())),
        ) + 1.0;
        let dual_tol = 1e-12 * scale;
        let step_tol = 1e-14 * scale;
        for it in 0..cap {
            if let Err(p) = self.eqp(work, &mut pos_of, &mut mu, &mut xs) {
                let r = work.remove(p);
                in_w[r] = false;
                continue;
            }
            let pmax = x.iter().zip(&xs).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            let mut moved_full = pmax <= step_tol;
            if !moved_full {
                let mut alpha = 1.0;
                let mut block = None;
                for r in 0..nr {
                    if in_w[r] {
                        continue;
                    }
                    let row = &self.rows[r];
                    let rp: f64 = row.cols.iter().zip(&row.vals).map(|(&c, &v)| v * (xs[c] - x[c])).sum();
                    if rp > 1e-14 * scale {
                        let slack = (row.rhs - row.dot(x)).max(0.0);
                        let a = slack / rp;
                        if a < alpha {
                            alpha = a;
                            block = Some(r);
                        }
                    }
                }
                match block {
                    Some(r) => {
                        for (xi, si) in x.iter_mut().zip(&xs) {
                            *xi += alpha * (si - *xi);
                        }
                        let p = work.partition_point(|&q| q < r);
                        work.insert(p, r);
                        in_w[r] = true;
                        continue;
                    }
                    None => {
                        x.copy_from_slice(&xs);
                        moved_full = true;
                    }
                }
            }
            if moved_full {
                match (0..work.len()).find(|&p| mu[p] < -dual_tol) {
                    Some(p) => {
                        let r = work.remove(p);
                        in_w[r] = false;
                    }
                    None => {
                        x.copy_from_slice(&xs);
                        let mut multipliers = vec![0.0; nr];
                        for (p, &r) in work.iter().enumerate() {
                            multipliers[r] = mu[p].max(0.0);
                        }
                        return Ok(QpSolution { active: work.clone(), multipliers, iterations: it + 1 });
                    }
                }
            }
        }
        Err(Error::NoConvergence(format!("active-set QP did not converge in {cap} iterations")))
    }
}
