//! Simultaneous-direction method of multipliers for `min Σ g_i(L_i x)`.
//!
//! With `Q = Σ L_iᵀ L_i` prefactored, one iteration is
//!
//! ```text
//! x ← Q⁻¹ Σ L_iᵀ (y_i − z_i)
//! s_i ← L_i x
//! y_i ← prox_γ g_i(s_i + z_i)
//! z_i ← z_i + s_i − y_i
//! ```
//!
//! Row offsets are supported: a block sees `L_i x + o_i`, so the x-update uses
//! `y_i − z_i − o_i`.

use crate::constraints::ConstraintBlock;
use crate::error::{Error, Result};
use crate::functionals::{ProxTerm, ProxWorkspace};
use crate::linalg::{CsrMatrix, SparseCholesky};
use crate::mesh::NodalField;
use crate::row::EvalRow;
use rayon::prelude::*;
use std::time::{Duration, Instant};

/// Linear map of a block.
#[derive(Debug, Clone)]
pub enum Operator {
    Identity,
    Rows(Vec<EvalRow>),
}

/// `g(L x)` for one term.
#[derive(Debug, Clone)]
pub struct Block {
    pub op: Operator,
    pub term: ProxTerm,
}

impl Block {
    pub fn identity(term: ProxTerm) -> Self {
        Block { op: Operator::Identity, term }
    }

    pub fn rows(rows: Vec<EvalRow>, term: ProxTerm) -> Self {
        Block { op: Operator::Rows(rows), term }
    }

    /// Number of rows, given the problem dimension.
    pub fn len(&self, dim: usize) -> usize {
        match &self.op {
            Operator::Identity => dim,
            Operator::Rows(r) => r.len(),
        }
    }
}

impl From<ConstraintBlock> for Block {
    fn from(b: ConstraintBlock) -> Self {
        Block { op: Operator::Rows(b.rows), term: ProxTerm::Indicator(b.cone) }
    }
}

#[derive(Debug, Clone)]
pub struct SdmmProblem {
    pub dim: usize,
    pub blocks: Vec<Block>,
}

impl SdmmProblem {
    pub fn new(dim: usize) -> Self {
        SdmmProblem { dim, blocks: Vec::new() }
    }

    pub fn push(&mut self, block: impl Into<Block>) -> &mut Self {
        self.blocks.push(block.into());
        self
    }

    pub fn extend(&mut self, blocks: impl IntoIterator<Item = ConstraintBlock>) -> &mut Self {
        self.blocks.extend(blocks.into_iter().map(Block::from));
        self
    }

    pub fn num_rows(&self) -> usize {
        self.blocks.iter().map(|b| b.len(self.dim)).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.blocks.is_empty() {
            return Err(Error::InvalidInput("problem has no blocks".into()));
        }
        for (i, b) in self.blocks.iter().enumerate() {
            if let Operator::Rows(rows) = &b.op {
                if rows.iter().any(|r| !r.is_valid() || r.max_index().is_some_and(|m| m >= self.dim)) {
                    return Err(Error::InvalidInput(format!("block {i} has rows outside the problem dimension")));
                }
            }
            b.term
                .validate(b.len(self.dim))
                .map_err(|e| Error::InvalidInput(format!("block {i}: {e}")))?;
        }
        Ok(())
    }

    /// Sum of the non-indicator terms at `x`.
    pub fn objective(&self, x: &[f64]) -> f64 {
        self.blocks
            .iter()
            .filter(|b| !b.term.is_indicator())
            .map(|b| match &b.op {
                Operator::Identity => b.term.value(x),
                Operator::Rows(rows) => b.term.value(&rows.iter().map(|r| r.apply(x)).collect::<Vec<_>>()),
            })
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub gamma: f64,
    pub max_iterations: usize,
    /// Stop once `max_i ‖L_i x − y_i‖_∞` and the last step `‖x_n − x_{n−1}‖_∞`
    /// both fall to this value.
    pub primal_residual_tol: f64,
    /// Trace and callback period; 0 disables both.
    pub log_every: usize,
    pub parallel: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { gamma: 1.0, max_iterations: 10_000, primal_residual_tol: 1e-7, log_every: 100, parallel: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    pub iteration: usize,
    pub residual: f64,
    pub objective: f64,
}

#[derive(Debug, Clone)]
pub struct SolverReport {
    pub iterations: usize,
    /// `max_i ‖L_i x − y_i‖_∞` for the returned `x`.
    pub residual: f64,
    /// `‖x_n − x_{n−1}‖_∞` of the last iteration.
    pub step: f64,
    pub converged: bool,
    pub objective: f64,
    pub trace: Vec<TracePoint>,
    pub wall_time: Duration,
}

impl SolverReport {
    /// CSV dump of the trace.
    pub fn trace_csv(&self) -> String {
        let mut s = String::from("iteration,residual,objective\n");
        for t in &self.trace {
            s.push_str(&format!("{},{:e},{:.12e}\n", t.iteration, t.residual, t.objective));
        }
        s
    }
}

/// Factorized `Q = Σ L_iᵀ L_i`.
#[derive(Debug, Clone)]
pub enum NormalMatrix {
    Diagonal(Vec<f64>),
    Cholesky(SparseCholesky),
}

impl NormalMatrix {
    pub fn solve(&self, b: &[f64], x: &mut [f64], scratch: &mut Vec<f64>) {
        match self {
            NormalMatrix::Diagonal(d) => {
                for i in 0..b.len() {
                    x[i] = b[i] / d[i];
                }
            }
            NormalMatrix::Cholesky(c) => c.solve(b, x, scratch),
        }
    }
}

/// `Σ L_iᵀ L_i` as a sparse matrix.
pub fn normal_matrix(problem: &SdmmProblem) -> CsrMatrix {
    let n = problem.dim;
    // rows of Q are short (mesh neighbourhoods), so a linear scan per entry is cheap
    let mut acc: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    let mut add = |i: usize, j: usize, v: f64| {
        let row = &mut acc[i];
        match row.iter_mut().find(|e| e.0 == j) {
            Some(e) => e.1 += v,
            None => row.push((j, v)),
        }
    };
    for b in &problem.blocks {
        match &b.op {
            Operator::Identity => (0..n).for_each(|i| add(i, i, 1.0)),
            Operator::Rows(rows) => {
                for r in rows {
                    for (i, wi) in r.iter() {
                        for (j, wj) in r.iter() {
                            add(i, j, wi * wj);
                        }
                    }
                }
            }
        }
    }
    let trip = acc
        .into_iter()
        .enumerate()
        .flat_map(|(i, row)| row.into_iter().map(move |(j, v)| (i, j, v)))
        .collect();
    CsrMatrix::from_triplets(n, n, trip)
}

/// Assembles and factors `Q`; a singular `Q` is reported with advice to add an
/// identity-operator block.
pub fn assemble_normal_matrix(problem: &SdmmProblem) -> Result<NormalMatrix> {
    if problem.blocks.is_empty() {
        return Err(Error::InvalidInput("problem has no blocks".into()));
    }
    let q = normal_matrix(problem);
    let n = problem.dim;
    let diagonal = (0..n).all(|r| q.row(r).0.iter().all(|&c| c == r));
    if diagonal {
        let d: Vec<f64> = (0..n).map(|i| q.get(i, i)).collect();
        let max = d.iter().fold(0.0f64, |m, v| m.max(*v));
        if let Some(i) = d.iter().position(|&v| !(v > 1e-12 * max)) {
            return Err(Error::SingularNormalMatrix { pivot: i, value: d[i] });
        }
        return Ok(NormalMatrix::Diagonal(d));
    }
    match SparseCholesky::factor(&q, 1e-12) {
        Ok(c) => Ok(NormalMatrix::Cholesky(c)),
        Err(Error::NotPositiveDefinite { pivot, value }) => Err(Error::SingularNormalMatrix { pivot, value }),
        Err(e) => Err(e),
    }
}

/// Per-block iterate storage: a local CSR copy of the operator plus `y`, `z`, `s`.
struct BlockState {
    ptr: Vec<usize>,
    idx: Vec<usize>,
    val: Vec<f64>,
    offset: Vec<f64>,
    identity: bool,
    y: Vec<f64>,
    z: Vec<f64>,
    s: Vec<f64>,
    tmp: Vec<f64>,
    ws: ProxWorkspace,
}

impl BlockState {
    fn new(block: &Block, dim: usize) -> Self {
        let (mut ptr, mut idx, mut val, mut offset) = (vec![0], Vec::new(), Vec::new(), Vec::new());
        let identity = matches!(block.op, Operator::Identity);
        if let Operator::Rows(rows) = &block.op {
            for r in rows {
                idx.extend_from_slice(r.indices());
                val.extend_from_slice(r.weights());
                ptr.push(idx.len());
                offset.push(r.offset);
            }
        }
        let m = block.len(dim);
        BlockState {
            ptr,
            idx,
            val,
            offset,
            identity,
            y: vec![0.0; m],
            z: vec![0.0; m],
            s: vec![0.0; m],
            tmp: vec![0.0; m],
            ws: block.term.workspace(),
        }
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        if self.identity {
            out.copy_from_slice(x);
            return;
        }
        for (r, o) in out.iter_mut().enumerate() {
            let mut acc = self.offset[r];
            for k in self.ptr[r]..self.ptr[r + 1] {
                acc += self.val[k] * x[self.idx[k]];
            }
            *o = acc;
        }
    }

    /// `rhs += Lᵀ (y − z − o)`.
    fn scatter(&self, rhs: &mut [f64]) {
        if self.identity {
            for i in 0..rhs.len() {
                rhs[i] += self.y[i] - self.z[i];
            }
            return;
        }
        for r in 0..self.y.len() {
            let c = self.y[r] - self.z[r] - self.offset[r];
            for k in self.ptr[r]..self.ptr[r + 1] {
                rhs[self.idx[k]] += self.val[k] * c;
            }
        }
    }

    /// Prox and dual update from `x`; returns `‖s − y‖_∞` or `None` on a non-finite prox.
    fn update(&mut self, term: &ProxTerm, gamma: f64, x: &[f64]) -> Result<Option<f64>> {
        let mut s = std::mem::take(&mut self.s);
        self.apply(x, &mut s);
        for i in 0..s.len() {
            self.tmp[i] = s[i] + self.z[i];
        }
        term.prox_into(gamma, &self.tmp, &mut self.y, &mut self.ws)?;
        let mut res = 0.0f64;
        for i in 0..s.len() {
            let d = s[i] - self.y[i];
            if !d.is_finite() {
                self.s = s;
                return Ok(None);
            }
            self.z[i] += d;
            res = res.max(d.abs());
        }
        self.s = s;
        Ok(Some(res))
    }
}

/// Runs SDMM from `xi0` (`y_i = L_i ξ₀ + o_i`, `z_i = 0`). The callback receives a
/// trace point every `log_every` iterations.
pub fn solve(
    problem: &SdmmProblem,
    config: &SolverConfig,
    xi0: &[f64],
    mut callback: Option<&mut dyn FnMut(&TracePoint)>,
) -> Result<(NodalField, SolverReport)> {
    let start = Instant::now();
    if !(config.gamma > 0.0) || config.max_iterations == 0 {
        return Err(Error::InvalidInput("need γ > 0 and at least one iteration".into()));
    }
    if xi0.len() != problem.dim {
        return Err(Error::InvalidInput("initial point has the wrong dimension".into()));
    }
    problem.validate()?;
    let q = assemble_normal_matrix(problem)?;
    let n = problem.dim;
    let mut states: Vec<BlockState> = problem.blocks.iter().map(|b| BlockState::new(b, n)).collect();
    for st in &mut states {
        let mut y = std::mem::take(&mut st.y);
        st.apply(xi0, &mut y);
        st.y = y;
    }
    let mut x = xi0.to_vec();
    let mut x_prev = x.clone();
    let mut step = f64::INFINITY;
    let mut rhs = vec![0.0; n];
    let mut scratch = Vec::new();
    let mut trace = Vec::new();
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    let mut converged = false;
    let gamma = config.gamma;
    for it in 1..=config.max_iterations {
        rhs.iter_mut().for_each(|v| *v = 0.0);
        for st in &states {
            st.scatter(&mut rhs);
        }
        x_prev.copy_from_slice(&x);
        q.solve(&rhs, &mut x, &mut scratch);
        step = x.iter().zip(&x_prev).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if x.iter().any(|v| !v.is_finite()) {
            // the x-update is not attached to a block
            return Err(Error::NonFinite { iteration: it, block: usize::MAX });
        }
        let results: Vec<Result<Option<f64>>> = if config.parallel {
            states
                .par_iter_mut()
                .zip(problem.blocks.par_iter())
                .map(|(st, b)| st.update(&b.term, gamma, &x))
                .collect()
        } else {
            states.iter_mut().zip(&problem.blocks).map(|(st, b)| st.update(&b.term, gamma, &x)).collect()
        };
        residual = 0.0;
        for (bi, r) in results.into_iter().enumerate() {
            match r? {
                Some(v) => residual = residual.max(v),
                None => return Err(Error::NonFinite { iteration: it, block: bi }),
            }
        }
        iterations = it;
        let done = residual.max(step) <= config.primal_residual_tol;
        if config.log_every > 0 && (it % config.log_every == 0 || done || it == config.max_iterations) {
            let tp = TracePoint { iteration: it, residual, objective: problem.objective(&x) };
            if let Some(cb) = callback.as_mut() {
                cb(&tp);
            }
            trace.push(tp);
        }
        if done {
            converged = true;
            break;
        }
    }
    let objective = problem.objective(&x);
    let report = SolverReport { iterations, residual, step, converged, objective, trace, wall_time: start.elapsed() };
    Ok((NodalField::new(x), report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::Cone;

    #[test]
    fn identity_blocks_give_scaled_identity() {
        let mut p = SdmmProblem::new(3);
        p.push(Block::identity(ProxTerm::l2(vec![0.0; 3])));
        match assemble_normal_matrix(&p).unwrap() {
            NormalMatrix::Diagonal(d) => assert_eq!(d, vec![1.0; 3]),
            _ => panic!("expected a diagonal Q"),
        }
        p.push(Block::identity(ProxTerm::l2(vec![0.0; 3])));
        match assemble_normal_matrix(&p).unwrap() {
            NormalMatrix::Diagonal(d) => assert_eq!(d, vec![2.0; 3]),
            _ => panic!("expected a diagonal Q"),
        }
    }

    #[test]
    fn singular_q_asks_for_identity_block() {
        let mut p = SdmmProblem::new(3);
        p.push(Block::rows(vec![EvalRow::new(vec![(0, 1.0), (1, -1.0)])], ProxTerm::Linear { c: vec![1.0] }));
        let e = assemble_normal_matrix(&p).unwrap_err();
        assert!(e.to_string().contains("identity operator"));
    }

    #[test]
    fn point_indicator_reaches_target() {
        let h0 = vec![1.0, -2.0, 0.5];
        let mut p = SdmmProblem::new(3);
        p.push(Block::identity(ProxTerm::Indicator(Cone::Point { target: h0.clone() })));
        let cfg = SolverConfig { primal_residual_tol: 0.0, max_iterations: 5, ..Default::default() };
        let (x, _) = solve(&p, &cfg, &[0.0; 3], None).unwrap();
        assert_eq!(x.values, h0);
    }

    #[test]
    fn halfspace_projection() {
        let y0 = vec![1.0, 2.0, -0.5];
        let a = vec![1.0, 1.0, 1.0];
        let mut p = SdmmProblem::new(3);
        p.push(Block::identity(ProxTerm::l2(y0.clone())));
        p.push(Block::identity(ProxTerm::Indicator(Cone::Halfspace { normal: a.clone(), offset: 0.0 })));
        let cfg = SolverConfig { primal_residual_tol: 1e-12, max_iterations: 5000, ..Default::default() };
        let (x, rep) = solve(&p, &cfg, &y0, None).unwrap();
        assert!(rep.converged);
        let t = 2.5 / 3.0;
        for i in 0..3 {
            assert!((x.values[i] - (y0[i] - t * a[i])).abs() < 1e-9);
        }
    }
}
