//! Sparse linear functionals on coefficient vectors.

/// A sparse row `x ↦ Σ w_k x[idx_k] + offset`.
///
/// Indices are kept strictly increasing; duplicate indices are merged on construction.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EvalRow {
    idx: Vec<usize>,
    w: Vec<f64>,
    pub offset: f64,
}

impl EvalRow {
    pub fn new(mut pairs: Vec<(usize, f64)>) -> Self {
        pairs.sort_by_key(|p| p.0);
        let mut idx = Vec::with_capacity(pairs.len());
        let mut w: Vec<f64> = Vec::with_capacity(pairs.len());
        for (i, v) in pairs {
            if idx.last() == Some(&i) {
                *w.last_mut().unwrap() += v;
            } else {
                idx.push(i);
                w.push(v);
            }
        }
        EvalRow { idx, w, offset: 0.0 }
    }

    /// The coordinate functional `x ↦ x[i]`.
    pub fn unit(i: usize) -> Self {
        EvalRow { idx: vec![i], w: vec![1.0], offset: 0.0 }
    }

    pub fn with_offset(mut self, offset: f64) -> Self {
        self.offset = offset;
        self
    }

    pub fn indices(&self) -> &[usize] {
        &self.idx
    }

    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    pub fn nnz(&self) -> usize {
        self.idx.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.idx.iter().copied().zip(self.w.iter().copied())
    }

    /// Linear part only.
    pub fn dot(&self, x: &[f64]) -> f64 {
        self.iter().map(|(i, w)| w * x[i]).sum()
    }

    /// Linear part plus offset.
    pub fn apply(&self, x: &[f64]) -> f64 {
        self.dot(x) + self.offset
    }

    pub fn max_index(&self) -> Option<usize> {
        self.idx.last().copied()
    }

    pub fn is_valid(&self) -> bool {
        self.idx.windows(2).all(|p| p[0] < p[1])
            && self.w.iter().all(|v| v.is_finite())
            && self.offset.is_finite()
    }
}
