//! Sparse storage and a profile (skyline) Cholesky factorization with
//! reverse Cuthill–McKee ordering.

use crate::error::{Error, Result};
use std::collections::VecDeque;

/// Compressed sparse row matrix.
#[derive(Debug, Clone, Default)]
pub struct CsrMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub ptr: Vec<usize>,
    pub idx: Vec<usize>,
    pub val: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a matrix from `(row, col, value)` triplets, summing duplicates.
    pub fn from_triplets(nrows: usize, ncols: usize, mut trip: Vec<(usize, usize, f64)>) -> Self {
        trip.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut ptr = vec![0usize; nrows + 1];
        let mut idx = Vec::with_capacity(trip.len());
        let mut val: Vec<f64> = Vec::with_capacity(trip.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in trip {
            assert!(r < nrows && c < ncols, "triplet ({r},{c}) out of bounds");
            if last == Some((r, c)) {
                *val.last_mut().unwrap() += v;
            } else {
                idx.push(c);
                val.push(v);
                ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..nrows {
            ptr[r + 1] += ptr[r];
        }
        CsrMatrix { nrows, ncols, ptr, idx, val }
    }

    pub fn identity(n: usize) -> Self {
        CsrMatrix {
            nrows: n,
            ncols: n,
            ptr: (0..=n).collect(),
            idx: (0..n).collect(),
            val: vec![1.0; n],
        }
    }

    pub fn nnz(&self) -> usize {
        self.idx.len()
    }

    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.ptr[r], self.ptr[r + 1]);
        (&self.idx[a..b], &self.val[a..b])
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (cols, vals) = self.row(r);
        match cols.binary_search(&c) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    /// `y = A x`.
    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        for (r, yr) in y.iter_mut().enumerate().take(self.nrows) {
            let (cols, vals) = self.row(r);
            *yr = cols.iter().zip(vals).map(|(&c, &v)| v * x[c]).sum();
        }
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut trip = Vec::with_capacity(self.nnz());
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                trip.push((c, r, v));
            }
        }
        CsrMatrix::from_triplets(self.ncols, self.nrows, trip)
    }

    /// `xᵀ A x`.
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        (0..self.nrows)
            .map(|r| {
                let (cols, vals) = self.row(r);
                x[r] * cols.iter().zip(vals).map(|(&c, &v)| v * x[c]).sum::<f64>()
            })
            .sum()
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.nrows == self.ncols
            && (0..self.nrows).all(|r| {
                let (cols, vals) = self.row(r);
                cols.iter()
                    .zip(vals)
                    .all(|(&c, &v)| (self.get(c, r) - v).abs() <= tol * (1.0 + v.abs()))
            })
    }
}

/// Lower-triangular profile storage: row `i` holds columns `first[i]..=i`.
#[derive(Debug, Clone)]
pub struct Skyline {
    first: Vec<usize>,
    start: Vec<usize>,
    data: Vec<f64>,
}

impl Skyline {
    /// Zeroed storage for the given row profile (`first[i] <= i`).
    pub fn with_profile(first: Vec<usize>) -> Self {
        let mut start = Vec::with_capacity(first.len() + 1);
        start.push(0);
        for (i, &f) in first.iter().enumerate() {
            debug_assert!(f <= i);
            start.push(start[i] + (i - f + 1));
        }
        let len = *start.last().unwrap();
        Skyline { first, start, data: vec![0.0; len] }
    }

    pub fn dim(&self) -> usize {
        self.first.len()
    }

    pub fn profile_len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> usize {
        self.start[i] + (j - self.first[i])
    }

    /// Adds `v` at `(i, j)` with `j <= i` inside the profile.
    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = self.at(i, j);
        self.data[k] += v;
    }

    /// In-place `L Lᵀ` factorization. A pivot below `rel_tol · max diagonal`
    /// is reported as `Err(row)`.
    pub fn factor(&mut self, rel_tol: f64) -> std::result::Result<(), (usize, f64)> {
        let n = self.dim();
        let max_diag = (0..n)
            .map(|i| self.data[self.at(i, i)].abs())
            .fold(0.0, f64::max);
        let floor = rel_tol * max_diag.max(f64::MIN_POSITIVE);
        for i in 0..n {
            let fi = self.first[i];
            let si = self.start[i];
            for j in fi..i {
                let fj = self.first[j];
                let sj = self.start[j];
                let k0 = fi.max(fj);
                let mut s = self.data[si + (j - fi)];
                let ri = &self.data[si + (k0 - fi)..si + (j - fi)];
                let rj = &self.data[sj + (k0 - fj)..sj + (j - fj)];
                s -= ri.iter().zip(rj).map(|(a, b)| a * b).sum::<f64>();
                let djj = self.data[sj + (j - fj)];
                self.data[si + (j - fi)] = s / djj;
            }
            let row = &self.data[si..si + (i - fi)];
            let d = self.data[si + (i - fi)] - row.iter().map(|a| a * a).sum::<f64>();
            if !(d > floor) {
                return Err((i, d));
            }
            self.data[si + (i - fi)] = d.sqrt();
        }
        Ok(())
    }

    /// Solves `L Lᵀ x = b` in place (after [`Skyline::factor`]).
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.dim();
        for i in 0..n {
            let fi = self.first[i];
            let si = self.start[i];
            let row = &self.data[si..si + (i - fi)];
            let s: f64 = row.iter().zip(&b[fi..i]).map(|(a, x)| a * x).sum();
            b[i] = (b[i] - s) / self.data[si + (i - fi)];
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            let si = self.start[i];
            let xi = b[i] / self.data[si + (i - fi)];
            b[i] = xi;
            let row = &self.data[si..si + (i - fi)];
            for (bk, a) in b[fi..i].iter_mut().zip(row) {
                *bk -= a * xi;
            }
        }
    }
}

/// Reverse Cuthill–McKee ordering of a symmetric adjacency structure.
/// Returns `perm` with `perm[new] = old`.
pub fn reverse_cuthill_mckee(adj: &[Vec<usize>]) -> Vec<usize> {
    let n = adj.len();
    let deg: Vec<usize> = adj.iter().map(|a| a.len()).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut level = vec![usize::MAX; n];

    // BFS returning the nodes of the last level.
    let bfs_last_level = |root: usize, level: &mut Vec<usize>, visited: &[bool]| -> Vec<usize> {
        let mut touched = vec![root];
        level[root] = 0;
        let mut q = VecDeque::from([root]);
        let mut maxl = 0;
        while let Some(u) = q.pop_front() {
            for &v in &adj[u] {
                if !visited[v] && level[v] == usize::MAX {
                    level[v] = level[u] + 1;
                    maxl = maxl.max(level[v]);
                    touched.push(v);
                    q.push_back(v);
                }
            }
        }
        let last: Vec<usize> = touched.iter().copied().filter(|&v| level[v] == maxl).collect();
        for &v in &touched {
            level[v] = usize::MAX;
        }
        last
    };

    for seed in 0..n {
        if visited[seed] {
            continue;
        }
        // Pseudo-peripheral start: repeat BFS from a minimum-degree node of the last level.
        let mut root = seed;
        let mut depth_nodes = bfs_last_level(root, &mut level, &visited);
        for _ in 0..4 {
            let cand = *depth_nodes.iter().min_by_key(|&&v| deg[v]).unwrap();
            if cand == root {
                break;
            }
            let next = bfs_last_level(cand, &mut level, &visited);
            root = cand;
            if next == depth_nodes {
                break;
            }
            depth_nodes = next;
        }
        visited[root] = true;
        let start = order.len();
        order.push(root);
        let mut head = start;
        while head < order.len() {
            let u = order[head];
            head += 1;
            let mut nb: Vec<usize> = adj[u].iter().copied().filter(|&v| !visited[v]).collect();
            nb.sort_unstable_by_key(|&v| (deg[v], v));
            for v in nb {
                if !visited[v] {
                    visited[v] = true;
                    order.push(v);
                }
            }
        }
    }
    order.reverse();
    order
}

/// Sparse symmetric positive definite factorization `P A Pᵀ = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct SparseCholesky {
    perm: Vec<usize>,
    sky: Skyline,
}

impl SparseCholesky {
    /// Factors a symmetric matrix (only its lower triangle is read).
    pub fn factor(a: &CsrMatrix, rel_tol: f64) -> Result<Self> {
        let n = a.nrows;
        let mut adj = vec![Vec::new(); n];
        for r in 0..n {
            let (cols, _) = a.row(r);
            for &c in cols {
                if c < r {
                    adj[r].push(c);
                    adj[c].push(r);
                }
            }
        }
        let perm = reverse_cuthill_mckee(&adj);
        let mut iperm = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            iperm[old] = new;
        }
        let mut first: Vec<usize> = (0..n).collect();
        for r in 0..n {
            let (cols, _) = a.row(r);
            for &c in cols {
                let (i, j) = (iperm[r], iperm[c]);
                let (i, j) = if i >= j { (i, j) } else { (j, i) };
                first[i] = first[i].min(j);
            }
        }
        let mut sky = Skyline::with_profile(first);
        for r in 0..n {
            let (cols, vals) = a.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                if c <= r {
                    let (i, j) = (iperm[r], iperm[c]);
                    let (i, j) = if i >= j { (i, j) } else { (j, i) };
                    sky.add(i, j, v);
                }
            }
        }
        sky.factor(rel_tol).map_err(|(pivot, value)| Error::NotPositiveDefinite {
            pivot: perm[pivot],
            value,
        })?;
        Ok(SparseCholesky { perm, sky })
    }

    pub fn dim(&self) -> usize {
        self.perm.len()
    }

    /// Number of stored factor entries.
    pub fn fill(&self) -> usize {
        self.sky.profile_len()
    }

    pub fn solve(&self, b: &[f64], x: &mut [f64], scratch: &mut Vec<f64>) {
        scratch.clear();
        scratch.extend(self.perm.iter().map(|&p| b[p]));
        self.sky.solve_in_place(scratch);
        for (k, &p) in self.perm.iter().enumerate() {
            x[p] = scratch[k];
        }
    }
}

/// Solves a small dense system by Gaussian elimination with partial pivoting.
/// `a` is row-major `n × n`. Returns `None` when a pivot is below `tol`.
pub fn solve_dense(a: &mut [f64], b: &mut [f64], n: usize, tol: f64) -> Option<()> {
    for k in 0..n {
        let p = (k..n)
            .max_by(|&i, &j| a[i * n + k].abs().total_cmp(&a[j * n + k].abs()))
            .unwrap();
        if a[p * n + k].abs() <= tol {
            return None;
        }
        if p != k {
            for c in 0..n {
                a.swap(k * n + c, p * n + c);
            }
            b.swap(k, p);
        }
        let piv = a[k * n + k];
        for i in k + 1..n {
            let f = a[i * n + k] / piv;
            if f != 0.0 {
                for c in k..n {
                    a[i * n + c] -= f * a[k * n + c];
                }
                b[i] -= f * b[k];
            }
        }
    }
    for k in (0..n).rev() {
        let s: f64 = (k + 1..n).map(|c| a[k * n + c] * b[c]).sum();
        b[k] = (b[k] - s) / a[k * n + k];
    }
    Some(())
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
