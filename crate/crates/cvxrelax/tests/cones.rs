use cvxrelax::cones::{project_uniform_convex, project_weighted_cyclic, CyclicWorkspace, Hinge1DWorkspace};
use cvxrelax::envelope::{qp_oracle, DenseQp};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

/// Outward normals `a_i` of the constraints `⟨a_i, g⟩ ≤ 0`, one per row.
fn normals(n: usize, cyclic: Option<f64>) -> DMatrix<f64> {
    let idx: Vec<usize> = if cyclic.is_some() { (0..n).collect() } else { (1..n - 1).collect() };
    let mut a = DMatrix::zeros(idx.len(), n);
    for (r, &i) in idx.iter().enumerate() {
        a[(r, i)] += cyclic.unwrap_or(1.0);
        a[(r, (i + n - 1) % n)] -= 0.5;
        a[(r, (i + 1) % n)] -= 0.5;
    }
    a
}

/// Primal feasibility, nonnegative multipliers reproducing `f − g`, complementarity.
fn assert_kkt(f: &[f64], g: &[f64], cyclic: Option<f64>) {
    let n = f.len();
    let a = normals(n, cyclic);
    let gv = DVector::from_column_slice(g);
    let ag = &a * &gv;
    assert!(ag.max() <= 1e-10, "infeasible: {}", ag.max());
    let r = DVector::from_column_slice(f) - &gv;
    // multipliers only on active rows
    let active: Vec<usize> = (0..a.nrows()).filter(|&i| ag[i] > -1e-9).collect();
    if active.is_empty() {
        assert!(r.amax() <= 1e-9);
        return;
    }
    let at = DMatrix::from_fn(n, active.len(), |i, k| a[(active[k], i)]);
    // least squares through the pseudo-inverse of the Gram matrix
    let eig = (at.transpose() * &at).symmetric_eigen();
    let cut = 1e-12 * eig.eigenvalues.amax();
    let inv = DVector::from_iterator(eig.eigenvalues.len(), eig.eigenvalues.iter().map(|&e| if e > cut { 1.0 / e } else { 0.0 }));
    let lam = &eig.eigenvectors * DMatrix::from_diagonal(&inv) * eig.eigenvectors.transpose() * at.transpose() * &r;
    let fit = &at * &lam - &r;
    assert!(fit.amax() <= 1e-8, "residual not in the normal cone: {}", fit.amax());
    assert!(lam.min() >= -1e-8, "negative multiplier {}", lam.min());
    assert!(r.dot(&gv).abs() <= 1e-8 * (1.0 + gv.norm() * r.norm()));
}

fn oracle(f: &[f64], cyclic: Option<f64>) -> Vec<f64> {
    let a = normals(f.len(), cyclic);
    let ineq = (0..a.nrows()).map(|i| (a.row(i).iter().copied().collect(), 0.0)).collect();
    qp_oracle(&DenseQp::projection(f, ineq, vec![])).unwrap()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

fn vec_strategy(lo: usize, hi: usize) -> impl Strategy<Value = Vec<f64>> {
    (lo..=hi).prop_flat_map(|n| proptest::collection::vec(-2.0f64..2.0, n))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn uniform_kkt_and_oracle(f in vec_strategy(3, 12)) {
        let g = project_uniform_convex(&f, &mut Hinge1DWorkspace::new());
        assert_kkt(&f, &g, None);
        let o = oracle(&f, None);
        prop_assert!(g.iter().zip(&o).all(|(a, b)| (a - b).abs() <= 1e-8));
    }

    #[test]
    fn cyclic_kkt_and_oracle(f in vec_strategy(4, 12), w in 0.3f64..=1.0) {
        let g = project_weighted_cyclic(&f, w, &mut CyclicWorkspace::new());
        let o = oracle(&f, Some(w));
        prop_assert!(g.iter().zip(&o).all(|(a, b)| (a - b).abs() <= 1e-8), "g {:?} oracle {:?}", g, o);
        assert_kkt(&f, &g, Some(w));
    }

    #[test]
    fn projections_are_idempotent_and_nonexpansive(f in vec_strategy(5, 30), shift in vec_strategy(30, 30)) {
        let h: Vec<f64> = f.iter().zip(&shift).map(|(a, b)| a + 0.3 * b).collect();
        let mut ws = Hinge1DWorkspace::new();
        let (pf, ph) = (project_uniform_convex(&f, &mut ws), project_uniform_convex(&h, &mut ws));
        let again = project_uniform_convex(&pf, &mut ws);
        prop_assert!(dist(&pf, &again) <= 1e-10);
        prop_assert!(dist(&pf, &ph) <= dist(&f, &h) + 1e-10);

        let mut cw = CyclicWorkspace::new();
        let (pf, ph) = (project_weighted_cyclic(&f, 0.9, &mut cw), project_weighted_cyclic(&h, 0.9, &mut cw));
        let again = project_weighted_cyclic(&pf, 0.9, &mut cw);
        prop_assert!(dist(&pf, &again) <= 1e-10);
        prop_assert!(dist(&pf, &ph) <= dist(&f, &h) + 1e-10);
    }

    /// `f = P_K f + P_{K°} f` with orthogonal parts; the polar part is the
    /// projection onto the cone generated by the outward normals.
    #[test]
    fn moreau_decomposition(f in vec_strategy(3, 10)) {
        let g = project_uniform_convex(&f, &mut Hinge1DWorkspace::new());
        let r: Vec<f64> = f.iter().zip(&g).map(|(a, b)| a - b).collect();
        prop_assert!(r.iter().zip(&g).map(|(a, b)| a * b).sum::<f64>().abs() <= 1e-9);
        // P_K of the polar part is zero
        let z = project_uniform_convex(&r, &mut Hinge1DWorkspace::new());
        prop_assert!(z.iter().all(|v| v.abs() <= 1e-9));
    }

    #[test]
    fn warm_start_matches_cold(f in vec_strategy(3, 12), d in vec_strategy(12, 12), w in 0.3f64..=1.0) {
        let h: Vec<f64> = f.iter().zip(&d).map(|(a, b)| a + 0.05 * b).collect();
        let mut ws = Hinge1DWorkspace::new();
        project_uniform_convex(&f, &mut ws);
        let warm = project_uniform_convex(&h, &mut ws);
        let cold = project_uniform_convex(&h, &mut Hinge1DWorkspace::new());
        prop_assert!(warm.iter().zip(&cold).all(|(a, b)| (a - b).abs() <= 1e-12));
        if f.len() >= 4 {
            let mut cw = CyclicWorkspace::new();
            project_weighted_cyclic(&f, w, &mut cw);
            let warm = project_weighted_cyclic(&h, w, &mut cw);
            let cold = project_weighted_cyclic(&h, w, &mut CyclicWorkspace::new());
            prop_assert!(warm.iter().zip(&cold).all(|(a, b)| (a - b).abs() <= 1e-12));
        }
    }
}

#[test]
fn long_sequences_satisfy_kkt() {
    let f: Vec<f64> = (0..200).map(|i| ((i as f64) * 0.37).sin() + 0.001 * (i as f64 - 100.0).powi(2)).collect();
    let g = project_uniform_convex(&f, &mut Hinge1DWorkspace::new());
    assert_kkt(&f, &g, None);
    let g = project_weighted_cyclic(&f[..120], 0.995, &mut CyclicWorkspace::new());
    assert_kkt(&f[..120], &g, Some(0.995));
}

/// Convex input is returned unchanged; a concave tent is flattened to its mean line.
#[test]
fn closed_forms() {
    let f: Vec<f64> = (0..9).map(|i| (i as f64 - 3.0).powi(2)).collect();
    assert_eq!(project_uniform_convex(&f, &mut Hinge1DWorkspace::new()), f);
    let tent = [0.0, 1.0, 0.0];
    let g = project_uniform_convex(&tent, &mut Hinge1DWorkspace::new());
    for v in g {
        assert!((v - 1.0 / 3.0).abs() < 1e-14);
    }
}
