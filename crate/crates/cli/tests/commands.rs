use cvxrelax::sdmm::SolverConfig;
use cvxrelax_cli::experiments::*;
use std::path::{Path, PathBuf};
use std::process::Command;

fn solver(gamma: f64, iters: usize, tol: f64) -> SolverConfig {
    SolverConfig { gamma, max_iterations: iters, primal_residual_tol: tol, log_every: 0, parallel: false }
}

fn scratch(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("cvxrelax-test-{name}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&d);
    d
}

fn cvxrelax(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_cvxrelax")).args(args).output().expect("binary runs")
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn assert_files(dir: &Path, names: &[&str]) {
    for n in names {
        let p = dir.join(n);
        let len = std::fs::metadata(&p).unwrap_or_else(|_| panic!("missing {}", p.display())).len();
        assert!(len > 0, "{} is empty", p.display());
    }
}

fn denoise_2d(noise: f64) -> DenoiseResult {
    let points = 40;
    let eps = 2.0 * 2f64.sqrt() * 2.0 / (points - 1) as f64;
    denoise(&DenoiseParams { dim: 2, points, eps, noise, seed: 1 }, &solver(DENOISE_GAMMA, 3000, 1e-8)).unwrap()
}

#[test]
fn denoise_2d_moves_toward_the_truth() {
    let r = denoise_2d(1.0 / 40.0);
    assert!(r.solved.violation <= 1e-6, "violation {}", r.solved.violation);
    assert!(r.l2_error <= r.l2_noisy, "{} > {}", r.l2_error, r.l2_noisy);
}

#[test]
fn noiseless_denoise_is_a_fixed_point() {
    let r = denoise_2d(0.0);
    let d = max_diff(&r.solved.x, &r.u0);
    assert!(d <= 1e-6, "moved by {d}");
}

#[test]
fn noisy_support_projection() {
    let p = SupportParams { freq: 10, circles: 500, circle_step: 0.05, noise: 0.05, seed: 1 };
    let r = project_support(&p, &solver(1.0, 4000, 1e-8)).unwrap();
    assert!(r.solved.violation <= 1e-5, "violation {}", r.solved.violation);
    assert!(r.support_excess <= 1e-6, "support excess {}", r.support_excess);
    r.body.validate(1e-6).unwrap();
    assert!(r.volume > 0.0);
}

#[test]
fn exact_support_is_nearly_unchanged() {
    // the circle step must be several mesh spacings for the kinked samples to be feasible
    let p = SupportParams { freq: 10, circles: 500, circle_step: 0.4, noise: 0.0, seed: 1 };
    let r = project_support(&p, &solver(1.0, 4000, 1e-8)).unwrap();
    assert!(r.max_change <= 1e-4, "changed by {}", r.max_change);
}

#[test]
fn constant_width_ball_is_a_fixed_point() {
    let freq = 6;
    let n = 10 * freq * freq + 2;
    let p = WidthParams {
        freq,
        circles: 100,
        circle_step: 0.1,
        norm: Norm::LInf,
        alpha: None,
        edge: 1.0,
        seed: 1,
        input: Some(vec![0.5; n]),
    };
    let r = constant_width(&p, &solver(1.0, 2000, 1e-10)).unwrap();
    let d = max_diff(&r.solved.x, &vec![0.5; n]);
    assert!(d <= 1e-8, "moved by {d}");
    assert!(r.widths.relative_error <= 1e-8);
}

#[test]
fn constant_width_l1_matches_reference_measures() {
    let p = WidthParams {
        freq: 10,
        circles: 500,
        circle_step: WIDTH_CIRCLE_STEP,
        norm: Norm::L1,
        alpha: None,
        edge: 1.0,
        seed: 1,
        input: None,
    };
    let r = constant_width(&p, &solver(WIDTH_GAMMA, WIDTH_ITERS, 1e-9)).unwrap();
    let (surface, volume) = (r.surface, r.volume);
    assert!((surface / 2.6616 - 1.0).abs() <= 0.15, "surface {surface}");
    assert!((volume / 0.36432 - 1.0).abs() <= 0.15, "volume {volume}");
}

#[test]
fn denoise_3d_writes_every_artifact() {
    let dir = scratch("denoise3d");
    let out = cvxrelax(&["denoise", "--dim", "3", "--iters", "20", "--out", dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_files(&dir, &["run.json", "table.csv", "trace.csv", "solution.txt", "input.txt", "mesh.txt"]);
    let run: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.join("run.json")).unwrap()).unwrap();
    assert_eq!(run["metrics"]["points"], 20);
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn reruns_write_identical_tables() {
    let run = |tag: &str| {
        let dir = scratch(tag);
        let out = cvxrelax(&[
            "denoise", "--dim", "2", "--set", "points=15", "--iters", "300", "--seed", "7", "--out",
            dir.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        dir
    };
    let (a, b) = (run("rerun-a"), run("rerun-b"));
    for f in ["table.csv", "trace.csv", "solution.txt"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f} differs");
    }
    std::fs::remove_dir_all(&a).unwrap();
    std::fs::remove_dir_all(&b).unwrap();
}

#[test]
fn principal_agent_variants_write_their_extras() {
    let dir = scratch("radial");
    let out = cvxrelax(&[
        "principal-agent", "--variant", "radial", "--delta", "0.1", "--iters", "50", "--set", "oracle_n=100", "--out",
        dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_files(&dir, &["run.json", "table.csv", "profile.csv", "solution.txt"]);
    std::fs::remove_dir_all(&dir).unwrap();

    let dir = scratch("rochet");
    let out = cvxrelax(&[
        "principal-agent", "--variant", "rochet-chone", "--set", "points=11", "--iters", "50", "--out",
        dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_files(&dir, &["run.json", "table.csv", "gradients.csv", "solution.txt"]);
    let rows = std::fs::read_to_string(dir.join("gradients.csv")).unwrap().lines().count();
    assert_eq!(rows, 1 + 2 * 10 * 10);
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn verify_reports_and_exit_codes() {
    let out = cvxrelax(&["verify", "lemma-2.12", "lemma-3.5", "cones-oracle"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.lines().count() >= 3 && text.lines().all(|l| l.starts_with("PASS ")), "{text}");

    assert_eq!(cvxrelax(&["verify", "no-such-suite"]).status.code(), Some(2));
    assert_eq!(cvxrelax(&["denoise", "--dim", "5"]).status.code(), Some(2));
}
