//! One function per subcommand: read the configuration, run the experiment,
//! write the result files.

use crate::config::RunConfig;
use crate::experiments::*;
use crate::output::{sci, OutputDir, SolverSummary};
use crate::verify::{run_suite, Check};
use anyhow::{bail, Result};
use cvxrelax::io::{read_field, write_mesh, write_obj, write_off, write_sphere_csv};
use serde::Serialize;
use std::path::PathBuf;

/// Defaults applied to a configuration before a command reads it.
pub fn apply_defaults(command: &str, cfg: &mut RunConfig, paper_scale: bool) {
    let variant = cfg.raw("variant").unwrap_or("linear").to_string();
    let defaults: &[(&str, &str)] = match (command, paper_scale) {
        ("denoise", false) => &[("dim", "3"), ("points", "20"), ("noise", "0.025"), ("eps_factor", "2")],
        ("denoise", true) => &[("dim", "3"), ("points", "80"), ("noise", "0.025"), ("eps", "0.02")],
        ("project-support", false) => &[("freq", "10"), ("circles", "500"), ("circle_step", "0.05"), ("noise", "0.05")],
        ("project-support", true) => &[("freq", "22"), ("circles", "2000"), ("circle_step", "0.02"), ("noise", "0.05")],
        ("constant-width", false) => &[("freq", "10"), ("circles", "500"), ("circle_step", "0.05"), ("norm", "2")],
        ("constant-width", true) => &[("freq", "22"), ("circles", "2000"), ("circle_step", "0.02"), ("norm", "2")],
        ("principal-agent", _) => match variant.as_str() {
            "radial" => &[("delta", "0.0333333333333333"), ("eps", "0.06"), ("oracle_n", "600")],
            "rochet-chone" if paper_scale => &[("points", "61"), ("eps", "0.02")],
            "rochet-chone" => &[("points", "31"), ("eps", "0.06")],
            _ => &[("points", "30"), ("eps", "0.06")],
        },
        _ => &[],
    };
    for (k, v) in defaults {
        // an explicit eps or delta replaces the derived default
        if (*k == "eps_factor" && cfg.contains("eps")) || (*k == "eps" && cfg.contains("eps_factor")) {
            continue;
        }
        if *k == "points" && cfg.contains("delta") {
            continue;
        }
        cfg.set_default(k, v);
    }
    cfg.set_default("seed", 1);
}

fn out_dir(cfg: &RunConfig, command: &str) -> Result<OutputDir> {
    let dir = cfg.raw("out").map(PathBuf::from).unwrap_or_else(|| PathBuf::from("out").join(command));
    OutputDir::create(dir)
}

#[derive(Serialize)]
struct DenoiseMetrics {
    solver: SolverSummary,
    points: usize,
    eps: f64,
    l2_noisy: f64,
    l2_error: f64,
    linf_error: f64,
    l2_target: f64,
}

pub fn cmd_denoise(cfg: &RunConfig) -> Result<PathBuf> {
    let dim: usize = cfg.get_or("dim", 3)?;
    if !(2..=3).contains(&dim) {
        bail!("dim must be 2 or 3");
    }
    let points = cfg.points(2.0, dim, 20)?;
    // δ is the simplex diameter: √d times the grid spacing
    let eps = cfg.eps((dim as f64).sqrt() * 2.0 / (points - 1) as f64, 0.2)?;
    let p = DenoiseParams { dim, points, eps, noise: cfg.get_or("noise", 0.025)?, seed: cfg.get_or("seed", 1)? };
    let r = denoise(&p, &cfg.solver(DENOISE_GAMMA, 3000, 1e-8)?)?;
    let out = out_dir(cfg, "denoise")?;
    out.write_field("solution.txt", &r.solved.x)?;
    out.write_field("input.txt", &r.u0)?;
    write_mesh(out.writer("mesh.txt")?, &r.mesh)?;
    out.write_trace(&r.solved.report)?;
    out.write_table(
        &["points", "eps", "l2_noisy", "l2_error", "linf_error", "violation", "iterations"],
        &[vec![
            points.to_string(),
            sci(eps),
            sci(r.l2_noisy),
            sci(r.l2_error),
            sci(r.linf_error),
            sci(r.solved.violation),
            r.solved.report.iterations.to_string(),
        ]],
    )?;
    let m = DenoiseMetrics {
        solver: SolverSummary::new(&r.solved),
        points,
        eps,
        l2_noisy: r.l2_noisy,
        l2_error: r.l2_error,
        linf_error: r.linf_error,
        l2_target: r.l2_star,
    };
    out.write_run("denoise", cfg, &m)?;
    Ok(out.root().to_path_buf())
}

#[derive(Serialize)]
struct BodyMetrics {
    solver: SolverSummary,
    directions: usize,
    volume: f64,
    surface: f64,
    width_min: f64,
    width_max: f64,
    width_mean: f64,
    width_relative_error: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    support_excess: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    max_change: Option<f64>,
}

pub fn cmd_project_support(cfg: &RunConfig) -> Result<PathBuf> {
    let p = SupportParams {
        freq: cfg.get_or("freq", 10)?,
        circles: cfg.get_or("circles", 500)?,
        circle_step: cfg.get_or("circle_step", 0.05)?,
        noise: cfg.get_or("noise", 0.05)?,
        seed: cfg.get_or("seed", 1)?,
    };
    let r = project_support(&p, &cfg.solver(WIDTH_GAMMA, WIDTH_ITERS, 1e-8)?)?;
    let out = out_dir(cfg, "project-support")?;
    write_sphere_csv(out.writer("solution.csv")?, &r.sphere, &r.solved.x)?;
    out.write_field("solution.txt", &r.solved.x)?;
    out.write_field("input.txt", &r.h0)?;
    write_off(out.writer("body.off")?, &r.body)?;
    write_obj(out.writer("body.obj")?, &r.body)?;
    out.write_trace(&r.solved.report)?;
    out.write_table(
        &["surface", "volume", "width_mean", "width_relative_error", "violation"],
        &[vec![sci(r.surface), sci(r.volume), sci(r.widths.mean), sci(r.widths.relative_error), sci(r.solved.violation)]],
    )?;
    let m = BodyMetrics {
        solver: SolverSummary::new(&r.solved),
        directions: r.sphere.len(),
        volume: r.volume,
        surface: r.surface,
        width_min: r.widths.min,
        width_max: r.widths.max,
        width_mean: r.widths.mean,
        width_relative_error: r.widths.relative_error,
        support_excess: Some(r.support_excess),
        max_change: Some(r.max_change),
    };
    out.write_run("project-support", cfg, &m)?;
    Ok(out.root().to_path_buf())
}

pub fn cmd_constant_width(cfg: &RunConfig) -> Result<PathBuf> {
    let alpha = match cfg.raw("alpha") {
        None | Some("free") => None,
        Some(_) => Some(cfg.get::<f64>("alpha")?.unwrap()),
    };
    let input = match cfg.raw("input") {
        Some(path) => Some(read_field(std::io::BufReader::new(std::fs::File::open(path)?))?),
        None => None,
    };
    let p = WidthParams {
        freq: cfg.get_or("freq", 10)?,
        circles: cfg.get_or("circles", 500)?,
        circle_step: cfg.get_or("circle_step", 0.05)?,
        norm: cfg.get_or("norm", Norm::L2)?,
        alpha,
        edge: cfg.get_or("edge", 1.0)?,
        seed: cfg.get_or("seed", 1)?,
        input,
    };
    let r = constant_width(&p, &cfg.solver(WIDTH_GAMMA, WIDTH_ITERS, 1e-8)?)?;
    let out = out_dir(cfg, "constant-width")?;
    write_sphere_csv(out.writer("solution.csv")?, &r.sphere, &r.solved.x)?;
    out.write_field("solution.txt", &r.solved.x)?;
    write_off(out.writer("body.off")?, &r.body)?;
    write_obj(out.writer("body.obj")?, &r.body)?;
    out.write_trace(&r.solved.report)?;
    out.write_table(
        &["norm", "surface", "volume", "width", "width_relative_error"],
        &[vec![p.norm.to_string(), sci(r.surface), sci(r.volume), sci(r.widths.mean), sci(r.widths.relative_error)]],
    )?;
    let m = BodyMetrics {
        solver: SolverSummary::new(&r.solved),
        directions: r.sphere.len(),
        volume: r.volume,
        surface: r.surface,
        width_min: r.widths.min,
        width_max: r.widths.max,
        width_mean: r.widths.mean,
        width_relative_error: r.widths.relative_error,
        support_excess: None,
        max_change: None,
    };
    out.write_run("constant-width", cfg, &m)?;
    Ok(out.root().to_path_buf())
}

#[derive(Serialize)]
struct PaMetrics {
    variant: String,
    solver: SolverSummary,
    objective: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    reference: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    objective_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    linf_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    zero_fraction: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    exact_interpolant: Option<(f64, f64)>,
}

pub fn cmd_principal_agent(cfg: &RunConfig) -> Result<PathBuf> {
    let variant = cfg.raw("variant").unwrap_or("linear").to_string();
    let out = out_dir(cfg, "principal-agent")?;
    let (solved, metrics) = match variant.as_str() {
        "linear" => {
            let points = cfg.points(1.0, 2, 30)?;
            let eps = cfg.eps(2f64.sqrt() / (points - 1) as f64, 0.06)?;
            let r = linear_pa(&LinearPaParams { points, eps }, &cfg.solver(LINEAR_PA_GAMMA, 20_000, 1e-9)?)?;
            write_mesh(out.writer("mesh.txt")?, &r.mesh)?;
            out.write_table(
                &["points", "eps", "m_error", "linf_error"],
                &[vec![
                    format!("{0}x{0}", points),
                    sci(eps),
                    sci(r.m_error),
                    sci(r.linf_error),
                ]],
            )?;
            let m = PaMetrics {
                variant: variant.clone(),
                solver: SolverSummary::new(&r.solved),
                objective: r.m_value,
                reference: Some(r.m_opt),
                objective_error: Some(r.m_error),
                linf_error: Some(r.linf_error),
                zero_fraction: None,
                exact_interpolant: Some((r.m_interpolant, r.interpolant_violation)),
            };
            (r.solved, m)
        }
        "radial" => {
            let delta: f64 = cfg.get_or("delta", 1.0 / 30.0)?;
            let eps = cfg.eps(delta, 0.06)?;
            let p = RadialPaParams { delta, eps, oracle_n: cfg.get_or("oracle_n", 600)? };
            let r = radial_pa(&p, &cfg.solver(RADIAL_PA_GAMMA, 20_000, 1e-9)?)?;
            write_mesh(out.writer("mesh.txt")?, &r.mesh)?;
            // profile overlay: vertex radius, computed value, oracle value
            let mut prof = String::from("r,u,oracle\n");
            for i in 0..r.mesh.num_vertices() {
                let v = r.mesh.vertex(i);
                let rad = v[0].hypot(v[1]);
                prof.push_str(&format!("{},{},{}\n", sci(rad), sci(r.solved.x[i]), sci(r.oracle.eval(rad))));
            }
            out.write_text("profile.csv", &prof)?;
            out.write_table(
                &["delta", "eps", "linf_error", "l_value", "l_oracle"],
                &[vec![
                    sci(delta),
                    sci(eps),
                    sci(r.linf_error),
                    sci(r.l_value),
                    sci(r.l_oracle),
                ]],
            )?;
            let m = PaMetrics {
                variant: variant.clone(),
                solver: SolverSummary::new(&r.solved),
                objective: r.l_value,
                reference: Some(r.l_oracle),
                objective_error: Some((r.l_value - r.l_oracle).abs()),
                linf_error: Some(r.linf_error),
                zero_fraction: None,
                exact_interpolant: None,
            };
            (r.solved, m)
        }
        "rochet-chone" => {
            let points = cfg.points(1.0, 2, 61)?;
            let eps = cfg.eps(2f64.sqrt() / (points - 1) as f64, 0.02)?;
            let r = rochet_chone(&RochetChoneParams { points, eps }, &cfg.solver(RADIAL_PA_GAMMA, 20_000, 1e-8)?)?;
            write_mesh(out.writer("mesh.txt")?, &r.mesh)?;
            let mut g = String::from("simplex,cx,cy,gx,gy\n");
            for (s, grad) in r.gradients.iter().enumerate() {
                let c = r.mesh.centroid(s);
                g.push_str(&format!("{s},{},{},{},{}\n", sci(c[0]), sci(c[1]), sci(grad[0]), sci(grad[1])));
            }
            out.write_text("gradients.csv", &g)?;
            out.write_table(
                &["points", "eps", "l_value", "zero_fraction"],
                &[vec![
                    format!("{0}x{0}", points),
                    sci(eps),
                    sci(r.l_value),
                    sci(r.zero_fraction),
                ]],
            )?;
            let m = PaMetrics {
                variant: variant.clone(),
                solver: SolverSummary::new(&r.solved),
                objective: r.l_value,
                reference: None,
                objective_error: None,
                linf_error: None,
                zero_fraction: Some(r.zero_fraction),
                exact_interpolant: None,
            };
            (r.solved, m)
        }
        v => bail!("unknown principal-agent variant {v:?} (linear, radial, rochet-chone)"),
    };
    out.write_field("solution.txt", &solved.x)?;
    out.write_trace(&solved.report)?;
    out.write_run("principal-agent", cfg, &metrics)?;
    Ok(out.root().to_path_buf())
}

/// Runs the selected suites; returns the checks and writes them when `out` is set.
pub fn cmd_verify(cfg: &RunConfig, suites: &[String]) -> Result<Vec<Check>> {
    let seed = cfg.get_or("seed", 1)?;
    let mut checks = Vec::new();
    for s in suites {
        checks.extend(run_suite(s, seed)?);
    }
    if cfg.contains("out") {
        let out = out_dir(cfg, "verify")?;
        let rows: Vec<Vec<String>> = checks
            .iter()
            .map(|c| vec![c.suite.clone(), c.name.clone(), sci(c.measured), sci(c.bound), c.pass.to_string()])
            .collect();
        out.write_table(&["suite", "check", "measured", "bound", "pass"], &rows)?;
        out.write_run("verify", cfg, &checks)?;
    }
    Ok(checks)
}
