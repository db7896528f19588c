use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use cvxrelax_cli::commands::*;
use cvxrelax_cli::config::RunConfig;
use cvxrelax_cli::verify::SUITES;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "cvxrelax", version, about = "Convexity-constrained variational problems via relaxed constraints")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// Flat `key = value` configuration file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Mesh size: the largest simplex diameter.
    #[arg(long)]
    delta: Option<f64>,
    /// Boundary sampling and segment step.
    #[arg(long)]
    eps: Option<f64>,
    /// Set eps = factor * delta, factor in (1, 3].
    #[arg(long)]
    eps_factor: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    /// Maximum solver iterations.
    #[arg(long)]
    iters: Option<usize>,
    /// Primal residual tolerance.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores, 1 = sequential).
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Use the published resolutions instead of the desk-scale defaults.
    #[arg(long)]
    paper_scale: bool,
    /// Extra `key=value` settings (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// L2 projection of a noisy convex function onto the relaxed convex set.
    Denoise {
        #[command(flatten)]
        common: Common,
        /// 2 or 3.
        #[arg(long)]
        dim: Option<usize>,
        /// Noise standard deviation.
        #[arg(long)]
        noise: Option<f64>,
    },
    /// Projection of a noisy icosahedron support function.
    ProjectSupport {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        noise: Option<f64>,
        #[arg(long)]
        circles: Option<usize>,
    },
    /// Principal-agent problems.
    PrincipalAgent {
        #[command(flatten)]
        common: Common,
        /// linear, radial or rochet-chone.
        #[arg(long, default_value = "linear")]
        variant: String,
    },
    /// Projection onto bodies of constant width.
    ConstantWidth {
        #[command(flatten)]
        common: Common,
        /// Data term norm: 1, 2 or inf.
        #[arg(long)]
        norm: Option<String>,
        /// Prescribed width, or `free`.
        #[arg(long)]
        alpha: Option<String>,
        #[arg(long)]
        circles: Option<usize>,
    },
    /// Run invariant suites and print one line per check.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Suites to run (default: all).
        suites: Vec<String>,
    },
}

fn build_config(name: &str, c: &Common, extra: &[(&str, Option<String>)]) -> Result<RunConfig> {
    let mut cfg = match &c.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let flags: [(&str, Option<String>); 9] = [
        ("delta", c.delta.map(|v| v.to_string())),
        ("eps", c.eps.map(|v| v.to_string())),
        ("eps_factor", c.eps_factor.map(|v| v.to_string())),
        ("gamma", c.gamma.map(|v| v.to_string())),
        ("iters", c.iters.map(|v| v.to_string())),
        ("tol", c.tol.map(|v| v.to_string())),
        ("seed", c.seed.map(|v| v.to_string())),
        ("threads", c.threads.map(|v| v.to_string())),
        ("out", c.out.as_ref().map(|p| p.display().to_string())),
    ];
    for (k, v) in flags.iter().chain(extra) {
        if let Some(v) = v {
            cfg.set(k, v);
        }
    }
    for kv in &c.set {
        let Some((k, v)) = kv.split_once('=') else {
            anyhow::bail!("--set expects KEY=VALUE, got {kv:?}");
        };
        cfg.set(k, v.trim());
    }
    // an explicit eps flag beats a factor from the file and vice versa
    if c.eps.is_some() {
        let mut fresh = RunConfig::default();
        for (k, v) in cfg.entries().filter(|(k, _)| *k != "eps_factor") {
            fresh.set(k, v);
        }
        cfg = fresh;
    }
    apply_defaults(name, &mut cfg, c.paper_scale);
    let threads: usize = cfg.get_or("threads", 0)?;
    if threads > 0 {
        rayon::ThreadPoolBuilder::new().num_threads(threads).build_global()?;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<bool> {
    let dir = match cli.command {
        Command::Denoise { common, dim, noise } => {
            let cfg = build_config(
                "denoise",
                &common,
                &[("dim", dim.map(|v| v.to_string())), ("noise", noise.map(|v| v.to_string()))],
            )?;
            cmd_denoise(&cfg)?
        }
        Command::ProjectSupport { common, noise, circles } => {
            let cfg = build_config(
                "project-support",
                &common,
                &[("noise", noise.map(|v| v.to_string())), ("circles", circles.map(|v| v.to_string()))],
            )?;
            cmd_project_support(&cfg)?
        }
        Command::PrincipalAgent { common, variant } => {
            let cfg = build_config("principal-agent", &common, &[("variant", Some(variant))])?;
            cmd_principal_agent(&cfg)?
        }
        Command::ConstantWidth { common, norm, alpha, circles } => {
            let cfg = build_config(
                "constant-width",
                &common,
                &[("norm", norm), ("alpha", alpha), ("circles", circles.map(|v| v.to_string()))],
            )?;
            cmd_constant_width(&cfg)?
        }
        Command::Verify { common, suites } => {
            let cfg = build_config("verify", &common, &[])?;
            let suites = if suites.is_empty() { SUITES.iter().map(|s| s.to_string()).collect() } else { suites };
            let checks = cmd_verify(&cfg, &suites)?;
            for c in &checks {
                println!(
                    "{} {} / {}: measured {:.6e}, bound {:.6e}",
                    if c.pass { "PASS" } else { "FAIL" },
                    c.suite,
                    c.name,
                    c.measured,
                    c.bound
                );
            }
            return Ok(checks.iter().all(|c| c.pass));
        }
    };
    println!("results written to {}", dir.display());
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
