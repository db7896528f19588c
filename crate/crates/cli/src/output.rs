//! Result files written by every command.

use crate::config::RunConfig;
use anyhow::{Context, Result};
use cvxrelax::sdmm::SolverReport;
use serde::Serialize;
use serde_json::{json, Map, Value};
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

/// A directory collecting the outputs of one run.
pub struct OutputDir {
    root: PathBuf,
}

impl OutputDir {
    pub fn create(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root).with_context(|| format!("creating {}", root.display()))?;
        Ok(OutputDir { root })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn writer(&self, name: &str) -> Result<BufWriter<File>> {
        let p = self.path(name);
        Ok(BufWriter::new(File::create(&p).with_context(|| format!("creating {}", p.display()))?))
    }

    pub fn write_text(&self, name: &str, text: &str) -> Result<()> {
        let p = self.path(name);
        fs::write(&p, text).with_context(|| format!("writing {}", p.display()))
    }

    pub fn write_field(&self, name: &str, values: &[f64]) -> Result<()> {
        cvxrelax::io::write_field(self.writer(name)?, values)?;
        Ok(())
    }

    pub fn write_trace(&self, report: &SolverReport) -> Result<()> {
        self.write_text("trace.csv", &report.trace_csv())
    }

    /// `table.csv` with a header and the given rows.
    pub fn write_table(&self, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
        let mut s = header.join(",");
        s.push('\n');
        for r in rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        self.write_text("table.csv", &s)
    }

    /// `run.json`: the configuration echo plus the metrics.
    pub fn write_run(&self, command: &str, config: &RunConfig, metrics: impl Serialize) -> Result<()> {
        let cfg: Map<String, Value> = config.entries().map(|(k, v)| (k.to_string(), Value::String(v.into()))).collect();
        let doc = json!({ "command": command, "config": cfg, "metrics": metrics });
        let text = serde_json::to_string_pretty(&doc)?;
        self.write_text("run.json", &(text + "\n"))
    }
}

/// Solver summary fields shared by every `run.json`.
#[derive(Debug, Clone, Serialize)]
pub struct SolverSummary {
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
    pub objective: f64,
    pub wall_time_s: f64,
    pub violation: f64,
    pub blocks: usize,
    pub rows: usize,
}

impl SolverSummary {
    pub fn new(s: &crate::experiments::Solved) -> Self {
        SolverSummary {
            iterations: s.report.iterations,
            residual: s.report.residual,
            converged: s.report.converged,
            objective: s.report.objective,
            wall_time_s: s.report.wall_time.as_secs_f64(),
            violation: s.violation,
            blocks: s.num_blocks,
            rows: s.num_rows,
        }
    }
}

/// Scientific notation with a fixed number of digits, for table cells.
pub fn sci(v: f64) -> String {
    format!("{v:.6e}")
}
