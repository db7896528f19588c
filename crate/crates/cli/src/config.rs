//! Run configuration: a flat `key = value` file, overridden by command-line
//! flags.
//!
//! Recognized keys (all optional, each experiment reads the ones it needs):
//!
//! | key | meaning |
//! |-----|---------|
//! | `dim` | dimension of the denoising grid (2 or 3) |
//! | `points` | grid points per axis |
//! | `delta` | mesh size, the largest simplex diameter (overrides `points`) |
//! | `eps` | boundary sampling / segment step |
//! | `eps_factor` | `eps = eps_factor · delta`, must lie in `(1, 3]` |
//! | `noise` | standard deviation of the Gaussian perturbation |
//! | `seed` | RNG seed |
//! | `gamma`, `iters`, `tol`, `log_every` | solver settings |
//! | `threads` | rayon worker count (0 = all cores) |
//! | `out` | output directory |
//! | `variant` | principal-agent variant: `linear`, `radial`, `rochet-chone` |
//! | `norm` | constant-width data term: `1`, `2`, `inf` |
//! | `alpha` | prescribed width, or `free` |
//! | `freq` | geodesic frequency of the sphere mesh |
//! | `circles`, `circle_step` | great-circle count and angular step |
//! | `edge` | edge of the regular tetrahedron |
//! | `oracle_n` | radial oracle resolution |
//! | `input` | field file used as projection target (constant width) |
//!
//! Lines starting with `#` are comments.

use anyhow::{bail, Context, Result};
use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (no, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                bail!("line {}: expected `key = value`", no + 1);
            };
            values.insert(normalize(k), v.trim().to_string());
        }
        Ok(RunConfig { values })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.values.insert(normalize(key), value.to_string());
    }

    /// Sets `key` only when it is not already present.
    pub fn set_default(&mut self, key: &str, value: impl ToString) {
        self.values.entry(normalize(key)).or_insert_with(|| value.to_string());
    }

    pub fn contains(&self, key: &str) -> bool {
        self.values.contains_key(&normalize(key))
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(&normalize(key)).map(String::as_str)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v.parse().map(Some).map_err(|e| anyhow::anyhow!("invalid value {v:?} for `{key}`: {e}")),
        }
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.get(key)?.unwrap_or(default))
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &str)> {
        self.values.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    /// `eps`, or `eps_factor · delta`. The factor must lie in `(1, 3]`.
    pub fn eps(&self, delta: f64, default: f64) -> Result<f64> {
        let eps = match (self.get::<f64>("eps")?, self.get::<f64>("eps_factor")?) {
            (Some(e), _) => e,
            (None, Some(c)) => {
                if !(c > 1.0 && c <= 3.0) {
                    bail!("eps_factor must lie in (1, 3], got {c}");
                }
                c * delta
            }
            (None, None) => default,
        };
        if !(eps > 0.0 && eps.is_finite()) {
            bail!("eps must be positive, got {eps}");
        }
        Ok(eps)
    }

    /// Grid points per axis of a `dim`-cube with edge `side`: the coarsest grid
    /// whose simplex diameter `√dim · side / cells` is at most `delta`, else `points`.
    pub fn points(&self, side: f64, dim: usize, default: usize) -> Result<usize> {
        if let Some(d) = self.get::<f64>("delta")? {
            if !(d > 0.0) {
                bail!("delta must be positive, got {d}");
            }
            let cells = ((dim as f64).sqrt() * side / d * (1.0 - 1e-12)).ceil() as usize;
            return Ok(cells.max(1) + 1);
        }
        let p = self.get_or("points", default)?;
        if p < 2 {
            bail!("points must be at least 2");
        }
        Ok(p)
    }

    pub fn solver(&self, gamma: f64, iters: usize, tol: f64) -> Result<cvxrelax::sdmm::SolverConfig> {
        let cfg = cvxrelax::sdmm::SolverConfig {
            gamma: self.get_or("gamma", gamma)?,
            max_iterations: self.get_or("iters", iters)?,
            primal_residual_tol: self.get_or("tol", tol)?,
            log_every: self.get_or("log_every", 100)?,
            parallel: self.get_or("threads", 0usize)? != 1,
        };
        if !(cfg.gamma > 0.0) || !(cfg.primal_residual_tol >= 0.0) {
            bail!("gamma must be positive and tol nonnegative");
        }
        Ok(cfg)
    }
}

fn normalize(k: &str) -> String {
    k.trim().to_ascii_lowercase().replace('-', "_")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_overrides() {
        let mut c = RunConfig::parse("# comment\npoints = 20\neps-factor=2 # trailing\n").unwrap();
        assert_eq!(c.get::<usize>("points").unwrap(), Some(20));
        assert_eq!(c.eps(0.1, 1.0).unwrap(), 0.2);
        c.set("eps", 0.05);
        assert_eq!(c.eps(0.1, 1.0).unwrap(), 0.05);
        c.set_default("eps", 9);
        assert_eq!(c.raw("eps"), Some("0.05"));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(RunConfig::parse("novalue").is_err());
        let c = RunConfig::parse("eps_factor = 4").unwrap();
        assert!(c.eps(0.1, 1.0).is_err());
        let c = RunConfig::parse("points = x").unwrap();
        assert!(c.get::<usize>("points").is_err());
    }

    #[test]
    fn delta_sets_points() {
        let c = RunConfig::parse("delta = 0.05").unwrap();
        assert_eq!(c.points(1.0, 1, 3).unwrap(), 21);
        let c = RunConfig::parse("delta = 0.1").unwrap();
        assert_eq!(c.points(1.0, 2, 3).unwrap(), 16);
    }
}
