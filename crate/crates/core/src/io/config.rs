use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::engine::{EngineParams, SubspaceMode};
use crate::error::{Error, Result};

/// How `separate` runs the engine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RunMode {
    #[default]
    Ppca,
    Rpca,
    /// Projection PCA on compressive measurements; needs an operator file.
    Compressive,
}

impl RunMode {
    pub fn subspace_mode(self) -> SubspaceMode {
        match self {
            RunMode::Rpca => SubspaceMode::RecursivePca,
            RunMode::Ppca | RunMode::Compressive => SubspaceMode::Ppca,
        }
    }
}

impl fmt::Display for RunMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RunMode::Ppca => "ppca",
            RunMode::Rpca => "rpca",
            RunMode::Compressive => "compressive",
        })
    }
}

impl FromStr for RunMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ppca" => Ok(RunMode::Ppca),
            "rpca" => Ok(RunMode::Rpca),
            "compressive" => Ok(RunMode::Compressive),
            _ => Err(Error::Config(format!(
                "unknown mode '{s}' (expected ppca, rpca or compressive)"
            ))),
        }
    }
}

/// Plain-text `key=value` run description. Blank lines and `#` comments are
/// ignored; unknown or repeated keys are errors.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunConfig {
    pub mode: RunMode,
    pub params: EngineParams,
    pub seed: u64,
    pub input: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub operator: Option<PathBuf>,
}

pub const RUN_CONFIG_KEYS: [&str; 15] = [
    "mode",
    "alpha",
    "kmin",
    "kmax",
    "b_percent",
    "q",
    "threshold",
    "seed",
    "solver_max_iters",
    "solver_rel_tol",
    "solver_feas_slack",
    "input",
    "checkpoint",
    "out_dir",
    "operator",
];

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value '{value}' for {key}")))
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut seen = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Config(format!(
                    "line {}: expected key=value, got '{line}'",
                    lineno + 1
                )));
            };
            let (key, value) = (key.trim(), value.trim());
            if seen.contains(&key) {
                return Err(Error::Config(format!("line {}: duplicate key {key}", lineno + 1)));
            }
            seen.push(key);
            cfg.set(key, value)
                .map_err(|e| Error::Config(format!("line {}: {}", lineno + 1, strip(e))))?;
        }
        cfg.params.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        RunConfig::parse(&std::fs::read_to_string(path)?)
    }

    /// Set one key, as in a config line.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let p = &mut self.params;
        match key {
            "mode" => self.mode = value.parse()?,
            "alpha" => p.alpha = parse_value(key, value)?,
            "kmin" => p.k_min = parse_value(key, value)?,
            "kmax" => p.k_max = parse_value(key, value)?,
            "b_percent" => p.b_percent = parse_value(key, value)?,
            "q" => p.q = parse_value(key, value)?,
            "threshold" => p.threshold = value.parse()?,
            "seed" => self.seed = parse_value(key, value)?,
            "solver_max_iters" => p.solver.max_iters = parse_value(key, value)?,
            "solver_rel_tol" => p.solver.rel_tol = parse_value(key, value)?,
            "solver_feas_slack" => p.solver.feas_slack = parse_value(key, value)?,
            "input" => self.input = Some(value.into()),
            "checkpoint" => self.checkpoint = Some(value.into()),
            "out_dir" => self.out_dir = Some(value.into()),
            "operator" => self.operator = Some(value.into()),
            _ => return Err(Error::Config(format!("unknown key '{key}'"))),
        }
        Ok(())
    }
}

fn strip(e: Error) -> String {
    match e {
        Error::Config(m) => m,
        other => other.to_string(),
    }
}

impl fmt::Display for RunConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = &self.params;
        writeln!(f, "mode={}", self.mode)?;
        writeln!(f, "alpha={}", p.alpha)?;
        writeln!(f, "kmin={}", p.k_min)?;
        writeln!(f, "kmax={}", p.k_max)?;
        writeln!(f, "b_percent={}", p.b_percent)?;
        writeln!(f, "q={}", p.q)?;
        writeln!(f, "threshold={}", p.threshold)?;
        writeln!(f, "seed={}", self.seed)?;
        writeln!(f, "solver_max_iters={}", p.solver.max_iters)?;
        writeln!(f, "solver_rel_tol={}", p.solver.rel_tol)?;
        writeln!(f, "solver_feas_slack={}", p.solver.feas_slack)?;
        for (key, path) in [
            ("input", &self.input),
            ("checkpoint", &self.checkpoint),
            ("out_dir", &self.out_dir),
            ("operator", &self.operator),
        ] {
            if let Some(path) = path {
                writeln!(f, "{key}={}", path.display())?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_all_keys() {
        let text = "\
# run
mode = rpca
alpha=10
kmin=2
kmax=8
b_percent=99.99
q=0.25
seed=7
solver_max_iters=500
solver_rel_tol=1e-7
solver_feas_slack=1e-3
input=in.seq
checkpoint=ck
out_dir=out
operator=a.seq
";
        let cfg = RunConfig::parse(text).unwrap();
        assert_eq!(cfg.mode, RunMode::Rpca);
        assert_eq!(cfg.params.alpha, 10);
        assert_eq!(cfg.params.k_min, 2);
        assert_eq!(cfg.params.k_max, 8);
        assert_eq!(cfg.params.b_percent, 99.99);
        assert_eq!(cfg.params.q, 0.25);
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.params.solver.max_iters, 500);
        assert_eq!(cfg.operator.as_deref(), Some(Path::new("a.seq")));
        assert_eq!(RunConfig::parse(&cfg.to_string()).unwrap(), cfg);
    }

    #[test]
    fn every_key_is_listed_and_accepted() {
        for key in RUN_CONFIG_KEYS {
            let value = match key {
                "mode" => "ppca",
                "threshold" => "residual-max",
                "q" | "b_percent" | "solver_rel_tol" | "solver_feas_slack" => "0.5",
                _ => "3",
            };
            RunConfig::default().set(key, value).unwrap();
        }
    }

    #[test]
    fn rejects_unknown_duplicate_and_invalid() {
        let e = RunConfig::parse("alpha=3\nlambda=2\n").unwrap_err();
        assert!(e.to_string().contains("unknown key 'lambda'"), "{e}");
        assert_eq!(e.exit_code(), 2);
        assert!(RunConfig::parse("alpha=3\nalpha=4").is_err());
        assert!(RunConfig::parse("alpha=x").is_err());
        assert!(RunConfig::parse("alpha=0").is_err());
        assert!(RunConfig::parse("kmin=5\nkmax=4").is_err());
        assert!(RunConfig::parse("mode=pca").is_err());
        assert!(RunConfig::parse("just text").is_err());
    }

    #[test]
    fn defaults() {
        let cfg = RunConfig::parse("").unwrap();
        assert_eq!(cfg.params, EngineParams::default());
        assert_eq!(cfg.mode.subspace_mode(), SubspaceMode::Ppca);
        assert_eq!(RunMode::Compressive.subspace_mode(), SubspaceMode::Ppca);
    }
}
