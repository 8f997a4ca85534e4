//! `key = value` run configuration.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use crate::ast::Dialect;
use crate::compose::DEFAULT_THRESHOLD;
use crate::parse::{FunctionInventory, Parser};
use crate::perturb::{PerturbConfig, PoolEntity};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Where a worker lives.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WorkerSpec {
    Builtin,
    /// Shell command started once per run.
    Subprocess(String),
    /// Endpoint receiving one POST per record.
    Http(String),
}

impl FromStr for WorkerSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        if s == "builtin" {
            Ok(WorkerSpec::Builtin)
        } else if let Some(cmd) = s.strip_prefix("subprocess:") {
            if cmd.trim().is_empty() {
                return Err("subprocess worker needs a command".into());
            }
            Ok(WorkerSpec::Subprocess(cmd.trim().to_string()))
        } else if s.starts_with("http://") || s.starts_with("https://") {
            Ok(WorkerSpec::Http(s.to_string()))
        } else {
            Err(format!("worker `{s}` is not `builtin`, `subprocess:<command>` or an http(s) URL"))
        }
    }
}

impl std::fmt::Display for WorkerSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            WorkerSpec::Builtin => f.write_str("builtin"),
            WorkerSpec::Subprocess(c) => write!(f, "subprocess:{c}"),
            WorkerSpec::Http(u) => f.write_str(u),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SnowballConfig {
    pub iterations: usize,
    pub beam_size: usize,
    pub threshold: f64,
    pub rng_seed: u64,
    pub dialect: Dialect,
    /// Seed pair file.
    pub seeds: Option<PathBuf>,
    /// Output directory holding `iteration-N/`.
    pub out: Option<PathBuf>,
    pub lexicon: Option<PathBuf>,
    pub templates: Option<PathBuf>,
    pub generator: WorkerSpec,
    pub evaluator: WorkerSpec,
    pub worker_timeout_ms: u64,
    pub max_in_flight: usize,
    /// Re-score every accumulated sample each iteration instead of only
    /// the newest batch.
    pub refilter_cumulative: bool,
    pub perturb: PerturbConfig,
}

impl Default for SnowballConfig {
    fn default() -> Self {
        Self {
            iterations: 5,
            beam_size: 4,
            threshold: DEFAULT_THRESHOLD,
            rng_seed: 0,
            dialect: Dialect::Sql,
            seeds: None,
            out: None,
            lexicon: None,
            templates: None,
            generator: WorkerSpec::Builtin,
            evaluator: WorkerSpec::Builtin,
            worker_timeout_ms: 30_000,
            max_in_flight: 8,
            refilter_cumulative: false,
            perturb: PerturbConfig::default(),
        }
    }
}

fn parse_bool(v: &str) -> Result<bool, String> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(format!("`{v}` is not a boolean")),
    }
}

fn num<T: FromStr>(key: &str, v: &str) -> Result<T, String> {
    v.parse().map_err(|_| format!("`{key}` expects a number, got `{v}`"))
}

impl SnowballConfig {
    /// Reads a config file; relative paths inside it resolve against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse_with_base(&text, base)
    }

    pub fn parse_with_base(text: &str, base: &Path) -> Result<Self, ConfigError> {
        let mut cfg = SnowballConfig::default();
        let mut functions = FunctionInventory::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.trim();
            if content.is_empty() || content.starts_with('#') {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| ConfigError::Format {
                line,
                message: format!("expected `key = value`, got `{content}`"),
            })?;
            let (key, value) = (key.trim(), value.trim());
            cfg.set(key, value, base, &mut functions)
                .map_err(|message| ConfigError::Format { line, message })?;
        }
        cfg.perturb.parser = Parser::new(functions);
        cfg.validate()?;
        Ok(cfg)
    }

    fn set(&mut self, key: &str, v: &str, base: &Path, functions: &mut FunctionInventory) -> Result<(), String> {
        let path = |v: &str| Some(base.join(v));
        match key {
            "iterations" => self.iterations = num(key, v)?,
            "beam_size" => self.beam_size = num(key, v)?,
            "threshold" => self.threshold = num(key, v)?,
            "rng_seed" => self.rng_seed = num(key, v)?,
            "dialect" => self.dialect = v.parse::<Dialect>().map_err(|e| e.to_string())?,
            "seeds" => self.seeds = path(v),
            "out" => self.out = path(v),
            "lexicon" => self.lexicon = path(v),
            "templates" => self.templates = path(v),
            "generator" => self.generator = v.parse()?,
            "evaluator" => self.evaluator = v.parse()?,
            "worker_timeout_ms" => self.worker_timeout_ms = num(key, v)?,
            "max_in_flight" => self.max_in_flight = num(key, v)?,
            "refilter_cumulative" => self.refilter_cumulative = parse_bool(v)?,
            "perturb.max_per_seed" => self.perturb.max_per_seed = num(key, v)?,
            "perturb.entity_pool" => {
                self.perturb.entity_pool = v
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(str::parse::<PoolEntity>)
                    .collect::<Result<_, _>>()?;
            }
            "perturb.phrase_pool" => {
                self.perturb.phrase_pool = v
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(String::from)
                    .collect();
            }
            "logic.functions" => functions.extend_from_spec(v)?,
            _ => return Err(format!("unknown key `{key}`")),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.iterations < 1 {
            return Err(ConfigError::Invalid("iterations must be at least 1".into()));
        }
        if self.beam_size < 1 {
            return Err(ConfigError::Invalid("beam_size must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(ConfigError::Invalid(format!("threshold {} is outside [0, 1]", self.threshold)));
        }
        if self.max_in_flight < 1 {
            return Err(ConfigError::Invalid("max_in_flight must be at least 1".into()));
        }
        Ok(())
    }

    pub fn parser(&self) -> &Parser {
        &self.perturb.parser
    }
}
