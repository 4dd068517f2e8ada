//! Run configuration: flat `key = value` text with `#` comments.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use sha2::{Digest, Sha256};

use crate::algorithm::AlgorithmMode;
use crate::error::ConfigError;
use crate::model::{ErrorModelConfig, FrequencyDomain, PenaltyConfig};
use crate::scheduler::{Heuristic, TraversalConfig, TraversalOrder};

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub rows: u32,
    pub cols: u32,
    pub algorithm: AlgorithmMode,
    pub d_p: u32,
    pub d_t: u32,
    pub d_r: u32,
    /// Re-calibration discard radius; defaults to `d_r`.
    pub d_disc: Option<u32>,
    pub heuristic: Heuristic,
    pub traversal_order: TraversalOrder,
    pub k: u32,
    pub f_min: f64,
    pub f_max: f64,
    pub eps0: f64,
    pub eps1: f64,
    pub defect_lambda: f64,
    pub a_xt: f64,
    /// Defaults to 1% of the band.
    pub gamma_xt: Option<f64>,
    pub beta: f64,
    /// Defaults to two option steps, capped at half the band.
    pub delta_hard: Option<f64>,
    pub d_hard: u32,
    pub couple_node_edge: bool,
    pub c_traj: f64,
    pub budget: u64,
    pub n_restarts: u32,
    pub seed: u64,
    pub parallel: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            rows: 4,
            cols: 4,
            algorithm: AlgorithmMode::Xeb,
            d_p: 1,
            d_t: 4,
            d_r: 4,
            d_disc: None,
            heuristic: Heuristic::Random,
            traversal_order: TraversalOrder::DepthFirst,
            k: 50,
            f_min: 5.0,
            f_max: 7.0,
            eps0: 0.001,
            eps1: 0.004,
            defect_lambda: 2.0,
            a_xt: 0.01,
            gamma_xt: None,
            beta: 0.5,
            delta_hard: None,
            d_hard: 2,
            couple_node_edge: false,
            c_traj: 0.01,
            budget: 1 << 20,
            n_restarts: 8,
            seed: 0,
            parallel: false,
        }
    }
}

const KEYS: &[&str] = &[
    "rows",
    "cols",
    "algorithm",
    "d_p",
    "d_t",
    "d_r",
    "d_disc",
    "heuristic",
    "traversal_order",
    "k",
    "f_min",
    "f_max",
    "eps0",
    "eps1",
    "defect_lambda",
    "a_xt",
    "gamma_xt",
    "beta",
    "delta_hard",
    "d_hard",
    "couple_node_edge",
    "c_traj",
    "budget",
    "n_restarts",
    "seed",
    "parallel",
];

impl RunConfig {
    pub fn domain(&self) -> FrequencyDomain {
        FrequencyDomain::new(self.k, self.f_min, self.f_max).expect("validated config")
    }

    pub fn d_disc(&self) -> u32 {
        self.d_disc.unwrap_or(self.d_r)
    }

    pub fn gamma_xt(&self) -> f64 {
        self.gamma_xt.unwrap_or(0.01 * (self.f_max - self.f_min))
    }

    pub fn delta_hard(&self) -> f64 {
        self.delta_hard.unwrap_or_else(|| {
            let band = self.f_max - self.f_min;
            let step = if self.k > 1 { band / f64::from(self.k - 1) } else { band };
            (2.0 * step).min(0.5 * band)
        })
    }

    pub fn errors(&self) -> ErrorModelConfig {
        ErrorModelConfig { eps0: self.eps0, eps1: self.eps1, defect_lambda: self.defect_lambda }
    }

    pub fn penalty(&self) -> PenaltyConfig {
        PenaltyConfig {
            a_xt: self.a_xt,
            gamma_xt: self.gamma_xt(),
            beta: self.beta,
            delta_hard: self.delta_hard(),
            d_hard: self.d_hard,
            couple_node_edge: self.couple_node_edge,
            c_traj: self.c_traj,
        }
    }

    pub fn traversal(&self) -> TraversalConfig {
        TraversalConfig { d_t: self.d_t, heuristic: self.heuristic, order: self.traversal_order }
    }

    /// Checks ranges and cross-key constraints. `lines` maps keys to the line
    /// that set them, for error reporting.
    fn validate_with(&self, lines: &BTreeMap<String, usize>) -> Result<(), ConfigError> {
        let fail = |key: &str, message: String| ConfigError {
            line: lines.get(key).copied().unwrap_or(0),
            key: key.to_string(),
            message,
        };
        if self.rows == 0 {
            return Err(fail("rows", "must be at least 1".into()));
        }
        if self.cols == 0 {
            return Err(fail("cols", "must be at least 1".into()));
        }
        if self.k == 0 {
            return Err(fail("k", "must be at least 1".into()));
        }
        if !self.f_min.is_finite() {
            return Err(fail("f_min", "must be finite".into()));
        }
        if !self.f_max.is_finite() || self.f_max <= self.f_min {
            return Err(fail("f_max", "must be finite and greater than f_min".into()));
        }
        let band = self.f_max - self.f_min;
        for (key, value) in
            [("eps0", self.eps0), ("eps1", self.eps1), ("defect_lambda", self.defect_lambda), ("c_traj", self.c_traj)]
        {
            if !(value.is_finite() && value >= 0.0) {
                return Err(fail(key, format!("must be a non-negative number, got {value}")));
            }
        }
        if !(self.a_xt.is_finite() && self.a_xt > 0.0) {
            return Err(fail("a_xt", "must be positive".into()));
        }
        if !(self.gamma_xt().is_finite() && self.gamma_xt() > 0.0) {
            return Err(fail("gamma_xt", "must be positive".into()));
        }
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(fail("beta", "must lie in (0, 1]".into()));
        }
        let delta = self.delta_hard();
        if !(delta.is_finite() && delta >= 0.0 && delta < band) {
            return Err(fail("delta_hard", format!("must lie in [0, {band}) (the band width), got {delta}")));
        }
        if self.d_hard > self.d_r {
            return Err(fail("d_hard", format!("must not exceed d_r = {}", self.d_r)));
        }
        if self.budget == 0 {
            return Err(fail("budget", "must be at least 1".into()));
        }
        if self.n_restarts == 0 {
            return Err(fail("n_restarts", "must be at least 1".into()));
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.validate_with(&BTreeMap::new())
    }

    /// Every key with its resolved value, sorted by key. `parallel` is left out
    /// because it never changes results.
    pub fn canonical(&self) -> String {
        let mut values: BTreeMap<&str, String> = BTreeMap::new();
        values.insert("rows", self.rows.to_string());
        values.insert("cols", self.cols.to_string());
        values.insert("algorithm", self.algorithm.to_string());
        values.insert("d_p", self.d_p.to_string());
        values.insert("d_t", self.d_t.to_string());
        values.insert("d_r", self.d_r.to_string());
        values.insert("d_disc", self.d_disc().to_string());
        values.insert("heuristic", self.heuristic.to_string());
        values.insert("traversal_order", self.traversal_order.to_string());
        values.insert("k", self.k.to_string());
        values.insert("f_min", self.f_min.to_string());
        values.insert("f_max", self.f_max.to_string());
        values.insert("eps0", self.eps0.to_string());
        values.insert("eps1", self.eps1.to_string());
        values.insert("defect_lambda", self.defect_lambda.to_string());
        values.insert("a_xt", self.a_xt.to_string());
        values.insert("gamma_xt", self.gamma_xt().to_string());
        values.insert("beta", self.beta.to_string());
        values.insert("delta_hard", self.delta_hard().to_string());
        values.insert("d_hard", self.d_hard.to_string());
        values.insert("couple_node_edge", self.couple_node_edge.to_string());
        values.insert("c_traj", self.c_traj.to_string());
        values.insert("budget", self.budget.to_string());
        values.insert("n_restarts", self.n_restarts.to_string());
        values.insert("seed", self.seed.to_string());
        let mut out = String::new();
        for (k, v) in values {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    /// Hex SHA-256 of [`RunConfig::canonical`].
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.canonical().as_bytes()))
    }
}

fn parse_uint(key: &str, raw: &str, line: usize) -> Result<u64, ConfigError> {
    let err = |message: String| ConfigError { line, key: key.to_string(), message };
    let value: i128 = raw.parse().map_err(|_| err(format!("expected an integer, got `{raw}`")))?;
    if value < 0 {
        return Err(err(format!("must be non-negative, got {value}")));
    }
    u64::try_from(value).map_err(|_| err(format!("{value} is too large")))
}

fn parse_u32(key: &str, raw: &str, line: usize) -> Result<u32, ConfigError> {
    let v = parse_uint(key, raw, line)?;
    u32::try_from(v).map_err(|_| ConfigError { line, key: key.to_string(), message: format!("{v} is too large") })
}

fn parse_f64(key: &str, raw: &str, line: usize) -> Result<f64, ConfigError> {
    raw.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| ConfigError {
        line,
        key: key.to_string(),
        message: format!("expected a finite number, got `{raw}`"),
    })
}

fn parse_bool(key: &str, raw: &str, line: usize) -> Result<bool, ConfigError> {
    match raw {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(ConfigError { line, key: key.to_string(), message: format!("expected true or false, got `{raw}`") }),
    }
}

fn parse_enum<T: std::str::FromStr<Err = String>>(key: &str, raw: &str, line: usize) -> Result<T, ConfigError> {
    raw.parse().map_err(|message| ConfigError { line, key: key.to_string(), message })
}

/// Parses config text; unspecified keys keep their defaults.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut cfg = RunConfig::default();
    let mut lines: BTreeMap<String, usize> = BTreeMap::new();
    for (idx, raw_line) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw_line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(ConfigError { line, key: content.to_string(), message: "expected `key = value`".into() });
        };
        let key = key.trim();
        let value = value.trim();
        if !KEYS.contains(&key) {
            return Err(ConfigError { line, key: key.to_string(), message: "unknown key".into() });
        }
        if lines.insert(key.to_string(), line).is_some() {
            return Err(ConfigError { line, key: key.to_string(), message: "key given more than once".into() });
        }
        match key {
            "rows" => cfg.rows = parse_u32(key, value, line)?,
            "cols" => cfg.cols = parse_u32(key, value, line)?,
            "algorithm" => cfg.algorithm = parse_enum(key, value, line)?,
            "d_p" => cfg.d_p = parse_u32(key, value, line)?,
            "d_t" => cfg.d_t = parse_u32(key, value, line)?,
            "d_r" => cfg.d_r = parse_u32(key, value, line)?,
            "d_disc" => cfg.d_disc = Some(parse_u32(key, value, line)?),
            "heuristic" => cfg.heuristic = parse_enum(key, value, line)?,
            "traversal_order" => cfg.traversal_order = parse_enum(key, value, line)?,
            "k" => cfg.k = parse_u32(key, value, line)?,
            "f_min" => cfg.f_min = parse_f64(key, value, line)?,
            "f_max" => cfg.f_max = parse_f64(key, value, line)?,
            "eps0" => cfg.eps0 = parse_f64(key, value, line)?,
            "eps1" => cfg.eps1 = parse_f64(key, value, line)?,
            "defect_lambda" => cfg.defect_lambda = parse_f64(key, value, line)?,
            "a_xt" => cfg.a_xt = parse_f64(key, value, line)?,
            "gamma_xt" => cfg.gamma_xt = Some(parse_f64(key, value, line)?),
            "beta" => cfg.beta = parse_f64(key, value, line)?,
            "delta_hard" => cfg.delta_hard = Some(parse_f64(key, value, line)?),
            "d_hard" => cfg.d_hard = parse_u32(key, value, line)?,
            "couple_node_edge" => cfg.couple_node_edge = parse_bool(key, value, line)?,
            "c_traj" => cfg.c_traj = parse_f64(key, value, line)?,
            "budget" => cfg.budget = parse_uint(key, value, line)?,
            "n_restarts" => cfg.n_restarts = parse_u32(key, value, line)?,
            "seed" => cfg.seed = parse_uint(key, value, line)?,
            "parallel" => cfg.parallel = parse_bool(key, value, line)?,
            _ => unreachable!("key list and match arms agree"),
        }
    }
    cfg.validate_with(&lines)?;
    Ok(cfg)
}
