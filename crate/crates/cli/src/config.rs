//! Flat `key = value` experiment configuration.
//!
//! One setting per line, `#` starts a comment, blank lines are ignored.
//! Unknown or repeated keys are errors; missing keys keep their defaults.
//! The aggregation weights follow the mode unless given explicitly: FL-only
//! implies `kappa1 = 1, kappa2 = 0`, AIGC-only the reverse, and giving only one
//! of `kappa1`/`kappa2` sets the other to its complement.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use genfl_core::protocol::{ConfigViolation, ExperimentConfig, Mode};
use thiserror::Error;

/// Every accepted key, in echo order.
pub const KEYS: &[&str] = &[
    "seed",
    "num_classes",
    "feature_dim",
    "samples_per_class",
    "cluster_spread",
    "class_separation",
    "num_clients",
    "clients_per_round",
    "rounds",
    "alpha",
    "mode",
    "kappa1",
    "kappa2",
    "hidden_width",
    "epochs",
    "batch_size",
    "learning_rate",
    "rate_per_round",
    "cap_per_class",
    "label_noise",
    "center_shift",
    "spread_factor",
    "client_flops_per_sec",
    "server_flops_per_sec",
    "uplink_bps",
    "downlink_bps",
    "client_power_watts",
    "server_power_watts",
    "gen_cost_per_sample",
    "bytes_per_param",
    "parallel_clients",
    "output_dir",
];

/// Keys that do not change the simulated numbers.
const NON_EXPERIMENT_KEYS: &[&str] = &["parallel_clients", "output_dir"];

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{}", describe(.0))]
    Invalid(Vec<ConfigViolation>),
}

fn describe(violations: &[ConfigViolation]) -> String {
    violations
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

impl ConfigError {
    /// Keys named by a validation failure.
    pub fn keys(&self) -> Vec<&'static str> {
        match self {
            ConfigError::Invalid(v) => v.iter().map(|v| v.key).collect(),
            _ => Vec::new(),
        }
    }
}

/// An experiment plus where its artifacts go.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub experiment: ExperimentConfig,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            experiment: ExperimentConfig::default(),
            output_dir: PathBuf::from("genfl-out"),
        }
    }
}

pub fn load_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut cfg = RunConfig::default();
    let mut seen: Vec<(&str, usize)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let parse_err = |message: String| ConfigError::Parse { line, message };
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| parse_err(format!("expected `key = value`, got `{content}`")))?;
        let (key, value) = (key.trim(), value.trim());
        let known = KEYS
            .iter()
            .copied()
            .find(|k| *k == key)
            .ok_or_else(|| parse_err(format!("unknown key `{key}`")))?;
        if let Some((_, first)) = seen.iter().find(|(k, _)| *k == known) {
            return Err(parse_err(format!("`{key}` already set on line {first}")));
        }
        seen.push((known, line));
        set_field(&mut cfg, known, value).map_err(parse_err)?;
    }
    let given = |k: &str| seen.iter().any(|(s, _)| *s == k);
    resolve_kappa(&mut cfg.experiment, given("kappa1"), given("kappa2"));
    validate(&cfg)?;
    Ok(cfg)
}

/// Sets one key the way a sweep or command-line flag would: the partner
/// weight follows `kappa1`/`kappa2`, and `mode` resets the weights to what
/// the mode implies. The result is validated.
pub fn apply_override(cfg: &mut RunConfig, key: &str, value: &str) -> Result<(), ConfigError> {
    let known = KEYS
        .iter()
        .copied()
        .find(|k| *k == key)
        .ok_or_else(|| ConfigError::Parse {
            line: 0,
            message: format!("unknown key `{key}`"),
        })?;
    let previous_mode = cfg.experiment.mode;
    set_field(cfg, known, value).map_err(|message| ConfigError::Parse { line: 0, message })?;
    let e = &mut cfg.experiment;
    match known {
        "kappa1" => resolve_kappa(e, true, false),
        "kappa2" => resolve_kappa(e, false, true),
        "mode" => {
            if e.mode == Mode::GenFl && previous_mode != Mode::GenFl {
                let d = ExperimentConfig::default();
                e.kappa1 = d.kappa1;
                e.kappa2 = d.kappa2;
            }
            resolve_kappa(e, false, false);
        }
        _ => {}
    }
    validate(cfg)
}

fn resolve_kappa(e: &mut ExperimentConfig, kappa1_given: bool, kappa2_given: bool) {
    match (e.mode, kappa1_given, kappa2_given) {
        (Mode::FlOnly, k1, k2) => {
            if !k1 {
                e.kappa1 = 1.0;
            }
            if !k2 {
                e.kappa2 = 0.0;
            }
        }
        (Mode::AigcOnly, k1, k2) => {
            if !k1 {
                e.kappa1 = 0.0;
            }
            if !k2 {
                e.kappa2 = 1.0;
            }
        }
        (Mode::GenFl, true, false) => e.kappa2 = 1.0 - e.kappa1,
        (Mode::GenFl, false, true) => e.kappa1 = 1.0 - e.kappa2,
        (Mode::GenFl, _, _) => {}
    }
}

fn validate(cfg: &RunConfig) -> Result<(), ConfigError> {
    let mut violations = cfg.experiment.validate().err().unwrap_or_default();
    if cfg.output_dir.as_os_str().is_empty() {
        violations.push(ConfigViolation {
            key: "output_dir",
            message: "must not be empty".into(),
        });
    }
    if violations.is_empty() {
        Ok(())
    } else {
        Err(ConfigError::Invalid(violations))
    }
}

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, String> {
    value
        .parse()
        .map_err(|_| format!("`{key}`: cannot parse `{value}`"))
}

fn set_field(cfg: &mut RunConfig, key: &str, value: &str) -> Result<(), String> {
    let e = &mut cfg.experiment;
    match key {
        "seed" => e.seed = num(key, value)?,
        "num_classes" => e.num_classes = num(key, value)?,
        "feature_dim" => e.feature_dim = num(key, value)?,
        "samples_per_class" => e.samples_per_class = num(key, value)?,
        "cluster_spread" => e.cluster_spread = num(key, value)?,
        "class_separation" => e.class_separation = num(key, value)?,
        "num_clients" => e.num_clients = num(key, value)?,
        "clients_per_round" => e.clients_per_round = num(key, value)?,
        "rounds" => e.rounds = num(key, value)?,
        "alpha" => e.alpha = num(key, value)?,
        "mode" => e.mode = value.parse().map_err(|err| format!("`mode`: {err}"))?,
        "kappa1" => e.kappa1 = num(key, value)?,
        "kappa2" => e.kappa2 = num(key, value)?,
        "hidden_width" => e.hidden_width = num(key, value)?,
        "epochs" => e.train.epochs = num(key, value)?,
        "batch_size" => e.train.batch_size = num(key, value)?,
        "learning_rate" => e.train.learning_rate = num(key, value)?,
        "rate_per_round" => e.generator.rate_per_round = num(key, value)?,
        "cap_per_class" => e.generator.cap_per_class = num(key, value)?,
        "label_noise" => e.generator.label_noise = num(key, value)?,
        "center_shift" => e.generator.center_shift = num(key, value)?,
        "spread_factor" => e.generator.spread_factor = num(key, value)?,
        "client_flops_per_sec" => e.cost.client_flops_per_sec = num(key, value)?,
        "server_flops_per_sec" => e.cost.server_flops_per_sec = num(key, value)?,
        "uplink_bps" => e.cost.uplink_bps = num(key, value)?,
        "downlink_bps" => e.cost.downlink_bps = num(key, value)?,
        "client_power_watts" => e.cost.client_power_watts = num(key, value)?,
        "server_power_watts" => e.cost.server_power_watts = num(key, value)?,
        "gen_cost_per_sample" => e.cost.gen_cost_per_sample = num(key, value)?,
        "bytes_per_param" => e.cost.bytes_per_param = num(key, value)?,
        "parallel_clients" => e.parallel_clients = num(key, value)?,
        "output_dir" => cfg.output_dir = PathBuf::from(value),
        _ => return Err(format!("unknown key `{key}`")),
    }
    Ok(())
}

fn field(cfg: &RunConfig, key: &str) -> String {
    let e = &cfg.experiment;
    match key {
        "seed" => e.seed.to_string(),
        "num_classes" => e.num_classes.to_string(),
        "feature_dim" => e.feature_dim.to_string(),
        "samples_per_class" => e.samples_per_class.to_string(),
        "cluster_spread" => e.cluster_spread.to_string(),
        "class_separation" => e.class_separation.to_string(),
        "num_clients" => e.num_clients.to_string(),
        "clients_per_round" => e.clients_per_round.to_string(),
        "rounds" => e.rounds.to_string(),
        "alpha" => e.alpha.to_string(),
        "mode" => e.mode.to_string(),
        "kappa1" => e.kappa1.to_string(),
        "kappa2" => e.kappa2.to_string(),
        "hidden_width" => e.hidden_width.to_string(),
        "epochs" => e.train.epochs.to_string(),
        "batch_size" => e.train.batch_size.to_string(),
        "learning_rate" => e.train.learning_rate.to_string(),
        "rate_per_round" => e.generator.rate_per_round.to_string(),
        "cap_per_class" => e.generator.cap_per_class.to_string(),
        "label_noise" => e.generator.label_noise.to_string(),
        "center_shift" => e.generator.center_shift.to_string(),
        "spread_factor" => e.generator.spread_factor.to_string(),
        "client_flops_per_sec" => e.cost.client_flops_per_sec.to_string(),
        "server_flops_per_sec" => e.cost.server_flops_per_sec.to_string(),
        "uplink_bps" => e.cost.uplink_bps.to_string(),
        "downlink_bps" => e.cost.downlink_bps.to_string(),
        "client_power_watts" => e.cost.client_power_watts.to_string(),
        "server_power_watts" => e.cost.server_power_watts.to_string(),
        "gen_cost_per_sample" => e.cost.gen_cost_per_sample.to_string(),
        "bytes_per_param" => e.cost.bytes_per_param.to_string(),
        "parallel_clients" => e.parallel_clients.to_string(),
        "output_dir" => cfg.output_dir.display().to_string(),
        _ => unreachable!("unknown key {key}"),
    }
}

/// FNV-1a, used for run identifiers and sweep seeds.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// Identifies the simulated experiment; execution details such as the
/// output directory or client parallelism do not enter it.
pub fn config_hash(cfg: &RunConfig) -> u64 {
    let mut text = String::new();
    for key in KEYS.iter().filter(|k| !NON_EXPERIMENT_KEYS.contains(k)) {
        let _ = writeln!(text, "{key}={}", field(cfg, key));
    }
    fnv1a(text.as_bytes())
}

/// Fully resolved configuration in the input format. Parsing it back gives
/// an identical config.
pub fn render_config(cfg: &RunConfig) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# genfl resolved configuration");
    let _ = writeln!(out, "# config_hash = {:016x}", config_hash(cfg));
    for key in KEYS {
        let _ = writeln!(out, "{key} = {}", field(cfg, key));
    }
    out
}
