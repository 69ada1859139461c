//! Experiment configuration as a flat `key = value` file.
//!
//! Keys use dotted sections (`ppo.gamma`, `prune.lambda`, `grid.ratio`). Lines starting
//! with `#` are comments; list values are comma separated. CLI flags override file values
//! through the same [`ExperimentConfig::set`] entry point.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::envs::EnvKind;
use crate::error::{Error, Result};
use crate::nn::Activation;
use crate::optim::OptimizerKind;
use crate::ppo::PpoConfig;
use crate::pruning::{PruneConfig, Strategy, ThresholdMode};

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub env: EnvKind,
    pub episodes: usize,
    pub seeds: Vec<u64>,
    pub actor_hidden: Vec<usize>,
    pub critic_hidden: Vec<usize>,
    pub activation: Activation,
    /// Initial log standard deviation of a Gaussian head.
    pub init_log_std: f64,
    pub ppo: PpoConfig,
    pub prune: PruneConfig,
    /// Strategies swept by `run_grid`.
    pub strategies: Vec<Strategy>,
    pub lambda_grid: Vec<f64>,
    pub ratio_grid: Vec<f64>,
    pub out_dir: PathBuf,
    /// Record real elapsed time per episode; off keeps CSV output byte-reproducible.
    pub log_wall_time: bool,
    /// Add the critic to the size/cost counts.
    pub count_critic: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            env: EnvKind::CartPole,
            episodes: 1000,
            seeds: vec![0, 1, 2, 3, 4],
            actor_hidden: vec![128, 128],
            critic_hidden: vec![128, 128],
            activation: Activation::Relu,
            init_log_std: -0.5,
            ppo: PpoConfig::default(),
            prune: PruneConfig::default(),
            strategies: vec![Strategy::Dsp],
            lambda_grid: vec![1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8],
            ratio_grid: vec![0.80, 0.85, 0.90, 0.93],
            out_dir: PathBuf::from("runs"),
            log_wall_time: false,
            count_critic: false,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse `{value}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim().to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(Error::Config(format!(
            "{key}: expected a boolean, got `{value}`"
        ))),
    }
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| parse(key, s))
        .collect()
}

fn join<T: std::fmt::Display>(items: &[T]) -> String {
    items
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

impl ExperimentConfig {
    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim();
        match key {
            "env" => self.env = value.parse()?,
            "episodes" => self.episodes = parse(key, value)?,
            "seeds" | "seed" => self.seeds = parse_list(key, value)?,
            "out_dir" => self.out_dir = PathBuf::from(value.trim()),
            "log_wall_time" => self.log_wall_time = parse_bool(key, value)?,
            "count_critic" => self.count_critic = parse_bool(key, value)?,
            "actor.hidden" => self.actor_hidden = parse_list(key, value)?,
            "critic.hidden" => self.critic_hidden = parse_list(key, value)?,
            "actor.activation" | "activation" => self.activation = value.parse()?,
            "actor.init_log_std" => self.init_log_std = parse(key, value)?,
            "ppo.gamma" => self.ppo.gamma = parse(key, value)?,
            "ppo.clip_eps" => self.ppo.clip_eps = parse(key, value)?,
            "ppo.actor_lr" => self.ppo.actor_lr = parse(key, value)?,
            "ppo.critic_lr" => self.ppo.critic_lr = parse(key, value)?,
            "ppo.update_epochs" => self.ppo.update_epochs = parse(key, value)?,
            "ppo.minibatch_size" => self.ppo.minibatch_size = parse(key, value)?,
            "ppo.rollout_steps" => self.ppo.rollout_steps = parse(key, value)?,
            "ppo.normalize_advantages" => self.ppo.normalize_advantages = parse_bool(key, value)?,
            "ppo.optimizer" => self.ppo.optimizer = value.parse::<OptimizerKind>()?,
            "prune.strategy" | "strategy" => self.prune.strategy = value.parse()?,
            "prune.lambda" | "lambda" => self.prune.lambda = parse(key, value)?,
            "prune.p_initial" => self.prune.p_initial = parse(key, value)?,
            "prune.p_final" | "ratio" => self.prune.p_final = parse(key, value)?,
            "prune.t_start" => self.prune.t_start = parse(key, value)?,
            "prune.total_prune_steps" => self.prune.total_prune_steps = parse(key, value)?,
            "prune.prune_frequency" => self.prune.prune_frequency = parse(key, value)?,
            "prune.threshold_mode" => self.prune.threshold_mode = value.parse::<ThresholdMode>()?,
            "grid.strategies" => self.strategies = parse_list(key, value)?,
            "grid.lambda" => self.lambda_grid = parse_list(key, value)?,
            "grid.ratio" => self.ratio_grid = parse_list(key, value)?,
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    pub fn from_kv_str(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_kv_str(text)?;
        Ok(cfg)
    }

    /// Applies every `key = value` line of `text` on top of the current values.
    pub fn apply_kv_str(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", n + 1)))?;
            self.set(key, value)
                .map_err(|e| Error::Config(format!("line {}: {e}", n + 1)))?;
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_kv_str(&text)
    }

    /// Serialises every setting; `from_kv_str(to_kv_string())` reproduces the config.
    pub fn to_kv_string(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("env", self.env.name().into());
        kv("episodes", self.episodes.to_string());
        kv("seeds", join(&self.seeds));
        kv("out_dir", self.out_dir.display().to_string());
        kv("log_wall_time", self.log_wall_time.to_string());
        kv("count_critic", self.count_critic.to_string());
        kv("actor.hidden", join(&self.actor_hidden));
        kv("actor.activation", self.activation.name().into());
        kv("actor.init_log_std", self.init_log_std.to_string());
        kv("critic.hidden", join(&self.critic_hidden));
        kv("ppo.gamma", self.ppo.gamma.to_string());
        kv("ppo.clip_eps", self.ppo.clip_eps.to_string());
        kv("ppo.actor_lr", self.ppo.actor_lr.to_string());
        kv("ppo.critic_lr", self.ppo.critic_lr.to_string());
        kv("ppo.update_epochs", self.ppo.update_epochs.to_string());
        kv("ppo.minibatch_size", self.ppo.minibatch_size.to_string());
        kv("ppo.rollout_steps", self.ppo.rollout_steps.to_string());
        kv(
            "ppo.normalize_advantages",
            self.ppo.normalize_advantages.to_string(),
        );
        kv("ppo.optimizer", self.ppo.optimizer.name().into());
        kv("prune.strategy", self.prune.strategy.name().into());
        kv("prune.lambda", self.prune.lambda.to_string());
        kv("prune.p_initial", self.prune.p_initial.to_string());
        kv("prune.p_final", self.prune.p_final.to_string());
        kv("prune.t_start", self.prune.t_start.to_string());
        kv(
            "prune.total_prune_steps",
            self.prune.total_prune_steps.to_string(),
        );
        kv(
            "prune.prune_frequency",
            self.prune.prune_frequency.to_string(),
        );
        kv(
            "prune.threshold_mode",
            self.prune.threshold_mode.name().into(),
        );
        kv(
            "grid.strategies",
            self.strategies
                .iter()
                .map(|s| s.name())
                .collect::<Vec<_>>()
                .join(","),
        );
        kv("grid.lambda", join(&self.lambda_grid));
        kv("grid.ratio", join(&self.ratio_grid));
        s
    }

    pub fn validate(&self) -> Result<()> {
        if self.episodes == 0 {
            return Err(Error::Config("episodes must be >= 1".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.seeds.len() {
            return Err(Error::Config("seeds must be distinct".into()));
        }
        if self.actor_hidden.is_empty() || self.actor_hidden.contains(&0) {
            return Err(Error::Config(
                "actor needs at least one non-empty hidden layer".into(),
            ));
        }
        if self.critic_hidden.contains(&0) {
            return Err(Error::Config("critic hidden widths must be >= 1".into()));
        }
        self.ppo.validate()?;
        if self.prune.strategy != Strategy::None {
            self.prune.validate()?;
        }
        Ok(())
    }

    pub fn validate_grid(&self) -> Result<()> {
        self.validate()?;
        if self.strategies.is_empty() || self.lambda_grid.is_empty() || self.ratio_grid.is_empty() {
            return Err(Error::Config("grid axes must be non-empty".into()));
        }
        if self.ratio_grid.iter().any(|r| !(*r > 0.0 && *r <= 1.0)) {
            return Err(Error::Config("grid ratios must lie in (0, 1]".into()));
        }
        Ok(())
    }
}
