//! Sweep configuration: a flat `key = value` text file.
//!
//! Blank lines and `#` comments are ignored. Lists are comma separated.
//! Every key is optional and falls back to the default below; an unknown or
//! repeated key is an error.
//!
//! | key | default | meaning |
//! |-----|---------|---------|
//! | `envs` | all three | environments to run |
//! | `methods` | `bc,ensemble,swarm` | methods in the core grid |
//! | `episodes` | `1,2,3,4,5,6,7,8` | expert episodes per dataset |
//! | `seeds` | `5` | seeds per cell |
//! | `eval_episodes` | `20` | evaluation rollouts per trained model |
//! | `baseline_episodes` | `20` | rollouts for the expert and random baselines |
//! | `tau` | `0.25` | swarm coefficient in the core grid |
//! | `n` | `4` | ensemble size in the core grid |
//! | `ablations` | `true` | run the `tau` and `n` ablations |
//! | `tau_grid` | `0,0.25,0.5,0.75,1` | coefficients for the `tau` ablation |
//! | `n_grid` | `2,4,6,8` | ensemble sizes for the `n` ablation |
//! | `ablation_episodes` | `1` | dataset sizes the ablations use |
//! | `trace_episodes` | `1` | dataset sizes with per-timestep disagreement plots |
//! | `master_seed` | `0` | root of every derived seed |
//! | `out` | none | output directory (`--out` overrides it) |
//! | `hidden_width`, `hidden_layers`, `batch_size`, `max_epochs`, `max_steps`, `patience`, `min_improvement`, `learning_rate`, `normalized_pairs` | library defaults | training settings; `max_steps = none` removes the step cap |

use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use swarmbc_core::{EnvId, TrainConfig};

use crate::error::{CliError, Result};
use crate::method::{Method, DEFAULT_MEMBERS, DEFAULT_TAU};

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub envs: Vec<EnvId>,
    pub methods: Vec<Method>,
    pub episodes: Vec<usize>,
    pub seeds: usize,
    pub eval_episodes: usize,
    pub baseline_episodes: usize,
    pub tau: f64,
    pub n: usize,
    pub ablations: bool,
    pub tau_grid: Vec<f64>,
    pub n_grid: Vec<usize>,
    pub ablation_episodes: Vec<usize>,
    pub trace_episodes: Vec<usize>,
    pub master_seed: u64,
    pub out: Option<PathBuf>,
    pub training: TrainConfig,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            envs: EnvId::ALL.to_vec(),
            methods: Method::ALL.to_vec(),
            episodes: (1..=8).collect(),
            seeds: 5,
            eval_episodes: 20,
            baseline_episodes: 20,
            tau: DEFAULT_TAU,
            n: DEFAULT_MEMBERS,
            ablations: true,
            tau_grid: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            n_grid: vec![2, 4, 6, 8],
            ablation_episodes: vec![1],
            trace_episodes: vec![1],
            master_seed: 0,
            out: None,
            training: TrainConfig::default(),
        }
    }
}

fn parse_one<T: FromStr>(key: &str, raw: &str) -> std::result::Result<T, String> {
    raw.parse()
        .map_err(|_| format!("{key}: cannot parse {raw:?}"))
}

fn parse_list<T: FromStr>(key: &str, raw: &str) -> std::result::Result<Vec<T>, String> {
    if raw.trim().is_empty() {
        return Err(format!("{key}: list must not be empty"));
    }
    raw.split(',').map(|item| parse_one(key, item.trim())).collect()
}

fn parse_bool(key: &str, raw: &str) -> std::result::Result<bool, String> {
    match raw {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(format!("{key}: expected true or false, got {raw:?}")),
    }
}

fn parse_envs(raw: &str) -> std::result::Result<Vec<EnvId>, String> {
    parse_list::<String>("envs", raw)?
        .iter()
        .map(|name| EnvId::from_name(name).ok_or_else(|| format!("envs: unknown env {name:?}")))
        .collect()
}

fn parse_methods(raw: &str) -> std::result::Result<Vec<Method>, String> {
    parse_list::<String>("methods", raw)?
        .iter()
        .map(|name| Method::from_name(name).ok_or_else(|| format!("methods: unknown method {name:?}")))
        .collect()
}

impl SweepConfig {
    pub fn parse(text: &str) -> std::result::Result<Self, String> {
        let mut config = SweepConfig::default();
        let mut seen = HashSet::new();
        for (index, raw_line) in text.lines().enumerate() {
            let line = raw_line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let at = |msg: String| format!("line {}: {msg}", index + 1);
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| at(format!("expected key = value, got {line:?}")))?;
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                return Err(at(format!("{key} is set twice")));
            }
            config.set(key, value).map_err(at)?;
        }
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = crate::files::read_to_string(path)?;
        Self::parse(&text).map_err(|msg| CliError::Usage(format!("{}: {msg}", path.display())))
    }

    fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        let t = &mut self.training;
        match key {
            "envs" => self.envs = parse_envs(value)?,
            "methods" => self.methods = parse_methods(value)?,
            "episodes" => self.episodes = parse_list(key, value)?,
            "seeds" => self.seeds = parse_one(key, value)?,
            "eval_episodes" => self.eval_episodes = parse_one(key, value)?,
            "baseline_episodes" => self.baseline_episodes = parse_one(key, value)?,
            "tau" => self.tau = parse_one(key, value)?,
            "n" => self.n = parse_one(key, value)?,
            "ablations" => self.ablations = parse_bool(key, value)?,
            "tau_grid" => self.tau_grid = parse_list(key, value)?,
            "n_grid" => self.n_grid = parse_list(key, value)?,
            "ablation_episodes" => self.ablation_episodes = parse_list(key, value)?,
            "trace_episodes" => self.trace_episodes = parse_list(key, value)?,
            "master_seed" => self.master_seed = parse_one(key, value)?,
            "out" => self.out = Some(PathBuf::from(value)),
            "hidden_width" => t.hidden_width = parse_one(key, value)?,
            "hidden_layers" => t.hidden_layers = parse_one(key, value)?,
            "batch_size" => t.batch_size = parse_one(key, value)?,
            "max_epochs" => t.max_epochs = parse_one(key, value)?,
            "max_steps" => {
                t.max_steps = match value {
                    "none" => None,
                    v => Some(parse_one(key, v)?),
                }
            }
            "patience" => t.patience = parse_one(key, value)?,
            "min_improvement" => t.min_improvement = parse_one(key, value)?,
            "learning_rate" => t.adam.learning_rate = parse_one(key, value)?,
            "normalized_pairs" => t.normalized_pairs = parse_bool(key, value)?,
            _ => return Err(format!("unknown key {key:?}")),
        }
        Ok(())
    }

    pub fn validate(&self) -> std::result::Result<(), String> {
        let positive = |name: &str, v: usize| {
            if v == 0 {
                Err(format!("{name} must be positive"))
            } else {
                Ok(())
            }
        };
        if self.envs.is_empty() || self.methods.is_empty() || self.episodes.is_empty() {
            return Err("envs, methods and episodes must not be empty".into());
        }
        if self.ablations && (self.tau_grid.is_empty() || self.n_grid.is_empty() || self.ablation_episodes.is_empty()) {
            return Err("tau_grid, n_grid and ablation_episodes must not be empty".into());
        }
        for &e in self.episodes.iter().chain(&self.ablation_episodes).chain(&self.trace_episodes) {
            positive("dataset episodes", e)?;
        }
        positive("seeds", self.seeds)?;
        positive("eval_episodes", self.eval_episodes)?;
        positive("baseline_episodes", self.baseline_episodes)?;
        if self.methods.contains(&Method::Swarm) {
            Method::Swarm.resolve(Some(self.tau), Some(self.n)).map_err(|e| format!("tau/n: {e}"))?;
        }
        if self.methods.contains(&Method::Ensemble) {
            Method::Ensemble.resolve(None, Some(self.n)).map_err(|e| format!("n: {e}"))?;
        }
        if self.ablations {
            for &tau in &self.tau_grid {
                if !(tau.is_finite() && tau >= 0.0) {
                    return Err(format!("tau_grid: {tau} is not a finite non-negative value"));
                }
            }
            for &n in &self.n_grid {
                if n < 2 {
                    return Err(format!("n_grid: ensembles need at least 2 members, got {n}"));
                }
            }
        }
        let t = &self.training;
        positive("hidden_width", t.hidden_width)?;
        positive("hidden_layers", t.hidden_layers)?;
        positive("batch_size", t.batch_size)?;
        positive("max_epochs", t.max_epochs)?;
        if let Some(steps) = t.max_steps {
            positive("max_steps", steps)?;
        }
        if !(t.adam.learning_rate.is_finite() && t.adam.learning_rate > 0.0) {
            return Err("learning_rate must be positive".into());
        }
        if !(t.min_improvement.is_finite() && t.min_improvement >= 0.0) {
            return Err("min_improvement must be non-negative".into());
        }
        Ok(())
    }
}
