//! Trained ensembles as self-describing JSON.
//!
//! Each member's parameters are stored flat, layer by layer: the weight
//! matrix in row-major order (one row per output unit), then the biases.
//! Floats use the shortest decimal form that reads back bit-identically.

use std::path::Path;

use serde::{Deserialize, Serialize};
use swarmbc_core::{ActionKind, Ensemble, EnvId, Mlp, Normalizer};

use crate::error::{CliError, Result};
use crate::files;
use crate::method::Method;

pub const FORMAT: &str = "swarmbc-model";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormalizerJson {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub format: String,
    pub version: u32,
    pub env: String,
    pub method: String,
    pub dataset_episodes: usize,
    pub seed: u64,
    pub layer_dims: Vec<usize>,
    pub hidden_activation: String,
    pub action_kind: String,
    pub tau: f64,
    pub n: usize,
    pub normalized_pairs: bool,
    pub normalizer: NormalizerJson,
    pub members: Vec<Vec<f64>>,
}

/// A loaded model with the provenance stored next to the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub env: EnvId,
    pub dataset_episodes: usize,
    pub seed: u64,
    pub ensemble: Ensemble,
}

impl Model {
    pub fn method(&self) -> Method {
        Method::classify(self.ensemble.tau(), self.ensemble.len())
    }

    pub fn to_file(&self) -> ModelFile {
        let e = &self.ensemble;
        ModelFile {
            format: FORMAT.to_string(),
            version: VERSION,
            env: self.env.name().to_string(),
            method: self.method().name().to_string(),
            dataset_episodes: self.dataset_episodes,
            seed: self.seed,
            layer_dims: e.dims().to_vec(),
            hidden_activation: "tanh".to_string(),
            action_kind: e.action_kind().name().to_string(),
            tau: e.tau(),
            n: e.len(),
            normalized_pairs: e.normalized_pairs(),
            normalizer: NormalizerJson {
                mean: e.normalizer().mean.clone(),
                std: e.normalizer().std.clone(),
            },
            members: e.members().iter().map(|m| m.params().to_vec()).collect(),
        }
    }

    pub fn from_file(path: &Path, file: ModelFile) -> Result<Self> {
        let bad = |msg: String| CliError::format(path, msg);
        if file.format != FORMAT || file.version != VERSION {
            return Err(bad(format!(
                "not a {FORMAT} v{VERSION} file (found {} v{})",
                file.format, file.version
            )));
        }
        if file.hidden_activation != "tanh" {
            return Err(bad(format!("unsupported hidden activation {:?}", file.hidden_activation)));
        }
        let env = EnvId::from_name(&file.env).ok_or_else(|| bad(format!("unknown env {:?}", file.env)))?;
        let kind = ActionKind::from_name(&file.action_kind)
            .ok_or_else(|| bad(format!("unknown action kind {:?}", file.action_kind)))?;
        if file.members.len() != file.n {
            return Err(bad(format!("n = {} but {} members stored", file.n, file.members.len())));
        }
        let members = file
            .members
            .into_iter()
            .map(|p| Mlp::from_params(&file.layer_dims, kind.output_activation(), p))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| bad(e.to_string()))?;
        let normalizer = Normalizer {
            mean: file.normalizer.mean,
            std: file.normalizer.std,
        };
        let ensemble = Ensemble::new(members, file.tau, kind, normalizer)
            .map_err(|e| bad(e.to_string()))?
            .with_normalized_pairs(file.normalized_pairs);
        let model = Model {
            env,
            dataset_episodes: file.dataset_episodes,
            seed: file.seed,
            ensemble,
        };
        if model.method().name() != file.method {
            return Err(bad(format!(
                "method {:?} does not match tau = {} with n = {}",
                file.method, file.tau, file.n
            )));
        }
        Ok(model)
    }
}

pub fn to_json(model: &Model) -> String {
    let mut text = serde_json::to_string_pretty(&model.to_file()).expect("model serializes");
    text.push('\n');
    text
}

pub fn save_model(path: &Path, model: &Model, force: bool) -> Result<()> {
    files::write(path, &to_json(model), force)
}

pub fn parse_model(path: &Path, text: &str) -> Result<Model> {
    let file: ModelFile = serde_json::from_str(text).map_err(|e| CliError::format(path, e.to_string()))?;
    Model::from_file(path, file)
}

pub fn load_model(path: &Path) -> Result<Model> {
    parse_model(path, &files::read_to_string(path)?)
}
