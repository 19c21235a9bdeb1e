//! Joint minibatch training of all ensemble members on the coupled loss.
//!
//! Every member sees the same minibatch. One backward pass through the
//! swarm loss yields the gradients of all members at once, then each member
//! takes its own optimizer step. With `tau = 0` the members decouple and
//! this is ordinary ensemble behavior cloning; with one member and `tau = 0`
//! it is single-policy behavior cloning.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::dataset::Dataset;
use crate::ensemble::{batch_loss_cotangents, Ensemble, EnsembleError, LossBreakdown};
use crate::nn::{Mlp, NnError};
use crate::optim::{AdamConfig, AdamState};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub hidden_width: usize,
    pub hidden_layers: usize,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Optional cap on optimizer steps across all epochs. Keeps large
    /// datasets within a fixed compute budget.
    pub max_steps: Option<usize>,
    /// Stop once the epoch loss has not improved by `min_improvement`
    /// (relative) for this many consecutive epochs.
    pub patience: usize,
    pub min_improvement: f64,
    pub adam: AdamConfig,
    pub normalized_pairs: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            hidden_width: 64,
            hidden_layers: 2,
            batch_size: 32,
            max_epochs: 200,
            max_steps: None,
            patience: 10,
            min_improvement: 1e-3,
            adam: AdamConfig::default(),
            normalized_pairs: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrainError {
    #[error("training dataset is empty")]
    EmptyDataset,
    #[error("ensemble size must be at least 1")]
    NoMembers,
    #[error("invalid training configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("loss became non-finite in epoch {epoch}")]
    Diverged {
        epoch: usize,
        /// Parameters at the start of the diverging epoch.
        checkpoint: Box<Ensemble>,
    },
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
    #[error(transparent)]
    Network(#[from] NnError),
}

/// Mean per-sample loss over one pass through the dataset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub loss: LossBreakdown,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub ensemble: Ensemble,
    pub history: Vec<EpochStats>,
    pub stopped_early: bool,
}

/// Builds `members` freshly initialized networks for `dataset`. Member `i`
/// draws from stream `i + 1` of the master seed; stream 0 is reserved for
/// minibatch shuffling.
pub fn init_ensemble(
    dataset: &Dataset,
    members: usize,
    tau: f64,
    config: &TrainConfig,
    seed: u64,
) -> Result<Ensemble, TrainError> {
    if members == 0 {
        return Err(TrainError::NoMembers);
    }
    if config.hidden_width == 0 || config.hidden_layers == 0 {
        return Err(TrainError::InvalidConfig("hidden layers need positive width and count"));
    }
    let meta = dataset.meta();
    let mut dims = vec![meta.obs_dim];
    dims.extend(core::iter::repeat(config.hidden_width).take(config.hidden_layers));
    dims.push(meta.action_dim);
    let head = meta.action_kind.output_activation();
    let nets = (0..members)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64 + 1);
            Mlp::init_uniform(&dims, head, &mut rng)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Ensemble::new(nets, tau, meta.action_kind, dataset.normalizer())?
        .with_normalized_pairs(config.normalized_pairs))
}

pub fn train(
    dataset: &Dataset,
    members: usize,
    tau: f64,
    config: &TrainConfig,
    seed: u64,
) -> Result<TrainOutcome, TrainError> {
    if dataset.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    if config.batch_size == 0 || config.max_epochs == 0 || config.max_steps == Some(0) {
        return Err(TrainError::InvalidConfig("batch size and epoch budget must be positive"));
    }
    let mut ensemble = init_ensemble(dataset, members, tau, config, seed)?;
    let normalizer = ensemble.normalizer().clone();
    let states: Vec<Vec<f64>> = dataset
        .samples()
        .iter()
        .map(|s| normalizer.apply(&s.state))
        .collect();

    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(seed);
    shuffle_rng.set_stream(0);
    let mut optimizers: Vec<AdamState> = ensemble
        .members()
        .iter()
        .map(|m| AdamState::new(m.num_params(), config.adam))
        .collect();
    let mut grads: Vec<Vec<f64>> = ensemble
        .members()
        .iter()
        .map(|m| vec![0.0; m.num_params()])
        .collect();
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut history = Vec::new();
    let mut best = f64::INFINITY;
    let mut stale = 0;
    let mut stopped_early = false;
    let mut steps = 0usize;

    for epoch in 0..config.max_epochs {
        let checkpoint = ensemble.clone();
        order.shuffle(&mut shuffle_rng);
        let mut sums = LossBreakdown::default();
        let mut seen = 0usize;
        for batch in order.chunks(config.batch_size) {
            if config.max_steps.is_some_and(|cap| steps >= cap) {
                break;
            }
            steps += 1;
            seen += batch.len();
            grads.iter_mut().for_each(|g| g.fill(0.0));
            let inputs: Vec<f64> = batch.iter().flat_map(|&i| states[i].iter().copied()).collect();
            let actions: Vec<f64> = batch
                .iter()
                .flat_map(|&i| dataset.samples()[i].action.iter().copied())
                .collect();
            let traces = ensemble
                .members()
                .iter()
                .map(|m| m.forward_batch(&inputs))
                .collect::<Result<Vec<_>, _>>()?;
            let (loss, cotangents) = batch_loss_cotangents(&ensemble, &traces, &actions);
            if !loss.total.is_finite() {
                return Err(TrainError::Diverged {
                    epoch,
                    checkpoint: Box::new(checkpoint),
                });
            }
            sums.bc_term += loss.bc_term;
            sums.swarm_term += loss.swarm_term;
            sums.total += loss.total;
            let scale = 1.0 / batch.len() as f64;
            for ((m, t), (c, g)) in ensemble
                .members()
                .iter()
                .zip(&traces)
                .zip(cotangents.iter().zip(grads.iter_mut()))
            {
                m.backward_batch_into(t, c, scale, g)?;
            }
            for ((m, opt), g) in ensemble
                .members_mut()
                .iter_mut()
                .zip(&mut optimizers)
                .zip(&grads)
            {
                opt.step(m.params_mut(), g)?;
            }
        }
        if ensemble
            .members()
            .iter()
            .any(|m| m.params().iter().any(|p| !p.is_finite()))
        {
            return Err(TrainError::Diverged {
                epoch,
                checkpoint: Box::new(checkpoint),
            });
        }
        let n = seen as f64;
        let mean = LossBreakdown {
            bc_term: sums.bc_term / n,
            swarm_term: sums.swarm_term / n,
            total: sums.total / n,
        };
        history.push(EpochStats { epoch, loss: mean });
        if config.max_steps.is_some_and(|cap| steps >= cap) {
            break;
        }

        if mean.total < best * (1.0 - config.min_improvement) {
            best = mean.total;
            stale = 0;
        } else {
            stale += 1;
            if stale >= config.patience {
                stopped_early = true;
                break;
            }
        }
    }
    Ok(TrainOutcome {
        ensemble,
        history,
        stopped_early,
    })
}
