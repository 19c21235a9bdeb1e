//! Ensemble behavior cloning with a hidden-activation alignment penalty.
//!
//! An ensemble of MLP policies is trained jointly on expert demonstrations.
//! Besides the usual squared action error of every member, the training loss
//! can penalize pairwise differences between the members' hidden
//! activations, which pulls their predictions together in states the data
//! covers poorly. The crate also contains small control environments with
//! scripted experts, the disagreement and return metrics used to evaluate
//! ensembles, and a grid-density demonstration of mode concentration.
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]

extern crate alloc;

pub mod dataset;
pub mod ensemble;
pub mod envs;
pub mod gradcheck;
pub mod metrics;
pub mod nn;
pub mod optim;
pub mod theory;
pub mod train;

pub use dataset::{Dataset, DatasetMeta, Sample};
pub use ensemble::{ensemble_action, standard_loss, swarm_loss, ActionKind, Ensemble, LossBreakdown, Normalizer};
pub use envs::{generate_dataset, EnvId, EnvSpec, Environment};
pub use metrics::{baseline_returns, mean_action_difference, rollout, scaled_return, Baselines, Trajectory};
pub use nn::{ForwardTrace, Mlp, OutputActivation};
pub use optim::{AdamConfig, AdamState};
pub use train::{train, TrainConfig, TrainOutcome};
