//! Small deterministic control tasks with scripted experts.
//!
//! Dynamics are deterministic and integrated with semi-implicit Euler at a
//! fixed step of [`DT`]; only the start state is random, drawn from a seeded
//! generator in [`Environment::reset`].

mod cart_balance;
mod pendulum_swing;
mod point_reach;

use alloc::boxed::Box;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::dataset::{Dataset, DatasetMeta, Sample};
use crate::ensemble::ActionKind;

pub use cart_balance::CartBalance;
pub use pendulum_swing::PendulumSwing;
pub use point_reach::PointReach;

/// Integration step shared by every environment, in seconds.
pub const DT: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EnvError {
    #[error("episode is over; call reset before stepping")]
    EpisodeDone,
    #[error("environment was stepped before reset")]
    NotReset,
    #[error("action has {found} entries, expected {expected}")]
    ActionDimension { expected: usize, found: usize },
    #[error("action contains a non-finite value")]
    NonFiniteAction,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EnvId {
    PointReach,
    PendulumSwing,
    CartBalance,
}

impl EnvId {
    pub const ALL: [EnvId; 3] = [EnvId::PointReach, EnvId::PendulumSwing, EnvId::CartBalance];

    pub fn name(self) -> &'static str {
        match self {
            EnvId::PointReach => "point_reach",
            EnvId::PendulumSwing => "pendulum_swing",
            EnvId::CartBalance => "cart_balance",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|id| id.name() == name)
    }

    pub fn make(self) -> Box<dyn Environment + Send> {
        match self {
            EnvId::PointReach => Box::new(PointReach::new()),
            EnvId::PendulumSwing => Box::new(PendulumSwing::new()),
            EnvId::CartBalance => Box::new(CartBalance::new()),
        }
    }

    pub fn spec(self) -> EnvSpec {
        self.make().spec().clone()
    }
}

/// Static description of an environment.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvSpec {
    pub id: EnvId,
    pub obs_dim: usize,
    pub action_kind: ActionKind,
    /// Width of the action vector. Discrete environments take a one-hot (or
    /// probability) vector and act on its argmax.
    pub action_dim: usize,
    /// Per-dimension `(low, high)`; empty for discrete actions.
    pub action_bounds: Vec<(f64, f64)>,
    pub max_steps: usize,
    /// Every per-step reward lies in this closed interval.
    pub reward_range: (f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub observation: Vec<f64>,
    pub reward: f64,
    pub done: bool,
}

pub trait Environment {
    fn spec(&self) -> &EnvSpec;

    /// Samples a start state from `seed` and returns its observation.
    fn reset(&mut self, seed: u64) -> Vec<f64>;

    /// Advances one step. Continuous actions are clipped to the bounds.
    fn step(&mut self, action: &[f64]) -> Result<StepOutcome, EnvError>;

    fn steps_taken(&self) -> usize;

    /// Physical state (not the observation).
    fn state(&self) -> Vec<f64>;

    /// The scripted expert's action for an observation.
    fn expert_action(&self, observation: &[f64]) -> Vec<f64>;
}

/// Episode bookkeeping shared by the environments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub(crate) struct Clock {
    pub steps: usize,
    pub started: bool,
    pub done: bool,
}

impl Clock {
    pub fn reset(&mut self) {
        *self = Clock {
            steps: 0,
            started: true,
            done: false,
        };
    }

    pub fn check(&self) -> Result<(), EnvError> {
        if !self.started {
            return Err(EnvError::NotReset);
        }
        if self.done {
            return Err(EnvError::EpisodeDone);
        }
        Ok(())
    }

    pub fn tick(&mut self, failed: bool, max_steps: usize) -> bool {
        self.steps += 1;
        self.done = failed || self.steps >= max_steps;
        self.done
    }
}

pub(crate) fn start_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub(crate) fn checked_continuous(spec: &EnvSpec, action: &[f64]) -> Result<Vec<f64>, EnvError> {
    if action.len() != spec.action_dim {
        return Err(EnvError::ActionDimension {
            expected: spec.action_dim,
            found: action.len(),
        });
    }
    if action.iter().any(|a| !a.is_finite()) {
        return Err(EnvError::NonFiniteAction);
    }
    Ok(action
        .iter()
        .zip(&spec.action_bounds)
        .map(|(a, &(lo, hi))| a.clamp(lo, hi))
        .collect())
}

/// One-hot vector of width `n` with a 1 at `index`.
pub fn one_hot(index: usize, n: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[index] = 1.0;
    v
}

/// Uniformly random action: a box sample for continuous spaces, a one-hot
/// vector of a uniform index for discrete ones.
pub fn random_action<R: Rng + ?Sized>(spec: &EnvSpec, rng: &mut R) -> Vec<f64> {
    match spec.action_kind {
        ActionKind::Continuous => spec
            .action_bounds
            .iter()
            .map(|&(lo, hi)| rng.gen_range(lo..=hi))
            .collect(),
        ActionKind::Discrete => one_hot(rng.gen_range(0..spec.action_dim), spec.action_dim),
    }
}

/// Seed of episode `episode` in a run seeded with `seed`.
pub fn episode_seed(seed: u64, episode: usize) -> u64 {
    // splitmix64 finalizer over the pair.
    let mut z = seed ^ (episode as u64).wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Runs the expert for `episodes` seeded episodes and records every
/// `(observation, expert action)` pair.
pub fn generate_dataset(env_id: EnvId, episodes: usize, seed: u64) -> Result<Dataset, EnvError> {
    let mut env = env_id.make();
    let spec = env.spec().clone();
    let mut samples = Vec::new();
    for ep in 0..episodes {
        let mut obs = env.reset(episode_seed(seed, ep));
        loop {
            let action = env.expert_action(&obs);
            let out = env.step(&action)?;
            samples.push(Sample {
                state: obs,
                action,
            });
            obs = out.observation;
            if out.done {
                break;
            }
        }
    }
    let meta = DatasetMeta {
        env: env_id.name().to_string(),
        episodes,
        seed,
        obs_dim: spec.obs_dim,
        action_dim: spec.action_dim,
        action_kind: spec.action_kind,
    };
    Ok(Dataset::new(meta, samples).expect("environment produced consistent dimensions"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for id in EnvId::ALL {
            assert_eq!(EnvId::from_name(id.name()), Some(id));
        }
        assert_eq!(EnvId::from_name("hopper"), None);
    }

    #[test]
    fn reset_is_seeded_and_zeroes_clock() {
        for id in EnvId::ALL {
            let mut a = id.make();
            let mut b = id.make();
            assert_eq!(a.reset(17), b.reset(17));
            assert_eq!(a.steps_taken(), 0);
            assert_ne!(a.reset(17), a.reset(18));
        }
    }

    #[test]
    fn stepping_before_reset_fails() {
        for id in EnvId::ALL {
            let mut env = id.make();
            let a = vec![0.0; env.spec().action_dim];
            assert_eq!(env.step(&a).unwrap_err(), EnvError::NotReset);
        }
    }

    #[test]
    fn stepping_after_done_fails() {
        for id in EnvId::ALL {
            let mut env = id.make();
            let mut obs = env.reset(3);
            loop {
                let a = env.expert_action(&obs);
                let out = env.step(&a).unwrap();
                obs = out.observation;
                if out.done {
                    break;
                }
            }
            let a = env.expert_action(&obs);
            assert_eq!(env.step(&a).unwrap_err(), EnvError::EpisodeDone);
        }
    }

    #[test]
    fn observations_match_spec_and_rewards_stay_in_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for id in EnvId::ALL {
            let mut env = id.make();
            let spec = env.spec().clone();
            for seed in 0..5 {
                let obs = env.reset(seed);
                assert_eq!(obs.len(), spec.obs_dim);
                loop {
                    let a = random_action(&spec, &mut rng);
                    let out = env.step(&a).unwrap();
                    assert_eq!(out.observation.len(), spec.obs_dim);
                    assert!(out.reward >= spec.reward_range.0 && out.reward <= spec.reward_range.1);
                    if out.done {
                        break;
                    }
                }
                assert!(env.steps_taken() <= spec.max_steps);
            }
        }
    }

    #[test]
    fn dynamics_are_deterministic() {
        for id in EnvId::ALL {
            let mut a = id.make();
            let mut b = id.make();
            let mut oa = a.reset(11);
            let ob = b.reset(11);
            assert_eq!(oa, ob);
            for _ in 0..50 {
                let act = a.expert_action(&oa);
                let ra = a.step(&act).unwrap();
                let rb = b.step(&act).unwrap();
                assert_eq!(ra, rb);
                oa = ra.observation;
                if ra.done {
                    break;
                }
            }
        }
    }

    #[test]
    fn wrong_action_width_rejected() {
        for id in EnvId::ALL {
            let mut env = id.make();
            env.reset(0);
            let a = vec![0.0; env.spec().action_dim + 1];
            assert!(matches!(env.step(&a), Err(EnvError::ActionDimension { .. })));
        }
    }

    #[test]
    fn one_episode_dataset_has_episode_length() {
        let d = generate_dataset(EnvId::PointReach, 1, 0).unwrap();
        assert_eq!(d.len(), 200);
        assert_eq!(d.meta().episodes, 1);
        let d8 = generate_dataset(EnvId::CartBalance, 8, 2).unwrap();
        assert_eq!(d8.meta().episodes, 8);
        assert_eq!(d8.meta().env, "cart_balance");
        assert!(d8.samples().iter().all(|s| s.action.iter().sum::<f64>() == 1.0));
    }

    #[test]
    fn datasets_are_reproducible() {
        assert_eq!(
            generate_dataset(EnvId::PendulumSwing, 2, 4).unwrap(),
            generate_dataset(EnvId::PendulumSwing, 2, 4).unwrap()
        );
    }
}
