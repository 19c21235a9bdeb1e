//! Ensemble disagreement, rollouts and return scaling.

use alloc::boxed::Box;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::ensemble::{aggregate, Ensemble, EnsembleError};
use crate::envs::{episode_seed, random_action, EnvError, EnvId, EnvSpec, Environment};

/// Smallest `|R_expert - R_random|` accepted as a scaling denominator.
pub const DEGENERACY_EPS: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("mean action difference needs at least two actions, got {0}")]
    TooFewActions(usize),
    #[error("action {index} has {found} entries, expected {expected}")]
    ActionDimension {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("expert and random returns coincide ({expert} vs {random}); cannot scale")]
    DegenerateBaseline { expert: f64, random: f64 },
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
}

/// Average pairwise Euclidean distance between the actions,
/// `2 / (N (N - 1)) * sum_{i<j} |a_i - a_j|`.
pub fn mean_action_difference<A: AsRef<[f64]>>(actions: &[A]) -> Result<f64, MetricsError> {
    let n = actions.len();
    if n < 2 {
        return Err(MetricsError::TooFewActions(n));
    }
    let dim = actions[0].as_ref().len();
    if let Some(index) = actions.iter().position(|a| a.as_ref().len() != dim) {
        return Err(MetricsError::ActionDimension {
            index,
            expected: dim,
            found: actions[index].as_ref().len(),
        });
    }
    let mut sum = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let sq: f64 = actions[i]
                .as_ref()
                .iter()
                .zip(actions[j].as_ref())
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            sum += libm::sqrt(sq);
        }
    }
    Ok(2.0 * sum / (n * (n - 1)) as f64)
}

/// `(R - R_random) / (R_expert - R_random)`.
pub fn scaled_return(ret: f64, random: f64, expert: f64) -> Result<f64, MetricsError> {
    let span = expert - random;
    if !(span.abs() >= DEGENERACY_EPS) {
        return Err(MetricsError::DegenerateBaseline { expert, random });
    }
    Ok((ret - random) / span)
}

/// What a policy does in one state.
#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub action: Vec<f64>,
    /// Raw member outputs, for ensembles.
    pub members: Option<Vec<Vec<f64>>>,
}

pub trait Policy {
    fn decide(&mut self, observation: &[f64]) -> Result<Decision, MetricsError>;
}

/// The environment's scripted controller.
pub struct ExpertPolicy {
    env: Box<dyn Environment + Send>,
}

impl ExpertPolicy {
    pub fn new(id: EnvId) -> Self {
        ExpertPolicy { env: id.make() }
    }
}

impl Policy for ExpertPolicy {
    fn decide(&mut self, observation: &[f64]) -> Result<Decision, MetricsError> {
        Ok(Decision {
            action: self.env.expert_action(observation),
            members: None,
        })
    }
}

/// Uniformly random actions from a seeded generator.
pub struct RandomPolicy {
    spec: EnvSpec,
    rng: ChaCha8Rng,
}

impl RandomPolicy {
    pub fn new(spec: EnvSpec, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1);
        RandomPolicy { spec, rng }
    }
}

impl Policy for RandomPolicy {
    fn decide(&mut self, _observation: &[f64]) -> Result<Decision, MetricsError> {
        Ok(Decision {
            action: random_action(&self.spec, &mut self.rng),
            members: None,
        })
    }
}

/// Acts with the ensemble action, clipped to the environment's bounds.
pub struct EnsemblePolicy<'a> {
    ensemble: &'a Ensemble,
    bounds: Vec<(f64, f64)>,
}

impl<'a> EnsemblePolicy<'a> {
    pub fn new(ensemble: &'a Ensemble, spec: &EnvSpec) -> Self {
        EnsemblePolicy {
            ensemble,
            bounds: spec.action_bounds.clone(),
        }
    }
}

impl Policy for EnsemblePolicy<'_> {
    fn decide(&mut self, observation: &[f64]) -> Result<Decision, MetricsError> {
        let members = self.ensemble.member_actions(observation)?;
        let bounds = (!self.bounds.is_empty()).then_some(self.bounds.as_slice());
        Ok(Decision {
            action: aggregate(self.ensemble.action_kind(), &members, bounds),
            members: Some(members),
        })
    }
}

/// One episode from reset to termination.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub observations: Vec<Vec<f64>>,
    pub actions: Vec<Vec<f64>>,
    /// Per step, every member's raw output. Present when recorded for an
    /// ensemble.
    pub member_actions: Option<Vec<Vec<Vec<f64>>>>,
    pub rewards: Vec<f64>,
    /// Per-step mean action difference. Absent unless member actions were
    /// recorded for an ensemble of at least two members.
    pub action_differences: Option<Vec<f64>>,
    pub episode_return: f64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    /// Mean of the per-step action differences over the episode.
    pub fn mean_action_difference(&self) -> Option<f64> {
        self.action_differences
            .as_ref()
            .filter(|d| !d.is_empty())
            .map(|d| d.iter().sum::<f64>() / d.len() as f64)
    }
}

/// Runs `policy` in `env` from `reset(seed)` until the episode ends.
pub fn rollout(
    env: &mut dyn Environment,
    policy: &mut dyn Policy,
    seed: u64,
    record_members: bool,
) -> Result<Trajectory, MetricsError> {
    let mut obs = env.reset(seed);
    let mut observations = Vec::new();
    let mut actions = Vec::new();
    let mut rewards = Vec::new();
    let mut members_log: Vec<Vec<Vec<f64>>> = Vec::new();
    let mut diffs = Vec::new();
    let mut have_members = record_members;
    let mut have_diffs = record_members;
    loop {
        let decision = policy.decide(&obs)?;
        let out = env.step(&decision.action)?;
        match decision.members {
            Some(m) if record_members => {
                if m.len() >= 2 {
                    diffs.push(mean_action_difference(&m)?);
                } else {
                    have_diffs = false;
                }
                members_log.push(m);
            }
            _ => {
                have_members = false;
                have_diffs = false;
            }
        }
        observations.push(core::mem::replace(&mut obs, out.observation));
        actions.push(decision.action);
        rewards.push(out.reward);
        if out.done {
            break;
        }
    }
    let episode_return = rewards.iter().sum();
    Ok(Trajectory {
        observations,
        actions,
        member_actions: have_members.then_some(members_log),
        rewards,
        action_differences: have_diffs.then_some(diffs),
        episode_return,
    })
}

/// Mean episode returns of the uniform-random policy and the expert.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Baselines {
    pub random: f64,
    pub expert: f64,
}

impl Baselines {
    pub fn scale(&self, ret: f64) -> Result<f64, MetricsError> {
        scaled_return(ret, self.random, self.expert)
    }
}

/// Mean return over `episodes` rollouts seeded from `seed`.
pub fn mean_return(
    env_id: EnvId,
    episodes: usize,
    seed: u64,
    mut make_policy: impl FnMut(u64) -> Box<dyn Policy>,
) -> Result<f64, MetricsError> {
    let mut env = env_id.make();
    let mut total = 0.0;
    for ep in 0..episodes {
        let s = episode_seed(seed, ep);
        let mut policy = make_policy(s);
        total += rollout(env.as_mut(), policy.as_mut(), s, false)?.episode_return;
    }
    Ok(total / episodes as f64)
}

pub fn baseline_returns(env_id: EnvId, episodes: usize, seed: u64) -> Result<Baselines, MetricsError> {
    let spec = env_id.spec();
    let random = mean_return(env_id, episodes, seed, |s| {
        Box::new(RandomPolicy::new(spec.clone(), s))
    })?;
    let expert = mean_return(env_id, episodes, seed, |_| Box::new(ExpertPolicy::new(env_id)))?;
    Ok(Baselines { random, expert })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{ActionKind, Normalizer};
    use crate::nn::{Mlp, OutputActivation};

    #[test]
    fn identical_actions_have_zero_difference() {
        assert_eq!(mean_action_difference(&[[0.3, 0.1]; 4]).unwrap(), 0.0);
    }

    #[test]
    fn three_four_five() {
        assert_eq!(mean_action_difference(&[[0.0, 0.0], [3.0, 4.0]]).unwrap(), 5.0);
    }

    #[test]
    fn three_unit_vectors() {
        let d = mean_action_difference(&[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]).unwrap();
        assert!((d - 1.138_071).abs() < 1e-6, "{d}");
    }

    #[test]
    fn fewer_than_two_actions_rejected() {
        assert_eq!(
            mean_action_difference(&[[1.0]]).unwrap_err(),
            MetricsError::TooFewActions(1)
        );
        let empty: [[f64; 1]; 0] = [];
        assert!(mean_action_difference(&empty).is_err());
    }

    #[test]
    fn ragged_actions_rejected() {
        let a: [&[f64]; 2] = [&[0.0, 1.0], &[0.0]];
        assert!(matches!(
            mean_action_difference(&a),
            Err(MetricsError::ActionDimension { index: 1, .. })
        ));
    }

    #[test]
    fn scaling_examples() {
        assert_eq!(scaled_return(10.0, -5.0, 10.0).unwrap(), 1.0);
        assert_eq!(scaled_return(-5.0, -5.0, 10.0).unwrap(), 0.0);
        assert_eq!(scaled_return(50.0, -100.0, 100.0).unwrap(), 0.75);
        assert!(matches!(
            scaled_return(1.0, 3.0, 3.0),
            Err(MetricsError::DegenerateBaseline { .. })
        ));
    }

    #[test]
    fn rollout_is_reproducible() {
        let mut env = EnvId::PointReach.make();
        let mut p = ExpertPolicy::new(EnvId::PointReach);
        let a = rollout(env.as_mut(), &mut p, 7, true).unwrap();
        let b = rollout(env.as_mut(), &mut p, 7, true).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 200);
        assert_eq!(a.episode_return, a.rewards.iter().sum::<f64>());
        assert!(a.action_differences.is_none());
    }

    fn ensemble(n: usize) -> Ensemble {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let members = (0..n)
            .map(|_| Mlp::init_uniform(&[4, 3, 2], OutputActivation::Identity, &mut rng).unwrap())
            .collect();
        Ensemble::new(members, 0.0, ActionKind::Continuous, Normalizer::identity(4)).unwrap()
    }

    #[test]
    fn single_member_has_no_difference_trace() {
        let e = ensemble(1);
        let mut env = EnvId::PointReach.make();
        let spec = env.spec().clone();
        let t = rollout(env.as_mut(), &mut EnsemblePolicy::new(&e, &spec), 0, true).unwrap();
        assert!(t.action_differences.is_none());
        assert!(t.mean_action_difference().is_none());
        assert_eq!(t.member_actions.as_ref().unwrap().len(), t.len());
    }

    #[test]
    fn ensemble_rollout_records_differences() {
        let e = ensemble(3);
        let mut env = EnvId::PointReach.make();
        let spec = env.spec().clone();
        let t = rollout(env.as_mut(), &mut EnsemblePolicy::new(&e, &spec), 0, true).unwrap();
        let d = t.action_differences.as_ref().unwrap();
        assert_eq!(d.len(), t.len());
        assert!(d.iter().all(|&v| v > 0.0));
        let members = &t.member_actions.as_ref().unwrap()[10];
        assert_eq!(d[10], mean_action_difference(members).unwrap());
        // Without recording, nothing member-level is kept.
        let t = rollout(env.as_mut(), &mut EnsemblePolicy::new(&e, &spec), 0, false).unwrap();
        assert!(t.member_actions.is_none() && t.action_differences.is_none());
    }

    #[test]
    fn baselines_are_ordered_and_reproducible() {
        for id in EnvId::ALL {
            let b = baseline_returns(id, 5, 3).unwrap();
            assert_eq!(b, baseline_returns(id, 5, 3).unwrap());
            assert!(b.expert > b.random, "{id:?}: {b:?}");
        }
    }

    #[test]
    fn expert_beats_random_by_a_wide_margin() {
        // Scaled against a single reference run, 20 fresh expert episodes
        // land near 1 and random ones near 0.
        for id in EnvId::ALL {
            let b = baseline_returns(id, 20, 100).unwrap();
            let other = baseline_returns(id, 20, 200).unwrap();
            let expert = b.scale(other.expert).unwrap();
            let random = b.scale(other.random).unwrap();
            assert!(expert >= 2.0 * random.max(0.0) && expert > 0.5, "{id:?}: {expert} {random}");
        }
    }
}
