//! Scoring policies over seeded evaluation episodes.

use std::fmt::Write as _;

use swarmbc_core::envs::episode_seed;
use swarmbc_core::metrics::{rollout, EnsemblePolicy, ExpertPolicy, MetricsError, Policy};
use swarmbc_core::{Baselines, Ensemble, EnvId, Trajectory};

#[derive(Debug, Clone, Copy)]
pub enum Actor<'a> {
    Expert,
    Ensemble(&'a Ensemble),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub scaled_return: f64,
    pub episode_return: f64,
    /// Mean over episodes of each episode's average action difference.
    pub mean_action_difference: Option<f64>,
    /// Per timestep: mean action difference over the episodes still running,
    /// and how many that were.
    pub difference_trace: Option<Vec<(f64, usize)>>,
    pub trajectories: Vec<Trajectory>,
}

/// Runs `episodes` rollouts, episode `k` starting from
/// `episode_seed(seed, k)`.
pub fn evaluate(
    env_id: EnvId,
    actor: Actor<'_>,
    episodes: usize,
    seed: u64,
    baselines: &Baselines,
) -> Result<Evaluation, MetricsError> {
    let spec = env_id.spec();
    let mut env = env_id.make();
    let mut trajectories = Vec::with_capacity(episodes);
    for ep in 0..episodes {
        let mut policy: Box<dyn Policy + '_> = match actor {
            Actor::Expert => Box::new(ExpertPolicy::new(env_id)),
            Actor::Ensemble(e) => Box::new(EnsemblePolicy::new(e, &spec)),
        };
        let record = matches!(actor, Actor::Ensemble(_));
        trajectories.push(rollout(env.as_mut(), policy.as_mut(), episode_seed(seed, ep), record)?);
    }
    let count = episodes as f64;
    let episode_return = trajectories.iter().map(|t| t.episode_return).sum::<f64>() / count;
    let scaled_return = trajectories
        .iter()
        .map(|t| baselines.scale(t.episode_return))
        .sum::<Result<f64, _>>()?
        / count;
    let per_episode: Option<Vec<f64>> = trajectories.iter().map(Trajectory::mean_action_difference).collect();
    let mean_action_difference = per_episode.map(|d| d.iter().sum::<f64>() / count);
    let difference_trace = mean_action_difference.map(|_| difference_trace(&trajectories));
    Ok(Evaluation {
        scaled_return,
        episode_return,
        mean_action_difference,
        difference_trace,
        trajectories,
    })
}

fn difference_trace(trajectories: &[Trajectory]) -> Vec<(f64, usize)> {
    let longest = trajectories.iter().map(Trajectory::len).max().unwrap_or(0);
    (0..longest)
        .map(|t| {
            let alive: Vec<f64> = trajectories
                .iter()
                .filter_map(|tr| tr.action_differences.as_ref().and_then(|d| d.get(t)).copied())
                .collect();
            (alive.iter().sum::<f64>() / alive.len() as f64, alive.len())
        })
        .collect()
}

/// Header of a trajectory CSV for `members` members with `action_dim`
/// action components. `d` is left empty where it is undefined.
pub fn trajectory_header(members: usize, action_dim: usize) -> String {
    let mut header = String::from("t,reward,d");
    for i in 0..members {
        for k in 0..action_dim {
            let _ = write!(header, ",a_member{i}_{k}");
        }
    }
    header
}

pub fn trajectory_csv(trajectory: &Trajectory, action_dim: usize) -> String {
    let members = trajectory
        .member_actions
        .as_ref()
        .and_then(|m| m.first())
        .map_or(0, Vec::len);
    let mut out = trajectory_header(members, action_dim);
    out.push('\n');
    for (t, reward) in trajectory.rewards.iter().enumerate() {
        let _ = write!(out, "{t},{reward},");
        if let Some(d) = trajectory.action_differences.as_ref().and_then(|d| d.get(t)) {
            let _ = write!(out, "{d}");
        }
        if let Some(step) = trajectory.member_actions.as_ref().and_then(|m| m.get(t)) {
            for value in step.iter().flatten() {
                let _ = write!(out, ",{value}");
            }
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use swarmbc_core::metrics::baseline_returns;

    #[test]
    fn expert_scores_exactly_one_on_its_own_baseline_episodes() {
        for env in EnvId::ALL {
            let b = baseline_returns(env, 5, 17).unwrap();
            let e = evaluate(env, Actor::Expert, 5, 17, &b).unwrap();
            assert!((e.scaled_return - 1.0).abs() < 1e-12, "{env:?}: {}", e.scaled_return);
            assert_eq!(e.mean_action_difference, None);
        }
    }

    #[test]
    fn trajectory_columns() {
        assert_eq!(trajectory_header(2, 1), "t,reward,d,a_member0_0,a_member1_0");
        let tr = Trajectory {
            observations: vec![vec![0.0]; 2],
            actions: vec![vec![0.5]; 2],
            member_actions: Some(vec![vec![vec![0.0], vec![1.0]]; 2]),
            rewards: vec![1.0, 0.5],
            action_differences: Some(vec![1.0, 1.0]),
            episode_return: 1.5,
        };
        assert_eq!(
            trajectory_csv(&tr, 1),
            "t,reward,d,a_member0_0,a_member1_0\n0,1,1,0,1\n1,0.5,1,0,1\n"
        );
    }
}
