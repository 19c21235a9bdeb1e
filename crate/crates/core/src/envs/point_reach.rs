use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::{checked_continuous, start_rng, Clock, EnvError, EnvId, EnvSpec, Environment, StepOutcome, DT};
use crate::ensemble::ActionKind;

/// Planar double integrator driven towards a fixed goal.
///
/// Observation: `(x - goal_x, y - goal_y, vx, vy)`. Action: force in
/// `[-1, 1]^2` (unit mass). Reward: `-|pos - goal|`. The point is confined to
/// the square arena `[-ARENA, ARENA]^2`; hitting a wall stops motion along
/// that axis.
#[derive(Debug, Clone)]
pub struct PointReach {
    spec: EnvSpec,
    pub goal: [f64; 2],
    /// Start positions are drawn uniformly from `goal +- start_half_width`.
    pub start_half_width: f64,
    pub kp: f64,
    pub kd: f64,
    pos: [f64; 2],
    vel: [f64; 2],
    clock: Clock,
}

const ARENA: f64 = 4.0;

impl PointReach {
    pub fn new() -> Self {
        PointReach {
            spec: EnvSpec {
                id: EnvId::PointReach,
                obs_dim: 4,
                action_kind: ActionKind::Continuous,
                action_dim: 2,
                action_bounds: vec![(-1.0, 1.0); 2],
                max_steps: 200,
                // Arena diagonal bounds the distance to any goal inside it.
                reward_range: (-2.0 * ARENA * core::f64::consts::SQRT_2, 0.0),
            },
            goal: [0.0, 0.0],
            start_half_width: 2.0,
            kp: 1.5,
            kd: 2.0,
            pos: [0.0; 2],
            vel: [0.0; 2],
            clock: Clock::default(),
        }
    }

    /// Puts the point at an arbitrary state and restarts the episode clock.
    pub fn set_state(&mut self, pos: [f64; 2], vel: [f64; 2]) -> Vec<f64> {
        self.pos = pos;
        self.vel = vel;
        self.clock.reset();
        self.observation()
    }

    fn observation(&self) -> Vec<f64> {
        vec![
            self.pos[0] - self.goal[0],
            self.pos[1] - self.goal[1],
            self.vel[0],
            self.vel[1],
        ]
    }

    fn distance(&self) -> f64 {
        libm::hypot(self.pos[0] - self.goal[0], self.pos[1] - self.goal[1])
    }
}

impl Default for PointReach {
    fn default() -> Self {
        Self::new()
    }
}

impl Environment for PointReach {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, seed: u64) -> Vec<f64> {
        let mut rng = start_rng(seed);
        let w = self.start_half_width;
        let pos = [
            self.goal[0] + rng.gen_range(-w..=w),
            self.goal[1] + rng.gen_range(-w..=w),
        ];
        self.set_state(pos, [0.0, 0.0])
    }

    fn step(&mut self, action: &[f64]) -> Result<StepOutcome, EnvError> {
        self.clock.check()?;
        let force = checked_continuous(&self.spec, action)?;
        for axis in 0..2 {
            self.vel[axis] += DT * force[axis];
            self.pos[axis] += DT * self.vel[axis];
            if self.pos[axis].abs() > ARENA {
                self.pos[axis] = self.pos[axis].clamp(-ARENA, ARENA);
                self.vel[axis] = 0.0;
            }
        }
        let reward = -self.distance();
        let done = self.clock.tick(false, self.spec.max_steps);
        Ok(StepOutcome {
            observation: self.observation(),
            reward,
            done,
        })
    }

    fn steps_taken(&self) -> usize {
        self.clock.steps
    }

    fn state(&self) -> Vec<f64> {
        vec![self.pos[0], self.pos[1], self.vel[0], self.vel[1]]
    }

    /// Saturated PD law `-kp * offset - kd * velocity`.
    fn expert_action(&self, observation: &[f64]) -> Vec<f64> {
        (0..2)
            .map(|axis| {
                let u = -self.kp * observation[axis] - self.kd * observation[axis + 2];
                u.clamp(-1.0, 1.0)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn goal_is_a_fixed_point() {
        let mut env = PointReach::new();
        env.set_state([0.0, 0.0], [0.0, 0.0]);
        let out = env.step(&[0.0, 0.0]).unwrap();
        assert_eq!(out.reward, 0.0);
        assert_eq!(env.state(), vec![0.0; 4]);
    }

    #[test]
    fn expert_is_idle_at_goal() {
        let env = PointReach::new();
        assert_eq!(env.expert_action(&[0.0; 4]), vec![0.0, 0.0]);
    }

    #[test]
    fn starts_inside_box() {
        let mut env = PointReach::new();
        for seed in 0..1000 {
            let obs = env.reset(seed);
            assert!(obs[0].abs() <= 2.0 && obs[1].abs() <= 2.0, "seed {seed}: {obs:?}");
            assert_eq!(&obs[2..], &[0.0, 0.0]);
        }
    }

    #[test]
    fn actions_are_clipped() {
        let mut a = PointReach::new();
        let mut b = PointReach::new();
        a.set_state([0.5, 0.5], [0.0, 0.0]);
        b.set_state([0.5, 0.5], [0.0, 0.0]);
        assert_eq!(a.step(&[5.0, -9.0]).unwrap(), b.step(&[1.0, -1.0]).unwrap());
    }

    #[test]
    fn walls_stop_motion() {
        let mut env = PointReach::new();
        env.set_state([3.99, 0.0], [2.0, 0.0]);
        env.step(&[1.0, 0.0]).unwrap();
        assert_eq!(env.state()[0], 4.0);
        assert_eq!(env.state()[2], 0.0);
    }
}
