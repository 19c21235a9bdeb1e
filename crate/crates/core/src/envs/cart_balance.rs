use alloc::vec::Vec;

use rand::Rng;

use super::{one_hot, start_rng, Clock, EnvError, EnvId, EnvSpec, Environment, StepOutcome, DT};
use crate::ensemble::{argmax, ActionKind};

const GRAVITY: f64 = 9.8;
const CART_MASS: f64 = 1.0;
const POLE_MASS: f64 = 0.1;
const TOTAL_MASS: f64 = CART_MASS + POLE_MASS;
const HALF_LENGTH: f64 = 0.5;
const POLE_MASS_LENGTH: f64 = POLE_MASS * HALF_LENGTH;
const FORCE: f64 = 10.0;

pub const ANGLE_LIMIT: f64 = 12.0 * 2.0 * core::f64::consts::PI / 360.0;
pub const POSITION_LIMIT: f64 = 2.4;

/// Cart-pole linearized about upright, pushed left or right with a fixed
/// force.
///
/// Observation: `(x, x_dot, theta, theta_dot)`. Actions: index 0 pushes
/// left, index 1 pushes right. Reward is 1 for every step that ends with
/// the pole within [`ANGLE_LIMIT`] and the cart within [`POSITION_LIMIT`],
/// and 0 on the step that fails, which ends the episode.
#[derive(Debug, Clone)]
pub struct CartBalance {
    spec: EnvSpec,
    /// Expert pushes right when `theta + rate_gain * theta_dot > 0`.
    pub rate_gain: f64,
    pub start_spread: f64,
    state: [f64; 4],
    clock: Clock,
}

impl CartBalance {
    pub fn new() -> Self {
        CartBalance {
            spec: EnvSpec {
                id: EnvId::CartBalance,
                obs_dim: 4,
                action_kind: ActionKind::Discrete,
                action_dim: 2,
                action_bounds: Vec::new(),
                max_steps: 200,
                reward_range: (0.0, 1.0),
            },
            rate_gain: 0.5,
            start_spread: 0.05,
            state: [0.0; 4],
            clock: Clock::default(),
        }
    }

    pub fn set_state(&mut self, state: [f64; 4]) -> Vec<f64> {
        self.state = state;
        self.clock.reset();
        self.state.to_vec()
    }

    fn failed(&self) -> bool {
        self.state[0].abs() > POSITION_LIMIT || self.state[2].abs() > ANGLE_LIMIT
    }
}

impl Default for CartBalance {
    fn default() -> Self {
        Self::new()
    }
}

impl Environment for CartBalance {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, seed: u64) -> Vec<f64> {
        let mut rng = start_rng(seed);
        let w = self.start_spread;
        let state = [
            rng.gen_range(-w..=w),
            rng.gen_range(-w..=w),
            rng.gen_range(-w..=w),
            rng.gen_range(-w..=w),
        ];
        self.set_state(state)
    }

    fn step(&mut self, action: &[f64]) -> Result<StepOutcome, EnvError> {
        self.clock.check()?;
        if action.len() != self.spec.action_dim {
            return Err(EnvError::ActionDimension {
                expected: self.spec.action_dim,
                found: action.len(),
            });
        }
        if action.iter().any(|a| !a.is_finite()) {
            return Err(EnvError::NonFiniteAction);
        }
        let force = if argmax(action) == 1 { FORCE } else { -FORCE };
        let [x, x_dot, theta, theta_dot] = self.state;
        let push = force / TOTAL_MASS;
        let theta_acc =
            (GRAVITY * theta - push) / (HALF_LENGTH * (4.0 / 3.0 - POLE_MASS / TOTAL_MASS));
        let x_acc = push - POLE_MASS_LENGTH * theta_acc / TOTAL_MASS;
        let x_dot = x_dot + DT * x_acc;
        let theta_dot = theta_dot + DT * theta_acc;
        self.state = [x + DT * x_dot, x_dot, theta + DT * theta_dot, theta_dot];
        let failed = self.failed();
        let done = self.clock.tick(failed, self.spec.max_steps);
        Ok(StepOutcome {
            observation: self.state.to_vec(),
            reward: if failed { 0.0 } else { 1.0 },
            done,
        })
    }

    fn steps_taken(&self) -> usize {
        self.clock.steps
    }

    fn state(&self) -> Vec<f64> {
        self.state.to_vec()
    }

    fn expert_action(&self, observation: &[f64]) -> Vec<f64> {
        let push_right = observation[2] + self.rate_gain * observation[3] > 0.0;
        one_hot(usize::from(push_right), 2)
    }
}
