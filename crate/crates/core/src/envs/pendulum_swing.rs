use alloc::vec;
use alloc::vec::Vec;

use core::f64::consts::PI;

use rand::Rng;

use super::{checked_continuous, start_rng, Clock, EnvError, EnvId, EnvSpec, Environment, StepOutcome, DT};
use crate::ensemble::ActionKind;

const GRAVITY: f64 = 10.0;
const MAX_TORQUE: f64 = 3.0;
const MAX_SPEED: f64 = 8.0;

/// Torque-limited pendulum that must be swung up and balanced.
///
/// The angle `theta` is measured from upright, so hanging straight down is
/// `theta = pi`. Observation: `(cos theta, sin theta, theta_dot)`. Action:
/// torque in `[-3, 3]`, too weak to lift the pendulum directly. Reward:
/// `-(theta^2 + 0.1 theta_dot^2 + 0.001 u^2)` with `theta` wrapped to
/// `[-pi, pi)`.
///
/// Internally the angle is stored relative to the hanging position so that
/// the stable equilibrium is exactly representable.
#[derive(Debug, Clone)]
pub struct PendulumSwing {
    spec: EnvSpec,
    /// Start angle offset from hanging and start speed are drawn from
    /// `+- start_spread`.
    pub start_spread: f64,
    /// Swing-up torque is `-energy_gain * energy * speed`.
    pub energy_gain: f64,
    /// Stabilizing PD gains used within `catch_angle` of upright.
    pub kp: f64,
    pub kd: f64,
    pub catch_angle: f64,
    /// Angle from the hanging position, wrapped to `[-pi, pi)`.
    hang_angle: f64,
    speed: f64,
    clock: Clock,
}

/// Wraps an angle to `[-pi, pi)`.
pub fn wrap_angle(x: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let r = libm::fmod(x + PI, two_pi);
    let r = if r < 0.0 { r + two_pi } else { r };
    r - PI
}

impl PendulumSwing {
    pub fn new() -> Self {
        PendulumSwing {
            spec: EnvSpec {
                id: EnvId::PendulumSwing,
                obs_dim: 3,
                action_kind: ActionKind::Continuous,
                action_dim: 1,
                action_bounds: vec![(-MAX_TORQUE, MAX_TORQUE)],
                max_steps: 300,
                reward_range: (
                    -(PI * PI + 0.1 * MAX_SPEED * MAX_SPEED + 0.001 * MAX_TORQUE * MAX_TORQUE),
                    0.0,
                ),
            },
            start_spread: 0.5,
            energy_gain: 1.0,
            kp: 12.0,
            kd: 3.0,
            catch_angle: 0.5,
            hang_angle: 0.0,
            speed: 0.0,
            clock: Clock::default(),
        }
    }

    /// Sets the angle from upright and the angular speed, restarting the
    /// episode clock.
    pub fn set_state(&mut self, theta: f64, speed: f64) -> Vec<f64> {
        self.hang_angle = wrap_angle(theta - PI);
        self.speed = speed;
        self.clock.reset();
        self.observation()
    }

    /// Angle from upright in `[-pi, pi)`.
    pub fn theta(&self) -> f64 {
        wrap_angle(self.hang_angle + PI)
    }

    fn observation(&self) -> Vec<f64> {
        // cos(phi + pi) = -cos(phi), sin(phi + pi) = -sin(phi)
        vec![
            -libm::cos(self.hang_angle),
            -libm::sin(self.hang_angle),
            self.speed,
        ]
    }
}

impl Default for PendulumSwing {
    fn default() -> Self {
        Self::new()
    }
}

impl Environment for PendulumSwing {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, seed: u64) -> Vec<f64> {
        let mut rng = start_rng(seed);
        let w = self.start_spread;
        self.hang_angle = rng.gen_range(-w..=w);
        self.speed = rng.gen_range(-w..=w);
        self.clock.reset();
        self.observation()
    }

    fn step(&mut self, action: &[f64]) -> Result<StepOutcome, EnvError> {
        self.clock.check()?;
        let torque = checked_continuous(&self.spec, action)?[0];
        let accel = -GRAVITY * libm::sin(self.hang_angle) + torque;
        self.speed = (self.speed + DT * accel).clamp(-MAX_SPEED, MAX_SPEED);
        self.hang_angle = wrap_angle(self.hang_angle + DT * self.speed);
        let theta = self.theta();
        let reward = -(theta * theta + 0.1 * self.speed * self.speed + 0.001 * torque * torque);
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
        vec![self.theta(), self.speed]
    }

    /// Energy pumping away from upright, PD stabilization near it.
    fn expert_action(&self, observation: &[f64]) -> Vec<f64> {
        let theta = libm::atan2(observation[1], observation[0]);
        let speed = observation[2];
        let u = if theta.abs() < self.catch_angle {
            -self.kp * theta - self.kd * speed
        } else {
            // Zero at upright rest, negative below it. Its rate of change is
            // `u * speed`, so this torque pumps energy in smoothly.
            let energy = 0.5 * speed * speed + GRAVITY * (libm::cos(theta) - 1.0);
            -self.energy_gain * energy * speed
        };
        vec![u.clamp(-MAX_TORQUE, MAX_TORQUE)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hanging_rest_is_an_equilibrium() {
        let mut env = PendulumSwing::new();
        env.set_state(PI, 0.0);
        for _ in 0..100 {
            env.step(&[0.0]).unwrap();
        }
        assert_eq!(env.theta().abs(), PI);
        assert_eq!(env.state()[1], 0.0);
    }

    #[test]
    fn expert_holds_upright() {
        let env = PendulumSwing::new();
        let u = env.expert_action(&[1.0, 0.0, 0.0]);
        assert!(u[0].abs() < 1e-12);
        // Small tilt gets a restoring torque.
        let u = env.expert_action(&[libm::cos(0.1), libm::sin(0.1), 0.0]);
        assert!(u[0] < 0.0);
    }

    #[test]
    fn expert_swings_up() {
        let mut env = PendulumSwing::new();
        for seed in 0..10 {
            let mut obs = env.reset(seed);
            loop {
                let a = env.expert_action(&obs);
                let out = env.step(&a).unwrap();
                obs = out.observation;
                if out.done {
                    break;
                }
            }
            assert!(env.theta().abs() < 0.01, "seed {seed}: {}", env.theta());
        }
    }

    #[test]
    fn wrap_range() {
        for x in [-10.0, -PI, -1.0, 0.0, 1.0, PI, 7.5] {
            let w = wrap_angle(x);
            assert!((-PI..PI).contains(&w));
            assert!((libm::sin(w) - libm::sin(x)).abs() < 1e-12);
        }
    }
}
