use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Action, ActionSpace, Env, EnvSpec, Transition};
use crate::error::{Error, Result};

const MAX_SPEED: f64 = 8.0;
const MAX_TORQUE: f64 = 2.0;
const DT: f64 = 0.05;
const G: f64 = 10.0;
const MASS: f64 = 1.0;
const LENGTH: f64 = 1.0;
pub const MAX_STEPS: usize = 200;

/// Torque-limited pendulum swing-up with Pendulum-v1 dynamics.
///
/// Observation is `[cos θ, sin θ, θ̇]` with θ = 0 upright. The reward is
/// `-(θ² + 0.1 θ̇² + 0.001 u²)` evaluated on the state before the update.
#[derive(Debug, Clone)]
pub struct Pendulum {
    spec: EnvSpec,
    theta: f64,
    theta_dot: f64,
    steps: usize,
    done: bool,
}

impl Default for Pendulum {
    fn default() -> Self {
        Self::new()
    }
}

impl Pendulum {
    pub fn new() -> Self {
        Self {
            spec: EnvSpec {
                state_dim: 3,
                action_space: ActionSpace::Continuous {
                    dim: 1,
                    low: -MAX_TORQUE,
                    high: MAX_TORQUE,
                },
                max_steps: MAX_STEPS,
                reward_threshold: -200.0,
            },
            theta: 0.0,
            theta_dot: 0.0,
            steps: 0,
            done: true,
        }
    }

    pub fn set_state(&mut self, theta: f64, theta_dot: f64) {
        self.theta = theta;
        self.theta_dot = theta_dot;
        self.steps = 0;
        self.done = false;
    }

    /// `(θ, θ̇)`.
    pub fn angle_state(&self) -> (f64, f64) {
        (self.theta, self.theta_dot)
    }

    fn observe(&self) -> Vec<f64> {
        vec![self.theta.cos(), self.theta.sin(), self.theta_dot]
    }
}

fn angle_normalize(x: f64) -> f64 {
    (x + PI).rem_euclid(2.0 * PI) - PI
}

impl Env for Pendulum {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.theta = rng.gen_range(-PI..=PI);
        self.theta_dot = rng.gen_range(-1.0..=1.0);
        self.steps = 0;
        self.done = false;
        self.observe()
    }

    fn step(&mut self, action: &Action) -> Result<Transition> {
        if self.done {
            return Err(Error::EpisodeDone);
        }
        let torque = match action {
            Action::Continuous(v) if v.len() == 1 && v[0].is_finite() => v[0],
            other => {
                return Err(Error::InvalidAction(format!(
                    "pendulum expects one finite torque, got {other:?}"
                )))
            }
        };
        let before = self.observe();
        let u = torque.clamp(-MAX_TORQUE, MAX_TORQUE);
        let th = self.theta;
        let thdot = self.theta_dot;
        let cost = angle_normalize(th).powi(2) + 0.1 * thdot * thdot + 0.001 * u * u;

        let new_thdot = (thdot
            + (3.0 * G / (2.0 * LENGTH) * th.sin() + 3.0 / (MASS * LENGTH * LENGTH) * u) * DT)
            .clamp(-MAX_SPEED, MAX_SPEED);
        self.theta = th + new_thdot * DT;
        self.theta_dot = new_thdot;
        self.steps += 1;
        let done = self.steps >= MAX_STEPS;
        self.done = done;
        Ok(Transition {
            state: before,
            action: action.clone(),
            reward: -cost,
            next_state: self.observe(),
            done,
            terminated: false,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reset_ranges() {
        let mut env = Pendulum::new();
        for seed in 0..100 {
            env.reset(seed);
            let (th, thdot) = env.angle_state();
            assert!((-PI..=PI).contains(&th));
            assert!((-1.0..=1.0).contains(&thdot));
        }
    }

    #[test]
    fn upright_rest_costs_nothing() {
        let mut env = Pendulum::new();
        env.set_state(0.0, 0.0);
        let t = env.step(&Action::Continuous(vec![0.0])).unwrap();
        assert_eq!(t.reward, 0.0);
        assert_eq!(env.angle_state(), (0.0, 0.0));
    }

    #[test]
    fn torque_clipped_and_speed_clamped() {
        let mut env = Pendulum::new();
        env.set_state(0.0, 7.9);
        let t = env.step(&Action::Continuous(vec![100.0])).unwrap();
        assert_eq!(env.angle_state().1, MAX_SPEED);
        // cost uses the clipped torque: 0.1 * 7.9^2 + 0.001 * 4
        assert!((t.reward + (0.1 * 7.9 * 7.9 + 0.004)).abs() < 1e-12);
    }

    #[test]
    fn fixed_horizon() {
        let mut env = Pendulum::new();
        env.reset(3);
        for i in 0..MAX_STEPS {
            let t = env.step(&Action::Continuous(vec![0.5])).unwrap();
            assert_eq!(t.done, i + 1 == MAX_STEPS);
            assert!(!t.terminated);
        }
        assert!(env.step(&Action::Continuous(vec![0.0])).is_err());
    }
}
