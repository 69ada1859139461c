//! Episodic control tasks with seeded resets.

mod cartpole;
mod pendulum;

pub use cartpole::CartPole;
pub use pendulum::Pendulum;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum ActionSpace {
    Discrete(usize),
    Continuous { dim: usize, low: f64, high: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvSpec {
    pub state_dim: usize,
    pub action_space: ActionSpace,
    pub max_steps: usize,
    /// Informational "solved" level.
    pub reward_threshold: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Action {
    Discrete(usize),
    Continuous(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: Action,
    pub reward: f64,
    pub next_state: Vec<f64>,
    /// Episode over, for any reason.
    pub done: bool,
    /// Episode ended in a terminal state (as opposed to hitting the step limit).
    pub terminated: bool,
}

pub trait Env: Send {
    fn spec(&self) -> &EnvSpec;

    /// Draws an initial state from the seeded start distribution and zeroes the step counter.
    fn reset(&mut self, seed: u64) -> Vec<f64>;

    fn step(&mut self, action: &Action) -> Result<Transition>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EnvKind {
    CartPole,
    Pendulum,
}

impl EnvKind {
    pub fn build(self) -> Box<dyn Env> {
        match self {
            EnvKind::CartPole => Box::new(CartPole::new()),
            EnvKind::Pendulum => Box::new(Pendulum::new()),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            EnvKind::CartPole => "cartpole",
            EnvKind::Pendulum => "pendulum",
        }
    }
}

impl std::str::FromStr for EnvKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "cartpole" | "cartpole-v1" => Ok(EnvKind::CartPole),
            "pendulum" | "pendulum-v1" => Ok(EnvKind::Pendulum),
            other => Err(Error::Config(format!("unknown environment `{other}`"))),
        }
    }
}
