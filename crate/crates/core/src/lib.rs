//! Discrete-time simulator of a multi-user downlink network backed by
//! heterogeneous compute servers and a mixed renewable/grid/battery energy
//! supply, together with a constrained multi-objective reinforcement-learning
//! engine that allocates energy, compute, and transmit power to trade off
//! emissions per bit, energy efficiency, and delay.

pub mod baselines;
pub mod config;
pub mod env;
pub mod error;
pub mod harness;
pub mod morl;
pub mod predictor;

pub use config::Config;
pub use env::{action::Action, action::ActionSpace, NetworkEnv, SlotMeasurement};
pub use error::{Error, Result};
