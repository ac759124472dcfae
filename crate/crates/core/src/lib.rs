//! Simulator and learning agents for deciding how much sensed data a
//! Metaverse virtual access point offloads to an edge server each round.
//!
//! Modules, bottom-up:
//! - [`physical`]: closed-form rate and latency model
//! - [`sinr`]: Markov chain for the access point to server SINR
//! - [`env`]: the offloading decision process (reset / step)
//! - [`nn`]: dense ReLU network with backpropagation
//! - [`agents`]: Q-learning, DQN, double DQN and random baseline
//! - [`harness`]: configs, seeded campaigns and result files

pub mod agents;
pub mod env;
pub mod error;
pub mod harness;
pub mod nn;
pub mod physical;
pub mod rng;
pub mod sinr;

pub use error::{Error, Result};
