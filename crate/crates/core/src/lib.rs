//! Multi-agent harvest simulator in which deep Q-learning agents shape
//! their own rewards with a maximin sanction, while behaviour patterns
//! shared by most of the society are mined as emergent norms.
//!
//! Layers, bottom up: [`env`] (gridworld), [`learner`] (DQN), [`ethics`]
//! (sanctions), [`norms`] (behaviour and norm bases), [`agent`] (one
//! agent's turn) and [`experiment`] (training, evaluation, statistics).

pub mod agent;
pub mod config;
pub mod env;
mod error;
pub mod ethics;
pub mod experiment;
pub mod learner;
pub mod norms;

pub use error::{Result, SimError};
