//! Simulation and verification toolkit for intermittent-communication
//! stochastic optimization: local SGD, minibatch SGD, thumb-twiddling SGD
//! and local AC-SA over `M` machines, `K` local steps and `R` rounds.

pub mod algorithms;
pub mod config;
pub mod error;
pub mod harness;
pub mod noise;
pub mod problems;
pub mod rates;
pub mod record;
pub mod vecops;

pub use error::{Error, Result};
