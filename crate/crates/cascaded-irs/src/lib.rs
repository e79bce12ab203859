//! Two-user THz uplink through two cascaded reflecting surfaces: correlated
//! fading channels, link budget, phase-configuration solvers (pseudo-inverse,
//! block, grid, coordinate ascent, random, actor-critic RL), and a Monte-Carlo
//! sweep harness.

pub mod channel;
pub mod ddpg;
pub mod error;
pub mod harness;
pub mod linkbudget;
pub mod metrics;
pub mod neuralnet;
pub mod numerics;
pub mod solvers;

pub use error::{Error, Result};
