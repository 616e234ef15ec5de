//! Event-triggered state feedback for nonlinear plants with L2-gain preserving triggers.

pub mod analysis;
pub mod config;
pub mod corpus;
pub mod design;
pub mod error;
pub mod model;
pub mod sim;
pub mod tables;
pub mod trigger;

pub use error::{Error, Result};
