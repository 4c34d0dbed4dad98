//! Truthful data-procurement mechanisms with auditable oracles.

pub mod audit;
pub mod canonical;
pub mod error;
pub mod mechanism;
pub mod model;
pub mod quality;
pub mod strategy;
pub mod utility;

pub use error::{Error, Result};
