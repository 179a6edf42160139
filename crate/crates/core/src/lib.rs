//! Gait synthesis, forward surrogates and inverse gait search for a
//! flapping-fin underwater vehicle.

pub mod cli;
pub mod datagen;
pub mod error;
pub mod fom;
pub mod gait;
pub mod plant;
pub mod search;
pub mod sim;
pub mod surrogate;
pub mod trace;

pub use error::{Error, Result};
pub use gait::{Gait, Material, StepSizes};
