pub mod audit;
pub mod commons;
pub mod error;
pub mod experiment;
pub mod game;
pub mod learner;
pub mod strategies;

pub use error::{Error, Result};
