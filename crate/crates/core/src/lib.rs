pub mod bias;
pub mod cli;
pub mod dynamics;
pub mod error;
pub mod metrics;
pub mod mewma;
pub mod pipeline;
pub mod spectrum;
pub mod synthetic;

pub use error::{ChasmError, Result};
