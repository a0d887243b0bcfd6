pub mod analysis;
pub mod checkpoint;
pub mod compose;
pub mod diff;
pub mod envs;
pub mod error;
pub mod optim;
pub mod sac;
pub mod trainer;

pub use error::{Error, Result};
