pub mod beta_math;
pub mod design_eval;
pub mod error;
pub mod exec;
pub mod mc_engine;
pub mod posterior;
pub mod trial_engine;

pub use error::{Error, Result};
