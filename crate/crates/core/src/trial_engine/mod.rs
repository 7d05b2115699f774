//! The sequential two-arm trial: stopping rules, predictive utility and
//! single-trial simulation.
//!
//! A [`Simulator`] pairs a validated [`TrialDesign`] with a shared
//! [`TailEngine`]; clones are cheap and share the tail caches, so one
//! simulator can serve many replicates across threads.

mod data;
mod design;
mod predictive;
mod rules;
mod run;
mod tails;

use std::sync::Arc;

pub use data::{block_assignment, BlockState, Counts, TrialData};
pub use design::{PriorPair, Schedule, TrialDesign, UtilitySpec};
pub use predictive::{EarlyStop, PredictiveUtility};
pub use rules::{Decision, Interim, InterimDecision};
pub use run::{InterimRecord, RunOptions, TrialResult, Truth};
pub use tails::{TailEngine, Tails};

use crate::error::Result;
use crate::mc_engine::RngSpec;

#[derive(Debug, Clone)]
pub struct Simulator {
    design: Arc<TrialDesign>,
    engine: Arc<TailEngine>,
}

impl Simulator {
    pub fn new(design: TrialDesign) -> Result<Self> {
        design.validate()?;
        let engine = Arc::new(TailEngine::new(&design));
        Ok(Self {
            design: Arc::new(design),
            engine,
        })
    }

    pub fn design(&self) -> &TrialDesign {
        &self.design
    }

    pub fn engine(&self) -> &TailEngine {
        &self.engine
    }

    /// Same rules and caches with a different forward-simulation horizon
    /// and replicate count.
    pub fn with_forward(&self, horizon: u32, forward_reps: u32) -> Result<Self> {
        let design = TrialDesign {
            horizon,
            forward_reps,
            ..(*self.design).clone()
        };
        design.validate()?;
        Ok(Self {
            design: Arc::new(design),
            engine: Arc::clone(&self.engine),
        })
    }
}

/// Stopping decision at an interim analysis of `data`.
pub fn interim_decision(design: &TrialDesign, data: &TrialData) -> Result<Interim> {
    Simulator::new(design.clone())?.interim_decision(data)
}

/// Expected net utility of continuing from `data`, with no further
/// inconclusive checks along the way.
pub fn predictive_cumulative_utility(design: &TrialDesign, data: &TrialData, rng: RngSpec) -> Result<PredictiveUtility> {
    Simulator::new(design.clone())?.predictive(data, rng)
}

/// Simulates one trial under fixed true response rates.
pub fn run_trial(design: &TrialDesign, truth: Truth, rng: RngSpec, options: &RunOptions) -> Result<TrialResult> {
    Simulator::new(design.clone())?.run_trial(truth, rng, options)
}
