use rand::Rng;
use serde::{Deserialize, Serialize};

use super::data::{Counts, TrialData};
use super::design::Schedule;
use super::predictive::EarlyStop;
use super::rules::{decide, Decision, InterimDecision};
use super::Simulator;
use crate::error::{domain, Result};
use crate::posterior::{Arm, Outcome};
use crate::mc_engine::RngSpec;

/// True response rates of the control and experimental arms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    pub theta0: f64,
    pub theta1: f64,
}

impl Truth {
    pub fn new(theta0: f64, theta1: f64) -> Result<Self> {
        for t in [theta0, theta1] {
            if !(0.0..=1.0).contains(&t) {
                return Err(domain(format!("response rate {t} outside [0, 1]")));
            }
        }
        Ok(Self { theta0, theta1 })
    }

    fn rate(&self, arm: Arm) -> f64 {
        match arm {
            Arm::Control => self.theta0,
            Arm::Experimental => self.theta1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    /// Run the predictive inconclusive-stopping check.
    pub early_stop: bool,
    /// Overrides the design's check points when set.
    pub early_check: Option<Schedule>,
    /// Keep both tails at every analysis.
    pub record_trajectory: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            early_stop: false,
            early_check: None,
            record_trajectory: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterimRecord {
    pub n: u32,
    pub tail_efficacy: f64,
    pub tail_futility: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub decision: Decision,
    /// First crossing of either decision threshold, if any.
    pub tau: Option<u32>,
    /// Patients treated.
    pub stopped_at: u32,
    /// The inconclusive stop came from the predictive check.
    pub stopped_early: bool,
    pub counts: Counts,
    /// Terminal utility at the true rates minus patient costs.
    pub realized_utility: f64,
    /// Posterior expected terminal utility (`π_f`) minus patient costs.
    pub expected_utility: f64,
    /// `P_{π_e}(θ₁ − θ₀ ≤ Δ | D)` at the stop.
    pub tail_efficacy: f64,
    /// `P_{π_f}(θ₁ − θ₀ ≥ 0 | D)` at the stop.
    pub tail_futility: f64,
    pub both_triggered: bool,
    pub trajectory: Vec<InterimRecord>,
    /// `(n, value)` of every predictive check that ran.
    pub early_checks: Vec<(u32, f64)>,
}

/// Stream id offset for the forward simulations of a trial, kept far from
/// the replicate indices used by callers.
const FORWARD_STREAM: u64 = 1 << 40;

impl Simulator {
    /// Simulates one trial. Patients come from `rng.rng()`; the predictive
    /// check at `n` uses `rng.child(FORWARD_STREAM + n)`, so the outcome
    /// stream is the same with and without early stopping.
    pub fn run_trial(&self, truth: Truth, rng: RngSpec, options: &RunOptions) -> Result<TrialResult> {
        let d = &*self.design;
        let checks = options.early_check.as_ref().unwrap_or(&d.early_check);
        let mut g = rng.rng();
        let mut data = TrialData::default();
        let mut trajectory = Vec::new();
        let mut early_checks = Vec::new();
        let mut both = false;
        let (decision, stopped_early) = loop {
            let n = data.n();
            if options.early_stop && n >= d.burn_in && n < d.n_max && checks.contains(n) {
                let (verdict, p) = self.early_stop_check(&data, rng.child(FORWARD_STREAM + u64::from(n)))?;
                early_checks.push((n, p.value));
                if verdict == EarlyStop::StopInconclusive {
                    break (Decision::Inconclusive, true);
                }
            }
            let arm = data.block.next_arm(&mut g);
            let success = g.random::<f64>() < truth.rate(arm);
            data.observe(arm, Outcome::from_bool(success));
            let n = data.n();
            if !d.is_interim(n) {
                continue;
            }
            let (eff, fut) = self.engine.triggers(data.counts)?;
            if options.record_trajectory {
                let t = self.engine.tails(data.counts)?;
                trajectory.push(InterimRecord {
                    n,
                    tail_efficacy: t.efficacy,
                    tail_futility: t.futility,
                });
            }
            if eff || fut || n >= d.n_max {
                let t = self.engine.tails(data.counts)?;
                let interim = decide(t, eff, fut, n, d.n_max);
                both = interim.both_triggered;
                match interim.decision {
                    InterimDecision::Stop(dec) => break (dec, false),
                    InterimDecision::Continue => unreachable!("stop condition without a decision"),
                }
            }
        };
        let u = &d.utilities;
        let c = data.counts;
        let cost = u.cost_per_patient * f64::from(c.n());
        let tails = self.engine.tails(c)?;
        let (realized, expected) = match decision {
            Decision::Efficacy => (
                u.efficacy_at(truth.theta0, truth.theta1, d.delta),
                u.expected_efficacy(self.engine.efficacy_tail_f(c)?),
            ),
            Decision::Futility => (u.futility_at(truth.theta0, truth.theta1), u.expected_futility(tails.futility)),
            Decision::Inconclusive => (u.inconclusive_value, u.inconclusive_value),
        };
        Ok(TrialResult {
            decision,
            tau: (decision != Decision::Inconclusive).then_some(c.n()),
            stopped_at: c.n(),
            stopped_early,
            counts: c,
            realized_utility: realized - cost,
            expected_utility: expected - cost,
            tail_efficacy: tails.efficacy,
            tail_futility: tails.futility,
            both_triggered: both,
            trajectory,
            early_checks,
        })
    }
}
