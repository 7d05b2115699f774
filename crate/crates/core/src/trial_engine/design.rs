use serde::{Deserialize, Serialize};

use crate::beta_math::BetaParams;
use crate::error::{config, Result};
use crate::mc_engine::DEFAULT_MC_N;

/// Product prior on `(θ₀, θ₁)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorPair {
    pub control: BetaParams,
    pub experimental: BetaParams,
}

impl PriorPair {
    pub const fn uniform() -> Self {
        Self {
            control: BetaParams::uniform(),
            experimental: BetaParams::uniform(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.control.validate()?;
        self.experimental.validate()
    }
}

impl Default for PriorPair {
    fn default() -> Self {
        Self::uniform()
    }
}

/// Patient counts at which an analysis is performed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Schedule {
    /// After every outcome.
    EveryPatient,
    /// After every `step`-th outcome.
    Every { step: u32 },
    /// At the listed counts (strictly increasing, positive).
    Points { points: Vec<u32> },
}

impl Default for Schedule {
    fn default() -> Self {
        Schedule::EveryPatient
    }
}

impl Schedule {
    pub fn contains(&self, n: u32) -> bool {
        match self {
            Schedule::EveryPatient => n > 0,
            Schedule::Every { step } => n > 0 && n % step == 0,
            Schedule::Points { points } => points.binary_search(&n).is_ok(),
        }
    }

    pub fn validate(&self, field: &str) -> Result<()> {
        match self {
            Schedule::EveryPatient => Ok(()),
            Schedule::Every { step: 0 } => Err(config(format!("{field}.step must be at least 1"))),
            Schedule::Every { .. } => Ok(()),
            Schedule::Points { points } => {
                if points.first() == Some(&0) {
                    return Err(config(format!("{field}.points must be positive")));
                }
                if points.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(config(format!("{field}.points must be strictly increasing")));
                }
                Ok(())
            }
        }
    }
}

/// Gains and losses in units of the per-patient cost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UtilitySpec {
    pub gain_efficacy: f64,
    pub gain_futility: f64,
    pub loss_efficacy: f64,
    pub loss_futility: f64,
    #[serde(default = "one")]
    pub cost_per_patient: f64,
    #[serde(default)]
    pub inconclusive_value: f64,
}

fn one() -> f64 {
    1.0
}

impl UtilitySpec {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("gain_efficacy", self.gain_efficacy),
            ("gain_futility", self.gain_futility),
            ("loss_efficacy", self.loss_efficacy),
            ("loss_futility", self.loss_futility),
            ("cost_per_patient", self.cost_per_patient),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v >= 0.0) {
                return Err(config(format!("utilities.{name} must be finite and >= 0, got {v}")));
            }
        }
        if !self.inconclusive_value.is_finite() {
            return Err(config("utilities.inconclusive_value must be finite"));
        }
        Ok(())
    }

    /// Utility of declaring efficacy at the true parameters.
    pub fn efficacy_at(&self, theta0: f64, theta1: f64, delta: f64) -> f64 {
        if theta1 - theta0 > delta {
            self.gain_efficacy
        } else {
            -self.loss_efficacy
        }
    }

    /// Utility of declaring futility at the true parameters.
    pub fn futility_at(&self, theta0: f64, theta1: f64) -> f64 {
        if theta1 - theta0 < 0.0 {
            self.gain_futility
        } else {
            -self.loss_futility
        }
    }

    /// Posterior expectation of the efficacy utility given the tail
    /// `P(θ₁ − θ₀ ≤ Δ | D)`.
    pub fn expected_efficacy(&self, tail: f64) -> f64 {
        self.gain_efficacy - (self.loss_efficacy + self.gain_efficacy) * tail
    }

    /// Posterior expectation of the futility utility given `P(θ₁ − θ₀ ≥ 0 | D)`.
    pub fn expected_futility(&self, tail: f64) -> f64 {
        self.gain_futility - (self.loss_futility + self.gain_futility) * tail
    }
}

/// Everything that defines a two-arm sequential design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrialDesign {
    /// Prior used for the efficacy rule (regulators).
    pub prior_e: PriorPair,
    /// Prior used for the futility rule and all utility expectations (investigators).
    pub prior_f: PriorPair,
    pub eps_e: f64,
    pub eps_f: f64,
    /// Minimal important difference.
    pub delta: f64,
    pub n_max: u32,
    #[serde(default)]
    pub schedule: Schedule,
    pub utilities: UtilitySpec,
    /// Forward-simulation horizon.
    pub horizon: u32,
    pub forward_reps: u32,
    pub tail_mc_n: u32,
    #[serde(default)]
    pub burn_in: u32,
    /// Where the inconclusive-stopping check runs when enabled.
    #[serde(default = "default_early_checks")]
    pub early_check: Schedule,
}

fn default_early_checks() -> Schedule {
    Schedule::Every { step: 25 }
}

impl TrialDesign {
    /// Uniform priors for both stakeholders, `ε_e = ε_f = 0.05`, `Δ = 0.05`,
    /// `N_max = T = 500`, gains 2500 / 500 and losses 1000 / 1000.
    pub fn standard() -> Self {
        Self {
            prior_e: PriorPair::uniform(),
            prior_f: PriorPair::uniform(),
            eps_e: 0.05,
            eps_f: 0.05,
            delta: 0.05,
            n_max: 500,
            schedule: Schedule::EveryPatient,
            utilities: UtilitySpec {
                gain_efficacy: 2500.0,
                gain_futility: 500.0,
                loss_efficacy: 1000.0,
                loss_futility: 1000.0,
                cost_per_patient: 1.0,
                inconclusive_value: 0.0,
            },
            horizon: 500,
            forward_reps: 1000,
            tail_mc_n: DEFAULT_MC_N as u32,
            burn_in: 0,
            early_check: default_early_checks(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.prior_e
            .validate()
            .map_err(|e| config(format!("prior_e is invalid: {e}")))?;
        self.prior_f
            .validate()
            .map_err(|e| config(format!("prior_f is invalid: {e}")))?;
        for (name, v) in [("eps_e", self.eps_e), ("eps_f", self.eps_f)] {
            if !(0.0..1.0).contains(&v) {
                return Err(config(format!("{name} must lie in [0, 1), got {v}")));
            }
        }
        if self.eps_e + self.eps_f >= 1.0 {
            return Err(config("eps_e + eps_f must be below 1"));
        }
        if !(self.delta.is_finite() && self.delta.abs() < 1.0) {
            return Err(config(format!("delta must lie in (-1, 1), got {}", self.delta)));
        }
        if self.n_max == 0 {
            return Err(config("n_max must be at least 1"));
        }
        if self.burn_in >= self.n_max {
            return Err(config("burn_in must be below n_max"));
        }
        if self.horizon == 0 {
            return Err(config("horizon must be at least 1"));
        }
        if self.forward_reps == 0 {
            return Err(config("forward_reps must be at least 1"));
        }
        if self.tail_mc_n == 0 {
            return Err(config("tail_mc_n must be at least 1"));
        }
        self.schedule.validate("schedule")?;
        self.early_check.validate("early_check")?;
        self.utilities.validate()
    }

    /// Whether the stopping rules are checked after `n` outcomes.
    pub fn is_interim(&self, n: u32) -> bool {
        n >= self.burn_in && n <= self.n_max && (n == self.n_max || self.schedule.contains(n))
    }

    pub fn is_early_check(&self, n: u32) -> bool {
        n >= self.burn_in && n < self.n_max && self.early_check.contains(n)
    }

    /// Last patient count considered by forward simulations from `n`.
    pub fn forward_end(&self, n: u32) -> u32 {
        self.horizon.min(self.n_max).max(n)
    }
}
