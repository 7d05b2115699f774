//! Special-function kernel: log-Beta, incomplete Beta, hypergeometric series
//! and the double Beta integrals `P(θ₁ < θ₀ + Δ)` for independent Beta laws.
//!
//! Every closed form here has a quadrature counterpart; [`quad_oracle`]
//! integrates the joint density directly and is the ground truth in tests.

mod double;
mod hypergeometric;
pub mod quadrature;
mod special;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

pub use double::{
    incomplete_beta_representations, prob_t1_lt_c_t0, prob_t1_lt_t0, prob_t1_lt_t0_closed_form,
    prob_t1_lt_t0_plus_delta, prob_t1_lt_t0_plus_delta_series, quad_oracle,
};
pub use hypergeometric::{f3_2_at_unit, gauss_2f1, SeriesControl};
pub use special::{ln_gamma, log_beta_fn, reg_inc_beta};

pub(crate) use double::beta_breaks;
pub(crate) use special::{beta_ln_pdf, ln_beta_unchecked, reg_inc_beta_unchecked};

/// Shape parameters of a Beta(α, β) distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BetaParams {
    pub alpha: f64,
    pub beta: f64,
}

impl BetaParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        let p = Self { alpha, beta };
        p.validate()?;
        Ok(p)
    }

    /// The Beta(1, 1) (uniform) law.
    pub const fn uniform() -> Self {
        Self {
            alpha: 1.0,
            beta: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if ok(self.alpha) && ok(self.beta) {
            Ok(())
        } else {
            Err(domain(format!(
                "Beta shapes must be positive and finite, got ({}, {})",
                self.alpha, self.beta
            )))
        }
    }

    pub fn mean(&self) -> f64 {
        self.alpha / (self.alpha + self.beta)
    }

    pub fn variance(&self) -> f64 {
        let s = self.alpha + self.beta;
        self.alpha * self.beta / (s * s * (s + 1.0))
    }

    /// Reflected law of `1 − θ`.
    pub fn reflect(&self) -> Self {
        Self {
            alpha: self.beta,
            beta: self.alpha,
        }
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        beta_ln_pdf(x, self.alpha, self.beta, ln_beta_unchecked(self.alpha, self.beta))
    }

    pub fn cdf(&self, x: f64) -> Result<f64> {
        reg_inc_beta(x.clamp(0.0, 1.0), self.alpha, self.beta)
    }
}

impl Default for BetaParams {
    fn default() -> Self {
        Self::uniform()
    }
}
