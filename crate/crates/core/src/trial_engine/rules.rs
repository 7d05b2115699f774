use serde::{Deserialize, Serialize};

use super::data::TrialData;
use super::tails::Tails;
use super::Simulator;
use crate::error::{usage, Result};

/// Terminal decision of a trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Efficacy,
    Futility,
    Inconclusive,
}

impl Decision {
    pub fn as_str(self) -> &'static str {
        match self {
            Decision::Efficacy => "efficacy",
            Decision::Futility => "futility",
            Decision::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterimDecision {
    Continue,
    Stop(Decision),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interim {
    pub decision: InterimDecision,
    pub n: u32,
    pub tail_efficacy: f64,
    pub tail_futility: f64,
    /// Both thresholds were crossed at once; efficacy was taken.
    pub both_triggered: bool,
}

pub(super) fn decide(tails: Tails, efficacy: bool, futility: bool, n: u32, n_max: u32) -> Interim {
    let both = efficacy && futility;
    if both {
        log::warn!(
            "efficacy and futility both triggered at n = {n} (tails {:.3e}, {:.3e}); declaring efficacy",
            tails.efficacy,
            tails.futility
        );
    }
    let decision = if efficacy {
        InterimDecision::Stop(Decision::Efficacy)
    } else if futility {
        InterimDecision::Stop(Decision::Futility)
    } else if n >= n_max {
        InterimDecision::Stop(Decision::Inconclusive)
    } else {
        InterimDecision::Continue
    };
    Interim {
        decision,
        n,
        tail_efficacy: tails.efficacy,
        tail_futility: tails.futility,
        both_triggered: both,
    }
}

impl Simulator {
    /// Applies both stopping rules to `data`. Errors if `n` is not an
    /// analysis point of the design.
    pub fn interim_decision(&self, data: &TrialData) -> Result<Interim> {
        let n = data.n();
        if !self.design.is_interim(n) {
            return Err(usage(format!("n = {n} is not an interim analysis point of this design")));
        }
        let tails = self.engine.tails(data.counts)?;
        Ok(decide(
            tails,
            tails.efficacy < self.design.eps_e,
            tails.futility < self.design.eps_f,
            n,
            self.design.n_max,
        ))
    }

    /// Posterior expected utility of declaring efficacy now, under `π_f`.
    /// Only defined where the efficacy rule holds.
    pub fn expected_utility_at_efficacy(&self, data: &TrialData) -> Result<f64> {
        let tails = self.engine.tails(data.counts)?;
        if tails.efficacy >= self.design.eps_e {
            return Err(usage(format!(
                "efficacy rule does not hold (tail {:.4} >= {})",
                tails.efficacy, self.design.eps_e
            )));
        }
        Ok(self.design.utilities.expected_efficacy(self.engine.efficacy_tail_f(data.counts)?))
    }

    /// Posterior expected utility of declaring futility now, under `π_f`.
    pub fn expected_utility_at_futility(&self, data: &TrialData) -> Result<f64> {
        let tails = self.engine.tails(data.counts)?;
        if tails.futility >= self.design.eps_f {
            return Err(usage(format!(
                "futility rule does not hold (tail {:.4} >= {})",
                tails.futility, self.design.eps_f
            )));
        }
        Ok(self.design.utilities.expected_futility(tails.futility))
    }
}

#[cfg(test)]
mod tests {
    use super::super::{Counts, TrialDesign};
    use super::*;

    fn sim() -> Simulator {
        Simulator::new(TrialDesign::standard()).unwrap()
    }

    fn at(n0: u32, s0: u32, n1: u32, s1: u32) -> TrialData {
        TrialData::from_counts(Counts::new(n0, s0, n1, s1).unwrap())
    }

    #[test]
    fn clear_efficacy() {
        let i = sim().interim_decision(&at(20, 4, 20, 16)).unwrap();
        assert_eq!(i.decision, InterimDecision::Stop(Decision::Efficacy));
        assert!(i.tail_efficacy < 0.05);
        assert!(!i.both_triggered);
    }

    #[test]
    fn clear_futility() {
        let i = sim().interim_decision(&at(20, 16, 20, 4)).unwrap();
        assert_eq!(i.decision, InterimDecision::Stop(Decision::Futility));
    }

    #[test]
    fn no_data_continues() {
        let s = sim();
        let i = s.interim_decision(&TrialData::default());
        // n = 0 is not in the every-patient schedule
        assert!(i.is_err());
        let i = s.interim_decision(&at(1, 0, 1, 1)).unwrap();
        assert_eq!(i.decision, InterimDecision::Continue);
    }

    #[test]
    fn inconclusive_at_n_max() {
        let d = TrialDesign { n_max: 10, horizon: 10, ..TrialDesign::standard() };
        let s = Simulator::new(d).unwrap();
        let i = s.interim_decision(&at(5, 2, 5, 3)).unwrap();
        assert_eq!(i.decision, InterimDecision::Stop(Decision::Inconclusive));
    }

    #[test]
    fn off_schedule_is_usage_error() {
        let d = TrialDesign {
            schedule: crate::trial_engine::Schedule::Every { step: 10 },
            ..TrialDesign::standard()
        };
        let s = Simulator::new(d).unwrap();
        assert!(matches!(s.interim_decision(&at(3, 1, 2, 1)), Err(crate::Error::Usage(_))));
    }

    #[test]
    fn tie_goes_to_efficacy() {
        let t = Tails { efficacy: 0.01, futility: 0.01 };
        let i = decide(t, true, true, 10, 500);
        assert!(i.both_triggered);
        assert_eq!(i.decision, InterimDecision::Stop(Decision::Efficacy));
    }

    #[test]
    fn expected_utilities_need_their_rule() {
        let s = sim();
        let d = at(20, 4, 20, 16);
        let u = s.expected_utility_at_efficacy(&d).unwrap();
        let tail = s.engine().tails(d.counts).unwrap().efficacy;
        assert!((u - (2500.0 - 3500.0 * tail)).abs() < 1e-9);
        assert!(u > 2500.0 - 3500.0 * 0.05);
        assert!(s.expected_utility_at_futility(&d).is_err());
        let f = at(20, 16, 20, 4);
        assert!(s.expected_utility_at_futility(&f).unwrap() > 500.0 - 1500.0 * 0.05);
    }
}
