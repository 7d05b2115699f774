use rand::Rng;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};

use super::data::TrialData;
use super::rules::Decision;
use super::Simulator;
use crate::error::Result;
use crate::exec::map_indexed;
use crate::mc_engine::{beta_dist, RngSpec};

/// Monte Carlo estimate of the expected net utility of continuing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictiveUtility {
    /// Expected terminal utility minus the expected cost of the patients
    /// still to be treated.
    pub value: f64,
    pub std_error: f64,
    pub p_efficacy: f64,
    pub p_futility: f64,
    /// Paths that ran to the horizon without a decision.
    pub p_undecided: f64,
    /// Expected number of further patients.
    pub expected_additional: f64,
    pub reps: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EarlyStop {
    StopInconclusive,
    Continue,
}

struct Path {
    value: f64,
    decision: Option<Decision>,
    additional: u32,
}

impl Simulator {
    /// Forward-simulates `forward_reps` continuations of `data` to
    /// `min(horizon, n_max)`, drawing the true rates from the `π_f`
    /// posterior and applying both stopping rules at every analysis point.
    /// Rep `r` uses the stream `rng.child(r)`.
    pub fn predictive(&self, data: &TrialData, rng: RngSpec) -> Result<PredictiveUtility> {
        let d = &*self.design;
        let post = data.counts.posterior(&d.prior_f);
        let law0 = beta_dist(post.control())?;
        let law1 = beta_dist(post.experimental())?;
        let end = d.forward_end(data.n());
        let reps = d.forward_reps as usize;
        let paths = map_indexed(reps, |r| -> Result<Path> {
            let mut g = rng.child(r as u64).rng();
            let theta0 = law0.sample(&mut g);
            let theta1 = law1.sample(&mut g);
            let mut state = *data;
            let start = state.n();
            while state.n() < end {
                let arm = state.block.next_arm(&mut g);
                let theta = match arm {
                    crate::posterior::Arm::Control => theta0,
                    crate::posterior::Arm::Experimental => theta1,
                };
                state.observe(arm, crate::posterior::Outcome::from_bool(g.random::<f64>() < theta));
                let n = state.n();
                if !d.is_interim(n) {
                    continue;
                }
                let (eff, fut) = self.engine.triggers(state.counts)?;
                let cost = d.utilities.cost_per_patient * f64::from(n - start);
                if eff {
                    let u = d.utilities.expected_efficacy(self.engine.efficacy_tail_f(state.counts)?);
                    return Ok(Path { value: u - cost, decision: Some(Decision::Efficacy), additional: n - start });
                }
                if fut {
                    let u = d.utilities.expected_futility(self.engine.futility_tail_f(state.counts)?);
                    return Ok(Path { value: u - cost, decision: Some(Decision::Futility), additional: n - start });
                }
            }
            let additional = state.n() - start;
            let terminal = if state.n() >= d.n_max { d.utilities.inconclusive_value } else { 0.0 };
            Ok(Path {
                value: terminal - d.utilities.cost_per_patient * f64::from(additional),
                decision: None,
                additional,
            })
        });
        let paths = paths.into_iter().collect::<Result<Vec<_>>>()?;
        let k = paths.len() as f64;
        let mean = paths.iter().map(|p| p.value).sum::<f64>() / k;
        let var = if paths.len() > 1 {
            paths.iter().map(|p| (p.value - mean).powi(2)).sum::<f64>() / (k - 1.0)
        } else {
            0.0
        };
        let share = |want: Option<Decision>| paths.iter().filter(|p| p.decision == want).count() as f64 / k;
        Ok(PredictiveUtility {
            value: mean,
            std_error: (var / k).sqrt(),
            p_efficacy: share(Some(Decision::Efficacy)),
            p_futility: share(Some(Decision::Futility)),
            p_undecided: share(None),
            expected_additional: paths.iter().map(|p| f64::from(p.additional)).sum::<f64>() / k,
            reps: paths.len() as u32,
        })
    }

    /// Stops for inconclusiveness when continuing has negative expected
    /// net utility.
    pub fn early_stop_check(&self, data: &TrialData, rng: RngSpec) -> Result<(EarlyStop, PredictiveUtility)> {
        let p = self.predictive(data, rng)?;
        let verdict = if p.value < 0.0 { EarlyStop::StopInconclusive } else { EarlyStop::Continue };
        Ok((verdict, p))
    }
}

#[cfg(test)]
mod tests {
    use super::super::{Counts, TrialDesign, UtilitySpec};
    use super::*;

    fn pure_cost() -> UtilitySpec {
        UtilitySpec {
            gain_efficacy: 0.0,
            gain_futility: 0.0,
            loss_efficacy: 0.0,
            loss_futility: 0.0,
            cost_per_patient: 1.0,
            inconclusive_value: 0.0,
        }
    }

    #[test]
    fn pure_cost_is_minus_duration() {
        let d = TrialDesign {
            utilities: pure_cost(),
            n_max: 60,
            horizon: 60,
            forward_reps: 200,
            ..TrialDesign::standard()
        };
        let s = Simulator::new(d).unwrap();
        let data = TrialData::from_counts(Counts::new(5, 2, 5, 3).unwrap());
        let (verdict, p) = s.early_stop_check(&data, RngSpec::new(1, 0)).unwrap();
        assert_eq!(verdict, EarlyStop::StopInconclusive);
        assert!((p.value + p.expected_additional).abs() < 1e-9);
        assert!(p.expected_additional > 0.0 && p.expected_additional <= 50.0);
        assert!((p.p_efficacy + p.p_futility + p.p_undecided - 1.0).abs() < 1e-12);
    }

    #[test]
    fn efficacy_only_utility_tracks_predictive_probability() {
        // each efficacy path is worth 1 - tail with tail < eps_e, every other path 0
        let d = TrialDesign {
            utilities: UtilitySpec { gain_efficacy: 1.0, cost_per_patient: 0.0, ..pure_cost() },
            n_max: 120,
            horizon: 120,
            forward_reps: 400,
            ..TrialDesign::standard()
        };
        let eps = d.eps_e;
        let s = Simulator::new(d).unwrap();
        let data = TrialData::from_counts(Counts::new(10, 4, 10, 7).unwrap());
        let p = s.predictive(&data, RngSpec::new(3, 0)).unwrap();
        assert!(p.p_efficacy > 0.1, "{p:?}");
        assert!(p.value <= p.p_efficacy + 1e-12);
        assert!(p.value >= p.p_efficacy * (1.0 - eps) - 1e-12);
    }

    #[test]
    fn empty_horizon_is_zero() {
        let d = TrialDesign { horizon: 10, ..TrialDesign::standard() };
        let s = Simulator::new(d).unwrap();
        let data = TrialData::from_counts(Counts::new(6, 3, 6, 3).unwrap());
        let p = s.predictive(&data, RngSpec::new(1, 0)).unwrap();
        assert_eq!(p.value, 0.0);
        assert_eq!(p.expected_additional, 0.0);
    }

    #[test]
    fn start_of_standard_trial_is_worth_continuing() {
        let d = TrialDesign { forward_reps: 200, ..TrialDesign::standard() };
        let s = Simulator::new(d).unwrap();
        let (verdict, p) = s.early_stop_check(&TrialData::default(), RngSpec::new(5, 0)).unwrap();
        assert_eq!(verdict, EarlyStop::Continue);
        assert!(p.value > 500.0, "{p:?}");
    }

    #[test]
    fn reproducible() {
        let d = TrialDesign { forward_reps: 50, ..TrialDesign::standard() };
        let s = Simulator::new(d).unwrap();
        let data = TrialData::from_counts(Counts::new(10, 5, 10, 6).unwrap());
        let a = s.predictive(&data, RngSpec::new(9, 2)).unwrap();
        let b = crate::exec::with_workers(3, || s.predictive(&data, RngSpec::new(9, 2)).unwrap());
        assert_eq!(a, b);
    }
}
