//! Replicated-trial operating characteristics: false discovery and false
//! futility probabilities, fixed-truth error rates, stopping sub-CDFs and
//! conditional utilities over a sampling prior.
//!
//! Replicate `i` of a run seeded with `rng` draws its truth from
//! `rng.child(i).child(0)` and its patients from `rng.child(i).child(1)`, so
//! results do not depend on the number of workers, and runs that differ only
//! in early stopping see the same truths and outcome streams.

use std::fmt;

use rand::Rng;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};

use crate::error::{config, usage, Result};
use crate::exec::map_indexed;
use crate::mc_engine::{beta_dist, McEstimate, RngSpec};
use crate::trial_engine::{Decision, PriorPair, RunOptions, Simulator, TrialDesign, TrialResult, Truth};

/// Default replicate count for curve estimation.
pub const DEFAULT_REPS: usize = 2000;

/// Cap on rejection-sampling attempts per truth (acceptance below `1e-6`
/// is treated as a configuration error).
const MAX_TRIES: u64 = 10_000_000;

/// Set of `(θ₀, θ₁)` the sampling prior is conditioned on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "region", rename_all = "snake_case")]
pub enum SamplingRegion {
    /// `θ₁ − θ₀ > Δ`.
    Efficacy,
    /// `θ₁ − θ₀ < 0`.
    Harm,
    /// `0 ≤ θ₁ − θ₀ ≤ Δ`.
    Gap,
    Unconditional,
    FixedTruth { theta0: f64, theta1: f64 },
}

impl SamplingRegion {
    pub fn contains(&self, theta0: f64, theta1: f64, delta: f64) -> bool {
        let d = theta1 - theta0;
        match *self {
            SamplingRegion::Efficacy => d > delta,
            SamplingRegion::Harm => d < 0.0,
            SamplingRegion::Gap => (0.0..=delta).contains(&d),
            SamplingRegion::Unconditional => true,
            SamplingRegion::FixedTruth { .. } => true,
        }
    }

    fn check(&self, delta: f64) -> Result<()> {
        let empty = match *self {
            SamplingRegion::Efficacy => delta >= 1.0,
            SamplingRegion::Gap => delta < 0.0,
            SamplingRegion::FixedTruth { theta0, theta1 } => {
                Truth::new(theta0, theta1)?;
                false
            }
            _ => false,
        };
        if empty {
            return Err(config(format!("sampling region {self} is empty for delta = {delta}")));
        }
        Ok(())
    }
}

impl fmt::Display for SamplingRegion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SamplingRegion::Efficacy => write!(f, "efficacy"),
            SamplingRegion::Harm => write!(f, "harm"),
            SamplingRegion::Gap => write!(f, "gap"),
            SamplingRegion::Unconditional => write!(f, "unconditional"),
            SamplingRegion::FixedTruth { theta0, theta1 } => write!(f, "fixed({theta0}, {theta1})"),
        }
    }
}

/// Draws `(θ₀, θ₁)` from the product prior conditioned on `region`, and
/// the number of proposals it took.
pub fn sample_truth_counted<R: Rng + ?Sized>(
    prior: &PriorPair,
    region: SamplingRegion,
    delta: f64,
    rng: &mut R,
) -> Result<(Truth, u64)> {
    region.check(delta)?;
    if let SamplingRegion::FixedTruth { theta0, theta1 } = region {
        return Ok((Truth::new(theta0, theta1)?, 0));
    }
    let law0 = beta_dist(prior.control)?;
    let law1 = beta_dist(prior.experimental)?;
    for tries in 1..=MAX_TRIES {
        let t0 = law0.sample(rng);
        let t1 = law1.sample(rng);
        if region.contains(t0, t1, delta) {
            return Ok((Truth::new(t0, t1)?, tries));
        }
    }
    Err(config(format!(
        "sampling region {region} accepted nothing in {MAX_TRIES} proposals (acceptance below 1e-6)"
    )))
}

pub fn sample_truth<R: Rng + ?Sized>(prior: &PriorPair, region: SamplingRegion, delta: f64, rng: &mut R) -> Result<Truth> {
    Ok(sample_truth_counted(prior, region, delta, rng)?.0)
}

/// Conditional error frequency among one kind of stop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FalseRate {
    /// Trials that stopped with the decision being audited.
    pub stops: usize,
    /// Fraction of those stops whose truth lies in the error set.
    pub frequency: McEstimate,
    /// Upper end of the 95% Wilson interval of `frequency`.
    pub upper_95: f64,
    /// Mean posterior probability of the error set at the stop.
    pub rao_blackwell: McEstimate,
    /// Frequency for the nested variant (strict-false for discoveries,
    /// `Δ`-strengthened for futility).
    pub variant: McEstimate,
}

fn wilson_upper(k: usize, m: usize, z: f64) -> f64 {
    let (k, m) = (k as f64, m as f64);
    let p = k / m;
    let z2 = z * z;
    ((p + z2 / (2.0 * m) + z * (p * (1.0 - p) / m + z2 / (4.0 * m * m)).sqrt()) / (1.0 + z2 / m)).min(1.0)
}

fn binomial(k: usize, m: usize) -> McEstimate {
    let p = k as f64 / m as f64;
    McEstimate {
        value: p,
        std_error: (p * (1.0 - p) / m as f64).sqrt(),
        n: m,
    }
}

fn mean_estimate(values: &[f64]) -> McEstimate {
    let m = values.len() as f64;
    let mean = values.iter().sum::<f64>() / m;
    let var = if values.len() > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0)
    } else {
        0.0
    };
    McEstimate {
        value: mean,
        std_error: (var / m).sqrt(),
        n: values.len(),
    }
}

/// One simulated trial with the truth it ran under.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Replicate {
    pub truth: Truth,
    pub result: TrialResult,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecisionFractions {
    pub efficacy: f64,
    pub futility: f64,
    pub inconclusive: f64,
}

/// Cumulative stop fractions by cause at one patient count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubCdfRow {
    pub time: u32,
    pub efficacy: f64,
    pub futility: f64,
    pub inconclusive: f64,
}

/// Per-trial point for scatter tables.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScatterPoint {
    /// Patients treated when the trial ended.
    pub tau: u32,
    pub utility: f64,
    pub decision: Decision,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OCReport {
    pub region: SamplingRegion,
    pub n_reps: usize,
    pub early_stop: bool,
    pub seed: RngSpec,
    pub fdp: Option<FalseRate>,
    pub ffp: Option<FalseRate>,
    pub decision_fractions: DecisionFractions,
    pub mean_duration: f64,
    /// Mean posterior-expected terminal utility minus patient costs.
    pub conditional_mean_utility: McEstimate,
    /// Mean terminal utility at the true rates minus patient costs.
    pub conditional_mean_realized_utility: McEstimate,
    pub subcdf: Vec<SubCdfRow>,
    /// One point per trial; written to the scatter table, not the report.
    #[serde(skip)]
    pub scatter: Vec<ScatterPoint>,
}

impl OCReport {
    /// `time,p_stop_efficacy,p_stop_futility,p_stop_inconclusive` rows.
    pub fn subcdf_csv(&self) -> String {
        let mut s = String::from("time,p_stop_efficacy,p_stop_futility,p_stop_inconclusive\n");
        for r in &self.subcdf {
            s.push_str(&format!("{},{},{},{}\n", r.time, r.efficacy, r.futility, r.inconclusive));
        }
        s
    }

    /// `tau,utility,decision` rows.
    pub fn scatter_csv(&self) -> String {
        let mut s = String::from("tau,utility,decision\n");
        for p in &self.scatter {
            s.push_str(&format!("{},{},{}\n", p.tau, p.utility, p.decision.as_str()));
        }
        s
    }
}

/// Runs `n_reps` trials with truths from `prior` conditioned on `region`.
pub fn simulate(
    sim: &Simulator,
    prior: &PriorPair,
    region: SamplingRegion,
    n_reps: usize,
    rng: RngSpec,
    options: &RunOptions,
) -> Result<Vec<Replicate>> {
    if n_reps == 0 {
        return Err(usage("n_reps must be at least 1"));
    }
    let delta = sim.design().delta;
    region.check(delta)?;
    map_indexed(n_reps, |i| {
        let rep = rng.child(i as u64);
        let truth = sample_truth(prior, region, delta, &mut rep.child(0).rng())?;
        let result = sim.run_trial(truth, rep.child(1), options)?;
        Ok(Replicate { truth, result })
    })
    .into_iter()
    .collect()
}

fn false_discovery(reps: &[Replicate], delta: f64) -> Option<FalseRate> {
    let stops: Vec<_> = reps.iter().filter(|r| r.result.decision == Decision::Efficacy).collect();
    let m = stops.len();
    if m == 0 {
        log::info!("no efficacy stops among {} trials; false discovery probability undefined", reps.len());
        return None;
    }
    let gap = |r: &&Replicate| r.truth.theta1 - r.truth.theta0;
    let k = stops.iter().filter(|r| gap(r) <= delta).count();
    let strict = stops.iter().filter(|r| gap(r) <= 0.0).count();
    let tails: Vec<f64> = stops.iter().map(|r| r.result.tail_efficacy).collect();
    Some(FalseRate {
        stops: m,
        frequency: binomial(k, m),
        upper_95: wilson_upper(k, m, 1.96),
        rao_blackwell: mean_estimate(&tails),
        variant: binomial(strict, m),
    })
}

fn false_futility(reps: &[Replicate], delta: f64) -> Option<FalseRate> {
    let stops: Vec<_> = reps.iter().filter(|r| r.result.decision == Decision::Futility).collect();
    let m = stops.len();
    if m == 0 {
        log::info!("no futility stops among {} trials; false futility probability undefined", reps.len());
        return None;
    }
    let gap = |r: &&Replicate| r.truth.theta1 - r.truth.theta0;
    let k = stops.iter().filter(|r| gap(r) >= 0.0).count();
    let strengthened = stops.iter().filter(|r| gap(r) >= delta).count();
    let tails: Vec<f64> = stops.iter().map(|r| r.result.tail_futility).collect();
    Some(FalseRate {
        stops: m,
        frequency: binomial(k, m),
        upper_95: wilson_upper(k, m, 1.96),
        rao_blackwell: mean_estimate(&tails),
        variant: binomial(strengthened, m),
    })
}

/// False discovery probability with truths drawn from `π_e`.
pub fn estimate_fdp(design: &TrialDesign, n_reps: usize, rng: RngSpec) -> Result<Option<FalseRate>> {
    let sim = Simulator::new(design.clone())?;
    let reps = simulate(&sim, &design.prior_e, SamplingRegion::Unconditional, n_reps, rng, &RunOptions::default())?;
    Ok(false_discovery(&reps, design.delta))
}

/// False futility probability with truths drawn from `π_f`.
pub fn estimate_ffp(design: &TrialDesign, n_reps: usize, rng: RngSpec) -> Result<Option<FalseRate>> {
    let sim = Simulator::new(design.clone())?;
    let reps = simulate(&sim, &design.prior_f, SamplingRegion::Unconditional, n_reps, rng, &RunOptions::default())?;
    Ok(false_futility(&reps, design.delta))
}

/// Efficacy-stop frequency under `(θ₀, θ₀)` (type I) and `(θ₀, θ_a)`
/// (power). Both use the same replicate streams.
pub fn fixed_truth_oc(
    design: &TrialDesign,
    theta0: f64,
    theta_a: f64,
    n_reps: usize,
    rng: RngSpec,
) -> Result<(McEstimate, McEstimate)> {
    for t in [theta0, theta_a] {
        if !(t > 0.0 && t < 1.0) {
            return Err(usage(format!("response rates must lie in (0, 1), got {t}")));
        }
    }
    let sim = Simulator::new(design.clone())?;
    let rate = |theta1: f64| -> Result<McEstimate> {
        let region = SamplingRegion::FixedTruth { theta0, theta1 };
        let reps = simulate(&sim, &design.prior_f, region, n_reps, rng, &RunOptions::default())?;
        let k = reps.iter().filter(|r| r.result.decision == Decision::Efficacy).count();
        Ok(binomial(k, n_reps))
    };
    Ok((rate(theta0)?, rate(theta_a)?))
}

/// Aggregates replicates into an operating-characteristics report.
pub fn summarize(
    design: &TrialDesign,
    region: SamplingRegion,
    early_stop: bool,
    seed: RngSpec,
    sampled_from: &PriorPair,
    reps: &[Replicate],
) -> OCReport {
    let m = reps.len();
    let mf = m as f64;
    let n_max = design.n_max as usize;
    // stops[t][k]: trials of cause k ending at t patients
    let mut stops = vec![[0usize; 3]; n_max + 1];
    for r in reps {
        let k = match r.result.decision {
            Decision::Efficacy => 0,
            Decision::Futility => 1,
            Decision::Inconclusive => 2,
        };
        stops[(r.result.stopped_at as usize).min(n_max)][k] += 1;
    }
    let mut acc = [0usize; 3];
    let mut subcdf = Vec::with_capacity(n_max);
    for (t, row) in stops.iter().enumerate() {
        for k in 0..3 {
            acc[k] += row[k];
        }
        if t == 0 {
            continue;
        }
        subcdf.push(SubCdfRow {
            time: t as u32,
            efficacy: acc[0] as f64 / mf,
            futility: acc[1] as f64 / mf,
            inconclusive: acc[2] as f64 / mf,
        });
    }
    let unconditional = region == SamplingRegion::Unconditional;
    let expected: Vec<f64> = reps.iter().map(|r| r.result.expected_utility).collect();
    let realized: Vec<f64> = reps.iter().map(|r| r.result.realized_utility).collect();
    OCReport {
        region,
        n_reps: m,
        early_stop,
        seed,
        fdp: (unconditional && *sampled_from == design.prior_e)
            .then(|| false_discovery(reps, design.delta))
            .flatten(),
        ffp: (unconditional && *sampled_from == design.prior_f)
            .then(|| false_futility(reps, design.delta))
            .flatten(),
        decision_fractions: DecisionFractions {
            efficacy: acc[0] as f64 / mf,
            futility: acc[1] as f64 / mf,
            inconclusive: acc[2] as f64 / mf,
        },
        mean_duration: reps.iter().map(|r| f64::from(r.result.stopped_at)).sum::<f64>() / mf,
        conditional_mean_utility: mean_estimate(&expected),
        conditional_mean_realized_utility: mean_estimate(&realized),
        subcdf,
        scatter: reps
            .iter()
            .map(|r| ScatterPoint {
                tau: r.result.stopped_at,
                utility: r.result.expected_utility,
                decision: r.result.decision,
            })
            .collect(),
    }
}

/// Stopping sub-CDFs without predictive early stopping; truths from `π_f`.
pub fn stopping_subcdf(design: &TrialDesign, region: SamplingRegion, n_reps: usize, rng: RngSpec) -> Result<OCReport> {
    conditional_utility(design, region, false, n_reps, rng)
}

/// Utilities per trial and their conditional mean over the region; truths
/// from `π_f`.
pub fn conditional_utility(
    design: &TrialDesign,
    region: SamplingRegion,
    early_stop: bool,
    n_reps: usize,
    rng: RngSpec,
) -> Result<OCReport> {
    let sim = Simulator::new(design.clone())?;
    evaluate(&sim, region, early_stop, n_reps, rng)
}

/// As [`conditional_utility`] with a caller-held simulator, so several
/// runs can share its tail caches.
pub fn evaluate(sim: &Simulator, region: SamplingRegion, early_stop: bool, n_reps: usize, rng: RngSpec) -> Result<OCReport> {
    let design = sim.design();
    let options = RunOptions {
        early_stop,
        ..RunOptions::default()
    };
    let reps = simulate(sim, &design.prior_f, region, n_reps, rng, &options)?;
    Ok(summarize(design, region, early_stop, rng, &design.prior_f, &reps))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn small() -> TrialDesign {
        TrialDesign {
            n_max: 60,
            horizon: 60,
            ..TrialDesign::standard()
        }
    }

    #[test]
    fn region_acceptance_rates() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let prior = PriorPair::uniform();
        for (region, want) in [(SamplingRegion::Gap, 0.04875), (SamplingRegion::Efficacy, 0.45125)] {
            let (mut tries, k) = (0u64, 4000);
            for _ in 0..k {
                let (t, n) = sample_truth_counted(&prior, region, 0.05, &mut rng).unwrap();
                assert!(region.contains(t.theta0, t.theta1, 0.05));
                tries += n;
            }
            let rate = k as f64 / tries as f64;
            assert!((rate - want).abs() < 0.1 * want, "{region}: {rate}");
        }
    }

    #[test]
    fn gap_samples_stay_in_band() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        for _ in 0..500 {
            let t = sample_truth(&PriorPair::uniform(), SamplingRegion::Gap, 0.05, &mut rng).unwrap();
            let d = t.theta1 - t.theta0;
            assert!((0.0..=0.05).contains(&d));
        }
    }

    #[test]
    fn empty_region_is_config_error() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let r = sample_truth(&PriorPair::uniform(), SamplingRegion::Gap, -0.1, &mut rng);
        assert!(matches!(r, Err(crate::Error::Config(_))));
        // a prior concentrated far from the region
        let prior = PriorPair {
            control: crate::beta_math::BetaParams::new(5000.0, 1.0).unwrap(),
            experimental: crate::beta_math::BetaParams::new(1.0, 5000.0).unwrap(),
        };
        let r = sample_truth_counted(&prior, SamplingRegion::Efficacy, 0.05, &mut rng);
        assert!(matches!(r, Err(crate::Error::Config(_))));
    }

    #[test]
    fn fixed_truth_passes_through() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let region = SamplingRegion::FixedTruth { theta0: 0.2, theta1: 0.3 };
        assert_eq!(sample_truth(&PriorPair::uniform(), region, 0.05, &mut rng).unwrap(), Truth::new(0.2, 0.3).unwrap());
    }

    #[test]
    fn wilson_bounds() {
        assert!((wilson_upper(0, 100, 1.96) - 0.036994).abs() < 1e-5);
        assert!(wilson_upper(50, 100, 1.96) > 0.5);
    }

    #[test]
    fn subcdf_shapes() {
        let rep = conditional_utility(&small(), SamplingRegion::Unconditional, false, 300, RngSpec::new(4, 0)).unwrap();
        let f = rep.decision_fractions;
        assert!((f.efficacy + f.futility + f.inconclusive - 1.0).abs() < 1e-12);
        let last = rep.subcdf.last().unwrap();
        assert_eq!((last.efficacy, last.futility, last.inconclusive), (f.efficacy, f.futility, f.inconclusive));
        for w in rep.subcdf.windows(2) {
            assert!(w[1].efficacy >= w[0].efficacy && w[1].futility >= w[0].futility);
            assert!(w[1].inconclusive >= w[0].inconclusive);
        }
        assert!(rep.fdp.is_some() && rep.ffp.is_some());
        assert_eq!(rep.scatter.len(), 300);
        assert_eq!(rep.subcdf_csv().lines().count(), 61);
    }

    #[test]
    fn zero_eps_means_no_estimate() {
        let d = TrialDesign { eps_e: 0.0, ..small() };
        assert!(estimate_fdp(&d, 50, RngSpec::new(1, 1)).unwrap().is_none());
        let d = TrialDesign { eps_f: 0.0, ..small() };
        assert!(estimate_ffp(&d, 50, RngSpec::new(1, 1)).unwrap().is_none());
    }

    #[test]
    fn nested_variants_are_ordered() {
        let d = small();
        let fdp = estimate_fdp(&d, 400, RngSpec::new(8, 0)).unwrap().unwrap();
        assert!(fdp.variant.value <= fdp.frequency.value);
        let ffp = estimate_ffp(&d, 400, RngSpec::new(8, 0)).unwrap().unwrap();
        assert!(ffp.variant.value <= ffp.frequency.value);
    }

    #[test]
    fn fixed_truth_rates() {
        let d = TrialDesign { eps_e: 0.0, ..small() };
        let (t1, _) = fixed_truth_oc(&d, 0.5, 0.8, 50, RngSpec::new(3, 0)).unwrap();
        assert_eq!(t1.value, 0.0);
        let (a, b) = fixed_truth_oc(&small(), 0.4, 0.4, 80, RngSpec::new(3, 0)).unwrap();
        assert_eq!(a, b);
        assert!(fixed_truth_oc(&small(), 0.0, 0.4, 10, RngSpec::new(3, 0)).is_err());
    }

    #[test]
    fn zero_reps_rejected() {
        assert!(conditional_utility(&small(), SamplingRegion::Gap, false, 0, RngSpec::new(1, 0)).is_err());
    }
}
