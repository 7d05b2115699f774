//! Batch commands behind the `seqtrial` binary.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;
use seqtrial_core::design_eval::{evaluate, FalseRate, OCReport, SamplingRegion};
use seqtrial_core::mc_engine::RngSpec;
use seqtrial_core::trial_engine::{Counts, Simulator, TrialData, TrialDesign};

use crate::document::{parse_design, SCHEMA_VERSION};
use crate::session::run_whatif;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CliError {
    /// Bad input: schema, validation or arguments.
    #[error("{0}")]
    Validation(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

impl From<seqtrial_core::Error> for CliError {
    fn from(e: seqtrial_core::Error) -> Self {
        match e {
            seqtrial_core::Error::Config(_) | seqtrial_core::Error::Usage(_) => CliError::Validation(e.to_string()),
            other => CliError::Numeric(other.to_string()),
        }
    }
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::Io(format!("{}: {e}", path.display()))
}

pub fn load_design(path: &Path) -> Result<TrialDesign, CliError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_design(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

/// `--region` values: `a`, `b`, `c`, `all`, `unconditional`, `fixed:θ0,θ1`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionArg(pub Vec<(String, SamplingRegion, u64)>);

impl FromStr for RegionArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let one = |label: &str| -> Result<(String, SamplingRegion, u64), String> {
            Ok(match label {
                "a" => ("a".into(), SamplingRegion::Efficacy, 1),
                "b" => ("b".into(), SamplingRegion::Harm, 2),
                "c" => ("c".into(), SamplingRegion::Gap, 3),
                "unconditional" => ("unconditional".into(), SamplingRegion::Unconditional, 0),
                other => {
                    let rest = other
                        .strip_prefix("fixed:")
                        .ok_or_else(|| format!("unknown region '{other}'"))?;
                    let (a, b) = rest
                        .split_once(',')
                        .ok_or_else(|| format!("expected fixed:θ0,θ1, got '{other}'"))?;
                    let parse = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("'{v}': {e}"));
                    let (theta0, theta1) = (parse(a)?, parse(b)?);
                    ("fixed".into(), SamplingRegion::FixedTruth { theta0, theta1 }, 4)
                }
            })
        };
        if s == "all" {
            return Ok(RegionArg(vec![one("a")?, one("b")?, one("c")?]));
        }
        Ok(RegionArg(vec![one(s)?]))
    }
}

#[derive(Debug, Clone)]
pub struct SimulateArgs {
    pub design: PathBuf,
    pub region: RegionArg,
    pub reps: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub early_stop: bool,
}

#[derive(Serialize)]
struct ReportDocument<'a> {
    schema_version: u32,
    design: &'a TrialDesign,
    report: &'a OCReport,
}

/// Writes `<label>_report.json`, `<label>_subcdf.csv` and
/// `<label>_scatter.csv` per region; returns the paths written.
pub fn simulate(args: &SimulateArgs) -> Result<Vec<PathBuf>, CliError> {
    if args.reps == 0 {
        return Err(CliError::Validation("--reps must be at least 1".into()));
    }
    let design = load_design(&args.design)?;
    let sim = Simulator::new(design.clone())?;
    fs::create_dir_all(&args.out).map_err(io_err(&args.out))?;
    let mut written = Vec::new();
    for (label, region, stream) in &args.region.0 {
        let report = evaluate(&sim, *region, args.early_stop, args.reps, RngSpec::new(args.seed, *stream))?;
        let doc = ReportDocument {
            schema_version: SCHEMA_VERSION,
            design: &design,
            report: &report,
        };
        let mut json = serde_json::to_string_pretty(&doc).map_err(|e| CliError::Io(e.to_string()))?;
        json.push('\n');
        for (suffix, body) in [
            ("report.json", json),
            ("subcdf.csv", report.subcdf_csv()),
            ("scatter.csv", report.scatter_csv()),
        ] {
            let path = args.out.join(format!("{label}_{suffix}"));
            fs::write(&path, body).map_err(io_err(&path))?;
            written.push(path);
        }
        log::info!(
            "region {label}: efficacy {:.3}, futility {:.3}, inconclusive {:.3}, mean utility {:.2}",
            report.decision_fractions.efficacy,
            report.decision_fractions.futility,
            report.decision_fractions.inconclusive,
            report.conditional_mean_utility.value
        );
    }
    Ok(written)
}

fn describe(out: &mut String, name: &str, event: &str, variant: &str, r: Option<&FalseRate>, reps: usize) {
    match r {
        None => {
            let _ = writeln!(out, "{name}: undefined (no {event} stops in {reps} trials)");
        }
        Some(r) => {
            let _ = writeln!(
                out,
                "{name}: {:.4} (se {:.4}, 95% upper {:.4}) from {} {event} stops in {reps} trials",
                r.frequency.value, r.frequency.std_error, r.upper_95, r.stops
            );
            let _ = writeln!(
                out,
                "{name} posterior average: {:.4} (se {:.4})",
                r.rao_blackwell.value, r.rao_blackwell.std_error
            );
            let _ = writeln!(
                out,
                "{name} {variant}: {:.4} (se {:.4})",
                r.variant.value, r.variant.std_error
            );
        }
    }
}

/// False discovery and false futility estimates as text.
pub fn fdp(design_path: &Path, reps: usize, seed: u64) -> Result<String, CliError> {
    if reps == 0 {
        return Err(CliError::Validation("--reps must be at least 1".into()));
    }
    let design = load_design(design_path)?;
    let rng = RngSpec::new(seed, 0);
    let (fdp, ffp) = if design.prior_e == design.prior_f {
        let report = evaluate(&Simulator::new(design.clone())?, SamplingRegion::Unconditional, false, reps, rng)?;
        (report.fdp, report.ffp)
    } else {
        (
            seqtrial_core::design_eval::estimate_fdp(&design, reps, rng)?,
            seqtrial_core::design_eval::estimate_ffp(&design, reps, rng)?,
        )
    };
    let mut out = format!(
        "eps_e = {}, eps_f = {}, delta = {}, n_max = {}\n",
        design.eps_e, design.eps_f, design.delta, design.n_max
    );
    describe(&mut out, "FDP", "efficacy", "strict (θ1 - θ0 <= 0)", fdp.as_ref(), reps);
    describe(&mut out, "FFP", "futility", "margin (θ1 - θ0 >= delta)", ffp.as_ref(), reps);
    Ok(out)
}

/// Predictive value of continuing from `counts` as a JSON document.
pub fn whatif(
    design_path: &Path,
    counts: Counts,
    seed: u64,
    horizon: Option<u32>,
    reps: Option<u32>,
) -> Result<String, CliError> {
    let design = load_design(design_path)?;
    let sim = Simulator::new(design.clone())?.with_forward(
        horizon.unwrap_or(design.horizon),
        reps.unwrap_or(design.forward_reps),
    )?;
    let data = TrialData::from_counts(counts);
    let w = run_whatif(&sim, &data, seed).map_err(|e| match e {
        crate::session::SessionError::Numeric(m) => CliError::Numeric(m),
        other => CliError::Validation(other.to_string()),
    })?;
    let mut s = serde_json::to_string_pretty(&w).map_err(|e| CliError::Io(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

/// Parses `n0,s0,n1,s1`.
pub fn parse_counts(s: &str) -> Result<Counts, String> {
    let v: Vec<u32> = s
        .split(',')
        .map(|x| x.trim().parse::<u32>().map_err(|e| format!("'{x}': {e}")))
        .collect::<Result<_, _>>()?;
    match v[..] {
        [n0, s0, n1, s1] => Counts::new(n0, s0, n1, s1).map_err(|e| e.to_string()),
        _ => Err(format!("expected n0,s0,n1,s1, got '{s}'")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn regions_parse() {
        assert_eq!(RegionArg::from_str("all").unwrap().0.len(), 3);
        let r = RegionArg::from_str("fixed:0.3,0.5").unwrap();
        assert_eq!(r.0[0].1, SamplingRegion::FixedTruth { theta0: 0.3, theta1: 0.5 });
        assert!(RegionArg::from_str("d").is_err());
        assert!(RegionArg::from_str("fixed:0.3").is_err());
    }

    #[test]
    fn counts_parse() {
        assert_eq!(parse_counts("3,1,2,2").unwrap(), Counts::new(3, 1, 2, 2).unwrap());
        assert!(parse_counts("3,4,2,2").is_err());
        assert!(parse_counts("1,2").is_err());
    }
}
