//! A monitored trial: an append-only outcome log folded into the current
//! posterior state and stopping status.

use serde::{Deserialize, Serialize};
use seqtrial_core::mc_engine::RngSpec;
use seqtrial_core::posterior::{Arm, Outcome};
use seqtrial_core::trial_engine::{
    block_assignment, Counts, Decision, EarlyStop, InterimDecision, InterimRecord, PredictiveUtility, Simulator,
    TrialData,
};

use crate::document::{DesignDocument, SCHEMA_VERSION};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutcomeEvent {
    /// Must equal the session's `next_seq`.
    pub seq: u64,
    /// 0-based arrival index; checked against the block schedule when the
    /// session assigns arms.
    #[serde(default)]
    pub patient_index: Option<u64>,
    pub arm: Arm,
    pub outcome: Outcome,
    #[serde(default)]
    pub recorded_by: String,
    /// Milliseconds since the Unix epoch; filled in by the server if absent.
    #[serde(default)]
    pub timestamp_ms: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", content = "decision", rename_all = "snake_case")]
pub enum Status {
    Open,
    Stopped(Decision),
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SessionError {
    #[error("{0}")]
    Conflict(String),
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
    #[error("numeric failure: {0}")]
    Numeric(String),
}

impl From<seqtrial_core::Error> for SessionError {
    fn from(e: seqtrial_core::Error) -> Self {
        match e {
            seqtrial_core::Error::Config(m) | seqtrial_core::Error::Usage(m) => SessionError::Invalid {
                path: String::new(),
                message: m,
            },
            other => SessionError::Numeric(other.to_string()),
        }
    }
}

/// Everything needed to rebuild a session besides its outcome events.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionHeader {
    pub session_id: String,
    pub document: DesignDocument,
    /// Seed of the server-side block schedule, if the server assigns arms.
    #[serde(default)]
    pub assignment_seed: Option<u64>,
}

#[derive(Debug, Clone)]
pub struct Session {
    header: SessionHeader,
    sim: Simulator,
    events: Vec<OutcomeEvent>,
    data: TrialData,
    status: Status,
    trajectory: Vec<InterimRecord>,
    both_triggered: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateSummary {
    pub session_id: String,
    pub schema_version: u32,
    #[serde(flatten)]
    pub status: Status,
    /// `continue` while open, otherwise the terminal decision.
    pub current_decision: String,
    pub n: u32,
    pub counts: Counts,
    pub tail_efficacy: f64,
    pub tail_futility: f64,
    pub eps_e: f64,
    pub eps_f: f64,
    pub delta: f64,
    pub n_max: u32,
    /// Whether `n` is an analysis point of the design.
    pub at_interim: bool,
    pub both_triggered: bool,
    pub next_seq: u64,
    pub trajectory: Vec<InterimRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub patient_index: u64,
    pub arm: Arm,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WhatIf {
    #[serde(flatten)]
    pub predictive: PredictiveUtility,
    pub verdict: EarlyStop,
    pub seed: u64,
    pub horizon: u32,
    pub forward_reps: u32,
    pub n: u32,
    pub eps_e: f64,
    pub eps_f: f64,
    pub delta: f64,
}

impl Session {
    pub fn create(header: SessionHeader) -> Result<Self, SessionError> {
        crate::document::check_document(&header.document, None).map_err(|e| SessionError::Invalid {
            path: e.path,
            message: e.message,
        })?;
        let sim = Simulator::new(header.document.design.clone())?;
        Ok(Self {
            header,
            sim,
            events: Vec::new(),
            data: TrialData::default(),
            status: Status::Open,
            trajectory: Vec::new(),
            both_triggered: false,
        })
    }

    /// Folds a recorded log, failing on the first rejected event.
    pub fn replay(header: SessionHeader, events: &[OutcomeEvent]) -> Result<Self, SessionError> {
        let mut s = Self::create(header)?;
        for e in events {
            s.apply(e.clone())?;
        }
        Ok(s)
    }

    pub fn id(&self) -> &str {
        &self.header.session_id
    }

    pub fn header(&self) -> &SessionHeader {
        &self.header
    }

    pub fn simulator(&self) -> &Simulator {
        &self.sim
    }

    pub fn events(&self) -> &[OutcomeEvent] {
        &self.events
    }

    pub fn status(&self) -> Status {
        self.status
    }

    pub fn data(&self) -> &TrialData {
        &self.data
    }

    pub fn next_seq(&self) -> u64 {
        self.events.len() as u64 + 1
    }

    /// Arm for the next patient under the server-side schedule.
    pub fn next_assignment(&self) -> Option<Assignment> {
        let seed = self.header.assignment_seed?;
        let patient_index = self.events.len() as u64;
        Some(Assignment {
            patient_index,
            arm: block_assignment(RngSpec::new(seed, 0), patient_index),
        })
    }

    /// Checks `event` against the log without applying it.
    pub fn check(&self, event: &OutcomeEvent) -> Result<(), SessionError> {
        if let Status::Stopped(d) = self.status {
            return Err(SessionError::Conflict(format!(
                "session stopped with decision {}; no further outcomes accepted",
                d.as_str()
            )));
        }
        if event.seq != self.next_seq() {
            return Err(SessionError::Conflict(format!(
                "expected seq {}, got {} (duplicate or out of order)",
                self.next_seq(),
                event.seq
            )));
        }
        let index = self.events.len() as u64;
        if let Some(p) = event.patient_index {
            if p != index {
                return Err(SessionError::Invalid {
                    path: "patient_index".into(),
                    message: format!("expected patient index {index}, got {p}"),
                });
            }
        }
        if let Some(a) = self.next_assignment() {
            if a.arm != event.arm {
                return Err(SessionError::Invalid {
                    path: "arm".into(),
                    message: format!("patient {index} is assigned to the {:?} arm", a.arm).to_lowercase(),
                });
            }
        }
        Ok(())
    }

    pub fn apply(&mut self, event: OutcomeEvent) -> Result<(), SessionError> {
        self.check(&event)?;
        let mut data = self.data;
        data.observe(event.arm, event.outcome);
        let n = data.n();
        let design = self.sim.design();
        let mut status = Status::Open;
        let mut record = None;
        let mut both = false;
        if design.is_interim(n) {
            let interim = self.sim.interim_decision(&data)?;
            record = Some(InterimRecord {
                n,
                tail_efficacy: interim.tail_efficacy,
                tail_futility: interim.tail_futility,
            });
            both = interim.both_triggered;
            if let InterimDecision::Stop(d) = interim.decision {
                status = Status::Stopped(d);
            }
        }
        // commit only after every fallible step
        self.data = data;
        self.status = status;
        self.both_triggered = both;
        self.trajectory.extend(record);
        self.events.push(event);
        Ok(())
    }

    pub fn state(&self) -> Result<StateSummary, SessionError> {
        let design = self.sim.design();
        let tails = self.sim.engine().tails(self.data.counts)?;
        Ok(StateSummary {
            session_id: self.header.session_id.clone(),
            schema_version: SCHEMA_VERSION,
            status: self.status,
            current_decision: match self.status {
                Status::Open => "continue".into(),
                Status::Stopped(d) => d.as_str().into(),
            },
            n: self.data.n(),
            counts: self.data.counts,
            tail_efficacy: tails.efficacy,
            tail_futility: tails.futility,
            eps_e: design.eps_e,
            eps_f: design.eps_f,
            delta: design.delta,
            n_max: design.n_max,
            at_interim: design.is_interim(self.data.n()),
            both_triggered: self.both_triggered,
            next_seq: self.next_seq(),
            trajectory: self.trajectory.clone(),
        })
    }

    /// A simulator for a what-if query; shares this session's caches.
    pub fn whatif_simulator(&self, horizon: Option<u32>, forward_reps: Option<u32>) -> Result<Simulator, SessionError> {
        let d = self.sim.design();
        Ok(self
            .sim
            .with_forward(horizon.unwrap_or(d.horizon), forward_reps.unwrap_or(d.forward_reps))?)
    }
}

/// Runs the predictive check on a snapshot; never touches session state.
pub fn run_whatif(sim: &Simulator, data: &TrialData, seed: u64) -> Result<WhatIf, SessionError> {
    let (verdict, predictive) = sim.early_stop_check(data, RngSpec::new(seed, 0))?;
    let d = sim.design();
    Ok(WhatIf {
        predictive,
        verdict,
        seed,
        horizon: d.horizon,
        forward_reps: d.forward_reps,
        n: data.n(),
        eps_e: d.eps_e,
        eps_f: d.eps_f,
        delta: d.delta,
    })
}
