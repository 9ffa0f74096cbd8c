//! Trace files: one JSON record per line, tagged by `record`.
//!
//! The first line is a `header` carrying the schema version and the run
//! configuration, followed by `tick` and `event` records in time order and a
//! closing `end` record.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fsm::FsmState;
use crate::sim::run::SimConfig;
use crate::sim::scenario::Scenario;
use crate::sim::validate::ForceStatus;

pub const TRACE_SCHEMA: &str = "conewalk.trace/1";

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub fsm: f64,
    /// Tubes, their halfspaces and their reduced cones.
    pub geometry: f64,
    pub qp: f64,
    pub validate: f64,
    pub total: f64,
}

impl Timing {
    pub fn stage_sum(&self) -> f64 {
        self.fsm + self.geometry + self.qp + self.validate
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QpStatus {
    Optimal,
    /// QP infeasible; the decayed previous control was applied.
    Fallback,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub schema: String,
    pub scenario: String,
    pub seed: u64,
    pub footsteps: usize,
    pub friction: f64,
    pub config: SimConfig,
}

impl TraceHeader {
    pub fn new(s: &Scenario, cfg: &SimConfig) -> Self {
        Self {
            schema: TRACE_SCHEMA.into(),
            scenario: s.name.clone(),
            seed: s.seed,
            footsteps: s.footsteps.len(),
            friction: s.friction,
            config: cfg.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TickRecord {
    pub tick: usize,
    pub t: f64,
    pub p: [f64; 3],
    pub v: [f64; 3],
    pub u: [f64; 3],
    pub phase: String,
    /// Footstep indices in contact.
    pub feet: Vec<usize>,
    /// Timing rule of the preview inputs (1-3, 4 for the last phase).
    pub case: u8,
    pub t_rem: f64,
    pub qp_status: QpStatus,
    pub force_lp_status: ForceStatus,
    /// Normalised slack of `u` in the acceleration cone at `p`.
    pub min_cone_slack: f64,
    pub kkt_residual: f64,
    pub raw_cone_rows: usize,
    pub cone_rows: usize,
    pub timing_ms: Timing,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    PhaseSwitch,
    WaitExtension,
    QpFallback,
    TubeShrink,
    Failure,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub tick: usize,
    pub t: f64,
    pub phase: String,
    pub kind: EventKind,
    pub detail: String,
}

impl EventRecord {
    pub fn new(tick: usize, t: f64, fsm: &FsmState, kind: EventKind, detail: String) -> Self {
        Self {
            tick,
            t,
            phase: fsm.phase.to_string(),
            kind,
            detail,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureCause {
    ForceLpInfeasible,
    QpInfeasible,
    Timeout,
}

impl fmt::Display for FailureCause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FailureCause::ForceLpInfeasible => "no feasible contact forces",
            FailureCause::QpInfeasible => "preview QP infeasible for too long",
            FailureCause::Timeout => "did not reach the final target in time",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Outcome {
    Completed { tick: usize },
    Failed { tick: usize, cause: FailureCause },
}

impl Outcome {
    pub fn is_completed(&self) -> bool {
        matches!(self, Outcome::Completed { .. })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EndRecord {
    pub outcome: Outcome,
    pub ticks: usize,
    pub duration: f64,
    pub extensions: usize,
    pub fallbacks: usize,
    pub infeasible_ticks: usize,
    pub final_error: f64,
    pub final_speed: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum Record {
    Header(TraceHeader),
    Tick(TickRecord),
    Event(EventRecord),
    End(EndRecord),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trace {
    pub header: TraceHeader,
    pub ticks: Vec<TickRecord>,
    pub events: Vec<EventRecord>,
    pub end: EndRecord,
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("cannot read trace: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("malformed trace: {0}")]
    Structure(String),
}

impl Trace {
    pub fn count(&self, kind: EventKind) -> usize {
        self.events.iter().filter(|e| e.kind == kind).count()
    }

    /// Records in time order, events after the tick they happened on.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        let mut push = |r: &Record| {
            out.push_str(&serde_json::to_string(r).expect("trace record serializes"));
            out.push('\n');
        };
        push(&Record::Header(self.header.clone()));
        let mut ev = self.events.iter().peekable();
        for t in &self.ticks {
            while let Some(e) = ev.next_if(|e| e.tick < t.tick) {
                push(&Record::Event(e.clone()));
            }
            push(&Record::Tick(t.clone()));
            while let Some(e) = ev.next_if(|e| e.tick == t.tick) {
                push(&Record::Event(e.clone()));
            }
        }
        for e in ev {
            push(&Record::Event(e.clone()));
        }
        push(&Record::End(self.end.clone()));
        out
    }

    pub fn save(&self, path: &Path) -> Result<(), TraceError> {
        std::fs::write(path, self.to_jsonl())?;
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Trace, TraceError> {
        let mut header = None;
        let mut ticks = Vec::new();
        let mut events = Vec::new();
        let mut end = None;
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let rec: Record = serde_json::from_str(line).map_err(|e| TraceError::Parse {
                line: i + 1,
                msg: e.to_string(),
            })?;
            match rec {
                Record::Header(h) if header.is_none() && i == 0 => header = Some(h),
                Record::Header(_) => return Err(TraceError::Structure(format!("unexpected header on line {}", i + 1))),
                _ if header.is_none() => return Err(TraceError::Structure("trace must start with a header".into())),
                _ if end.is_some() => return Err(TraceError::Structure(format!("record after end on line {}", i + 1))),
                Record::Tick(t) => ticks.push(t),
                Record::Event(e) => events.push(e),
                Record::End(e) => end = Some(e),
            }
        }
        let header = header.ok_or_else(|| TraceError::Structure("empty trace".into()))?;
        if header.schema != TRACE_SCHEMA {
            return Err(TraceError::Structure(format!("unknown schema {}", header.schema)));
        }
        let end = end.ok_or_else(|| TraceError::Structure("missing end record".into()))?;
        Ok(Trace {
            header,
            ticks,
            events,
            end,
        })
    }

    pub fn load(path: &Path) -> Result<Trace, TraceError> {
        Trace::parse(&std::fs::read_to_string(path)?)
    }
}

/// Findings of a trace audit.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TraceAudit {
    pub problems: Vec<String>,
    pub infeasible_ticks: usize,
    pub worst_timing_gap: f64,
    pub max_kkt: f64,
}

impl TraceAudit {
    pub fn is_clean(&self) -> bool {
        self.problems.is_empty()
    }
}

/// Checks monotone time, force feasibility on every tick, the stage timing
/// breakdown against the total, and consistency of the end record.
pub fn audit_trace(t: &Trace) -> TraceAudit {
    let mut a = TraceAudit::default();
    for w in t.ticks.windows(2) {
        if !(w[1].t > w[0].t) || w[1].tick != w[0].tick + 1 {
            a.problems.push(format!("time not increasing at tick {}", w[1].tick));
        }
    }
    for k in &t.ticks {
        if k.force_lp_status != ForceStatus::Feasible {
            a.infeasible_ticks += 1;
        }
        a.max_kkt = a.max_kkt.max(k.kkt_residual);
        let tm = &k.timing_ms;
        if tm.total > 0.0 {
            let gap = (tm.stage_sum() - tm.total).abs() / tm.total;
            a.worst_timing_gap = a.worst_timing_gap.max(gap);
        }
    }
    if a.infeasible_ticks > 0 {
        a.problems.push(format!("{} ticks without feasible contact forces", a.infeasible_ticks));
    }
    if a.worst_timing_gap > 0.1 {
        a.problems.push(format!("stage timings off the total by {:.1}%", 100.0 * a.worst_timing_gap));
    }
    if t.end.ticks != t.ticks.len() {
        a.problems.push(format!("end record claims {} ticks, trace has {}", t.end.ticks, t.ticks.len()));
    }
    if !t.end.outcome.is_completed() {
        a.problems.push(format!("run did not complete: {:?}", t.end.outcome));
    }
    a
}
