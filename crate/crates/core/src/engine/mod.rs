//! Deterministic discrete-event execution of a [`TaskSpec`].
//!
//! Each sub-task is one agent. A run fires the agents under one of three
//! scheduling regimes:
//!
//! - **Uncoordinated**: every agent acts at its slot in the schedule with
//!   whatever inputs have arrived (possibly none); a merger joins whatever
//!   the agents send it.
//! - **Causal**: an agent waits until the outputs of all its handoff
//!   predecessors have been delivered (vector-clock gated); merging is the
//!   same join as above.
//! - **Orchestrated**: an orchestrator plans, assigns agents one at a time in
//!   topological order, relays handoffs, trims resource requests to what is
//!   left, applies revisions and reviews the result.
//!
//! Time is virtual (ticks). Message cost is one unit per message, payload or
//! orchestration; it stands in for token spend.

mod agent;
mod clock;
mod evaluate;
mod orchestrator;
mod schedule;
mod sim;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use itertools::Itertools;
use serde::{Deserialize, Serialize};

pub use agent::{AgentAdapter, AgentInput, Phase, ScriptedAgents};
pub use clock::VectorClock;
pub use evaluate::evaluate;
pub use schedule::{Partition, PartitionPlan, Schedule, MAX_RANDOM_DELAY};

use crate::lattice::LatticeValue;
use crate::rational::{self, Rational};
use crate::task::{validate_graph, Diagnostic, TaskSpec};

/// Specs with at most this many output events are enumerated exhaustively.
pub const EXHAUSTIVE_LIMIT: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleMode {
    Uncoordinated,
    Causal,
    Orchestrated,
}

impl ScheduleMode {
    pub const ALL: [ScheduleMode; 3] = [
        ScheduleMode::Uncoordinated,
        ScheduleMode::Causal,
        ScheduleMode::Orchestrated,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScheduleMode::Uncoordinated => "uncoordinated",
            ScheduleMode::Causal => "causal",
            ScheduleMode::Orchestrated => "orchestrated",
        }
    }
}

impl fmt::Display for ScheduleMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ScheduleMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "uncoordinated" => Ok(ScheduleMode::Uncoordinated),
            "causal" => Ok(ScheduleMode::Causal),
            "orchestrated" => Ok(ScheduleMode::Orchestrated),
            other => Err(format!("unknown mode '{other}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    Agent(String),
    Merger,
    Orchestrator,
    /// Broadcast to every agent (plans and reviews).
    Team,
}

impl Node {
    pub(crate) fn agent(&self) -> Option<&str> {
        match self {
            Node::Agent(id) => Some(id),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MessageClass {
    Output,
    Handoff,
    Feedback,
    Supplement,
    Revision,
    Plan,
    Assignment,
    HandoffRelay,
    Review,
}

impl MessageClass {
    pub fn is_coordination(self) -> bool {
        matches!(
            self,
            MessageClass::Plan
                | MessageClass::Assignment
                | MessageClass::HandoffRelay
                | MessageClass::Review
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum TraceEvent {
    Activate {
        tick: u64,
        agent: String,
        clock: VectorClock,
        inputs: Vec<String>,
    },
    Send {
        tick: u64,
        msg: u32,
        from: Node,
        to: Node,
        class: MessageClass,
    },
    Deliver {
        tick: u64,
        msg: u32,
        to: Node,
    },
    Allocate {
        tick: u64,
        agent: String,
        resource: String,
        #[serde(with = "rational")]
        requested: Rational,
        #[serde(with = "rational")]
        granted: Rational,
    },
}

/// One agent's merged contribution plus the producers it referenced.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Section {
    pub value: LatticeValue,
    pub cites: BTreeSet<String>,
}

/// Result of merging all contributions: one section per agent and the
/// resource allocations that were committed.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FinalOutput {
    pub sections: BTreeMap<String, Section>,
    #[serde(with = "allocations_serde")]
    pub allocations: BTreeMap<String, BTreeMap<String, Rational>>,
}

impl FinalOutput {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("final outputs always serialize")
    }

    /// Join of every section, when all sections share one semilattice kind.
    pub fn merged(&self) -> Option<LatticeValue> {
        crate::lattice::merge_all(self.sections.values().map(|s| &s.value)).ok()
    }

    pub fn allocated(&self, resource: &str) -> Rational {
        self.allocations
            .get(resource)
            .map(|m| m.values().sum())
            .unwrap_or_default()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Verdict {
    #[serde(rename = "VALID")]
    Valid,
    #[serde(rename = "INVALID")]
    Invalid,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Valid => "VALID",
            Verdict::Invalid => "INVALID",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunResult {
    pub task_id: String,
    pub mode: ScheduleMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub schedule: Schedule,
    pub final_output: FinalOutput,
    pub verdict: Verdict,
    pub verdict_reason: String,
    pub messages_total: u64,
    pub messages_coordination: u64,
    pub cost_units: u64,
    pub trace: Vec<TraceEvent>,
}

impl RunResult {
    pub fn is_valid(&self) -> bool {
        self.verdict == Verdict::Valid
    }
}

#[derive(Debug, thiserror::Error)]
pub enum EngineError {
    #[error("invalid spec: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    InvalidSpec(Vec<Diagnostic>),
    #[error("subtask '{0}' has no agent script")]
    ScriptMissing(String),
    #[error("schedule does not list every subtask exactly once")]
    BadSchedule,
    #[error("limit and repetitions must be at least 1")]
    ZeroCount,
    #[error("overhead ratio needs at least one subtask")]
    EmptyTask,
}

/// Message and trace bookkeeping shared by the regimes.
#[derive(Debug, Default)]
pub(crate) struct Recorder {
    pub trace: Vec<TraceEvent>,
    pub total: u64,
    pub coordination: u64,
    next_id: u32,
}

impl Recorder {
    pub fn send(&mut self, tick: u64, from: Node, to: Node, class: MessageClass) -> u32 {
        let msg = self.next_id;
        self.next_id += 1;
        self.total += 1;
        if class.is_coordination() {
            self.coordination += 1;
        }
        self.trace.push(TraceEvent::Send {
            tick,
            msg,
            from,
            to,
            class,
        });
        msg
    }

    pub fn deliver(&mut self, tick: u64, msg: u32, to: Node) {
        self.trace.push(TraceEvent::Deliver { tick, msg, to });
    }

    pub fn activate(&mut self, tick: u64, agent: &str, clock: &VectorClock, inputs: &BTreeSet<String>) {
        self.trace.push(TraceEvent::Activate {
            tick,
            agent: agent.to_string(),
            clock: clock.clone(),
            inputs: inputs.iter().cloned().collect(),
        });
    }
}

/// Outcome of a regime before the verdict is attached.
pub(crate) struct Execution {
    pub output: FinalOutput,
    pub merge_error: Option<String>,
    pub recorder: Recorder,
}

fn check_ready(spec: &TaskSpec, agents: &dyn AgentAdapter) -> Result<(), EngineError> {
    let diags = validate_graph(spec);
    if !diags.is_empty() {
        return Err(EngineError::InvalidSpec(diags));
    }
    if let Some(s) = spec.subtasks.iter().find(|s| !agents.has_script(s)) {
        return Err(EngineError::ScriptMissing(s.id.clone()));
    }
    Ok(())
}

/// Runs `spec` under `mode` on an explicit schedule with the given agents.
pub fn run_with(
    spec: &TaskSpec,
    mode: ScheduleMode,
    schedule: Schedule,
    agents: &dyn AgentAdapter,
) -> Result<RunResult, EngineError> {
    check_ready(spec, agents)?;
    let listed: BTreeSet<&str> = schedule.order.iter().map(String::as_str).collect();
    let declared: BTreeSet<&str> = spec.subtasks.iter().map(|s| s.id.as_str()).collect();
    if listed != declared || schedule.order.len() != spec.subtasks.len() {
        return Err(EngineError::BadSchedule);
    }
    let exec = match mode {
        ScheduleMode::Orchestrated => orchestrator::execute(spec, &schedule, agents)?,
        _ => sim::execute(spec, mode, &schedule, agents)?,
    };
    let (verdict, verdict_reason) = match exec.merge_error {
        Some(reason) => (Verdict::Invalid, reason),
        None => evaluate(spec, &exec.output),
    };
    let rec = exec.recorder;
    Ok(RunResult {
        task_id: spec.id.clone(),
        mode,
        seed: None,
        schedule,
        final_output: exec.output,
        verdict,
        verdict_reason,
        messages_total: rec.total,
        messages_coordination: rec.coordination,
        cost_units: rec.total,
        trace: rec.trace,
    })
}

pub fn run_schedule(
    spec: &TaskSpec,
    mode: ScheduleMode,
    schedule: Schedule,
) -> Result<RunResult, EngineError> {
    run_with(spec, mode, schedule, &ScriptedAgents)
}

/// Runs `spec` under `mode` on the schedule drawn from `seed`.
pub fn run(spec: &TaskSpec, mode: ScheduleMode, seed: u64) -> Result<RunResult, EngineError> {
    let mut result = run_schedule(spec, mode, Schedule::from_seed(spec, seed))?;
    result.seed = Some(seed);
    Ok(result)
}

/// As [`run`], with the partitions of `plan` applied.
pub fn inject_partition(
    spec: &TaskSpec,
    mode: ScheduleMode,
    plan: &PartitionPlan,
    seed: u64,
) -> Result<RunResult, EngineError> {
    let schedule = Schedule::from_seed(spec, seed).with_partitions(plan);
    let mut result = run_schedule(spec, mode, schedule)?;
    result.seed = Some(seed);
    Ok(result)
}

/// True when [`enumerate_runs`] covers every interleaving of `spec`.
pub fn is_exhaustive(spec: &TaskSpec) -> bool {
    spec.subtasks.len() <= EXHAUSTIVE_LIMIT
}

/// Every ordering of the agents' output events (no delays) when the spec is
/// small enough; otherwise `limit` seeded schedules.
pub fn enumerate_runs(
    spec: &TaskSpec,
    mode: ScheduleMode,
    limit: usize,
) -> Result<Vec<RunResult>, EngineError> {
    enumerate_runs_with(spec, mode, limit, None)
}

/// As [`enumerate_runs`], applying `plan` to every schedule.
pub fn enumerate_runs_with(
    spec: &TaskSpec,
    mode: ScheduleMode,
    limit: usize,
    plan: Option<&PartitionPlan>,
) -> Result<Vec<RunResult>, EngineError> {
    if limit == 0 {
        return Err(EngineError::ZeroCount);
    }
    let with_plan = |s: Schedule| match plan {
        Some(p) => s.with_partitions(p),
        None => s,
    };
    if is_exhaustive(spec) {
        let ids: Vec<&str> = spec.subtasks.iter().map(|s| s.id.as_str()).collect();
        ids.iter()
            .copied()
            .permutations(ids.len())
            .map(|order| run_schedule(spec, mode, with_plan(Schedule::in_order(order))))
            .collect()
    } else {
        (0..limit as u64)
            .map(|seed| {
                let mut r = run_schedule(spec, mode, with_plan(Schedule::from_seed(spec, seed)))?;
                r.seed = Some(seed);
                Ok(r)
            })
            .collect()
    }
}

/// Mean orchestrated cost over mean uncoordinated cost.
pub fn measure_c(spec: &TaskSpec, repetitions: usize) -> Result<f64, EngineError> {
    if repetitions == 0 {
        return Err(EngineError::ZeroCount);
    }
    if spec.subtasks.is_empty() {
        return Err(EngineError::EmptyTask);
    }
    let mean = |mode| -> Result<f64, EngineError> {
        let mut sum = 0u64;
        for seed in 0..repetitions as u64 {
            sum += run(spec, mode, seed)?.cost_units;
        }
        Ok(sum as f64 / repetitions as f64)
    };
    Ok(mean(ScheduleMode::Orchestrated)? / mean(ScheduleMode::Uncoordinated)?)
}

/// Validity and cost over a set of runs in one mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeStats {
    pub mode: ScheduleMode,
    pub runs: usize,
    pub valid: usize,
    pub validity_rate: f64,
    pub mean_cost: f64,
    pub exhaustive: bool,
}

impl ModeStats {
    pub fn from_runs(mode: ScheduleMode, runs: &[RunResult], exhaustive: bool) -> Self {
        let valid = runs.iter().filter(|r| r.is_valid()).count();
        let n = runs.len().max(1) as f64;
        ModeStats {
            mode,
            runs: runs.len(),
            valid,
            validity_rate: valid as f64 / n,
            mean_cost: runs.iter().map(|r| r.cost_units as f64).sum::<f64>() / n,
            exhaustive,
        }
    }

    pub fn all_valid(&self) -> bool {
        self.valid == self.runs
    }

    pub fn none_valid(&self) -> bool {
        self.valid == 0
    }
}

/// Per-mode statistics over [`enumerate_runs`].
pub fn boundary(spec: &TaskSpec, limit: usize) -> Result<Vec<ModeStats>, EngineError> {
    ScheduleMode::ALL
        .iter()
        .map(|&mode| {
            let runs = enumerate_runs(spec, mode, limit)?;
            Ok(ModeStats::from_runs(mode, &runs, is_exhaustive(spec)))
        })
        .collect()
}

mod allocations_serde {
    use std::collections::BTreeMap;

    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::rational::Rational;

    #[derive(Serialize, Deserialize)]
    struct Inner(#[serde(with = "crate::rational::map_values")] BTreeMap<String, Rational>);

    pub fn serialize<S: Serializer>(
        v: &BTreeMap<String, BTreeMap<String, Rational>>,
        s: S,
    ) -> Result<S::Ok, S::Error> {
        let wrapped: BTreeMap<&String, Inner> =
            v.iter().map(|(k, m)| (k, Inner(m.clone()))).collect();
        wrapped.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> Result<BTreeMap<String, BTreeMap<String, Rational>>, D::Error> {
        let raw = BTreeMap::<String, Inner>::deserialize(d)?;
        Ok(raw.into_iter().map(|(k, Inner(m))| (k, m)).collect())
    }
}
