use std::collections::BTreeSet;

use crate::lattice::{JoinKind, LatticeValue, StampedEntry, MAX_DEPTH};
use crate::rational::Rational;
use crate::task::SubTask;

use super::EngineError;

/// Which contribution an agent is asked for.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Phase {
    /// First, provisional output of a retractive agent.
    Draft,
    /// The agent's output proper (for retractive agents, the revision that
    /// supersedes the draft).
    Final,
    /// Additional content folded in after additive feedback from `from`.
    Supplement { from: String },
    /// Replacement output forced by retractive feedback from `from`.
    Revision { from: String },
}

/// Everything an agent can see when it acts.
#[derive(Debug, Clone)]
pub struct AgentInput<'a> {
    pub subtask: &'a SubTask,
    pub kind: JoinKind,
    /// Handoff producers whose output had arrived.
    pub inputs: &'a BTreeSet<String>,
    /// Causal stamp of the activation.
    pub stamp: u64,
    pub phase: Phase,
}

/// Produces agent contributions. The bundled implementation is
/// [`ScriptedAgents`]; other adapters (e.g. model-backed agents) plug in here
/// provided they are deterministic in their input.
pub trait AgentAdapter {
    fn has_script(&self, subtask: &SubTask) -> bool;

    fn contribute(&self, input: &AgentInput<'_>) -> Result<LatticeValue, EngineError>;
}

/// Agents driven by the `script` block of each sub-task.
#[derive(Debug, Clone, Copy, Default)]
pub struct ScriptedAgents;

impl AgentAdapter for ScriptedAgents {
    fn has_script(&self, subtask: &SubTask) -> bool {
        subtask.script.is_some()
    }

    fn contribute(&self, input: &AgentInput<'_>) -> Result<LatticeValue, EngineError> {
        let sub = input.subtask;
        let script = sub
            .script
            .as_ref()
            .ok_or_else(|| EngineError::ScriptMissing(sub.id.clone()))?;
        let base: Vec<String> = if script.items.is_empty() {
            vec![sub.id.clone()]
        } else {
            script.items.clone()
        };
        let items: Vec<String> = match &input.phase {
            Phase::Final => base,
            Phase::Draft => base.iter().map(|i| format!("draft:{i}")).collect(),
            Phase::Supplement { from } => vec![format!("feedback:{from}")],
            Phase::Revision { from } => base
                .into_iter()
                .chain([format!("revised-after:{from}")])
                .collect(),
        };
        let register = script.value.unwrap_or_else(|| Rational::from_integer(1));
        Ok(build(&input.kind, &items, register, input.stamp, &sub.id, 0))
    }
}

fn build(
    kind: &JoinKind,
    items: &[String],
    register: Rational,
    stamp: u64,
    origin: &str,
    depth: usize,
) -> LatticeValue {
    match kind {
        JoinKind::SetUnion => LatticeValue::set(items.iter().cloned()),
        JoinKind::MaxRegister => LatticeValue::MaxRegister(register),
        JoinKind::MinRegister => LatticeValue::MinRegister(register),
        JoinKind::GrowCounter => LatticeValue::GrowCounter(items.len() as u64),
        JoinKind::CausalAppend => LatticeValue::CausalAppend(
            items
                .iter()
                .map(|item| StampedEntry {
                    stamp,
                    origin: origin.to_string(),
                    item: item.clone(),
                })
                .collect(),
        ),
        JoinKind::ExclusiveAssign => {
            LatticeValue::ExclusiveAssign(items.first().cloned().unwrap_or_else(|| origin.into()))
        }
        JoinKind::MapOfJoins(inner) => LatticeValue::MapOfJoins {
            inner: (**inner).clone(),
            entries: if depth >= MAX_DEPTH {
                Default::default()
            } else {
                items
                    .iter()
                    .map(|item| {
                        let leaf = build(inner, std::slice::from_ref(item), register, stamp, origin, depth + 1);
                        (item.clone(), leaf)
                    })
                    .collect()
            },
        },
    }
}
