//! Orchestrated regime: plan, serialized assignment in topological order,
//! relayed handoffs, first-fit resource trimming, revisions applied by
//! replacement, final review.

use std::collections::{BTreeMap, BTreeSet};

use num_traits::Zero;

use crate::lattice::LatticeValue;
use crate::rational::Rational;
use crate::task::{Emission, TaskSpec};

use super::agent::{AgentAdapter, AgentInput, Phase};
use super::{
    EngineError, Execution, FinalOutput, MessageClass, Node, Recorder, Schedule, Section,
    TraceEvent, VectorClock,
};

struct Orchestrator<'a> {
    spec: &'a TaskSpec,
    schedule: &'a Schedule,
    agents: &'a dyn AgentAdapter,
    rec: Recorder,
    now: u64,
    clocks: BTreeMap<String, VectorClock>,
    output: FinalOutput,
    remaining: BTreeMap<String, Rational>,
}

pub(crate) fn execute(
    spec: &TaskSpec,
    schedule: &Schedule,
    agents: &dyn AgentAdapter,
) -> Result<Execution, EngineError> {
    let priority: Vec<&str> = schedule.order.iter().map(String::as_str).collect();
    let order: Vec<String> = spec
        .topological_order_by(&priority)
        .expect("validated specs have acyclic handoffs")
        .into_iter()
        .map(String::from)
        .collect();
    let mut orch = Orchestrator {
        spec,
        schedule,
        agents,
        rec: Recorder::default(),
        now: 0,
        clocks: BTreeMap::new(),
        output: FinalOutput::default(),
        remaining: spec
            .resources
            .iter()
            .filter(|r| r.shared)
            .map(|r| (r.id.clone(), r.capacity))
            .collect(),
    };

    orch.message(Node::Orchestrator, Node::Team, MessageClass::Plan);
    for id in &order {
        orch.assign(id, true)?;
        for fb in spec.feedbacks.iter().filter(|f| &f.from == id) {
            orch.message(Node::Agent(id.clone()), Node::Orchestrator, MessageClass::Feedback);
            orch.message(Node::Orchestrator, Node::Agent(fb.to.clone()), MessageClass::HandoffRelay);
            orch.feedback(&fb.to, id, fb.kind)?;
            if fb.kind == Emission::Retractive {
                // everything between the revised agent and the sender saw the
                // superseded output and is re-run
                for node in &order {
                    if spec.reaches(&fb.to, node) && (node == id || spec.reaches(node, id)) {
                        orch.assign(node, false)?;
                    }
                }
            }
        }
    }
    orch.message(Node::Orchestrator, Node::Team, MessageClass::Review);

    Ok(Execution {
        output: orch.output,
        merge_error: None,
        recorder: orch.rec,
    })
}

impl Orchestrator<'_> {
    /// Sends one message and waits for its delivery.
    fn message(&mut self, from: Node, to: Node, class: MessageClass) {
        let sender = from.agent().map(String::from);
        let delay = sender.as_deref().map_or(0, |s| self.schedule.delay(s));
        let at = self
            .schedule
            .delivery_tick(sender.as_deref(), to.agent(), self.now, delay);
        let msg = self.rec.send(self.now, from, to.clone(), class);
        self.rec.deliver(at, msg, to);
        self.now = at;
    }

    fn contribute(&self, id: &str, stamp: u64, inputs: &BTreeSet<String>, phase: Phase) -> Result<LatticeValue, EngineError> {
        let sub = self.spec.subtask(id).expect("known agent");
        self.agents.contribute(&AgentInput {
            subtask: sub,
            kind: sub.effective_output(),
            inputs,
            stamp,
            phase,
        })
    }

    /// Assigns `id`, relays its inputs, collects its output. Resources are
    /// granted on the first assignment only.
    fn assign(&mut self, id: &str, first: bool) -> Result<(), EngineError> {
        let spec = self.spec;
        let sub = spec.subtask(id).expect("known agent");
        self.message(Node::Orchestrator, Node::Agent(id.into()), MessageClass::Assignment);
        let preds = spec.predecessors(id);
        let mut clock = self.clocks.get(id).cloned().unwrap_or_default();
        for p in &preds {
            self.message(Node::Orchestrator, Node::Agent(id.into()), MessageClass::HandoffRelay);
            if let Some(c) = self.clocks.get(*p) {
                clock.merge(c);
            }
        }
        clock.increment(id);
        let inputs: BTreeSet<String> = preds.iter().map(|p| p.to_string()).collect();
        self.rec.activate(self.now, id, &clock, &inputs);
        let stamp = clock.total();
        self.clocks.insert(id.to_string(), clock);

        let value = self.contribute(id, stamp, &inputs, Phase::Final)?;
        if sub.effective_emission() == Emission::Retractive {
            // draft first; the revision replaces it
            self.contribute(id, stamp, &inputs, Phase::Draft)?;
            self.message(Node::Agent(id.into()), Node::Orchestrator, MessageClass::Output);
            self.message(Node::Agent(id.into()), Node::Orchestrator, MessageClass::Revision);
        } else {
            self.message(Node::Agent(id.into()), Node::Orchestrator, MessageClass::Output);
        }
        self.output.sections.insert(
            id.to_string(),
            Section {
                value,
                cites: inputs,
            },
        );

        if first {
            for d in &sub.demands {
                let granted = match self.remaining.get_mut(&d.resource) {
                    Some(left) => {
                        let g = d.amount.min(*left).max(Rational::zero());
                        *left -= g;
                        g
                    }
                    // unshared: each demand already fits its own capacity
                    None => d.amount,
                };
                self.rec.trace.push(TraceEvent::Allocate {
                    tick: self.now,
                    agent: id.to_string(),
                    resource: d.resource.clone(),
                    requested: d.amount,
                    granted,
                });
                *self
                    .output
                    .allocations
                    .entry(d.resource.clone())
                    .or_default()
                    .entry(id.to_string())
                    .or_default() += granted;
            }
        }
        Ok(())
    }

    /// Upstream agent `id` incorporates feedback from `from`.
    fn feedback(&mut self, id: &str, from: &str, kind: Emission) -> Result<(), EngineError> {
        let mut clock = self.clocks.get(id).cloned().unwrap_or_default();
        if let Some(c) = self.clocks.get(from) {
            clock.merge(c);
        }
        clock.increment(id);
        let stamp = clock.total();
        self.clocks.insert(id.to_string(), clock);
        let phase = match kind {
            Emission::Additive => Phase::Supplement { from: from.into() },
            Emission::Retractive => Phase::Revision { from: from.into() },
        };
        let value = self.contribute(id, stamp, &BTreeSet::new(), phase)?;
        let class = match kind {
            Emission::Additive => MessageClass::Supplement,
            Emission::Retractive => MessageClass::Revision,
        };
        self.message(Node::Agent(id.into()), Node::Orchestrator, class);
        let section = self
            .output
            .sections
            .get_mut(id)
            .expect("upstream agents run before their feedback senders");
        section.value = match kind {
            Emission::Retractive => value,
            Emission::Additive => match section.value.join(&value) {
                Ok(joined) => joined,
                // no join for this kind: the orchestrator keeps the newer value
                Err(_) => value,
            },
        };
        Ok(())
    }
}
