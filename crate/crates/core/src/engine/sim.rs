//! Event loop for the uncoordinated and causal regimes.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

use crate::lattice::LatticeValue;
use crate::rational::Rational;
use crate::task::{Emission, TaskSpec};

use super::agent::{AgentAdapter, AgentInput, Phase};
use super::{
    EngineError, Execution, FinalOutput, MessageClass, Node, Recorder, Schedule, ScheduleMode,
    Section, VectorClock,
};

#[derive(Debug, Clone)]
struct Payload {
    from: String,
    class: MessageClass,
    value: Option<LatticeValue>,
    clock: VectorClock,
    cites: BTreeSet<String>,
    demands: Vec<(String, Rational)>,
    feedback: Option<Emission>,
}

impl Payload {
    fn new(from: &str, class: MessageClass, clock: &VectorClock) -> Self {
        Payload {
            from: from.to_string(),
            class,
            value: None,
            clock: clock.clone(),
            cites: BTreeSet::new(),
            demands: Vec::new(),
            feedback: None,
        }
    }
}

struct InFlight {
    msg: u32,
    to: Node,
    payload: Payload,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum Event {
    Deliver(usize),
    Slot(String),
}

impl Event {
    /// Deliveries at a tick are processed before activations at that tick.
    fn rank(&self) -> u8 {
        match self {
            Event::Deliver(_) => 0,
            Event::Slot(_) => 1,
        }
    }
}

#[derive(Default)]
struct AgentState {
    slot_reached: bool,
    activated: bool,
    clock: VectorClock,
    received: BTreeMap<String, VectorClock>,
    pending_feedback: Vec<(String, Emission, VectorClock)>,
}

#[derive(Default)]
struct Merger {
    output: FinalOutput,
    error: Option<String>,
}

impl Merger {
    fn fail(&mut self, reason: String) {
        self.error.get_or_insert(reason);
    }

    fn absorb(&mut self, p: Payload) {
        for (resource, amount) in &p.demands {
            *self
                .output
                .allocations
                .entry(resource.clone())
                .or_default()
                .entry(p.from.clone())
                .or_default() += amount;
        }
        let Some(value) = p.value else { return };
        if p.class == MessageClass::Revision {
            self.fail(format!(
                "subtask '{}': revision retracts earlier output; a join cannot apply it",
                p.from
            ));
            return;
        }
        let kind = value.kind();
        if !kind.is_semilattice() {
            self.fail(format!(
                "subtask '{}': {kind} output has no join; exclusive assignment needs arbitration",
                p.from
            ));
            return;
        }
        match self.output.sections.get_mut(&p.from) {
            Some(section) => match section.value.join(&value) {
                Ok(joined) => {
                    section.value = joined;
                    section.cites.extend(p.cites);
                }
                Err(e) => self.fail(format!("subtask '{}': {e}", p.from)),
            },
            None => {
                self.output.sections.insert(
                    p.from.clone(),
                    Section {
                        value,
                        cites: p.cites,
                    },
                );
            }
        }
    }
}

struct Sim<'a> {
    spec: &'a TaskSpec,
    mode: ScheduleMode,
    schedule: &'a Schedule,
    agents: &'a dyn AgentAdapter,
    rec: Recorder,
    queue: BinaryHeap<Reverse<(u64, u8, u64, Event)>>,
    seq: u64,
    inflight: Vec<InFlight>,
    states: BTreeMap<String, AgentState>,
    merger: Merger,
}

pub(crate) fn execute(
    spec: &TaskSpec,
    mode: ScheduleMode,
    schedule: &Schedule,
    agents: &dyn AgentAdapter,
) -> Result<Execution, EngineError> {
    let mut sim = Sim {
        spec,
        mode,
        schedule,
        agents,
        rec: Recorder::default(),
        queue: BinaryHeap::new(),
        seq: 0,
        inflight: Vec::new(),
        states: spec
            .subtasks
            .iter()
            .map(|s| (s.id.clone(), AgentState::default()))
            .collect(),
        merger: Merger::default(),
    };
    for (slot, id) in schedule.order.iter().enumerate() {
        sim.push(slot as u64, Event::Slot(id.clone()));
    }
    while let Some(Reverse((tick, _, _, event))) = sim.queue.pop() {
        match event {
            Event::Deliver(idx) => sim.deliver(tick, idx)?,
            Event::Slot(id) => sim.slot(tick, &id)?,
        }
    }
    debug_assert!(sim.states.values().all(|s| s.activated));
    Ok(Execution {
        output: sim.merger.output,
        merge_error: sim.merger.error,
        recorder: sim.rec,
    })
}

impl Sim<'_> {
    fn push(&mut self, tick: u64, event: Event) {
        self.seq += 1;
        self.queue.push(Reverse((tick, event.rank(), self.seq, event)));
    }

    fn send(&mut self, now: u64, to: Node, payload: Payload) {
        let from = payload.from.clone();
        let at = self
            .schedule
            .delivery_tick(Some(&from), to.agent(), now, self.schedule.delay(&from));
        let msg = self.rec.send(now, Node::Agent(from), to.clone(), payload.class);
        self.inflight.push(InFlight { msg, to, payload });
        let idx = self.inflight.len() - 1;
        self.push(at, Event::Deliver(idx));
    }

    fn ready(&self, id: &str) -> bool {
        let state = &self.states[id];
        self.spec
            .predecessors(id)
            .iter()
            .all(|p| state.received.contains_key(*p))
    }

    fn slot(&mut self, now: u64, id: &str) -> Result<(), EngineError> {
        self.states.get_mut(id).expect("known agent").slot_reached = true;
        if self.mode == ScheduleMode::Uncoordinated || self.ready(id) {
            self.activate(now, id)?;
        }
        Ok(())
    }

    fn deliver(&mut self, now: u64, idx: usize) -> Result<(), EngineError> {
        let InFlight { msg, to, payload } = &self.inflight[idx];
        self.rec.deliver(now, *msg, to.clone());
        let payload = payload.clone();
        let agent = match to {
            Node::Agent(id) => id.clone(),
            _ => {
                self.merger.absorb(payload);
                return Ok(());
            }
        };
        match payload.class {
            MessageClass::Handoff => {
                let state = self.states.get_mut(&agent).expect("known agent");
                state.received.insert(payload.from.clone(), payload.clock);
                let wake = self.mode == ScheduleMode::Causal && state.slot_reached && !state.activated;
                if wake && self.ready(&agent) {
                    self.activate(now, &agent)?;
                }
            }
            MessageClass::Feedback => {
                let kind = payload.feedback.expect("feedback carries its kind");
                let state = self.states.get_mut(&agent).expect("known agent");
                if state.activated {
                    self.respond(now, &agent, &payload.from, kind, &payload.clock)?;
                } else {
                    state.pending_feedback.push((payload.from, kind, payload.clock));
                }
            }
            _ => unreachable!("agents only receive handoffs and feedback"),
        }
        Ok(())
    }

    fn activate(&mut self, now: u64, id: &str) -> Result<(), EngineError> {
        let spec = self.spec;
        let sub = spec.subtask(id).expect("known agent");
        let state = self.states.get_mut(id).expect("known agent");
        state.activated = true;
        let mut clock = VectorClock::new();
        for c in state.received.values() {
            clock.merge(c);
        }
        clock.increment(id);
        state.clock = clock.clone();
        let cites: BTreeSet<String> = state.received.keys().cloned().collect();
        let pending = std::mem::take(&mut state.pending_feedback);
        if self.mode == ScheduleMode::Causal {
            debug_assert!(state.received.values().all(|c| clock.dominates(c)));
        }
        self.rec.activate(now, id, &clock, &cites);

        let kind = sub.effective_output();
        let stamp = clock.total();
        let contribute = |phase| {
            self.agents.contribute(&AgentInput {
                subtask: sub,
                kind: kind.clone(),
                inputs: &cites,
                stamp,
                phase,
            })
        };
        let value = contribute(Phase::Final)?;
        let demands: Vec<(String, Rational)> =
            sub.demands.iter().map(|d| (d.resource.clone(), d.amount)).collect();

        let mut output = Payload::new(id, MessageClass::Output, &clock);
        output.cites = cites.clone();
        output.demands = demands;
        if sub.effective_emission() == Emission::Retractive {
            output.value = Some(contribute(Phase::Draft)?);
            self.send(now, Node::Merger, output);
            let mut revision = Payload::new(id, MessageClass::Revision, &clock);
            revision.value = Some(value.clone());
            revision.cites = cites;
            self.send(now, Node::Merger, revision);
        } else {
            output.value = Some(value.clone());
            self.send(now, Node::Merger, output);
        }

        for succ in spec.successors(id) {
            let mut handoff = Payload::new(id, MessageClass::Handoff, &clock);
            handoff.value = Some(value.clone());
            self.send(now, Node::Agent(succ.to_string()), handoff);
        }
        for fb in spec.feedbacks.iter().filter(|f| f.from == id) {
            let mut feedback = Payload::new(id, MessageClass::Feedback, &clock);
            feedback.feedback = Some(fb.kind);
            self.send(now, Node::Agent(fb.to.clone()), feedback);
        }
        for (from, kind, fclock) in pending {
            self.respond(now, id, &from, kind, &fclock)?;
        }
        Ok(())
    }

    /// Upstream agent `id` reacts to feedback from `from`.
    fn respond(
        &mut self,
        now: u64,
        id: &str,
        from: &str,
        kind: Emission,
        fclock: &VectorClock,
    ) -> Result<(), EngineError> {
        let sub = self.spec.subtask(id).expect("known agent");
        let state = self.states.get_mut(id).expect("known agent");
        state.clock.merge(fclock);
        state.clock.increment(id);
        let clock = state.clock.clone();
        let (phase, class) = match kind {
            Emission::Additive => (Phase::Supplement { from: from.into() }, MessageClass::Supplement),
            Emission::Retractive => (Phase::Revision { from: from.into() }, MessageClass::Revision),
        };
        let inputs = BTreeSet::new();
        let value = self.agents.contribute(&AgentInput {
            subtask: sub,
            kind: sub.effective_output(),
            inputs: &inputs,
            stamp: clock.total(),
            phase,
        })?;
        let mut payload = Payload::new(id, class, &clock);
        payload.value = Some(value);
        self.send(now, Node::Merger, payload);
        Ok(())
    }
}
