//! Declarative multi-agent task specifications and their loader.
//!
//! A [`TaskSpec`] names the sub-tasks (one agent each), the ordered handoffs
//! between them, feedback edges that close loops, shared finite resources and
//! the predicate that decides whether a finished run is valid. Specs are read
//! from strict JSON: unknown keys are rejected.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::lattice::{JoinKind, MAX_DEPTH};
use crate::rational::{self, Rational};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Emission {
    /// New output only adds to what was emitted before.
    Additive,
    /// New output may withdraw or revise earlier output.
    Retractive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThompsonType {
    Pooled,
    Sequential,
    SequentialWithFeedback,
    Reciprocal,
}

impl fmt::Display for ThompsonType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ThompsonType::Pooled => "pooled",
            ThompsonType::Sequential => "sequential",
            ThompsonType::SequentialWithFeedback => "sequential_with_feedback",
            ThompsonType::Reciprocal => "reciprocal",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Demand {
    pub resource: String,
    #[serde(with = "rational")]
    pub amount: Rational,
}

/// Deterministic output recipe for a scripted agent.
///
/// `items` become set elements, map keys or sequence entries depending on the
/// declared output kind; `value` fills register payloads. The same inputs
/// always produce the same contribution.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentScript {
    #[serde(default)]
    pub items: Vec<String>,
    #[serde(
        default,
        skip_serializing_if = "Option::is_none",
        with = "optional_rational"
    )]
    pub value: Option<Rational>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubTask {
    pub id: String,
    #[serde(default)]
    pub role: String,
    /// `None` when the spec leaves emission semantics undeclared.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub emission: Option<Emission>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_decl: Option<JoinKind>,
    #[serde(default)]
    pub consumes: Vec<String>,
    #[serde(default)]
    pub demands: Vec<Demand>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub script: Option<AgentScript>,
}

impl SubTask {
    /// Emission used for execution; undeclared semantics count as retractive.
    pub fn effective_emission(&self) -> Emission {
        self.emission.unwrap_or(Emission::Retractive)
    }

    /// Output kind used for execution; an undeclared kind is treated as an
    /// exclusive assignment.
    pub fn effective_output(&self) -> JoinKind {
        self.output_decl.clone().unwrap_or(JoinKind::ExclusiveAssign)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HandoffEdge {
    pub from: String,
    pub to: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeedbackEdge {
    /// Downstream sub-task that sends the feedback.
    pub from: String,
    /// Upstream sub-task that receives it.
    pub to: String,
    pub kind: Emission,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResourceConstraint {
    pub id: String,
    #[serde(with = "rational")]
    pub capacity: Rational,
    /// Shared resources are drawn from one pool; unshared ones cap each
    /// sub-task's demand individually.
    #[serde(default)]
    pub shared: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ValidityPredicate {
    AllPartsPresent {
        parts: Vec<String>,
    },
    ResourceCapRespected {
        resource: String,
    },
    /// Every consumer's output references each producer it depends on.
    /// Without `edges` the check covers every handoff edge.
    CausalReferenceIntact {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        edges: Option<Vec<HandoffEdge>>,
    },
    Conjunction {
        #[serde(default)]
        all: Vec<ValidityPredicate>,
    },
}

impl Default for ValidityPredicate {
    fn default() -> Self {
        ValidityPredicate::Conjunction { all: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSpec {
    pub id: String,
    pub name: String,
    #[serde(default)]
    pub subtasks: Vec<SubTask>,
    #[serde(default)]
    pub handoffs: Vec<HandoffEdge>,
    #[serde(default)]
    pub feedbacks: Vec<FeedbackEdge>,
    #[serde(default)]
    pub resources: Vec<ResourceConstraint>,
    #[serde(default)]
    pub validity: ValidityPredicate,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thompson_hint: Option<ThompsonType>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagnosticClass {
    /// Structural problem: dangling reference, duplicate id, cycle.
    Integrity,
    /// Out-of-range quantity.
    Value,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub class: DiagnosticClass,
    /// The offending element, e.g. `subtask 'b'` or `handoff a->b`.
    pub element: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.element, self.message)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum TaskError {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("integrity error: {}", join_diagnostics(.0))]
    Integrity(Vec<Diagnostic>),
    #[error("value error: {}", join_diagnostics(.0))]
    Value(Vec<Diagnostic>),
}

fn join_diagnostics(diags: &[Diagnostic]) -> String {
    diags.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

/// Parses and validates a task document.
pub fn load_task(document: &str) -> Result<TaskSpec, TaskError> {
    let spec: TaskSpec =
        serde_json::from_str(document).map_err(|e| TaskError::Schema(e.to_string()))?;
    let diags = validate_graph(&spec);
    if diags.is_empty() {
        Ok(spec)
    } else if diags.iter().any(|d| d.class == DiagnosticClass::Integrity) {
        Err(TaskError::Integrity(diags))
    } else {
        Err(TaskError::Value(diags))
    }
}

impl TaskSpec {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("task specs always serialize")
    }

    pub fn subtask(&self, id: &str) -> Option<&SubTask> {
        self.subtasks.iter().find(|s| s.id == id)
    }

    pub fn resource(&self, id: &str) -> Option<&ResourceConstraint> {
        self.resources.iter().find(|r| r.id == id)
    }

    /// Handoff producers feeding `id`, in declaration order.
    pub fn predecessors(&self, id: &str) -> Vec<&str> {
        self.handoffs
            .iter()
            .filter(|e| e.to == id)
            .map(|e| e.from.as_str())
            .collect()
    }

    pub fn successors(&self, id: &str) -> Vec<&str> {
        self.handoffs
            .iter()
            .filter(|e| e.from == id)
            .map(|e| e.to.as_str())
            .collect()
    }

    /// True when `to` is reachable from `from` along one or more handoffs.
    pub fn reaches(&self, from: &str, to: &str) -> bool {
        let mut seen = BTreeSet::new();
        let mut queue: VecDeque<&str> = self.successors(from).into();
        while let Some(next) = queue.pop_front() {
            if next == to {
                return true;
            }
            if seen.insert(next) {
                queue.extend(self.successors(next));
            }
        }
        false
    }

    /// Topological order of the handoff graph. Ties are broken by `priority`
    /// (lower rank first); sub-tasks missing from `priority` fall back to
    /// declaration order. Returns `None` if the handoffs contain a cycle.
    pub fn topological_order_by(&self, priority: &[&str]) -> Option<Vec<&str>> {
        let rank: BTreeMap<&str, usize> = self
            .subtasks
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let r = priority
                    .iter()
                    .position(|p| *p == s.id)
                    .map(|p| (0, p))
                    .unwrap_or((1, i));
                (s.id.as_str(), r.0 * self.subtasks.len() + r.1)
            })
            .collect();
        let mut indegree: BTreeMap<&str, usize> =
            self.subtasks.iter().map(|s| (s.id.as_str(), 0)).collect();
        for e in &self.handoffs {
            *indegree.get_mut(e.to.as_str())? += 1;
        }
        let mut ready: BTreeSet<(usize, &str)> = indegree
            .iter()
            .filter(|(_, d)| **d == 0)
            .map(|(id, _)| (rank[id], *id))
            .collect();
        let mut order = Vec::with_capacity(self.subtasks.len());
        while let Some(first) = ready.pop_first() {
            order.push(first.1);
            for succ in self.successors(first.1) {
                let d = indegree.get_mut(succ)?;
                *d -= 1;
                if *d == 0 {
                    ready.insert((rank[succ], succ));
                }
            }
        }
        (order.len() == self.subtasks.len()).then_some(order)
    }

    pub fn topological_order(&self) -> Option<Vec<&str>> {
        self.topological_order_by(&[])
    }

    /// The predicate that checks every structural guarantee a run can break:
    /// all parts present, every resource within capacity, and every handoff
    /// reference intact.
    pub fn canonical_validity(&self) -> ValidityPredicate {
        let mut all = vec![ValidityPredicate::AllPartsPresent {
            parts: self.subtasks.iter().map(|s| s.id.clone()).collect(),
        }];
        all.extend(self.resources.iter().map(|r| ValidityPredicate::ResourceCapRespected {
            resource: r.id.clone(),
        }));
        if !self.handoffs.is_empty() {
            all.push(ValidityPredicate::CausalReferenceIntact { edges: None });
        }
        ValidityPredicate::Conjunction { all }
    }
}

/// Checks every structural invariant of `spec`; returns one diagnostic per
/// violation, or an empty list for a well-formed spec.
pub fn validate_graph(spec: &TaskSpec) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let integrity = |element: String, message: String| Diagnostic {
        class: DiagnosticClass::Integrity,
        element,
        message,
    };
    let value = |element: String, message: String| Diagnostic {
        class: DiagnosticClass::Value,
        element,
        message,
    };

    let mut ids = BTreeSet::new();
    for s in &spec.subtasks {
        if s.id.is_empty() {
            out.push(integrity("subtask ''".into(), "empty id".into()));
        }
        if !ids.insert(s.id.as_str()) {
            out.push(integrity(format!("subtask '{}'", s.id), "duplicate id".into()));
        }
    }
    let mut resource_ids = BTreeSet::new();
    for r in &spec.resources {
        if !resource_ids.insert(r.id.as_str()) {
            out.push(integrity(format!("resource '{}'", r.id), "duplicate id".into()));
        }
        if rational::is_negative(&r.capacity) {
            out.push(value(
                format!("resource '{}'", r.id),
                format!("negative capacity {}", rational::to_text(&r.capacity)),
            ));
        }
    }

    let mut seen_edges = BTreeSet::new();
    let mut graph_ok = true;
    for e in &spec.handoffs {
        let element = format!("handoff {}->{}", e.from, e.to);
        for end in [&e.from, &e.to] {
            if !ids.contains(end.as_str()) {
                out.push(integrity(element.clone(), format!("dangling id '{end}'")));
                graph_ok = false;
            }
        }
        if e.from == e.to {
            out.push(integrity(element.clone(), "self-loop".into()));
            graph_ok = false;
        }
        if !seen_edges.insert(e) {
            out.push(integrity(element, "duplicate edge".into()));
        }
    }
    if graph_ok && spec.topological_order().is_none() {
        out.push(integrity("handoffs".into(), "handoff edges form a cycle".into()));
        graph_ok = false;
    }

    for f in &spec.feedbacks {
        let element = format!("feedback {}->{}", f.from, f.to);
        let mut ends_ok = true;
        for end in [&f.from, &f.to] {
            if !ids.contains(end.as_str()) {
                out.push(integrity(element.clone(), format!("dangling id '{end}'")));
                ends_ok = false;
            }
        }
        if ends_ok && graph_ok && !spec.reaches(&f.to, &f.from) {
            out.push(integrity(element, "feedback without upstream path".into()));
        }
    }

    for s in &spec.subtasks {
        let element = format!("subtask '{}'", s.id);
        for c in &s.consumes {
            if !spec.handoffs.iter().any(|e| &e.from == c && e.to == s.id) {
                out.push(integrity(
                    element.clone(),
                    format!("consumes '{c}' without a matching handoff"),
                ));
            }
        }
        if let Some(kind) = &s.output_decl {
            if kind.depth() > MAX_DEPTH {
                out.push(value(
                    element.clone(),
                    format!("output nesting depth {} exceeds {MAX_DEPTH}", kind.depth()),
                ));
            }
        }
        for d in &s.demands {
            match spec.resource(&d.resource) {
                None => out.push(integrity(
                    element.clone(),
                    format!("demand on unknown resource '{}'", d.resource),
                )),
                Some(r) if !r.shared && d.amount > r.capacity => out.push(value(
                    element.clone(),
                    format!(
                        "demand {} exceeds capacity {} of unshared resource '{}'",
                        rational::to_text(&d.amount),
                        rational::to_text(&r.capacity),
                        r.id
                    ),
                )),
                Some(_) => {}
            }
            if rational::is_negative(&d.amount) {
                out.push(value(
                    element.clone(),
                    format!(
                        "negative demand {} on '{}'",
                        rational::to_text(&d.amount),
                        d.resource
                    ),
                ));
            }
        }
    }

    check_predicate(spec, &spec.validity, &ids, &mut out);
    out
}

fn check_predicate(
    spec: &TaskSpec,
    predicate: &ValidityPredicate,
    ids: &BTreeSet<&str>,
    out: &mut Vec<Diagnostic>,
) {
    let diag = |message: String| Diagnostic {
        class: DiagnosticClass::Integrity,
        element: "validity".into(),
        message,
    };
    match predicate {
        ValidityPredicate::AllPartsPresent { parts } => {
            for p in parts {
                if !ids.contains(p.as_str()) {
                    out.push(diag(format!("unknown part '{p}'")));
                }
            }
        }
        ValidityPredicate::ResourceCapRespected { resource } => {
            if spec.resource(resource).is_none() {
                out.push(diag(format!("unknown resource '{resource}'")));
            }
        }
        ValidityPredicate::CausalReferenceIntact { edges: Some(edges) } => {
            for e in edges {
                if !spec.handoffs.contains(e) {
                    out.push(diag(format!("{}->{} is not a handoff edge", e.from, e.to)));
                }
            }
        }
        ValidityPredicate::CausalReferenceIntact { edges: None } => {}
        ValidityPredicate::Conjunction { all } => {
            for p in all {
                check_predicate(spec, p, ids, out);
            }
        }
    }
}

mod optional_rational {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::rational::Rational;

    #[derive(Serialize, Deserialize)]
    struct Wrapped(#[serde(with = "crate::rational")] Rational);

    pub fn serialize<S: Serializer>(v: &Option<Rational>, s: S) -> Result<S::Ok, S::Error> {
        v.map(Wrapped).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Rational>, D::Error> {
        Ok(Option::<Wrapped>::deserialize(d)?.map(|w| w.0))
    }
}
