//! Coordination-tier classification.
//!
//! Pooled work merged through a join needs no coordination (tier M); ordered
//! handoffs of non-retracting outputs need only causal delivery (tier M-O);
//! anything that can invalidate another agent's output needs coordination
//! (tier NM). Feedback loops stay in M-O when the upstream agent only adds to
//! its earlier output and fall to NM when it must revise it.
//!
//! Five structural tests produce the evidence trace. They are a
//! reconstruction from the underlying results, not a published checklist:
//!
//! | Test | Fires when | Forces |
//! |------|-----------|--------|
//! | Retraction | a sub-task emits retractively | NM |
//! | SharedResourceNegation | declared demands on a shared resource exceed its capacity | NM |
//! | OrderSensitivity | handoffs, additive feedback or causally stamped outputs exist | M-O |
//! | FeedbackKind | a feedback edge is retractive | NM |
//! | MergeConflict | an output kind has no join (exclusive assignment) | NM |
//!
//! Sub-tasks with undeclared emission or output kind are borderline and
//! default to NM.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::rational::{self, Rational};
use crate::task::{validate_graph, Diagnostic, Emission, TaskSpec, ThompsonType};

/// Coordination tier, ordered from least to most coordination.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Tier {
    #[serde(rename = "M")]
    M,
    #[serde(rename = "M-O", alias = "M_O")]
    MO,
    #[serde(rename = "NM")]
    NM,
}

impl Tier {
    pub const ALL: [Tier; 3] = [Tier::M, Tier::MO, Tier::NM];

    pub fn label(self) -> &'static str {
        match self {
            Tier::M => "M",
            Tier::MO => "M-O",
            Tier::NM => "NM",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            Tier::M => "coordination-free",
            Tier::MO => "coordination-free under causal ordering",
            Tier::NM => "coordination required",
        }
    }

    /// Counts toward the monotonic share of a portfolio.
    pub fn is_monotonic(self) -> bool {
        self != Tier::NM
    }
}

impl fmt::Display for Tier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Tier {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "M" => Ok(Tier::M),
            "M-O" | "M_O" | "MO" => Ok(Tier::MO),
            "NM" => Ok(Tier::NM),
            other => Err(format!("unknown tier '{other}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TestKind {
    Retraction,
    SharedResourceNegation,
    OrderSensitivity,
    FeedbackKind,
    MergeConflict,
}

impl TestKind {
    pub const ALL: [TestKind; 5] = [
        TestKind::Retraction,
        TestKind::SharedResourceNegation,
        TestKind::OrderSensitivity,
        TestKind::FeedbackKind,
        TestKind::MergeConflict,
    ];

    /// Tier this test forces when it fires.
    pub fn forces(self) -> Tier {
        match self {
            TestKind::OrderSensitivity => Tier::MO,
            _ => Tier::NM,
        }
    }
}

impl fmt::Display for TestKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestResult {
    pub test: TestKind,
    pub fired: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Classification {
    pub task_id: String,
    pub tier: Tier,
    pub inferred_thompson: ThompsonType,
    pub evidence: Vec<TestResult>,
    pub defaulted: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default_reason: Option<String>,
}

impl Classification {
    pub fn fired(&self) -> impl Iterator<Item = &TestResult> {
        self.evidence.iter().filter(|t| t.fired)
    }

    pub fn test(&self, kind: TestKind) -> &TestResult {
        self.evidence
            .iter()
            .find(|t| t.test == kind)
            .expect("evidence lists every test")
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ClassifyError {
    #[error("invalid spec: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    InvalidSpec(Vec<Diagnostic>),
    #[error("ambiguous label {0}: the tier depends on whether feedback is additive or retractive")]
    AmbiguousLabel(ThompsonType),
}

/// Maps an interdependence type straight to its tier.
pub fn bridge_map(thompson: ThompsonType) -> Result<Tier, ClassifyError> {
    match thompson {
        ThompsonType::Pooled => Ok(Tier::M),
        ThompsonType::Sequential => Ok(Tier::MO),
        ThompsonType::Reciprocal => Ok(Tier::NM),
        ThompsonType::SequentialWithFeedback => Err(ClassifyError::AmbiguousLabel(thompson)),
    }
}

/// Tier of a sequential chain closed by feedback of the given kind.
pub fn resolve_feedback(kind: Emission) -> Tier {
    match kind {
        Emission::Additive => Tier::MO,
        Emission::Retractive => Tier::NM,
    }
}

/// Graph-shape reading of the interdependence type.
pub fn infer_thompson(spec: &TaskSpec) -> ThompsonType {
    if spec.feedbacks.iter().any(|f| f.kind == Emission::Retractive) {
        ThompsonType::Reciprocal
    } else if !spec.feedbacks.is_empty() {
        ThompsonType::SequentialWithFeedback
    } else if !spec.handoffs.is_empty() {
        ThompsonType::Sequential
    } else {
        ThompsonType::Pooled
    }
}

/// Sum of all declared demands on `resource`.
pub fn worst_case_demand(spec: &TaskSpec, resource: &str) -> Rational {
    spec.subtasks
        .iter()
        .flat_map(|s| &s.demands)
        .filter(|d| d.resource == resource)
        .map(|d| d.amount)
        .sum()
}

pub fn classify(spec: &TaskSpec) -> Result<Classification, ClassifyError> {
    let diags = validate_graph(spec);
    if !diags.is_empty() {
        return Err(ClassifyError::InvalidSpec(diags));
    }

    let mut findings: Vec<(TestKind, Vec<String>)> =
        TestKind::ALL.iter().map(|k| (*k, Vec::new())).collect();
    let mut note = |kind: TestKind, detail: String| {
        findings
            .iter_mut()
            .find(|(k, _)| *k == kind)
            .expect("every test kind is present")
            .1
            .push(detail);
    };

    let mut undeclared = Vec::new();
    for s in &spec.subtasks {
        match s.emission {
            Some(Emission::Retractive) => {
                note(TestKind::Retraction, format!("subtask '{}' emits retractively", s.id))
            }
            Some(Emission::Additive) => {}
            None => undeclared.push(format!("subtask '{}' declares no emission", s.id)),
        }
        match &s.output_decl {
            Some(kind) if !kind.is_semilattice() => note(
                TestKind::MergeConflict,
                format!("subtask '{}' output {kind} has no join", s.id),
            ),
            Some(kind) if kind.is_order_sensitive() => note(
                TestKind::OrderSensitivity,
                format!("subtask '{}' output {kind} is causally ordered", s.id),
            ),
            Some(_) => {}
            None => undeclared.push(format!("subtask '{}' declares no output kind", s.id)),
        }
    }

    for r in spec.resources.iter().filter(|r| r.shared) {
        let demand = worst_case_demand(spec, &r.id);
        if demand > r.capacity {
            note(
                TestKind::SharedResourceNegation,
                format!(
                    "resource '{}' capacity {} < worst-case demand {}",
                    r.id,
                    rational::to_text(&r.capacity),
                    rational::to_text(&demand)
                ),
            );
        }
    }

    for e in &spec.handoffs {
        note(TestKind::OrderSensitivity, format!("handoff {}->{}", e.from, e.to));
    }
    for f in &spec.feedbacks {
        match f.kind {
            Emission::Additive => note(
                TestKind::OrderSensitivity,
                format!("additive feedback {}->{}", f.from, f.to),
            ),
            Emission::Retractive => note(
                TestKind::FeedbackKind,
                format!("retractive feedback {}->{}", f.from, f.to),
            ),
        }
    }

    let evidence: Vec<TestResult> = findings
        .into_iter()
        .map(|(test, details)| TestResult {
            test,
            fired: !details.is_empty(),
            detail: details.join("; "),
        })
        .collect();

    let defaulted = !undeclared.is_empty();
    let tier = evidence
        .iter()
        .filter(|t| t.fired)
        .map(|t| t.test.forces())
        .chain(defaulted.then_some(Tier::NM))
        .max()
        .unwrap_or(Tier::M);

    Ok(Classification {
        task_id: spec.id.clone(),
        tier,
        inferred_thompson: infer_thompson(spec),
        evidence,
        defaulted,
        default_reason: defaulted.then(|| undeclared.join("; ")),
    })
}

/// Deterministic plain-text account of a classification.
pub fn explain(c: &Classification) -> String {
    let mut out = String::new();
    out.push_str(&format!("task: {}\n", c.task_id));
    out.push_str(&format!("tier: {} ({})\n", c.tier, c.tier.description()));
    out.push_str(&format!("thompson: {}\n", c.inferred_thompson));
    let fired: Vec<&TestResult> = c.fired().collect();
    if fired.is_empty() {
        out.push_str("tests: no tests fired\n");
    } else {
        out.push_str("tests:\n");
        for t in fired {
            out.push_str(&format!("  {}: {}\n", t.test, t.detail));
        }
    }
    if c.defaulted {
        out.push_str(&format!(
            "defaulted to NM: {}\n",
            c.default_reason.as_deref().unwrap_or("borderline specification")
        ));
    }
    out
}
