#![allow(dead_code)]

use calmtier::engine::{enumerate_runs, is_exhaustive, ModeStats, ScheduleMode};
use calmtier::task::{
    AgentScript, Demand, Emission, FeedbackEdge, HandoffEdge, ResourceConstraint, SubTask,
};
use calmtier::{classify, JoinKind, TaskSpec, Tier};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const KINDS: [fn() -> JoinKind; 6] = [
    || JoinKind::SetUnion,
    || JoinKind::MaxRegister,
    || JoinKind::MinRegister,
    || JoinKind::GrowCounter,
    || JoinKind::CausalAppend,
    || JoinKind::map_of(JoinKind::SetUnion),
];

/// Random well-formed spec with at most six subtasks: a random DAG of
/// handoffs, occasional feedback and shared or unshared resources, and a
/// sprinkling of retractive, exclusive and undeclared semantics.
pub fn random_spec(seed: u64) -> TaskSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(1..=6);
    let ids: Vec<String> = (0..n).map(|i| format!("s{i}")).collect();

    let mut handoffs = Vec::new();
    let edge_p = [0.0, 0.25, 0.5][rng.gen_range(0..3)];
    for j in 0..n {
        for i in 0..j {
            if rng.gen_bool(edge_p) {
                handoffs.push(HandoffEdge {
                    from: ids[i].clone(),
                    to: ids[j].clone(),
                });
            }
        }
    }

    let mut resources = Vec::new();
    if rng.gen_bool(0.4) {
        resources.push(ResourceConstraint {
            id: "pool".into(),
            capacity: rng.gen_range(5..=20).into(),
            shared: true,
        });
    }
    if rng.gen_bool(0.2) {
        resources.push(ResourceConstraint {
            id: "seat".into(),
            capacity: 4.into(),
            shared: false,
        });
    }

    let subtasks = ids
        .iter()
        .map(|id| {
            let emission = match rng.gen_range(0..20) {
                0 => None,
                1..=2 => Some(Emission::Retractive),
                _ => Some(Emission::Additive),
            };
            let output_decl = match rng.gen_range(0..20) {
                0 => None,
                1 => Some(JoinKind::ExclusiveAssign),
                _ => Some(KINDS[rng.gen_range(0..KINDS.len())]()),
            };
            let mut demands = Vec::new();
            for r in &resources {
                if rng.gen_bool(0.6) {
                    let cap = if r.shared { 10 } else { 4 };
                    demands.push(Demand {
                        resource: r.id.clone(),
                        amount: rng.gen_range(0..=cap).into(),
                    });
                }
            }
            let items = (0..rng.gen_range(1..=3)).map(|k| format!("{id}-i{k}")).collect();
            SubTask {
                id: id.clone(),
                role: String::new(),
                emission,
                output_decl,
                consumes: handoffs
                    .iter()
                    .filter(|e| &e.to == id)
                    .map(|e| e.from.clone())
                    .collect(),
                demands,
                script: Some(AgentScript {
                    items,
                    value: Some(rng.gen_range(-5..=5).into()),
                }),
            }
        })
        .collect();

    let mut spec = TaskSpec {
        id: format!("random-{seed}"),
        name: format!("random {seed}"),
        subtasks,
        handoffs,
        feedbacks: Vec::new(),
        resources,
        validity: Default::default(),
        thompson_hint: None,
    };
    if !spec.handoffs.is_empty() && rng.gen_bool(0.3) {
        let e = spec.handoffs[rng.gen_range(0..spec.handoffs.len())].clone();
        let kind = if rng.gen_bool(0.5) {
            Emission::Additive
        } else {
            Emission::Retractive
        };
        spec.feedbacks.push(FeedbackEdge {
            from: e.to,
            to: e.from,
            kind,
        });
    }
    spec.validity = spec.canonical_validity();
    spec
}

/// Checks the tier boundary for one spec: the classifier's tier must match
/// what exhaustive enumeration observes in each mode.
pub fn boundary_holds(spec: &TaskSpec) -> Result<Tier, String> {
    let tier = classify(spec).map_err(|e| e.to_string())?.tier;
    if !is_exhaustive(spec) {
        return Err(format!("{}: too many subtasks to enumerate", spec.id));
    }
    let stats = |mode| -> Result<ModeStats, String> {
        let runs = enumerate_runs(spec, mode, 1).map_err(|e| e.to_string())?;
        Ok(ModeStats::from_runs(mode, &runs, true))
    };
    let un = stats(ScheduleMode::Uncoordinated)?;
    let causal = stats(ScheduleMode::Causal)?;
    let orch = stats(ScheduleMode::Orchestrated)?;
    let fail = |what: &str| Err(format!("{} ({tier}): {what}", spec.id));
    if !orch.all_valid() {
        return fail("orchestrated run invalid");
    }
    match tier {
        Tier::M => {
            if !un.all_valid() || !causal.all_valid() {
                return fail("monotonic task has an invalid run");
            }
        }
        Tier::MO => {
            if !causal.all_valid() {
                return fail("causal run invalid");
            }
            if !spec.handoffs.is_empty() && un.all_valid() {
                return fail("no uncoordinated run breaks ordering");
            }
        }
        Tier::NM => {
            if un.all_valid() || causal.all_valid() {
                return fail("non-monotonic task never fails without orchestration");
            }
        }
    }
    Ok(tier)
}

/// Random value of `kind` drawn from a small alphabet so joins overlap.
pub fn random_value(kind: &JoinKind, rng: &mut ChaCha8Rng) -> calmtier::LatticeValue {
    use calmtier::lattice::StampedEntry;
    use calmtier::rational::Rational;
    use calmtier::LatticeValue;

    let word = |rng: &mut ChaCha8Rng| format!("w{}", rng.gen_range(0..6));
    let size = rng.gen_range(0..5);
    match kind {
        JoinKind::SetUnion => LatticeValue::SetUnion((0..size).map(|_| word(rng)).collect()),
        JoinKind::MaxRegister => {
            LatticeValue::MaxRegister(Rational::new(rng.gen_range(-40..40), rng.gen_range(1..6)))
        }
        JoinKind::MinRegister => {
            LatticeValue::MinRegister(Rational::new(rng.gen_range(-40..40), rng.gen_range(1..6)))
        }
        JoinKind::GrowCounter => LatticeValue::GrowCounter(rng.gen_range(0..50)),
        JoinKind::CausalAppend => LatticeValue::CausalAppend(
            (0..size)
                .map(|_| StampedEntry {
                    stamp: rng.gen_range(0..4),
                    origin: format!("a{}", rng.gen_range(0..2)),
                    item: word(rng),
                })
                .collect(),
        ),
        JoinKind::MapOfJoins(inner) => LatticeValue::MapOfJoins {
            inner: (**inner).clone(),
            entries: (0..size).map(|_| (word(rng), random_value(inner, rng))).collect(),
        },
        JoinKind::ExclusiveAssign => LatticeValue::ExclusiveAssign(word(rng)),
    }
}

pub fn semilattice_kinds() -> Vec<JoinKind> {
    vec![
        JoinKind::SetUnion,
        JoinKind::MaxRegister,
        JoinKind::MinRegister,
        JoinKind::GrowCounter,
        JoinKind::CausalAppend,
        JoinKind::map_of(JoinKind::MinRegister),
        JoinKind::map_of(JoinKind::map_of(JoinKind::SetUnion)),
    ]
}
