use crate::rational;
use crate::task::{TaskSpec, ValidityPredicate};

use super::{FinalOutput, Verdict};

/// Binary verdict of the spec's validity predicate on `output`. The reason
/// names the first violated criterion and is empty for valid outputs.
pub fn evaluate(spec: &TaskSpec, output: &FinalOutput) -> (Verdict, String) {
    match check(spec, &spec.validity, output) {
        Ok(()) => (Verdict::Valid, String::new()),
        Err(reason) => (Verdict::Invalid, reason),
    }
}

fn check(spec: &TaskSpec, predicate: &ValidityPredicate, output: &FinalOutput) -> Result<(), String> {
    match predicate {
        ValidityPredicate::AllPartsPresent { parts } => {
            match parts.iter().find(|p| !output.sections.contains_key(*p)) {
                Some(p) => Err(format!("missing part '{p}'")),
                None => Ok(()),
            }
        }
        ValidityPredicate::ResourceCapRespected { resource } => {
            let Some(r) = spec.resource(resource) else {
                return Err(format!("unknown resource '{resource}'"));
            };
            let cap = rational::to_text(&r.capacity);
            if r.shared {
                let total = output.allocated(resource);
                if total > r.capacity {
                    return Err(format!(
                        "resource '{resource}': allocated {} > capacity {cap}",
                        rational::to_text(&total)
                    ));
                }
            } else if let Some(per_agent) = output.allocations.get(resource) {
                if let Some((agent, amount)) = per_agent.iter().find(|(_, a)| **a > r.capacity) {
                    return Err(format!(
                        "resource '{resource}': '{agent}' allocated {} > capacity {cap}",
                        rational::to_text(amount)
                    ));
                }
            }
            Ok(())
        }
        ValidityPredicate::CausalReferenceIntact { edges } => {
            let edges = edges.as_ref().unwrap_or(&spec.handoffs);
            for e in edges {
                if let Some(section) = output.sections.get(&e.to) {
                    if !section.cites.contains(&e.from) {
                        return Err(format!(
                            "subtask '{}' output lacks reference to '{}'",
                            e.to, e.from
                        ));
                    }
                }
            }
            Ok(())
        }
        ValidityPredicate::Conjunction { all } => {
            all.iter().try_for_each(|p| check(spec, p, output))
        }
    }
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeSet;

    use super::*;
    use crate::engine::Section;
    use crate::lattice::LatticeValue;
    use crate::rational::Rational;

    fn spec(doc: &str) -> TaskSpec {
        serde_json::from_str(doc).unwrap()
    }

    fn section(cites: &[&str]) -> Section {
        Section {
            value: LatticeValue::set(["x"]),
            cites: cites.iter().map(|s| s.to_string()).collect::<BTreeSet<_>>(),
        }
    }

    #[test]
    fn all_parts_present() {
        let s = spec(
            r#"{"id":"p","name":"p","subtasks":[{"id":"p1"},{"id":"p2"},{"id":"p3"},{"id":"p4"}],
                "validity":{"kind":"all_parts_present","parts":["p1","p2","p3","p4"]}}"#,
        );
        let mut out = FinalOutput::default();
        for p in ["p1", "p2", "p3"] {
            out.sections.insert(p.into(), section(&[]));
        }
        assert_eq!(evaluate(&s, &out), (Verdict::Invalid, "missing part 'p4'".into()));
        out.sections.insert("p4".into(), section(&[]));
        assert_eq!(evaluate(&s, &out).0, Verdict::Valid);
    }

    #[test]
    fn resource_cap_is_exact() {
        let s = spec(
            r#"{"id":"b","name":"b","subtasks":[{"id":"a"},{"id":"b"},{"id":"c"}],
                "resources":[{"id":"budget","capacity":100,"shared":true}],
                "validity":{"kind":"resource_cap_respected","resource":"budget"}}"#,
        );
        let mut out = FinalOutput::default();
        let alloc = out.allocations.entry("budget".into()).or_default();
        alloc.insert("a".into(), Rational::from_integer(50));
        alloc.insert("b".into(), Rational::from_integer(60));
        alloc.insert("c".into(), Rational::from_integer(40));
        assert_eq!(
            evaluate(&s, &out),
            (
                Verdict::Invalid,
                "resource 'budget': allocated 150 > capacity 100".into()
            )
        );
        // exactly at capacity is fine; one hundredth over is not
        let alloc = out.allocations.get_mut("budget").unwrap();
        alloc.insert("b".into(), Rational::from_integer(50));
        alloc.insert("c".into(), Rational::from_integer(0));
        assert_eq!(evaluate(&s, &out).0, Verdict::Valid);
        out.allocations
            .get_mut("budget")
            .unwrap()
            .insert("c".into(), Rational::new(1, 100));
        assert_eq!(evaluate(&s, &out).0, Verdict::Invalid);
    }

    #[test]
    fn causal_references() {
        let s = spec(
            r#"{"id":"c","name":"c","subtasks":[{"id":"a"},{"id":"b"}],
                "handoffs":[{"from":"a","to":"b"}],
                "validity":{"kind":"causal_reference_intact"}}"#,
        );
        let mut out = FinalOutput::default();
        out.sections.insert("a".into(), section(&[]));
        out.sections.insert("b".into(), section(&[]));
        assert_eq!(
            evaluate(&s, &out),
            (Verdict::Invalid, "subtask 'b' output lacks reference to 'a'".into())
        );
        out.sections.insert("b".into(), section(&["a"]));
        assert_eq!(evaluate(&s, &out).0, Verdict::Valid);
    }

    #[test]
    fn empty_conjunction_holds() {
        let s = spec(r#"{"id":"e","name":"e","validity":{"kind":"conjunction","all":[]}}"#);
        assert_eq!(evaluate(&s, &FinalOutput::default()), (Verdict::Valid, String::new()));
    }
}
