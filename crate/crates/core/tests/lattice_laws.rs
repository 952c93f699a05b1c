use std::collections::BTreeMap;

use calmtier::lattice::{join, leq, merge_all, StampedEntry};
use calmtier::rational::Rational;
use calmtier::{JoinKind, LatticeValue};
use proptest::collection::{btree_map, btree_set, vec};
use proptest::prelude::*;

fn word() -> impl Strategy<Value = String> {
    "[a-e]{1,2}"
}

fn rational() -> impl Strategy<Value = Rational> {
    (-50i128..50, 1i128..8).prop_map(|(n, d)| Rational::new(n, d))
}

fn value_of(kind: JoinKind) -> BoxedStrategy<LatticeValue> {
    match kind {
        JoinKind::SetUnion => btree_set(word(), 0..5).prop_map(LatticeValue::SetUnion).boxed(),
        JoinKind::MaxRegister => rational().prop_map(LatticeValue::MaxRegister).boxed(),
        JoinKind::MinRegister => rational().prop_map(LatticeValue::MinRegister).boxed(),
        JoinKind::GrowCounter => (0u64..100).prop_map(LatticeValue::GrowCounter).boxed(),
        JoinKind::CausalAppend => btree_set(
            (0u64..4, "[xy]", word()).prop_map(|(stamp, origin, item)| StampedEntry {
                stamp,
                origin,
                item,
            }),
            0..5,
        )
        .prop_map(LatticeValue::CausalAppend)
        .boxed(),
        JoinKind::MapOfJoins(inner) => {
            let inner_kind = (*inner).clone();
            btree_map(word(), value_of(inner_kind.clone()), 0..4)
                .prop_map(move |entries: BTreeMap<String, LatticeValue>| LatticeValue::MapOfJoins {
                    inner: inner_kind.clone(),
                    entries,
                })
                .boxed()
        }
        JoinKind::ExclusiveAssign => word().prop_map(LatticeValue::ExclusiveAssign).boxed(),
    }
}

fn semilattice_kinds() -> Vec<JoinKind> {
    vec![
        JoinKind::SetUnion,
        JoinKind::MaxRegister,
        JoinKind::MinRegister,
        JoinKind::GrowCounter,
        JoinKind::CausalAppend,
        JoinKind::map_of(JoinKind::MaxRegister),
        JoinKind::map_of(JoinKind::map_of(JoinKind::SetUnion)),
    ]
}

fn triple() -> impl Strategy<Value = (LatticeValue, LatticeValue, LatticeValue)> {
    proptest::sample::select(semilattice_kinds())
        .prop_flat_map(|k| (value_of(k.clone()), value_of(k.clone()), value_of(k)))
}

/// Runs the four laws for one kind over `cases` random triples.
fn laws_for(kind: JoinKind, cases: u32) {
    let mut runner = proptest::test_runner::TestRunner::new(ProptestConfig::with_cases(cases));
    let strat = (value_of(kind.clone()), value_of(kind.clone()), value_of(kind.clone()));
    runner
        .run(&strat, |(a, b, c)| {
            let ab = join(&a, &b).unwrap();
            prop_assert_eq!(join(&a, &a).unwrap(), a.clone());
            prop_assert_eq!(&ab, &join(&b, &a).unwrap());
            prop_assert_eq!(
                join(&ab, &c).unwrap(),
                join(&a, &join(&b, &c).unwrap()).unwrap()
            );
            prop_assert!(leq(&a, &ab).unwrap());
            prop_assert!(leq(&b, &ab).unwrap());
            Ok(())
        })
        .unwrap_or_else(|e| panic!("{kind}: {e}"));
}

#[test]
fn laws_hold_for_every_kind() {
    for kind in semilattice_kinds() {
        laws_for(kind, 1000);
    }
}

#[test]
fn examples() {
    let a = LatticeValue::set(["p1"]);
    let b = LatticeValue::set(["p2"]);
    assert_eq!(join(&a, &b).unwrap(), LatticeValue::set(["p1", "p2"]));
    assert!(leq(&a, &join(&a, &b).unwrap()).unwrap());
    let three = LatticeValue::MaxRegister(3.into());
    let five = LatticeValue::MaxRegister(5.into());
    assert_eq!(join(&three, &five).unwrap(), five);
    assert!(!leq(&five, &three).unwrap());
    assert_eq!(merge_all([&five]).unwrap(), five);
}

#[test]
fn exclusive_assignment_is_not_joinable() {
    let a = LatticeValue::ExclusiveAssign("x".into());
    assert!(join(&a, &a).is_err());
    assert!(join(&a, &LatticeValue::set(["x"])).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn merge_all_ignores_order(
        (values, perm) in proptest::sample::select(semilattice_kinds())
            .prop_flat_map(|k| vec(value_of(k), 1..7))
            .prop_flat_map(|v| {
                let n = v.len();
                (Just(v), Just((0..n).collect::<Vec<_>>()).prop_shuffle())
            })
    ) {
        let shuffled: Vec<&LatticeValue> = perm.iter().map(|&i| &values[i]).collect();
        prop_assert_eq!(merge_all(&values).unwrap(), merge_all(shuffled).unwrap());
    }

    #[test]
    fn wire_round_trip((a, _, _) in triple()) {
        let json = serde_json::to_string(&a).unwrap();
        let back: LatticeValue = serde_json::from_str(&json).unwrap();
        prop_assert_eq!(back, a);
    }
}
