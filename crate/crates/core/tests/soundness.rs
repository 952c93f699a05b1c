mod common;

use calmtier::data::bundled_tasks;
use calmtier::Tier;

#[test]
fn bundled_specs_sit_on_their_boundary() {
    let tiers: Vec<Tier> = bundled_tasks(None)
        .unwrap()
        .iter()
        .map(|s| common::boundary_holds(s).unwrap())
        .collect();
    use Tier::*;
    assert_eq!(tiers, [M, M, M, M, MO, MO, NM, NM, NM, NM]);
}

#[test]
fn random_specs_sit_on_their_boundary() {
    let mut failures = Vec::new();
    let mut seen = [0usize; 3];
    for seed in 0..150 {
        let spec = common::random_spec(seed);
        match common::boundary_holds(&spec) {
            Ok(t) => seen[t as usize] += 1,
            Err(e) => failures.push(e),
        }
    }
    assert!(failures.is_empty(), "{failures:#?}");
    assert!(seen.iter().all(|&n| n > 0), "{seen:?}");
}
