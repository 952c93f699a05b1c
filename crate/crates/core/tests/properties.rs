mod common;

use calmtier::portfolio::{coordination_tax_exact, wilson_interval};
use calmtier::rational::Rational;
use calmtier::task::{Emission, ResourceConstraint};
use calmtier::{classify, load_task, JoinKind, Tier};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn specs_survive_serialization(seed in any::<u64>()) {
        let spec = common::random_spec(seed);
        let back = load_task(&spec.to_json()).unwrap();
        prop_assert_eq!(&back, &spec);
        prop_assert_eq!(back.to_json(), spec.to_json());
    }

    // Adding non-monotone structure can only raise the tier.
    #[test]
    fn tier_never_drops_when_constraints_grow(seed in any::<u64>(), pick in any::<prop::sample::Index>()) {
        let spec = common::random_spec(seed);
        let before = classify(&spec).unwrap().tier;
        let i = pick.index(spec.subtasks.len());

        let mut retractive = spec.clone();
        retractive.subtasks[i].emission = Some(Emission::Retractive);
        prop_assert_eq!(classify(&retractive).unwrap().tier, Tier::NM);

        let mut exclusive = spec.clone();
        exclusive.subtasks[i].output_decl = Some(JoinKind::ExclusiveAssign);
        prop_assert_eq!(classify(&exclusive).unwrap().tier, Tier::NM);

        let mut ordered = spec.clone();
        ordered.subtasks[i].output_decl = Some(JoinKind::CausalAppend);
        prop_assert!(classify(&ordered).unwrap().tier >= before.min(Tier::MO));

        let mut squeezed = spec.clone();
        squeezed.resources.push(ResourceConstraint {
            id: "extra".into(),
            capacity: 1.into(),
            shared: true,
        });
        for s in &mut squeezed.subtasks {
            s.demands.push(calmtier::task::Demand { resource: "extra".into(), amount: 1.into() });
        }
        let after = classify(&squeezed).unwrap().tier;
        prop_assert!(after >= before);
        if spec.subtasks.len() > 1 {
            prop_assert_eq!(after, Tier::NM);
        }
    }

    #[test]
    fn retractive_feedback_forces_nm(seed in any::<u64>(), pick in any::<prop::sample::Index>()) {
        let mut spec = common::random_spec(seed);
        prop_assume!(!spec.handoffs.is_empty());
        let e = spec.handoffs[pick.index(spec.handoffs.len())].clone();
        spec.feedbacks = vec![calmtier::task::FeedbackEdge { from: e.to, to: e.from, kind: Emission::Retractive }];
        let c = classify(&spec).unwrap();
        prop_assert_eq!(c.tier, Tier::NM);
    }

    // Causal-append outputs are order-sensitive on their own, so they stay out.
    #[test]
    fn edgeless_additive_specs_are_m(seed in any::<u64>()) {
        let mut spec = common::random_spec(seed);
        spec.handoffs.clear();
        spec.feedbacks.clear();
        spec.resources.retain(|r| !r.shared);
        let unshared: Vec<String> = spec.resources.iter().map(|r| r.id.clone()).collect();
        for s in &mut spec.subtasks {
            s.consumes.clear();
            s.emission = Some(Emission::Additive);
            s.demands.retain(|d| unshared.contains(&d.resource));
            if !matches!(&s.output_decl, Some(k) if k.is_semilattice() && !k.is_order_sensitive()) {
                s.output_decl = Some(JoinKind::SetUnion);
            }
        }
        spec.validity = spec.canonical_validity();
        prop_assert_eq!(classify(&spec).unwrap().tier, Tier::M);
    }

    #[test]
    fn wilson_contains_the_point_estimate(n in 1u64..5000, k_frac in 0.0f64..=1.0) {
        let k = ((n as f64) * k_frac).round() as u64;
        let (lo, hi) = wilson_interval(k, n, 0.95).unwrap();
        let p = k as f64 / n as f64;
        prop_assert!(0.0 <= lo && lo <= p + 1e-12 && p <= hi + 1e-12 && hi <= 1.0);
    }

    #[test]
    fn tax_is_monotone_and_bounded(f in 0i128..=100, c in 101i128..=1000, df in 1i128..=10, dc in 1i128..=50) {
        let f = Rational::new(f, 100);
        let c = Rational::new(c, 100);
        let t = coordination_tax_exact(&f, &c).unwrap();
        let limit = (c - 1) / c;
        prop_assert!(t >= 0.into() && t <= limit);
        if f > 0.into() {
            prop_assert!(t < limit);
        }
        let f2 = f + Rational::new(df, 100);
        if f2 <= 1.into() {
            prop_assert!(coordination_tax_exact(&f2, &c).unwrap() < t);
        }
        if f < 1.into() {
            let c2 = c + Rational::new(dc, 100);
            prop_assert!(coordination_tax_exact(&f, &c2).unwrap() > t);
        }
    }
}
