//! Invariants checked on random inputs.

use levelprox::catalog::Entry;
use levelprox::{setvalue_equal, Oracle, ScalarFn, SeparableFunction, SetValue};
use proptest::prelude::*;

fn set_strategy() -> impl Strategy<Value = SetValue> {
    prop_oneof![
        Just(SetValue::Empty),
        prop::collection::vec(-10.0..10.0f64, 1..4).prop_map(|p| SetValue::finite(p, 0.0)),
        (-10.0..10.0f64, 0.0..5.0f64).prop_map(|(a, w)| SetValue::interval(a, a + w)),
        (-10.0..10.0f64).prop_map(|lo| SetValue::HalflineUp { lo }),
        (-10.0..10.0f64).prop_map(|hi| SetValue::HalflineDown { hi }),
    ]
}

const SPECS: [&str; 8] = [
    "l0",
    "scaled_l0:gamma=0.5",
    "abs",
    "neg_abs",
    "sin",
    "pnorm:p=0.5",
    "log_eps:eps=0.5",
    "quad:sigma=-0.5",
];

fn spec_strategy() -> impl Strategy<Value = ScalarFn> {
    prop::sample::select(SPECS.to_vec()).prop_map(|s| s.parse::<ScalarFn>().unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, ..ProptestConfig::default() })]

    #[test]
    fn set_equality_is_reflexive_and_symmetric(a in set_strategy(), b in set_strategy(), tol in 0.0..1.0f64) {
        prop_assert!(setvalue_equal(&a, &a, 0.0));
        prop_assert_eq!(setvalue_equal(&a, &b, tol), setvalue_equal(&b, &a, tol));
    }

    #[test]
    fn json_round_trip(a in set_strategy()) {
        let s = serde_json::to_string(&a).unwrap();
        let b: SetValue = serde_json::from_str(&s).unwrap();
        prop_assert!(setvalue_equal(&a, &b, 1e-12), "{} vs {}", a, b);
    }

    #[test]
    fn separable_sum_adds_components(xs in prop::collection::vec(-3.0..3.0f64, 1..5)) {
        let comps: Vec<ScalarFn> = (0..xs.len()).map(|i| SPECS[i % SPECS.len()].parse().unwrap()).collect();
        let total: f64 = comps.iter().zip(&xs).map(|(c, &x)| c.value(x).unwrap()).sum();
        let sep = SeparableFunction::new(comps).unwrap();
        prop_assert!((sep.eval(&xs).unwrap().to_f64() - total).abs() < 1e-12);
    }

    #[test]
    fn envelope_is_consistent_and_decreasing_in_lambda(f in spec_strategy(), x in -3.0..3.0f64, l1 in 0.2..0.9f64, dl in 0.05..0.9f64) {
        let o = Oracle::default();
        let l2 = l1 + dl;
        let e1 = o.envelope(&f, l1, x).unwrap();
        let e2 = o.envelope(&f, l2, x).unwrap();
        prop_assert!(e2 <= e1 + 1e-9, "e({l2}) = {e2} > e({l1}) = {e1}");
        prop_assert!(e1 <= f.value(x).unwrap() + 1e-12);
        for u in o.prox(&f, l1, x).unwrap().samples() {
            let v = f.value(u).unwrap() + (u - x) * (u - x) / (2.0 * l1);
            prop_assert!((v - e1).abs() < 1e-8 * e1.abs().max(1.0), "u = {u}: {v} vs {e1}");
        }
    }

    #[test]
    fn prox_is_monotone(f in spec_strategy(), x in -3.0..3.0f64, d in 0.01..2.0f64, l in 0.2..1.5f64) {
        let o = Oracle::default();
        let (p, q) = (o.prox(&f, l, x).unwrap(), o.prox(&f, l, x + d).unwrap());
        prop_assert!(p.hi() <= q.lo() + 1e-6, "{p} at {x} vs {q} at {}", x + d);
    }

    #[test]
    fn level_subdifferentials_are_nested(f in spec_strategy(), x in -2.0..2.0f64, l1 in 0.2..0.9f64, dl in 0.05..0.9f64) {
        let o = Oracle::default();
        let big = o.subdiff_direct(&f, l1, x).unwrap();
        let small = o.subdiff_direct(&f, l1 + dl, x).unwrap();
        if !small.is_empty() {
            prop_assert!(!big.is_empty());
            prop_assert!(small.lo() >= big.lo() - 1e-6 && small.hi() <= big.hi() + 1e-6, "{small} not in {big}");
        }
    }

    #[test]
    fn direct_and_shifted_oracles_agree(f in spec_strategy(), x in -2.0..2.0f64, l in 0.2..1.5f64) {
        let o = Oracle::default();
        let a = o.subdiff_direct(&f, l, x).unwrap();
        let b = o.subdiff_shifted(&f, l, x).unwrap();
        prop_assert_eq!(a.is_empty(), b.is_empty(), "{} vs {}", a, b);
        if !a.is_empty() {
            prop_assert!((a.lo() - b.lo()).abs() < 1e-6 && (a.hi() - b.hi()).abs() < 1e-6, "{} vs {}", a, b);
        }
    }

    #[test]
    fn closed_forms_agree_with_direct_oracle(x in -3.0..3.0f64, l in 0.2..1.5f64) {
        let o = Oracle::default();
        for spec in ["l0", "abs", "scaled_l0:gamma=0.5"] {
            let f: ScalarFn = spec.parse().unwrap();
            let closed = f.entry().unwrap().level_subdiff(l, x).unwrap().unwrap();
            let direct = o.subdiff_direct(&f, l, x).unwrap();
            prop_assert!(setvalue_equal(&closed, &direct, 1e-6) || (closed.is_empty() && direct.is_empty()), "{spec} at {x}: {closed} vs {direct}");
        }
    }

    #[test]
    fn hull_is_below_and_has_the_same_envelope(f in spec_strategy(), x in -2.0..2.0f64, l in 0.2..1.0f64) {
        let o = Oracle::default();
        let h = o.hull(&f, l, x).unwrap().to_f64();
        prop_assert!(h <= f.value(x).unwrap() + 1e-12);
    }

    #[test]
    fn envelope_of_l0_hull_equals_envelope_of_l0(x in -4.0..4.0f64, l in 0.2..2.0f64) {
        let o = Oracle::default();
        let f: ScalarFn = "l0".parse().unwrap();
        let g = ScalarFn::Catalog(Entry::HullL0 { mu: l });
        let (a, b) = (o.envelope(&f, l, x).unwrap(), o.envelope(&g, l, x).unwrap());
        prop_assert!((a - b).abs() < 1e-12);
        // The grid oracle on the hull agrees as well.
        let c = o.prox_oracle(&g, l, x).unwrap().value;
        prop_assert!((a - c).abs() < 1e-6);
    }
}
