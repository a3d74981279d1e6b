use platoon_core::scenario::LeadProfile;
use platoon_core::{build_braking_scenario, build_oscillatory_scenario, run, ControllerKind, ScenarioSpec, SimTrace};
use proptest::prelude::*;

fn controller() -> impl Strategy<Value = ControllerKind> {
    prop_oneof![Just(ControllerKind::Acc), Just(ControllerKind::Cacc)]
}

fn short_braking(mu: f64, c: ControllerKind, h: f64, gap: f64, seed: u64) -> ScenarioSpec {
    let mut spec = build_braking_scenario(mu, c, h);
    spec.initial_gap = gap;
    spec.seed = seed;
    // bring the braking manoeuvre inside a short run
    if let LeadProfile::Braking { ref mut t_braking, .. } = spec.lead {
        *t_braking = 5.0;
    }
    spec.duration = 25.0;
    spec
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 12, ..ProptestConfig::default() })]

    #[test]
    fn trace_invariants_hold(
        mu in 0.5f64..1.0,
        c in controller(),
        h in 0.6f64..2.0,
        gap in 30.0f64..150.0,
        seed in any::<u64>(),
    ) {
        let spec = short_braking(mu, c, h, gap, seed);
        let trace = run(&spec).unwrap();
        let n = trace.len();
        if trace.collision.is_none() {
            prop_assert_eq!(n, (spec.duration / spec.dt).round() as usize + 1);
        }
        for (k, t) in trace.t.iter().enumerate() {
            prop_assert!((t - k as f64 * spec.dt).abs() < 1e-9);
        }
        for (i, veh) in trace.vehicles.iter().enumerate() {
            prop_assert_eq!(veh.v.len(), n);
            prop_assert!(veh.v.iter().all(|&v| v >= 0.0));
            if i == 0 {
                prop_assert!(veh.mode.iter().all(Option::is_none));
                continue;
            }
            prop_assert!(veh.mode.iter().all(Option::is_some));
            prop_assert!(veh
                .a_des
                .iter()
                .all(|&a| a >= spec.acc.a_min_des - 1e-12 && a <= spec.acc.a_max_des + 1e-12));
        }
    }

    #[test]
    fn seed_fixes_the_trace(c in controller(), seed in any::<u64>()) {
        let spec = short_braking(0.8, c, 0.6, 60.0, seed);
        let a = run(&spec).unwrap();
        let b = run(&spec).unwrap();
        prop_assert!(a.same_bits(&b));
    }
}

#[test]
fn csv_round_trip_is_lossless() {
    let spec = short_braking(0.5, ControllerKind::Cacc, 0.6, 50.0, 3);
    let trace = run(&spec).unwrap();
    let mut buf = Vec::new();
    trace.write_csv(&mut buf).unwrap();
    let mut back = SimTrace::read_csv(buf.as_slice(), trace.meta.clone()).unwrap();
    // collision events live in the summary, not the csv
    back.collision = trace.collision;
    assert!(trace.same_bits(&back));
}

#[test]
fn oscillatory_lead_stays_in_band() {
    let mut spec = build_oscillatory_scenario(2, ControllerKind::Acc, 1.1).unwrap();
    spec.duration = 170.0;
    let trace = run(&spec).unwrap();
    let v0 = spec.lead.initial_speed();
    let amp = 4.0 / 3.6;
    assert!(trace.vehicles[0].v.iter().all(|&v| (v - v0).abs() <= amp + 1e-9));
    assert!(trace.collision.is_none());
}

#[test]
fn invalid_spec_is_rejected() {
    let mut spec = build_braking_scenario(0.8, ControllerKind::Acc, 1.1);
    spec.n_vehicles = 1;
    assert!(run(&spec).is_err());
}
