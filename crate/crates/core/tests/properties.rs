mod common;

use common::*;
use magworm::scenario::Scenario;
use proptest::prelude::*;

fn offsets() -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(-1.0f64..1.0, 3 * 21)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn internal_forces_conserve_momentum(off in offsets(), amp in 1e-6f64..300e-6) {
        let x = perturbed(&fibre(20), &off, amp);
        let (force, torque) = momentum_residuals(&x);
        prop_assert!(force <= 1e-12, "net force {force:e}");
        prop_assert!(torque <= 1e-12, "net torque {torque:e}");
    }

    #[test]
    fn bending_force_is_the_energy_gradient(off in offsets(), amp in 20e-6f64..200e-6) {
        let x = perturbed(&fibre(20), &off, amp);
        let err = bending_gradient_error(&x);
        prop_assert!(err <= 1e-6, "relative error {err:e}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn unactuated_rod_never_exceeds_its_start_energy(off in offsets(), amp in 0.01f64..0.2) {
        prop_assume!(off.iter().any(|a| a.abs() > 0.1));
        let x = bent(&fibre(20), &off, amp);
        let (excess, last) = energy_history(x, 3000);
        prop_assert!(excess <= 1e-12, "energy exceeded its start value by {excess:e}");
        prop_assert!(last < 1.0);
    }

    #[test]
    fn resolved_scenarios_round_trip(speed_mm_s in 1.0f64..40.0, friction in 0.0f64..1.0, stride in 1u64..5000) {
        let text = format!(
            r#"{{"schema":"1","design":"boas-big-head-paper","scene":"tank","friction":{friction},
                "magnet":{{"preset":"guide","position":["0 m","0 m","-20 mm"],"axis":[0,0,1]}},
                "sim":{{"record_stride":{stride},"duration":"10 ms"}},
                "controller":{{"kind":"scripted","waypoints":[
                  {{"t":"0 s","pos":["0 m","0 m","-20 mm"],"axis":[0,0,1]}},
                  {{"t":"1 s","pos":["{speed_mm_s} mm","0 m","-20 mm"],"axis":[0,0,1]}}]}}}}"#
        );
        let a = Scenario::from_json(&text).unwrap();
        let dump = a.resolved_json();
        let b = Scenario::from_json(&dump).unwrap();
        prop_assert_eq!(&dump, &b.resolved_json());
        prop_assert_eq!(a.world.config.dt, b.world.config.dt);
        prop_assert!(a.world.scene.friction_coeff == b.world.scene.friction_coeff);
    }
}

#[test]
fn builtin_scenarios_round_trip() {
    assert_eq!(round_trip_mismatches(), Vec::<String>::new());
}

#[test]
fn reruns_are_bit_identical() {
    for name in ["tank-speed", "cargo-transport", "aneurysm-embolization"] {
        assert_eq!(short_hash(name, 2e-3), short_hash(name, 2e-3), "{name}");
    }
}
