use memkernel::dynmap::compute_v;
use memkernel::kernel::{validate_spec, KernelSpec, ScalarFn, TimeGrid};
use memkernel::linalg;
use memkernel::zoo;

#[test]
fn every_preset_round_trips_through_json() {
    for preset in zoo::presets() {
        let (model, grid) = zoo::build_preset::<f64>(preset.name).unwrap();
        let back = KernelSpec::<f64>::from_json(&model.spec.to_json()).unwrap();
        assert_eq!(back.to_json(), model.spec.to_json(), "{}", preset.name);
        let a = compute_v(&validate_spec(&model.spec, &grid).unwrap()).unwrap();
        let b = compute_v(&validate_spec(&back, &grid).unwrap()).unwrap();
        assert!(a.sup_distance(&b) < 1e-14, "{}", preset.name);
    }
}

#[test]
fn transport_is_translation_covariant() {
    let sites = 4;
    let model = zoo::transport(ScalarFn::exponential(0.25, 2.0), sites).unwrap();
    let grid = TimeGrid::new(5e-3, 400).unwrap();
    let v = compute_v(&validate_spec(&model.spec, &grid).unwrap()).unwrap();
    let populations = |start: usize| -> Vec<f64> {
        let rho = linalg::unit::<f64>(sites, start, start);
        let last = v.evolve(&rho).unwrap().pop().unwrap();
        (0..sites).map(|n| last[(n, n)].re).collect()
    };
    let p0 = populations(0);
    for shift in 1..sites {
        let p = populations(shift);
        for n in 0..sites {
            assert!((p[(n + shift) % sites] - p0[n]).abs() < 1e-10);
        }
    }
}
