use espf_harness::output::trace_csv;
use espf_harness::spec::split_override;
use espf_harness::{
    scenarios, summarize, FilterChoice, HarnessError, LinearScenario, OrbitScenario, ScenarioSpec,
};
use proptest::prelude::*;

fn overrides(args: &[&str]) -> Vec<(String, String)> {
    args.iter().map(|a| split_override(a).unwrap()).collect()
}

fn short_leo() -> ScenarioSpec {
    scenarios::builtin("leo_nominal")
        .unwrap()
        .with_overrides(&overrides(&["measurements.duration_s=3600"]))
        .unwrap()
}

#[test]
fn noiseless_linear_toy_is_tracked_exactly() {
    let trace = LinearScenario::constant_velocity_toy()
        .run(FilterChoice::Espf)
        .unwrap();
    assert_eq!(trace.records.len(), 20);
    let sq: f64 = trace
        .records
        .iter()
        .map(|r| {
            let e = r.espf.as_ref().unwrap();
            (e.mode[0] - r.truth[0]).powi(2) + (e.mode[1] - r.truth[1]).powi(2)
        })
        .sum();
    let rms = (sq / 20.0).sqrt();
    assert!(rms < 1e-6, "rms {rms:e}");
}

#[test]
fn same_seed_gives_identical_traces() {
    let spec = short_leo();
    let a = OrbitScenario::new(spec.clone())
        .unwrap()
        .run(FilterChoice::Both)
        .unwrap();
    let b = OrbitScenario::new(spec)
        .unwrap()
        .run(FilterChoice::Both)
        .unwrap();
    assert_eq!(trace_csv(&a), trace_csv(&b));
}

#[test]
fn filters_see_one_measurement_stream() {
    let sc = OrbitScenario::new(short_leo()).unwrap();
    let both = sc.run(FilterChoice::Both).unwrap();
    let espf = sc.run(FilterChoice::Espf).unwrap();
    let ukf = sc.run(FilterChoice::Ukf).unwrap();
    let stream = |t: &espf_harness::RunTrace| {
        t.records
            .iter()
            .map(|r| (r.epoch, r.source, r.measurement.clone(), r.truth.clone()))
            .collect::<Vec<_>>()
    };
    assert_eq!(stream(&both), stream(&espf));
    assert_eq!(stream(&both), stream(&ukf));
    // and each filter is unaffected by the other running alongside
    for (x, y) in both.records.iter().zip(&espf.records) {
        assert_eq!(x.espf, y.espf);
    }
    for (x, y) in both.records.iter().zip(&ukf.records) {
        assert_eq!(x.ukf, y.ukf);
    }
}

#[test]
fn different_seeds_change_the_noise() {
    let a = OrbitScenario::new(short_leo()).unwrap().simulate().unwrap();
    let mut spec = short_leo();
    spec.seed += 1;
    let b = OrbitScenario::new(spec).unwrap().simulate().unwrap();
    assert_eq!(a.truth, b.truth);
    assert_ne!(a.measurements, b.measurements);
}

#[test]
fn station_bias_shifts_only_that_station() {
    let base = short_leo();
    let biased = base
        .with_overrides(&overrides(&["stations.0.ra_bias_arcsec=10.0"]))
        .unwrap();
    let a = OrbitScenario::new(base).unwrap().simulate().unwrap();
    let b = OrbitScenario::new(biased).unwrap().simulate().unwrap();
    assert_eq!(a.measurements.len(), b.measurements.len());
    let shift = 10.0 * std::f64::consts::PI / 648000.0;
    for (x, y) in a.measurements.iter().zip(&b.measurements) {
        let d_ra = (y.value[0] - x.value[0] + std::f64::consts::PI)
            .rem_euclid(std::f64::consts::TAU)
            - std::f64::consts::PI;
        let expected = if x.source == 0 { shift } else { 0.0 };
        assert!(
            (d_ra - expected).abs() < 1e-12,
            "source {} shift {d_ra:e}",
            x.source
        );
        assert_eq!(x.value[1], y.value[1]);
    }
}

#[test]
fn leo_nominal_retains_most_points() {
    let trace = OrbitScenario::new(scenarios::builtin("leo_nominal").unwrap())
        .unwrap()
        .run(FilterChoice::Espf)
        .unwrap();
    let summary = summarize(&trace).unwrap();
    let retention = summary.espf.unwrap().necessity_retention_pct.unwrap();
    assert!(retention > 80.0, "retention {retention}");
}

#[test]
fn outlier_triggers_a_logged_reset() {
    let trace = LinearScenario::canonical_1d(20)
        .run(FilterChoice::Both)
        .unwrap();
    assert_eq!(trace.records.len(), 40);
    assert!(trace.records[20].espf.as_ref().unwrap().reset);
    let resets: Vec<_> = trace
        .events
        .iter()
        .filter(|e| e.kind == "epistemic_reset")
        .collect();
    assert!(!resets.is_empty());
    assert_eq!(resets[0].step, 20);
}

#[test]
fn unknown_override_lists_valid_keys() {
    let err = short_leo()
        .with_overrides(&overrides(&["espf.lambda_dd=1"]))
        .unwrap_err();
    match &err {
        HarnessError::InvalidOverride { key, valid } => {
            assert_eq!(key, "espf.lambda_dd");
            assert!(valid.iter().any(|k| k == "espf.lambda_d"));
        }
        other => panic!("unexpected {other}"),
    }
    assert_eq!(err.exit_code(), 2);
    assert!(err.to_string().contains("espf.lambda_d"));
}

#[test]
fn later_overrides_win() {
    let spec = short_leo()
        .with_overrides(&overrides(&["seed=5", "espf.eta=0.5", "seed=9"]))
        .unwrap();
    assert_eq!(spec.seed, 9);
    assert_eq!(spec.espf.eta, 0.5);
}

#[test]
fn invalid_values_are_rejected() {
    for arg in [
        "measurements.cadence_s=0",
        "espf.eta=1.5",
        "stations.1.noise_sigma_arcsec=-1",
    ] {
        let err = short_leo().with_overrides(&overrides(&[arg])).unwrap_err();
        assert_eq!(err.exit_code(), 2, "{arg}: {err}");
    }
}

#[test]
fn missing_scenario_file_names_the_path() {
    let err = ScenarioSpec::load(std::path::Path::new("/nonexistent/dir/leo.toml")).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    assert!(err.to_string().contains("/nonexistent/dir/leo"), "{err}");
}

#[test]
fn unknown_file_keys_are_reported() {
    let text = format!("{}\n[extra]\nfoo = 1\n", scenarios::LEO_NOMINAL);
    let (_, unknown) = ScenarioSpec::parse(&text).unwrap();
    assert_eq!(unknown, vec!["extra.foo".to_string()]);
}

#[test]
fn area_event_changes_truth_only_after_its_epoch() {
    let geo = scenarios::builtin("geo_area_change").unwrap();
    let mut spec = short_leo();
    spec.events = geo.events.clone();
    spec.events[0].at_measurement = 10;
    let with = OrbitScenario::new(spec.clone())
        .unwrap()
        .simulate()
        .unwrap();
    spec.events.clear();
    let without = OrbitScenario::new(spec).unwrap().simulate().unwrap();
    assert_eq!(with.truth[..=10], without.truth[..=10]);
    assert_ne!(with.truth[11], without.truth[11]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn resolved_config_round_trips(seed in 0u64..1000, eta in 0.05f64..0.99, cadence in 30.0f64..300.0) {
        let spec = short_leo()
            .with_overrides(&[
                ("seed".into(), seed.to_string()),
                ("espf.eta".into(), format!("{eta:?}")),
                ("measurements.cadence_s".into(), format!("{cadence:?}")),
            ])
            .unwrap();
        let (back, unknown) = ScenarioSpec::parse(&spec.resolved_text().unwrap()).unwrap();
        prop_assert!(unknown.is_empty());
        prop_assert_eq!(back, spec);
    }
}
