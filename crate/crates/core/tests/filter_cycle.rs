use espf_core::filter::Observation;
use espf_core::model::{LinearMeasurement, LinearProcess};
use espf_core::{
    CompatibilityKind, Espf, EspfConfig, EspfError, Hyperrectangle, ProcessNoise, SupportGeneration,
};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn dv(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}

#[derive(Debug, Clone)]
struct Trial {
    n: usize,
    a: Vec<f64>,
    half: Vec<f64>,
    center: Vec<f64>,
    y_offset: Vec<f64>,
    noise: f64,
    meas: f64,
    eta: f64,
    graded: bool,
    smolyak: bool,
    lambda_t: f64,
    tau: usize,
}

fn trial() -> impl Strategy<Value = Trial> {
    (1usize..=4).prop_flat_map(|n| {
        (
            proptest::collection::vec(-0.3f64..0.3, n * n),
            proptest::collection::vec(0.1f64..3.0, n),
            proptest::collection::vec(-5.0f64..5.0, n),
            proptest::collection::vec(-4.0f64..4.0, n),
            0.0f64..0.5,
            1e-3f64..1.0,
            0.05f64..0.99,
            any::<bool>(),
            any::<bool>(),
            0.0f64..0.2,
            0usize..20,
        )
            .prop_map(
                move |(
                    a,
                    half,
                    center,
                    y_offset,
                    noise,
                    meas,
                    eta,
                    graded,
                    smolyak,
                    lambda_t,
                    tau,
                )| Trial {
                    n,
                    a,
                    half,
                    center,
                    y_offset,
                    noise,
                    meas,
                    eta,
                    graded,
                    smolyak,
                    lambda_t,
                    tau,
                },
            )
    })
}

fn config(t: &Trial) -> EspfConfig {
    EspfConfig {
        eta: t.eta,
        lambda_t: t.lambda_t,
        lambda_d: 0.1,
        lambda_plus: 0.5,
        lambda_minus: 0.5,
        compatibility: if t.graded {
            CompatibilityKind::Graded
        } else {
            CompatibilityKind::Binary
        },
        generation: if t.smolyak {
            SupportGeneration::Smolyak { level: 2 }
        } else {
            SupportGeneration::Axis
        },
        ..EspfConfig::default()
    }
}

proptest! {
    #[test]
    fn one_cycle_invariants(t in trial()) {
        let n = t.n;
        let cfg = config(&t);
        let filter = Espf::new(cfg.clone()).unwrap();
        let bounds = Hyperrectangle::from_center(&dv(&t.center), &dv(&t.half)).unwrap();
        let mut state = filter.initialize(&bounds).unwrap();
        state.tau = t.tau;
        let a = DMatrix::identity(n, n) + DMatrix::from_row_slice(n, n, &t.a);
        let process = LinearProcess::new(a);
        let noise = ProcessNoise::bounded(&DVector::from_element(n, t.noise)).unwrap();
        let predicted = filter.predict(&state, &process, &noise).unwrap();

        let h = LinearMeasurement::identity(n);
        let y = dv(&t.center) + dv(&t.y_offset);
        let r = DMatrix::identity(n, n) * t.meas;
        let obs = Observation { value: &y, model: &h, spread: &r };
        let (posterior, diag) = match filter.update(&predicted, &obs) {
            Ok(v) => v,
            Err(EspfError::TotalFalsification) => return Ok(()),
            Err(e) => panic!("{e}"),
        };

        let prior = &predicted.ensemble;
        let post = &posterior.ensemble;
        for i in 0..post.len() {
            prop_assert!(post.plausibility[i] <= prior.plausibility[i]);
            if prior.alive[i] && post.compatibility[i] == 1.0 {
                prop_assert!(post.alive[i], "compatible point {} pruned", i);
            }
        }
        let total: f64 = diag.weights.iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        prop_assert!(diag.weights.iter().all(|&w| (0.0..=1.0).contains(&w)));
        let hull = Hyperrectangle::bounding(&post.live_points()).unwrap();
        prop_assert!(hull.contains(&posterior.mode, 1e-9));

        let (next, _) = filter.regenerate(&posterior).unwrap();
        let lower = cfg.sigma_min * (-cfg.lambda_t * t.tau as f64).exp();
        prop_assert!(next.sigma >= lower * (1.0 - 1e-12) && next.sigma <= cfg.sigma_max);
        prop_assert!(next.bounds.contains(&next.mode, 0.0));

        // determinism
        let again = filter.update(&predicted, &obs).unwrap();
        prop_assert_eq!(&again.0, &posterior);
        prop_assert_eq!(&again.1.weights, &diag.weights);
    }
}

/// Constant-velocity truth observed in position and velocity without
/// noise; the mode must stay within the admissible radius of the
/// straight-line trajectory.
#[test]
fn linear_two_dimensional_track() {
    let dt = 0.5;
    let f = LinearProcess::new(DMatrix::from_row_slice(2, 2, &[1.0, dt, 0.0, 1.0]));
    let h = LinearMeasurement::identity(2);
    let r = DMatrix::identity(2, 2) * 0.01;
    // dispersion feedback keeps the regenerated cloud from collapsing
    let filter = Espf::new(EspfConfig {
        lambda_d: 0.2,
        ..EspfConfig::default()
    })
    .unwrap();
    let (p0, v0) = (2.0, -0.4);
    let mut state = filter
        .initialize(
            &Hyperrectangle::from_center(&dv(&[p0 + 0.3, v0 - 0.1]), &dv(&[1.0, 0.5])).unwrap(),
        )
        .unwrap();
    let noise = ProcessNoise::bounded(&dv(&[0.01, 0.01])).unwrap();
    for k in 1..=20 {
        let t = k as f64 * dt;
        let truth = dv(&[p0 + v0 * t, v0]);
        let obs = Observation {
            value: &truth,
            model: &h,
            spread: &r,
        };
        let out = filter.step(&state, &f, &noise, Some(&obs)).unwrap();
        state = out.state;
        let d2 = state.spread.mahalanobis_sq(&(&state.mode - &truth));
        assert!(
            d2.sqrt() <= state.kernel_radius,
            "step {k}: distance {} radius {}",
            d2.sqrt(),
            state.kernel_radius
        );
    }
}

/// Identity dynamics, fixed truth and a fixed sensor spread: the cloud may
/// not grow once it has settled.
#[test]
fn support_contracts_under_repeated_evidence() {
    let filter = Espf::new(EspfConfig {
        generation: SupportGeneration::Axis,
        ..EspfConfig::default()
    })
    .unwrap();
    let mut state = filter
        .initialize(&Hyperrectangle::new(dv(&[-10.0]), dv(&[10.0])).unwrap())
        .unwrap();
    let h = LinearMeasurement::identity(1);
    let y = dv(&[1.5]);
    let r = DMatrix::from_element(1, 1, 0.04);
    let mut dispersion = Vec::new();
    for _ in 0..15 {
        let obs = Observation {
            value: &y,
            model: &h,
            spread: &r,
        };
        let out = filter
            .step(
                &state,
                &LinearProcess::identity(1),
                &ProcessNoise::none(1),
                Some(&obs),
            )
            .unwrap();
        dispersion.push(out.regeneration.unwrap().dispersion);
        state = out.state;
    }
    for w in dispersion[3..].windows(2) {
        assert!(w[1] <= w[0] + 1e-12, "{dispersion:?}");
    }
}

#[test]
fn identical_runs_bit_match() {
    let run = || {
        let filter = Espf::new(EspfConfig::default()).unwrap();
        let mut state = filter.initialize(&Hyperrectangle::unit(3)).unwrap();
        let f = LinearProcess::new(DMatrix::from_row_slice(
            3,
            3,
            &[1.0, 0.1, 0.0, 0.0, 1.0, 0.1, 0.0, 0.0, 1.0],
        ));
        let h = LinearMeasurement::new(DMatrix::from_row_slice(1, 3, &[1.0, 0.0, 0.0]));
        let r = DMatrix::from_element(1, 1, 0.01);
        let noise = ProcessNoise::bounded(&dv(&[0.01, 0.01, 0.01])).unwrap();
        let mut modes = Vec::new();
        for k in 0..10 {
            let y = dv(&[0.05 * k as f64]);
            let obs = Observation {
                value: &y,
                model: &h,
                spread: &r,
            };
            state = match filter.step(&state, &f, &noise, Some(&obs)) {
                Ok(out) => out.state,
                Err(EspfError::TotalFalsification) => filter
                    .recover(&filter.predict(&state, &f, &noise).unwrap(), 2.0)
                    .unwrap(),
                Err(e) => panic!("{e}"),
            };
            modes.push(state.mode.clone());
        }
        modes
    };
    assert_eq!(run(), run());
}
