use espf_core::model::{LinearMeasurement, LinearProcess, MeasurementModel};
use espf_core::ukf::{gaussian_limit_espf, ukf_predict, ukf_update};
use espf_core::unscented::{kalman_correction, UnscentedParams, UnscentedWeights};
use espf_core::GaussianBelief;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.sample::<f64, _>(StandardNormal))
}

fn random_spd(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let a = random_matrix(rng, n, n);
    &a * a.transpose() + DMatrix::identity(n, n) * 0.1
}

/// Worst (mean, covariance) deviation from the closed form over 100 random
/// affine systems, together with the largest `Σ|w_m| · ‖Aμ + b‖∞` seen.
fn affine_deviation(params: UnscentedParams) -> (f64, f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (mut mean_worst, mut cov_worst, mut scale_worst) = (0.0f64, 0.0f64, 0.0f64);
    for trial in 0..100 {
        let n = 1 + trial % 6;
        let a = random_matrix(&mut rng, n, n);
        let b = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let q = random_spd(&mut rng, n);
        let mean = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let cov = random_spd(&mut rng, n);
        let belief = GaussianBelief::new(mean.clone(), cov.clone()).unwrap();
        let f = LinearProcess {
            matrix: a.clone(),
            offset: b.clone(),
        };
        let p = ukf_predict(&belief, &f, &q, params).unwrap();
        let exact_mean = &a * &mean + &b;
        mean_worst = mean_worst.max((&p.mean - &exact_mean).amax());
        cov_worst = cov_worst.max((&p.covariance - (&a * &cov * a.transpose() + &q)).amax());
        let w = UnscentedWeights::new(n, params).unwrap();
        let abs_weight: f64 = w.mean.iter().map(|x| x.abs()).sum();
        scale_worst = scale_worst.max(abs_weight * exact_mean.amax().max(1.0));
    }
    (mean_worst, cov_worst, scale_worst)
}

#[test]
fn affine_maps_are_propagated_exactly() {
    // well-conditioned scaling: no weight amplification of rounding
    let (m, c, _) = affine_deviation(UnscentedParams {
        alpha: 1.0,
        beta: 2.0,
        kappa: 0.5,
    });
    assert!(m < 1e-10 && c < 1e-10, "mean {m:e}, covariance {c:e}");
}

#[test]
fn affine_maps_at_default_scaling() {
    // α = 1e-3 puts a weight of about −1/α² on the centre point, so the
    // mean inherits f-evaluation rounding scaled by Σ|w|; the covariance
    // does not
    let (m, c, scale) = affine_deviation(UnscentedParams::default());
    assert!(c < 1e-10, "covariance {c:e}");
    assert!(
        m < 8.0 * f64::EPSILON * scale,
        "mean {m:e} against rounding scale {scale:e}"
    );
}

#[test]
fn identity_measurement_never_grows_trace() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..50 {
        let n = rng.random_range(1..=4);
        let belief = GaussianBelief::new(DVector::zeros(n), random_spd(&mut rng, n)).unwrap();
        let r = random_spd(&mut rng, n);
        let y = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let post = ukf_update(
            &belief,
            &y,
            &LinearMeasurement::identity(n),
            &r,
            UnscentedParams::default(),
        )
        .unwrap();
        assert!(post.covariance.trace() <= belief.covariance.trace());
    }
}

#[test]
fn standard_and_joseph_forms_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..50 {
        let n = rng.random_range(1..=4);
        let m = rng.random_range(1..=n);
        let h = LinearMeasurement::new(random_matrix(&mut rng, m, n));
        let mean = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let cov = random_spd(&mut rng, n);
        let r = random_spd(&mut rng, m);
        let y = DVector::from_fn(m, |_, _| rng.sample::<f64, _>(StandardNormal));
        let w = UnscentedWeights::new(n, UnscentedParams::default()).unwrap();
        let points = w.sigma_points(&mean, &cov).unwrap();
        let gammas: Vec<_> = points.iter().map(|p| h.measure(p).unwrap()).collect();
        let c = kalman_correction(&w, &mean, &cov, &points, &gammas, &y, &r, &h).unwrap();
        let ikh = DMatrix::identity(n, n) - &c.gain * &h.matrix;
        let joseph = &ikh * &cov * ikh.transpose() + &c.gain * &r * c.gain.transpose();
        let scale = cov.amax().max(1.0);
        assert!((&c.covariance - joseph).amax() / scale < 1e-8);
    }
}

#[test]
fn gaussian_limit_tracks_ukf_on_constant_velocity() {
    let dt = 1.0;
    let f = LinearProcess::new(DMatrix::from_row_slice(2, 2, &[1.0, dt, 0.0, 1.0]));
    let h = LinearMeasurement::new(DMatrix::from_row_slice(1, 2, &[1.0, 0.0]));
    let q =
        DMatrix::from_row_slice(2, 2, &[dt.powi(3) / 3.0, dt * dt / 2.0, dt * dt / 2.0, dt]) * 0.01;
    let r = DMatrix::from_element(1, 1, 0.25);
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut truth = DVector::from_column_slice(&[0.0, 1.0]);
    let mut ys = Vec::new();
    for _ in 0..50 {
        truth = &f.matrix * truth;
        ys.push(Some(DVector::from_element(
            1,
            truth[0] + 0.5 * rng.sample::<f64, _>(StandardNormal),
        )));
    }
    let belief = GaussianBelief::new(
        DVector::from_column_slice(&[0.5, 0.5]),
        DMatrix::identity(2, 2),
    )
    .unwrap();
    let report =
        gaussian_limit_espf(&belief, &f, &h, &q, &r, &ys, UnscentedParams::default()).unwrap();
    assert_eq!(report.steps.len(), 50);
    assert!(report.max_mean_discrepancy() < 1e-6);
    assert!(report.max_spread_discrepancy() < 1e-5);
}

#[test]
fn prediction_only_runs_agree() {
    let f = LinearProcess::new(DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]));
    let h = LinearMeasurement::identity(2);
    let q = DMatrix::identity(2, 2) * 0.01;
    let belief = GaussianBelief::new(
        DVector::from_column_slice(&[1.0, 0.0]),
        DMatrix::identity(2, 2),
    )
    .unwrap();
    let report = gaussian_limit_espf(
        &belief,
        &f,
        &h,
        &q,
        &q,
        &vec![None; 10],
        UnscentedParams::default(),
    )
    .unwrap();
    assert!(report.max_mean_discrepancy() < 1e-9);
    assert!(report.max_spread_discrepancy() < 1e-9);
}
