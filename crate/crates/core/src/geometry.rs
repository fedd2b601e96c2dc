//! Spread matrices and the ellipsoidal machinery built on them.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// Base diagonal loading added to every estimated spread.
pub const DEFAULT_REGULARIZATION: f64 = 1e-6;
/// Number of times the loading is doubled before giving up.
pub const MAX_REGULARIZATION_RETRIES: usize = 10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },
    #[error("matrix is not symmetric (relative asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("matrix stayed indefinite after {retries} regularization attempts")]
    Degenerate { retries: usize },
    #[error("invalid argument: {0}")]
    Argument(String),
}

/// Plain Cholesky factor, `None` on a non-positive or non-finite pivot.
fn cholesky_lower(a: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = a.nrows();
    let mut l = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut diag = a[(j, j)];
        for k in 0..j {
            diag -= l[(j, k)] * l[(j, k)];
        }
        if !(diag > 0.0) || !diag.is_finite() {
            return None;
        }
        let pivot = diag.sqrt();
        l[(j, j)] = pivot;
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / pivot;
        }
    }
    Some(l)
}

/// Result of [`regularized_cholesky`].
#[derive(Debug, Clone, PartialEq)]
pub struct RegularizedFactor {
    /// Lower-triangular `L` with `L Lᵀ = A + shift · I`.
    pub lower: DMatrix<f64>,
    /// Diagonal loading that was needed; 0 when `A` factored directly.
    pub shift: f64,
    /// Number of loading attempts made.
    pub escalations: usize,
}

/// Cholesky factorization with escalating diagonal loading.
///
/// The symmetric part of `matrix` is factored as is; on failure
/// `ε, 2ε, 4ε, …` is added to the diagonal, at most
/// [`MAX_REGULARIZATION_RETRIES`] times, with `ε = `[`DEFAULT_REGULARIZATION`].
pub fn regularized_cholesky(matrix: &DMatrix<f64>) -> Result<RegularizedFactor, GeometryError> {
    regularized_cholesky_with(matrix, DEFAULT_REGULARIZATION)
}

pub fn regularized_cholesky_with(
    matrix: &DMatrix<f64>,
    epsilon: f64,
) -> Result<RegularizedFactor, GeometryError> {
    if !matrix.is_square() {
        return Err(GeometryError::Dimension {
            expected: matrix.nrows(),
            actual: matrix.ncols(),
        });
    }
    let sym = symmetric_part(matrix);
    if let Some(lower) = cholesky_lower(&sym) {
        return Ok(RegularizedFactor {
            lower,
            shift: 0.0,
            escalations: 0,
        });
    }
    let n = sym.nrows();
    let mut shift = epsilon;
    for attempt in 1..=MAX_REGULARIZATION_RETRIES {
        let loaded = &sym + DMatrix::identity(n, n) * shift;
        if let Some(lower) = cholesky_lower(&loaded) {
            return Ok(RegularizedFactor {
                lower,
                shift,
                escalations: attempt,
            });
        }
        shift *= 2.0;
    }
    Err(GeometryError::Degenerate {
        retries: MAX_REGULARIZATION_RETRIES,
    })
}

pub(crate) fn symmetric_part(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Symmetric positive-definite spread with its factor and log-determinant.
#[derive(Debug, Clone, PartialEq)]
pub struct SpreadMatrix {
    matrix: DMatrix<f64>,
    cholesky: DMatrix<f64>,
    log_det: f64,
}

impl SpreadMatrix {
    /// Factors `matrix`, loading the diagonal if needed. The stored matrix
    /// is the one actually factored.
    pub fn new(matrix: DMatrix<f64>) -> Result<Self, GeometryError> {
        let scale = matrix.amax().max(f64::MIN_POSITIVE);
        let asym = (&matrix - matrix.transpose()).amax() / scale;
        if asym > 1e-10 {
            return Err(GeometryError::NotSymmetric(asym));
        }
        let factor = regularized_cholesky(&matrix)?;
        let n = matrix.nrows();
        let matrix = symmetric_part(&matrix) + DMatrix::identity(n, n) * factor.shift;
        Ok(Self::from_parts(matrix, factor.lower))
    }

    /// Diagonal spread from per-axis variances.
    pub fn diagonal(variances: &DVector<f64>) -> Result<Self, GeometryError> {
        Self::new(DMatrix::from_diagonal(variances))
    }

    fn from_parts(matrix: DMatrix<f64>, cholesky: DMatrix<f64>) -> Self {
        let log_det = 2.0 * cholesky.diagonal().iter().map(|d| d.ln()).sum::<f64>();
        Self {
            matrix,
            cholesky,
            log_det,
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Lower-triangular factor `L`, `L Lᵀ = matrix`.
    pub fn cholesky(&self) -> &DMatrix<f64> {
        &self.cholesky
    }

    /// Dispersion `log det Π`.
    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    /// `vᵀ Π⁻¹ v` through the factor.
    pub fn mahalanobis_sq(&self, v: &DVector<f64>) -> f64 {
        let z = self
            .cholesky
            .solve_lower_triangular(v)
            .expect("cholesky factor has a positive diagonal");
        z.norm_squared()
    }

    /// Support function of the unit-level ellipsoid `{x : xᵀ Π⁻¹ x ≤ 1}`
    /// in direction `d`: `sqrt(dᵀ Π d)`.
    pub fn support(&self, d: &DVector<f64>) -> f64 {
        d.dot(&(&self.matrix * d)).max(0.0).sqrt()
    }
}

/// Outer-product average of `points` about `mode`, plus `εI`.
///
/// The divisor is the number of points.
pub fn estimate_spread(
    points: &[DVector<f64>],
    mode: &DVector<f64>,
) -> Result<SpreadMatrix, GeometryError> {
    estimate_spread_with(points, mode, DEFAULT_REGULARIZATION)
}

pub fn estimate_spread_with(
    points: &[DVector<f64>],
    mode: &DVector<f64>,
    epsilon: f64,
) -> Result<SpreadMatrix, GeometryError> {
    if points.is_empty() {
        return Err(GeometryError::Argument("spread of an empty cloud".into()));
    }
    let n = mode.len();
    let mut sum = DMatrix::zeros(n, n);
    for p in points {
        if p.len() != n {
            return Err(GeometryError::Dimension {
                expected: n,
                actual: p.len(),
            });
        }
        let d = p - mode;
        sum.ger(1.0, &d, &d, 1.0);
    }
    let spread = sum / points.len() as f64 + DMatrix::identity(n, n) * epsilon;
    SpreadMatrix::new(spread)
}

/// `r = sqrt(−2 ln(1 − η))` for a necessity level `η ∈ (0, 1)`.
pub fn plausibility_radius(eta: f64) -> Result<f64, GeometryError> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(GeometryError::Argument(format!(
            "necessity level {eta} is outside (0, 1)"
        )));
    }
    Ok((-2.0 * (-eta).ln_1p()).sqrt())
}

/// Inverse of [`plausibility_radius`]: `η = 1 − exp(−r²/2)`.
pub fn necessity_level(radius: f64) -> f64 {
    -(-0.5 * radius * radius).exp_m1()
}

/// Trace-minimal ellipsoid containing the Minkowski sum of the unit-level
/// ellipsoids of `a` and `b`: `(1 + 1/β) a + (1 + β) b` with
/// `β = sqrt(tr a / tr b)`. Falls back to `a + b` when either trace is zero.
pub fn minkowski_outer_bound(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
) -> Result<SpreadMatrix, GeometryError> {
    if a.shape() != b.shape() {
        return Err(GeometryError::Dimension {
            expected: a.nrows(),
            actual: b.nrows(),
        });
    }
    SpreadMatrix::new(minkowski_outer_bound_matrix(a, b))
}

fn minkowski_outer_bound_matrix(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let (ta, tb) = (a.trace(), b.trace());
    if ta <= 0.0 || tb <= 0.0 {
        return a + b;
    }
    let beta = (ta / tb).sqrt();
    a * (1.0 + 1.0 / beta) + b * (1.0 + beta)
}

/// Admissible residual region `{e : eᵀ Π⁻¹ e ≤ r²}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualEllipsoid {
    shape: SpreadMatrix,
    radius: f64,
}

impl ResidualEllipsoid {
    pub fn new(shape: SpreadMatrix, radius: f64) -> Result<Self, GeometryError> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(GeometryError::Argument(format!(
                "radius {radius} must be positive"
            )));
        }
        Ok(Self { shape, radius })
    }

    pub fn shape(&self) -> &SpreadMatrix {
        &self.shape
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    fn check(&self, residual: &DVector<f64>) -> Result<(), GeometryError> {
        if residual.len() != self.shape.dim() {
            return Err(GeometryError::Dimension {
                expected: self.shape.dim(),
                actual: residual.len(),
            });
        }
        Ok(())
    }

    /// `eᵀ Π⁻¹ e`.
    pub fn mahalanobis_sq(&self, residual: &DVector<f64>) -> Result<f64, GeometryError> {
        self.check(residual)?;
        Ok(self.shape.mahalanobis_sq(residual))
    }

    pub fn contains(&self, residual: &DVector<f64>) -> Result<bool, GeometryError> {
        Ok(self.mahalanobis_sq(residual)? <= self.radius * self.radius)
    }
}

/// Crisp compatibility: 1 inside the admissible region (boundary
/// included), 0 outside.
pub fn uniform_compatibility(
    residual: &DVector<f64>,
    ellipsoid: &ResidualEllipsoid,
) -> Result<f64, GeometryError> {
    Ok(if ellipsoid.contains(residual)? {
        1.0
    } else {
        0.0
    })
}

/// Graded compatibility: the possibility kernel evaluated on the residual,
/// `exp(−eᵀ Π⁻¹ e / (2 r²))`.
pub fn graded_compatibility(
    residual: &DVector<f64>,
    ellipsoid: &ResidualEllipsoid,
) -> Result<f64, GeometryError> {
    let r = ellipsoid.radius();
    Ok((-ellipsoid.mahalanobis_sq(residual)? / (2.0 * r * r)).exp())
}

/// `exp(−(x − x̂)ᵀ Π⁻¹ (x − x̂) / (2 r²))`.
///
/// Panics if `x`, `mode` and `spread` disagree in dimension.
pub fn kernel_plausibility(
    x: &DVector<f64>,
    mode: &DVector<f64>,
    spread: &SpreadMatrix,
    radius: f64,
) -> f64 {
    let d2 = spread.mahalanobis_sq(&(x - mode));
    (-d2 / (2.0 * radius * radius)).exp()
}

/// `center`, then `center + scale · L_i` for every column, then
/// `center − scale · L_i`.
///
/// Offsets are snapped to the floating-point grid around `center` so each
/// `±` pair is exactly symmetric about it.
pub fn symmetric_points(
    center: &DVector<f64>,
    factor: &DMatrix<f64>,
    scale: f64,
) -> Vec<DVector<f64>> {
    let n = center.len();
    let offsets: Vec<DVector<f64>> = (0..n)
        .map(|i| (center + factor.column(i) * scale) - center)
        .collect();
    let mut points = Vec::with_capacity(2 * n + 1);
    points.push(center.clone());
    points.extend(offsets.iter().map(|d| center + d));
    points.extend(offsets.iter().map(|d| center - d));
    points
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dv(v: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(v)
    }

    fn random_spd(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
        let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        &a * a.transpose() + DMatrix::identity(n, n) * 0.1
    }

    #[test]
    fn spread_of_collapsed_cloud_is_the_regularizer() {
        let mode = dv(&[1.0, 2.0]);
        let s = estimate_spread(&[mode.clone(), mode.clone()], &mode).unwrap();
        assert_abs_diff_eq!(
            s.matrix().clone(),
            DMatrix::identity(2, 2) * DEFAULT_REGULARIZATION,
            epsilon = 1e-18
        );
    }

    #[test]
    fn spread_of_cross_cloud() {
        let pts = [
            dv(&[1.0, 0.0]),
            dv(&[-1.0, 0.0]),
            dv(&[0.0, 1.0]),
            dv(&[0.0, -1.0]),
        ];
        let s = estimate_spread(&pts, &dv(&[0.0, 0.0])).unwrap();
        let expected = DMatrix::from_diagonal(&dv(&[0.5, 0.5])) + DMatrix::identity(2, 2) * 1e-6;
        assert_abs_diff_eq!(s.matrix().clone(), expected, epsilon = 1e-15);
        assert!(estimate_spread(&pts, &dv(&[0.0])).is_err());
        assert!(estimate_spread(&[], &dv(&[0.0])).is_err());
    }

    #[test]
    fn spread_matches_double_loop_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 4;
        let pts: Vec<DVector<f64>> = (0..9)
            .map(|_| DVector::from_fn(n, |_, _| rng.random_range(-3.0..3.0)))
            .collect();
        let mode = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let s = estimate_spread(&pts, &mode).unwrap();
        for r in 0..n {
            for c in 0..n {
                let mut acc = 0.0;
                for p in &pts {
                    acc += (p[r] - mode[r]) * (p[c] - mode[c]);
                }
                let expected = acc / pts.len() as f64 + if r == c { 1e-6 } else { 0.0 };
                assert_abs_diff_eq!(s.matrix()[(r, c)], expected, epsilon = 1e-12);
            }
        }
        let l = s.cholesky();
        assert_abs_diff_eq!(
            s.log_det(),
            2.0 * (0..n).map(|i| l[(i, i)].ln()).sum::<f64>(),
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(s.log_det(), s.matrix().determinant().ln(), epsilon = 1e-9);
    }

    #[test]
    fn cholesky_examples() {
        let f = regularized_cholesky(&DMatrix::identity(3, 3)).unwrap();
        assert_eq!(f.lower, DMatrix::identity(3, 3));
        assert_eq!(f.shift, 0.0);
        let f = regularized_cholesky(&DMatrix::from_diagonal(&dv(&[4.0, 9.0]))).unwrap();
        assert_eq!(f.lower, DMatrix::from_diagonal(&dv(&[2.0, 3.0])));
    }

    #[test]
    fn rank_one_matrix_is_rescued_by_loading() {
        let v = dv(&[1.0, 2.0, -1.0]);
        let m = &v * v.transpose();
        let f = regularized_cholesky(&m).unwrap();
        assert!(f.shift > 0.0);
        let residual = (&f.lower * f.lower.transpose() - &m).norm();
        assert!(
            residual <= f.shift * 3f64.sqrt() + 1e-12,
            "{residual} vs {}",
            f.shift
        );
    }

    #[test]
    fn strongly_indefinite_matrix_fails() {
        let m = DMatrix::from_diagonal(&dv(&[1.0, -1.0]));
        assert_eq!(
            regularized_cholesky(&m),
            Err(GeometryError::Degenerate {
                retries: MAX_REGULARIZATION_RETRIES
            })
        );
    }

    #[test]
    fn asymmetric_matrix_is_rejected() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(matches!(
            SpreadMatrix::new(m),
            Err(GeometryError::NotSymmetric(_))
        ));
    }

    #[test]
    fn radius_examples() {
        assert_abs_diff_eq!(
            plausibility_radius(1.0 - (-0.5f64).exp()).unwrap(),
            1.0,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            plausibility_radius(1.0 - (-2.0f64).exp()).unwrap(),
            2.0,
            epsilon = 1e-12
        );
        assert!(plausibility_radius(1e-14).unwrap() < 1e-6);
        assert!(plausibility_radius(0.0).is_err());
        assert!(plausibility_radius(1.0).is_err());
        assert!(plausibility_radius(0.5).unwrap() < plausibility_radius(0.6).unwrap());
    }

    #[test]
    fn radius_inverse_round_trip() {
        for k in 1..500 {
            let r = k as f64 * 0.01;
            assert_abs_diff_eq!(
                plausibility_radius(necessity_level(r)).unwrap(),
                r,
                epsilon = 1e-10
            );
        }
    }

    #[test]
    fn minkowski_examples() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]);
        let m = minkowski_outer_bound(&a, &a).unwrap();
        assert_abs_diff_eq!(m.matrix().clone(), &a * 4.0, epsilon = 1e-12);
        let m = minkowski_outer_bound(&a, &DMatrix::zeros(2, 2)).unwrap();
        assert_abs_diff_eq!(m.matrix().clone(), a.clone(), epsilon = 1e-15);
        assert!(minkowski_outer_bound(&a, &DMatrix::zeros(3, 3)).is_err());
    }

    #[test]
    fn minkowski_contains_sum_in_every_direction() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let n = rng.random_range(1..=4);
            let a = SpreadMatrix::new(random_spd(&mut rng, n)).unwrap();
            let b =
                SpreadMatrix::new(random_spd(&mut rng, n) * rng.random_range(0.01..10.0)).unwrap();
            let m = minkowski_outer_bound(a.matrix(), b.matrix()).unwrap();
            let swapped = minkowski_outer_bound(b.matrix(), a.matrix()).unwrap();
            assert_abs_diff_eq!(
                m.matrix().clone(),
                swapped.matrix().clone(),
                epsilon = 1e-10
            );
            for _ in 0..1000 {
                let d = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
                // support of a Minkowski sum is the sum of supports
                let sum_support = a.support(&d) + b.support(&d);
                assert!(m.support(&d) >= sum_support * (1.0 - 1e-12));
                assert!(m.support(&d) >= a.support(&d).max(b.support(&d)));
            }
        }
    }

    #[test]
    fn uniform_compatibility_examples() {
        let e = ResidualEllipsoid::new(SpreadMatrix::new(DMatrix::identity(2, 2)).unwrap(), 1.0)
            .unwrap();
        assert_eq!(uniform_compatibility(&dv(&[0.0, 0.0]), &e).unwrap(), 1.0);
        assert_eq!(
            uniform_compatibility(&dv(&[1.0000001, 0.0]), &e).unwrap(),
            0.0
        );
        assert_eq!(uniform_compatibility(&dv(&[1.0, 0.0]), &e).unwrap(), 1.0);
        assert!(uniform_compatibility(&dv(&[0.0]), &e).is_err());
        assert!(
            ResidualEllipsoid::new(SpreadMatrix::new(DMatrix::identity(1, 1)).unwrap(), 0.0)
                .is_err()
        );
    }

    #[test]
    fn uniform_compatibility_agrees_with_sampling_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let shape = SpreadMatrix::new(random_spd(&mut rng, 3)).unwrap();
        let r = 1.7;
        let e = ResidualEllipsoid::new(shape.clone(), r).unwrap();
        // independent membership: explicit inverse instead of the factor
        let inv = shape.matrix().clone().try_inverse().unwrap();
        let mut inside = 0;
        for _ in 0..10_000 {
            let x = DVector::from_fn(3, |_, _| rng.random_range(-4.0..4.0));
            let q = (x.transpose() * &inv * &x)[(0, 0)];
            if (q - r * r).abs() < 1e-9 {
                continue;
            }
            let oracle = if q <= r * r { 1.0 } else { 0.0 };
            assert_eq!(uniform_compatibility(&x, &e).unwrap(), oracle);
            inside += oracle as usize;
        }
        assert!(inside > 0);
    }

    #[test]
    fn kernel_examples() {
        let eye = SpreadMatrix::new(DMatrix::identity(2, 2)).unwrap();
        let mode = dv(&[1.0, -1.0]);
        assert_eq!(kernel_plausibility(&mode, &mode, &eye, 1.0), 1.0);
        assert_abs_diff_eq!(
            kernel_plausibility(&dv(&[2.0, 0.0]), &mode, &eye, 1.0),
            (-1.0f64).exp(),
            epsilon = 1e-15
        );
        let c = 3.0;
        let scaled = SpreadMatrix::new(DMatrix::identity(2, 2) * (c * c)).unwrap();
        let x = dv(&[1.7, -0.2]);
        assert_abs_diff_eq!(
            kernel_plausibility(&x, &mode, &scaled, 1.0 / c),
            kernel_plausibility(&x, &mode, &eye, 1.0),
            epsilon = 1e-14
        );
    }

    #[test]
    fn kernel_level_sets_are_ellipsoids() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let spread = SpreadMatrix::new(random_spd(&mut rng, 3)).unwrap();
        let mode = dv(&[0.5, -2.0, 1.0]);
        let level = 2.3;
        let mut values = Vec::new();
        for _ in 0..50 {
            let dir = DVector::from_fn(3, |_, _| rng.random_range(-1.0..1.0)).normalize();
            // scale so that (x − x̂)ᵀ Π⁻¹ (x − x̂) = level
            let t = (level / spread.mahalanobis_sq(&dir)).sqrt();
            values.push(kernel_plausibility(&(&mode + dir * t), &mode, &spread, 1.3));
        }
        for v in &values {
            assert_abs_diff_eq!(*v, values[0], epsilon = 1e-10);
        }
    }

    #[test]
    fn symmetric_points_layout() {
        let l = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 1.0, 1.0]);
        let pts = symmetric_points(&dv(&[0.0, 0.0]), &l, 0.5);
        assert_eq!(pts.len(), 5);
        assert_eq!(pts[1], dv(&[1.0, 0.5]));
        assert_eq!(pts[2], dv(&[0.0, 0.5]));
        assert_eq!(pts[3], dv(&[-1.0, -0.5]));
    }
}
