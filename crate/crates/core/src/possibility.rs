//! Ordinal possibility theory over finite, indexed hypothesis sets.
//!
//! Continuous distributions only ever enter through their values on a
//! finite set of support points, so every type here is a flat vector of
//! plausibilities indexed by hypothesis.

use thiserror::Error;

/// Floor added inside the surprisal logarithm.
pub const DEFAULT_SURPRISAL_EPSILON: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PossibilityError {
    #[error("plausibility {value} at index {index} is outside [0, 1]")]
    OutOfRange { index: usize, value: f64 },
    #[error("hypothesis sets differ in size ({left} vs {right})")]
    Mismatch { left: usize, right: usize },
    #[error("hypothesis set is empty")]
    Empty,
    #[error("every hypothesis has zero plausibility")]
    TotalIncompatibility,
    #[error("subset index {index} is outside a hypothesis set of size {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("invalid argument: {0}")]
    Argument(String),
}

/// Plausibility degrees over a finite hypothesis set.
#[derive(Debug, Clone, PartialEq)]
pub struct PossibilityField {
    values: Vec<f64>,
}

impl PossibilityField {
    pub fn new(values: Vec<f64>) -> Result<Self, PossibilityError> {
        for (index, &value) in values.iter().enumerate() {
            if !(0.0..=1.0).contains(&value) {
                return Err(PossibilityError::OutOfRange { index, value });
            }
        }
        Ok(Self { values })
    }

    /// Every hypothesis fully plausible.
    pub fn uniform(len: usize) -> Self {
        Self {
            values: vec![1.0; len],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, index: usize) -> Option<f64> {
        self.values.get(index).copied()
    }

    /// Largest plausibility, 0 for an empty field.
    pub fn sup(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// Rescales so the largest value is exactly 1.
    pub fn normalize(&self) -> Result<Self, PossibilityError> {
        let sup = self.sup();
        if sup <= 0.0 {
            return Err(PossibilityError::TotalIncompatibility);
        }
        let values = self
            .values
            .iter()
            .map(|&v| if v == sup { 1.0 } else { v / sup })
            .collect();
        Ok(Self { values })
    }

    /// Possibility of a subset: the supremum of the field over it.
    pub fn possibility_of(&self, subset: &[usize]) -> Result<f64, PossibilityError> {
        let mut sup: f64 = 0.0;
        for &index in subset {
            let value = self.get(index).ok_or(PossibilityError::IndexOutOfRange {
                index,
                len: self.len(),
            })?;
            sup = sup.max(value);
        }
        Ok(sup)
    }
}

fn check_same_len(left: usize, right: usize) -> Result<(), PossibilityError> {
    if left != right {
        return Err(PossibilityError::Mismatch { left, right });
    }
    Ok(())
}

/// Joint possibility of independent fields: the elementwise minimum.
pub fn min_join(
    a: &PossibilityField,
    b: &PossibilityField,
) -> Result<PossibilityField, PossibilityError> {
    check_same_len(a.len(), b.len())?;
    let values = a
        .values
        .iter()
        .zip(&b.values)
        .map(|(&x, &y)| x.min(y))
        .collect();
    Ok(PossibilityField { values })
}

/// Which factor of a product space a marginal keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    /// Keep the row variable, take the supremum over columns.
    Rows,
    /// Keep the column variable, take the supremum over rows.
    Columns,
}

/// Possibility field over a product set `X × Y`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct JointField {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl JointField {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self, PossibilityError> {
        if values.len() != rows * cols {
            return Err(PossibilityError::Mismatch {
                left: rows * cols,
                right: values.len(),
            });
        }
        PossibilityField::new(values.clone())?;
        Ok(Self { rows, cols, values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, PossibilityError> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(PossibilityError::Argument("ragged joint rows".into()));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    /// Joint field of two independent marginals, `min(a[x], b[y])`.
    pub fn independent(a: &PossibilityField, b: &PossibilityField) -> Self {
        let values = a
            .values()
            .iter()
            .flat_map(|&x| b.values().iter().map(move |&y| x.min(y)))
            .collect();
        Self {
            rows: a.len(),
            cols: b.len(),
            values,
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.cols + col]
    }
}

/// Max-based projection of a joint field onto one of its factors.
pub fn sup_marginal(joint: &JointField, keep: Axis) -> Result<PossibilityField, PossibilityError> {
    let (kept, eliminated) = match keep {
        Axis::Rows => (joint.rows, joint.cols),
        Axis::Columns => (joint.cols, joint.rows),
    };
    if eliminated == 0 {
        return Err(PossibilityError::Empty);
    }
    let values = (0..kept)
        .map(|k| {
            (0..eliminated)
                .map(|e| match keep {
                    Axis::Rows => joint.get(k, e),
                    Axis::Columns => joint.get(e, k),
                })
                .fold(0.0, f64::max)
        })
        .collect();
    Ok(PossibilityField { values })
}

/// Conditioning with the normalized branch rule.
///
/// The joint is `min(prior, conditional)`; when the observation is not fully
/// plausible the joint is rescaled by it and clipped at 1.
pub fn condition(
    prior: &PossibilityField,
    conditional: &PossibilityField,
    observed_plausibility: f64,
) -> Result<PossibilityField, PossibilityError> {
    if !(0.0..=1.0).contains(&observed_plausibility) {
        return Err(PossibilityError::Argument(format!(
            "observed plausibility {observed_plausibility} is outside (0, 1]"
        )));
    }
    if observed_plausibility == 0.0 {
        return Err(PossibilityError::TotalIncompatibility);
    }
    let joint = min_join(prior, conditional)?;
    if observed_plausibility == 1.0 {
        return Ok(joint);
    }
    let values = joint
        .values
        .iter()
        .map(|&v| (v / observed_plausibility).min(1.0))
        .collect();
    Ok(PossibilityField { values })
}

/// `1 − sup` of the field outside `subset`.
pub fn necessity(field: &PossibilityField, subset: &[usize]) -> Result<f64, PossibilityError> {
    let mut inside = vec![false; field.len()];
    for &index in subset {
        *inside
            .get_mut(index)
            .ok_or(PossibilityError::IndexOutOfRange {
                index,
                len: field.len(),
            })? = true;
    }
    let outside = field
        .values
        .iter()
        .zip(&inside)
        .filter(|(_, &is_in)| !is_in)
        .map(|(&v, _)| v)
        .fold(0.0, f64::max);
    Ok(1.0 - outside)
}

/// `−ln(plausibility + epsilon)`.
pub fn surprisal(plausibility: f64, epsilon: f64) -> f64 {
    -(plausibility + epsilon).ln()
}

/// `exp(−alpha · delta_s)`, the inverse of surprisal at sensitivity `alpha`.
pub fn possibility_from_surprisal(delta_s: f64, alpha: f64) -> f64 {
    (-alpha * delta_s).exp()
}

/// A monotone set function over an indexed hypothesis set.
pub trait SetFunction {
    /// Size of the underlying hypothesis set.
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Measure of the subset given by its member indices.
    fn measure(&self, subset: &[usize]) -> f64;
}

/// Maxitive capacity: the measure of a set is the supremum of its base
/// field over the set.
#[derive(Debug, Clone, PartialEq)]
pub struct Capacity {
    base: PossibilityField,
}

impl Capacity {
    /// Capacity over an arbitrary base field. No normalization is applied,
    /// so `measure(all)` equals the field's supremum.
    pub fn new(base: PossibilityField) -> Self {
        Self { base }
    }

    /// The possibility measure of `field`: built over the sup-normalized
    /// field so that the whole set has measure 1.
    pub fn canonical(field: &PossibilityField) -> Result<Self, PossibilityError> {
        Ok(Self {
            base: field.normalize()?,
        })
    }

    pub fn base(&self) -> &PossibilityField {
        &self.base
    }
}

impl SetFunction for Capacity {
    fn len(&self) -> usize {
        self.base.len()
    }

    fn measure(&self, subset: &[usize]) -> f64 {
        subset
            .iter()
            .filter_map(|&i| self.base.get(i))
            .fold(0.0, f64::max)
    }
}

/// Additive (probability) capacity from non-negative weights summing to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct AdditiveCapacity {
    weights: Vec<f64>,
}

impl AdditiveCapacity {
    pub fn new(weights: Vec<f64>) -> Result<Self, PossibilityError> {
        if weights.iter().any(|&w| !(w >= 0.0)) {
            return Err(PossibilityError::Argument(
                "additive capacity weights must be non-negative".into(),
            ));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(PossibilityError::Argument(format!(
                "additive capacity weights sum to {total}, expected 1"
            )));
        }
        Ok(Self { weights })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

impl SetFunction for AdditiveCapacity {
    fn len(&self) -> usize {
        self.weights.len()
    }

    fn measure(&self, subset: &[usize]) -> f64 {
        subset.iter().filter_map(|&i| self.weights.get(i)).sum()
    }
}

/// Choquet integral of `scores` with respect to `capacity`.
///
/// Hypotheses are sorted by ascending score (ties by ascending index) and
/// the integral is the telescoping sum
/// `Σ (f(x₍ᵢ₎) − f(x₍ᵢ₋₁₎)) · v({x₍ᵢ₎, …, x₍ₙ₎})` with `f(x₍₀₎) = 0`.
pub fn choquet_integral<C: SetFunction + ?Sized>(
    scores: &[f64],
    capacity: &C,
) -> Result<f64, PossibilityError> {
    if scores.is_empty() {
        return Err(PossibilityError::Empty);
    }
    check_same_len(scores.len(), capacity.len())?;
    if let Some(index) = scores.iter().position(|s| !s.is_finite()) {
        return Err(PossibilityError::Argument(format!(
            "score at index {index} is not finite"
        )));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    // stable sort keeps ascending index among ties
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut total = 0.0;
    let mut previous = 0.0;
    for (rank, &index) in order.iter().enumerate() {
        let step = scores[index] - previous;
        if step != 0.0 {
            total += step * capacity.measure(&order[rank..]);
        }
        previous = scores[index];
    }
    Ok(total)
}

/// Capacity evolved by measurement compatibility: base `min(field, kappa)`.
pub fn compatibility_capacity(
    field: &PossibilityField,
    kappa: &[f64],
) -> Result<Capacity, PossibilityError> {
    check_same_len(field.len(), kappa.len())?;
    let kappa = PossibilityField::new(kappa.to_vec())?;
    Ok(Capacity::new(min_join(field, &kappa)?))
}
