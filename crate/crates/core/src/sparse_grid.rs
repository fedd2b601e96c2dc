//! Support-point generation inside a hyperrectangular support.
//!
//! Two schemes are provided: the `2n + 1` axis scheme (center plus one point
//! on each face along every axis) and a Smolyak sparse grid built from nested
//! Clenshaw-Curtis node sets. Grids live on `[-1, 1]^n` and are mapped into
//! the support box by an affine transform.

use std::collections::BTreeSet;

use nalgebra::DVector;
use thiserror::Error;

/// Two grid coordinates closer than this are the same coordinate.
pub const DEDUP_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },
}

/// Axis-aligned box `[lower, upper]` in state units.
#[derive(Debug, Clone, PartialEq)]
pub struct Hyperrectangle {
    lower: DVector<f64>,
    upper: DVector<f64>,
}

impl Hyperrectangle {
    pub fn new(lower: DVector<f64>, upper: DVector<f64>) -> Result<Self, GridError> {
        if lower.len() != upper.len() {
            return Err(GridError::Dimension {
                expected: lower.len(),
                actual: upper.len(),
            });
        }
        for i in 0..lower.len() {
            if !lower[i].is_finite() || !upper[i].is_finite() {
                return Err(GridError::Argument(format!("bound {i} is not finite")));
            }
            if lower[i] > upper[i] {
                return Err(GridError::Argument(format!(
                    "lower bound {} exceeds upper bound {} on axis {i}",
                    lower[i], upper[i]
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    /// Box `center ± half_widths`.
    pub fn from_center(
        center: &DVector<f64>,
        half_widths: &DVector<f64>,
    ) -> Result<Self, GridError> {
        if half_widths.iter().any(|&h| h < 0.0) {
            return Err(GridError::Argument("negative half-width".into()));
        }
        Self::new(center - half_widths, center + half_widths)
    }

    /// Symmetric box `[-h, h]` per axis.
    pub fn symmetric(half_widths: &DVector<f64>) -> Result<Self, GridError> {
        Self::from_center(&DVector::zeros(half_widths.len()), half_widths)
    }

    /// `[-1, 1]^dim`.
    pub fn unit(dim: usize) -> Self {
        Self {
            lower: DVector::from_element(dim, -1.0),
            upper: DVector::from_element(dim, 1.0),
        }
    }

    /// Smallest box containing every point.
    pub fn bounding(points: &[DVector<f64>]) -> Result<Self, GridError> {
        let first = points
            .first()
            .ok_or_else(|| GridError::Argument("no points to bound".into()))?;
        let mut lower = first.clone();
        let mut upper = first.clone();
        for p in &points[1..] {
            if p.len() != first.len() {
                return Err(GridError::Dimension {
                    expected: first.len(),
                    actual: p.len(),
                });
            }
            for i in 0..p.len() {
                lower[i] = lower[i].min(p[i]);
                upper[i] = upper[i].max(p[i]);
            }
        }
        Self::new(lower, upper)
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &DVector<f64> {
        &self.lower
    }

    pub fn upper(&self) -> &DVector<f64> {
        &self.upper
    }

    pub fn center(&self) -> DVector<f64> {
        (&self.lower + &self.upper) * 0.5
    }

    /// Per-axis half-widths `γ_i = (upper_i − lower_i) / 2`.
    pub fn half_widths(&self) -> DVector<f64> {
        (&self.upper - &self.lower) * 0.5
    }

    /// True when every axis has zero width.
    pub fn is_point(&self) -> bool {
        self.lower == self.upper
    }

    pub fn contains(&self, x: &DVector<f64>, tol: f64) -> bool {
        x.len() == self.dim()
            && (0..self.dim()).all(|i| x[i] >= self.lower[i] - tol && x[i] <= self.upper[i] + tol)
    }

    /// Nearest point of the box.
    pub fn clamp(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            x.len(),
            (0..x.len()).map(|i| x[i].clamp(self.lower[i], self.upper[i])),
        )
    }

    /// Minkowski sum of two boxes is the box of summed bounds.
    pub fn minkowski_sum(&self, other: &Hyperrectangle) -> Result<Self, GridError> {
        if other.dim() != self.dim() {
            return Err(GridError::Dimension {
                expected: self.dim(),
                actual: other.dim(),
            });
        }
        Self::new(&self.lower + &other.lower, &self.upper + &other.upper)
    }

    /// Same center, half-widths multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self, GridError> {
        if !(factor >= 0.0) {
            return Err(GridError::Argument(format!("scale factor {factor}")));
        }
        Self::from_center(&self.center(), &(self.half_widths() * factor))
    }
}

/// One level of the nested univariate Clenshaw-Curtis family.
#[derive(Debug, Clone, PartialEq)]
pub struct GridLevelRule {
    pub level: usize,
    /// Nodes in ascending order.
    pub nodes: Vec<f64>,
}

impl GridLevelRule {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// `cos(jπ/d)`, evaluated on the reduced fraction so that the same angle
/// produces bit-identical nodes at every level.
fn cosine_node(j: usize, d: usize) -> f64 {
    let g = gcd(j, d).max(1);
    let (p, q) = (j / g, d / g);
    if 2 * p == q {
        return 0.0;
    }
    if 2 * p > q {
        // mirror so both halves of the rule are exact negatives
        return -cosine_node(q - p, q);
    }
    (std::f64::consts::PI * p as f64 / q as f64).cos()
}

/// Nodes `cos(jπ/(m−1))`, `j = 0..m`, with `m = 2^(level−1) + 1`.
pub fn clenshaw_curtis_nodes(level: usize) -> Result<GridLevelRule, GridError> {
    if level == 0 {
        return Err(GridError::Argument("level must be at least 1".into()));
    }
    if level > 30 {
        return Err(GridError::Argument(format!("level {level} is too large")));
    }
    let m = (1usize << (level - 1)) + 1;
    let mut nodes: Vec<f64> = (0..m).map(|j| cosine_node(j, m - 1)).collect();
    nodes.reverse();
    Ok(GridLevelRule { level, nodes })
}

/// Sparse grid on `[-1, 1]^dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct SmolyakGrid {
    pub dim: usize,
    pub level: usize,
    /// Deduplicated points; lexicographic order with the origin first when
    /// present.
    pub points: Vec<Vec<f64>>,
}

impl SmolyakGrid {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Total-order key for a coordinate; `-0.0` and `0.0` share a key.
fn coordinate_key(x: f64) -> u64 {
    let x = if x == 0.0 { 0.0 } else { x };
    let bits = x.to_bits();
    // flip so that unsigned order matches numeric order
    if bits >> 63 == 1 {
        !bits
    } else {
        bits | (1 << 63)
    }
}

/// Calls `visit` with every multi-index `i ≥ 1` of length `dim` with
/// `|i|_1 ≤ max_sum`.
pub(crate) fn for_each_multi_index(dim: usize, max_sum: usize, mut visit: impl FnMut(&[usize])) {
    fn recurse(
        index: &mut Vec<usize>,
        dim: usize,
        remaining: usize,
        visit: &mut dyn FnMut(&[usize]),
    ) {
        if index.len() == dim {
            visit(index);
            return;
        }
        let slots_after = dim - index.len() - 1;
        if remaining < slots_after + 1 {
            return;
        }
        for level in 1..=(remaining - slots_after) {
            index.push(level);
            recurse(index, dim, remaining - level, visit);
            index.pop();
        }
    }
    recurse(&mut Vec::with_capacity(dim), dim, max_sum, &mut visit);
}

/// Union of tensor grids over all multi-indices with `|i|_1 ≤ level + dim − 1`.
pub fn smolyak_grid(dim: usize, level: usize) -> Result<SmolyakGrid, GridError> {
    if dim == 0 {
        return Err(GridError::Argument("dimension must be at least 1".into()));
    }
    if level == 0 {
        return Err(GridError::Argument("level must be at least 1".into()));
    }
    let rules: Vec<GridLevelRule> = (1..=level)
        .map(clenshaw_curtis_nodes)
        .collect::<Result<_, _>>()?;
    let mut seen: BTreeSet<Vec<u64>> = BTreeSet::new();
    let mut points: Vec<Vec<f64>> = Vec::new();
    for_each_multi_index(dim, level + dim - 1, |index| {
        let sizes: Vec<usize> = index.iter().map(|&l| rules[l - 1].node_count()).collect();
        let mut counter = vec![0usize; dim];
        loop {
            let point: Vec<f64> = (0..dim)
                .map(|k| rules[index[k] - 1].nodes[counter[k]])
                .collect();
            let key: Vec<u64> = point.iter().map(|&x| coordinate_key(x)).collect();
            if seen.insert(key) {
                points.push(point);
            }
            // odometer increment
            let mut k = 0;
            while k < dim {
                counter[k] += 1;
                if counter[k] < sizes[k] {
                    break;
                }
                counter[k] = 0;
                k += 1;
            }
            if k == dim {
                break;
            }
        }
    });
    sort_points(&mut points);
    Ok(SmolyakGrid { dim, level, points })
}

fn sort_points(points: &mut [Vec<f64>]) {
    points.sort_by(|a, b| {
        let a_origin = a.iter().all(|&x| x == 0.0);
        let b_origin = b.iter().all(|&x| x == 0.0);
        b_origin.cmp(&a_origin).then_with(|| {
            a.iter()
                .zip(b)
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        })
    });
}

/// The `2n + 1` axis points: center, then `center + γ_i e_i` for each axis,
/// then `center − γ_i e_i`.
pub fn axis_support_points(bounds: &Hyperrectangle) -> Vec<DVector<f64>> {
    let n = bounds.dim();
    let center = bounds.center();
    let gamma = bounds.half_widths();
    let mut points = Vec::with_capacity(2 * n + 1);
    points.push(center.clone());
    for sign in [1.0, -1.0] {
        for i in 0..n {
            let mut p = center.clone();
            p[i] += sign * gamma[i];
            points.push(p);
        }
    }
    points
}

/// Affine map of unit-cube points into `bounds`:
/// `½(upper − lower) ∘ ξ + ½(upper + lower)`.
pub fn map_to_box(
    grid: &SmolyakGrid,
    bounds: &Hyperrectangle,
) -> Result<Vec<DVector<f64>>, GridError> {
    if grid.dim != bounds.dim() {
        return Err(GridError::Dimension {
            expected: bounds.dim(),
            actual: grid.dim,
        });
    }
    let center = bounds.center();
    let gamma = bounds.half_widths();
    Ok(grid
        .points
        .iter()
        .map(|xi| {
            DVector::from_iterator(
                grid.dim,
                (0..grid.dim).map(|k| gamma[k] * xi[k] + center[k]),
            )
        })
        .collect())
}

/// How the filter spans its support box.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SupportGeneration {
    /// Center plus the `2n` face points.
    Axis,
    /// Smolyak sparse grid at the given level.
    Smolyak { level: usize },
}

impl Default for SupportGeneration {
    fn default() -> Self {
        SupportGeneration::Smolyak { level: 2 }
    }
}

/// Support points spanning `bounds` under the chosen scheme.
pub fn generate_support(
    bounds: &Hyperrectangle,
    scheme: SupportGeneration,
) -> Result<Vec<DVector<f64>>, GridError> {
    match scheme {
        SupportGeneration::Axis => Ok(axis_support_points(bounds)),
        SupportGeneration::Smolyak { level } => {
            map_to_box(&smolyak_grid(bounds.dim(), level)?, bounds)
        }
    }
}
