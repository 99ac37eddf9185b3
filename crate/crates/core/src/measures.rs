//! Discrete probability measures on R^d and weighted families of them.

use ndarray::{concatenate, Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{Error, Result};

/// Input weights may be off by this much from summing to one; they are
/// renormalized silently inside the band and rejected outside it.
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-9;

/// A finitely supported probability measure `sum_j w_j delta_{x_j}`.
///
/// Weights are strictly positive and sum to one. Duplicate support points are
/// kept as separate atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    support: Array2<f64>,
    weights: Array1<f64>,
}

impl DiscreteMeasure {
    /// Validates `points` (one atom per row) and `weights`; `None` means uniform.
    pub fn new(points: Array2<f64>, weights: Option<Array1<f64>>) -> Result<Self> {
        let (m, d) = points.dim();
        if m == 0 {
            return Err(Error::Empty("measure has no atoms"));
        }
        if d == 0 {
            return Err(Error::Empty("measure has zero dimension"));
        }
        check_finite(points.view())?;

        let weights = match weights {
            None => Array1::from_elem(m, 1.0 / m as f64),
            Some(w) => normalize_weights(w, m)?,
        };
        Ok(Self { support: points, weights })
    }

    /// Uniform measure on the rows of `points`.
    pub fn uniform(points: Array2<f64>) -> Result<Self> {
        Self::new(points, None)
    }

    /// Dirac mass at a single point.
    pub fn dirac(point: &[f64]) -> Result<Self> {
        let points = Array2::from_shape_vec((1, point.len()), point.to_vec())
            .map_err(|e| Error::ShapeMismatch(e.to_string()))?;
        Self::new(points, None)
    }

    pub fn support(&self) -> ArrayView2<'_, f64> {
        self.support.view()
    }

    pub fn weights(&self) -> ArrayView1<'_, f64> {
        self.weights.view()
    }

    /// Number of atoms.
    pub fn len(&self) -> usize {
        self.support.nrows()
    }

    /// Always false; a measure has at least one atom.
    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dim(&self) -> usize {
        self.support.ncols()
    }

    /// Weighted mean of the support.
    pub fn mean(&self) -> Array1<f64> {
        self.weights.dot(&self.support)
    }

    /// Same weights, new support. The new support must have the same shape.
    pub fn with_support(&self, support: Array2<f64>) -> Result<Self> {
        if support.dim() != self.support.dim() {
            return Err(Error::ShapeMismatch(format!(
                "support {:?} does not match {:?}",
                support.dim(),
                self.support.dim()
            )));
        }
        check_finite(support.view())?;
        Ok(Self { support, weights: self.weights.clone() })
    }

    /// Shifts every atom by `offset`.
    pub fn translated(&self, offset: ArrayView1<'_, f64>) -> Result<Self> {
        if offset.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: offset.len() });
        }
        self.with_support(&self.support + &offset)
    }

    pub fn into_parts(self) -> (Array2<f64>, Array1<f64>) {
        (self.support, self.weights)
    }
}

/// Constructs a validated measure; the free-function spelling of [`DiscreteMeasure::new`].
pub fn make_measure(points: Array2<f64>, weights: Option<Array1<f64>>) -> Result<DiscreteMeasure> {
    DiscreteMeasure::new(points, weights)
}

fn check_finite(points: ArrayView2<'_, f64>) -> Result<()> {
    for ((row, col), v) in points.indexed_iter() {
        if !v.is_finite() {
            return Err(Error::NonFinite { row, col });
        }
    }
    Ok(())
}

/// Checks positivity and the sum band, then rescales to sum exactly to one
/// (up to a final rounding).
pub(crate) fn normalize_weights(w: Array1<f64>, expected_len: usize) -> Result<Array1<f64>> {
    if w.len() != expected_len {
        return Err(Error::ShapeMismatch(format!(
            "{} weights for {} atoms",
            w.len(),
            expected_len
        )));
    }
    for (index, &value) in w.iter().enumerate() {
        if !(value > 0.0) || !value.is_finite() {
            return Err(Error::NonPositiveWeight { index, value });
        }
    }
    let sum = w.sum();
    if (sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
        return Err(Error::WeightSum { sum });
    }
    Ok(w / sum)
}

/// Measures sharing a dimension, with mixing weights `pi` on the open simplex.
#[derive(Debug, Clone)]
pub struct WeightedFamily {
    measures: Vec<DiscreteMeasure>,
    family_weights: Array1<f64>,
}

impl WeightedFamily {
    /// `family_weights = None` gives uniform `pi`.
    pub fn new(measures: Vec<DiscreteMeasure>, family_weights: Option<Array1<f64>>) -> Result<Self> {
        let first = measures.first().ok_or(Error::Empty("family has no measures"))?;
        let d = first.dim();
        if let Some(bad) = measures.iter().find(|mu| mu.dim() != d) {
            return Err(Error::DimensionMismatch { expected: d, found: bad.dim() });
        }
        let n = measures.len();
        let family_weights = match family_weights {
            None => Array1::from_elem(n, 1.0 / n as f64),
            Some(pi) => normalize_weights(pi, n)?,
        };
        Ok(Self { measures, family_weights })
    }

    pub fn uniform(measures: Vec<DiscreteMeasure>) -> Result<Self> {
        Self::new(measures, None)
    }

    pub fn measures(&self) -> &[DiscreteMeasure] {
        &self.measures
    }

    pub fn family_weights(&self) -> ArrayView1<'_, f64> {
        self.family_weights.view()
    }

    pub fn len(&self) -> usize {
        self.measures.len()
    }

    pub fn is_empty(&self) -> bool {
        self.measures.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.measures[0].dim()
    }

    /// Total number of atoms across all members.
    pub fn total_atoms(&self) -> usize {
        self.measures.iter().map(DiscreteMeasure::len).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, &DiscreteMeasure)> {
        self.family_weights.iter().copied().zip(self.measures.iter())
    }
}

/// Concatenates all supports; atom `j` of member `n` carries `pi_n * w_{n,j}`.
pub fn pool_supports(family: &WeightedFamily) -> Result<DiscreteMeasure> {
    let views: Vec<_> = family.measures.iter().map(|mu| mu.support.view()).collect();
    let support =
        concatenate(Axis(0), &views).map_err(|e| Error::ShapeMismatch(e.to_string()))?;
    let weights: Vec<f64> = family
        .iter()
        .flat_map(|(pi, mu)| mu.weights.iter().map(move |w| pi * w))
        .collect();
    let weights = Array1::from(weights);
    let sum = weights.sum();
    Ok(DiscreteMeasure { support, weights: weights / sum })
}
