//! Sorted-l1 (Slope) norms, their logarithmic weight sequences, and the
//! matrix norms used by the estimators.

use ndarray::ArrayView2;

use crate::error::{Error, Result};
use crate::linalg;

/// Nonincreasing, strictly positive weight sequence for a sorted-l1 norm.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSequence {
    weights: Vec<f64>,
    a_const: Option<f64>,
}

impl WeightSequence {
    /// Constant weights `value > 0`, as used by the plain Huber variant.
    pub fn constant(n: usize, value: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParam("weight sequence length must be positive".into()));
        }
        if !(value > 0.0) || !value.is_finite() {
            return Err(Error::InvalidWeights(format!("constant weight {value} must be positive and finite")));
        }
        Ok(Self { weights: vec![value; n], a_const: None })
    }

    /// Wraps an explicit weight vector, validating positivity and monotonicity.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidParam("weight sequence length must be positive".into()));
        }
        for (i, &w) in weights.iter().enumerate() {
            if !(w > 0.0) || !w.is_finite() {
                return Err(Error::InvalidWeights(format!("weight {i} is {w}, must be positive and finite")));
            }
            if i > 0 && weights[i - 1] < w {
                return Err(Error::InvalidWeights(format!(
                    "weights must be nonincreasing, but w[{}] = {} < w[{}] = {}",
                    i - 1,
                    weights[i - 1],
                    i,
                    w
                )));
            }
        }
        Ok(Self { weights, a_const: None })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Weight constant the sequence was built from, if it came from [`slope_weights`].
    pub fn a_const(&self) -> Option<f64> {
        self.a_const
    }

    /// Largest weight.
    pub fn first(&self) -> f64 {
        self.weights[0]
    }

    /// New sequence with the first weight repeated everywhere (Huber variant).
    pub fn flattened(&self) -> Self {
        Self { weights: vec![self.weights[0]; self.weights.len()], a_const: None }
    }

    /// Weights scaled by `c > 0`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::InvalidParam(format!("scale {c} must be positive and finite")));
        }
        Ok(Self { weights: self.weights.iter().map(|w| w * c).collect(), a_const: None })
    }
}

/// Logarithmic weights `w_i = sqrt(log(a_const * n / i))` for `i = 1..=n`.
///
/// Requires `a_const >= 2`, which keeps every weight strictly positive.
pub fn slope_weights(n: usize, a_const: f64) -> Result<WeightSequence> {
    if n == 0 {
        return Err(Error::InvalidParam("weight sequence length must be positive".into()));
    }
    if !(a_const >= 2.0) || !a_const.is_finite() {
        return Err(Error::InvalidWeights(format!("weight constant {a_const} must be >= 2")));
    }
    let weights = (1..=n).map(|i| (a_const * n as f64 / i as f64).ln().sqrt()).collect();
    Ok(WeightSequence { weights, a_const: Some(a_const) })
}

/// Sorted-l1 norm: inner product of the nonincreasing rearrangement of `|u|`
/// with the weight sequence.
pub fn slope_norm(u: &[f64], w: &WeightSequence) -> Result<f64> {
    if u.len() != w.len() {
        return Err(Error::LengthMismatch(format!(
            "vector has length {}, weights have length {}",
            u.len(),
            w.len()
        )));
    }
    let mut mags: Vec<f64> = u.iter().map(|x| x.abs()).collect();
    mags.sort_by(|a, b| b.partial_cmp(a).expect("non-finite entry in slope_norm"));
    Ok(mags.iter().zip(w.weights()).map(|(m, wi)| m * wi).sum())
}

/// Root of the sum of the first `o` squared weights; the scale attached to
/// `o` outliers by the sorted-l1 penalty.
pub fn omega_cap(w: &WeightSequence, o: usize) -> Result<f64> {
    if o > w.len() {
        return Err(Error::InvalidParam(format!("o = {o} exceeds weight length {}", w.len())));
    }
    Ok(w.weights()[..o].iter().map(|x| x * x).sum::<f64>().sqrt())
}

/// Dual norm of the sorted-l1 norm: max over k of the ratio between the
/// cumulative sums of the sorted magnitudes and of the weights.
pub(crate) fn slope_dual_norm(u: &[f64], w: &WeightSequence) -> Result<f64> {
    if u.len() != w.len() {
        return Err(Error::LengthMismatch(format!(
            "vector has length {}, weights have length {}",
            u.len(),
            w.len()
        )));
    }
    let mut mags: Vec<f64> = u.iter().map(|x| x.abs()).collect();
    mags.sort_by(|a, b| b.partial_cmp(a).expect("non-finite entry in slope_dual_norm"));
    let mut cum_u = 0.0;
    let mut cum_w = 0.0;
    let mut best: f64 = 0.0;
    for (m, wi) in mags.iter().zip(w.weights()) {
        cum_u += m;
        cum_w += wi;
        best = best.max(cum_u / cum_w);
    }
    Ok(best)
}

/// Matrix norm selector. The Slope variants carry their own weight sequence
/// and treat the matrix as its row-major flattening.
#[derive(Debug, Clone)]
pub enum NormTag {
    L1,
    LInf,
    Frobenius,
    Nuclear,
    Operator,
    SlopeN(WeightSequence),
    SlopeP(WeightSequence),
}

/// Evaluates the selected norm of a matrix.
pub fn matrix_norm(m: ArrayView2<'_, f64>, tag: &NormTag) -> Result<f64> {
    match tag {
        NormTag::L1 => Ok(m.iter().map(|x| x.abs()).sum()),
        NormTag::LInf => Ok(m.iter().fold(0.0f64, |acc, x| acc.max(x.abs()))),
        NormTag::Frobenius => Ok(m.iter().map(|x| x * x).sum::<f64>().sqrt()),
        NormTag::Nuclear => Ok(linalg::singular_values(m).iter().sum()),
        NormTag::Operator => Ok(linalg::singular_values(m).first().copied().unwrap_or(0.0)),
        NormTag::SlopeN(w) | NormTag::SlopeP(w) => {
            let flat: Vec<f64> = m.iter().copied().collect();
            slope_norm(&flat, w)
        }
    }
}
