//! Per-instance prediction and metric arithmetic.
//!
//! Each sensor thresholds its score vector into a hard prediction, the server
//! mixes the hard predictions with convex weights and thresholds the mixture
//! again. FNR and FPR are then evaluated against the ground-truth labels.
//!
//! Degenerate denominators are resolved as follows: an instance with no
//! relevant labels has FNR 0, and an instance with no irrelevant labels has
//! FPR 0. Neither case has a missed or spurious label to count.

use crate::error::{Error, Result};

/// Scores are clamped into `[0, 1 - SCORE_EPSILON]` so that a threshold of 1
/// always produces an all-zero decision under the inclusive comparator.
pub const SCORE_EPSILON: f64 = 1e-6;

/// Tolerance on `sum(weights) == 1`.
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-9;

const SCORE_MAX: f64 = 1.0 - SCORE_EPSILON;

fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::Dimension { expected, found })
    }
}

fn bits_from_u8(bits: &[u8]) -> Result<Vec<bool>> {
    bits.iter()
        .map(|&b| match b {
            0 => Ok(false),
            1 => Ok(true),
            other => Err(Error::config("bits", format!("{other} is not binary"))),
        })
        .collect()
}

/// Ground-truth relevance of each of the `L` labels.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LabelVector(Vec<bool>);

impl LabelVector {
    pub fn new(labels: Vec<bool>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::Empty("label vector"));
        }
        Ok(Self(labels))
    }

    pub fn from_bits(bits: &[u8]) -> Result<Self> {
        Self::new(bits_from_u8(bits)?)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.0
    }

    pub fn positives(&self) -> usize {
        self.0.iter().filter(|&&y| y).count()
    }

    pub fn negatives(&self) -> usize {
        self.len() - self.positives()
    }
}

/// Per-label relevance scores of one sensor, clamped into `[0, 1 - SCORE_EPSILON]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVector(Vec<f64>);

impl ScoreVector {
    /// Saturating constructor: every value is clamped into the valid range
    /// (NaN maps to 0).
    pub fn clamped(mut scores: Vec<f64>) -> Self {
        for s in &mut scores {
            *s = if s.is_nan() { 0.0 } else { s.clamp(0.0, SCORE_MAX) };
        }
        Self(scores)
    }

    /// Validating constructor for externally supplied probabilities. Values in
    /// `[0, 1]` are accepted, anything above `1 - SCORE_EPSILON` is clamped.
    /// Returns the vector and the number of clamped entries.
    pub fn from_probabilities(scores: Vec<f64>) -> Result<(Self, usize)> {
        let mut clamped = 0;
        let mut out = Vec::with_capacity(scores.len());
        for (i, s) in scores.into_iter().enumerate() {
            if !(0.0..=1.0).contains(&s) {
                return Err(Error::config(
                    "scores",
                    format!("entry {i} = {s} is outside [0, 1]"),
                ));
            }
            if s > SCORE_MAX {
                clamped += 1;
                out.push(SCORE_MAX);
            } else {
                out.push(s);
            }
        }
        Ok((Self(out), clamped))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// A binary decision vector: a sensor's local prediction or the fused global one.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct HardPrediction(Vec<bool>);

impl HardPrediction {
    pub fn new(bits: Vec<bool>) -> Self {
        Self(bits)
    }

    pub fn from_bits(bits: &[u8]) -> Result<Self> {
        Ok(Self(bits_from_u8(bits)?))
    }

    pub fn all_ones(len: usize) -> Self {
        Self(vec![true; len])
    }

    pub fn all_zeros(len: usize) -> Self {
        Self(vec![false; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.0
    }

    pub fn ones(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    pub fn into_inner(self) -> Vec<bool> {
        self.0
    }
}

/// Weighted mixture of sensor decisions, one value in `[0, 1]` per label.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftGlobal(Vec<f64>);

impl SoftGlobal {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Combining weights over the `K` sensors.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Empty("weight vector"));
        }
        if let Some(w) = weights.iter().find(|w| !(0.0..=1.0).contains(*w)) {
            return Err(Error::InvalidWeights(format!("entry {w} outside [0, 1]")));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
            return Err(Error::InvalidWeights(format!("sum is {sum}")));
        }
        Ok(Self(weights))
    }

    pub fn uniform(k: usize) -> Self {
        Self(vec![1.0 / k as f64; k])
    }

    /// Used by the exponentiated-gradient update, whose output is normalized
    /// by construction.
    pub(crate) fn from_normalized(weights: Vec<f64>) -> Self {
        debug_assert!((weights.iter().sum::<f64>() - 1.0).abs() <= WEIGHT_SUM_TOLERANCE);
        Self(weights)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Index of the largest weight (first one on ties).
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (k, &w) in self.0.iter().enumerate() {
            if w > self.0[best] {
                best = k;
            }
        }
        best
    }
}

/// Objectives of the form `a(Y) * sum_l b(Y_l) * V_l`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ObjectiveSpec {
    /// `a = 1 / #irrelevant`, `b = 1 - Y_l`: the false positive rate.
    #[default]
    Fpr,
    /// `a = b = 1`: the number of labels declared relevant.
    SetSize,
}

/// `U_l = 1{S_l >= threshold}`.
pub fn local_predict(scores: &ScoreVector, threshold: f64) -> HardPrediction {
    HardPrediction(scores.0.iter().map(|&s| s >= threshold).collect())
}

/// `R_l = sum_k beta_k U_{k,l}`.
pub fn combine(predictions: &[HardPrediction], weights: &WeightVector) -> Result<SoftGlobal> {
    check_len(weights.len(), predictions.len())?;
    let len = predictions.first().map_or(0, HardPrediction::len);
    let mut soft = vec![0.0; len];
    for (prediction, &beta) in predictions.iter().zip(&weights.0) {
        check_len(len, prediction.len())?;
        if beta == 0.0 {
            continue;
        }
        for (acc, &bit) in soft.iter_mut().zip(&prediction.0) {
            if bit {
                *acc += beta;
            }
        }
    }
    Ok(SoftGlobal(soft))
}

/// `V_l = 1{R_l >= threshold}`.
pub fn global_predict(soft: &SoftGlobal, threshold: f64) -> HardPrediction {
    HardPrediction(soft.0.iter().map(|&r| r >= threshold).collect())
}

/// Fraction of relevant labels the decision marks irrelevant.
pub fn fnr(truth: &LabelVector, decision: &HardPrediction) -> Result<f64> {
    check_len(truth.len(), decision.len())?;
    let mut positives = 0usize;
    let mut missed = 0usize;
    for (&y, &v) in truth.0.iter().zip(&decision.0) {
        if y {
            positives += 1;
            if !v {
                missed += 1;
            }
        }
    }
    Ok(ratio(missed, positives))
}

/// Fraction of irrelevant labels the decision marks relevant.
pub fn fpr(truth: &LabelVector, decision: &HardPrediction) -> Result<f64> {
    check_len(truth.len(), decision.len())?;
    let mut negatives = 0usize;
    let mut spurious = 0usize;
    for (&y, &v) in truth.0.iter().zip(&decision.0) {
        if !y {
            negatives += 1;
            if v {
                spurious += 1;
            }
        }
    }
    Ok(ratio(spurious, negatives))
}

/// FPR of a single sensor's local decision.
pub fn local_fpr(truth: &LabelVector, local: &HardPrediction) -> Result<f64> {
    fpr(truth, local)
}

/// Evaluates `a(Y) * sum_l b(Y_l) V_l`, computed from the `a`/`b` factors
/// rather than by delegating to [`fpr`].
pub fn objective_value(
    truth: &LabelVector,
    decision: &HardPrediction,
    spec: ObjectiveSpec,
) -> Result<f64> {
    check_len(truth.len(), decision.len())?;
    let hits = |want: fn(bool) -> bool| {
        truth
            .0
            .iter()
            .zip(&decision.0)
            .filter(|(&y, &v)| v && want(y))
            .count()
    };
    Ok(match spec {
        // a(Y) = 1 / #negatives, b(y) = 1{y = 0}
        ObjectiveSpec::Fpr => ratio(hits(|y| !y), truth.negatives()),
        // a(Y) = 1, b(y) = 1
        ObjectiveSpec::SetSize => hits(|_| true) as f64,
    })
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}
