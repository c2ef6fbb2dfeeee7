//! The two online controllers.
//!
//! [`DcrcController`] shares one local threshold across all sensors and keeps
//! the global threshold fixed; it ignores the link budget. [`CdcrcController`]
//! adapts one local threshold per sensor to track a per-sensor share of the
//! capacity, and moves a corrected global threshold to hold the long-term FNR.
//! Both weight the sensors with an exponentiated-gradient rule whose learning
//! rate is `ln K` over the cumulative mixability gap.
//!
//! Every `step` runs one time instant in the order: local thresholding and
//! encoding, fusion, feedback, local threshold update, global threshold
//! update, weight update.

use crate::codec::BlockCodec;
use crate::error::{Error, Result};
use crate::metrics::{
    combine, global_predict, local_predict, HardPrediction, ScoreVector, WeightVector,
};

/// Floor on the cumulative gap when computing `ln K / gap`. Before any
/// positive gap has accrued this makes the weights follow the current leader.
pub const GAP_FLOOR: f64 = 1e-12;

/// Tolerance used when checking the sum of allocated capacities.
pub const CAPACITY_TOLERANCE: f64 = 1e-9;

/// Values the server learns after each decision.
#[derive(Debug, Clone, PartialEq)]
pub struct Feedback {
    /// Exact global FNR of the decision, kept for the record.
    pub fnr: f64,
    /// FNR value that drives the threshold updates. Equals `fnr` for an exact
    /// channel, may be a conservative over-estimate otherwise.
    pub fnr_estimate: f64,
    pub fpr: f64,
    /// Per-sensor FPR of the local decisions. Needed by the weight update.
    pub local_fpr: Vec<f64>,
}

/// Everything observed and used at one time step.
///
/// Thresholds, weights, capacities and learning rate are the values in force
/// while the decision was made, before the step's updates.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub t: usize,
    pub fnr: f64,
    pub fnr_feedback: f64,
    pub fpr: f64,
    pub local_fpr: Vec<f64>,
    pub cost: Vec<f64>,
    /// Capacity targets; all zero for the unconstrained controller.
    pub capacity: Vec<f64>,
    pub lambda: Vec<f64>,
    pub theta: f64,
    /// Corrected global threshold; equals `theta` for the unconstrained controller.
    pub theta_corrected: f64,
    pub weights: Vec<f64>,
    pub eta: f64,
}

impl StepRecord {
    pub fn load(&self) -> f64 {
        self.cost.iter().sum()
    }

    pub fn k(&self) -> usize {
        self.local_fpr.len()
    }
}

/// Result of one controller step.
#[derive(Debug, Clone)]
pub struct StepOutput {
    pub decision: HardPrediction,
    pub locals: Vec<HardPrediction>,
    pub record: StepRecord,
}

/// How the capacity budget is split across sensors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Allocation {
    /// `C_k = beta_k * C`.
    #[default]
    Proportional,
    /// `C_k = C / K`.
    Uniform,
}

/// Which controller produced a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    Dcrc,
    Cdcrc,
    /// CD-CRC with the uniform capacity split.
    UniformCdcrc,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::Dcrc, Scheme::Cdcrc, Scheme::UniformCdcrc];

    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Dcrc => "dcrc",
            Scheme::Cdcrc => "cdcrc",
            Scheme::UniformCdcrc => "u-cdcrc",
        }
    }

    /// True for the controllers that respect the link budget.
    pub fn is_constrained(self) -> bool {
        !matches!(self, Scheme::Dcrc)
    }

    pub fn allocation(self) -> Allocation {
        match self {
            Scheme::UniformCdcrc => Allocation::Uniform,
            _ => Allocation::Proportional,
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "dcrc" | "d-crc" => Ok(Scheme::Dcrc),
            "cdcrc" | "cd-crc" => Ok(Scheme::Cdcrc),
            "u-cdcrc" | "ucdcrc" | "u-cd-crc" => Ok(Scheme::UniformCdcrc),
            other => Err(Error::config(
                "scheme",
                format!("unknown scheme {other:?}, expected dcrc, cdcrc or u-cdcrc"),
            )),
        }
    }
}

pub fn allocate_capacity(
    weights: &WeightVector,
    capacity: f64,
    mode: Allocation,
) -> Result<Vec<f64>> {
    let k = weights.len();
    if !(0.0..=k as f64).contains(&capacity) {
        return Err(Error::config(
            "capacity",
            format!("{capacity} outside [0, {k}]"),
        ));
    }
    Ok(match mode {
        Allocation::Proportional => weights.as_slice().iter().map(|b| b * capacity).collect(),
        Allocation::Uniform => vec![capacity / k as f64; k],
    })
}

/// Three-case local threshold rule: chase the capacity target while over
/// budget, otherwise step on the larger of the FNR excess and the budget
/// slack, and freeze once the threshold is below `-gamma`.
pub fn update_local_threshold(
    lambda: f64,
    cost: f64,
    capacity: f64,
    fnr: f64,
    alpha: f64,
    gamma: f64,
) -> f64 {
    let step = if cost > capacity {
        cost - capacity
    } else if lambda >= -gamma {
        (fnr - alpha).max(cost - capacity)
    } else {
        0.0
    };
    lambda - gamma * step
}

/// Online CRC step on the corrected global threshold. Returns the corrected
/// threshold and the threshold actually applied, `corrected - delta`.
pub fn update_global_threshold(
    theta_corrected: f64,
    fnr: f64,
    alpha: f64,
    mu: f64,
    delta: f64,
) -> (f64, f64) {
    let next = theta_corrected - mu * (fnr - alpha);
    (next, next - delta)
}

/// Exponentiated-gradient weights, `beta_k ∝ exp(-eta * L_k)`.
///
/// The minimum cumulative loss is subtracted before exponentiating, so the
/// leader always has a unit term and the normalizer cannot underflow.
pub fn eg_weights(cumulative_losses: &[f64], eta: f64) -> WeightVector {
    let k = cumulative_losses.len();
    let min = cumulative_losses
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    if eta == 0.0 || cumulative_losses.iter().all(|&l| l == min) {
        return WeightVector::uniform(k);
    }
    let raw: Vec<f64> = cumulative_losses
        .iter()
        .map(|&l| (-eta * (l - min)).exp())
        .collect();
    let total: f64 = raw.iter().sum();
    WeightVector::from_normalized(raw.into_iter().map(|w| w / total).collect())
}

/// Mixability gap of one round: `sum_k beta_k l_k + (1/eta) ln sum_k beta_k e^{-eta l_k}`.
/// Non-negative by Jensen's inequality; zero when all losses coincide.
pub fn mix_gap(weights: &[f64], losses: &[f64], eta: f64) -> f64 {
    if eta <= 0.0 || weights.len() < 2 {
        return 0.0;
    }
    let linear: f64 = weights.iter().zip(losses).map(|(b, l)| b * l).sum();
    let min = weights
        .iter()
        .zip(losses)
        .filter(|(&b, _)| b > 0.0)
        .map(|(_, &l)| l)
        .fold(f64::INFINITY, f64::min);
    let shifted: f64 = weights
        .iter()
        .zip(losses)
        .filter(|(&b, _)| b > 0.0)
        .map(|(b, &l)| b * (-eta * (l - min)).exp())
        .sum();
    linear - min + shifted.ln() / eta
}

/// `ln K / max(gap, GAP_FLOOR)`.
pub fn learning_rate(gap: f64, k: usize) -> f64 {
    (k as f64).ln() / gap.max(GAP_FLOOR)
}

/// Accumulates one round's mixability gap and derives the next learning rate.
/// Returns `(eta_next, gap_next)`.
pub fn update_learning_rate(
    prior_gap: f64,
    weights: &[f64],
    losses: &[f64],
    eta: f64,
) -> (f64, f64) {
    let gap = prior_gap + mix_gap(weights, losses, eta).max(0.0);
    (learning_rate(gap, weights.len()), gap)
}

/// Exponentiated-gradient expert state shared by both controllers.
#[derive(Debug, Clone)]
struct ExpertWeights {
    weights: WeightVector,
    cumulative_loss: Vec<f64>,
    gap: f64,
    eta: f64,
}

impl ExpertWeights {
    fn new(k: usize) -> Self {
        Self {
            weights: WeightVector::uniform(k),
            cumulative_loss: vec![0.0; k],
            gap: 0.0,
            eta: learning_rate(0.0, k),
        }
    }

    fn update(&mut self, losses: &[f64]) {
        let (eta, gap) = update_learning_rate(self.gap, self.weights.as_slice(), losses, self.eta);
        for (acc, l) in self.cumulative_loss.iter_mut().zip(losses) {
            *acc += l;
        }
        self.gap = gap;
        self.eta = eta;
        self.weights = eg_weights(&self.cumulative_loss, eta);
    }
}

fn check_scores(scores: &[ScoreVector], k: usize) -> Result<usize> {
    if scores.len() != k {
        return Err(Error::Dimension {
            expected: k,
            found: scores.len(),
        });
    }
    let len = scores[0].len();
    for s in scores {
        if s.len() != len {
            return Err(Error::Dimension {
                expected: len,
                found: s.len(),
            });
        }
    }
    Ok(len)
}

fn check_feedback(feedback: &Feedback, k: usize) -> Result<()> {
    if feedback.local_fpr.len() != k {
        return Err(Error::Dimension {
            expected: k,
            found: feedback.local_fpr.len(),
        });
    }
    Ok(())
}

fn check_unit(field: &str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::config(field, format!("{value} outside [0, 1]")))
    }
}

fn check_positive(field: &str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::config(field, format!("{value} must be positive")))
    }
}

/// Hyperparameters of the unconstrained controller.
#[derive(Debug, Clone, PartialEq)]
pub struct DcrcParams {
    pub alpha: f64,
    pub rho: f64,
    /// Fixed global threshold in `(0, 1]`.
    pub theta: f64,
    pub initial_lambda: f64,
}

impl DcrcParams {
    pub fn new(alpha: f64) -> Self {
        Self {
            alpha,
            rho: 0.2,
            theta: 0.5,
            initial_lambda: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_unit("alpha", self.alpha)?;
        check_positive("rho", self.rho)?;
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return Err(Error::config("theta", format!("{} outside (0, 1]", self.theta)));
        }
        Ok(())
    }
}

/// Unconstrained benchmark: common local threshold, fixed global threshold.
#[derive(Debug, Clone)]
pub struct DcrcController {
    params: DcrcParams,
    k: usize,
    t: usize,
    lambda: f64,
    experts: ExpertWeights,
}

impl DcrcController {
    pub fn new(params: DcrcParams, k: usize) -> Result<Self> {
        params.validate()?;
        if k == 0 {
            return Err(Error::config("sensors", "at least one sensor is required"));
        }
        Ok(Self {
            lambda: params.initial_lambda,
            params,
            k,
            t: 1,
            experts: ExpertWeights::new(k),
        })
    }

    pub fn params(&self) -> &DcrcParams {
        &self.params
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn weights(&self) -> &WeightVector {
        &self.experts.weights
    }

    pub fn gap(&self) -> f64 {
        self.experts.gap
    }

    pub fn eta(&self) -> f64 {
        self.experts.eta
    }

    pub fn cumulative_local_fpr(&self) -> &[f64] {
        &self.experts.cumulative_loss
    }

    pub fn step<F>(&mut self, scores: &[ScoreVector], codec: &BlockCodec, feedback: F) -> Result<StepOutput>
    where
        F: FnOnce(&HardPrediction, &[HardPrediction]) -> Feedback,
    {
        check_scores(scores, self.k)?;
        let locals: Vec<HardPrediction> =
            scores.iter().map(|s| local_predict(s, self.lambda)).collect();
        let cost = locals
            .iter()
            .map(|u| codec.cost(u))
            .collect::<Result<Vec<_>>>()?;
        let soft = combine(&locals, &self.experts.weights)?;
        let decision = global_predict(&soft, self.params.theta);
        let fb = feedback(&decision, &locals);
        check_feedback(&fb, self.k)?;

        let record = StepRecord {
            t: self.t,
            fnr: fb.fnr,
            fnr_feedback: fb.fnr_estimate,
            fpr: fb.fpr,
            local_fpr: fb.local_fpr.clone(),
            cost,
            capacity: vec![0.0; self.k],
            lambda: vec![self.lambda; self.k],
            theta: self.params.theta,
            theta_corrected: self.params.theta,
            weights: self.experts.weights.as_slice().to_vec(),
            eta: self.experts.eta,
        };

        self.lambda -= self.params.rho * (fb.fnr_estimate - self.params.alpha);
        self.experts.update(&fb.local_fpr);
        self.t += 1;
        Ok(StepOutput {
            decision,
            locals,
            record,
        })
    }
}

/// Hyperparameters of the capacity-constrained controller.
#[derive(Debug, Clone, PartialEq)]
pub struct CdcrcParams {
    pub alpha: f64,
    /// Long-term budget on the summed normalized cost, in `[0, K]`.
    pub capacity: f64,
    pub gamma: f64,
    pub mu: f64,
    /// Offset between corrected and applied global threshold; must exceed `mu (1 - alpha)`.
    pub delta: f64,
    pub allocation: Allocation,
    pub initial_lambda: f64,
    /// Applied global threshold at `t = 1`; the corrected one starts at this plus `delta`.
    pub initial_theta: f64,
}

impl CdcrcParams {
    /// Defaults: unit step sizes of 0.2 and `delta = mu (1 - alpha) + 0.01`.
    pub fn new(alpha: f64, capacity: f64) -> Self {
        let mu = 0.2;
        Self {
            alpha,
            capacity,
            gamma: 0.2,
            mu,
            delta: mu * (1.0 - alpha) + 0.01,
            allocation: Allocation::Proportional,
            initial_lambda: 0.0,
            initial_theta: 0.0,
        }
    }

    /// Lower end of the corrected-threshold range, `delta - mu (1 - alpha)`.
    pub fn theta_floor(&self) -> f64 {
        self.delta - self.mu * (1.0 - self.alpha)
    }

    /// Upper end of the corrected-threshold range, `1 + delta + mu alpha`.
    pub fn theta_ceiling(&self) -> f64 {
        1.0 + self.delta + self.mu * self.alpha
    }

    pub fn initial_theta_corrected(&self) -> f64 {
        self.initial_theta + self.delta
    }

    pub fn validate(&self, k: usize) -> Result<()> {
        check_unit("alpha", self.alpha)?;
        check_positive("gamma", self.gamma)?;
        check_positive("mu", self.mu)?;
        if !(0.0..=k as f64).contains(&self.capacity) {
            return Err(Error::config(
                "capacity",
                format!("{} outside [0, {k}]", self.capacity),
            ));
        }
        if self.theta_floor() <= 0.0 {
            return Err(Error::config(
                "delta",
                format!(
                    "{} must exceed mu (1 - alpha) = {}",
                    self.delta,
                    self.mu * (1.0 - self.alpha)
                ),
            ));
        }
        Ok(())
    }
}

/// Capacity-constrained controller with per-sensor local thresholds and a
/// corrected global threshold.
#[derive(Debug, Clone)]
pub struct CdcrcController {
    params: CdcrcParams,
    k: usize,
    t: usize,
    lambdas: Vec<f64>,
    theta_corrected: f64,
    experts: ExpertWeights,
}

impl CdcrcController {
    pub fn new(params: CdcrcParams, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::config("sensors", "at least one sensor is required"));
        }
        params.validate(k)?;
        Ok(Self {
            lambdas: vec![params.initial_lambda; k],
            theta_corrected: params.initial_theta_corrected(),
            params,
            k,
            t: 1,
            experts: ExpertWeights::new(k),
        })
    }

    pub fn params(&self) -> &CdcrcParams {
        &self.params
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn theta_corrected(&self) -> f64 {
        self.theta_corrected
    }

    pub fn theta(&self) -> f64 {
        self.theta_corrected - self.params.delta
    }

    pub fn weights(&self) -> &WeightVector {
        &self.experts.weights
    }

    pub fn gap(&self) -> f64 {
        self.experts.gap
    }

    pub fn eta(&self) -> f64 {
        self.experts.eta
    }

    /// Per-sensor running sums of `P_k / theta_corrected`.
    pub fn cumulative_scaled_loss(&self) -> &[f64] {
        &self.experts.cumulative_loss
    }

    pub fn step<F>(&mut self, scores: &[ScoreVector], codec: &BlockCodec, feedback: F) -> Result<StepOutput>
    where
        F: FnOnce(&HardPrediction, &[HardPrediction]) -> Feedback,
    {
        check_scores(scores, self.k)?;
        let p = &self.params;
        let locals: Vec<HardPrediction> = scores
            .iter()
            .zip(&self.lambdas)
            .map(|(s, &lambda)| local_predict(s, lambda))
            .collect();
        let cost = locals
            .iter()
            .map(|u| codec.cost(u))
            .collect::<Result<Vec<_>>>()?;
        let soft = combine(&locals, &self.experts.weights)?;
        let theta = self.theta_corrected - p.delta;
        let decision = global_predict(&soft, theta);
        let fb = feedback(&decision, &locals);
        check_feedback(&fb, self.k)?;
        let capacity = allocate_capacity(&self.experts.weights, p.capacity, p.allocation)?;

        let record = StepRecord {
            t: self.t,
            fnr: fb.fnr,
            fnr_feedback: fb.fnr_estimate,
            fpr: fb.fpr,
            local_fpr: fb.local_fpr.clone(),
            cost: cost.clone(),
            capacity: capacity.clone(),
            lambda: self.lambdas.clone(),
            theta,
            theta_corrected: self.theta_corrected,
            weights: self.experts.weights.as_slice().to_vec(),
            eta: self.experts.eta,
        };

        for ((lambda, &b), &c) in self.lambdas.iter_mut().zip(&cost).zip(&capacity) {
            *lambda = update_local_threshold(*lambda, b, c, fb.fnr_estimate, p.alpha, p.gamma);
            debug_assert!(*lambda >= -2.0 * p.gamma - 1e-12, "local threshold below -2 gamma");
        }
        let scaled: Vec<f64> = fb
            .local_fpr
            .iter()
            .map(|&pk| pk / self.theta_corrected)
            .collect();
        (self.theta_corrected, _) =
            update_global_threshold(self.theta_corrected, fb.fnr_estimate, p.alpha, p.mu, p.delta);
        self.experts.update(&scaled);
        self.t += 1;
        Ok(StepOutput {
            decision,
            locals,
            record,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{fnr, fpr, local_fpr, LabelVector};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn exact_feedback<'a>(
        truth: &'a LabelVector,
    ) -> impl FnOnce(&HardPrediction, &[HardPrediction]) -> Feedback + 'a {
        move |v, locals| {
            let n = fnr(truth, v).unwrap();
            Feedback {
                fnr: n,
                fnr_estimate: n,
                fpr: fpr(truth, v).unwrap(),
                local_fpr: locals.iter().map(|u| local_fpr(truth, u).unwrap()).collect(),
            }
        }
    }

    fn constant_feedback(n: f64, k: usize) -> impl FnOnce(&HardPrediction, &[HardPrediction]) -> Feedback {
        move |_, _| Feedback {
            fnr: n,
            fnr_estimate: n,
            fpr: 0.0,
            local_fpr: vec![0.0; k],
        }
    }

    #[test]
    fn dcrc_threshold_examples() {
        let codec = BlockCodec::new(2).unwrap();
        let scores = vec![ScoreVector::clamped(vec![0.3, 0.7])];

        let mut params = DcrcParams::new(0.15);
        params.initial_lambda = 0.5;
        let mut c = DcrcController::new(params, 1).unwrap();
        c.step(&scores, &codec, constant_feedback(0.35, 1)).unwrap();
        assert_relative_eq!(c.lambda(), 0.46, epsilon = 1e-12);

        let mut c = DcrcController::new(DcrcParams::new(0.15), 1).unwrap();
        c.step(&scores, &codec, constant_feedback(0.15, 1)).unwrap();
        assert_eq!(c.lambda(), 0.0);

        let mut c = DcrcController::new(DcrcParams::new(0.15), 1).unwrap();
        for _ in 0..3 {
            c.step(&scores, &codec, constant_feedback(1.0, 1)).unwrap();
        }
        assert_relative_eq!(c.lambda(), -0.51, epsilon = 1e-12);
    }

    #[test]
    fn cdcrc_single_perfect_sensor() {
        let codec = BlockCodec::new(2).unwrap();
        let truth = LabelVector::from_bits(&[1, 0, 0, 1]).unwrap();
        let scores = vec![ScoreVector::clamped(vec![1.0, 0.0, 0.0, 1.0])];
        let mut params = CdcrcParams::new(0.15, 1.0);
        params.initial_lambda = 0.5;
        let mut c = CdcrcController::new(params, 1).unwrap();
        assert_eq!(c.theta_corrected(), c.params().delta);
        // theta starts at 0, so the first decision keeps every label
        let out = c.step(&scores, &codec, exact_feedback(&truth)).unwrap();
        assert_eq!(out.decision, HardPrediction::all_ones(4));
        assert_eq!(out.record.weights, vec![1.0]);
        assert_eq!(out.record.fnr, 0.0);
        assert_eq!(out.record.fpr, 1.0);
        assert_eq!(out.record.theta, 0.0);
        let out = c.step(&scores, &codec, exact_feedback(&truth)).unwrap();
        assert!(out.record.theta > 0.0);
        assert_eq!(out.decision, out.locals[0]);
        assert_eq!(out.record.fnr, 0.0);
        assert_eq!(out.record.fpr, 0.0);
    }

    #[test]
    fn cdcrc_theta_descends_to_floor() {
        let codec = BlockCodec::new(2).unwrap();
        let scores = vec![ScoreVector::clamped(vec![0.5, 0.5]); 2];
        let params = CdcrcParams::new(0.15, 1.0);
        let step = params.mu * (1.0 - params.alpha);
        let floor = params.theta_floor();
        let mut c = CdcrcController::new(params.clone(), 2).unwrap();
        let start = c.theta_corrected();
        for i in 1..=3 {
            c.step(&scores, &codec, constant_feedback(1.0, 2)).unwrap();
            assert_relative_eq!(c.theta_corrected(), start - i as f64 * step, epsilon = 1e-12);
        }
        assert!(c.theta_corrected() < floor);

        // With exact feedback the decision below a non-positive threshold is
        // all-ones, so the FNR is zero and the threshold never leaves the range.
        let truth = LabelVector::from_bits(&[1, 0]).unwrap();
        let mut c = CdcrcController::new(params, 2).unwrap();
        for _ in 0..50 {
            c.step(&scores, &codec, exact_feedback(&truth)).unwrap();
            assert!(c.theta_corrected() >= floor - 1e-12);
        }
    }

    #[test]
    fn cdcrc_rejects_small_offset() {
        let mut params = CdcrcParams::new(0.15, 1.0);
        params.delta = params.mu * (1.0 - params.alpha);
        assert!(matches!(
            CdcrcController::new(params, 4),
            Err(Error::Config { field, .. }) if field == "delta"
        ));
        assert!(CdcrcController::new(CdcrcParams::new(0.15, 5.0), 4).is_err());
    }

    #[test]
    fn step_rejects_bad_dimensions() {
        let codec = BlockCodec::new(2).unwrap();
        let mut c = CdcrcController::new(CdcrcParams::new(0.15, 1.0), 2).unwrap();
        let one = vec![ScoreVector::clamped(vec![0.5, 0.5])];
        assert!(c.step(&one, &codec, constant_feedback(0.0, 2)).is_err());
        let ragged = vec![
            ScoreVector::clamped(vec![0.5, 0.5]),
            ScoreVector::clamped(vec![0.5, 0.5, 0.1, 0.1]),
        ];
        assert!(c.step(&ragged, &codec, constant_feedback(0.0, 2)).is_err());
        let odd = vec![ScoreVector::clamped(vec![0.5; 3]); 2];
        assert!(matches!(
            c.step(&odd, &codec, constant_feedback(0.0, 2)),
            Err(Error::NotDivisible { .. })
        ));
    }

    #[test]
    fn allocation_examples() {
        let w = WeightVector::new(vec![0.7, 0.1, 0.1, 0.1]).unwrap();
        let c = allocate_capacity(&w, 1.0, Allocation::Proportional).unwrap();
        for (a, b) in c.iter().zip([0.7, 0.1, 0.1, 0.1]) {
            assert_relative_eq!(*a, b);
        }
        assert_eq!(
            allocate_capacity(&w, 1.0, Allocation::Uniform).unwrap(),
            vec![0.25; 4]
        );
        let one_hot = WeightVector::new(vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(
            allocate_capacity(&one_hot, 1.0, Allocation::Proportional).unwrap(),
            vec![1.0, 0.0, 0.0, 0.0]
        );
        assert!(allocate_capacity(&w, 4.5, Allocation::Uniform).is_err());
        assert!(allocate_capacity(&w, -0.1, Allocation::Uniform).is_err());
    }

    #[test]
    fn local_threshold_cases() {
        assert_relative_eq!(update_local_threshold(0.4, 0.8, 0.5, 0.0, 0.15, 0.2), 0.34, epsilon = 1e-12);
        assert_relative_eq!(update_local_threshold(0.1, 0.2, 0.5, 0.3, 0.15, 0.2), 0.07, epsilon = 1e-12);
        assert_eq!(update_local_threshold(-0.5, 0.0, 0.5, 1.0, 0.15, 0.2), -0.5);
    }

    #[test]
    fn global_threshold_examples() {
        let (tc, t) = update_global_threshold(0.5, 0.4, 0.15, 0.2, 0.18);
        assert_relative_eq!(tc, 0.45, epsilon = 1e-12);
        assert_relative_eq!(t, 0.27, epsilon = 1e-12);
        assert_eq!(update_global_threshold(0.5, 0.15, 0.15, 0.2, 0.18).0, 0.5);
    }

    #[test]
    fn global_threshold_ceiling_under_zero_fnr() {
        // The applied threshold exceeds 1 only if the previous corrected
        // threshold exceeded 1 + delta; then the all-zero decision misses every
        // relevant label and the threshold comes back down.
        let codec = BlockCodec::new(2).unwrap();
        let params = CdcrcParams::new(0.15, 2.0);
        let ceiling = params.theta_ceiling();
        let truth = LabelVector::from_bits(&[1, 0, 1, 0]).unwrap();
        let scores = vec![ScoreVector::clamped(vec![0.9, 0.0, 0.9, 0.0]); 2];
        let mut c = CdcrcController::new(params, 2).unwrap();
        let mut peak: f64 = 0.0;
        for _ in 0..200 {
            c.step(&scores, &codec, exact_feedback(&truth)).unwrap();
            peak = peak.max(c.theta_corrected());
            assert!(c.theta_corrected() <= ceiling + 1e-12);
        }
        assert!(peak > 1.0);
    }

    #[test]
    fn eg_examples() {
        let w = eg_weights(&[0.0, 10.0], 1.0);
        let expected = 1.0 / (1.0 + (-10.0f64).exp());
        assert_relative_eq!(w.as_slice()[0], 0.999_954_602_131_297_6, epsilon = 1e-15);
        assert_relative_eq!(w.as_slice()[0], expected, epsilon = 1e-15);
        assert_relative_eq!(w.as_slice()[1], 4.539_786_870_243_442e-5, epsilon = 1e-15);
        assert_eq!(eg_weights(&[3.0; 4], 7.0), WeightVector::uniform(4));
        let w = eg_weights(&[1.0, 0.5, 0.7], 1e6);
        assert_eq!(w.as_slice(), &[0.0, 1.0, 0.0]);
    }

    #[test]
    fn mix_gap_examples() {
        assert!(mix_gap(&[0.3, 0.7], &[0.4, 0.4], 2.0).abs() < 1e-15);
        let expected = 0.5 + ((1.0 + (-1.0f64).exp()) / 2.0).ln();
        assert_relative_eq!(mix_gap(&[0.5, 0.5], &[0.0, 1.0], 1.0), expected, epsilon = 1e-15);
        assert_relative_eq!(expected, 0.120_114_506_958_277_5, epsilon = 1e-15);
        // Very large eta approaches linear loss minus the best supported loss.
        assert_relative_eq!(mix_gap(&[0.5, 0.5], &[0.0, 1.0], 1e12), 0.5, epsilon = 1e-9);
    }

    #[test]
    fn learning_rate_bootstrap() {
        assert_eq!(learning_rate(0.0, 1), 0.0);
        assert_relative_eq!(learning_rate(0.0, 4), 4f64.ln() / GAP_FLOOR);
        let (eta, gap) = update_learning_rate(0.2, &[0.5, 0.5], &[0.0, 1.0], 1.0);
        assert_relative_eq!(gap, 0.2 + 0.120_114_506_958_277_5, epsilon = 1e-12);
        assert_relative_eq!(eta, 2f64.ln() / gap);
    }

    proptest! {
        #[test]
        fn mix_gap_is_nonnegative(
            raw in proptest::collection::vec(0.001f64..1.0, 2..8),
            losses in proptest::collection::vec(0.0f64..5.0, 8),
            log_eta in -6.0f64..12.0,
        ) {
            let total: f64 = raw.iter().sum();
            let w: Vec<f64> = raw.iter().map(|x| x / total).collect();
            let g = mix_gap(&w, &losses[..w.len()], 10f64.powf(log_eta));
            prop_assert!(g >= -1e-12, "gap {}", g);
        }

        #[test]
        fn eg_is_shift_invariant(
            losses in proptest::collection::vec(0.0f64..20.0, 1..8),
            shift in -50.0f64..50.0,
            eta in 0.0f64..10.0,
        ) {
            let a = eg_weights(&losses, eta);
            let shifted: Vec<f64> = losses.iter().map(|l| l + shift).collect();
            let b = eg_weights(&shifted, eta);
            let sum: f64 = a.as_slice().iter().sum();
            prop_assert!((sum - 1.0).abs() <= 1e-9);
            for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
                prop_assert!((x - y).abs() <= 1e-12);
            }
        }

        #[test]
        fn local_threshold_respects_floor(
            lambda in -0.4f64..2.0,
            cost in 0.0f64..1.0,
            cap in 0.0f64..4.0,
            n in 0.0f64..1.0,
            alpha in 0.0f64..1.0,
            gamma in 0.01f64..1.0,
        ) {
            // Link cost is zero once lambda <= 0, since every label is kept.
            let lambda = lambda.max(-2.0 * gamma);
            let cost = if lambda <= 0.0 { 0.0 } else { cost };
            let next = update_local_threshold(lambda, cost, cap, n, alpha, gamma);
            prop_assert!(next >= -2.0 * gamma - 1e-12);
            prop_assert!(lambda - next >= (cost - cap) * gamma - 1e-12);
        }
    }
}
