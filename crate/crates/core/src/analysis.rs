//! Bound calculators and trajectory verifiers.
//!
//! Every guarantee below holds on each individual trajectory, with no
//! distributional assumption, so a single violation is a bug:
//!
//! | id              | controller | inequality                                                        |
//! |-----------------|------------|-------------------------------------------------------------------|
//! | `dcrc_fnr`      | D-CRC      | `mean N <= alpha + (lambda1 + rho (1 - alpha)) / (rho T)`         |
//! | `dcrc_fpr`      | D-CRC      | `mean P <= P* / theta + epsilon`                                  |
//! | `cdcrc_fnr`     | CD-CRC     | `mean N < alpha + theta_c1 / (mu T)`                              |
//! | `cdcrc_load`    | CD-CRC     | `mean sum_k B_k <= C + sum_k (lambda1_k + 2 gamma) / (gamma T)`   |
//! | `step_fpr`      | CD-CRC     | `P_t <= (sum_k beta_k P_k + delta) / theta_c` at every step       |
//! | `cdcrc_fpr`     | CD-CRC     | `mean P <= P* / (delta - mu (1 - alpha)) + sigma + delta/T sum 1/theta_c` |
//! | `lambda_floor`  | CD-CRC     | `lambda_k >= -2 gamma` at every step                              |
//! | `theta_range`   | CD-CRC     | `delta - mu (1 - alpha) <= theta_c <= 1 + delta + mu alpha` at every step |
//!
//! The FNR and load bounds hold for every prefix of the run and are checked
//! at every `t`; a violation reports the first failing step. `P*` is the
//! best sensor's long-term local FPR, and `epsilon`, `sigma` are the adaptive
//! Hedge regret terms computed from the per-step local FPR extrema.
//!
//! When all sensors have the same local FPR at every step the regret terms are
//! `0/0`; they are defined as zero there.

use crate::control::{Scheme, StepRecord};
use crate::error::{Error, Result};

/// Absolute slack for floating-point noise in every comparison.
pub const BOUND_TOLERANCE: f64 = 1e-9;

/// Magnitude below which a negative square-root argument is treated as
/// rounding noise and clamped to zero.
pub const SQRT_CLAMP: f64 = 1e-12;

/// A recorded run plus the hyperparameters needed to evaluate its bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub scheme: Scheme,
    pub alpha: f64,
    pub capacity: f64,
    /// Local threshold step size (`rho` for D-CRC, `gamma` for CD-CRC).
    pub local_step: f64,
    /// Global threshold step size; unused by D-CRC.
    pub mu: f64,
    /// Global threshold offset; unused by D-CRC.
    pub delta: f64,
    pub records: Vec<StepRecord>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn k(&self) -> usize {
        self.records.first().map_or(0, StepRecord::k)
    }

    fn check(&self) -> Result<()> {
        if self.records.is_empty() {
            return Err(Error::Empty("trajectory"));
        }
        for (i, r) in self.records.iter().enumerate() {
            if r.t != i + 1 {
                return Err(Error::config(
                    "trajectory",
                    format!("row {} has t = {}, expected {}", i + 1, r.t, i + 1),
                ));
            }
        }
        Ok(())
    }

    fn theta_floor(&self) -> f64 {
        self.delta - self.mu * (1.0 - self.alpha)
    }

    fn theta_ceiling(&self) -> f64 {
        1.0 + self.delta + self.mu * self.alpha
    }
}

/// One evaluated inequality `lhs <= rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundEntry {
    pub id: &'static str,
    pub lhs: f64,
    pub rhs: f64,
    pub satisfied: bool,
    /// First violating step for per-step and per-prefix checks.
    pub step: Option<usize>,
    pub note: Option<String>,
}

impl BoundEntry {
    fn new(id: &'static str, lhs: f64, rhs: f64) -> Self {
        Self {
            id,
            lhs,
            rhs,
            satisfied: lhs <= rhs + BOUND_TOLERANCE,
            step: None,
            note: None,
        }
    }

    pub fn slack(&self) -> f64 {
        self.rhs - self.lhs
    }
}

/// All checks evaluated on one trajectory.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BoundReport {
    pub entries: Vec<BoundEntry>,
}

impl BoundReport {
    pub fn all_satisfied(&self) -> bool {
        self.entries.iter().all(|e| e.satisfied)
    }

    pub fn failures(&self) -> impl Iterator<Item = &BoundEntry> {
        self.entries.iter().filter(|e| !e.satisfied)
    }

    pub fn get(&self, id: &str) -> Option<&BoundEntry> {
        self.entries.iter().find(|e| e.id == id)
    }
}

/// Per-run aggregates of the local FPRs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalFprStats {
    pub steps: usize,
    pub k: usize,
    /// `min_k sum_t P_k^t`.
    pub best_total: f64,
    pub best_sensor: usize,
    /// `sum_t max_k P_k^t`.
    pub sum_max: f64,
    /// `sum_t min_k P_k^t`.
    pub sum_min: f64,
    /// `max_t (max_k - min_k)`.
    pub max_range: f64,
    /// `sum_t (max_k - min_k)`.
    pub sum_range: f64,
}

impl LocalFprStats {
    pub fn from_records(records: &[StepRecord]) -> Self {
        let k = records.first().map_or(0, StepRecord::k);
        let mut totals = vec![0.0; k];
        let (mut sum_max, mut sum_min, mut max_range, mut sum_range) = (0.0, 0.0, 0.0f64, 0.0);
        for r in records {
            let hi = r.local_fpr.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lo = r.local_fpr.iter().copied().fold(f64::INFINITY, f64::min);
            for (acc, p) in totals.iter_mut().zip(&r.local_fpr) {
                *acc += p;
            }
            sum_max += hi;
            sum_min += lo;
            max_range = max_range.max(hi - lo);
            sum_range += hi - lo;
        }
        let (best_sensor, best_total) = totals
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::INFINITY), |best, (i, v)| if v < best.1 { (i, v) } else { best });
        Self {
            steps: records.len(),
            k,
            best_total,
            best_sensor,
            sum_max,
            sum_min,
            max_range,
            sum_range,
        }
    }

    /// Long-term FPR of the best sensor in hindsight.
    pub fn best_value(&self) -> f64 {
        self.best_total / self.steps as f64
    }
}

/// A regret term and whether any square-root argument had to be clamped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegretTerm {
    pub value: f64,
    pub clamped: bool,
}

fn clamped_sqrt(x: f64, clamped: &mut bool) -> f64 {
    if x < 0.0 {
        *clamped = true;
        if x < -SQRT_CLAMP {
            log::warn!("square-root argument {x} is negative beyond rounding noise");
        }
        0.0
    } else {
        x.sqrt()
    }
}

/// Adaptive Hedge regret bound with loss scale `1/scale`, expressed through
/// the three square-root factors and the range term.
fn hedge_regret(
    stats: &LocalFprStats,
    curvature: f64,
    upper: (f64, f64),
    lower: (f64, f64),
    range_scale: f64,
) -> RegretTerm {
    if stats.sum_range <= 0.0 {
        return RegretTerm {
            value: 0.0,
            clamped: false,
        };
    }
    let ln_k = (stats.k as f64).ln();
    let t = stats.steps as f64;
    let mut clamped = false;
    let f1 = clamped_sqrt(curvature * ln_k * stats.max_range / stats.sum_range, &mut clamped);
    let f2 = clamped_sqrt(upper.0 - upper.1, &mut clamped);
    let f3 = clamped_sqrt(lower.0 - lower.1, &mut clamped);
    let value = 2.0 / t * f1 * f2 * f3
        + range_scale / t * (16.0 / 3.0 * ln_k + 2.0) * stats.max_range;
    RegretTerm { value, clamped }
}

/// Regret term of the D-CRC FPR bound with fixed global threshold `theta`.
pub fn epsilon(stats: &LocalFprStats, theta: f64) -> RegretTerm {
    let mut term = hedge_regret(
        stats,
        1.0,
        (stats.sum_max, stats.best_total),
        (stats.best_total, stats.sum_min),
        1.0,
    );
    term.value /= theta;
    term
}

/// Regret term of the CD-CRC FPR bound.
pub fn sigma(stats: &LocalFprStats, delta: f64, mu: f64, alpha: f64) -> RegretTerm {
    let lo = delta - mu * (1.0 - alpha);
    let hi = 1.0 + delta + mu * alpha;
    hedge_regret(
        stats,
        hi / lo,
        (stats.sum_max / lo, stats.best_total / hi),
        (stats.best_total / lo, stats.sum_min / hi),
        1.0 / lo,
    )
}

/// `alpha + theta_c1 / (mu T)`.
pub fn cdcrc_fnr_bound(theta_corrected_1: f64, mu: f64, steps: usize, alpha: f64) -> f64 {
    alpha + theta_corrected_1 / (mu * steps as f64)
}

/// `C + sum_k (lambda1_k + 2 gamma) / (gamma T)`.
pub fn cdcrc_load_bound(initial_lambdas: &[f64], gamma: f64, steps: usize, capacity: f64) -> f64 {
    capacity
        + initial_lambdas
            .iter()
            .map(|l| l + 2.0 * gamma)
            .sum::<f64>()
            / (gamma * steps as f64)
}

/// `alpha + (lambda1 + rho (1 - alpha)) / (rho T)`.
pub fn dcrc_fnr_bound(initial_lambda: f64, rho: f64, steps: usize, alpha: f64) -> f64 {
    alpha + (initial_lambda + rho * (1.0 - alpha)) / (rho * steps as f64)
}

/// Evaluates `bound(t)` against the running mean of `series` for every
/// prefix and keeps the final step, or the first violation.
fn prefix_check(
    id: &'static str,
    series: impl Iterator<Item = f64>,
    bound: impl Fn(usize) -> f64,
    strict: bool,
) -> BoundEntry {
    let mut sum = 0.0;
    let mut last = BoundEntry::new(id, 0.0, 0.0);
    for (i, x) in series.enumerate() {
        sum += x;
        let t = i + 1;
        let lhs = sum / t as f64;
        let rhs = bound(t);
        let ok = if strict {
            lhs < rhs + BOUND_TOLERANCE
        } else {
            lhs <= rhs + BOUND_TOLERANCE
        };
        last = BoundEntry {
            id,
            lhs,
            rhs,
            satisfied: ok,
            step: None,
            note: None,
        };
        if !ok {
            last.step = Some(t);
            last.note = Some(format!("running mean exceeds the bound at step {t}"));
            return last;
        }
    }
    last
}

/// Worst-slack per-step check.
fn per_step_check<'a>(
    id: &'static str,
    records: impl Iterator<Item = &'a StepRecord>,
    eval: impl Fn(&StepRecord) -> (f64, f64),
) -> BoundEntry {
    let mut worst: Option<BoundEntry> = None;
    for r in records {
        let (lhs, rhs) = eval(r);
        let mut e = BoundEntry::new(id, lhs, rhs);
        e.step = Some(r.t);
        if !e.satisfied {
            e.note = Some(format!("violated at step {}", r.t));
            return e;
        }
        if worst.as_ref().is_none_or(|w| e.slack() < w.slack()) {
            worst = Some(e);
        }
    }
    let mut e = worst.unwrap_or_else(|| BoundEntry::new(id, 0.0, 0.0));
    e.note = Some(format!("tightest at step {}", e.step.unwrap_or(0)));
    e.step = None;
    e
}

/// Per-step FPR bound of the fused decision: `P <= (sum_k beta_k P_k + delta) / theta_c`.
pub fn step_fpr_check(record: &StepRecord, delta: f64) -> BoundEntry {
    let mixed: f64 = record
        .weights
        .iter()
        .zip(&record.local_fpr)
        .map(|(b, p)| b * p)
        .sum();
    let mut e = BoundEntry::new("step_fpr", record.fpr, (mixed + delta) / record.theta_corrected);
    e.step = Some(record.t);
    e
}

/// FNR and FPR bounds of the unconstrained controller.
pub fn dcrc_bounds(traj: &Trajectory, rho: f64, theta: f64, alpha: f64) -> Result<Vec<BoundEntry>> {
    traj.check()?;
    let lambda1 = traj.records[0].lambda[0];
    let fnr = prefix_check(
        "dcrc_fnr",
        traj.records.iter().map(|r| r.fnr),
        |t| dcrc_fnr_bound(lambda1, rho, t, alpha),
        false,
    );
    let stats = LocalFprStats::from_records(&traj.records);
    let eps = epsilon(&stats, theta);
    let mean_fpr = traj.records.iter().map(|r| r.fpr).sum::<f64>() / traj.len() as f64;
    let mut fpr = BoundEntry::new("dcrc_fpr", mean_fpr, stats.best_value() / theta + eps.value);
    if eps.clamped {
        fpr.note = Some("square-root argument clamped to zero".into());
    }
    Ok(vec![fnr, fpr])
}

/// FPR bound of the constrained controller.
pub fn cdcrc_fpr_bound(traj: &Trajectory, delta: f64, mu: f64, alpha: f64) -> Result<BoundEntry> {
    traj.check()?;
    let lo = delta - mu * (1.0 - alpha);
    if lo <= 0.0 {
        return Err(Error::config(
            "delta",
            format!("{delta} must exceed mu (1 - alpha) = {}", mu * (1.0 - alpha)),
        ));
    }
    let stats = LocalFprStats::from_records(&traj.records);
    let s = sigma(&stats, delta, mu, alpha);
    let t = traj.len() as f64;
    let inverse_theta: f64 = traj.records.iter().map(|r| 1.0 / r.theta_corrected).sum();
    let rhs = stats.best_value() / lo + s.value + delta / t * inverse_theta;
    let lhs = traj.records.iter().map(|r| r.fpr).sum::<f64>() / t;
    let mut e = BoundEntry::new("cdcrc_fpr", lhs, rhs);
    if s.clamped {
        e.note = Some("square-root argument clamped to zero".into());
    }
    Ok(e)
}

fn check_family(traj: &Trajectory, expected: Scheme) -> Result<()> {
    if traj.scheme.is_constrained() != expected.is_constrained() {
        return Err(Error::SchemeMismatch {
            expected: expected.to_string(),
            found: traj.scheme.to_string(),
        });
    }
    Ok(())
}

/// Every check for a D-CRC trajectory.
pub fn verify_dcrc(traj: &Trajectory, theta: f64) -> Result<BoundReport> {
    check_family(traj, Scheme::Dcrc)?;
    Ok(BoundReport {
        entries: dcrc_bounds(traj, traj.local_step, theta, traj.alpha)?,
    })
}

/// Every check for a CD-CRC or U-CD-CRC trajectory.
pub fn verify_cdcrc(traj: &Trajectory) -> Result<BoundReport> {
    check_family(traj, Scheme::Cdcrc)?;
    traj.check()?;
    let (alpha, mu, delta, gamma) = (traj.alpha, traj.mu, traj.delta, traj.local_step);
    let first = &traj.records[0];
    let theta1 = first.theta_corrected;
    let lambda1 = first.lambda.clone();

    let fnr = prefix_check(
        "cdcrc_fnr",
        traj.records.iter().map(|r| r.fnr),
        |t| cdcrc_fnr_bound(theta1, mu, t, alpha),
        true,
    );
    let load = prefix_check(
        "cdcrc_load",
        traj.records.iter().map(StepRecord::load),
        |t| cdcrc_load_bound(&lambda1, gamma, t, traj.capacity),
        false,
    );
    let step_fpr = per_step_check("step_fpr", traj.records.iter(), |r| {
        let e = step_fpr_check(r, delta);
        (e.lhs, e.rhs)
    });
    let floor = -2.0 * gamma;
    // lhs = -min_k lambda_k, rhs = 2 gamma
    let lambda_floor = per_step_check("lambda_floor", traj.records.iter(), |r| {
        let min = r.lambda.iter().copied().fold(f64::INFINITY, f64::min);
        (-min, -floor)
    });
    let (lo, hi) = (traj.theta_floor(), traj.theta_ceiling());
    // distance outside [lo, hi], must be <= 0
    let theta_range = per_step_check("theta_range", traj.records.iter(), |r| {
        let outside = (lo - r.theta_corrected).max(r.theta_corrected - hi);
        (outside, 0.0)
    });
    let fpr = cdcrc_fpr_bound(traj, delta, mu, alpha)?;
    Ok(BoundReport {
        entries: vec![fnr, load, step_fpr, lambda_floor, theta_range, fpr],
    })
}

/// Dispatches on the trajectory's own scheme.
pub fn verify(traj: &Trajectory, theta: f64) -> Result<BoundReport> {
    if traj.scheme.is_constrained() {
        verify_cdcrc(traj)
    } else {
        verify_dcrc(traj, theta)
    }
}

/// Regret of the weighted local FPR against the best sensor in hindsight.
#[derive(Debug, Clone, PartialEq)]
pub struct RegretSummary {
    pub best_value: f64,
    pub best_sensor: usize,
    /// Cumulative regret after each step.
    pub regret: Vec<f64>,
    /// Whether the average regret at `T` is no larger than at `ceil(T / 2)`.
    pub average_decreasing: bool,
}

pub fn regret_summary(traj: &Trajectory) -> Result<RegretSummary> {
    traj.check()?;
    let stats = LocalFprStats::from_records(&traj.records);
    let best = stats.best_sensor;
    let mut acc = 0.0;
    let regret: Vec<f64> = traj
        .records
        .iter()
        .map(|r| {
            let mixed: f64 = r.weights.iter().zip(&r.local_fpr).map(|(b, p)| b * p).sum();
            acc += mixed - r.local_fpr[best];
            acc
        })
        .collect();
    let t = regret.len();
    let half = t.div_ceil(2);
    let average_decreasing =
        regret[t - 1] / t as f64 <= regret[half - 1] / half as f64 + BOUND_TOLERANCE;
    Ok(RegretSummary {
        best_value: stats.best_value(),
        best_sensor: best,
        regret,
        average_decreasing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn record(t: usize, local_fpr: Vec<f64>, weights: Vec<f64>) -> StepRecord {
        let k = local_fpr.len();
        StepRecord {
            t,
            fnr: 0.1,
            fnr_feedback: 0.1,
            fpr: 0.2,
            local_fpr,
            cost: vec![0.0; k],
            capacity: vec![0.0; k],
            lambda: vec![0.0; k],
            theta: 0.5,
            theta_corrected: 0.5,
            weights,
            eta: 1.0,
        }
    }

    fn dcrc_traj(records: Vec<StepRecord>) -> Trajectory {
        Trajectory {
            scheme: Scheme::Dcrc,
            alpha: 0.15,
            capacity: 1.0,
            local_step: 0.2,
            mu: 0.2,
            delta: 0.18,
            records,
        }
    }

    #[test]
    fn closed_form_bounds() {
        assert_relative_eq!(dcrc_fnr_bound(0.0, 0.2, 913, 0.15), 0.15 + 0.17 / 182.6, epsilon = 1e-15);
        assert_relative_eq!(dcrc_fnr_bound(0.0, 0.2, 913, 0.15), 0.150_930_996_714_129_2, epsilon = 1e-12);
        assert_relative_eq!(cdcrc_fnr_bound(0.18, 0.2, 913, 0.15), 0.150_985_761_226_725_1, epsilon = 1e-12);
        assert_relative_eq!(cdcrc_load_bound(&[0.0; 4], 0.2, 913, 1.0), 1.008_762_322_015_334, epsilon = 1e-12);
        assert_eq!(cdcrc_load_bound(&[-0.4; 4], 0.2, 913, 1.0), 1.0);
        assert_relative_eq!(cdcrc_fnr_bound(0.18, 0.2, 1 << 40, 0.15), 0.15, epsilon = 1e-9);
    }

    #[test]
    fn identical_sensors_have_no_regret_term() {
        let recs: Vec<_> = (1..=5)
            .map(|t| record(t, vec![0.3, 0.3], vec![0.5, 0.5]))
            .collect();
        let stats = LocalFprStats::from_records(&recs);
        assert_eq!(epsilon(&stats, 0.5).value, 0.0);
        assert_eq!(sigma(&stats, 0.18, 0.2, 0.15).value, 0.0);
        let entries = dcrc_bounds(&dcrc_traj(recs), 0.2, 0.5, 0.15).unwrap();
        assert_relative_eq!(entries[1].rhs, 0.3 / 0.5);
    }

    #[test]
    fn single_step_trajectory() {
        let traj = dcrc_traj(vec![record(1, vec![0.1, 0.4], vec![0.5, 0.5])]);
        let entries = dcrc_bounds(&traj, 0.2, 0.5, 0.15).unwrap();
        assert!(entries.iter().all(|e| e.lhs.is_finite() && e.rhs.is_finite()));
        assert!(regret_summary(&traj).is_ok());
    }

    #[test]
    fn empty_trajectory_is_rejected() {
        assert!(matches!(
            dcrc_bounds(&dcrc_traj(vec![]), 0.2, 0.5, 0.15),
            Err(Error::Empty(_))
        ));
    }

    /// Direct re-evaluation of the CD-CRC regret term on a hand-written
    /// 3-step, 2-sensor fixture, spelled out term by term.
    #[test]
    fn sigma_fixture() {
        let recs = vec![
            record(1, vec![0.2, 0.6], vec![0.5, 0.5]),
            record(2, vec![0.5, 0.1], vec![0.5, 0.5]),
            record(3, vec![0.3, 0.3], vec![0.5, 0.5]),
        ];
        let (delta, mu, alpha) = (0.18, 0.2, 0.15);
        let lo = 0.01;
        let hi = 1.21;
        // P1 = 1.0, P2 = 1.0 -> best total 1.0; sum max 1.4; sum min 0.6
        // ranges 0.4, 0.4, 0.0 -> max 0.4, sum 0.8
        let ln2 = 2f64.ln();
        let f1 = (hi / lo * ln2 * 0.4 / 0.8).sqrt();
        let f2 = (1.4 / lo - 1.0 / hi).sqrt();
        let f3 = (1.0 / lo - 0.6 / hi).sqrt();
        let expected = 2.0 / 3.0 * f1 * f2 * f3 + 1.0 / (3.0 * lo) * (16.0 / 3.0 * ln2 + 2.0) * 0.4;
        let stats = LocalFprStats::from_records(&recs);
        assert_relative_eq!(sigma(&stats, delta, mu, alpha).value, expected, max_relative = 1e-12);

        let f1 = (ln2 * 0.4 / 0.8).sqrt();
        let f2 = (1.4f64 - 1.0).sqrt();
        let f3 = (1.0f64 - 0.6).sqrt();
        let eps = (2.0 / 3.0 * f1 * f2 * f3 + (16.0 / 3.0 * ln2 + 2.0) * 0.4 / 3.0) / 0.5;
        assert_relative_eq!(epsilon(&stats, 0.5).value, eps, epsilon = 1e-12);
    }

    #[test]
    fn step_fpr_examples() {
        let mut r = record(1, vec![0.4, 0.2], vec![0.5, 0.5]);
        r.fpr = 0.0;
        r.theta_corrected = 0.3;
        let e = step_fpr_check(&r, 0.18);
        assert!(e.satisfied);
        assert_relative_eq!(e.slack(), e.rhs);
    }

    #[test]
    fn regret_examples() {
        let single = dcrc_traj((1..=4).map(|t| record(t, vec![0.3], vec![1.0])).collect());
        let s = regret_summary(&single).unwrap();
        assert!(s.regret.iter().all(|&r| r == 0.0));

        let one_hot = dcrc_traj(
            (1..=4)
                .map(|t| record(t, vec![0.2, 0.4], vec![1.0, 0.0]))
                .collect(),
        );
        let s = regret_summary(&one_hot).unwrap();
        assert!(s.regret.iter().all(|&r| r == 0.0));
        assert_relative_eq!(s.best_value, 0.2);
        assert_eq!(s.best_sensor, 0);

        let uniform = dcrc_traj(
            (1..=4)
                .map(|t| record(t, vec![0.2, 0.4], vec![0.5, 0.5]))
                .collect(),
        );
        let s = regret_summary(&uniform).unwrap();
        assert_relative_eq!(s.regret[3], 0.4, epsilon = 1e-12);
    }

    #[test]
    fn scheme_family_is_enforced() {
        let traj = dcrc_traj(vec![record(1, vec![0.1, 0.4], vec![0.5, 0.5])]);
        assert!(matches!(verify_cdcrc(&traj), Err(Error::SchemeMismatch { .. })));
        let mut c = traj.clone();
        c.scheme = Scheme::UniformCdcrc;
        assert!(matches!(verify_dcrc(&c, 0.5), Err(Error::SchemeMismatch { .. })));
    }

    #[test]
    fn prefix_violation_names_step() {
        let mut recs: Vec<_> = (1..=10)
            .map(|t| record(t, vec![0.1, 0.4], vec![0.5, 0.5]))
            .collect();
        for r in &mut recs {
            r.fnr = 0.0;
        }
        recs[5].fnr = 1.0;
        recs[6].fnr = 1.0;
        let mut traj = dcrc_traj(recs);
        traj.scheme = Scheme::Cdcrc;
        for r in &mut traj.records {
            r.theta_corrected = 0.18;
        }
        let report = verify_cdcrc(&traj).unwrap();
        let e = report.get("cdcrc_fnr").unwrap();
        assert!(!e.satisfied);
        assert_eq!(e.step, Some(7));
    }
}
