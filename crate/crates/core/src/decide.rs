//! Act/wait decisions for a geofence under location uncertainty.
//!
//! The probability of being inside an axis-aligned square under an
//! axis-independent Gaussian factors into a product of two normal-CDF
//! differences. Acting is preferred when its expected payoff strictly exceeds
//! waiting, which reduces to a fixed probability threshold that depends only
//! on the payoff matrix. The forward scan for the act time stops at the
//! Poisson cutoff, beyond which a new measurement has most likely arrived.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use thiserror::Error;

use crate::predict::{predict, FittedPredictor, GaussianLocation};
use crate::trajdata::PoissonRate;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DecideError {
    #[error("invalid payoff matrix: delta + alpha - beta = {0} must be negative")]
    InvalidPayoff(f64),
    #[error("invalid cutoff policy: {0}")]
    InvalidPolicy(String),
    #[error("invalid geofence half-width {0}")]
    InvalidFence(f64),
}

pub type Result<T, E = DecideError> = std::result::Result<T, E>;

/// Axis-aligned square geofence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Geofence {
    pub center: [f64; 2],
    pub half_width: f64,
}

impl Geofence {
    pub fn new(center: [f64; 2], half_width: f64) -> Result<Self> {
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(DecideError::InvalidFence(half_width));
        }
        Ok(Self { center, half_width })
    }

    /// Square of side `side` centered at `center`.
    pub fn square(center: [f64; 2], side: f64) -> Result<Self> {
        Self::new(center, side / 2.0)
    }

    pub fn lo(&self) -> [f64; 2] {
        [self.center[0] - self.half_width, self.center[1] - self.half_width]
    }

    pub fn hi(&self) -> [f64; 2] {
        [self.center[0] + self.half_width, self.center[1] + self.half_width]
    }

    /// Half-open containment `[lo, hi)` per axis.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let (lo, hi) = (self.lo(), self.hi());
        x >= lo[0] && x < hi[0] && y >= lo[1] && y < hi[1]
    }
}

/// Payoffs for act/wait against in/out. Waiting while outside is worth 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PayoffMatrix {
    /// Wait while inside.
    pub alpha: f64,
    /// Act while inside.
    pub beta: f64,
    /// Act while outside.
    pub delta: f64,
}

impl PayoffMatrix {
    pub const ADVERTISING: PayoffMatrix = PayoffMatrix { alpha: -0.5, beta: 1.0, delta: -0.25 };
    pub const ALERT_ZONE: PayoffMatrix = PayoffMatrix { alpha: -2.0, beta: 1.0, delta: -0.25 };

    pub fn new(alpha: f64, beta: f64, delta: f64) -> Result<Self> {
        let p = Self { alpha, beta, delta };
        p.validate()?;
        Ok(p)
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "advertising" => Some(Self::ADVERTISING),
            "alert-zone" => Some(Self::ALERT_ZONE),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let denom = self.delta + self.alpha - self.beta;
        if !(denom < 0.0) {
            return Err(DecideError::InvalidPayoff(denom));
        }
        Ok(())
    }

    /// Sign conventions a payoff matrix usually follows (`beta > 0`,
    /// `alpha <= 0`, `delta <= 0`). Violations are allowed but reported.
    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        if !(self.beta > 0.0) {
            w.push(format!("beta = {} is not positive", self.beta));
        }
        if self.alpha > 0.0 {
            w.push(format!("alpha = {} is positive", self.alpha));
        }
        if self.delta > 0.0 {
            w.push(format!("delta = {} is positive", self.delta));
        }
        w
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { alpha: self.alpha * c, beta: self.beta * c, delta: self.delta * c }
    }
}

/// Poisson cutoff settings for the forward scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutoffPolicy {
    pub epsilon: f64,
    pub rate: PoissonRate,
    /// Forward-scan resolution, seconds.
    pub scan_step: f64,
}

impl CutoffPolicy {
    pub fn new(epsilon: f64, rate: PoissonRate, scan_step: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(DecideError::InvalidPolicy(format!("epsilon {epsilon} outside (0, 1)")));
        }
        if !(scan_step > 0.0 && scan_step.is_finite()) {
            return Err(DecideError::InvalidPolicy(format!("scan_step {scan_step} must be positive")));
        }
        Ok(Self { epsilon, rate, scan_step })
    }
}

/// Act time for one measurement/fence pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecisionOutcome {
    /// Seconds after the anchor, `None` when no act is scheduled.
    pub t_hat: Option<f64>,
    pub t_star: f64,
    /// Inside-probability at `t_hat`, or the largest probability seen.
    pub p_at_act: f64,
    pub scanned_steps: usize,
}

/// Standard normal CDF.
#[inline]
pub fn norm_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// `P(a < Z < b)` for standard normal `Z`, evaluated on the tail nearer to
/// the interval to avoid cancellation.
#[inline]
pub fn norm_interval(a: f64, b: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    if a >= 0.0 {
        norm_cdf(-a) - norm_cdf(-b)
    } else if b <= 0.0 {
        norm_cdf(b) - norm_cdf(a)
    } else {
        1.0 - norm_cdf(a) - norm_cdf(-b)
    }
}

/// Probability mass of `loc` inside `fence`.
pub fn prob_inside(loc: &GaussianLocation, fence: &Geofence) -> f64 {
    let (lo, hi) = (fence.lo(), fence.hi());
    let mut p = 1.0;
    for k in 0..2 {
        let s = loc.std[k];
        p *= norm_interval((lo[k] - loc.mean[k]) / s, (hi[k] - loc.mean[k]) / s);
    }
    p.clamp(0.0, 1.0)
}

/// Expected payoffs `(wait, act)` for inside-probability `p`.
pub fn expected_values(p: f64, payoff: &PayoffMatrix) -> (f64, f64) {
    (payoff.alpha * p, payoff.beta * p + payoff.delta * (1.0 - p))
}

/// Probability above which acting beats waiting.
pub fn act_threshold(payoff: &PayoffMatrix) -> Result<f64> {
    payoff.validate()?;
    Ok(payoff.delta / (payoff.delta + payoff.alpha - payoff.beta))
}

/// Time after which a new measurement has arrived with probability
/// `1 - epsilon`, in seconds.
pub fn poisson_cutoff(policy: &CutoffPolicy) -> f64 {
    -policy.epsilon.ln() / policy.rate.lambda * policy.rate.delta_t
}

/// Probability of at least one measurement within `t` seconds.
pub fn prob_measurement_by(policy: &CutoffPolicy, t: f64) -> f64 {
    -(-policy.rate.per_second() * t).exp_m1()
}

/// Scan offsets `0, step, 2 step, ...` up to and including `t_star`.
pub fn scan_offsets(t_star: f64, step: f64) -> impl Iterator<Item = f64> {
    let n = (t_star / step + 1e-9).floor() as usize;
    (0..=n).map(move |i| i as f64 * step)
}

/// Earliest scan offset whose inside-probability strictly exceeds the act
/// threshold, or `None` if the cutoff is reached first.
pub fn find_act_time(
    pred: &FittedPredictor,
    fence: &Geofence,
    payoff: &PayoffMatrix,
    policy: &CutoffPolicy,
) -> Result<DecisionOutcome> {
    let threshold = act_threshold(payoff)?;
    let t_star = poisson_cutoff(policy);
    let mut scanned = 0;
    let mut best = 0.0f64;
    for dt in scan_offsets(t_star, policy.scan_step) {
        scanned += 1;
        let p = prob_inside(&predict(pred, dt), fence);
        if p > threshold {
            return Ok(DecisionOutcome { t_hat: Some(dt), t_star, p_at_act: p, scanned_steps: scanned });
        }
        best = best.max(p);
    }
    Ok(DecisionOutcome { t_hat: None, t_star, p_at_act: best, scanned_steps: scanned })
}
