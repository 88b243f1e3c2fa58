//! Realized-value evaluation.
//!
//! Every sparse test measurement except the last produces an act time for
//! each geofence. The act time is scored against the first entry/exit of the
//! dense (ground-truth) test trajectory, with at most one `beta` per
//! fence/trajectory pair. Scores are summed over a grid of fences around the
//! last training point and averaged over trajectories.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::decide::{
    act_threshold, find_act_time, norm_cdf, norm_interval, poisson_cutoff, scan_offsets, CutoffPolicy, DecideError,
    Geofence, PayoffMatrix,
};
use crate::predict::{fit, predict, FittedPredictor, Method, PredictError, PredictorConfig};
use crate::trajdata::{
    bernoulli_subsample_with, dominant_gap, PoissonRate, SplitTrajectory, TrackPoint, TrajError, Trajectory,
};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Traj(#[from] TrajError),
    #[error(transparent)]
    Predict(#[from] PredictError),
    #[error(transparent)]
    Decide(#[from] DecideError),
    #[error("{0}")]
    Invalid(String),
}

pub type Result<T, E = EvalError> = std::result::Result<T, E>;

/// Default grid expansion: 30 m/s for 600 s.
pub const DEFAULT_MARGIN: f64 = 18_000.0;

/// First entry into and first exit out of a fence along the dense path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FenceCrossing {
    pub t_in: Option<f64>,
    pub t_out: Option<f64>,
}

impl FenceCrossing {
    pub const NONE: FenceCrossing = FenceCrossing { t_in: None, t_out: None };
}

/// Liang-Barsky clip of segment `a -> b` against the closed box, returned as
/// the parameter interval inside `[0, 1]`.
fn clip_segment(a: [f64; 2], b: [f64; 2], lo: [f64; 2], hi: [f64; 2]) -> Option<(f64, f64)> {
    let (mut u0, mut u1) = (0.0f64, 1.0f64);
    for k in 0..2 {
        let d = b[k] - a[k];
        if d == 0.0 {
            if a[k] < lo[k] || a[k] >= hi[k] {
                return None;
            }
            continue;
        }
        let (mut e, mut x) = ((lo[k] - a[k]) / d, (hi[k] - a[k]) / d);
        if e > x {
            std::mem::swap(&mut e, &mut x);
        }
        u0 = u0.max(e);
        u1 = u1.min(x);
        if u0 > u1 {
            return None;
        }
    }
    Some((u0, u1))
}

/// Interpolates first entry and first subsequent exit assuming constant,
/// straight-line motion between samples. Containment is half-open per axis,
/// so a path that only grazes an upper edge or corner does not enter.
pub fn fence_crossing(dense: &Trajectory, fence: &Geofence) -> FenceCrossing {
    let pts = dense.points();
    let (lo, hi) = (fence.lo(), fence.hi());
    let lerp =
        |a: &TrackPoint, b: &TrackPoint, u: f64| (a.t + u * (b.t - a.t), a.x + u * (b.x - a.x), a.y + u * (b.y - a.y));
    let mut t_in = None;
    if fence.contains(pts[0].x, pts[0].y) {
        t_in = Some(pts[0].t);
    }
    for w in pts.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        let end_inside = fence.contains(b.x, b.y);
        match t_in {
            None => {
                let Some((u0, u1)) = clip_segment([a.x, a.y], [b.x, b.y], lo, hi) else { continue };
                let (t, x, y) = lerp(a, b, u0);
                if u1 > u0 || fence.contains(x, y) {
                    t_in = Some(t);
                    if !end_inside {
                        return FenceCrossing { t_in, t_out: Some(lerp(a, b, u1).0) };
                    }
                }
            }
            Some(_) => {
                if !end_inside {
                    let u1 = clip_segment([a.x, a.y], [b.x, b.y], lo, hi).map_or(0.0, |c| c.1);
                    return FenceCrossing { t_in, t_out: Some(lerp(a, b, u1).0) };
                }
            }
        }
    }
    FenceCrossing { t_in, t_out: None }
}

/// Which payoff a measurement earns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StepOutcome {
    /// Waited through the interval in which the user left the fence.
    Alpha,
    /// Acted while inside.
    Beta,
    /// Acted while outside.
    Delta,
    /// Waited while outside, or evaluation deferred to a later measurement.
    Zero,
}

impl StepOutcome {
    pub fn value(self, payoff: &PayoffMatrix) -> f64 {
        match self {
            StepOutcome::Alpha => payoff.alpha,
            StepOutcome::Beta => payoff.beta,
            StepOutcome::Delta => payoff.delta,
            StepOutcome::Zero => 0.0,
        }
    }

    pub fn is_act(self) -> bool {
        matches!(self, StepOutcome::Beta | StepOutcome::Delta)
    }
}

/// Classifies measurement `i` given its absolute act time
/// (`f64::INFINITY` for "never") and the next measurement time.
pub fn classify_step(t_hat_abs: f64, crossing: &FenceCrossing, t_i: f64, t_next: f64) -> StepOutcome {
    if t_hat_abs <= t_next {
        let inside = match (crossing.t_in, crossing.t_out) {
            (Some(tin), Some(tout)) => t_hat_abs >= tin && t_hat_abs <= tout,
            (Some(tin), None) => t_hat_abs >= tin,
            (None, _) => false,
        };
        if inside {
            StepOutcome::Beta
        } else {
            StepOutcome::Delta
        }
    } else {
        match crossing.t_out {
            Some(tout) if t_i <= tout && tout <= t_next => StepOutcome::Alpha,
            _ => StepOutcome::Zero,
        }
    }
}

/// Payoff earned by measurement `i` given its absolute act time
/// (`f64::INFINITY` for "never").
pub fn realized_value_step(
    t_hat_abs: f64,
    crossing: &FenceCrossing,
    t_i: f64,
    t_next: f64,
    payoff: &PayoffMatrix,
) -> f64 {
    classify_step(t_hat_abs, crossing, t_i, t_next).value(payoff)
}

/// Per-measurement realized values for one fence and trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealizedScore {
    pub per_measurement: Vec<f64>,
    pub v_fence_traj: f64,
    pub latched_at: Option<usize>,
    /// Measurements whose act fired before the next measurement, up to and
    /// including the latch.
    pub acts: usize,
}

/// Applies the realized-value rule with the beta latch. `times` are the
/// sparse test measurement times; `t_hats` holds one relative act time per
/// evaluated measurement (all but the last).
pub fn score_decisions(
    times: &[f64],
    t_hats: &[Option<f64>],
    crossing: &FenceCrossing,
    payoff: &PayoffMatrix,
) -> RealizedScore {
    let n_eval = times.len().saturating_sub(1);
    debug_assert_eq!(t_hats.len(), n_eval);
    let mut per_measurement = vec![0.0; n_eval];
    let mut latched_at = None;
    let mut acts = 0;
    for i in 0..n_eval {
        let t_abs = t_hats[i].map_or(f64::INFINITY, |d| times[i] + d);
        let outcome = classify_step(t_abs, crossing, times[i], times[i + 1]);
        if outcome.is_act() {
            acts += 1;
        }
        per_measurement[i] = outcome.value(payoff);
        if outcome == StepOutcome::Beta {
            latched_at = Some(i);
            break;
        }
    }
    let v_fence_traj = per_measurement.iter().sum();
    RealizedScore { per_measurement, v_fence_traj, latched_at, acts }
}

/// Everything the scorer needs besides the data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalSettings {
    pub predictor: PredictorConfig,
    pub payoff: PayoffMatrix,
    pub epsilon: f64,
    pub rate: PoissonRate,
    pub scan_step: f64,
    pub cell_size: f64,
    pub margin: f64,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self {
            predictor: PredictorConfig::default(),
            payoff: PayoffMatrix::ADVERTISING,
            epsilon: 0.2,
            rate: PoissonRate { lambda: 0.5, delta_t: 60.0 },
            scan_step: 1.0,
            cell_size: 1000.0,
            margin: DEFAULT_MARGIN,
        }
    }
}

impl EvalSettings {
    pub fn policy(&self) -> Result<CutoffPolicy> {
        Ok(CutoffPolicy::new(self.epsilon, self.rate, self.scan_step)?)
    }
}

/// Predictors fitted at every evaluated sparse test measurement.
#[derive(Debug, Clone)]
pub struct MeasurementPlan {
    pub times: Vec<f64>,
    pub predictors: Vec<FittedPredictor>,
}

/// Fits `method` at each sparse test measurement except the last, using the
/// sparse training points and the sparse test prefix inside the look-back
/// window.
pub fn plan_predictions(sparse: &SplitTrajectory, method: Method, cfg: &PredictorConfig) -> Result<MeasurementPlan> {
    let test = sparse.test.points();
    if test.len() < 2 {
        return Err(EvalError::Invalid("sparse test part needs at least 2 points".into()));
    }
    let history: Vec<TrackPoint> = sparse.train.points().iter().chain(test).copied().collect();
    let n_train = sparse.train.len();
    let predictors = (0..test.len() - 1)
        .map(|i| fit(&history[..n_train + i + 1], test[i].t, cfg, method))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(MeasurementPlan { times: test.iter().map(|p| p.t).collect(), predictors })
}

/// Scores one fence on one trajectory by running the full forward scan for
/// every measurement.
pub fn score_fence_trajectory(
    dense: &SplitTrajectory,
    sparse: &SplitTrajectory,
    fence: &Geofence,
    method: Method,
    settings: &EvalSettings,
) -> Result<RealizedScore> {
    let plan = plan_predictions(sparse, method, &settings.predictor)?;
    score_fence_with_plan(&plan, &dense.test, fence, &settings.payoff, &settings.policy()?)
}

pub fn score_fence_with_plan(
    plan: &MeasurementPlan,
    dense_test: &Trajectory,
    fence: &Geofence,
    payoff: &PayoffMatrix,
    policy: &CutoffPolicy,
) -> Result<RealizedScore> {
    let crossing = fence_crossing(dense_test, fence);
    let t_hats = plan
        .predictors
        .iter()
        .map(|p| find_act_time(p, fence, payoff, policy).map(|o| o.t_hat))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(score_decisions(&plan.times, &t_hats, &crossing, payoff))
}

/// Square cells of side `cell_size` indexed so that cell `(0, 0)` is
/// centered on the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FenceGrid {
    pub cell_size: f64,
    pub margin: f64,
    /// Inclusive cell index ranges.
    pub ix: (i64, i64),
    pub iy: (i64, i64),
}

impl FenceGrid {
    pub fn index_of(&self, v: f64) -> i64 {
        (v / self.cell_size + 0.5).floor() as i64
    }

    pub fn cell(&self, ix: i64, iy: i64) -> Geofence {
        Geofence { center: [ix as f64 * self.cell_size, iy as f64 * self.cell_size], half_width: self.cell_size / 2.0 }
    }

    pub fn n_cols(&self) -> usize {
        (self.ix.1 - self.ix.0 + 1) as usize
    }

    pub fn n_rows(&self) -> usize {
        (self.iy.1 - self.iy.0 + 1) as usize
    }

    pub fn len(&self) -> usize {
        self.n_cols() * self.n_rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Row-major iteration over `(ix, iy, fence)`.
    pub fn cells(&self) -> impl Iterator<Item = (i64, i64, Geofence)> + '_ {
        (self.iy.0..=self.iy.1).flat_map(move |iy| (self.ix.0..=self.ix.1).map(move |ix| (ix, iy, self.cell(ix, iy))))
    }
}

/// Grid covering the test bounding box expanded by `margin` on every side.
pub fn build_grid(split: &SplitTrajectory, cell_size: f64, margin: f64) -> Result<FenceGrid> {
    if !(cell_size > 0.0) || !(margin >= 0.0) {
        return Err(EvalError::Invalid(format!("bad grid cell_size {cell_size} / margin {margin}")));
    }
    let pts = split.test.points();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for p in pts {
        x0 = x0.min(p.x);
        x1 = x1.max(p.x);
        y0 = y0.min(p.y);
        y1 = y1.max(p.y);
    }
    Ok(grid_for_box([x0 - margin, y0 - margin], [x1 + margin, y1 + margin], cell_size, margin))
}

pub fn grid_for_box(lo: [f64; 2], hi: [f64; 2], cell_size: f64, margin: f64) -> FenceGrid {
    let idx = |v: f64| (v / cell_size + 0.5).floor() as i64;
    FenceGrid { cell_size, margin, ix: (idx(lo[0]), idx(hi[0])), iy: (idx(lo[1]), idx(hi[1])) }
}

/// Aggregate score of one trajectory over a whole grid.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TrajectoryScore {
    /// Sum of realized values over all fences.
    pub v_s: f64,
    pub acts: usize,
    pub std_sum: f64,
    pub n_predictions: usize,
    pub fences_touched: usize,
}

// Tail mass beyond this many standard deviations is below 1e-15, so cells
// outside the band cannot beat any threshold above `PRUNE_MIN_THRESHOLD`.
const PRUNE_SIGMAS: f64 = 8.0;
const PRUNE_MIN_THRESHOLD: f64 = 1e-14;

/// Per-axis cell probabilities within the prunable band.
fn axis_masses(grid: &FenceGrid, range: (i64, i64), mean: f64, std: f64, prune: bool) -> (i64, Vec<f64>) {
    let (mut a, mut b) = range;
    if prune {
        a = a.max(grid.index_of(mean - PRUNE_SIGMAS * std));
        b = b.min(grid.index_of(mean + PRUNE_SIGMAS * std));
    }
    if a > b {
        return (a, Vec::new());
    }
    let h = grid.cell_size / 2.0;
    let masses = (a..=b)
        .map(|i| {
            let c = i as f64 * grid.cell_size;
            norm_interval((c - h - mean) / std, (c + h - mean) / std)
        })
        .collect();
    (a, masses)
}

/// Scores a trajectory against every cell of `grid`.
///
/// Produces the same per-fence values as calling [`score_fence_with_plan`]
/// on each cell: the inside-probability factors per axis, so only cells
/// whose two axis masses both exceed the threshold can act, and fences that
/// neither act nor are crossed score zero.
pub fn score_grid_with_plan(
    plan: &MeasurementPlan,
    dense_test: &Trajectory,
    grid: &FenceGrid,
    payoff: &PayoffMatrix,
    policy: &CutoffPolicy,
) -> Result<TrajectoryScore> {
    let threshold = act_threshold(payoff)?;
    let t_star = poisson_cutoff(policy);
    let prune = threshold > PRUNE_MIN_THRESHOLD;
    debug_assert!(norm_cdf(-PRUNE_SIGMAS) < PRUNE_MIN_THRESHOLD);
    let n_eval = plan.predictors.len();

    let mut acted: BTreeMap<(i64, i64), Vec<Option<f64>>> = BTreeMap::new();
    let mut std_sum = 0.0;
    let mut n_predictions = 0usize;
    for (i, pred) in plan.predictors.iter().enumerate() {
        for dt in scan_offsets(t_star, policy.scan_step) {
            let loc = predict(pred, dt);
            std_sum += loc.mean_std();
            n_predictions += 1;
            let (x0, mx) = axis_masses(grid, grid.ix, loc.mean[0], loc.std[0], prune);
            if mx.iter().all(|m| *m <= threshold) && prune {
                continue;
            }
            let (y0, my) = axis_masses(grid, grid.iy, loc.mean[1], loc.std[1], prune);
            for (jx, px) in mx.iter().enumerate() {
                if prune && *px <= threshold {
                    continue;
                }
                for (jy, py) in my.iter().enumerate() {
                    // Same operand order as `prob_inside`.
                    let p = (1.0 * px * py).clamp(0.0, 1.0);
                    if p > threshold {
                        let key = (x0 + jx as i64, y0 + jy as i64);
                        let slot = acted.entry(key).or_insert_with(|| vec![None; n_eval]);
                        if slot[i].is_none() {
                            slot[i] = Some(dt);
                        }
                    }
                }
            }
        }
    }

    let mut touched: BTreeSet<(i64, i64)> = acted.keys().copied().collect();
    for w in dense_test.points().windows(2) {
        let (a, b) = (w[0], w[1]);
        let (ix0, ix1) = (grid.index_of(a.x.min(b.x)), grid.index_of(a.x.max(b.x)));
        let (iy0, iy1) = (grid.index_of(a.y.min(b.y)), grid.index_of(a.y.max(b.y)));
        for ix in ix0.max(grid.ix.0)..=ix1.min(grid.ix.1) {
            for iy in iy0.max(grid.iy.0)..=iy1.min(grid.iy.1) {
                touched.insert((ix, iy));
            }
        }
    }
    if let Some(p) = dense_test.points().first() {
        let (ix, iy) = (grid.index_of(p.x), grid.index_of(p.y));
        if (grid.ix.0..=grid.ix.1).contains(&ix) && (grid.iy.0..=grid.iy.1).contains(&iy) {
            touched.insert((ix, iy));
        }
    }

    let never = vec![None; n_eval];
    let mut v_s = 0.0;
    let mut acts = 0;
    for key in &touched {
        let fence = grid.cell(key.0, key.1);
        let crossing = fence_crossing(dense_test, &fence);
        let t_hats = acted.get(key).unwrap_or(&never);
        let score = score_decisions(&plan.times, t_hats, &crossing, payoff);
        v_s += score.v_fence_traj;
        acts += score.acts;
    }
    Ok(TrajectoryScore { v_s, acts, std_sum, n_predictions, fences_touched: touched.len() })
}

/// Reference implementation of [`score_grid_with_plan`] that scans every
/// cell independently.
pub fn score_grid_naive(
    plan: &MeasurementPlan,
    dense_test: &Trajectory,
    grid: &FenceGrid,
    payoff: &PayoffMatrix,
    policy: &CutoffPolicy,
) -> Result<TrajectoryScore> {
    let mut out = TrajectoryScore::default();
    for (_, _, fence) in grid.cells() {
        let s = score_fence_with_plan(plan, dense_test, &fence, payoff, policy)?;
        out.v_s += s.v_fence_traj;
        out.acts += s.acts;
    }
    Ok(out)
}

/// A dense split trajectory with a stable identifier used for seeding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusEntry {
    pub id: String,
    pub split: SplitTrajectory,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Per-trajectory subsampling seed, stable across platforms and runs.
pub fn derive_seed(master_seed: u64, trajectory_id: &str) -> u64 {
    // FNV-1a over the id, then mixed with the master seed.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in trajectory_id.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    splitmix64(splitmix64(master_seed) ^ h)
}

/// Subsamples train and test parts separately from one seeded stream.
pub fn subsample_split(split: &SplitTrajectory, rate: PoissonRate, seed: u64) -> Result<SplitTrajectory> {
    let tau = match split.test.gap() {
        Some(g) => g,
        None => dominant_gap(&split.test)?,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let train = bernoulli_subsample_with(&split.train, rate, tau, &mut rng)?;
    let test = bernoulli_subsample_with(&split.test, rate, tau, &mut rng)?;
    Ok(SplitTrajectory { train, test })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SweepParam {
    Lambda,
    Epsilon,
    CellSize,
    Lookback,
    SigmaM,
}

impl SweepParam {
    pub const ALL: [SweepParam; 5] =
        [SweepParam::Lambda, SweepParam::Epsilon, SweepParam::CellSize, SweepParam::Lookback, SweepParam::SigmaM];

    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Lambda => "lambda",
            SweepParam::Epsilon => "epsilon",
            SweepParam::CellSize => "cell_size",
            SweepParam::Lookback => "lookback",
            SweepParam::SigmaM => "sigma_m",
        }
    }

    /// Values swept in the reference experiments.
    pub fn default_values(self) -> Vec<f64> {
        match self {
            SweepParam::Lambda => vec![0.25, 0.5, 1.0, 2.0, 4.0, 8.0],
            SweepParam::Epsilon => (1..=9).map(|i| i as f64 / 10.0).collect(),
            SweepParam::CellSize => vec![500.0, 1000.0, 1500.0, 2000.0, 2500.0],
            SweepParam::Lookback => vec![200.0, 300.0, 400.0, 500.0, 600.0],
            SweepParam::SigmaM => vec![3.0, 10.0, 50.0, 100.0, 500.0],
        }
    }

    pub fn apply(self, base: &EvalSettings, value: f64) -> EvalSettings {
        let mut s = *base;
        match self {
            SweepParam::Lambda => s.rate.lambda = value,
            SweepParam::Epsilon => s.epsilon = value,
            SweepParam::CellSize => s.cell_size = value,
            SweepParam::Lookback => s.predictor.lookback = value,
            SweepParam::SigmaM => s.predictor.sigma_m = value,
        }
        s
    }
}

impl std::str::FromStr for SweepParam {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        SweepParam::ALL.into_iter().find(|p| p.name() == s).ok_or_else(|| format!("unknown sweep parameter {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub param: SweepParam,
    pub values: Vec<f64>,
    pub base: EvalSettings,
    pub methods: Vec<Method>,
    pub master_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub param: String,
    pub value: f64,
    pub method: Method,
    /// Mean realized value per trajectory.
    pub v: f64,
    pub n_traj: usize,
    pub mean_acts: f64,
    pub mean_pred_std: f64,
}

pub const SWEEP_CSV_HEADER: &str = "param,value,method,V,n_traj,mean_acts,mean_pred_std";

pub fn sweep_csv(results: &[SweepResult]) -> String {
    let mut out = String::from(SWEEP_CSV_HEADER);
    out.push('\n');
    for r in results {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.param,
            r.value,
            r.method.name(),
            r.v,
            r.n_traj,
            r.mean_acts,
            r.mean_pred_std
        );
    }
    out
}

/// Settings that change the fitted predictors (and hence need a new plan).
fn plan_key(s: &EvalSettings, m: Method) -> (u64, u64, u64, Method) {
    (s.rate.lambda.to_bits(), s.predictor.sigma_m.to_bits(), s.predictor.lookback.to_bits(), m)
}

/// Scores of one trajectory at every (point, method), or `None` where the
/// rate cannot be simulated from its sampling gap.
fn sweep_trajectory(entry: &CorpusEntry, spec: &SweepSpec) -> Result<Vec<Vec<Option<TrajectoryScore>>>> {
    let seed = derive_seed(spec.master_seed, &entry.id);
    let mut plans: BTreeMap<(u64, u64, u64, Method), MeasurementPlan> = BTreeMap::new();
    let mut sparse_cache: BTreeMap<u64, Option<SplitTrajectory>> = BTreeMap::new();
    let mut grids: BTreeMap<u64, FenceGrid> = BTreeMap::new();
    let mut out = Vec::with_capacity(spec.values.len());
    for &value in &spec.values {
        let settings = spec.param.apply(&spec.base, value);
        let sparse = match sparse_cache.entry(settings.rate.lambda.to_bits()) {
            std::collections::btree_map::Entry::Occupied(e) => e.into_mut(),
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(match subsample_split(&entry.split, settings.rate, seed) {
                    Ok(s) => Some(s),
                    Err(EvalError::Traj(TrajError::RateTooHigh { .. })) => None,
                    Err(e) => return Err(e),
                })
            }
        };
        let Some(sparse) = sparse.as_ref() else {
            out.push(vec![None; spec.methods.len()]);
            continue;
        };
        let grid = *grids.entry(settings.cell_size.to_bits()).or_insert(build_grid(
            &entry.split,
            settings.cell_size,
            settings.margin,
        )?);
        let policy = settings.policy()?;
        let mut row = Vec::with_capacity(spec.methods.len());
        for &m in &spec.methods {
            let key = plan_key(&settings, m);
            if !plans.contains_key(&key) {
                plans.insert(key, plan_predictions(sparse, m, &settings.predictor)?);
            }
            let plan = &plans[&key];
            row.push(Some(score_grid_with_plan(plan, &entry.split.test, &grid, &settings.payoff, &policy)?));
        }
        out.push(row);
    }
    Ok(out)
}

/// Runs a one-parameter sweep over `corpus` with `workers` threads.
///
/// Trajectories are scored independently and reduced in corpus order, so the
/// output does not depend on the worker count.
pub fn run_sweep(corpus: &[CorpusEntry], spec: &SweepSpec, workers: usize) -> Result<Vec<SweepResult>> {
    if corpus.is_empty() {
        return Err(EvalError::Invalid("empty corpus".into()));
    }
    spec.base.payoff.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| EvalError::Invalid(e.to_string()))?;
    let per_traj: Vec<Vec<Vec<Option<TrajectoryScore>>>> =
        pool.install(|| corpus.par_iter().map(|e| sweep_trajectory(e, spec)).collect::<Result<Vec<_>>>())?;

    let mut results = Vec::new();
    for (vi, &value) in spec.values.iter().enumerate() {
        for (mi, &method) in spec.methods.iter().enumerate() {
            let (mut v, mut acts, mut std_sum, mut n_pred, mut n) = (0.0, 0usize, 0.0, 0usize, 0usize);
            for t in &per_traj {
                if let Some(s) = &t[vi][mi] {
                    v += s.v_s;
                    acts += s.acts;
                    std_sum += s.std_sum;
                    n_pred += s.n_predictions;
                    n += 1;
                }
            }
            let nf = n.max(1) as f64;
            results.push(SweepResult {
                param: spec.param.name().to_string(),
                value,
                method,
                v: v / nf,
                n_traj: n,
                mean_acts: acts as f64 / nf,
                mean_pred_std: if n_pred > 0 { std_sum / n_pred as f64 } else { 0.0 },
            });
        }
    }
    Ok(results)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predict::PredictorConfig;

    fn tr(v: &[(f64, f64, f64)]) -> Trajectory {
        Trajectory::from_points(v.iter().map(|&(t, x, y)| TrackPoint::new(t, x, y)).collect()).unwrap()
    }

    const PAY: PayoffMatrix = PayoffMatrix { alpha: -0.5, beta: 1.0, delta: -0.25 };

    #[test]
    fn crossing_through_center() {
        let fence = Geofence::new([0.0, 0.0], 5.0).unwrap();
        let c = fence_crossing(&tr(&[(0.0, -10.0, 0.0), (20.0, 10.0, 0.0)]), &fence);
        assert_eq!(c, FenceCrossing { t_in: Some(5.0), t_out: Some(15.0) });
    }

    #[test]
    fn crossing_outside_and_start_inside() {
        let fence = Geofence::new([0.0, 0.0], 5.0).unwrap();
        assert_eq!(fence_crossing(&tr(&[(0.0, 10.0, 10.0), (5.0, 20.0, 10.0)]), &fence), FenceCrossing::NONE);
        let c = fence_crossing(&tr(&[(7.0, 1.0, 1.0), (8.0, 2.0, 1.0), (9.0, 50.0, 1.0)]), &fence);
        assert_eq!(c.t_in, Some(7.0));
        assert!((c.t_out.unwrap() - (8.0 + 3.0 / 48.0)).abs() < 1e-12);
        let stays = fence_crossing(&tr(&[(0.0, -10.0, 0.0), (10.0, 0.0, 0.0)]), &fence);
        assert_eq!(stays, FenceCrossing { t_in: Some(5.0), t_out: None });
    }

    #[test]
    fn crossing_ignores_upper_edge_graze() {
        let fence = Geofence::new([0.0, 0.0], 5.0).unwrap();
        // runs along y = 5 (upper edge, excluded)
        let c = fence_crossing(&tr(&[(0.0, -10.0, 5.0), (20.0, 10.0, 5.0)]), &fence);
        assert_eq!(c, FenceCrossing::NONE);
        // runs along y = -5 (lower edge, included)
        let c = fence_crossing(&tr(&[(0.0, -10.0, -5.0), (20.0, 10.0, -5.0)]), &fence);
        assert_eq!(c, FenceCrossing { t_in: Some(5.0), t_out: Some(15.0) });
        // touches the upper-right corner only
        let c = fence_crossing(&tr(&[(0.0, 0.0, 10.0), (10.0, 10.0, 0.0)]), &fence);
        assert_eq!(c, FenceCrossing::NONE);
    }

    #[test]
    fn only_first_visit_counts() {
        let fence = Geofence::new([0.0, 0.0], 5.0).unwrap();
        let c = fence_crossing(&tr(&[(0.0, -10.0, 0.0), (20.0, 10.0, 0.0), (40.0, -10.0, 0.0)]), &fence);
        assert_eq!(c, FenceCrossing { t_in: Some(5.0), t_out: Some(15.0) });
    }

    #[test]
    fn realized_value_examples() {
        let c = FenceCrossing { t_in: Some(10.0), t_out: Some(30.0) };
        assert_eq!(realized_value_step(20.0, &c, 0.0, 60.0, &PAY), 1.0);
        assert_eq!(realized_value_step(f64::INFINITY, &c, 0.0, 60.0, &PAY), -0.5);
        assert_eq!(realized_value_step(5.0, &c, 0.0, 60.0, &PAY), -0.25);
        let later = FenceCrossing { t_in: Some(70.0), t_out: Some(90.0) };
        assert_eq!(realized_value_step(f64::INFINITY, &later, 0.0, 60.0, &PAY), 0.0);
        // act after the next measurement is a wait
        assert_eq!(realized_value_step(61.0, &c, 0.0, 60.0, &PAY), -0.5);
        // no crossing
        assert_eq!(realized_value_step(3.0, &FenceCrossing::NONE, 0.0, 60.0, &PAY), -0.25);
        assert_eq!(realized_value_step(f64::INFINITY, &FenceCrossing::NONE, 0.0, 60.0, &PAY), 0.0);
        // entered, never exits
        let open = FenceCrossing { t_in: Some(10.0), t_out: None };
        assert_eq!(realized_value_step(50.0, &open, 0.0, 60.0, &PAY), 1.0);
        assert_eq!(realized_value_step(f64::INFINITY, &open, 0.0, 60.0, &PAY), 0.0);
        // closed interval endpoints
        assert_eq!(realized_value_step(30.0, &c, 0.0, 60.0, &PAY), 1.0);
        assert_eq!(realized_value_step(10.0, &c, 0.0, 60.0, &PAY), 1.0);
    }

    #[test]
    fn latch_zeroes_after_beta() {
        let c = FenceCrossing { t_in: Some(10.0), t_out: Some(100.0) };
        let s = score_decisions(&[0.0, 20.0, 40.0, 60.0], &[Some(0.0), Some(0.0), Some(0.0)], &c, &PAY);
        assert_eq!(s.per_measurement, vec![-0.25, 1.0, 0.0]);
        assert_eq!(s.latched_at, Some(1));
        assert_eq!(s.v_fence_traj, 0.75);
        assert_eq!(s.acts, 2);
    }

    fn line_split(vx: f64, n_test: usize) -> SplitTrajectory {
        let pts: Vec<TrackPoint> =
            (0..=60 + n_test).map(|i| TrackPoint::new(i as f64 * 5.0, (i as f64 - 60.0) * 5.0 * vx, 0.0)).collect();
        crate::trajdata::train_test_split(&Trajectory::from_points(pts).unwrap(), 300.0).unwrap()
    }

    fn sparse_from(dense: &SplitTrajectory, train_idx: &[usize], test_idx: &[usize]) -> SplitTrajectory {
        let pick = |t: &Trajectory, idx: &[usize]| {
            Trajectory::from_points(idx.iter().map(|&i| t.points()[i]).collect()).unwrap()
        };
        SplitTrajectory { train: pick(&dense.train, train_idx), test: pick(&dense.test, test_idx) }
    }

    #[test]
    fn passive_wait_misses_small_fence_between_samples() {
        // 10 m/s east; test points at x = 50, 100, ..., fence [400, 500).
        let dense = line_split(10.0, 60);
        let sparse = sparse_from(&dense, &[0, 60], &[0, 5, 59]);
        let fence = Geofence::new([450.0, 0.0], 50.0).unwrap();
        let s = score_fence_trajectory(&dense, &sparse, &fence, Method::PassiveWait, &EvalSettings::default()).unwrap();
        assert_eq!(s.per_measurement, vec![0.0, -0.5]);
        assert_eq!(s.v_fence_traj, -0.5);
    }

    #[test]
    fn passive_wait_latches_on_inside_sample() {
        let dense = line_split(10.0, 60);
        // test sample 8 is at x = 450
        let sparse = sparse_from(&dense, &[0, 60], &[0, 8, 20, 59]);
        let fence = Geofence::new([450.0, 0.0], 50.0).unwrap();
        let s = score_fence_trajectory(&dense, &sparse, &fence, Method::PassiveWait, &EvalSettings::default()).unwrap();
        assert_eq!(s.per_measurement, vec![0.0, 1.0, 0.0]);
        assert_eq!(s.latched_at, Some(1));
    }

    #[test]
    fn untouched_fence_scores_zero() {
        let dense = line_split(10.0, 60);
        let sparse = sparse_from(&dense, &[0, 60], &[0, 20, 59]);
        let fence = Geofence::new([0.0, 5000.0], 500.0).unwrap();
        let s = score_fence_trajectory(&dense, &sparse, &fence, Method::Gp, &EvalSettings::default()).unwrap();
        assert!(s.per_measurement.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn grid_examples() {
        let g = grid_for_box([-1000.0, -1000.0], [1000.0, 1000.0], 1000.0, 0.0);
        assert_eq!((g.n_cols(), g.n_rows()), (3, 3));
        assert_eq!(g.cell(0, 0).lo(), [-500.0, -500.0]);
        let g = grid_for_box([-19000.0, -19000.0], [19000.0, 19000.0], 1000.0, 18000.0);
        assert_eq!((g.n_cols(), g.n_rows()), (39, 39));
        assert_eq!(g.len(), 39 * 39);
    }

    #[test]
    fn build_grid_covers_expanded_box() {
        let split = line_split(10.0, 60);
        let g = build_grid(&split, 700.0, 1234.0).unwrap();
        let (lo, hi) = (g.cell(g.ix.0, g.iy.0).lo(), g.cell(g.ix.1, g.iy.1).hi());
        let xs: Vec<f64> = split.test.points().iter().map(|p| p.x).collect();
        let xmax = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!(lo[0] <= xs[0] - 1234.0 && hi[0] > xmax + 1234.0);
        assert!(lo[1] <= -1234.0 && hi[1] > 1234.0);
        assert!(build_grid(&split, 0.0, 0.0).is_err());
    }

    #[test]
    fn fast_grid_scoring_matches_per_fence_scan() {
        let dense = line_split(12.0, 60);
        let sparse = sparse_from(&dense, &[0, 20, 40, 55, 60], &[0, 7, 15, 16, 31, 44, 59]);
        let policy = CutoffPolicy::new(0.2, PoissonRate::per_minute(0.5).unwrap(), 1.0).unwrap();
        let grid = build_grid(&dense, 500.0, 1500.0).unwrap();
        for m in Method::ALL {
            let plan = plan_predictions(&sparse, m, &PredictorConfig::default()).unwrap();
            for pay in [
                PayoffMatrix::ADVERTISING,
                PayoffMatrix::ALERT_ZONE,
                PayoffMatrix { alpha: 0.0, beta: 1.0, delta: 0.0 },
            ] {
                let fast = score_grid_with_plan(&plan, &dense.test, &grid, &pay, &policy).unwrap();
                let slow = score_grid_naive(&plan, &dense.test, &grid, &pay, &policy).unwrap();
                assert_eq!(fast.v_s.to_bits(), slow.v_s.to_bits(), "{m:?} {pay:?}");
                assert_eq!(fast.acts, slow.acts);
            }
        }
    }

    #[test]
    fn seeds_are_stable_and_distinct() {
        assert_eq!(derive_seed(1, "a"), derive_seed(1, "a"));
        assert_ne!(derive_seed(1, "a"), derive_seed(1, "b"));
        assert_ne!(derive_seed(1, "a"), derive_seed(2, "a"));
    }

    fn corpus(n: usize) -> Vec<CorpusEntry> {
        (0..n).map(|i| CorpusEntry { id: format!("t{i}"), split: line_split(8.0 + i as f64, 60) }).collect()
    }

    fn small_spec(param: SweepParam, values: Vec<f64>) -> SweepSpec {
        SweepSpec {
            param,
            values,
            base: EvalSettings { margin: 500.0, ..EvalSettings::default() },
            methods: Method::ALL.to_vec(),
            master_seed: 9,
        }
    }

    #[test]
    fn sweep_single_fence_matches_direct_score() {
        let entry = corpus(1).remove(0);
        let mut spec = small_spec(SweepParam::Lambda, vec![2.0]);
        spec.methods = vec![Method::PassiveWait];
        // one huge cell: the grid is exactly the origin cell
        spec.base.cell_size = 1e6;
        spec.base.margin = 0.0;
        let res = run_sweep(std::slice::from_ref(&entry), &spec, 1).unwrap();
        let sparse =
            subsample_split(&entry.split, PoissonRate { lambda: 2.0, ..spec.base.rate }, derive_seed(9, "t0")).unwrap();
        let fence = Geofence::new([0.0, 0.0], 5e5).unwrap();
        let settings = SweepParam::Lambda.apply(&spec.base, 2.0);
        let direct = score_fence_trajectory(&entry.split, &sparse, &fence, Method::PassiveWait, &settings).unwrap();
        assert_eq!(res[0].v, direct.v_fence_traj);
        assert_eq!(res[0].n_traj, 1);
    }

    #[test]
    fn sweep_mean_invariant_under_duplication() {
        let c = corpus(2);
        let spec = small_spec(SweepParam::Epsilon, vec![0.2, 0.5]);
        let a = run_sweep(&c, &spec, 2).unwrap();
        let doubled: Vec<CorpusEntry> = c.iter().chain(c.iter()).cloned().collect();
        let b = run_sweep(&doubled, &spec, 2).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x.v - y.v).abs() < 1e-12);
            assert_eq!(y.n_traj, 4);
        }
        assert_eq!(a.len(), 2 * 3);
    }

    #[test]
    fn sweep_is_worker_count_independent() {
        let c = corpus(3);
        let spec = small_spec(SweepParam::CellSize, vec![500.0, 1000.0]);
        let a = sweep_csv(&run_sweep(&c, &spec, 1).unwrap());
        let b = sweep_csv(&run_sweep(&c, &spec, 4).unwrap());
        assert_eq!(a, b);
        assert!(a.starts_with(SWEEP_CSV_HEADER));
    }

    #[test]
    fn rate_too_high_skips_trajectory() {
        let c = corpus(1);
        let spec = small_spec(SweepParam::Lambda, vec![13.0]);
        let r = run_sweep(&c, &spec, 1).unwrap();
        assert!(r.iter().all(|r| r.n_traj == 0));
    }

    #[test]
    fn saturating_case_methods_agree() {
        // every dense point kept, a fence far larger than the track: all
        // methods act at the first test measurement.
        let c = corpus(1);
        let mut spec = small_spec(SweepParam::Lambda, vec![12.0]);
        spec.base.cell_size = 1e6;
        spec.base.margin = 0.0;
        let r = run_sweep(&c, &spec, 1).unwrap();
        assert_eq!(r[0].v, 1.0);
        assert!(r.iter().all(|x| x.v == r[0].v));
    }
}
