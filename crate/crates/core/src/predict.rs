//! Probabilistic short-term location predictors.
//!
//! Each axis of the local frame gets an independent Gaussian process with a
//! squared-exponential kernel and Gaussian measurement noise. The mean
//! function is either zero or the line through the two most recent
//! measurements. Hyperparameters are refit from the look-back window every
//! time a new measurement arrives.
//!
//! The Passive Wait baseline is modeled as a stationary Gaussian centered on
//! the latest measurement with measurement-noise covariance.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::trajdata::{TrackPoint, Trajectory};

const LN_2PI: f64 = 1.837_877_066_409_345_3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PredictError {
    #[error("no measurements in the look-back window")]
    NoTrainingData,
    #[error("covariance matrix is not positive definite even with jitter")]
    IllConditioned,
    #[error("mean line needs two distinct timestamps")]
    DegenerateMean,
}

pub type Result<T, E = PredictError> = std::result::Result<T, E>;

/// Axis-independent bivariate Gaussian over the local plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianLocation {
    pub mean: [f64; 2],
    pub std: [f64; 2],
}

impl GaussianLocation {
    pub fn new(mean: [f64; 2], std: [f64; 2]) -> Self {
        debug_assert!(std.iter().all(|s| *s > 0.0 && s.is_finite()));
        Self { mean, std }
    }

    pub fn mean_std(&self) -> f64 {
        0.5 * (self.std[0] + self.std[1])
    }
}

/// Squared-exponential kernel parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    /// Signal amplitude, meters.
    pub sigma_f: f64,
    /// Length scale, seconds.
    pub length_scale: f64,
}

impl KernelParams {
    pub fn new(sigma_f: f64, length_scale: f64) -> Self {
        Self { sigma_f, length_scale }
    }

    #[inline]
    pub fn eval(&self, a: f64, b: f64) -> f64 {
        let d = (a - b) / self.length_scale;
        self.sigma_f * self.sigma_f * (-0.5 * d * d).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MeanMode {
    Zero,
    /// Line through the two most recent measurements in the window.
    Linear,
}

/// The three methods compared by the evaluation harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    PassiveWait,
    Gp,
    GpMeanFunc,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::PassiveWait, Method::Gp, Method::GpMeanFunc];

    pub fn mean_mode(self) -> Option<MeanMode> {
        match self {
            Method::PassiveWait => None,
            Method::Gp => Some(MeanMode::Zero),
            Method::GpMeanFunc => Some(MeanMode::Linear),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::PassiveWait => "PW",
            Method::Gp => "GP",
            Method::GpMeanFunc => "GP+meanfunc",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "pw" | "passive-wait" => Ok(Method::PassiveWait),
            "gp" => Ok(Method::Gp),
            "gp+meanfunc" | "gp-meanfunc" | "gp-mean" => Ok(Method::GpMeanFunc),
            _ => Err(format!("unknown method {s:?}")),
        }
    }
}

/// Hyperparameter search settings: a log-spaced grid followed by bounded
/// Nelder-Mead refinement from the best grid points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitSettings {
    pub sigma_f_bounds: (f64, f64),
    pub length_bounds: (f64, f64),
    pub grid_size: usize,
    pub starts: usize,
    pub max_evals: usize,
}

impl Default for FitSettings {
    fn default() -> Self {
        Self { sigma_f_bounds: (1.0, 1e4), length_bounds: (1.0, 600.0), grid_size: 5, starts: 2, max_evals: 200 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictorConfig {
    /// Measurement noise standard deviation, meters.
    pub sigma_m: f64,
    /// Look-back window, seconds.
    pub lookback: f64,
    pub fit: FitSettings,
}

impl Default for PredictorConfig {
    fn default() -> Self {
        Self { sigma_m: 3.0, lookback: 300.0, fit: FitSettings::default() }
    }
}

/// `m(t) = value_at_ref + slope * (t - t_ref)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearMean {
    pub t_ref: f64,
    pub value_at_ref: f64,
    pub slope: f64,
}

impl LinearMean {
    pub fn zero() -> Self {
        Self { t_ref: 0.0, value_at_ref: 0.0, slope: 0.0 }
    }

    pub fn constant(t_ref: f64, value: f64) -> Self {
        Self { t_ref, value_at_ref: value, slope: 0.0 }
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.value_at_ref + self.slope * (t - self.t_ref)
    }

    /// Value at absolute time zero.
    pub fn intercept(&self) -> f64 {
        self.eval(0.0)
    }
}

/// Per-axis lines through the two latest points of `history` at or before
/// `t0`.
pub fn linear_mean(history: &[TrackPoint], t0: f64) -> Result<[LinearMean; 2]> {
    let upto: Vec<&TrackPoint> = history.iter().filter(|p| p.t <= t0).collect();
    if upto.len() < 2 {
        return Err(PredictError::NoTrainingData);
    }
    let (a, b) = (upto[upto.len() - 2], upto[upto.len() - 1]);
    let dt = b.t - a.t;
    if dt == 0.0 {
        return Err(PredictError::DegenerateMean);
    }
    let line = |va: f64, vb: f64| LinearMean { t_ref: b.t, value_at_ref: vb, slope: (vb - va) / dt };
    Ok([line(a.x, b.x), line(a.y, b.y)])
}

fn gram(times: &[f64], params: &KernelParams, noise_var: f64) -> DMatrix<f64> {
    let n = times.len();
    let mut k = DMatrix::zeros(n, n);
    for j in 0..n {
        k[(j, j)] = params.eval(times[j], times[j]) + noise_var;
        for i in j + 1..n {
            let v = params.eval(times[i], times[j]);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

/// Cholesky of `K + sigma_m^2 I`, retrying with a jitter ladder scaled by the
/// mean diagonal.
fn factor(times: &[f64], params: &KernelParams, sigma_m: f64) -> Result<Cholesky<f64, Dyn>> {
    let base = gram(times, params, sigma_m * sigma_m);
    if let Some(c) = Cholesky::new(base.clone()) {
        return Ok(c);
    }
    let scale = base.trace() / times.len() as f64;
    for jitter in [1e-10, 1e-8, 1e-6] {
        let mut m = base.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += jitter * scale;
        }
        if let Some(c) = Cholesky::new(m) {
            return Ok(c);
        }
    }
    Err(PredictError::IllConditioned)
}

fn lml_from_factor(chol: &Cholesky<f64, Dyn>, y: &DVector<f64>) -> f64 {
    let alpha = chol.solve(y);
    let log_det_half: f64 = chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum();
    -0.5 * y.dot(&alpha) - log_det_half - 0.5 * y.len() as f64 * LN_2PI
}

/// Log marginal likelihood of zero-mean `values` observed at `times` under
/// the SE kernel plus i.i.d. noise. Subtract a mean function from `values`
/// before calling for non-zero means.
pub fn log_marginal_likelihood(times: &[f64], values: &[f64], params: KernelParams, sigma_m: f64) -> Result<f64> {
    if times.is_empty() {
        return Err(PredictError::NoTrainingData);
    }
    let chol = factor(times, &params, sigma_m)?;
    Ok(lml_from_factor(&chol, &DVector::from_column_slice(values)))
}

/// Analytic gradient of [`log_marginal_likelihood`] with respect to
/// `(sigma_f, length_scale)`.
pub fn log_marginal_likelihood_grad(
    times: &[f64],
    values: &[f64],
    params: KernelParams,
    sigma_m: f64,
) -> Result<[f64; 2]> {
    let n = times.len();
    if n == 0 {
        return Err(PredictError::NoTrainingData);
    }
    let chol = factor(times, &params, sigma_m)?;
    let alpha = chol.solve(&DVector::from_column_slice(values));
    let inv = chol.inverse();
    let (sf, l) = (params.sigma_f, params.length_scale);
    let mut g = [0.0; 2];
    for i in 0..n {
        for j in 0..n {
            let w = alpha[i] * alpha[j] - inv[(i, j)];
            let k = params.eval(times[i], times[j]);
            let d = times[i] - times[j];
            g[0] += w * 2.0 * k / sf;
            g[1] += w * k * d * d / (l * l * l);
        }
    }
    Ok([0.5 * g[0], 0.5 * g[1]])
}

/// Bounded Nelder-Mead maximization over `[lo, hi]^2`, evaluating at most
/// `budget` times. Returns the best point and value.
fn nelder_mead_max<F: FnMut([f64; 2]) -> f64>(
    f: &mut F,
    start: [f64; 2],
    step: [f64; 2],
    lo: [f64; 2],
    hi: [f64; 2],
    budget: usize,
) -> ([f64; 2], f64) {
    let clamp = |p: [f64; 2]| [p[0].clamp(lo[0], hi[0]), p[1].clamp(lo[1], hi[1])];
    let mut evals = 0usize;
    let mut eval = |p: [f64; 2], evals: &mut usize| {
        *evals += 1;
        let v = f(p);
        if v.is_finite() {
            -v
        } else {
            f64::INFINITY
        }
    };
    let mut simplex: Vec<([f64; 2], f64)> = Vec::with_capacity(3);
    simplex.push((start, eval(start, &mut evals)));
    for axis in 0..2 {
        let mut p = start;
        p[axis] += step[axis];
        if p[axis] > hi[axis] {
            p[axis] = start[axis] - step[axis];
        }
        let p = clamp(p);
        simplex.push((p, eval(p, &mut evals)));
    }
    while evals + 2 <= budget {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        if (simplex[2].1 - simplex[0].1).abs() < 1e-9 {
            break;
        }
        let c = [(simplex[0].0[0] + simplex[1].0[0]) / 2.0, (simplex[0].0[1] + simplex[1].0[1]) / 2.0];
        let worst = simplex[2];
        let along = |s: f64| clamp([c[0] + s * (worst.0[0] - c[0]), c[1] + s * (worst.0[1] - c[1])]);
        let xr = along(-1.0);
        let fr = eval(xr, &mut evals);
        if fr < simplex[0].1 {
            let xe = along(-2.0);
            let fe = eval(xe, &mut evals);
            simplex[2] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[1].1 {
            simplex[2] = (xr, fr);
        } else {
            let xc = if fr < worst.1 { along(-0.5) } else { along(0.5) };
            let fc = eval(xc, &mut evals);
            if fc < worst.1.min(fr) {
                simplex[2] = (xc, fc);
            } else {
                let best = simplex[0].0;
                for v in simplex.iter_mut().skip(1) {
                    let p = [best[0] + 0.5 * (v.0[0] - best[0]), best[1] + 0.5 * (v.0[1] - best[1])];
                    *v = (p, eval(p, &mut evals));
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    (simplex[0].0, -simplex[0].1)
}

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n <= 1 {
        return vec![(lo.ln() + hi.ln()) / 2.0];
    }
    (0..n).map(|i| lo.ln() + (hi.ln() - lo.ln()) * i as f64 / (n - 1) as f64).collect()
}

/// Maximizes the log marginal likelihood over kernel parameters within the
/// configured bounds.
pub fn fit_kernel(times: &[f64], values: &[f64], sigma_m: f64, settings: &FitSettings) -> Result<(KernelParams, f64)> {
    if times.is_empty() {
        return Err(PredictError::NoTrainingData);
    }
    let lo = [settings.sigma_f_bounds.0.ln(), settings.length_bounds.0.ln()];
    let hi = [settings.sigma_f_bounds.1.ln(), settings.length_bounds.1.ln()];
    let mut objective = |p: [f64; 2]| {
        log_marginal_likelihood(times, values, KernelParams::new(p[0].exp(), p[1].exp()), sigma_m)
            .unwrap_or(f64::NEG_INFINITY)
    };
    let mut grid: Vec<([f64; 2], f64)> = Vec::new();
    for &a in &log_grid(settings.sigma_f_bounds.0, settings.sigma_f_bounds.1, settings.grid_size) {
        for &b in &log_grid(settings.length_bounds.0, settings.length_bounds.1, settings.grid_size) {
            grid.push(([a, b], objective([a, b])));
        }
    }
    // Stable sort keeps grid order among ties, which keeps fits deterministic.
    grid.sort_by(|a, b| b.1.total_cmp(&a.1));
    if !grid[0].1.is_finite() {
        return Err(PredictError::IllConditioned);
    }
    let starts = settings.starts.max(1).min(grid.len());
    let remaining = settings.max_evals.saturating_sub(grid.len());
    let per_start = remaining / starts;
    let step = [
        (hi[0] - lo[0]) / (settings.grid_size.max(2) - 1) as f64 / 2.0,
        (hi[1] - lo[1]) / (settings.grid_size.max(2) - 1) as f64 / 2.0,
    ];
    let mut best = grid[0];
    if per_start >= 3 {
        for g in grid.iter().take(starts) {
            let (p, v) = nelder_mead_max(&mut objective, g.0, step, lo, hi, per_start);
            if v > best.1 {
                best = (p, v);
            }
        }
    }
    Ok((KernelParams::new(best.0[0].exp(), best.0[1].exp()), best.1))
}

/// Trained state for one axis.
#[derive(Debug, Clone)]
pub struct AxisModel {
    /// Training times relative to the anchor.
    times: Vec<f64>,
    params: KernelParams,
    mean: LinearMean,
    chol_l: DMatrix<f64>,
    alpha: DVector<f64>,
    sigma_m: f64,
    lml: f64,
}

impl AxisModel {
    /// Builds the posterior for fixed kernel parameters. `times` are relative
    /// to the anchor and `mean` is expressed in the same relative time.
    pub fn with_params(
        times: Vec<f64>,
        values: &[f64],
        mean: LinearMean,
        params: KernelParams,
        sigma_m: f64,
    ) -> Result<Self> {
        if times.is_empty() {
            return Err(PredictError::NoTrainingData);
        }
        let resid: Vec<f64> = times.iter().zip(values).map(|(t, v)| v - mean.eval(*t)).collect();
        let chol = factor(&times, &params, sigma_m)?;
        let r = DVector::from_vec(resid);
        let lml = lml_from_factor(&chol, &r);
        let alpha = chol.solve(&r);
        Ok(Self { times, params, mean, chol_l: chol.unpack(), alpha, sigma_m, lml })
    }

    /// Posterior predictive mean and variance (including measurement noise)
    /// at relative time `dt`.
    pub fn predict(&self, dt: f64) -> (f64, f64) {
        let k = DVector::from_iterator(self.times.len(), self.times.iter().map(|t| self.params.eval(dt, *t)));
        let mean = self.mean.eval(dt) + k.dot(&self.alpha);
        let v = self.chol_l.solve_lower_triangular(&k).expect("cholesky factor has a positive diagonal");
        let latent = (self.params.sigma_f * self.params.sigma_f - v.dot(&v)).max(0.0);
        (mean, latent + self.sigma_m * self.sigma_m)
    }

    pub fn params(&self) -> KernelParams {
        self.params
    }

    pub fn mean(&self) -> LinearMean {
        self.mean
    }

    pub fn log_marginal_likelihood(&self) -> f64 {
        self.lml
    }
}

#[derive(Debug, Clone)]
enum Model {
    Stationary,
    Gp([AxisModel; 2]),
}

/// A predictor fit at anchor time `t0`; queries take offsets from `t0`.
#[derive(Debug, Clone)]
pub struct FittedPredictor {
    method: Method,
    anchor_time: f64,
    anchor: [f64; 2],
    sigma_m: f64,
    window_size: usize,
    model: Model,
}

/// Training window: points with `t` in `[t0 - lookback, t0]`.
pub fn training_window(history: &[TrackPoint], t0: f64, lookback: f64) -> Vec<TrackPoint> {
    history.iter().filter(|p| p.t >= t0 - lookback && p.t <= t0).copied().collect()
}

impl FittedPredictor {
    pub fn method(&self) -> Method {
        self.method
    }

    pub fn anchor_time(&self) -> f64 {
        self.anchor_time
    }

    pub fn anchor(&self) -> [f64; 2] {
        self.anchor
    }

    pub fn window_size(&self) -> usize {
        self.window_size
    }

    pub fn axes(&self) -> Option<&[AxisModel; 2]> {
        match &self.model {
            Model::Stationary => None,
            Model::Gp(a) => Some(a),
        }
    }

    pub fn diagnostics(&self) -> FitDiagnostics {
        FitDiagnostics {
            method: self.method,
            anchor_time: self.anchor_time,
            window_size: self.window_size,
            axes: self.axes().map(|axes| {
                axes.clone().map(|a| AxisDiagnostics {
                    sigma_f: a.params.sigma_f,
                    length_scale: a.params.length_scale,
                    mean_slope: a.mean.slope,
                    mean_intercept: a.mean.value_at_ref - a.mean.slope * (a.mean.t_ref + self.anchor_time),
                    log_marginal_likelihood: a.lml,
                })
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisDiagnostics {
    pub sigma_f: f64,
    pub length_scale: f64,
    pub mean_slope: f64,
    /// Mean-line value at absolute time zero.
    pub mean_intercept: f64,
    pub log_marginal_likelihood: f64,
}

/// JSON-serializable summary of a fitted predictor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub method: Method,
    pub anchor_time: f64,
    pub window_size: usize,
    pub axes: Option<[AxisDiagnostics; 2]>,
}

fn mean_for(mode: MeanMode, window: &[TrackPoint], t0: f64) -> Result<[LinearMean; 2]> {
    match mode {
        MeanMode::Zero => Ok([LinearMean::zero(); 2]),
        MeanMode::Linear if window.len() == 1 => {
            let p = window[0];
            Ok([LinearMean::constant(p.t - t0, p.x), LinearMean::constant(p.t - t0, p.y)])
        }
        MeanMode::Linear => {
            let [mx, my] = linear_mean(window, t0)?;
            let shift = |m: LinearMean| LinearMean { t_ref: m.t_ref - t0, ..m };
            Ok([shift(mx), shift(my)])
        }
    }
}

/// Fits `method` on the measurements of `history` inside the look-back
/// window ending at `t0`.
pub fn fit(history: &[TrackPoint], t0: f64, config: &PredictorConfig, method: Method) -> Result<FittedPredictor> {
    let window = training_window(history, t0, config.lookback);
    let last = *window.last().ok_or(PredictError::NoTrainingData)?;
    let model = match method.mean_mode() {
        None => Model::Stationary,
        Some(mode) => {
            let means = mean_for(mode, &window, t0)?;
            let times: Vec<f64> = window.iter().map(|p| p.t - t0).collect();
            let axis = |vals: Vec<f64>, mean: LinearMean| -> Result<AxisModel> {
                let resid: Vec<f64> = times.iter().zip(&vals).map(|(t, v)| v - mean.eval(*t)).collect();
                let (params, _) = fit_kernel(&times, &resid, config.sigma_m, &config.fit)?;
                AxisModel::with_params(times.clone(), &vals, mean, params, config.sigma_m)
            };
            let ax = axis(window.iter().map(|p| p.x).collect(), means[0])?;
            let ay = axis(window.iter().map(|p| p.y).collect(), means[1])?;
            Model::Gp([ax, ay])
        }
    };
    Ok(FittedPredictor {
        method,
        anchor_time: t0,
        anchor: [last.x, last.y],
        sigma_m: config.sigma_m,
        window_size: window.len(),
        model,
    })
}

/// Convenience wrapper over [`fit`] for a whole trajectory anchored at its
/// last point.
pub fn fit_trajectory(traj: &Trajectory, config: &PredictorConfig, method: Method) -> Result<FittedPredictor> {
    fit(traj.points(), traj.last().t, config, method)
}

/// Builds a GP predictor with fixed kernel parameters on both axes.
pub fn gp_with_params(
    history: &[TrackPoint],
    t0: f64,
    sigma_m: f64,
    lookback: f64,
    mode: MeanMode,
    params: [KernelParams; 2],
) -> Result<FittedPredictor> {
    let window = training_window(history, t0, lookback);
    let last = *window.last().ok_or(PredictError::NoTrainingData)?;
    let means = mean_for(mode, &window, t0)?;
    let times: Vec<f64> = window.iter().map(|p| p.t - t0).collect();
    let xs: Vec<f64> = window.iter().map(|p| p.x).collect();
    let ys: Vec<f64> = window.iter().map(|p| p.y).collect();
    let ax = AxisModel::with_params(times.clone(), &xs, means[0], params[0], sigma_m)?;
    let ay = AxisModel::with_params(times, &ys, means[1], params[1], sigma_m)?;
    Ok(FittedPredictor {
        method: if mode == MeanMode::Zero { Method::Gp } else { Method::GpMeanFunc },
        anchor_time: t0,
        anchor: [last.x, last.y],
        sigma_m,
        window_size: window.len(),
        model: Model::Gp([ax, ay]),
    })
}

/// Predicted location distribution `dt` seconds after the anchor.
pub fn predict(p: &FittedPredictor, dt: f64) -> GaussianLocation {
    match &p.model {
        Model::Stationary => GaussianLocation::new(p.anchor, [p.sigma_m, p.sigma_m]),
        Model::Gp([ax, ay]) => {
            let (mx, vx) = ax.predict(dt);
            let (my, vy) = ay.predict(dt);
            GaussianLocation::new([mx, my], [vx.sqrt(), vy.sqrt()])
        }
    }
}
