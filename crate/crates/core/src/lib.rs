//! Geofence activation from sparse, sporadic location measurements.
//!
//! The crate is organized bottom-up:
//!
//! - [`trajdata`]: trajectory ingestion, projection, gap splitting, filtering,
//!   train/test splitting and Bernoulli subsampling.
//! - [`predict`]: per-axis Gaussian-process location predictors and the
//!   Passive Wait baseline.
//! - [`decide`]: inside-probability, payoff-matrix threshold, Poisson
//!   prediction cutoff and the forward scan for the act time.
//! - [`evalharness`]: realized-value scoring, fence grids and parameter sweeps.
//! - [`synth`]: synthetic trajectory generators.
//! - [`run`]: run configuration and the `preprocess`, `synth`, `simulate`
//!   and `sweep` commands behind the `geofence` binary.
//!
//! Runnable walkthroughs of each capability live in `examples/`.

pub mod decide;
pub mod evalharness;
pub mod predict;
pub mod run;
pub mod synth;
pub mod trajdata;

pub use decide::{
    act_threshold, expected_values, find_act_time, poisson_cutoff, prob_inside, prob_measurement_by, CutoffPolicy,
    DecisionOutcome, Geofence, PayoffMatrix,
};
pub use evalharness::{
    build_grid, fence_crossing, realized_value_step, run_sweep, score_fence_trajectory, CorpusEntry, EvalSettings,
    FenceCrossing, FenceGrid, RealizedScore, SweepParam, SweepResult, SweepSpec,
};
pub use predict::{fit, predict, FittedPredictor, GaussianLocation, KernelParams, Method, PredictorConfig};
pub use trajdata::{GeoOrigin, PoissonRate, RawFix, SplitTrajectory, TrackPoint, Trajectory};
