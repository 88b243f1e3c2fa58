//! Run configuration and the command implementations behind the `geofence`
//! binary.
//!
//! Configuration files are flat `key = value` text with `#` comments. Every
//! key mirrors a [`RunConfig`] field; command-line flags are applied on top.
//! Each command writes a `manifest.json` next to its outputs that echoes the
//! effective configuration, the seeds and digests of every input file.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::decide::{find_act_time, poisson_cutoff, CutoffPolicy, DecideError, PayoffMatrix};
use crate::evalharness::{
    derive_seed, fence_crossing, plan_predictions, run_sweep, score_decisions, subsample_split, sweep_csv, CorpusEntry,
    EvalError, EvalSettings, StepOutcome, SweepParam, SweepSpec,
};
use crate::predict::{FitSettings, Method, PredictError, PredictorConfig};
use crate::synth::{generate_fixes, ConfigError, SynthSpec};
use crate::trajdata::{
    estimate_lambda, group_by_user, load_csv, load_local_csv, preprocess_user, train_test_split, write_csv,
    write_fixes_csv, PoissonRate, PreprocessConfig, TrajError,
};
use crate::Geofence;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("{context}: {source}")]
    Data { context: String, source: TrajError },
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("{context}: {source}")]
    Io { context: String, source: std::io::Error },
}

impl RunError {
    /// Process exit code: 1 usage, 2 data, 3 numeric.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Usage(_) => 1,
            RunError::Data { .. } | RunError::Io { .. } => 2,
            RunError::Numeric(_) => 3,
        }
    }

    fn data(context: impl Into<String>, source: TrajError) -> Self {
        RunError::Data { context: context.into(), source }
    }

    fn io(context: impl AsRef<Path>, source: std::io::Error) -> Self {
        RunError::Io { context: context.as_ref().display().to_string(), source }
    }
}

impl From<EvalError> for RunError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Traj(t) => RunError::data("evaluation", t),
            EvalError::Predict(PredictError::IllConditioned) => RunError::Numeric(e.to_string()),
            EvalError::Predict(p) => RunError::Usage(p.to_string()),
            EvalError::Decide(d) => RunError::Usage(d.to_string()),
            EvalError::Invalid(s) => RunError::Usage(s),
        }
    }
}

impl From<DecideError> for RunError {
    fn from(e: DecideError) -> Self {
        RunError::Usage(e.to_string())
    }
}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Usage(e.to_string())
    }
}

pub type Result<T, E = RunError> = std::result::Result<T, E>;

/// Effective settings for a run. Defaults are the reference experiment's
/// default operating point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub inputs: Vec<PathBuf>,
    pub out: PathBuf,
    pub seed: u64,
    pub workers: usize,

    pub sigma_m: f64,
    pub lookback: f64,
    pub method: Method,
    pub fit: FitSettings,

    pub payoff: PayoffMatrix,
    pub payoff_name: String,
    pub epsilon: f64,
    pub scan_step: f64,

    pub lambda: f64,
    pub delta_t: f64,
    pub cell_size: f64,
    pub margin: f64,
    pub train_span: f64,
    pub min_duration: f64,
    pub min_speed: f64,

    pub sweep_params: Vec<SweepParam>,
    pub sweep_values: BTreeMap<SweepParam, Vec<f64>>,

    pub fence_center: [f64; 2],
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            inputs: Vec::new(),
            out: PathBuf::from("out"),
            seed: 1,
            workers: std::thread::available_parallelism().map_or(1, |n| n.get()),
            sigma_m: 3.0,
            lookback: 300.0,
            method: Method::GpMeanFunc,
            fit: FitSettings::default(),
            payoff: PayoffMatrix::ADVERTISING,
            payoff_name: "advertising".into(),
            epsilon: 0.2,
            scan_step: 1.0,
            lambda: 0.5,
            delta_t: 60.0,
            cell_size: 1000.0,
            margin: 18_000.0,
            train_span: 300.0,
            min_duration: 600.0,
            min_speed: 5.0,
            sweep_params: SweepParam::ALL.to_vec(),
            sweep_values: SweepParam::ALL.iter().map(|p| (*p, p.default_values())).collect(),
            fence_center: [0.0, 0.0],
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim().parse().map_err(|_| RunError::Usage(format!("{key}: cannot parse {v:?}")))
}

fn parse_list(key: &str, v: &str) -> Result<Vec<f64>> {
    v.split(',').filter(|s| !s.trim().is_empty()).map(|s| parse_num(key, s)).collect()
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().replace('-', "_");
        let v = value.trim();
        match key.as_str() {
            "inputs" | "input" => self.inputs = v.split(',').map(|s| PathBuf::from(s.trim())).collect(),
            "out" => self.out = PathBuf::from(v),
            "seed" => self.seed = parse_num(&key, v)?,
            "workers" => self.workers = parse_num::<usize>(&key, v)?.max(1),
            "sigma_m" => self.sigma_m = parse_num(&key, v)?,
            "lookback" => self.lookback = parse_num(&key, v)?,
            "method" => self.method = v.parse().map_err(RunError::Usage)?,
            "mean_mode" => {
                self.method = match v {
                    "zero" => Method::Gp,
                    "linear" => Method::GpMeanFunc,
                    _ => return Err(RunError::Usage(format!("mean_mode must be zero or linear, got {v:?}"))),
                }
            }
            "fit_grid" => self.fit.grid_size = parse_num(&key, v)?,
            "fit_starts" => self.fit.starts = parse_num(&key, v)?,
            "fit_max_evals" => self.fit.max_evals = parse_num(&key, v)?,
            "payoff" => {
                self.payoff =
                    PayoffMatrix::preset(v).ok_or_else(|| RunError::Usage(format!("unknown payoff preset {v:?}")))?;
                self.payoff_name = v.to_string();
            }
            "alpha" => {
                self.payoff.alpha = parse_num(&key, v)?;
                self.payoff_name = "custom".into();
            }
            "beta" => {
                self.payoff.beta = parse_num(&key, v)?;
                self.payoff_name = "custom".into();
            }
            "delta" => {
                self.payoff.delta = parse_num(&key, v)?;
                self.payoff_name = "custom".into();
            }
            "epsilon" => self.epsilon = parse_num(&key, v)?,
            "scan_step" => self.scan_step = parse_num(&key, v)?,
            "lambda" => self.lambda = parse_num(&key, v)?,
            "delta_t" => self.delta_t = parse_num(&key, v)?,
            "cell_size" => self.cell_size = parse_num(&key, v)?,
            "margin" => self.margin = parse_num(&key, v)?,
            "train_span" => self.train_span = parse_num(&key, v)?,
            "min_duration" => self.min_duration = parse_num(&key, v)?,
            "min_speed" => self.min_speed = parse_num(&key, v)?,
            "sweep" => {
                self.sweep_params = v
                    .split(',')
                    .map(|s| s.trim().parse::<SweepParam>().map_err(RunError::Usage))
                    .collect::<Result<_>>()?
            }
            "fence_center" => {
                let xy = parse_list(&key, v)?;
                if xy.len() != 2 {
                    return Err(RunError::Usage("fence_center needs x,y".into()));
                }
                self.fence_center = [xy[0], xy[1]];
            }
            other => {
                if let Some(name) = other.strip_suffix("_values") {
                    let p: SweepParam = name.parse().map_err(RunError::Usage)?;
                    self.sweep_values.insert(p, parse_list(&key, v)?);
                } else {
                    return Err(RunError::Usage(format!("unknown config key {other:?}")));
                }
            }
        }
        Ok(())
    }

    /// Parses `key = value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| RunError::Usage(format!("config line {}: expected key = value", n + 1)))?;
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = fs::read_to_string(path.as_ref()).map_err(|e| RunError::io(path.as_ref(), e))?;
        let mut c = Self::default();
        c.apply_text(&text)?;
        Ok(c)
    }

    /// Serializes back to the `key = value` format. Parsing the result
    /// reproduces this configuration.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("inputs", self.inputs.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(","));
        kv("out", self.out.display().to_string());
        kv("seed", self.seed.to_string());
        kv("workers", self.workers.to_string());
        kv("sigma_m", self.sigma_m.to_string());
        kv("lookback", self.lookback.to_string());
        kv("method", self.method.name().to_lowercase());
        kv("fit_grid", self.fit.grid_size.to_string());
        kv("fit_starts", self.fit.starts.to_string());
        kv("fit_max_evals", self.fit.max_evals.to_string());
        kv("alpha", self.payoff.alpha.to_string());
        kv("beta", self.payoff.beta.to_string());
        kv("delta", self.payoff.delta.to_string());
        kv("epsilon", self.epsilon.to_string());
        kv("scan_step", self.scan_step.to_string());
        kv("lambda", self.lambda.to_string());
        kv("delta_t", self.delta_t.to_string());
        kv("cell_size", self.cell_size.to_string());
        kv("margin", self.margin.to_string());
        kv("train_span", self.train_span.to_string());
        kv("min_duration", self.min_duration.to_string());
        kv("min_speed", self.min_speed.to_string());
        kv("sweep", self.sweep_params.iter().map(|p| p.name()).collect::<Vec<_>>().join(","));
        for (p, v) in &self.sweep_values {
            kv(&format!("{}_values", p.name()), fmt_list(v));
        }
        kv("fence_center", fmt_list(&self.fence_center));
        s
    }

    pub fn predictor(&self) -> PredictorConfig {
        PredictorConfig { sigma_m: self.sigma_m, lookback: self.lookback, fit: self.fit }
    }

    pub fn rate(&self) -> Result<PoissonRate> {
        PoissonRate::new(self.lambda, self.delta_t).map_err(|e| RunError::Usage(e.to_string()))
    }

    pub fn eval_settings(&self) -> Result<EvalSettings> {
        self.payoff.validate()?;
        if !(self.sigma_m > 0.0) || !(self.lookback > 0.0) {
            return Err(RunError::Usage("sigma_m and lookback must be positive".into()));
        }
        let s = EvalSettings {
            predictor: self.predictor(),
            payoff: self.payoff,
            epsilon: self.epsilon,
            rate: self.rate()?,
            scan_step: self.scan_step,
            cell_size: self.cell_size,
            margin: self.margin,
        };
        s.policy()?;
        Ok(s)
    }

    pub fn preprocess(&self) -> PreprocessConfig {
        PreprocessConfig { min_duration: self.min_duration, min_speed: self.min_speed, train_span: self.train_span }
    }
}

fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| RunError::io(path, e))?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub config: String,
    pub seed: u64,
    pub trajectory_seeds: BTreeMap<String, u64>,
    pub input_digests: BTreeMap<String, String>,
    pub outputs: Vec<String>,
    pub timings_s: BTreeMap<String, f64>,
}

impl Manifest {
    fn new(command: &str, cfg: &RunConfig) -> Self {
        Self {
            command: command.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config: cfg.to_text(),
            seed: cfg.seed,
            trajectory_seeds: BTreeMap::new(),
            input_digests: BTreeMap::new(),
            outputs: Vec::new(),
            timings_s: BTreeMap::new(),
        }
    }

    fn digest_inputs(&mut self, files: &[PathBuf]) -> Result<()> {
        for f in files {
            self.input_digests.insert(f.display().to_string(), sha256_file(f)?);
        }
        Ok(())
    }

    fn write(&self, dir: &Path) -> Result<()> {
        write_text(&dir.join("manifest.json"), &serde_json::to_string_pretty(self).expect("manifest serializes"))
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| RunError::io(path, e))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| RunError::io(dir, e))
}

fn sanitize(id: &str) -> String {
    id.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect()
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct SegmentStats {
    pub file: String,
    pub origin_lat: Option<f64>,
    pub origin_lon: Option<f64>,
    pub n_train: usize,
    pub n_test: usize,
    pub train_span: f64,
    pub lambda_hat: f64,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct UserStats {
    pub user_id: String,
    pub n_fixes: usize,
    pub tau: Option<f64>,
    pub n_segments_raw: usize,
    pub segments: Vec<SegmentStats>,
}

#[derive(Debug, Clone, Serialize, PartialEq, Default)]
pub struct PreprocessReport {
    pub users: Vec<UserStats>,
    pub total_segments: usize,
}

/// Turns a raw `user_id,t,lat,lon` CSV into local-frame segment files, one
/// per surviving train/test trajectory, anchored on the last training point.
pub fn cmd_preprocess(raw_csv: &Path, out_dir: &Path, cfg: &RunConfig) -> Result<PreprocessReport> {
    let started = Instant::now();
    let fixes = load_csv(raw_csv).map_err(|e| RunError::data(raw_csv.display().to_string(), e))?;
    ensure_dir(out_dir)?;
    let mut report = PreprocessReport::default();
    let mut manifest = Manifest::new("preprocess", cfg);
    manifest.digest_inputs(&[raw_csv.to_path_buf()])?;
    for (user, fixes) in group_by_user(fixes) {
        let mut stats =
            UserStats { user_id: user.clone(), n_fixes: fixes.len(), tau: None, n_segments_raw: 0, segments: vec![] };
        if fixes.len() >= 2 {
            let segs =
                preprocess_user(&fixes, &cfg.preprocess()).map_err(|e| RunError::data(format!("user {user}"), e))?;
            stats.tau = Some(segs.tau);
            stats.n_segments_raw = segs.n_segments_raw;
            for (k, split) in segs.splits.iter().enumerate() {
                let file = format!("{}_{k:03}.csv", sanitize(&user));
                let mut pts = split.train.points().to_vec();
                pts.extend_from_slice(split.test.points());
                let whole = crate::trajdata::Trajectory::new(pts, split.train.origin())
                    .map_err(|e| RunError::data(&file, e))?;
                write_csv(&whole, out_dir.join(&file)).map_err(|e| RunError::data(&file, e))?;
                let lambda_hat = estimate_lambda(&whole, cfg.delta_t).map_or(0.0, |r| r.lambda);
                stats.segments.push(SegmentStats {
                    file: file.clone(),
                    origin_lat: split.train.origin().map(|o| o.lat),
                    origin_lon: split.train.origin().map(|o| o.lon),
                    n_train: split.train.len(),
                    n_test: split.test.len(),
                    train_span: split.train.duration(),
                    lambda_hat,
                });
                manifest.outputs.push(file);
                report.total_segments += 1;
            }
        }
        report.users.push(stats);
    }
    write_text(
        &out_dir.join("preprocess_stats.json"),
        &serde_json::to_string_pretty(&report).expect("report serializes"),
    )?;
    manifest.outputs.push("preprocess_stats.json".into());
    manifest.timings_s.insert("total".into(), started.elapsed().as_secs_f64());
    manifest.write(out_dir)?;
    Ok(report)
}

/// Writes a synthetic raw-fix corpus to `out_dir/synth.csv`.
pub fn cmd_synth(spec: &SynthSpec, out_dir: &Path, cfg: &RunConfig) -> Result<PathBuf> {
    let fixes = generate_fixes(spec)?;
    ensure_dir(out_dir)?;
    let path = out_dir.join("synth.csv");
    write_fixes_csv(&fixes, &path).map_err(|e| RunError::data(path.display().to_string(), e))?;
    let mut manifest = Manifest::new("synth", cfg);
    manifest.seed = spec.seed;
    manifest.config.push_str(&format!("# synth spec: {}\n", serde_json::to_string(spec).expect("spec serializes")));
    manifest.outputs.push("synth.csv".into());
    manifest.write(out_dir)?;
    Ok(path)
}

/// Segment files (`*.csv`) under the given paths, sorted by name.
pub fn segment_files(inputs: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for p in inputs {
        if p.is_dir() {
            for e in fs::read_dir(p).map_err(|e| RunError::io(p, e))? {
                let path = e.map_err(|e| RunError::io(p, e))?.path();
                if path.extension().is_some_and(|x| x == "csv") {
                    files.push(path);
                }
            }
        } else {
            files.push(p.clone());
        }
    }
    files.sort();
    Ok(files)
}

pub fn load_corpus(files: &[PathBuf], train_span: f64) -> Result<Vec<CorpusEntry>> {
    files
        .iter()
        .map(|f| {
            let ctx = f.display().to_string();
            let traj = load_local_csv(f).map_err(|e| RunError::data(&ctx, e))?;
            let split = train_test_split(&traj, train_span).map_err(|e| RunError::data(&ctx, e))?;
            let id = f.file_stem().map_or_else(|| ctx.clone(), |s| s.to_string_lossy().into_owned());
            Ok(CorpusEntry { id, split })
        })
        .collect()
}

/// One row of a decision trace.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRow {
    pub t_i: f64,
    pub t_star: f64,
    /// Absolute act time.
    pub t_hat: Option<f64>,
    pub p_at_act: f64,
    pub decision: &'static str,
    pub value: f64,
}

pub const TRACE_CSV_HEADER: &str = "t_i,t_star,t_hat,p_at_act,decision,value";

/// Shortest round-trip formatting; exponent form for very small or large
/// magnitudes.
fn fmt_f64(v: f64) -> String {
    if v != 0.0 && (v.abs() < 1e-6 || v.abs() >= 1e15) {
        format!("{v:e}")
    } else {
        v.to_string()
    }
}

pub fn trace_csv(rows: &[TraceRow]) -> String {
    let mut s = String::from(TRACE_CSV_HEADER);
    s.push('\n');
    for r in rows {
        let t_hat = r.t_hat.map_or_else(|| "NEVER".to_string(), fmt_f64);
        let _ = writeln!(s, "{},{},{},{},{},{}", r.t_i, r.t_star, t_hat, fmt_f64(r.p_at_act), r.decision, r.value);
    }
    s
}

/// Runs one trajectory against one fence and returns the per-measurement
/// decision trace. The trace values sum to the fence/trajectory realized
/// value.
pub fn simulate_entry(entry: &CorpusEntry, fence: &Geofence, cfg: &RunConfig) -> Result<Vec<TraceRow>> {
    let settings = cfg.eval_settings()?;
    let policy: CutoffPolicy = settings.policy()?;
    let sparse = subsample_split(&entry.split, settings.rate, derive_seed(cfg.seed, &entry.id))?;
    let plan = plan_predictions(&sparse, cfg.method, &settings.predictor)?;
    let outcomes = plan
        .predictors
        .iter()
        .map(|p| find_act_time(p, fence, &settings.payoff, &policy))
        .collect::<Result<Vec<_>, _>>()?;
    let t_hats: Vec<Option<f64>> = outcomes.iter().map(|o| o.t_hat).collect();
    let crossing = fence_crossing(&entry.split.test, fence);
    let score = score_decisions(&plan.times, &t_hats, &crossing, &settings.payoff);
    let t_star = poisson_cutoff(&policy);
    Ok(outcomes
        .iter()
        .enumerate()
        .map(|(i, o)| {
            let t_i = plan.times[i];
            let t_hat = o.t_hat.map(|d| t_i + d);
            let decision = match score.latched_at {
                Some(k) if i > k => "latched",
                _ if t_hat.is_some_and(|t| t <= plan.times[i + 1]) => "act",
                _ => "wait",
            };
            TraceRow { t_i, t_star, t_hat, p_at_act: o.p_at_act, decision, value: score.per_measurement[i] }
        })
        .collect())
}

/// Decision trace for one segment file and one fence, written to
/// `out/trace.csv`.
pub fn cmd_simulate(segment: &Path, cfg: &RunConfig) -> Result<Vec<TraceRow>> {
    let entry = load_corpus(&[segment.to_path_buf()], cfg.train_span)?.remove(0);
    let fence = Geofence::square(cfg.fence_center, cfg.cell_size)?;
    let rows = simulate_entry(&entry, &fence, cfg)?;
    ensure_dir(&cfg.out)?;
    write_text(&cfg.out.join("trace.csv"), &trace_csv(&rows))?;
    let mut manifest = Manifest::new("simulate", cfg);
    manifest.digest_inputs(&[segment.to_path_buf()])?;
    manifest.trajectory_seeds.insert(entry.id.clone(), derive_seed(cfg.seed, &entry.id));
    manifest.outputs.push("trace.csv".into());
    manifest.write(&cfg.out)?;
    Ok(rows)
}

/// `t*` for every (epsilon, lambda) combination of the configured sweeps.
pub fn tstar_table(epsilons: &[f64], lambdas: &[f64], delta_t: f64) -> String {
    let mut s = String::from("epsilon,lambda,t_star\n");
    for &e in epsilons {
        for &l in lambdas {
            let policy = CutoffPolicy { epsilon: e, rate: PoissonRate { lambda: l, delta_t }, scan_step: 1.0 };
            let _ = writeln!(s, "{e},{l},{}", poisson_cutoff(&policy));
        }
    }
    s
}

/// Runs every configured one-parameter sweep with the other parameters at
/// their defaults and writes `sweep_<param>.csv` files.
pub fn cmd_sweep(cfg: &RunConfig) -> Result<BTreeMap<SweepParam, String>> {
    let files = segment_files(&cfg.inputs)?;
    if files.is_empty() {
        return Err(RunError::Usage("no segment files given".into()));
    }
    let corpus = load_corpus(&files, cfg.train_span)?;
    let base = cfg.eval_settings()?;
    ensure_dir(&cfg.out)?;
    let mut manifest = Manifest::new("sweep", cfg);
    manifest.digest_inputs(&files)?;
    for e in &corpus {
        manifest.trajectory_seeds.insert(e.id.clone(), derive_seed(cfg.seed, &e.id));
    }
    let mut out = BTreeMap::new();
    for &param in &cfg.sweep_params {
        let started = Instant::now();
        let spec = SweepSpec {
            param,
            values: cfg.sweep_values.get(&param).cloned().unwrap_or_else(|| param.default_values()),
            base,
            methods: Method::ALL.to_vec(),
            master_seed: cfg.seed,
        };
        let csv = sweep_csv(&run_sweep(&corpus, &spec, cfg.workers)?);
        let name = format!("sweep_{}.csv", param.name());
        write_text(&cfg.out.join(&name), &csv)?;
        manifest.outputs.push(name);
        if param == SweepParam::Epsilon {
            let lambdas = cfg.sweep_values.get(&SweepParam::Lambda).cloned().unwrap_or_else(|| vec![cfg.lambda]);
            write_text(&cfg.out.join("tstar_table.csv"), &tstar_table(&spec.values, &lambdas, cfg.delta_t))?;
            manifest.outputs.push("tstar_table.csv".into());
        }
        manifest.timings_s.insert(param.name().into(), started.elapsed().as_secs_f64());
        out.insert(param, csv);
    }
    manifest.write(&cfg.out)?;
    Ok(out)
}

impl StepOutcome {
    pub fn label(self) -> &'static str {
        match self {
            StepOutcome::Alpha => "alpha",
            StepOutcome::Beta => "beta",
            StepOutcome::Delta => "delta",
            StepOutcome::Zero => "zero",
        }
    }
}
