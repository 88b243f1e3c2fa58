//! Trajectory ingestion and preprocessing.
//!
//! Raw `(user, t, lat, lon)` fixes are projected into a local metric frame,
//! split into segments with a uniform sampling gap, filtered for duration and
//! motion, split into train/test parts and thinned with a Bernoulli process to
//! simulate Poisson-distributed measurement arrivals.
//!
//! Timestamps are quantized to whole milliseconds when a [`Trajectory`] is
//! built. Gap comparisons are exact on the quantized values, so data with
//! sub-millisecond jitter must be pre-quantized by the caller.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Mean earth radius used by the equirectangular projection, in meters.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// Default Poisson reference interval, in seconds.
pub const DEFAULT_DELTA_T: f64 = 60.0;

#[derive(Debug, Error)]
pub enum TrajError {
    #[error("trajectory has no points")]
    EmptyTrajectory,
    #[error("duplicate timestamp {t} s")]
    DuplicateTimestamp { t: f64 },
    #[error("timestamps are not sorted at index {index}")]
    Unsorted { index: usize },
    #[error("trajectory too short: {reason}")]
    TooShort { reason: String },
    #[error("keep probability {p} exceeds 1 (lambda * tau > delta_t)")]
    RateTooHigh { p: f64 },
    #[error("keep probability {p} is not positive")]
    InvalidRate { p: f64 },
    #[error("invalid origin ({lat}, {lon})")]
    InvalidOrigin { lat: f64, lon: f64 },
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = TrajError> = std::result::Result<T, E>;

/// A raw location measurement as it arrives from a data source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawFix {
    pub user_id: String,
    pub t: f64,
    pub lat: f64,
    pub lon: f64,
}

/// Geographic anchor of a local frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoOrigin {
    pub lat: f64,
    pub lon: f64,
}

impl GeoOrigin {
    pub fn new(lat: f64, lon: f64) -> Result<Self> {
        if !valid_lat_lon(lat, lon) {
            return Err(TrajError::InvalidOrigin { lat, lon });
        }
        Ok(Self { lat, lon })
    }

    /// Equirectangular projection of `(lat, lon)` into meters east/north of
    /// this origin.
    pub fn project(&self, lat: f64, lon: f64) -> (f64, f64) {
        let x = EARTH_RADIUS_M * (lon - self.lon).to_radians() * self.lat.to_radians().cos();
        let y = EARTH_RADIUS_M * (lat - self.lat).to_radians();
        (x, y)
    }

    /// Inverse of [`GeoOrigin::project`].
    pub fn unproject(&self, x: f64, y: f64) -> (f64, f64) {
        let lat = self.lat + (y / EARTH_RADIUS_M).to_degrees();
        let lon = self.lon + (x / (EARTH_RADIUS_M * self.lat.to_radians().cos())).to_degrees();
        (lat, lon)
    }
}

fn valid_lat_lon(lat: f64, lon: f64) -> bool {
    (-90.0..=90.0).contains(&lat) && (-180.0..=180.0).contains(&lon)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackPoint {
    /// Seconds.
    pub t: f64,
    /// Meters east of the frame origin.
    pub x: f64,
    /// Meters north of the frame origin.
    pub y: f64,
}

impl TrackPoint {
    pub fn new(t: f64, x: f64, y: f64) -> Self {
        Self { t, x, y }
    }

    pub fn dist(&self, other: &TrackPoint) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// A time-ordered sequence of local-frame measurements for one user.
///
/// Construction enforces a non-empty, strictly increasing time axis.
/// Operations that need at least two points report [`TrajError::TooShort`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    points: Vec<TrackPoint>,
    origin: Option<GeoOrigin>,
    gap: Option<f64>,
}

fn quantize_ms(t: f64) -> f64 {
    (t * 1000.0).round() / 1000.0
}

fn to_ms(t: f64) -> i64 {
    (t * 1000.0).round() as i64
}

impl Trajectory {
    pub fn new(points: Vec<TrackPoint>, origin: Option<GeoOrigin>) -> Result<Self> {
        if points.is_empty() {
            return Err(TrajError::EmptyTrajectory);
        }
        let mut points = points;
        for p in &mut points {
            p.t = quantize_ms(p.t);
        }
        for (i, w) in points.windows(2).enumerate() {
            if w[1].t == w[0].t {
                return Err(TrajError::DuplicateTimestamp { t: w[1].t });
            }
            if w[1].t < w[0].t {
                return Err(TrajError::Unsorted { index: i + 1 });
            }
        }
        Ok(Self { points, origin, gap: None })
    }

    /// Local-frame trajectory without a geographic anchor.
    pub fn from_points(points: Vec<TrackPoint>) -> Result<Self> {
        Self::new(points, None)
    }

    pub fn points(&self) -> &[TrackPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn origin(&self) -> Option<GeoOrigin> {
        self.origin
    }

    /// Uniform sampling interval, set only on segments produced by
    /// [`split_on_gap`].
    pub fn gap(&self) -> Option<f64> {
        self.gap
    }

    pub fn first(&self) -> &TrackPoint {
        &self.points[0]
    }

    pub fn last(&self) -> &TrackPoint {
        &self.points[self.points.len() - 1]
    }

    pub fn duration(&self) -> f64 {
        self.last().t - self.first().t
    }

    pub fn with_gap(mut self, gap: Option<f64>) -> Self {
        self.gap = gap;
        self
    }

    /// Re-anchors the frame so that `anchor` (a point in the current frame)
    /// becomes `(0, 0)`. With a geographic origin this round-trips through
    /// lat/lon, otherwise it is a plain translation.
    pub fn reanchor(&self, anchor: TrackPoint) -> Self {
        let (points, origin) = match self.origin {
            Some(o) => {
                let (lat0, lon0) = o.unproject(anchor.x, anchor.y);
                let new_origin = GeoOrigin { lat: lat0, lon: lon0 };
                let pts = self
                    .points
                    .iter()
                    .map(|p| {
                        let (lat, lon) = o.unproject(p.x, p.y);
                        let (x, y) = new_origin.project(lat, lon);
                        TrackPoint { t: p.t, x, y }
                    })
                    .collect();
                (pts, Some(new_origin))
            }
            None => (
                self.points.iter().map(|p| TrackPoint { t: p.t, x: p.x - anchor.x, y: p.y - anchor.y }).collect(),
                None,
            ),
        };
        Self { points, origin, gap: self.gap }
    }

    fn require_len(&self, n: usize) -> Result<()> {
        if self.points.len() < n {
            return Err(TrajError::TooShort { reason: format!("{} points, need at least {n}", self.points.len()) });
        }
        Ok(())
    }
}

/// A trajectory split into a training prefix and a test remainder, both in a
/// frame whose origin is the last training point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitTrajectory {
    pub train: Trajectory,
    pub test: Trajectory,
}

impl SplitTrajectory {
    /// Anchor time: the last training measurement.
    pub fn train_end(&self) -> f64 {
        self.train.last().t
    }
}

/// Measurement arrival rate: `lambda` expected measurements per `delta_t`
/// seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoissonRate {
    pub lambda: f64,
    pub delta_t: f64,
}

impl PoissonRate {
    pub fn new(lambda: f64, delta_t: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) || !(delta_t > 0.0 && delta_t.is_finite()) {
            return Err(TrajError::InvalidRate { p: lambda / delta_t });
        }
        Ok(Self { lambda, delta_t })
    }

    /// Rate per minute, the conventional reference interval.
    pub fn per_minute(lambda: f64) -> Result<Self> {
        Self::new(lambda, DEFAULT_DELTA_T)
    }

    /// Events per second.
    pub fn per_second(&self) -> f64 {
        self.lambda / self.delta_t
    }
}

/// Projects time-sorted fixes into the local frame around `origin`.
pub fn project_to_local(fixes: &[RawFix], origin: GeoOrigin) -> Result<Trajectory> {
    if fixes.is_empty() {
        return Err(TrajError::EmptyTrajectory);
    }
    let points = fixes
        .iter()
        .map(|f| {
            let (x, y) = origin.project(f.lat, f.lon);
            TrackPoint { t: f.t, x, y }
        })
        .collect();
    Trajectory::new(points, Some(origin))
}

/// Most frequent gap between consecutive timestamps; ties go to the smaller
/// gap.
pub fn dominant_gap(traj: &Trajectory) -> Result<f64> {
    traj.require_len(2)?;
    let mut counts: BTreeMap<i64, usize> = BTreeMap::new();
    for w in traj.points.windows(2) {
        *counts.entry(to_ms(w[1].t) - to_ms(w[0].t)).or_default() += 1;
    }
    // BTreeMap iterates ascending, so the first maximum is the smallest gap.
    let mut best = (0i64, 0usize);
    for (&gap, &n) in &counts {
        if n > best.1 {
            best = (gap, n);
        }
    }
    Ok(best.0 as f64 / 1000.0)
}

/// Breaks the trajectory wherever consecutive timestamps are not exactly
/// `tau` apart. Single-point pieces are dropped.
pub fn split_on_gap(traj: &Trajectory, tau: f64) -> Vec<Trajectory> {
    let tau_ms = to_ms(tau);
    let mut out = Vec::new();
    let mut current: Vec<TrackPoint> = Vec::new();
    let mut flush = |current: &mut Vec<TrackPoint>| {
        if current.len() >= 2 {
            out.push(Trajectory {
                points: std::mem::take(current),
                origin: traj.origin,
                gap: Some(tau_ms as f64 / 1000.0),
            });
        } else {
            current.clear();
        }
    };
    for p in &traj.points {
        if let Some(prev) = current.last() {
            if to_ms(p.t) - to_ms(prev.t) != tau_ms {
                flush(&mut current);
            }
        }
        current.push(*p);
    }
    flush(&mut current);
    out
}

/// Keeps segments lasting at least `min_duration` seconds whose end-to-end
/// displacement is at least `min_speed * duration`.
pub fn filter_short(segs: Vec<Trajectory>, min_duration: f64, min_speed: f64) -> Vec<Trajectory> {
    segs.into_iter()
        .filter(|s| {
            let d = s.duration();
            d >= min_duration && s.first().dist(s.last()) >= min_speed * d
        })
        .collect()
}

/// Splits off the first `train_span` seconds (inclusive) as training data and
/// re-anchors both parts on the last training point.
pub fn train_test_split(traj: &Trajectory, train_span: f64) -> Result<SplitTrajectory> {
    traj.require_len(2)?;
    if traj.duration() < 2.0 * train_span {
        return Err(TrajError::TooShort { reason: format!("duration {} s < {} s", traj.duration(), 2.0 * train_span) });
    }
    let cut = traj.first().t + train_span;
    let n_train = traj.points.iter().take_while(|p| p.t <= cut).count();
    let anchored = traj.reanchor(traj.points[n_train - 1]);
    let (train, test) = anchored.points.split_at(n_train);
    if test.is_empty() {
        return Err(TrajError::TooShort { reason: "no test points".into() });
    }
    let part = |pts: &[TrackPoint]| Trajectory { points: pts.to_vec(), origin: anchored.origin, gap: anchored.gap };
    Ok(SplitTrajectory { train: part(train), test: part(test) })
}

/// Bernoulli keep probability `lambda * tau / delta_t`.
pub fn keep_probability(rate: PoissonRate, tau: f64) -> Result<f64> {
    let p = rate.lambda * tau / rate.delta_t;
    if !(p > 0.0) || !p.is_finite() {
        return Err(TrajError::InvalidRate { p });
    }
    if p > 1.0 {
        return Err(TrajError::RateTooHigh { p });
    }
    Ok(p)
}

/// Thins a uniformly sampled trajectory to simulate Poisson arrivals at
/// `rate`. Endpoints are always kept.
pub fn bernoulli_subsample(traj: &Trajectory, rate: PoissonRate, tau: f64, rng_seed: u64) -> Result<Trajectory> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    bernoulli_subsample_with(traj, rate, tau, &mut rng)
}

/// Like [`bernoulli_subsample`] but draws from a caller-owned generator.
pub fn bernoulli_subsample_with<R: Rng>(
    traj: &Trajectory,
    rate: PoissonRate,
    tau: f64,
    rng: &mut R,
) -> Result<Trajectory> {
    let p = keep_probability(rate, tau)?;
    let n = traj.points.len();
    let points = traj
        .points
        .iter()
        .enumerate()
        .filter(|(i, _)| *i == 0 || *i + 1 == n || rng.gen_bool(p))
        .map(|(_, pt)| *pt)
        .collect();
    Ok(Trajectory { points, origin: traj.origin, gap: None })
}

/// Poisson rate MLE: measurement count over exposure time.
pub fn estimate_lambda(traj: &Trajectory, delta_t: f64) -> Result<PoissonRate> {
    let d = traj.duration();
    if !(d > 0.0) {
        return Err(TrajError::TooShort { reason: "zero duration".into() });
    }
    PoissonRate::new(traj.len() as f64 * delta_t / d, delta_t)
}

/// Groups fixes by user, sorted by time, with repeated timestamps collapsed
/// to their first occurrence.
pub fn group_by_user(fixes: Vec<RawFix>) -> BTreeMap<String, Vec<RawFix>> {
    let mut users: BTreeMap<String, Vec<RawFix>> = BTreeMap::new();
    for f in fixes {
        users.entry(f.user_id.clone()).or_default().push(f);
    }
    for v in users.values_mut() {
        v.sort_by(|a, b| a.t.total_cmp(&b.t));
        v.dedup_by(|b, a| to_ms(a.t) == to_ms(b.t));
    }
    users
}

/// Thresholds for turning one user's raw fixes into evaluation trajectories.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PreprocessConfig {
    pub min_duration: f64,
    pub min_speed: f64,
    pub train_span: f64,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self { min_duration: 600.0, min_speed: 5.0, train_span: 300.0 }
    }
}

/// Result of preprocessing one user.
#[derive(Debug, Clone)]
pub struct UserSegments {
    pub tau: f64,
    pub n_segments_raw: usize,
    pub splits: Vec<SplitTrajectory>,
}

/// Full per-user pipeline: project, find the dominant gap, split on it,
/// filter and split train/test.
pub fn preprocess_user(fixes: &[RawFix], cfg: &PreprocessConfig) -> Result<UserSegments> {
    let first = fixes.first().ok_or(TrajError::EmptyTrajectory)?;
    let origin = GeoOrigin::new(first.lat, first.lon)?;
    let traj = project_to_local(fixes, origin)?;
    let tau = dominant_gap(&traj)?;
    let segs = split_on_gap(&traj, tau);
    let n_segments_raw = segs.len();
    let splits = filter_short(segs, cfg.min_duration, cfg.min_speed)
        .iter()
        .map(|s| train_test_split(s, cfg.train_span))
        .collect::<Result<Vec<_>>>()?;
    Ok(UserSegments { tau, n_segments_raw, splits })
}

fn parse_err(line: u64, message: impl Into<String>) -> TrajError {
    TrajError::Parse { line, message: message.into() }
}

fn check_header(rdr: &mut csv::Reader<File>, expected: &[&str]) -> Result<()> {
    let header = rdr.headers().map_err(|e| parse_err(1, e.to_string()))?;
    let got: Vec<&str> = header.iter().map(str::trim).collect();
    if got != expected {
        return Err(parse_err(1, format!("expected header {}, got {}", expected.join(","), got.join(","))));
    }
    Ok(())
}

fn parse_f64(rec: &csv::StringRecord, idx: usize, name: &str, line: u64) -> Result<f64> {
    let raw = rec.get(idx).ok_or_else(|| parse_err(line, format!("missing field {name}")))?;
    let v: f64 = raw.trim().parse().map_err(|_| parse_err(line, format!("bad {name} value {raw:?}")))?;
    if !v.is_finite() {
        return Err(parse_err(line, format!("non-finite {name}")));
    }
    Ok(v)
}

fn open_reader(path: &Path) -> Result<csv::Reader<File>> {
    Ok(csv::ReaderBuilder::new().has_headers(true).flexible(false).from_reader(File::open(path)?))
}

fn record_line(rec: &csv::StringRecord) -> u64 {
    rec.position().map_or(0, |p| p.line())
}

/// Reads a `user_id,t,lat,lon` CSV.
pub fn load_csv(path: impl AsRef<Path>) -> Result<Vec<RawFix>> {
    let mut rdr = open_reader(path.as_ref())?;
    check_header(&mut rdr, &["user_id", "t", "lat", "lon"])?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| parse_err(e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = record_line(&rec);
        let user_id = rec.get(0).unwrap_or_default().trim().to_string();
        let t = parse_f64(&rec, 1, "t", line)?;
        let lat = parse_f64(&rec, 2, "lat", line)?;
        let lon = parse_f64(&rec, 3, "lon", line)?;
        if !valid_lat_lon(lat, lon) {
            return Err(parse_err(line, format!("lat/lon out of range: {lat}, {lon}")));
        }
        out.push(RawFix { user_id, t, lat, lon });
    }
    Ok(out)
}

pub fn write_fixes_csv(fixes: &[RawFix], path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "user_id,t,lat,lon")?;
    for f in fixes {
        writeln!(w, "{},{},{},{}", f.user_id, f.t, f.lat, f.lon)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a local-frame `t,x,y` CSV.
pub fn load_local_csv(path: impl AsRef<Path>) -> Result<Trajectory> {
    let mut rdr = open_reader(path.as_ref())?;
    check_header(&mut rdr, &["t", "x", "y"])?;
    let mut points = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| parse_err(e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = record_line(&rec);
        points.push(TrackPoint {
            t: parse_f64(&rec, 0, "t", line)?,
            x: parse_f64(&rec, 1, "x", line)?,
            y: parse_f64(&rec, 2, "y", line)?,
        });
    }
    Trajectory::from_points(points)
}

/// Writes the local-frame `t,x,y` form of a trajectory.
pub fn write_csv(traj: &Trajectory, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "t,x,y")?;
    for p in traj.points() {
        writeln!(w, "{},{},{}", p.t, p.x, p.y)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform(times: &[f64]) -> Trajectory {
        Trajectory::from_points(times.iter().map(|&t| TrackPoint::new(t, t, 0.0)).collect()).unwrap()
    }

    fn haversine(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> f64 {
        let (p1, p2) = (lat1.to_radians(), lat2.to_radians());
        let dp = p2 - p1;
        let dl = (lon2 - lon1).to_radians();
        let a = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
        2.0 * EARTH_RADIUS_M * a.sqrt().asin()
    }

    fn fix(t: f64, lat: f64, lon: f64) -> RawFix {
        RawFix { user_id: "u".into(), t, lat, lon }
    }

    #[test]
    fn projection_examples() {
        let o = GeoOrigin::new(0.0, 0.0).unwrap();
        let tr = project_to_local(&[fix(0.0, 0.0, 0.0), fix(1.0, 0.001, 0.0)], o).unwrap();
        assert_eq!((tr.points()[0].x, tr.points()[0].y), (0.0, 0.0));
        let y = tr.points()[1].y;
        assert!((y - 111.195).abs() < 1e-3, "{y}");
        assert_eq!(tr.points()[1].x, 0.0);
        let h = haversine(0.0, 0.0, 0.001, 0.0);
        assert!((y - h).abs() / h < 1e-3);

        let o60 = GeoOrigin::new(60.0, 10.0).unwrap();
        let (x, _) = o60.project(60.0, 10.001);
        assert!((x - 55.597).abs() < 1e-3, "{x}");
        let h = haversine(60.0, 10.0, 60.0, 10.001);
        assert!((x - h).abs() / h < 5e-3);
    }

    #[test]
    fn projection_errors() {
        let o = GeoOrigin::new(0.0, 0.0).unwrap();
        assert!(matches!(project_to_local(&[], o), Err(TrajError::EmptyTrajectory)));
        let dup = [fix(1.0, 0.0, 0.0), fix(1.0, 0.0, 0.001)];
        assert!(matches!(project_to_local(&dup, o), Err(TrajError::DuplicateTimestamp { .. })));
        assert!(GeoOrigin::new(91.0, 0.0).is_err());
    }

    #[test]
    fn dominant_gap_examples() {
        assert_eq!(dominant_gap(&uniform(&[0., 5., 10., 15., 25.])).unwrap(), 5.0);
        assert_eq!(dominant_gap(&uniform(&[0., 5., 15., 20., 30.])).unwrap(), 5.0);
        assert_eq!(dominant_gap(&uniform(&[0., 7., 14., 23., 32., 41.])).unwrap(), 9.0);
        assert!(matches!(dominant_gap(&uniform(&[0.])), Err(TrajError::TooShort { .. })));
    }

    #[test]
    fn split_on_gap_examples() {
        let segs = split_on_gap(&uniform(&[0., 5., 10., 20., 25.]), 5.0);
        let times: Vec<Vec<f64>> = segs.iter().map(|s| s.points().iter().map(|p| p.t).collect()).collect();
        assert_eq!(times, vec![vec![0., 5., 10.], vec![20., 25.]]);
        assert!(segs.iter().all(|s| s.gap() == Some(5.0)));

        assert_eq!(split_on_gap(&uniform(&[0., 5., 10., 15.]), 5.0)[0].len(), 4);
        assert!(split_on_gap(&uniform(&[0., 7., 14.]), 5.0).is_empty());
    }

    #[test]
    fn split_on_gap_handles_decimal_gaps() {
        let times: Vec<f64> = (0..50).map(|i| i as f64 * 0.1).collect();
        let segs = split_on_gap(&uniform(&times), 0.1);
        assert_eq!(segs.len(), 1);
        assert_eq!(segs[0].len(), 50);
    }

    fn line_seg(duration: f64, speed: f64) -> Trajectory {
        let n = (duration / 5.0) as usize;
        Trajectory::from_points((0..=n).map(|i| TrackPoint::new(i as f64 * 5.0, i as f64 * 5.0 * speed, 0.0)).collect())
            .unwrap()
    }

    #[test]
    fn filter_short_examples() {
        let short =
            Trajectory::from_points(vec![TrackPoint::new(0.0, 0.0, 0.0), TrackPoint::new(599.0, 5000.0, 0.0)]).unwrap();
        assert!(filter_short(vec![short], 600.0, 5.0).is_empty());
        assert_eq!(filter_short(vec![line_seg(600.0, 5.0)], 600.0, 5.0).len(), 1);

        let circle: Vec<TrackPoint> = (0..=120)
            .map(|i| {
                let a = i as f64 / 120.0 * std::f64::consts::TAU;
                TrackPoint::new(i as f64 * 5.0, 500.0 * a.sin(), 500.0 * (1.0 - a.cos()))
            })
            .collect();
        let circle = Trajectory::from_points(circle).unwrap();
        assert!(filter_short(vec![circle], 600.0, 5.0).is_empty());
    }

    #[test]
    fn train_test_split_examples() {
        let tr = line_seg(600.0, 10.0);
        assert_eq!(tr.len(), 121);
        let s = train_test_split(&tr, 300.0).unwrap();
        assert_eq!(s.train.len(), 61);
        assert_eq!(s.test.len(), 60);
        assert_eq!((s.train.last().x, s.train.last().y), (0.0, 0.0));
        assert_eq!(s.train_end(), 300.0);

        let short = line_seg(500.0, 10.0);
        assert!(matches!(train_test_split(&short, 300.0), Err(TrajError::TooShort { .. })));
    }

    #[test]
    fn split_with_geo_origin_lands_on_zero() {
        let o = GeoOrigin::new(45.0, 7.0).unwrap();
        let fixes: Vec<RawFix> =
            (0..=130).map(|i| fix(i as f64 * 5.0, 45.0 + i as f64 * 1e-4, 7.0 + i as f64 * 2e-4)).collect();
        let s = train_test_split(&project_to_local(&fixes, o).unwrap(), 300.0).unwrap();
        assert_eq!((s.train.last().x, s.train.last().y), (0.0, 0.0));
        let new_o = s.train.origin().unwrap();
        assert!((new_o.lat - fixes[60].lat).abs() < 1e-9);
        assert!((new_o.lon - fixes[60].lon).abs() < 1e-9);
    }

    #[test]
    fn keep_probability_examples() {
        let p = keep_probability(PoissonRate::per_minute(0.5).unwrap(), 5.0).unwrap();
        assert!((p - 1.0 / 24.0).abs() < 1e-15);
        assert_eq!(keep_probability(PoissonRate::per_minute(12.0).unwrap(), 5.0).unwrap(), 1.0);
        assert!(matches!(
            keep_probability(PoissonRate::per_minute(12.5).unwrap(), 5.0),
            Err(TrajError::RateTooHigh { .. })
        ));
        assert!(matches!(
            keep_probability(PoissonRate { lambda: 0.0, delta_t: 60.0 }, 5.0),
            Err(TrajError::InvalidRate { .. })
        ));
    }

    #[test]
    fn subsample_all_kept_at_unit_probability() {
        let tr = line_seg(1200.0, 10.0);
        let s = bernoulli_subsample(&tr, PoissonRate::per_minute(12.0).unwrap(), 5.0, 1).unwrap();
        assert_eq!(s.points(), tr.points());
    }

    #[test]
    fn subsample_binomial_concentration() {
        let n_interior = 100_000usize;
        let pts: Vec<TrackPoint> = (0..n_interior + 2).map(|i| TrackPoint::new(i as f64, 0.0, 0.0)).collect();
        let tr = Trajectory::from_points(pts).unwrap();
        // p = 0.1 with tau = 1 s, delta_t = 60 s
        let rate = PoissonRate::per_minute(6.0).unwrap();
        let s = bernoulli_subsample(&tr, rate, 1.0, 42).unwrap();
        let kept = (s.len() - 2) as f64;
        let sigma = (n_interior as f64 * 0.1 * 0.9).sqrt();
        assert!((kept - 10_000.0).abs() < 3.0 * sigma, "kept {kept}");
    }

    #[test]
    fn subsample_is_deterministic() {
        let tr = line_seg(3000.0, 10.0);
        let rate = PoissonRate::per_minute(1.0).unwrap();
        let a = bernoulli_subsample(&tr, rate, 5.0, 7).unwrap();
        let b = bernoulli_subsample(&tr, rate, 5.0, 7).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn estimate_lambda_examples() {
        let tr =
            Trajectory::from_points((0..120).map(|i| TrackPoint::new(i as f64 * 3600.0 / 119.0, 0.0, 0.0)).collect())
                .unwrap();
        assert!((estimate_lambda(&tr, 60.0).unwrap().lambda - 2.0).abs() < 1e-9);
        let tr =
            Trajectory::from_points((0..61).map(|i| TrackPoint::new(i as f64 * 60.0, 0.0, 0.0)).collect()).unwrap();
        assert!((estimate_lambda(&tr, 60.0).unwrap().lambda - 61.0 * 60.0 / 3600.0).abs() < 1e-12);
        assert!(matches!(estimate_lambda(&uniform(&[3.0]), 60.0), Err(TrajError::TooShort { .. })));
    }

    #[test]
    fn csv_examples() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("h.csv");
        std::fs::write(&p, "user_id,t,lat,lon\n").unwrap();
        assert!(load_csv(&p).unwrap().is_empty());

        std::fs::write(&p, "user_id,t,lat,lon\na,0,10,10\na,1,91,10\n").unwrap();
        match load_csv(&p) {
            Err(TrajError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }

        let fixes = vec![fix(0.0, 1.234567891234, -3.5), fix(5.5, 1.25, -3.4999), fix(11.0, -1.0, 179.9)];
        write_fixes_csv(&fixes, &p).unwrap();
        assert_eq!(load_csv(&p).unwrap(), fixes);

        let local = dir.path().join("l.csv");
        let tr = line_seg(50.0, 3.3);
        write_csv(&tr, &local).unwrap();
        assert_eq!(load_local_csv(&local).unwrap().points(), tr.points());
    }

    #[test]
    fn group_by_user_sorts_and_dedups() {
        let fixes = vec![
            RawFix { user_id: "b".into(), t: 2.0, lat: 0.0, lon: 0.0 },
            RawFix { user_id: "a".into(), t: 5.0, lat: 0.0, lon: 0.0 },
            RawFix { user_id: "a".into(), t: 1.0, lat: 0.0, lon: 0.0 },
            RawFix { user_id: "a".into(), t: 5.0, lat: 1.0, lon: 0.0 },
        ];
        let g = group_by_user(fixes);
        assert_eq!(g["a"].iter().map(|f| f.t).collect::<Vec<_>>(), vec![1.0, 5.0]);
        assert_eq!(g["b"].len(), 1);
    }
}
