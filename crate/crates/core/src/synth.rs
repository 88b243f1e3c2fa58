//! Synthetic driving trajectories.
//!
//! Three motion models are available: constant velocity, piecewise turning,
//! and stop-and-go. Positions are sampled every `tau` seconds with isotropic
//! Gaussian jitter. Generation is fully determined by the seed.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::trajdata::{GeoOrigin, RawFix, TrackPoint, Trajectory};

#[derive(Debug, Error, Clone, PartialEq)]
#[error("invalid synth spec: {0}")]
pub struct ConfigError(pub String);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SynthKind {
    ConstantVelocity,
    Turning,
    StopAndGo,
}

impl std::str::FromStr for SynthKind {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, ConfigError> {
        match s {
            "constant-velocity" | "cv" => Ok(SynthKind::ConstantVelocity),
            "turning" => Ok(SynthKind::Turning),
            "stop-and-go" => Ok(SynthKind::StopAndGo),
            _ => Err(ConfigError(format!("unknown kind {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub kinds: Vec<SynthKind>,
    pub count: usize,
    /// Cruise speed range in m/s; each track draws uniformly from it.
    pub speed: (f64, f64),
    /// Fixed heading in degrees counter-clockwise from east, or random.
    pub heading_deg: Option<f64>,
    pub duration: f64,
    pub tau: f64,
    /// Standard deviation of position noise, meters.
    pub jitter: f64,
    pub seed: u64,
    pub origin: GeoOrigin,
    pub start_time: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            kinds: vec![SynthKind::ConstantVelocity, SynthKind::Turning],
            count: 50,
            speed: (10.0, 30.0),
            heading_deg: None,
            duration: 1200.0,
            tau: 5.0,
            jitter: 3.0,
            seed: 1,
            origin: GeoOrigin { lat: 40.0, lon: -75.0 },
            start_time: 1_559_347_200.0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError(m.into()));
        if self.kinds.is_empty() {
            return bad("no trajectory kinds");
        }
        if self.count == 0 {
            return bad("count must be positive");
        }
        if !(self.speed.0 >= 0.0 && self.speed.1 >= self.speed.0 && self.speed.1.is_finite()) {
            return bad("speed range must satisfy 0 <= min <= max");
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return bad("duration must be positive");
        }
        if !(self.tau > 0.0 && self.tau <= self.duration) {
            return bad("tau must be in (0, duration]");
        }
        if !(self.jitter >= 0.0 && self.jitter.is_finite()) {
            return bad("jitter must be non-negative");
        }
        Ok(())
    }
}

/// Noise-free positions for one track.
fn trace(kind: SynthKind, speed: f64, heading: f64, n: usize, tau: f64, rng: &mut ChaCha8Rng) -> Vec<TrackPoint> {
    let mut out = Vec::with_capacity(n);
    let (mut x, mut y, mut h) = (0.0f64, 0.0f64, heading);
    // turning: a turn of random size spread over 20 s, then straight for a while
    let mut next_turn = rng.gen_range(60.0..180.0);
    let mut turn_rate = 0.0f64;
    let mut turn_left = 0.0f64;
    let cycle = 150.0;
    let stop = 30.0;
    for i in 0..n {
        let t = i as f64 * tau;
        out.push(TrackPoint::new(t, x, y));
        let mut v = speed;
        match kind {
            SynthKind::ConstantVelocity => {}
            SynthKind::Turning => {
                if turn_left <= 0.0 && t >= next_turn {
                    let angle = rng.gen_range(30.0f64..100.0).to_radians() * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                    turn_left = 20.0;
                    turn_rate = angle / 20.0;
                    next_turn = t + 20.0 + rng.gen_range(60.0..180.0);
                }
                if turn_left > 0.0 {
                    h += turn_rate * tau;
                    turn_left -= tau;
                }
            }
            SynthKind::StopAndGo => {
                if t % cycle >= cycle - stop {
                    v = 0.0;
                }
            }
        }
        x += v * tau * h.cos();
        y += v * tau * h.sin();
    }
    out
}

/// One synthetic track: the noise-free positions and the jittered trajectory.
pub fn generate_track(spec: &SynthSpec, index: usize) -> Result<(Vec<TrackPoint>, Trajectory), ConfigError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ (index as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    let kind = spec.kinds[index % spec.kinds.len()];
    let speed = if spec.speed.1 > spec.speed.0 { rng.gen_range(spec.speed.0..=spec.speed.1) } else { spec.speed.0 };
    let heading = match spec.heading_deg {
        Some(d) => d.to_radians(),
        None => rng.gen_range(0.0..std::f64::consts::TAU),
    };
    let n = (spec.duration / spec.tau + 1e-9).floor() as usize + 1;
    let truth = trace(kind, speed, heading, n, spec.tau, &mut rng);
    let noise = Normal::new(0.0, spec.jitter.max(f64::MIN_POSITIVE)).map_err(|e| ConfigError(e.to_string()))?;
    let noisy = truth
        .iter()
        .map(|p| {
            let (dx, dy) =
                if spec.jitter > 0.0 { (noise.sample(&mut rng), noise.sample(&mut rng)) } else { (0.0, 0.0) };
            TrackPoint::new(p.t, p.x + dx, p.y + dy)
        })
        .collect();
    let traj = Trajectory::from_points(noisy).map_err(|e| ConfigError(e.to_string()))?;
    Ok((truth, traj))
}

/// Local-frame corpus.
pub fn generate_local(spec: &SynthSpec) -> Result<Vec<Trajectory>, ConfigError> {
    (0..spec.count).map(|i| generate_track(spec, i).map(|(_, t)| t)).collect()
}

/// Corpus as raw fixes, one user per track, placed around `spec.origin`.
pub fn generate_fixes(spec: &SynthSpec) -> Result<Vec<RawFix>, ConfigError> {
    let mut out = Vec::new();
    for (i, traj) in generate_local(spec)?.iter().enumerate() {
        let user_id = format!("synth-{i:04}");
        for p in traj.points() {
            let (lat, lon) = spec.origin.unproject(p.x, p.y);
            out.push(RawFix { user_id: user_id.clone(), t: spec.start_time + p.t, lat, lon });
        }
    }
    Ok(out)
}
