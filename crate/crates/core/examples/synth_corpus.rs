//! Writes a synthetic corpus and runs it through the same pipeline as the
//! `geofence synth` and `geofence preprocess` commands.
//!
//! cargo run --example synth_corpus -- [out_dir]

use std::path::PathBuf;

use geofence_decisions::run::{cmd_preprocess, cmd_synth, RunConfig};
use geofence_decisions::synth::{SynthKind, SynthSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("geofence-synth"));
    let spec = SynthSpec {
        kinds: vec![SynthKind::ConstantVelocity, SynthKind::Turning, SynthKind::StopAndGo],
        count: 9,
        ..SynthSpec::default()
    };
    let cfg = RunConfig { out: out.clone(), ..RunConfig::default() };
    let raw = cmd_synth(&spec, &out, &cfg)?;
    let report = cmd_preprocess(&raw, &out.join("segments"), &cfg)?;
    for u in &report.users {
        let kept: Vec<String> =
            u.segments.iter().map(|s| format!("{} ({} + {} pts)", s.file, s.n_train, s.n_test)).collect();
        println!(
            "{}: {} fixes -> {}",
            u.user_id,
            u.n_fixes,
            if kept.is_empty() { "dropped".into() } else { kept.join(", ") }
        );
    }
    println!("{} segments under {}", report.total_segments, out.join("segments").display());
    Ok(())
}
