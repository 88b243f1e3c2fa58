//! A λ sweep over a small synthetic corpus, printed as CSV.
//!
//! cargo run --release --example parameter_sweep

use geofence_decisions::evalharness::{run_sweep, sweep_csv, CorpusEntry, EvalSettings, SweepParam, SweepSpec};
use geofence_decisions::synth::{generate_local, SynthSpec};
use geofence_decisions::trajdata::train_test_split;
use geofence_decisions::Method;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = SynthSpec { count: 8, duration: 900.0, ..SynthSpec::default() };
    let corpus = generate_local(&spec)?
        .iter()
        .enumerate()
        .map(|(i, t)| Ok(CorpusEntry { id: format!("synth-{i:04}"), split: train_test_split(t, 300.0)? }))
        .collect::<Result<Vec<_>, geofence_decisions::trajdata::TrajError>>()?;
    let sweep = SweepSpec {
        param: SweepParam::Lambda,
        values: vec![0.25, 1.0, 4.0],
        base: EvalSettings::default(),
        methods: Method::ALL.to_vec(),
        master_seed: 1,
    };
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get());
    print!("{}", sweep_csv(&run_sweep(&corpus, &sweep, workers)?));
    Ok(())
}
