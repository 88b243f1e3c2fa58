//! Raw GPS fixes to a train/test split, then a sparse version of the test
//! part drawn at a Poisson rate.
//!
//! cargo run --example preprocess_trajectory

use geofence_decisions::evalharness::derive_seed;
use geofence_decisions::synth::{generate_fixes, SynthKind, SynthSpec};
use geofence_decisions::trajdata::{
    bernoulli_subsample, estimate_lambda, group_by_user, preprocess_user, PoissonRate, PreprocessConfig,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = SynthSpec { kinds: vec![SynthKind::Turning], count: 3, seed: 7, ..SynthSpec::default() };
    let fixes = generate_fixes(&spec)?;
    println!("{} raw fixes", fixes.len());

    for (user, fixes) in group_by_user(fixes) {
        let segs = preprocess_user(&fixes, &PreprocessConfig::default())?;
        println!(
            "{user}: dominant gap {} s, {} raw segment(s), {} kept",
            segs.tau,
            segs.n_segments_raw,
            segs.splits.len()
        );
        for split in &segs.splits {
            let end = split.test.last();
            println!(
                "  train {} pts over {} s, test {} pts, test ends {:.0} m from the anchor",
                split.train.len(),
                split.train.duration(),
                split.test.len(),
                end.x.hypot(end.y)
            );
            for lambda in [0.5, 2.0, 8.0] {
                let rate = PoissonRate::new(lambda, 60.0)?;
                let sparse = bernoulli_subsample(&split.test, rate, segs.tau, derive_seed(42, &user))?;
                let est = estimate_lambda(&sparse, 60.0)?;
                println!(
                    "    λ = {lambda}/min: kept {} of {}, λ̂ = {:.2}/min",
                    sparse.len(),
                    split.test.len(),
                    est.lambda
                );
            }
        }
    }
    Ok(())
}
