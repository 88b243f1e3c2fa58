//! Fits the three predictors on the same sparse history and compares their
//! forecasts against where the vehicle actually went.
//!
//! cargo run --example gp_prediction

use geofence_decisions::predict::{fit, predict, Method, PredictorConfig};
use geofence_decisions::synth::{generate_track, SynthKind, SynthSpec};
use geofence_decisions::trajdata::bernoulli_subsample;
use geofence_decisions::PoissonRate;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = SynthSpec { kinds: vec![SynthKind::Turning], count: 1, seed: 3, ..SynthSpec::default() };
    let (truth, noisy) = generate_track(&spec, 0)?;
    let sparse = bernoulli_subsample(&noisy, PoissonRate::new(4.0, 60.0)?, spec.tau, 1)?;

    // anchor at the last sparse fix before t = 600 s
    let history: Vec<_> = sparse.points().iter().copied().filter(|p| p.t <= 600.0).collect();
    let t0 = history.last().expect("sparse history").t;
    let cfg = PredictorConfig::default();
    println!(
        "anchor t0 = {t0} s, {} fixes in the last {} s",
        history.iter().filter(|p| p.t >= t0 - cfg.lookback).count(),
        cfg.lookback
    );

    for method in Method::ALL {
        let p = fit(&history, t0, &cfg, method)?;
        println!("\n{}", method.name());
        if let Some(d) = p.diagnostics().axes {
            for (axis, a) in ["x", "y"].iter().zip(d.iter()) {
                println!(
                    "  {axis}: sigma_f {:.1} m, length {:.1} s, lml {:.2}",
                    a.sigma_f, a.length_scale, a.log_marginal_likelihood
                );
            }
        }
        for dt in [0.0, 30.0, 60.0, 120.0, 190.0] {
            let g = predict(&p, dt);
            let actual = truth.iter().min_by(|a, b| (a.t - t0 - dt).abs().total_cmp(&(b.t - t0 - dt).abs())).unwrap();
            let err = (g.mean[0] - actual.x).hypot(g.mean[1] - actual.y);
            println!("  +{dt:>5} s  error {err:>7.1} m  std ({:>6.1}, {:>6.1}) m", g.std[0], g.std[1]);
        }
    }
    Ok(())
}
