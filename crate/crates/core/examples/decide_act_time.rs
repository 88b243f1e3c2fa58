//! Act thresholds for the two payoff presets, the Poisson prediction cutoff,
//! and the act time for a fence on the road ahead.
//!
//! cargo run --example decide_act_time

use geofence_decisions::decide::{act_threshold, find_act_time, poisson_cutoff, prob_measurement_by, CutoffPolicy};
use geofence_decisions::predict::{fit, Method, PredictorConfig};
use geofence_decisions::{Geofence, PayoffMatrix, PoissonRate, TrackPoint};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for (name, m) in [("advertising", PayoffMatrix::ADVERTISING), ("alert-zone", PayoffMatrix::ALERT_ZONE)] {
        println!("{name}: act when P(inside) > {:.4}", act_threshold(&m)?);
    }

    println!("\ncutoff t* by epsilon and lambda (per minute)");
    for eps in [0.1, 0.2, 0.5] {
        let row: Vec<String> = [0.25, 0.5, 1.0, 2.0]
            .iter()
            .map(|l| {
                let p = CutoffPolicy::new(eps, PoissonRate::new(*l, 60.0).unwrap(), 1.0).unwrap();
                format!("{:7.1}", poisson_cutoff(&p))
            })
            .collect();
        println!("  eps {eps}: {}", row.join(" "));
    }

    // 20 m/s due east, sampled every 15 s over the last five minutes
    let history: Vec<TrackPoint> =
        (0..=20).map(|i| TrackPoint::new(i as f64 * 15.0 - 300.0, 20.0 * (i as f64 * 15.0 - 300.0), 0.0)).collect();
    let policy = CutoffPolicy::new(0.2, PoissonRate::new(0.5, 60.0)?, 1.0)?;
    let t_star = poisson_cutoff(&policy);
    println!("\nP(next fix within t* = {t_star:.1} s) = {:.3}", prob_measurement_by(&policy, t_star));
    let cfg = PredictorConfig::default();
    for center in [1000.0, 3000.0, 6000.0] {
        let fence = Geofence::square([center, 0.0], 1000.0)?;
        for method in Method::ALL {
            let p = fit(&history, 0.0, &cfg, method)?;
            let out = find_act_time(&p, &fence, &PayoffMatrix::ADVERTISING, &policy)?;
            let when = out.t_hat.map_or("wait".to_string(), |t| format!("act at +{t} s"));
            println!("fence at {center:>5} m, {:<12} {when} (p = {:.3})", method.name(), out.p_at_act);
        }
    }
    Ok(())
}
