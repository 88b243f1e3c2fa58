//! Realized value of one sparse trajectory: a single fence scored
//! measurement by measurement, then the whole fence grid per method.
//!
//! cargo run --example realized_value

use geofence_decisions::evalharness::{
    build_grid, derive_seed, fence_crossing, plan_predictions, score_decisions, score_grid_with_plan, subsample_split,
    EvalSettings,
};
use geofence_decisions::synth::{generate_track, SynthKind, SynthSpec};
use geofence_decisions::trajdata::train_test_split;
use geofence_decisions::{find_act_time, Geofence, Method};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = SynthSpec { kinds: vec![SynthKind::ConstantVelocity], count: 1, seed: 5, ..SynthSpec::default() };
    let (_, traj) = generate_track(&spec, 0)?;
    let dense = train_test_split(&traj, 300.0)?;
    let settings = EvalSettings::default();
    let policy = settings.policy()?;
    let sparse = subsample_split(&dense, settings.rate, derive_seed(1, "example"))?;
    println!("{} dense and {} sparse test points", dense.test.len(), sparse.test.len());

    let mid = dense.test.points()[dense.test.len() / 2];
    let fence = Geofence::square([mid.x, mid.y], settings.cell_size)?;
    let crossing = fence_crossing(&dense.test, &fence);
    println!("fence around ({:.0}, {:.0}): t_in {:?}, t_out {:?}", mid.x, mid.y, crossing.t_in, crossing.t_out);

    for method in Method::ALL {
        let plan = plan_predictions(&sparse, method, &settings.predictor)?;
        let t_hats = plan
            .predictors
            .iter()
            .map(|p| find_act_time(p, &fence, &settings.payoff, &policy).map(|o| o.t_hat))
            .collect::<Result<Vec<_>, _>>()?;
        let score = score_decisions(&plan.times, &t_hats, &crossing, &settings.payoff);
        let grid = build_grid(&dense, settings.cell_size, settings.margin)?;
        let all = score_grid_with_plan(&plan, &dense.test, &grid, &settings.payoff, &policy)?;
        println!(
            "{:<12} this fence {:>5.2} {:?}; all {} fences {:>6.2} ({} acts)",
            method.name(),
            score.v_fence_traj,
            score.per_measurement,
            grid.len(),
            all.v_s,
            all.acts
        );
    }
    Ok(())
}
