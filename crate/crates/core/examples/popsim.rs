//! Finite population following the ESS schedule, under both lottery modes.

use seasonal_ess::game::rollout_resident;
use seasonal_ess::model::ModelParams;
use seasonal_ess::population::{simulate_population, PopulationConfig, PopulationMode};
use seasonal_ess::synthesis::{build_field, FieldKind};

fn main() -> seasonal_ess::Result<()> {
    let params = ModelParams::baseline();
    let ctx = rollout_resident(&build_field(FieldKind::Ess, &params)?, 0.3, 1.0)?;
    let target = |t: f64| ctx.u_at(t);
    for mode in [PopulationMode::RandomRedraw, PopulationMode::FixedSplit] {
        let cfg = PopulationConfig {
            size: 2000,
            tau: params.horizon() / 2000.0,
            mode,
            seed: 1,
            p0: 0.3,
            n0: 1.0,
        };
        let o = simulate_population(&target, &params, &cfg)?;
        println!("{mode}: F = {:.6}, J_agg = {:.6}, gap = {:.3e}", o.offspring, o.aggregate_payoff, o.gap);
    }
    Ok(())
}
