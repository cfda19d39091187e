//! Adjoint gradient of the mutant payoff against central differences.

use seasonal_ess::game::{rollout_resident, MutantProblem, MutantSchedule};
use seasonal_ess::model::ModelParams;
use seasonal_ess::synthesis::{build_field, FieldKind};

fn main() -> seasonal_ess::Result<()> {
    let params = ModelParams::baseline();
    let ctx = rollout_resident(&build_field(FieldKind::Ess, &params)?, 0.3, 1.0)?;
    let problem = MutantProblem::new(&ctx, 40)?;
    let v: Vec<f64> = (0..40).map(|k| 0.2 + 0.6 * ((k * 7 % 11) as f64) / 10.0).collect();
    let sweep = problem.sweep(MutantSchedule::Piecewise(&v), ctx.x0())?;
    let h = 1e-5;
    for k in [0, 13, 27, 39] {
        let mut up = v.clone();
        let mut down = v.clone();
        up[k] += h;
        down[k] -= h;
        let fd = (problem.payoff(MutantSchedule::Piecewise(&up), ctx.x0())?
            - problem.payoff(MutantSchedule::Piecewise(&down), ctx.x0())?)
            / (2.0 * h);
        println!("segment {k:2}: adjoint {:+.8e}, central difference {fd:+.8e}", sweep.gradient[k]);
    }
    Ok(())
}
