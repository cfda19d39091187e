//! Build both feedback fields at the baseline and print their geometry.

use seasonal_ess::model::ModelParams;
use seasonal_ess::synthesis::{build_field, ess_fixed_point, FieldKind};

fn main() -> seasonal_ess::Result<()> {
    let params = ModelParams::baseline();
    for kind in [FieldKind::Cooperative, FieldKind::Ess] {
        let field = build_field(kind, &params)?;
        let j = field.junction();
        let (arc, line) = field.junction_slopes();
        println!("{kind}: t_hat = {:.6}, x_hat = {:.6}", j.t_hat, j.x_hat);
        println!("  boundary x(0) = {:.6}, slopes at junction {arc:.6} / {line:.6}", field.boundary(0.0));
        for x0 in [0.1, 0.3, 0.6] {
            let roll = field.rollout_season(x0, 1.0)?;
            println!("  x(0) = {x0}: J = {:.8}", roll.payoff());
        }
    }
    println!("ESS fixed point x_bar = {:.9}", ess_fixed_point(&params));
    Ok(())
}
