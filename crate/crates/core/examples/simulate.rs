//! Roll the ESS field forward and print a coarse trajectory with costates.

use seasonal_ess::model::ModelParams;
use seasonal_ess::synthesis::{build_field, FieldKind};

fn main() -> seasonal_ess::Result<()> {
    let field = build_field(FieldKind::Ess, &ModelParams::baseline())?;
    let roll = field.rollout(0.3, 1.0, 0.0, 1e-3)?;
    println!("{:>6} {:>9} {:>6} {:>9} {:>9}", "t", "x", "u", "p", "sigma");
    for s in roll.samples().iter().step_by(100) {
        println!("{:6.3} {:9.5} {:6.3} {:9.5} {:9.5}", s.t, s.x, s.u, s.p, roll.switching(s));
    }
    println!("J = {:.10}", roll.payoff());
    Ok(())
}
