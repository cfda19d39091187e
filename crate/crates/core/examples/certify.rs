//! Ask whether a rare mutant can invade each resident field.

use seasonal_ess::game::certify;
use seasonal_ess::model::ModelParams;
use seasonal_ess::synthesis::{build_field, FieldKind};

fn main() -> seasonal_ess::Result<()> {
    let params = ModelParams::baseline();
    for kind in [FieldKind::Cooperative, FieldKind::Ess] {
        let field = build_field(kind, &params)?;
        let cert = certify(&field, 0.3, 1.0)?;
        let r = &cert.report;
        println!(
            "{kind}: J = {:.8}, best mutant J_m = {:.8}, delta_J = {:.3e}, verdict {:?}",
            r.j, r.j_m, r.delta_j, r.verdict
        );
    }
    Ok(())
}
