//! Finite-difference HJB residual of the cooperative field.

use seasonal_ess::model::ModelParams;
use seasonal_ess::synthesis::{build_field, hjb_residual, FieldKind, HjbGrid};

fn main() -> seasonal_ess::Result<()> {
    let field = build_field(FieldKind::Cooperative, &ModelParams::baseline())?;
    let grid = HjbGrid::standard(&field);
    let r = hjb_residual(&field, &grid)?;
    println!(
        "{} interior nodes, max residual {:.3e}, argmax agreement {:.3}",
        r.interior_nodes, r.max_residual, r.argmax_agreement
    );
    Ok(())
}
