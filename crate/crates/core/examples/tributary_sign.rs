//! Sign of the switching function on coasting arcs that end on the boundary.

use seasonal_ess::model::ModelParams;
use seasonal_ess::synthesis::{build_field, verify_tributary_sign, FieldKind, TributaryAnchor};

fn main() -> seasonal_ess::Result<()> {
    let params = ModelParams::baseline();
    let field = build_field(FieldKind::Cooperative, &params)?;
    let t_hat = field.junction().t_hat;
    let mut anchors = vec![TributaryAnchor::on_switch_line(1.6, &params)];
    for t in [0.3, 0.8, t_hat - 0.05] {
        anchors.push(TributaryAnchor::on_coop_arc(t, field.boundary(t), &params));
    }
    for anchor in anchors {
        let r = verify_tributary_sign(&anchor, &params)?;
        println!(
            "{:?} at t = {:.3}: max L = {:.3e}, min sigma = {:.3e}, passes {}",
            anchor.kind, anchor.t_s, r.max_l, r.min_sigma, r.passes()
        );
    }
    Ok(())
}
