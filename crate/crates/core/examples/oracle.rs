//! Solve the reduced control problem on a grid and compare with the
//! cooperative field.

use seasonal_ess::model::ModelParams;
use seasonal_ess::oracle::{extract_policy_boundary, solve_reduced, ControlMesh, ReducedGridSpec};
use seasonal_ess::synthesis::{build_field, FieldKind};

fn main() -> seasonal_ess::Result<()> {
    let params = ModelParams::baseline();
    let spec = ReducedGridSpec::with_resolution(&params, 1000, 1000);
    let grid = solve_reduced(&params, &spec, &ControlMesh::default())?;
    let field = build_field(FieldKind::Cooperative, &params)?;
    for x in [0.1, 0.3, 0.6] {
        let dp = grid.value_at(0, x);
        let exact = field.rollout_season(x, 1.0)?.payoff();
        println!("x = {x}: grid {dp:.6}, field {exact:.6}, rel err {:.2e}", (dp - exact).abs() / exact);
    }
    let boundary = extract_policy_boundary(&grid);
    let (offset, _) = boundary.max_offset(0.5, 1.2, |t| field.boundary(t));
    println!("arc offset on [0.5, 1.2]: {:.2} cells", offset / grid.dx());
    let (path, payoff) = grid.follow(0.3);
    println!("followed policy: {} steps, J = {payoff:.6}", path.len());
    Ok(())
}
