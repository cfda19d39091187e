//! Check the homogeneity reduction for the season model.

use seasonal_ess::model::ModelParams;
use seasonal_ess::reduction::{reduce, season_report, SeasonProblem};

fn main() -> seasonal_ess::Result<()> {
    let params = ModelParams::baseline();
    let problem = SeasonProblem { params };
    let reduced = reduce(&problem)?;
    println!("reduced dimension {}", reduced.dim());
    let report = season_report(&params, 0, None)?;
    for c in &report.checks {
        println!("{:<28} {:.2e}  {}", c.name, c.error, if c.passed { "ok" } else { "FAIL" });
    }
    Ok(())
}
