//! Field of extremals: switch line, singular arcs, tributaries, and the
//! feedback strategy fields assembled from them.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

pub mod arc;
pub mod export;
pub mod field;
pub mod geometry;
pub mod hjb;
pub mod lambert;
pub mod tributary;

pub use arc::{arc_curve, integrate_singular_arc, ArcPoint, SampledCurve};
pub use export::{
    arc_rows, boundary_rows, rollout_rows, summarize, tributary_rows, write_curve_csv, CurveRow, SynthesisSummary,
    TributarySpan,
};
pub use field::{build_field, switch_line_field, FieldRollout, Regime, StrategyField};
pub use geometry::{
    coop_singular_control, ess_control_ceiling, ess_fixed_point, ess_singular_control, junction,
    junction_point, last_primary, switch_line, switch_line_slope, Junction,
};
pub use hjb::{hjb_residual, HjbGrid, HjbReport};
pub use tributary::{sigma_on_u0_tributary, verify_tributary_sign, AnchorKind, TributaryAnchor, TributaryReport};

/// Which singular arc the field is built on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldKind {
    /// Maximizes the payoff of a monomorphic population.
    #[serde(rename = "coop")]
    Cooperative,
    /// Uninvadable by any mutant schedule.
    Ess,
}

impl fmt::Display for FieldKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FieldKind::Cooperative => "coop",
            FieldKind::Ess => "ess",
        })
    }
}

impl FromStr for FieldKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s.to_ascii_lowercase().as_str() {
            "coop" | "cooperative" => Ok(FieldKind::Cooperative),
            "ess" => Ok(FieldKind::Ess),
            other => Err(Error::Config(format!("unknown field kind `{other}` (expected coop or ess)"))),
        }
    }
}
