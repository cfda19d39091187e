//! Dimension reduction for control problems homogeneous of degree one in
//! the state.

mod model;
mod problem;
mod verify;

pub use model::SeasonProblem;
pub use problem::{
    check_homogeneity, reduce, ControlInterval, HomogeneityReport, HomogeneousProblem, ProbeSpec, ReducedProblem,
    Violation, HOMOGENEITY_TOLERANCE,
};
pub use verify::{
    schedule_identity, season_identities, season_report, season_value_homogeneity, verify_value_homogeneity,
    CheckEntry, ReductionReport, ScheduleIdentity, SeasonIdentities, ValueGrids, ValueHomogeneity, ValueProbe,
};
