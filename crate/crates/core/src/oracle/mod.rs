//! Brute-force dynamic programming on state grids.

mod boundary;
mod full;
pub(crate) mod maps;
mod reduced;

pub use boundary::{extract_policy_boundary, BoundaryPoint, PolicyBoundary};
pub use full::{solve_full, FullGridSpec, FullValueGrid};
pub use maps::StepMap;
pub use reduced::{solve_reduced, ControlMesh, PolicyStep, Probe, ProbeSummary, ReducedGridSpec, ValueGrid};
