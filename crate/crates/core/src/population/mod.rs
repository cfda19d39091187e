//! Monte Carlo of a population whose members each feed or lay, compared
//! with the monomorphic mixed strategy.

mod sim;
mod sweep;

pub use sim::{simulate_population, PopulationConfig, PopulationMode, PopulationOutcome};
pub use sweep::{convergence_sweep, mean_gaps, write_sweep_csv, SweepRow};
