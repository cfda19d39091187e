//! Mutant best responses, invasion fitness and certification of resident
//! strategy fields.

pub mod best_response;
pub mod certify;
pub mod context;
pub mod mutant;

pub use best_response::{best_response, BestResponse, BestResponseOptions, Method};
pub use certify::{certify, certify_with, Certification, InvasionReport, MethodSummary, Verdict, CERT_TOLERANCE};
pub use context::{rollout_resident, ResidentContext, ResidentPoint};
pub use mutant::{mutant_adjoint_sweep, mutant_payoff, MutantPoint, MutantProblem, MutantSchedule, MutantSweep};
