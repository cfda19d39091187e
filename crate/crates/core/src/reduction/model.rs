//! The consumer-resource season as a two-state homogeneous problem.

use super::problem::{ControlInterval, HomogeneousProblem};
use crate::model::ModelParams;

/// State `y = (p, n)`, reward `(1 - u)·p`, no terminal reward, stopped at
/// `n·(t - T) = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeasonProblem {
    pub params: ModelParams,
}

impl SeasonProblem {
    pub fn new(params: ModelParams) -> Self {
        SeasonProblem { params }
    }
}

impl HomogeneousProblem for SeasonProblem {
    fn dim(&self) -> usize {
        2
    }

    fn controls(&self) -> ControlInterval {
        ControlInterval { lower: 0.0, upper: 1.0 }
    }

    fn dynamics(&self, y: &[f64], u: f64) -> Vec<f64> {
        let (a, b, c) = (self.params.a(), self.params.b(), self.params.c());
        vec![-a * y[0] + b * y[1] * u, -c * y[1] * u]
    }

    fn reward(&self, y: &[f64], u: f64) -> f64 {
        (1.0 - u) * y[0]
    }

    fn terminal_reward(&self, _y: &[f64]) -> f64 {
        0.0
    }

    fn terminal_manifold(&self, t: f64, y: &[f64]) -> f64 {
        y[1] * (t - self.params.horizon())
    }
}
