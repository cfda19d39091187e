use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::{ModelParams, Sample};
use crate::synthesis::{FieldRollout, StrategyField};

/// Realized resident history: the open-loop environment a mutant faces.
#[derive(Debug, Clone)]
pub struct ResidentContext {
    rollout: FieldRollout,
    p0: f64,
    n0: f64,
}

/// One row of a resident history.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidentPoint {
    pub t: f64,
    pub u: f64,
    pub n: f64,
    pub x: f64,
}

/// Rolls the field out over the season at the default step.
pub fn rollout_resident(field: &StrategyField, p0: f64, n0: f64) -> Result<ResidentContext> {
    Ok(ResidentContext {
        rollout: field.rollout_season(p0, n0)?,
        p0,
        n0,
    })
}

impl ResidentContext {
    pub fn from_rollout(rollout: FieldRollout) -> Self {
        let s = rollout.samples()[0];
        ResidentContext {
            p0: s.p,
            n0: s.n,
            rollout,
        }
    }

    pub fn params(&self) -> &ModelParams {
        self.rollout.field().params()
    }

    pub fn field(&self) -> &StrategyField {
        self.rollout.field()
    }

    pub fn rollout(&self) -> &FieldRollout {
        &self.rollout
    }

    pub fn samples(&self) -> &[Sample] {
        self.rollout.samples()
    }

    pub fn p0(&self) -> f64 {
        self.p0
    }

    pub fn n0(&self) -> f64 {
        self.n0
    }

    pub fn x0(&self) -> f64 {
        self.p0 / self.n0
    }

    /// Resident payoff `J`.
    pub fn payoff(&self) -> f64 {
        self.rollout.payoff()
    }

    pub fn history(&self) -> Vec<ResidentPoint> {
        self.samples()
            .iter()
            .map(|s| ResidentPoint {
                t: s.t,
                u: s.u,
                n: s.n,
                x: s.x,
            })
            .collect()
    }

    /// Resource and resident control at `t` inside resident interval `k`.
    pub fn state_in(&self, k: usize, t: f64) -> (f64, f64) {
        let (_, n) = self.rollout.dense(k, t);
        (n, self.rollout.control_in(k, t))
    }

    pub fn n_at(&self, t: f64) -> f64 {
        self.state_in(self.rollout.interval_at(t), t).0
    }

    pub fn u_at(&self, t: f64) -> f64 {
        self.state_in(self.rollout.interval_at(t), t).1
    }

    pub fn x_at(&self, t: f64) -> f64 {
        let (p, n) = self.rollout.dense(self.rollout.interval_at(t), t);
        p / n
    }
}
