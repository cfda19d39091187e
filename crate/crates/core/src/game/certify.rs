//! Invasion fitness of the best mutant and the resulting verdict.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::best_response::{best_response, BestResponse, BestResponseOptions, Method};
use super::context::{rollout_resident, ResidentContext};
use super::mutant::{MutantProblem, MutantSchedule};
use crate::error::Result;
use crate::model::ModelParams;
use crate::synthesis::{FieldKind, StrategyField};

/// Default relative certification tolerance on `ΔJ / J`.
pub const CERT_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Invadable,
    #[serde(rename = "Uninvadable-within-tolerance")]
    UninvadableWithinTolerance,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub payoff: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Final projected-gradient norm; `null` for the dp method.
    pub projected_gradient: Option<f64>,
    pub l1_distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvasionReport {
    pub kind: FieldKind,
    pub params: ModelParams,
    pub p0: f64,
    pub n0: f64,
    #[serde(rename = "J")]
    pub j: f64,
    #[serde(rename = "J_m")]
    pub j_m: f64,
    #[serde(rename = "delta_J")]
    pub delta_j: f64,
    pub verdict: Verdict,
    /// `∫ |u_m - u| dt` for the primary best response.
    pub l1_distance: f64,
    /// Largest copying-mutant switching value where the resident does not
    /// feed fully; positive values mean extra feeding pays.
    pub sigma_m_max: f64,
    pub tolerance: f64,
    /// `ΔJ` of a mutant copying the resident.
    #[serde(rename = "delta_J_copy")]
    pub delta_j_copy: f64,
    pub primary_method: Method,
    pub gradient: MethodSummary,
    pub dp: MethodSummary,
}

/// Report plus the material behind it.
#[derive(Debug, Clone)]
pub struct Certification {
    pub report: InvasionReport,
    pub context: ResidentContext,
    pub gradient: BestResponse,
    pub dp: BestResponse,
}

pub fn certify(field: &StrategyField, p0: f64, n0: f64) -> Result<Certification> {
    certify_with(field, p0, n0, CERT_TOLERANCE, &BestResponseOptions::default())
}

pub fn certify_with(
    field: &StrategyField,
    p0: f64,
    n0: f64,
    tolerance: f64,
    opts: &BestResponseOptions,
) -> Result<Certification> {
    let ctx = rollout_resident(field, p0, n0)?;
    let j = ctx.payoff();
    let prob = MutantProblem::new(&ctx, opts.segments)?;
    let j_copy = prob.payoff(MutantSchedule::FollowResident, ctx.x0())?;
    let copy = prob.sweep(MutantSchedule::FollowResident, ctx.x0())?;
    let sigma_m_max = copy
        .series
        .iter()
        .filter(|q| ctx.u_at(q.t) < 1.0)
        .map(|q| q.sigma_m)
        .fold(f64::NEG_INFINITY, f64::max);

    let gradient = best_response(&ctx, Method::Gradient, opts)?;
    let dp = best_response(&ctx, Method::Dp, opts)?;
    let summary = |br: &BestResponse| MethodSummary {
        payoff: br.payoff,
        converged: br.converged,
        iterations: br.iterations,
        projected_gradient: br.projected_gradient.is_finite().then_some(br.projected_gradient),
        l1_distance: prob.l1_distance(br.schedule.values()),
    };
    let (gs, ds) = (summary(&gradient), summary(&dp));
    let primary = if gradient.converged { Method::Gradient } else { Method::Dp };
    // the copying mutant is always among the tested schedules
    let j_m = gradient.payoff.max(dp.payoff).max(j_copy);
    let delta = j_m - j;
    let verdict = if delta <= tolerance * j {
        Verdict::UninvadableWithinTolerance
    } else {
        Verdict::Invadable
    };
    let report = InvasionReport {
        kind: field.kind(),
        params: *field.params(),
        p0,
        n0,
        j,
        j_m,
        delta_j: delta,
        verdict,
        l1_distance: if primary == Method::Gradient { gs.l1_distance } else { ds.l1_distance },
        sigma_m_max,
        tolerance,
        delta_j_copy: j_copy - j,
        primary_method: primary,
        gradient: gs,
        dp: ds,
    };
    Ok(Certification {
        report,
        context: ctx,
        gradient,
        dp,
    })
}

impl Certification {
    pub fn primary(&self) -> &BestResponse {
        match self.report.primary_method {
            Method::Gradient => &self.gradient,
            Method::Dp => &self.dp,
        }
    }

    /// Schedule table `t,u_resident,u_mutant_br` at segment midpoints, with
    /// the resident control averaged over each segment.
    pub fn write_schedules<W: Write>(&self, out: W) -> Result<()> {
        let br = &self.primary().schedule;
        let prob = MutantProblem::with_breaks(&self.context, br.breaks())?;
        let resident = prob.resident_averages();
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "u_resident", "u_mutant_br"])?;
        for (k, (&u, &v)) in resident.iter().zip(br.values()).enumerate() {
            let t = 0.5 * (br.breaks()[k] + br.breaks()[k + 1]);
            w.write_record([t.to_string(), u.to_string(), v.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}
