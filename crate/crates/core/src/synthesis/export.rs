//! Tabular export of the field's curves and a summary of its geometry.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::field::{FieldRollout, StrategyField};
use super::geometry::{ess_fixed_point, switch_line_unchecked};
use super::FieldKind;
use crate::error::Result;
use crate::model::Sample;

/// One row `t,x,u,lambda,mu,sigma`; `sigma` is the switching value that
/// drives the field (the copying mutant's for the uninvadable field).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub t: f64,
    pub x: f64,
    pub u: f64,
    pub lambda: f64,
    pub mu: f64,
    pub sigma: f64,
}

fn switching(kind: FieldKind, b: f64, c: f64, x: f64, lambda: f64, mu: f64) -> f64 {
    match kind {
        FieldKind::Cooperative => b * lambda - c * mu - x,
        FieldKind::Ess => b * lambda - x,
    }
}

/// Singular arc samples with `t ≥ 0`, thinned to at most `max_rows`.
pub fn arc_rows(field: &StrategyField, max_rows: usize) -> Vec<CurveRow> {
    let p = field.params();
    let pts: Vec<_> = field.arc_points().iter().filter(|q| q.t >= 0.0).collect();
    let stride = pts.len().div_ceil(max_rows.max(2)).max(1);
    let mut rows: Vec<CurveRow> = pts
        .iter()
        .enumerate()
        .filter(|(i, _)| i % stride == 0 || *i + 1 == pts.len())
        .map(|(_, q)| CurveRow {
            t: q.t,
            x: q.x,
            u: field.singular_control(q.x).value(),
            lambda: q.lambda,
            mu: q.mu,
            sigma: switching(field.kind(), p.b(), p.c(), q.x, q.lambda, q.mu),
        })
        .collect();
    rows.sort_by(|a, b| a.t.total_cmp(&b.t));
    rows
}

/// Field boundary over `[0, T]`: the singular arc up to the junction, then
/// `samples` points of the switch line, where the state coasts to the end.
pub fn boundary_rows(field: &StrategyField, samples: usize) -> Vec<CurveRow> {
    let p = field.params();
    let (a, b, c, horizon) = (p.a(), p.b(), p.c(), p.horizon());
    let t_hat = field.arc_end().max(0.0);
    let mut rows = if field.has_arc() {
        arc_rows(field, samples)
    } else {
        Vec::new()
    };
    let samples = samples.max(2);
    let start = usize::from(!rows.is_empty());
    rows.extend((start..samples).map(|i| {
        let t = t_hat + (horizon - t_hat) * i as f64 / (samples - 1) as f64;
        let x = switch_line_unchecked(t, p);
        let lambda = -(-a * (horizon - t)).exp_m1() / a;
        CurveRow {
            t,
            x,
            u: 0.0,
            lambda,
            mu: 0.0,
            sigma: switching(field.kind(), b, c, x, lambda, 0.0),
        }
    }));
    rows
}

fn sample_row(roll: &FieldRollout, s: &Sample) -> CurveRow {
    let cs = s.costate.expect("rollouts carry costates");
    CurveRow {
        t: s.t,
        x: s.x,
        u: s.u,
        lambda: cs.lambda,
        mu: cs.mu,
        sigma: roll.switching(s),
    }
}

/// Rollout samples thinned to at most `max_rows`, always keeping the ends.
pub fn rollout_rows(roll: &FieldRollout, max_rows: usize) -> Vec<CurveRow> {
    let s = roll.samples();
    let stride = s.len().div_ceil(max_rows.max(2)).max(1);
    s.iter()
        .enumerate()
        .filter(|(i, _)| i % stride == 0 || *i + 1 == s.len())
        .map(|(_, q)| sample_row(roll, q))
        .collect()
}

pub fn write_curve_csv<W: Write>(out: W, rows: &[CurveRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if rows.is_empty() {
        w.write_record(["t", "x", "u", "lambda", "mu", "sigma"])?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Where each tributary sits in the concatenated tributary table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TributarySpan {
    pub x0: f64,
    pub first_row: usize,
    pub rows: usize,
    pub payoff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisSummary {
    pub kind: FieldKind,
    pub params: crate::model::ModelParams,
    pub t_hat: f64,
    pub x_hat: f64,
    pub x_bar: f64,
    /// Smallest and largest singular control on the exported arc.
    pub u_sigma_range: [f64; 2],
    /// Terminal state of the coasting trajectory through the junction.
    #[serde(rename = "x_T")]
    pub x_t: f64,
    pub tributaries: Vec<TributarySpan>,
}

pub fn summarize(field: &StrategyField, arc: &[CurveRow], tributaries: Vec<TributarySpan>) -> SynthesisSummary {
    let j = field.junction();
    let (lo, hi) = arc
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| (lo.min(r.u), hi.max(r.u)));
    SynthesisSummary {
        kind: field.kind(),
        params: *field.params(),
        t_hat: j.t_hat,
        x_hat: j.x_hat,
        x_bar: ess_fixed_point(field.params()),
        u_sigma_range: if arc.is_empty() { [0.0, 0.0] } else { [lo, hi] },
        x_t: j.last_primary_terminal(field.params()),
        tributaries,
    }
}

/// Rollouts from `(x0, 1)` at `t = 0`, concatenated, with their spans.
pub fn tributary_rows(field: &StrategyField, x0s: &[f64], max_rows: usize) -> Result<(Vec<CurveRow>, Vec<TributarySpan>)> {
    let mut rows = Vec::new();
    let mut spans = Vec::new();
    for &x0 in x0s {
        let roll = field.rollout_season(x0, 1.0)?;
        let part = rollout_rows(&roll, max_rows);
        spans.push(TributarySpan {
            x0,
            first_row: rows.len(),
            rows: part.len(),
            payoff: roll.payoff(),
        });
        rows.extend(part);
    }
    Ok((rows, spans))
}
