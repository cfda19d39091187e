//! Mutant best response against a frozen resident history.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::context::ResidentContext;
use super::mutant::{MutantProblem, MutantSchedule};
use crate::error::{Error, Result};
use crate::model::PiecewiseConstant;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Gradient,
    Dp,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BestResponseOptions {
    pub segments: usize,
    pub max_iterations: usize,
    /// Stop when `max_k |P(v_k + g_k / h_k) - v_k|` falls below this.
    pub tolerance: f64,
    pub dp_nodes: usize,
    pub dp_controls: usize,
}

impl Default for BestResponseOptions {
    fn default() -> Self {
        BestResponseOptions {
            segments: 2000,
            max_iterations: 5000,
            tolerance: 1e-6,
            dp_nodes: 2000,
            dp_controls: 21,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BestResponse {
    pub method: Method,
    pub schedule: PiecewiseConstant,
    pub payoff: f64,
    pub converged: bool,
    pub iterations: usize,
    pub projected_gradient: f64,
}

pub fn best_response(ctx: &ResidentContext, method: Method, opts: &BestResponseOptions) -> Result<BestResponse> {
    let prob = MutantProblem::new(ctx, opts.segments)?;
    match method {
        Method::Gradient => projected_ascent(&prob, opts),
        Method::Dp => backward_induction(&prob, opts),
    }
}

/// Largest projected step `|P(v + g/h) - v|`.
fn projected_norm(v: &[f64], g: &[f64], h: &[f64]) -> f64 {
    v.iter()
        .zip(g)
        .zip(h)
        .map(|((v, g), h)| ((v + g / h).clamp(0.0, 1.0) - v).abs())
        .fold(0.0, f64::max)
}

/// Spectral projected gradient with a nonmonotone Armijo search.
fn projected_ascent(prob: &MutantProblem, opts: &BestResponseOptions) -> Result<BestResponse> {
    const MEMORY: usize = 10;
    let x0 = prob.context().x0();
    let h = prob.widths();
    let mut v = vec![0.5; prob.segments()];
    let mut sw = prob.sweep(MutantSchedule::Piecewise(&v), x0)?;
    let mut history = vec![sw.payoff];
    let mut alpha = 1.0;
    let mut pg = projected_norm(&v, &sw.gradient, &h);
    let mut it = 0;
    while pg > opts.tolerance && it < opts.max_iterations {
        it += 1;
        let step: Vec<f64> = v
            .iter()
            .zip(&sw.gradient)
            .zip(&h)
            .map(|((v, g), h)| (v + alpha * g / h).clamp(0.0, 1.0) - v)
            .collect();
        let slope: f64 = step.iter().zip(&sw.gradient).map(|(s, g)| s * g).sum();
        let reference = history.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut lam = 1.0;
        let (v_new, sw_new) = loop {
            let trial: Vec<f64> = v.iter().zip(&step).map(|(v, s)| (v + lam * s).clamp(0.0, 1.0)).collect();
            let trial_sw = prob.sweep(MutantSchedule::Piecewise(&trial), x0)?;
            if trial_sw.payoff >= reference + 1e-4 * lam * slope || lam < 1e-10 {
                break (trial, trial_sw);
            }
            lam *= 0.5;
        };
        let mut ss = 0.0;
        let mut sy = 0.0;
        for k in 0..v.len() {
            let s = v_new[k] - v[k];
            let y = (sw_new.gradient[k] - sw.gradient[k]) / h[k];
            ss += h[k] * s * s;
            sy += h[k] * s * y;
        }
        alpha = if sy < 0.0 { (ss / -sy).clamp(1e-8, 1e8) } else { 1e8 };
        v = v_new;
        sw = sw_new;
        history.push(sw.payoff);
        if history.len() > MEMORY {
            history.remove(0);
        }
        pg = projected_norm(&v, &sw.gradient, &h);
    }
    Ok(BestResponse {
        method: Method::Gradient,
        payoff: sw.payoff,
        schedule: prob.schedule(v)?,
        converged: pg <= opts.tolerance,
        iterations: it,
        projected_gradient: pg,
    })
}

/// Exact affine segment maps: with constant `u_m = v` on segment `k`,
/// `p_end = A p + v B_k` and `∫ p dt = C p + v D_k`.
struct SegmentMap {
    decay: f64,
    gain: f64,
    mass: f64,
    load: f64,
}

fn segment_maps(prob: &MutantProblem) -> Vec<SegmentMap> {
    let prm = prob.context().params();
    let (a, b) = (prm.a(), prm.b());
    let widths = prob.widths();
    let mut maps: Vec<SegmentMap> = widths
        .iter()
        .map(|&w| SegmentMap {
            decay: (-a * w).exp(),
            gain: 0.0,
            mass: -(-a * w).exp_m1() / a,
            load: 0.0,
        })
        .collect();
    let mut seg = usize::MAX;
    let mut y = [0.0, 0.0];
    for pc in &prob.pieces {
        if pc.seg != seg {
            if seg != usize::MAX {
                maps[seg].gain = y[0];
                maps[seg].load = y[1];
            }
            seg = pc.seg;
            y = [0.0, 0.0];
        }
        let (lo, hh) = (pc.lo, pc.hi - pc.lo);
        let f = |t: f64, y: &[f64; 2]| {
            let s = (t - lo) / hh;
            let n = if s < 0.25 { pc.n[0] } else if s < 0.75 { pc.n[1] } else { pc.n[2] };
            [-a * y[0] + b * n, y[0]]
        };
        y = crate::model::rk4_step(&f, lo, &y, hh);
    }
    maps[seg].gain = y[0];
    maps[seg].load = y[1];
    maps
}

fn interp(values: &[f64], dp: f64, p: f64) -> f64 {
    let s = (p / dp).max(0.0);
    let last = values.len() - 1;
    let i = (s.floor() as usize).min(last - 1);
    let w = (s - i as f64).min(1.0);
    values[i] * (1.0 - w) + values[i + 1] * w
}

/// Backward induction over `(segment, p_m)` with the resident frozen,
/// followed by a forward pass that re-maximizes at the realized state.
fn backward_induction(prob: &MutantProblem, opts: &BestResponseOptions) -> Result<BestResponse> {
    if opts.dp_nodes < 2 || opts.dp_controls < 2 {
        return Err(Error::Config("dp needs at least two nodes and two controls".into()));
    }
    let maps = segment_maps(prob);
    let ctx = prob.context();
    let p_start = ctx.x0() * ctx.n0();
    let p_max = (p_start + maps.iter().map(|m| m.gain).sum::<f64>()) * (1.0 + 1e-9) + 1e-12;
    let m = opts.dp_nodes;
    let dp = p_max / (m - 1) as f64;
    let controls: Vec<f64> = (0..opts.dp_controls)
        .map(|i| i as f64 / (opts.dp_controls - 1) as f64)
        .collect();
    let q = |map: &SegmentMap, next: &[f64], p: f64, v: f64| {
        (1.0 - v) * (map.mass * p + v * map.load) + interp(next, dp, map.decay * p + v * map.gain)
    };
    let k = maps.len();
    let mut values: Vec<Vec<f64>> = vec![Vec::new(); k + 1];
    values[k] = vec![0.0; m];
    for s in (0..k).rev() {
        let next = &values[s + 1];
        let map = &maps[s];
        let row: Vec<f64> = (0..m)
            .into_par_iter()
            .map(|j| {
                let p = dp * j as f64;
                controls.iter().map(|&v| q(map, next, p, v)).fold(f64::NEG_INFINITY, f64::max)
            })
            .collect();
        values[s] = row;
    }
    let mut p = p_start;
    let mut schedule = Vec::with_capacity(k);
    for s in 0..k {
        let map = &maps[s];
        let mut best = (f64::NEG_INFINITY, 0.0);
        for &v in &controls {
            let val = q(map, &values[s + 1], p, v);
            if val > best.0 {
                best = (val, v);
            }
        }
        schedule.push(best.1);
        p = map.decay * p + best.1 * map.gain;
    }
    let payoff = prob.payoff(MutantSchedule::Piecewise(&schedule), ctx.x0())?;
    Ok(BestResponse {
        method: Method::Dp,
        payoff,
        schedule: prob.schedule(schedule)?,
        converged: true,
        iterations: k,
        projected_gradient: f64::NAN,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::rollout_resident;
    use crate::model::ModelParams;
    use crate::synthesis::{build_field, switch_line_field, FieldKind};

    fn ctx(kind: FieldKind, x0: f64) -> ResidentContext {
        let f = build_field(kind, &ModelParams::baseline()).unwrap();
        rollout_resident(&f, x0, 1.0).unwrap()
    }

    #[test]
    fn segment_maps_reproduce_payoff() {
        let c = ctx(FieldKind::Cooperative, 0.3);
        let prob = MutantProblem::new(&c, 100).unwrap();
        let maps = segment_maps(&prob);
        let v: Vec<f64> = (0..100).map(|k| (k % 7) as f64 / 6.0).collect();
        let mut p = c.x0();
        let mut j = 0.0;
        for (map, &u) in maps.iter().zip(&v) {
            j += (1.0 - u) * (map.mass * p + u * map.load);
            p = map.decay * p + u * map.gain;
        }
        let direct = prob.payoff(MutantSchedule::Piecewise(&v), c.x0()).unwrap();
        assert!((j - direct).abs() < 1e-12, "{j} vs {direct}");
    }

    #[test]
    fn methods_agree_and_coop_is_invaded() {
        let c = ctx(FieldKind::Cooperative, 0.3);
        let opts = BestResponseOptions::default();
        let g = best_response(&c, Method::Gradient, &opts).unwrap();
        let d = best_response(&c, Method::Dp, &opts).unwrap();
        assert!(g.converged, "{} {}", g.iterations, g.projected_gradient);
        assert!((g.payoff - d.payoff).abs() <= 5e-3 * g.payoff);
        assert!(g.payoff > c.payoff() * 1.01);
        // feeds fully somewhere in the singular phase
        let t_hat = c.field().junction().t_hat;
        let s = &g.schedule;
        let feeding_late = (0..s.segments())
            .filter(|&k| s.breaks()[k] > 0.3 && s.breaks()[k + 1] < t_hat)
            .any(|k| s.values()[k] == 1.0);
        assert!(feeding_late);
    }

    #[test]
    fn ess_best_response_copies_resident() {
        let c = ctx(FieldKind::Ess, 0.3);
        let opts = BestResponseOptions::default();
        let g = best_response(&c, Method::Gradient, &opts).unwrap();
        let prob = MutantProblem::new(&c, opts.segments).unwrap();
        let l1 = prob.l1_distance(g.schedule.values());
        assert!(l1 <= 1e-2 * 2.0, "l1 = {l1}");
        assert!((g.payoff - c.payoff()).abs() <= 1e-3 * c.payoff());
        let d = best_response(&c, Method::Dp, &opts).unwrap();
        assert!((g.payoff - d.payoff).abs() <= 5e-3 * g.payoff);
    }

    #[test]
    fn short_season_best_response_switches_once() {
        let p = ModelParams::baseline().with_horizon(0.6).unwrap();
        let f = switch_line_field(FieldKind::Ess, &p).unwrap();
        let c = rollout_resident(&f, 0.1, 1.0).unwrap();
        let opts = BestResponseOptions {
            segments: 300,
            dp_nodes: 1000,
            ..Default::default()
        };
        for method in [Method::Dp, Method::Gradient] {
            // bang-bang at segment resolution: feed, then coast, with at most
            // the switching segment fractional
            let br = best_response(&c, method, &opts).unwrap();
            let v = br.schedule.values();
            assert!(v.windows(2).all(|w| w[1] <= w[0]), "{method:?}");
            let fractional = v.iter().filter(|&&u| u > 0.0 && u < 1.0).count();
            assert!(fractional <= 1, "{method:?}: {fractional}");
            assert_eq!(v[0], 1.0);
            assert_eq!(*v.last().unwrap(), 0.0);
        }
    }
}
