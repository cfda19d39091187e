//! Backward induction for the unreduced value `V(t, p, n)` on a
//! `(p, ln n)` grid.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::maps::StepMap;
use super::reduced::{ControlMesh, ReducedGridSpec};
use crate::error::{Error, Result};
use crate::model::ModelParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FullGridSpec {
    pub nt: usize,
    pub np: usize,
    pub nn: usize,
    pub p_max: f64,
    pub n_min: f64,
    pub n_max: f64,
}

impl FullGridSpec {
    /// Grid holding every optimal trajectory from initial resources in
    /// `[n_lo, n_hi]` with `p/n` at most `b/(4a)`.
    pub fn covering(params: &ModelParams, n_lo: f64, n_hi: f64, nt: usize, np: usize, nn: usize) -> Self {
        FullGridSpec {
            nt,
            np,
            nn,
            p_max: 1.05 * ReducedGridSpec::min_x_max(params) * n_hi,
            n_min: n_lo * (-params.c() * params.horizon()).exp(),
            n_max: n_hi,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.nt > 0
            && self.np >= 2
            && self.nn >= 2
            && self.p_max.is_finite()
            && self.p_max > 0.0
            && self.n_min > 0.0
            && self.n_max.is_finite()
            && self.n_max > self.n_min;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("bad full grid {self:?}")))
        }
    }

    fn dp(&self) -> f64 {
        self.p_max / (self.np - 1) as f64
    }

    fn dlog(&self) -> f64 {
        (self.n_max / self.n_min).ln() / (self.nn - 1) as f64
    }
}

/// Initial and terminal slices of the solved value, indexed `[k * np + j]`
/// for resource node `k` and energy node `j`.
#[derive(Debug, Clone)]
pub struct FullValueGrid {
    params: ModelParams,
    spec: FullGridSpec,
    initial: Vec<f64>,
    terminal: Vec<f64>,
    min_value: f64,
    clamped: usize,
}

/// Bilinear read; returns the value and whether the point left the grid.
#[inline]
fn bilinear(v: &[f64], np: usize, nn: usize, sp: f64, sn: f64) -> (f64, bool) {
    let out = sp > (np - 1) as f64 + 1e-9 || sn < -1e-9;
    let sp = sp.clamp(0.0, (np - 1) as f64);
    let sn = sn.clamp(0.0, (nn - 1) as f64);
    let j = (sp as usize).min(np - 2);
    let k = (sn as usize).min(nn - 2);
    let (wp, wn) = (sp - j as f64, sn - k as f64);
    let lo = v[k * np + j] + wp * (v[k * np + j + 1] - v[k * np + j]);
    let hi = v[(k + 1) * np + j] + wp * (v[(k + 1) * np + j + 1] - v[(k + 1) * np + j]);
    (lo + wn * (hi - lo), out)
}

/// Backward induction with exact constant-control steps. A node is counted
/// in [`FullValueGrid::clamped`] when its chosen step leaves the grid while
/// the node is reachable from `n(0) ≥ n_min·e^{cT}`.
pub fn solve_full(params: &ModelParams, spec: &FullGridSpec, mesh: &ControlMesh) -> Result<FullValueGrid> {
    spec.validate()?;
    let (np, nn) = (spec.np, spec.nn);
    let dt = params.horizon() / spec.nt as f64;
    let (dp, dlog) = (spec.dp(), spec.dlog());
    let maps: Vec<StepMap> = mesh.values().iter().map(|&u| StepMap::new(u, dt, params)).collect();
    let shifts: Vec<f64> = maps.iter().map(|m| -m.depletion.ln() / dlog).collect();
    let n_nodes: Vec<f64> = (0..nn).map(|k| spec.n_min * (k as f64 * dlog).exp()).collect();
    let c = params.c();

    let terminal = vec![0.0; np * nn];
    let mut next = terminal.clone();
    let mut cur = vec![0.0; np * nn];
    let mut min_value = 0.0f64;
    let mut clamped = 0;
    for i in (0..spec.nt).rev() {
        let t = i as f64 * dt;
        // log-resource depth below which no trajectory from the cone can be
        let cone = c * (params.horizon() - t) / dlog - 1e-9;
        let (flags, lo) = cur
            .par_chunks_mut(np)
            .enumerate()
            .map(|(k, row)| {
                let n = n_nodes[k];
                let mut flags = 0;
                let mut lo = f64::INFINITY;
                for (j, v) in row.iter_mut().enumerate() {
                    let p = j as f64 * dp;
                    let mut best = (f64::NEG_INFINITY, false);
                    for (m, map) in maps.iter().enumerate() {
                        let p1 = map.decay * p + map.gain * n;
                        let (cont, out) = bilinear(&next, np, nn, p1 / dp, k as f64 - shifts[m]);
                        let q = map.reward_p * p + map.reward_n * n + cont;
                        if q > best.0 {
                            best = (q, out);
                        }
                    }
                    *v = best.0;
                    lo = lo.min(best.0);
                    if best.1 && k as f64 >= cone {
                        flags += 1;
                    }
                }
                (flags, lo)
            })
            .reduce(|| (0, f64::INFINITY), |x, y| (x.0 + y.0, x.1.min(y.1)));
        clamped += flags;
        min_value = min_value.min(lo);
        std::mem::swap(&mut cur, &mut next);
    }
    Ok(FullValueGrid {
        params: *params,
        spec: *spec,
        initial: next,
        terminal,
        min_value,
        clamped,
    })
}

impl FullValueGrid {
    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn spec(&self) -> &FullGridSpec {
        &self.spec
    }

    pub fn clamped(&self) -> usize {
        self.clamped
    }

    /// Smallest value met anywhere during the induction.
    pub fn min_value(&self) -> f64 {
        self.min_value
    }

    pub fn terminal(&self) -> &[f64] {
        &self.terminal
    }

    /// `V(0, p, n)` by bilinear interpolation in `(p, ln n)`.
    pub fn value_at(&self, p: f64, n: f64) -> Result<f64> {
        let s = &self.spec;
        if !(0.0..=s.p_max).contains(&p) || !(s.n_min..=s.n_max * (1.0 + 1e-12)).contains(&n) {
            return Err(Error::Domain(format!("({p}, {n}) outside the full grid")));
        }
        Ok(bilinear(&self.initial, s.np, s.nn, p / s.dp(), (n / s.n_min).ln() / s.dlog()).0)
    }
}
