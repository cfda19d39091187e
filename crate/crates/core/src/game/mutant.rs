//! Mutant payoff and its adjoint gradient against a frozen resident history.

use serde::{Deserialize, Serialize};

use super::context::ResidentContext;
use crate::error::{Error, Result};
use crate::model::{rk4_step, PiecewiseConstant};

/// Mutant control: a piecewise-constant schedule, or a copy of the resident's.
#[derive(Debug, Clone, Copy)]
pub enum MutantSchedule<'a> {
    Piecewise(&'a [f64]),
    FollowResident,
}

/// Integration piece: a resident interval clipped to one schedule segment.
/// Stage values are stored at the start, midpoint and end.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Piece {
    pub lo: f64,
    pub hi: f64,
    pub seg: usize,
    pub n: [f64; 3],
    pub u_res: [f64; 3],
}

/// Mutant problem on a fixed schedule grid against one resident history.
#[derive(Debug, Clone)]
pub struct MutantProblem<'a> {
    ctx: &'a ResidentContext,
    breaks: Vec<f64>,
    pub(crate) pieces: Vec<Piece>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MutantPoint {
    pub t: f64,
    pub x_m: f64,
    pub lambda_m: f64,
    pub sigma_m: f64,
}

/// Result of one forward/backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct MutantSweep {
    pub payoff: f64,
    /// `∂J_m/∂v_k = ∫_{segment k} n σ_m dt`.
    pub gradient: Vec<f64>,
    pub series: Vec<MutantPoint>,
}

impl<'a> MutantProblem<'a> {
    /// Uniform schedule grid with `segments` pieces.
    pub fn new(ctx: &'a ResidentContext, segments: usize) -> Result<Self> {
        if segments == 0 {
            return Err(Error::Config("schedule needs at least one segment".into()));
        }
        let horizon = ctx.params().horizon();
        let breaks: Vec<f64> = (0..=segments)
            .map(|k| horizon * k as f64 / segments as f64)
            .collect();
        Self::with_breaks(ctx, &breaks)
    }

    pub fn with_breaks(ctx: &'a ResidentContext, breaks: &[f64]) -> Result<Self> {
        let probe = PiecewiseConstant::new(breaks.to_vec(), vec![0.0; breaks.len().max(2) - 1])?;
        probe.check_domain(ctx.params().horizon())?;
        let samples = ctx.samples();
        let merge = 1e-12 * ctx.params().horizon();
        let mut pieces = Vec::with_capacity(samples.len() + breaks.len());
        let mut j = 1;
        for k in 0..samples.len() - 1 {
            let (t0, t1) = (samples[k].t, samples[k + 1].t);
            let mut lo = t0;
            loop {
                while j < breaks.len() - 1 && breaks[j] <= lo + merge {
                    j += 1;
                }
                let hi = if j < breaks.len() - 1 && breaks[j] < t1 - merge { breaks[j] } else { t1 };
                let mid = 0.5 * (lo + hi);
                let stage = |t: f64| ctx.state_in(k, t);
                let (s0, s1, s2) = (stage(lo), stage(mid), stage(hi));
                pieces.push(Piece {
                    lo,
                    hi,
                    seg: probe.segment_at(mid),
                    n: [s0.0, s1.0, s2.0],
                    u_res: [s0.1, s1.1, s2.1],
                });
                if hi >= t1 {
                    break;
                }
                lo = hi;
            }
        }
        Ok(MutantProblem {
            ctx,
            breaks: breaks.to_vec(),
            pieces,
        })
    }

    pub fn context(&self) -> &ResidentContext {
        self.ctx
    }

    pub fn breaks(&self) -> &[f64] {
        &self.breaks
    }

    pub fn segments(&self) -> usize {
        self.breaks.len() - 1
    }

    pub fn widths(&self) -> Vec<f64> {
        self.breaks.windows(2).map(|w| w[1] - w[0]).collect()
    }

    pub fn schedule(&self, values: Vec<f64>) -> Result<PiecewiseConstant> {
        PiecewiseConstant::new(self.breaks.clone(), values)
    }

    fn check(&self, schedule: MutantSchedule) -> Result<()> {
        if let MutantSchedule::Piecewise(v) = schedule {
            if v.len() != self.segments() {
                return Err(Error::Config(format!(
                    "schedule has {} values for {} segments",
                    v.len(),
                    self.segments()
                )));
            }
            if v.iter().any(|u| !(0.0..=1.0).contains(u)) {
                return Err(Error::Config("mutant schedule values must lie in [0, 1]".into()));
            }
        }
        Ok(())
    }

    fn stage_controls(piece: &Piece, schedule: MutantSchedule) -> [f64; 3] {
        match schedule {
            MutantSchedule::Piecewise(v) => [v[piece.seg]; 3],
            MutantSchedule::FollowResident => piece.u_res,
        }
    }

    /// Forward RK4 of `p_m' = -a p_m + b n u_m` and the running payoff,
    /// returning `p_m` at every piece boundary and `J_m`.
    fn forward(&self, schedule: MutantSchedule, x_m0: f64) -> (Vec<f64>, f64) {
        let prm = self.ctx.params();
        let (a, b) = (prm.a(), prm.b());
        let mut y = [x_m0 * self.ctx.n0(), 0.0];
        let mut path = Vec::with_capacity(self.pieces.len() + 1);
        path.push(y[0]);
        for pc in &self.pieces {
            let um = Self::stage_controls(pc, schedule);
            let (lo, h) = (pc.lo, pc.hi - pc.lo);
            let f = |t: f64, y: &[f64; 2]| {
                let i = stage_index(t, lo, h);
                [-a * y[0] + b * pc.n[i] * um[i], (1.0 - um[i]) * y[0]]
            };
            y = rk4_step(&f, lo, &y, h);
            path.push(y[0]);
        }
        (path, y[1])
    }

    /// Mutant payoff `J_m` with `x_m(0) = x_m0`.
    pub fn payoff(&self, schedule: MutantSchedule, x_m0: f64) -> Result<f64> {
        self.check(schedule)?;
        Ok(self.forward(schedule, x_m0).1)
    }

    /// Forward state pass, backward `λ_m' = a λ_m - 1 + u_m` from zero, and
    /// Simpson quadrature of `n σ_m = b n λ_m - p_m` over each segment.
    pub fn sweep(&self, schedule: MutantSchedule, x_m0: f64) -> Result<MutantSweep> {
        self.check(schedule)?;
        let prm = self.ctx.params();
        let (a, b) = (prm.a(), prm.b());
        let (path, payoff) = self.forward(schedule, x_m0);
        let m = self.pieces.len();
        let mut lambda = vec![0.0; m + 1];
        for (i, pc) in self.pieces.iter().enumerate().rev() {
            let um = Self::stage_controls(pc, schedule);
            let (lo, h) = (pc.lo, pc.hi - pc.lo);
            let f = |t: f64, y: &[f64; 1]| [a * y[0] - 1.0 + um[stage_index(t, lo, h)]];
            lambda[i] = rk4_step(&f, pc.hi, &[lambda[i + 1]], -h)[0];
        }
        let mut gradient = vec![0.0; self.segments()];
        let mut series = Vec::with_capacity(m + 1);
        for (i, pc) in self.pieces.iter().enumerate() {
            let um = Self::stage_controls(pc, schedule);
            let h = pc.hi - pc.lo;
            let (p0, p1) = (path[i], path[i + 1]);
            let (l0, l1) = (lambda[i], lambda[i + 1]);
            let dp0 = -a * p0 + b * pc.n[0] * um[0];
            let dp1 = -a * p1 + b * pc.n[2] * um[2];
            let dl0 = a * l0 - 1.0 + um[0];
            let dl1 = a * l1 - 1.0 + um[2];
            let p_mid = 0.5 * (p0 + p1) + h * (dp0 - dp1) / 8.0;
            let l_mid = 0.5 * (l0 + l1) + h * (dl0 - dl1) / 8.0;
            let g = |p: f64, l: f64, n: f64| b * n * l - p;
            gradient[pc.seg] +=
                h / 6.0 * (g(p0, l0, pc.n[0]) + 4.0 * g(p_mid, l_mid, pc.n[1]) + g(p1, l1, pc.n[2]));
            let x_m = p0 / pc.n[0];
            series.push(MutantPoint {
                t: pc.lo,
                x_m,
                lambda_m: l0,
                sigma_m: b * l0 - x_m,
            });
        }
        let last = self.pieces.last().expect("at least one piece");
        let x_m = path[m] / last.n[2];
        series.push(MutantPoint {
            t: last.hi,
            x_m,
            lambda_m: 0.0,
            sigma_m: -x_m,
        });
        Ok(MutantSweep {
            payoff,
            gradient,
            series,
        })
    }

    /// `∫ |u_m - u| dt` against the resident control.
    pub fn l1_distance(&self, values: &[f64]) -> f64 {
        self.pieces
            .iter()
            .map(|pc| {
                let v = values[pc.seg];
                let d = |i: usize| (v - pc.u_res[i]).abs();
                (pc.hi - pc.lo) / 6.0 * (d(0) + 4.0 * d(1) + d(2))
            })
            .sum()
    }

    /// Segment averages of the resident control.
    pub fn resident_averages(&self) -> Vec<f64> {
        let mut acc = vec![0.0; self.segments()];
        for pc in &self.pieces {
            acc[pc.seg] += (pc.hi - pc.lo) / 6.0 * (pc.u_res[0] + 4.0 * pc.u_res[1] + pc.u_res[2]);
        }
        acc.iter()
            .zip(self.widths())
            .map(|(s, w)| (s / w).clamp(0.0, 1.0))
            .collect()
    }
}

/// RK4 evaluates at `lo`, `lo + h/2` (twice) and `lo + h`.
#[inline]
fn stage_index(t: f64, lo: f64, h: f64) -> usize {
    let s = (t - lo) / h;
    if s < 0.25 {
        0
    } else if s < 0.75 {
        1
    } else {
        2
    }
}

/// `J_m` for a piecewise-constant mutant schedule, starting from `x_m(0) = x_m0`.
pub fn mutant_payoff(ctx: &ResidentContext, schedule: &PiecewiseConstant, x_m0: f64) -> Result<f64> {
    MutantProblem::with_breaks(ctx, schedule.breaks())?.payoff(MutantSchedule::Piecewise(schedule.values()), x_m0)
}

/// Switching series and payoff gradient for a piecewise-constant mutant
/// schedule, starting from the resident's initial ratio.
pub fn mutant_adjoint_sweep(ctx: &ResidentContext, schedule: &PiecewiseConstant) -> Result<MutantSweep> {
    MutantProblem::with_breaks(ctx, schedule.breaks())?.sweep(MutantSchedule::Piecewise(schedule.values()), ctx.x0())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::rollout_resident;
    use crate::model::ModelParams;
    use crate::synthesis::{build_field, FieldKind, Regime};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ctx(kind: FieldKind) -> ResidentContext {
        let f = build_field(kind, &ModelParams::baseline()).unwrap();
        rollout_resident(&f, 0.3, 1.0).unwrap()
    }

    #[test]
    fn copying_mutant_matches_resident() {
        for kind in [FieldKind::Cooperative, FieldKind::Ess] {
            let c = ctx(kind);
            let prob = MutantProblem::new(&c, 2000).unwrap();
            let jm = prob.payoff(MutantSchedule::FollowResident, c.x0()).unwrap();
            assert!((jm - c.payoff()).abs() <= 1e-10 * c.payoff(), "{kind}: {jm} vs {}", c.payoff());
        }
    }

    #[test]
    fn trivial_payoffs() {
        let c = ctx(FieldKind::Ess);
        let s1 = PiecewiseConstant::uniform(2.0, 50, 1.0).unwrap();
        assert_eq!(mutant_payoff(&c, &s1, c.x0()).unwrap(), 0.0);
        let s0 = PiecewiseConstant::uniform(2.0, 50, 0.0).unwrap();
        assert_eq!(mutant_payoff(&c, &s0, 0.0).unwrap(), 0.0);
        let bad = PiecewiseConstant::uniform(1.5, 50, 0.0).unwrap();
        assert!(matches!(mutant_payoff(&c, &bad, 0.0), Err(Error::Config(_))));
    }

    #[test]
    fn terminal_switching_value() {
        let c = ctx(FieldKind::Cooperative);
        let prob = MutantProblem::new(&c, 200).unwrap();
        let sw = prob.sweep(MutantSchedule::FollowResident, c.x0()).unwrap();
        let last = sw.series.last().unwrap();
        assert_eq!(last.t, 2.0);
        assert!(last.sigma_m < 0.0 && (last.sigma_m + last.x_m).abs() < 1e-15);
    }

    #[test]
    fn gradient_matches_central_differences() {
        let c = ctx(FieldKind::Cooperative);
        let prob = MutantProblem::new(&c, 200).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let base: Vec<f64> = (0..200).map(|_| rng.random_range(0.2..0.8)).collect();
        let sw = prob.sweep(MutantSchedule::Piecewise(&base), c.x0()).unwrap();
        let eps = 1e-5;
        for _ in 0..20 {
            let dir: Vec<f64> = (0..200).map(|_| rng.random_range(-1.0..1.0)).collect();
            let shift = |s: f64| -> Vec<f64> { base.iter().zip(&dir).map(|(v, d)| v + s * d).collect() };
            let plus = prob.payoff(MutantSchedule::Piecewise(&shift(eps)), c.x0()).unwrap();
            let minus = prob.payoff(MutantSchedule::Piecewise(&shift(-eps)), c.x0()).unwrap();
            let fd = (plus - minus) / (2.0 * eps);
            let an: f64 = sw.gradient.iter().zip(&dir).map(|(g, d)| g * d).sum();
            assert!((fd - an).abs() <= 1e-4 * fd.abs(), "{fd} vs {an}");
        }
    }

    #[test]
    fn mutant_switching_on_coop_arc() {
        // σ_m = σ + cμ pointwise, and σ_m > 0 before the junction
        let c = ctx(FieldKind::Cooperative);
        let prm = *c.params();
        let prob = MutantProblem::new(&c, 2000).unwrap();
        let sw = prob.sweep(MutantSchedule::FollowResident, c.x0()).unwrap();
        let r = c.rollout();
        let t_hat = c.field().junction().t_hat;
        let mut checked = 0;
        for (k, g) in r.regimes.iter().enumerate() {
            let s = &r.samples()[k];
            if *g != Regime::Singular || s.t >= t_hat {
                continue;
            }
            let cs = s.costate.unwrap();
            let i = sw.series.partition_point(|q| q.t < s.t);
            let q = &sw.series[i];
            assert!((q.t - s.t).abs() < 1e-12);
            assert!((q.sigma_m - (cs.sigma + prm.c() * cs.mu)).abs() < 1e-7);
            assert!(q.sigma_m > 0.0 && cs.mu > 0.0);
            checked += 1;
        }
        assert!(checked > 100);
    }
}
