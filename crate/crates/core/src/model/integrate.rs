use serde::{Deserialize, Serialize};

use super::{ModelParams, ResidentState};
use crate::error::{Error, Result};

/// One classical fourth-order Runge-Kutta step.
#[inline]
pub fn rk4_step<const N: usize, F>(f: &F, t: f64, y: &[f64; N], h: f64) -> [f64; N]
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
{
    let k1 = f(t, y);
    let mut tmp = [0.0; N];
    for i in 0..N {
        tmp[i] = y[i] + 0.5 * h * k1[i];
    }
    let k2 = f(t + 0.5 * h, &tmp);
    for i in 0..N {
        tmp[i] = y[i] + 0.5 * h * k2[i];
    }
    let k3 = f(t + 0.5 * h, &tmp);
    for i in 0..N {
        tmp[i] = y[i] + h * k3[i];
    }
    let k4 = f(t + h, &tmp);
    let mut out = [0.0; N];
    for i in 0..N {
        out[i] = y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

/// An open-loop control schedule.
pub trait Schedule {
    /// Control at `t` while integrating over a step `[lo, hi]` (either
    /// orientation) whose interior holds no breakpoint.
    fn value_in_step(&self, t: f64, lo: f64, hi: f64) -> f64;

    /// Times at which the control may jump.
    fn breakpoints(&self) -> Vec<f64> {
        Vec::new()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constant(pub f64);

impl Schedule for Constant {
    fn value_in_step(&self, _t: f64, _lo: f64, _hi: f64) -> f64 {
        self.0
    }
}

/// Piecewise-constant schedule: `values[k]` holds on `[breaks[k], breaks[k + 1])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseConstant {
    breaks: Vec<f64>,
    values: Vec<f64>,
}

impl PiecewiseConstant {
    pub fn new(breaks: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if breaks.len() != values.len() + 1 || values.is_empty() {
            return Err(Error::Config(format!(
                "schedule needs len(breaks) = len(values) + 1 > 1, got {} and {}",
                breaks.len(),
                values.len()
            )));
        }
        if breaks.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Config("schedule breaks must be strictly increasing".into()));
        }
        if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Config("schedule values must lie in [0, 1]".into()));
        }
        Ok(PiecewiseConstant { breaks, values })
    }

    /// `segments` equal pieces on `[0, horizon]` filled with `value`.
    pub fn uniform(horizon: f64, segments: usize, value: f64) -> Result<Self> {
        let breaks = (0..=segments)
            .map(|k| horizon * k as f64 / segments as f64)
            .collect();
        PiecewiseConstant::new(breaks, vec![value; segments])
    }

    pub fn breaks(&self) -> &[f64] {
        &self.breaks
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn segments(&self) -> usize {
        self.values.len()
    }

    /// Segment containing `t` (clamped to the first/last segment).
    pub fn segment_at(&self, t: f64) -> usize {
        let k = self.breaks.partition_point(|&b| b <= t);
        k.saturating_sub(1).min(self.values.len() - 1)
    }

    pub fn value(&self, t: f64) -> f64 {
        self.values[self.segment_at(t)]
    }

    /// Same breaks, new values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        PiecewiseConstant::new(self.breaks.clone(), values)
    }

    /// Checks that the schedule spans `[0, horizon]`.
    pub fn check_domain(&self, horizon: f64) -> Result<()> {
        let tol = 1e-12 * horizon.max(1.0);
        let (first, last) = (self.breaks[0], *self.breaks.last().unwrap());
        if first.abs() > tol || (last - horizon).abs() > tol {
            return Err(Error::Config(format!(
                "schedule covers [{first}, {last}] but the season is [0, {horizon}]"
            )));
        }
        Ok(())
    }
}

impl Schedule for PiecewiseConstant {
    fn value_in_step(&self, _t: f64, lo: f64, hi: f64) -> f64 {
        self.value(0.5 * (lo + hi))
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.breaks.clone()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Costate {
    pub lambda: f64,
    pub mu: f64,
    /// Resident switching value `bλ - cμ - x`.
    pub sigma: f64,
    /// Switching value `bλ - x` of a mutant copying the resident.
    pub sigma_m: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub x: f64,
    /// Control on the interval starting at `t` (left limit for the last sample).
    pub u: f64,
    pub p: f64,
    pub n: f64,
    pub costate: Option<Costate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub samples: Vec<Sample>,
    /// Accumulated `∫ (1 - u) p dt` from the first to the last sample.
    pub payoff: f64,
}

impl TrajectoryRecord {
    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    pub fn last(&self) -> &Sample {
        self.samples.last().expect("trajectory has at least two samples")
    }
}

/// Uniform grid from `t0` towards `t1` with spacing `step`, with every
/// breakpoint strictly between them inserted. Points closer than a relative
/// `1e-10` of the step to an existing point are merged.
pub fn build_time_grid(t0: f64, t1: f64, step: f64, breaks: &[f64]) -> Result<Vec<f64>> {
    let span = (t1 - t0).abs();
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::Config(format!("step must be positive, got {step}")));
    }
    if step > span {
        return Err(Error::Config(format!(
            "step {step} exceeds the integration span {span}"
        )));
    }
    let dir = if t1 >= t0 { 1.0 } else { -1.0 };
    let merge = 1e-10 * step;
    let mut pts: Vec<f64> = Vec::with_capacity((span / step) as usize + 2);
    let mut i = 0usize;
    loop {
        let t = t0 + dir * step * i as f64;
        if (t - t0).abs() >= span - merge {
            break;
        }
        pts.push(t);
        i += 1;
    }
    pts.push(t1);
    let (lo, hi) = (t0.min(t1), t0.max(t1));
    for &b in breaks {
        if b > lo + merge && b < hi - merge {
            pts.push(b);
        }
    }
    if dir > 0.0 {
        pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    } else {
        pts.sort_by(|a, b| b.partial_cmp(a).unwrap());
    }
    pts.dedup_by(|b, a| (*b - *a).abs() <= merge);
    Ok(pts)
}

/// Fixed-step RK4 integration of the resident `(p, n)` system under an
/// open-loop schedule, with the running payoff appended to the state.
/// Integrating backward (`t1 < t0`) is allowed; the payoff is then the
/// signed integral from `t0` to `t1`.
pub fn integrate<S: Schedule + ?Sized>(
    params: &ModelParams,
    initial: ResidentState,
    t0: f64,
    t1: f64,
    schedule: &S,
    step: f64,
) -> Result<TrajectoryRecord> {
    let grid = build_time_grid(t0, t1, step, &schedule.breakpoints())?;
    let (a, b, c) = (params.a(), params.b(), params.c());
    let mut y = [initial.p, initial.n, 0.0];
    let mut samples = Vec::with_capacity(grid.len());
    for w in grid.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let f = |t: f64, y: &[f64; 3]| {
            let u = schedule.value_in_step(t, lo, hi);
            [-a * y[0] + b * y[1] * u, -c * y[1] * u, (1.0 - u) * y[0]]
        };
        samples.push(Sample {
            t: lo,
            x: y[0] / y[1],
            u: schedule.value_in_step(lo, lo, hi),
            p: y[0],
            n: y[1],
            costate: None,
        });
        y = rk4_step(&f, lo, &y, hi - lo);
        if !y.iter().all(|v| v.is_finite()) || y[1] <= 0.0 {
            return Err(Error::Divergence { t: hi });
        }
    }
    let (lo, hi) = (grid[grid.len() - 2], grid[grid.len() - 1]);
    samples.push(Sample {
        t: hi,
        x: y[0] / y[1],
        u: schedule.value_in_step(hi, lo, hi),
        p: y[0],
        n: y[1],
        costate: None,
    });
    Ok(TrajectoryRecord {
        samples,
        payoff: y[2],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn base() -> ModelParams {
        ModelParams::baseline()
    }

    #[test]
    fn coasting_payoff_closed_form() {
        let rec = integrate(&base(), ResidentState::new(1.0, 1.0).unwrap(), 0.0, 2.0, &Constant(0.0), 1e-4)
            .unwrap();
        assert!((rec.last().p - (-2.0f64).exp()).abs() < 1e-8);
        assert!((rec.payoff - (1.0 - (-2.0f64).exp())).abs() < 1e-8);
        assert!((rec.payoff - 0.86466).abs() < 1e-5);
    }

    #[test]
    fn feeding_pays_nothing() {
        let rec = integrate(&base(), ResidentState::new(0.3, 1.0).unwrap(), 0.0, 2.0, &Constant(1.0), 1e-3)
            .unwrap();
        assert_eq!(rec.payoff, 0.0);
    }

    #[test]
    fn oversized_step_is_config_error() {
        let r = integrate(&base(), ResidentState::new(0.3, 1.0).unwrap(), 0.0, 0.5, &Constant(1.0), 1.0);
        assert!(matches!(r, Err(Error::Config(_))));
    }

    #[test]
    fn divergence_reports_time() {
        let p = ModelParams::new(1.0, 1.0, 1e300, 2.0).unwrap();
        let r = integrate(&p, ResidentState::new(0.3, 1.0).unwrap(), 0.0, 2.0, &Constant(1.0), 0.1);
        assert!(matches!(r, Err(Error::Divergence { .. })));
    }

    fn scenario() -> PiecewiseConstant {
        PiecewiseConstant::new(vec![0.0, 0.5, 1.3, 2.0], vec![1.0, 0.3, 0.0]).unwrap()
    }

    #[test]
    fn breakpoints_become_samples() {
        let rec = integrate(&base(), ResidentState::new(0.3, 1.0).unwrap(), 0.0, 2.0, &scenario(), 0.3)
            .unwrap();
        let ts = rec.times();
        for b in [0.5, 1.3] {
            assert!(ts.iter().any(|&t| t == b), "{b} missing from {ts:?}");
        }
        assert!(ts.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(rec.samples[0].u, 1.0);
        assert_eq!(*ts.last().unwrap(), 2.0);
    }

    #[test]
    fn step_halving_self_convergence() {
        let s0 = ResidentState::new(0.3, 1.0).unwrap();
        let j1 = integrate(&base(), s0, 0.0, 2.0, &scenario(), 1e-3).unwrap().payoff;
        let j2 = integrate(&base(), s0, 0.0, 2.0, &scenario(), 5e-4).unwrap().payoff;
        assert!((j1 - j2).abs() <= 1e-9, "{}", (j1 - j2).abs());
    }

    #[test]
    fn payoff_is_additive_over_a_split() {
        let s0 = ResidentState::new(0.3, 1.0).unwrap();
        let whole = integrate(&base(), s0, 0.0, 2.0, &scenario(), 1e-3).unwrap();
        for split in [0.25, 0.5, 0.777, 1.6] {
            let first = integrate(&base(), s0, 0.0, split, &scenario(), 1e-3).unwrap();
            let end = first.last();
            let mid = ResidentState::new(end.p, end.n).unwrap();
            let second = integrate(&base(), mid, split, 2.0, &scenario(), 1e-3).unwrap();
            assert!((first.payoff + second.payoff - whole.payoff).abs() <= 1e-10);
        }
    }

    #[test]
    fn backward_integration_retraces() {
        let s0 = ResidentState::new(0.3, 1.0).unwrap();
        let fwd = integrate(&base(), s0, 0.0, 2.0, &scenario(), 1e-3).unwrap();
        let end = fwd.last();
        let back = integrate(&base(), ResidentState::new(end.p, end.n).unwrap(), 2.0, 0.0, &scenario(), 1e-3)
            .unwrap();
        let start = back.last();
        assert!((start.p - 0.3).abs() < 1e-10 && (start.n - 1.0).abs() < 1e-10);
        assert!((back.payoff + fwd.payoff).abs() < 1e-10);
    }

    #[test]
    fn schedule_domain_checks() {
        assert!(PiecewiseConstant::new(vec![0.0, 1.0], vec![0.5, 0.5]).is_err());
        assert!(PiecewiseConstant::new(vec![0.0, 1.0], vec![1.5]).is_err());
        let s = PiecewiseConstant::uniform(2.0, 4, 0.5).unwrap();
        assert!(s.check_domain(2.0).is_ok());
        assert!(s.check_domain(3.0).is_err());
        assert_eq!(s.segment_at(0.5), 1);
        assert_eq!(s.segment_at(2.0), 3);
        assert_eq!(s.segment_at(-1.0), 0);
    }

    proptest! {
        #[test]
        fn positivity_and_ratio_consistency(
            values in proptest::collection::vec(0.0f64..=1.0, 1..8),
            p0 in 0.0f64..2.0, n0 in 0.05f64..3.0,
        ) {
            let k = values.len();
            let sched = PiecewiseConstant::uniform(2.0, k, 0.0).unwrap().with_values(values).unwrap();
            let rec = integrate(&base(), ResidentState::new(p0, n0).unwrap(), 0.0, 2.0, &sched, 2e-3).unwrap();
            // x integrated on its own scalar ODE must track p / n
            let (a, b, c) = (1.0, 1.0, 2.0);
            let mut x = [p0 / n0];
            for w in rec.samples.windows(2) {
                let (lo, hi) = (w[0].t, w[1].t);
                let f = |t: f64, y: &[f64; 1]| {
                    let u = sched.value_in_step(t, lo, hi);
                    [-a * y[0] + (b + c * y[0]) * u]
                };
                x = rk4_step(&f, lo, &x, hi - lo);
                let s = &w[1];
                prop_assert!(s.n > 0.0);
                prop_assert!(s.p >= 0.0);
                prop_assert!((x[0] - s.p / s.n).abs() <= 1e-8 * (1.0 + x[0]));
            }
        }
    }
}
