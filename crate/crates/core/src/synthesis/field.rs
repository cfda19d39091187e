//! Feedback strategy fields and their rollouts.

use serde::{Deserialize, Serialize};

use super::arc::{arc_curve, integrate_singular_arc, ArcPoint, SampledCurve};
use super::geometry::{
    ess_control_raw, ess_fixed_point, junction, junction_point, switch_line_slope,
    switch_line_unchecked, Junction,
};
use super::FieldKind;
use crate::error::{Error, Result};
use crate::model::{build_time_grid, rk4_step, Control, Costate, ModelParams, Sample, TrajectoryRecord};

/// Default number of boundary samples on the singular arc.
pub const ARC_SAMPLES: usize = 4096;

/// Default rollout step as a fraction of the season.
pub const STEPS_PER_SEASON: usize = 20_000;

const BISECTION_ITERS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Regime {
    Coast,
    Feed,
    Singular,
}

/// Feedback `u = φ(t, x)`: coast above the boundary, feed below it, and
/// follow the singular control inside a thin band around the arc.
#[derive(Debug, Clone)]
pub struct StrategyField {
    kind: FieldKind,
    params: ModelParams,
    junction: Junction,
    arc: Option<SampledCurve>,
    arc_points: Vec<ArcPoint>,
    band: f64,
}

/// Field for a season long enough to hold a singular arc.
pub fn build_field(kind: FieldKind, params: &ModelParams) -> Result<StrategyField> {
    let j = junction(params)?;
    let points = integrate_singular_arc(kind, params, 0.0, ARC_SAMPLES)?;
    let arc = arc_curve(&points, kind, params);
    Ok(StrategyField {
        kind,
        params: *params,
        junction: j,
        arc: Some(arc),
        arc_points: points,
        band: 1e-6 * params.b() / params.a(),
    })
}

/// Field whose boundary is the switch line alone, for seasons with
/// `t_hat <= 0`.
pub fn switch_line_field(kind: FieldKind, params: &ModelParams) -> Result<StrategyField> {
    let j = junction_point(params);
    if j.t_hat > 0.0 {
        return Err(Error::Domain(format!(
            "season holds a singular arc (t_hat = {}); use build_field",
            j.t_hat
        )));
    }
    Ok(StrategyField {
        kind,
        params: *params,
        junction: j,
        arc: None,
        arc_points: Vec::new(),
        band: 1e-6 * params.b() / params.a(),
    })
}

impl StrategyField {
    pub fn kind(&self) -> FieldKind {
        self.kind
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn junction(&self) -> Junction {
        self.junction
    }

    pub fn band(&self) -> f64 {
        self.band
    }

    pub fn arc_points(&self) -> &[ArcPoint] {
        &self.arc_points
    }

    pub fn has_arc(&self) -> bool {
        self.arc.is_some()
    }

    /// End of the singular phase, or `-inf` without an arc.
    pub fn arc_end(&self) -> f64 {
        if self.arc.is_some() {
            self.junction.t_hat
        } else {
            f64::NEG_INFINITY
        }
    }

    pub fn boundary(&self, t: f64) -> f64 {
        match &self.arc {
            Some(arc) if t < self.junction.t_hat => arc.eval(t),
            _ => switch_line_unchecked(t, &self.params),
        }
    }

    pub fn boundary_slope(&self, t: f64) -> f64 {
        match &self.arc {
            Some(arc) if t < self.junction.t_hat => arc.slope(t),
            _ => switch_line_slope(t, &self.params),
        }
    }

    /// Left and right boundary slopes at the junction.
    pub fn junction_slopes(&self) -> (f64, f64) {
        let t = self.junction.t_hat;
        let right = switch_line_slope(t, &self.params);
        let left = self.arc.as_ref().map_or(right, |arc| arc.slope(t));
        (left, right)
    }

    pub fn singular_control(&self, x: f64) -> Control {
        let (a, b, c) = (self.params.a(), self.params.b(), self.params.c());
        match self.kind {
            FieldKind::Cooperative => Control::saturating(2.0 * a * x / (2.0 * b + c * x)),
            FieldKind::Ess => {
                Control::saturating(ess_control_raw(x.min(ess_fixed_point(&self.params)), &self.params))
            }
        }
    }

    pub fn classify(&self, t: f64, x: f64) -> Regime {
        let d = x - self.boundary(t);
        if t < self.arc_end() && d.abs() <= self.band {
            Regime::Singular
        } else if d < 0.0 {
            Regime::Feed
        } else {
            Regime::Coast
        }
    }

    pub fn feedback(&self, t: f64, x: f64) -> Control {
        self.regime_control(self.classify(t, x), x)
    }

    pub(crate) fn regime_control(&self, regime: Regime, x: f64) -> Control {
        match regime {
            Regime::Coast => Control::COAST,
            Regime::Feed => Control::FEED,
            Regime::Singular => self.singular_control(x),
        }
    }

    fn step(&self, regime: Regime, t: f64, y: &[f64; 3], h: f64) -> [f64; 3] {
        let (a, b, c) = (self.params.a(), self.params.b(), self.params.c());
        let f = |_t: f64, y: &[f64; 3]| {
            let u = self.regime_control(regime, y[0] / y[1]).value();
            [-a * y[0] + b * y[1] * u, -c * y[1] * u, (1.0 - u) * y[0]]
        };
        rk4_step(&f, t, y, h)
    }

    /// Step size `s <= h` at which the trajectory first meets the boundary,
    /// if it does so within the step.
    fn crossing(&self, regime: Regime, lo: f64, y: &[f64; 3], hi: f64, next: &[f64; 3]) -> Option<f64> {
        let gap = |t: f64, y: &[f64; 3]| y[0] / y[1] - self.boundary(t);
        let crossed = |d: f64| match regime {
            Regime::Feed => d >= 0.0,
            Regime::Coast => d <= 0.0,
            Regime::Singular => false,
        };
        match regime {
            Regime::Singular => return None,
            Regime::Coast if hi > self.arc_end() => return None,
            _ => {}
        }
        if !crossed(gap(hi, next)) {
            return None;
        }
        let (mut a, mut b) = (0.0, hi - lo);
        for _ in 0..BISECTION_ITERS {
            let mid = 0.5 * (a + b);
            if crossed(gap(lo + mid, &self.step(regime, lo, y, mid))) {
                b = mid;
            } else {
                a = mid;
            }
        }
        Some(b)
    }

    fn run(
        &self,
        p0: f64,
        n0: f64,
        t0: f64,
        step: f64,
        mut sink: impl FnMut(f64, &[f64; 3], Option<Regime>),
    ) -> Result<f64> {
        if !(p0 >= 0.0 && n0 > 0.0 && p0.is_finite() && n0.is_finite()) {
            return Err(Error::InvalidState(format!("need p0 >= 0 and n0 > 0, got ({p0}, {n0})")));
        }
        let horizon = self.params.horizon();
        let arc_end = self.arc_end();
        let breaks: Vec<f64> = if arc_end > t0 && arc_end < horizon { vec![arc_end] } else { Vec::new() };
        let grid = build_time_grid(t0, horizon, step, &breaks)?;
        let merge = 1e-12 * step;
        let mut y = [p0, n0, 0.0];
        let mut regime = self.classify(t0, p0 / n0);
        for w in grid.windows(2) {
            let (mut lo, hi) = (w[0], w[1]);
            if regime == Regime::Singular && lo >= arc_end - merge {
                regime = Regime::Coast;
            }
            loop {
                sink(lo, &y, Some(regime));
                let next = self.step(regime, lo, &y, hi - lo);
                if !next.iter().all(|v| v.is_finite()) || next[1] <= 0.0 {
                    return Err(Error::Divergence { t: hi });
                }
                match self.crossing(regime, lo, &y, hi, &next) {
                    Some(s) if hi - (lo + s) > merge => {
                        y = self.step(regime, lo, &y, s);
                        lo += s;
                        regime = if lo < arc_end - merge { Regime::Singular } else { Regime::Coast };
                    }
                    Some(_) => {
                        y = next;
                        regime = if hi < arc_end - merge { Regime::Singular } else { Regime::Coast };
                        break;
                    }
                    None => {
                        y = next;
                        break;
                    }
                }
            }
        }
        sink(horizon, &y, None);
        Ok(y[2])
    }

    /// Rolls the field out from `(p0, n0)` at `t0` to the end of the season.
    /// Steps are aligned to the junction and a sample is inserted at every
    /// boundary crossing.
    pub fn rollout(&self, p0: f64, n0: f64, t0: f64, step: f64) -> Result<FieldRollout> {
        let mut times = Vec::new();
        let mut states = Vec::new();
        let mut regimes = Vec::new();
        let payoff = self.run(p0, n0, t0, step, |t, y, r| {
            times.push(t);
            states.push(*y);
            if let Some(r) = r {
                regimes.push(r);
            }
        })?;
        let last = *regimes.last().expect("at least one interval");
        let samples = times
            .iter()
            .zip(&states)
            .enumerate()
            .map(|(k, (&t, y))| {
                let x = y[0] / y[1];
                let regime = regimes.get(k).copied().unwrap_or(last);
                Sample {
                    t,
                    x,
                    u: self.regime_control(regime, x).value(),
                    p: y[0],
                    n: y[1],
                    costate: None,
                }
            })
            .collect();
        let mut out = FieldRollout {
            field: self.clone(),
            record: TrajectoryRecord { samples, payoff },
            regimes,
        };
        out.attach_adjoints();
        Ok(out)
    }

    /// Rollout over the whole season at the default step.
    pub fn rollout_season(&self, p0: f64, n0: f64) -> Result<FieldRollout> {
        self.rollout(p0, n0, 0.0, self.params.horizon() / STEPS_PER_SEASON as f64)
    }

    /// Reduced value `Ṽ(t, x)`: payoff per unit resource of the rollout
    /// started at `(t, x)`.
    pub fn value(&self, t: f64, x: f64, step: f64) -> Result<f64> {
        let span = self.params.horizon() - t;
        if span <= 1e-12 * self.params.horizon() {
            return Ok(0.0);
        }
        self.run(x, 1.0, t, step.min(span), |_, _, _| {})
    }
}

/// A field rollout with its per-interval regimes and attached costates.
#[derive(Debug, Clone)]
pub struct FieldRollout {
    field: StrategyField,
    pub record: TrajectoryRecord,
    /// `regimes[k]` holds on `[t_k, t_{k+1}]`.
    pub regimes: Vec<Regime>,
}

impl FieldRollout {
    pub fn field(&self) -> &StrategyField {
        &self.field
    }

    pub fn payoff(&self) -> f64 {
        self.record.payoff
    }

    pub fn samples(&self) -> &[Sample] {
        &self.record.samples
    }

    /// Index of the interval holding `t`.
    pub fn interval_at(&self, t: f64) -> usize {
        let s = &self.record.samples;
        let k = s.partition_point(|q| q.t <= t);
        k.saturating_sub(1).min(s.len() - 2)
    }

    fn rates(&self, k: usize, p: f64, n: f64) -> (f64, f64) {
        let prm = self.field.params();
        let u = self.field.regime_control(self.regimes[k], p / n).value();
        (-prm.a() * p + prm.b() * n * u, -prm.c() * n * u)
    }

    /// Cubic Hermite interpolation of `(p, n)` inside interval `k`.
    pub fn dense(&self, k: usize, t: f64) -> (f64, f64) {
        let (s0, s1) = (&self.record.samples[k], &self.record.samples[k + 1]);
        let h = s1.t - s0.t;
        let (dp0, dn0) = self.rates(k, s0.p, s0.n);
        let (dp1, dn1) = self.rates(k, s1.p, s1.n);
        let s = (t - s0.t) / h;
        let (s2, s3) = (s * s, s * s * s);
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        (
            h00 * s0.p + h10 * h * dp0 + h01 * s1.p + h11 * h * dp1,
            h00 * s0.n + h10 * h * dn0 + h01 * s1.n + h11 * h * dn1,
        )
    }

    /// Resident control inside interval `k`.
    pub fn control_in(&self, k: usize, t: f64) -> f64 {
        match self.regimes[k] {
            Regime::Coast => 0.0,
            Regime::Feed => 1.0,
            Regime::Singular => {
                let (p, n) = self.dense(k, t);
                self.field.singular_control(p / n).value()
            }
        }
    }

    /// Backward RK4 sweep of `λ̇ = aλ - 1 + u`, `μ̇ = (cμ - bλ)u` from zero
    /// terminal values, storing costates and switching values on every sample.
    fn attach_adjoints(&mut self) {
        let prm = *self.field.params();
        let (a, b, c) = (prm.a(), prm.b(), prm.c());
        let m = self.record.samples.len();
        let mut y = [0.0, 0.0];
        let put = |s: &mut Sample, y: &[f64; 2]| {
            s.costate = Some(Costate {
                lambda: y[0],
                mu: y[1],
                sigma: b * y[0] - c * y[1] - s.x,
                sigma_m: b * y[0] - s.x,
            });
        };
        put(&mut self.record.samples[m - 1], &y);
        for k in (0..m - 1).rev() {
            let (lo, hi) = (self.record.samples[k].t, self.record.samples[k + 1].t);
            let f = |t: f64, y: &[f64; 2]| {
                let u = self.control_in(k, t);
                [a * y[0] - 1.0 + u, (c * y[1] - b * y[0]) * u]
            };
            y = rk4_step(&f, hi, &y, lo - hi);
            put(&mut self.record.samples[k], &y);
        }
    }

    /// Switching value governing the field's own feedback: the resident one
    /// for the cooperative field, the copying mutant's for the uninvadable one.
    pub fn switching(&self, s: &Sample) -> f64 {
        let cs = s.costate.expect("costates attached");
        match self.field.kind() {
            FieldKind::Cooperative => cs.sigma,
            FieldKind::Ess => cs.sigma_m,
        }
    }
}
