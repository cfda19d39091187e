//! Singular arcs, integrated backward from the junction, and the dense
//! curve representation used for field boundaries.

use serde::{Deserialize, Serialize};

use super::geometry::{
    coop_arc_rate, ess_arc_rate, ess_control_raw, ess_fixed_point, junction_point,
};
use super::FieldKind;
use crate::error::{Error, Result};
use crate::model::{rk4_step, ModelParams};

/// RK4 substeps between stored arc samples.
const SUBSTEPS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArcPoint {
    pub t: f64,
    pub x: f64,
    pub lambda: f64,
    pub mu: f64,
}

/// Monotone sampled curve `t ↦ x(t)` on a uniform time grid with exact
/// slopes at the nodes, evaluated by cubic Hermite interpolation.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledCurve {
    t0: f64,
    dt: f64,
    x: Vec<f64>,
    dx: Vec<f64>,
}

impl SampledCurve {
    pub fn new(t0: f64, dt: f64, x: Vec<f64>, dx: Vec<f64>) -> Self {
        assert!(x.len() >= 2 && x.len() == dx.len() && dt > 0.0);
        SampledCurve { t0, dt, x, dx }
    }

    pub fn t_start(&self) -> f64 {
        self.t0
    }

    pub fn t_end(&self) -> f64 {
        self.t0 + self.dt * (self.x.len() - 1) as f64
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn nodes(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.x
            .iter()
            .enumerate()
            .map(move |(i, &x)| (self.t0 + self.dt * i as f64, x))
    }

    fn locate(&self, t: f64) -> (usize, f64) {
        let last = self.x.len() - 2;
        let s = ((t - self.t0) / self.dt).max(0.0);
        let i = (s.floor() as usize).min(last);
        (i, (s - i as f64).clamp(0.0, 1.0))
    }

    pub fn eval(&self, t: f64) -> f64 {
        let (i, s) = self.locate(t);
        let h = self.dt;
        let (s2, s3) = (s * s, s * s * s);
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        h00 * self.x[i] + h10 * h * self.dx[i] + h01 * self.x[i + 1] + h11 * h * self.dx[i + 1]
    }

    pub fn slope(&self, t: f64) -> f64 {
        let (i, s) = self.locate(t);
        let h = self.dt;
        let s2 = s * s;
        let d00 = 6.0 * s2 - 6.0 * s;
        let d10 = 3.0 * s2 - 4.0 * s + 1.0;
        let d01 = -6.0 * s2 + 6.0 * s;
        let d11 = 3.0 * s2 - 2.0 * s;
        (d00 * self.x[i] + d01 * self.x[i + 1]) / h + d10 * self.dx[i] + d11 * self.dx[i + 1]
    }
}

/// Integrates a singular arc backward from the junction down to `t_stop`,
/// returning `samples` points in increasing time, junction last.
///
/// The state and both costates are integrated together under the singular
/// control. On the cooperative arc the costates are then replaced by their
/// closed forms `λ = 1/a - x/b`, `μ = b/(ac) - 2x/c`.
pub fn integrate_singular_arc(
    kind: FieldKind,
    params: &ModelParams,
    t_stop: f64,
    samples: usize,
) -> Result<Vec<ArcPoint>> {
    let j = junction_point(params);
    if !(t_stop < j.t_hat) {
        return Err(Error::Domain(format!(
            "arc integration needs t_stop < t_hat = {}, got {t_stop}",
            j.t_hat
        )));
    }
    if samples < 2 {
        return Err(Error::Config("an arc needs at least two samples".into()));
    }
    let (a, b, c) = (params.a(), params.b(), params.c());
    let x_bar = ess_fixed_point(params);
    let x_cap = x_bar * (1.0 - 1e-9);
    let control = move |x: f64| match kind {
        FieldKind::Cooperative => 2.0 * a * x / (2.0 * b + c * x),
        FieldKind::Ess => ess_control_raw(x.min(x_bar), params).max(0.0),
    };
    let rhs = |_t: f64, y: &[f64; 3]| {
        let u = control(y[0]);
        [
            -a * y[0] + (b + c * y[0]) * u,
            a * y[1] - 1.0 + u,
            (c * y[2] - b * y[1]) * u,
        ]
    };

    let span = j.t_hat - t_stop;
    let dt = span / (samples - 1) as f64;
    let h = -dt / SUBSTEPS as f64;
    let mut y = [j.x_hat, 1.0 / (2.0 * a), 0.0];
    let mut out = Vec::with_capacity(samples);
    out.push(ArcPoint {
        t: j.t_hat,
        x: y[0],
        lambda: y[1],
        mu: y[2],
    });
    for i in 1..samples {
        let t_start = j.t_hat - dt * (i - 1) as f64;
        for k in 0..SUBSTEPS {
            y = rk4_step(&rhs, t_start + h * k as f64, &y, h);
        }
        if kind == FieldKind::Ess && y[0] > x_cap {
            y[0] = x_bar;
        }
        if !y.iter().all(|v| v.is_finite()) {
            return Err(Error::Divergence { t: t_start - dt });
        }
        out.push(ArcPoint {
            t: j.t_hat - dt * i as f64,
            x: y[0],
            lambda: y[1],
            mu: y[2],
        });
    }
    out.reverse();
    if kind == FieldKind::Cooperative {
        for pt in &mut out {
            pt.lambda = 1.0 / a - pt.x / b;
            pt.mu = b / (a * c) - 2.0 * pt.x / c;
        }
    }
    Ok(out)
}

/// Arc rate as a function of `x` for the given field kind.
pub fn arc_rate(kind: FieldKind, x: f64, params: &ModelParams) -> f64 {
    match kind {
        FieldKind::Cooperative => coop_arc_rate(x, params),
        FieldKind::Ess => {
            let x_bar = ess_fixed_point(params);
            if x >= x_bar {
                0.0
            } else {
                ess_arc_rate(x, params)
            }
        }
    }
}

/// Dense boundary curve of a singular arc on `[t_start, t_hat]`.
pub fn arc_curve(points: &[ArcPoint], kind: FieldKind, params: &ModelParams) -> SampledCurve {
    let t0 = points[0].t;
    let dt = (points[points.len() - 1].t - t0) / (points.len() - 1) as f64;
    let x: Vec<f64> = points.iter().map(|p| p.x).collect();
    let dx = x.iter().map(|&x| arc_rate(kind, x, params)).collect();
    SampledCurve::new(t0, dt, x, dx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthesis::geometry::{junction, switch_line_slope};

    fn base() -> ModelParams {
        ModelParams::baseline()
    }

    /// Composite Gauss-Legendre (5 points) quadrature, test oracle.
    fn quad(f: impl Fn(f64) -> f64, lo: f64, hi: f64, pieces: usize) -> f64 {
        const X: [f64; 5] = [
            0.0,
            -0.538_469_310_105_683_1,
            0.538_469_310_105_683_1,
            -0.906_179_845_938_664,
            0.906_179_845_938_664,
        ];
        const W: [f64; 5] = [
            0.568_888_888_888_888_9,
            0.478_628_670_499_366_5,
            0.478_628_670_499_366_5,
            0.236_926_885_056_189_1,
            0.236_926_885_056_189_1,
        ];
        let h = (hi - lo) / pieces as f64;
        (0..pieces)
            .map(|k| {
                let mid = lo + h * (k as f64 + 0.5);
                X.iter().zip(W).map(|(x, w)| w * f(mid + 0.5 * h * x)).sum::<f64>() * 0.5 * h
            })
            .sum()
    }

    #[test]
    fn both_arcs_start_at_junction() {
        let p = base();
        let j = junction(&p).unwrap();
        for kind in [FieldKind::Cooperative, FieldKind::Ess] {
            let arc = integrate_singular_arc(kind, &p, 0.0, 512).unwrap();
            let last = arc.last().unwrap();
            assert_eq!((last.t, last.x), (j.t_hat, j.x_hat));
            assert!((arc[0].t).abs() < 1e-12);
        }
    }

    #[test]
    fn t_stop_past_junction_is_domain_error() {
        let p = base();
        let j = junction(&p).unwrap();
        assert!(matches!(
            integrate_singular_arc(FieldKind::Cooperative, &p, j.t_hat, 16),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn ess_arc_slope_matches_switch_line_at_junction() {
        let p = base();
        let j = junction(&p).unwrap();
        let arc = integrate_singular_arc(FieldKind::Ess, &p, 0.0, 4096).unwrap();
        let k = arc.len() - 1;
        let h = arc[k].t - arc[k - 1].t;
        // fourth-order one-sided difference
        let d = (25.0 * arc[k].x - 48.0 * arc[k - 1].x + 36.0 * arc[k - 2].x - 16.0 * arc[k - 3].x
            + 3.0 * arc[k - 4].x)
            / (12.0 * h);
        assert!((d + p.a() * j.x_hat).abs() <= 1e-8, "{d}");
        assert!((d - switch_line_slope(j.t_hat, &p)).abs() <= 1e-8);
        assert!((d + 0.5).abs() <= 1e-8);
    }

    #[test]
    fn coop_arc_matches_quadrature_oracle() {
        // a (t_hat - t) = ∫_x^{x_hat} (2b/(c ξ²) + 1/ξ) dξ solved for x by bisection
        let p = base();
        let (b, c, a) = (p.b(), p.c(), p.a());
        let j = junction(&p).unwrap();
        let target = a * 1.0;
        let g = |x: f64| quad(|xi| 2.0 * b / (c * xi * xi) + 1.0 / xi, x, j.x_hat, 400) - target;
        let (mut lo, mut hi) = (1e-3, j.x_hat);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let oracle = 0.5 * (lo + hi);
        let arc = integrate_singular_arc(FieldKind::Cooperative, &p, j.t_hat - 1.0, 4097).unwrap();
        assert!((arc[0].x - oracle).abs() <= 1e-8, "{} vs {oracle}", arc[0].x);
    }

    #[test]
    fn coop_costates_match_integrated_adjoints() {
        // rebuild the integrated costates on the cooperative arc without the
        // closed-form override and compare
        let p = base();
        let (a, b, c) = (p.a(), p.b(), p.c());
        let j = junction(&p).unwrap();
        let rhs = |_t: f64, y: &[f64; 3]| {
            let u = 2.0 * a * y[0] / (2.0 * b + c * y[0]);
            [-a * y[0] + (b + c * y[0]) * u, a * y[1] - 1.0 + u, (c * y[2] - b * y[1]) * u]
        };
        let mut y = [j.x_hat, 0.5 / a, 0.0];
        let h = -1e-4f64;
        let mut t = j.t_hat;
        while t > 1e-9 {
            let step = h.max(-t);
            y = rk4_step(&rhs, t, &y, step);
            t += step;
            assert!((y[1] - (1.0 / a - y[0] / b)).abs() <= 1e-8);
            assert!((y[2] - (b / (a * c) - 2.0 * y[0] / c)).abs() <= 1e-8);
            // sigma vanishes on the arc
            assert!((b * y[1] - c * y[2] - y[0]).abs() <= 1e-8);
        }
    }

    #[test]
    fn arc_ranges_and_monotonicity() {
        let p = base();
        let j = junction(&p).unwrap();
        let x_bar = ess_fixed_point(&p);
        let coop = integrate_singular_arc(FieldKind::Cooperative, &p, 0.0, 1024).unwrap();
        assert!(coop.windows(2).all(|w| w[1].x > w[0].x));
        assert!(coop.iter().all(|q| q.x > 0.0 && q.x <= j.x_hat));
        let ess = integrate_singular_arc(FieldKind::Ess, &p, 0.0, 1024).unwrap();
        assert!(ess.windows(2).all(|w| w[1].x < w[0].x));
        assert!(ess.iter().all(|q| q.x >= j.x_hat && q.x < x_bar));
        for q in &ess {
            let u = ess_control_raw(q.x, &p);
            assert!((0.0..0.5).contains(&u));
            // copying-mutant switching value stays at zero
            assert!((p.b() * q.lambda - q.x).abs() <= 1e-8);
        }
    }

    #[test]
    fn ess_arc_approaches_asymptote_far_back() {
        let p = base();
        let ess = integrate_singular_arc(FieldKind::Ess, &p, -40.0, 8192).unwrap();
        let x_bar = ess_fixed_point(&p);
        assert!((ess[0].x - x_bar).abs() < 1e-6);
    }

    #[test]
    fn hermite_curve_reproduces_arc() {
        let p = base();
        let coarse = integrate_singular_arc(FieldKind::Cooperative, &p, 0.0, 257).unwrap();
        let fine = integrate_singular_arc(FieldKind::Cooperative, &p, 0.0, 4097).unwrap();
        let curve = arc_curve(&coarse, FieldKind::Cooperative, &p);
        for q in fine.iter().step_by(7) {
            assert!((curve.eval(q.t) - q.x).abs() < 1e-10);
            assert!((curve.slope(q.t) - coop_arc_rate(q.x, &p)).abs() < 1e-7);
        }
    }
}
