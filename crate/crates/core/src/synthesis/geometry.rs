//! Closed-form pieces of the field of extremals.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Control, ModelParams};

/// Tolerance on time-domain checks, relative to the season length.
const DOMAIN_TOL: f64 = 1e-12;

/// Point where the switch line stops and the singular arc begins.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Junction {
    pub t_hat: f64,
    pub x_hat: f64,
}

impl Junction {
    /// Terminal value `b / 4a` of the coasting trajectory tangent to the
    /// switch line at the junction.
    pub fn last_primary_terminal(&self, params: &ModelParams) -> f64 {
        params.b() / (4.0 * params.a())
    }
}

/// Unchecked junction coordinates; `t_hat` may be negative.
pub fn junction_point(params: &ModelParams) -> Junction {
    Junction {
        t_hat: params.horizon() - std::f64::consts::LN_2 / params.a(),
        x_hat: params.b() / (2.0 * params.a()),
    }
}

pub fn junction(params: &ModelParams) -> Result<Junction> {
    let j = junction_point(params);
    if j.t_hat <= 0.0 {
        return Err(Error::SeasonTooShort { t_hat: j.t_hat });
    }
    Ok(j)
}

/// Coasting trajectory tangent to the switch line at the junction.
pub fn last_primary(t: f64, params: &ModelParams) -> f64 {
    params.b() / (4.0 * params.a()) * (params.a() * (params.horizon() - t)).exp()
}

/// `x = (b/a)(1 - e^{-a(T - t)})`, valid on `[t_hat, T]`.
pub fn switch_line(t: f64, params: &ModelParams) -> Result<f64> {
    let t_hat = junction_point(params).t_hat;
    let tol = DOMAIN_TOL * params.horizon();
    if t < t_hat - tol || t > params.horizon() + tol {
        return Err(Error::Domain(format!(
            "switch line is defined on [{t_hat}, {}], got t = {t}",
            params.horizon()
        )));
    }
    Ok(switch_line_unchecked(t, params))
}

pub(crate) fn switch_line_unchecked(t: f64, params: &ModelParams) -> f64 {
    let (a, b) = (params.a(), params.b());
    -(b / a) * (-a * (params.horizon() - t)).exp_m1()
}

pub fn switch_line_slope(t: f64, params: &ModelParams) -> f64 {
    -params.b() * (-params.a() * (params.horizon() - t)).exp()
}

/// Singular control of the cooperative optimum, `2ax / (2b + cx)`.
pub fn coop_singular_control(x: f64, params: &ModelParams) -> Control {
    let (a, b, c) = (params.a(), params.b(), params.c());
    Control::saturating(2.0 * a * x / (2.0 * b + c * x))
}

/// Resident control that keeps a copying mutant indifferent, `(2ax - b) / (cx)`.
pub fn ess_singular_control(x: f64, params: &ModelParams) -> Result<Control> {
    let x_hat = junction_point(params).x_hat;
    if x < x_hat * (1.0 - 1e-12) {
        return Err(Error::Domain(format!(
            "uninvadable singular control needs x >= {x_hat}, got {x}"
        )));
    }
    Ok(Control::saturating(ess_control_raw(x, params)))
}

#[inline]
pub(crate) fn ess_control_raw(x: f64, params: &ModelParams) -> f64 {
    (2.0 * params.a() * x - params.b()) / (params.c() * x)
}

/// Rate `x'` along the cooperative singular arc.
pub fn coop_arc_rate(x: f64, params: &ModelParams) -> f64 {
    let (a, b, c) = (params.a(), params.b(), params.c());
    a * c * x * x / (2.0 * b + c * x)
}

/// Rate `x'` along the uninvadable singular arc.
pub fn ess_arc_rate(x: f64, params: &ModelParams) -> f64 {
    let (a, b, c) = (params.a(), params.b(), params.c());
    (a * c * x * x + b * (2.0 * a - c) * x - b * b) / (c * x)
}

/// Positive root of `acx² + b(2a - c)x - b²`, the asymptote of the
/// uninvadable arc as `t → -∞`.
pub fn ess_fixed_point(params: &ModelParams) -> f64 {
    let (a, b, c) = (params.a(), params.b(), params.c());
    let root = (4.0 * a * a + c * c).sqrt();
    // pick the form without cancellation
    if 2.0 * a >= c {
        2.0 * b / ((2.0 * a - c) + root)
    } else {
        b / (2.0 * a * c) * ((c - 2.0 * a) + root)
    }
}

/// Upper end `u(x̄) = 1/2 - (√(4a² + c²) - 2a) / 2c` of the uninvadable
/// singular control.
pub fn ess_control_ceiling(params: &ModelParams) -> f64 {
    let (a, c) = (params.a(), params.c());
    0.5 - ((4.0 * a * a + c * c).sqrt() - 2.0 * a) / (2.0 * c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::LN_2;

    fn base() -> ModelParams {
        ModelParams::baseline()
    }

    #[test]
    fn switch_line_values() {
        let p = base();
        assert_eq!(switch_line(2.0, &p).unwrap(), 0.0);
        assert!((switch_line(2.0 - LN_2, &p).unwrap() - 0.5).abs() < 1e-15);
        assert!((switch_line(1.5, &p).unwrap() - (1.0 - (-0.5f64).exp())).abs() < 1e-15);
        assert!((switch_line(1.5, &p).unwrap() - 0.393469).abs() < 1e-6);
        assert!(matches!(switch_line(1.0, &p), Err(Error::Domain(_))));
        assert!(switch_line(2.1, &p).is_err());
    }

    #[test]
    fn junction_values() {
        let j = junction(&base()).unwrap();
        assert!((j.t_hat - (2.0 - LN_2)).abs() < 1e-15);
        assert!((j.t_hat - 1.306853).abs() < 1e-6);
        assert_eq!(j.x_hat, 0.5);
        assert_eq!(j.last_primary_terminal(&base()), 0.25);
        let q = ModelParams::new(2.0, 1.0, 2.0, 2.0).unwrap();
        let j = junction(&q).unwrap();
        assert!((j.t_hat - (2.0 - LN_2 / 2.0)).abs() < 1e-15);
        assert!((j.t_hat - 1.653426).abs() < 1e-6);
        assert_eq!(j.x_hat, 0.25);
        let short = ModelParams::new(1.0, 1.0, 2.0, 0.5).unwrap();
        assert!(matches!(junction(&short), Err(Error::SeasonTooShort { .. })));
    }

    #[test]
    fn junction_is_tangency_point() {
        let p = base();
        let j = junction(&p).unwrap();
        assert!((switch_line(j.t_hat, &p).unwrap() - j.x_hat).abs() < 1e-15);
        assert!((switch_line_slope(j.t_hat, &p) + p.a() * j.x_hat).abs() < 1e-15);
        assert!((last_primary(j.t_hat, &p) - j.x_hat).abs() < 1e-15);
    }

    #[test]
    fn coasting_leaves_switch_line_only_after_junction() {
        // -a x >= -b e^{-a(T - t)} on the switch line exactly when t >= t_hat
        let p = base();
        let j = junction(&p).unwrap();
        for k in 0..=200 {
            let t = j.t_hat + (p.horizon() - j.t_hat) * k as f64 / 200.0;
            let x = switch_line(t, &p).unwrap();
            assert!(-p.a() * x >= switch_line_slope(t, &p) - 1e-14);
        }
        for k in 1..50 {
            let t = j.t_hat - 0.02 * k as f64;
            let x = switch_line_unchecked(t, &p);
            assert!(-p.a() * x < switch_line_slope(t, &p));
        }
    }

    #[test]
    fn coop_control_examples() {
        let p = base();
        assert!(coop_singular_control(1e-12, &p).value() < 1e-11);
        assert!((coop_singular_control(0.5, &p).value() - 1.0 / 3.0).abs() < 1e-15);
        for k in 1..=100 {
            let x = 0.5 * k as f64 / 100.0;
            let u = coop_singular_control(x, &p).value();
            let rate = -p.a() * x + (p.b() + p.c() * x) * u;
            assert!((rate - coop_arc_rate(x, &p)).abs() < 1e-14);
            assert!(rate > 0.0);
        }
    }

    #[test]
    fn ess_control_examples() {
        let p = base();
        assert_eq!(ess_singular_control(0.5, &p).unwrap().value(), 0.0);
        let xbar = ess_fixed_point(&p);
        let u = ess_singular_control(xbar, &p).unwrap().value();
        assert!((u - (2.0f64.sqrt() - 1.0) / 2.0f64.sqrt()).abs() < 1e-15);
        assert!((u - 0.292893).abs() < 1e-6);
        assert!((u - ess_control_ceiling(&p)).abs() < 1e-15);
        assert!(matches!(ess_singular_control(0.4, &p), Err(Error::Domain(_))));
        let grid: Vec<f64> = (0..100).map(|k| 0.5 + (xbar - 0.5) * k as f64 / 99.0).collect();
        for w in grid.windows(2) {
            let (u1, u2) = (ess_control_raw(w[0], &p), ess_control_raw(w[1], &p));
            assert!(u1 < u2);
        }
    }

    #[test]
    fn fixed_point_baseline() {
        assert!((ess_fixed_point(&base()) - 2.0f64.sqrt() / 2.0).abs() < 1e-15);
        assert!((ess_fixed_point(&base()) - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn fixed_point_is_root_between_bounds(a in 0.05f64..5.0, b in 0.05f64..5.0, c in 0.05f64..5.0) {
            let p = ModelParams::new(a, b, c, 1.0).unwrap();
            let xbar = ess_fixed_point(&p);
            let resid = a * c * xbar * xbar + b * (2.0 * a - c) * xbar - b * b;
            prop_assert!(resid.abs() <= 1e-12 * (1.0 + b * b));
            prop_assert!(ess_arc_rate(xbar, &p).abs() <= 1e-12 * (1.0 + b));
            let xhat = b / (2.0 * a);
            prop_assert!(xhat < xbar && xbar < b / a);
            let both = b / (2.0 * a * c) * ((c - 2.0 * a) + (4.0 * a * a + c * c).sqrt());
            prop_assert!((both - xbar).abs() <= 1e-9 * xbar);
        }

        #[test]
        fn ess_ceiling_below_half(a in 0.05f64..5.0, c in 0.05f64..5.0) {
            let p = ModelParams::new(a, 1.0, c, 1.0).unwrap();
            let top = ess_control_ceiling(&p);
            prop_assert!(top < 0.5 && top > 0.0);
        }

        #[test]
        fn coop_control_feasible_on_arc(a in 0.05f64..5.0, b in 0.05f64..5.0, c in 0.05f64..5.0, f in 0.0f64..=1.0) {
            let p = ModelParams::new(a, b, c, 1.0).unwrap();
            let x = f * b / (2.0 * a);
            let u = 2.0 * a * x / (2.0 * b + c * x);
            prop_assert!((0.0..=1.0).contains(&u));
            prop_assert_eq!(coop_singular_control(x, &p).value(), u);
        }
    }
}
