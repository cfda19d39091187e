//! Sign checks on feeding tributaries: trajectories with `u = 1` that reach
//! the switch line or a singular arc from below.

use serde::{Deserialize, Serialize};

use super::geometry::{ess_fixed_point, junction_point};
use crate::error::{Error, Result};
use crate::model::{rk4_step, ModelParams};
use crate::quadrature::gauss8_composite;

/// Tolerance on an anchor's defining relations.
const ANCHOR_TOL: f64 = 1e-9;

/// Points at which the switching values are compared.
const CHECK_POINTS: usize = 200;

/// RK4 steps per check interval in the direct adjoint integration.
const SUBSTEPS: usize = 10;

/// `σ` along a coasting trajectory leaving the cooperative arc backward
/// from `(t_s, x_s)`: `2 x_s (1 - cosh(a (t_s - t)))`.
pub fn sigma_on_u0_tributary(t: f64, t_s: f64, x_s: f64, params: &ModelParams) -> f64 {
    2.0 * x_s * (1.0 - (params.a() * (t_s - t)).cosh())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AnchorKind {
    SwitchLine,
    CoopArc,
    EssArc,
}

/// Where a feeding trajectory meets the boundary, with the costates there.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TributaryAnchor {
    pub kind: AnchorKind,
    pub t_s: f64,
    pub x_s: f64,
    pub lambda_s: f64,
    pub mu_s: f64,
}

impl TributaryAnchor {
    /// Anchor on the switch line at time `t_s`.
    pub fn on_switch_line(t_s: f64, params: &ModelParams) -> Self {
        let lambda_s = -(-params.a() * (params.horizon() - t_s)).exp_m1() / params.a();
        TributaryAnchor {
            kind: AnchorKind::SwitchLine,
            t_s,
            x_s: params.b() * lambda_s,
            lambda_s,
            mu_s: 0.0,
        }
    }

    /// Anchor on the cooperative arc with the closed-form costates.
    pub fn on_coop_arc(t_s: f64, x_s: f64, params: &ModelParams) -> Self {
        let (a, b, c) = (params.a(), params.b(), params.c());
        TributaryAnchor {
            kind: AnchorKind::CoopArc,
            t_s,
            x_s,
            lambda_s: 1.0 / a - x_s / b,
            mu_s: b / (a * c) - 2.0 * x_s / c,
        }
    }

    /// Anchor on the uninvadable arc; `mu_s` comes from the arc integration.
    pub fn on_ess_arc(t_s: f64, x_s: f64, mu_s: f64, params: &ModelParams) -> Self {
        TributaryAnchor {
            kind: AnchorKind::EssArc,
            t_s,
            x_s,
            lambda_s: x_s / params.b(),
            mu_s,
        }
    }

    fn validate(&self, params: &ModelParams) -> Result<()> {
        let (a, b, c) = (params.a(), params.b(), params.c());
        let j = junction_point(params);
        let bad = |msg: String| Err(Error::InvalidAnchor(msg));
        let close = |u: f64, v: f64| (u - v).abs() <= ANCHOR_TOL * (1.0 + v.abs());
        if !(self.t_s.is_finite() && self.x_s.is_finite() && self.lambda_s.is_finite() && self.mu_s.is_finite()) {
            return bad("non-finite anchor".into());
        }
        match self.kind {
            AnchorKind::SwitchLine => {
                let lam = -(-a * (params.horizon() - self.t_s)).exp_m1() / a;
                if self.t_s < j.t_hat - ANCHOR_TOL || self.t_s > params.horizon() {
                    return bad(format!("switch-line anchor time {} outside [t_hat, T]", self.t_s));
                }
                if !close(self.x_s, b * self.lambda_s) || !close(self.lambda_s, lam) || self.mu_s.abs() > ANCHOR_TOL {
                    return bad(format!("anchor ({}, {}) is not on the switch line", self.t_s, self.x_s));
                }
            }
            AnchorKind::CoopArc => {
                if !(self.x_s > 0.0 && self.x_s <= j.x_hat * (1.0 + ANCHOR_TOL)) {
                    return bad(format!("cooperative-arc anchor needs 0 < x_s <= x_hat, got {}", self.x_s));
                }
                if !close(self.lambda_s, 1.0 / a - self.x_s / b)
                    || !close(self.mu_s, b / (a * c) - 2.0 * self.x_s / c)
                {
                    return bad("costates off the cooperative arc".into());
                }
            }
            AnchorKind::EssArc => {
                let x_bar = ess_fixed_point(params);
                if !(self.x_s >= j.x_hat * (1.0 - ANCHOR_TOL) && self.x_s <= x_bar) {
                    return bad(format!("uninvadable-arc anchor needs x_hat <= x_s <= x_bar, got {}", self.x_s));
                }
                if !close(self.x_s, b * self.lambda_s) {
                    return bad("mutant switching value nonzero at the anchor".into());
                }
            }
        }
        Ok(())
    }
}

/// Outcome of a tributary sign check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TributaryReport {
    pub anchor: TributaryAnchor,
    /// Start of the checked window: `0` or the time where `x` reaches zero.
    pub t_lo: f64,
    /// `L` at the anchor; the mutant form `abλ + (a - c)x - b` on the
    /// uninvadable arc, `abλ + ax - b` otherwise.
    pub l_at_anchor: f64,
    /// Resident `abλ + ax - b` at the anchor, for reference.
    pub resident_l_at_anchor: f64,
    pub max_l: f64,
    pub min_l_rate: f64,
    /// Minimum switching value over checked points strictly before `t_s`.
    pub min_sigma: f64,
    /// Largest gap between the integral formula and direct adjoint integration.
    pub max_disagreement: f64,
    /// Largest gap between closed-form `(x, λ, μ)` and direct integration.
    pub max_closed_form_gap: f64,
}

impl TributaryReport {
    /// `L <= 0` at the anchor and `σ > 0` before it, with both evaluations
    /// of `σ` agreeing to `1e-7`. On switch-line and cooperative anchors `L`
    /// must also be increasing.
    pub fn passes(&self) -> bool {
        let rate_ok = self.anchor.kind == AnchorKind::EssArc || self.min_l_rate > 0.0;
        self.l_at_anchor <= 1e-12 && self.min_sigma > 0.0 && self.max_disagreement <= 1e-7 && rate_ok
    }
}

/// Closed-form backward feeding trajectory from an anchor.
struct FeedingArc {
    a: f64,
    b: f64,
    c: f64,
    t_s: f64,
    x_s: f64,
    lambda_s: f64,
    mu_s: f64,
    degenerate: bool,
}

impl FeedingArc {
    fn x(&self, t: f64) -> f64 {
        let tau = self.t_s - t;
        if self.degenerate {
            return self.x_s - self.b * tau;
        }
        let k = self.b / (self.c - self.a);
        (self.x_s + k) * (-(self.c - self.a) * tau).exp() - k
    }

    fn lambda(&self, t: f64) -> f64 {
        self.lambda_s * (-self.a * (self.t_s - t)).exp()
    }

    fn mu(&self, t: f64) -> f64 {
        let tau = self.t_s - t;
        let alpha = (-self.a * tau).exp();
        if self.degenerate {
            return alpha * (self.mu_s + self.b * self.lambda_s * tau);
        }
        let gamma = (-self.c * tau).exp();
        let k = self.b * self.lambda_s / (self.c - self.a);
        (self.mu_s - k) * gamma + k * alpha
    }

    fn resident_l(&self, t: f64) -> f64 {
        self.a * self.b * self.lambda(t) + self.a * self.x(t) - self.b
    }

    fn resident_l_rate(&self, t: f64) -> f64 {
        self.a * (self.a * self.b * self.lambda(t) + (self.c - self.a) * self.x(t) + self.b)
    }

    fn mutant_l(&self, t: f64) -> f64 {
        self.a * self.b * self.lambda(t) + (self.a - self.c) * self.x(t) - self.b
    }

    fn mutant_l_rate(&self, t: f64) -> f64 {
        let xdot = (self.c - self.a) * self.x(t) + self.b;
        self.a * self.a * self.b * self.lambda(t) + (self.a - self.c) * xdot
    }

    /// Backward time for `x` to fall from `x_s` to zero.
    fn time_to_zero(&self) -> f64 {
        if self.degenerate {
            self.x_s / self.b
        } else {
            let r = self.c - self.a;
            (self.x_s * r / self.b).ln_1p() / r
        }
    }
}

/// Evaluates the tributary sign lemmas along the feeding trajectory ending
/// at `anchor`.
///
/// On switch-line and cooperative anchors the switching value is the
/// resident's, `σ(t) = -∫_t^{t_s} e^{-c(τ - t)} L(τ) dτ`. On the uninvadable
/// arc it is the copying mutant's, `σ_m(t) = -∫_t^{t_s} L_m(τ) dτ`. Either
/// way it is checked against a direct RK4 integration of the costates.
pub fn verify_tributary_sign(anchor: &TributaryAnchor, params: &ModelParams) -> Result<TributaryReport> {
    anchor.validate(params)?;
    let (a, b, c) = (params.a(), params.b(), params.c());
    let arc = FeedingArc {
        a,
        b,
        c,
        t_s: anchor.t_s,
        x_s: anchor.x_s,
        lambda_s: anchor.lambda_s,
        mu_s: anchor.mu_s,
        degenerate: params.is_degenerate(),
    };
    let mutant = anchor.kind == AnchorKind::EssArc;
    let t_lo = (anchor.t_s - arc.time_to_zero()).max(0.0);
    let l = |t: f64| if mutant { arc.mutant_l(t) } else { arc.resident_l(t) };
    let l_rate = |t: f64| if mutant { arc.mutant_l_rate(t) } else { arc.resident_l_rate(t) };
    let weight = |tau: f64, t: f64| if mutant { 1.0 } else { (-c * (tau - t)).exp() };

    let mut report = TributaryReport {
        anchor: *anchor,
        t_lo,
        l_at_anchor: l(anchor.t_s),
        resident_l_at_anchor: arc.resident_l(anchor.t_s),
        max_l: f64::NEG_INFINITY,
        min_l_rate: f64::INFINITY,
        min_sigma: f64::INFINITY,
        max_disagreement: 0.0,
        max_closed_form_gap: 0.0,
    };
    if anchor.t_s - t_lo <= 0.0 {
        report.max_l = report.l_at_anchor;
        return Ok(report);
    }

    // direct costate integration: y = [x, λ, μ] with u = 1
    let rhs = |_t: f64, y: &[f64; 3]| [(c - a) * y[0] + b, a * y[1], c * y[2] - b * y[1]];
    let mut y = [anchor.x_s, anchor.lambda_s, anchor.mu_s];
    let dt = (anchor.t_s - t_lo) / CHECK_POINTS as f64;
    let h = -dt / SUBSTEPS as f64;
    report.max_l = report.l_at_anchor;
    report.min_l_rate = l_rate(anchor.t_s);
    for i in 1..=CHECK_POINTS {
        let t_start = anchor.t_s - dt * (i - 1) as f64;
        for k in 0..SUBSTEPS {
            y = rk4_step(&rhs, t_start + h * k as f64, &y, h);
        }
        let t = anchor.t_s - dt * i as f64;
        let direct = if mutant { b * y[1] - y[0] } else { b * y[1] - c * y[2] - y[0] };
        let pieces = 4 + i / 8;
        let integral = -gauss8_composite(|tau| weight(tau, t) * l(tau), t, anchor.t_s, pieces);
        report.max_disagreement = report.max_disagreement.max((direct - integral).abs());
        let gap = (y[0] - arc.x(t)).abs().max((y[1] - arc.lambda(t)).abs()).max((y[2] - arc.mu(t)).abs());
        report.max_closed_form_gap = report.max_closed_form_gap.max(gap);
        report.min_sigma = report.min_sigma.min(integral);
        report.max_l = report.max_l.max(l(t));
        report.min_l_rate = report.min_l_rate.min(l_rate(t));
    }
    Ok(report)
}
