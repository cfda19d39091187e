//! Parameters, state types and the continuous dynamics of the seasonal
//! consumer-resource model.
//!
//! A consumer with per-capita energy `p` splits its time between feeding
//! (`u = 1`) and laying eggs (`u = 0`) while depleting a resource `n`:
//!
//! ```text
//! p' = -a p + b n u
//! n' = -c n u
//! x' = -a x + (b + c x) u        (x = p / n)
//! ```
//!
//! The season payoff is `J = ∫ (1 - u) p dt` over `[0, T]`.

mod integrate;

pub use integrate::{
    build_time_grid, integrate, rk4_step, Constant, Costate, PiecewiseConstant, Sample, Schedule,
    TrajectoryRecord,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative threshold on `|c - a| / a` below which the `c = a` limit forms
/// are used.
pub const DEGENERACY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawParams {
    a: f64,
    b: f64,
    c: f64,
    #[serde(rename = "T")]
    horizon: f64,
}

/// Validated model constants. Construct with [`ModelParams::new`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct ModelParams {
    a: f64,
    b: f64,
    c: f64,
    horizon: f64,
}

impl TryFrom<RawParams> for ModelParams {
    type Error = Error;

    fn try_from(raw: RawParams) -> Result<Self> {
        ModelParams::new(raw.a, raw.b, raw.c, raw.horizon)
    }
}

impl From<ModelParams> for RawParams {
    fn from(p: ModelParams) -> Self {
        RawParams {
            a: p.a,
            b: p.b,
            c: p.c,
            horizon: p.horizon,
        }
    }
}

impl ModelParams {
    /// Energy decay `a`, feeding gain `b`, resource depletion `c`, season length `T`.
    pub fn new(a: f64, b: f64, c: f64, horizon: f64) -> Result<Self> {
        for (name, value) in [("a", a), ("b", b), ("c", c), ("T", horizon)] {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidParams { name, value });
            }
        }
        Ok(ModelParams { a, b, c, horizon })
    }

    /// `a = 1, b = 1, c = 2, T = 2`.
    pub fn baseline() -> Self {
        ModelParams {
            a: 1.0,
            b: 1.0,
            c: 2.0,
            horizon: 2.0,
        }
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    /// Season length `T`.
    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn with_horizon(&self, horizon: f64) -> Result<Self> {
        ModelParams::new(self.a, self.b, self.c, horizon)
    }

    /// True when `|c - a|` is small enough that `b / (c - a)` is replaced by
    /// its limit.
    pub fn is_degenerate(&self) -> bool {
        (self.c - self.a).abs() <= DEGENERACY_TOL * self.a
    }

    /// Season length above which the feeding tributary ending at the junction
    /// starts from `x = 0` at a positive time.
    pub fn long_season_threshold(&self) -> f64 {
        let (a, c) = (self.a, self.c);
        let tail = if self.is_degenerate() {
            1.0 / (2.0 * a)
        } else {
            ((c + a) / (2.0 * a)).ln() / (c - a)
        };
        std::f64::consts::LN_2 / a + tail
    }

    pub fn long_season(&self) -> bool {
        self.horizon > self.long_season_threshold()
    }
}

/// Resident per-capita energy, resource, and their ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidentState {
    pub p: f64,
    pub n: f64,
    pub x: f64,
}

impl ResidentState {
    pub fn new(p: f64, n: f64) -> Result<Self> {
        if !(p.is_finite() && n.is_finite()) || p < 0.0 || n <= 0.0 {
            return Err(Error::InvalidState(format!(
                "need p >= 0 and n > 0, got p = {p}, n = {n}"
            )));
        }
        Ok(ResidentState { p, n, x: p / n })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MutantState {
    pub p_m: f64,
    pub x_m: f64,
}

/// Fraction of time spent feeding, in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Control(f64);

impl Control {
    pub const COAST: Control = Control(0.0);
    pub const FEED: Control = Control(1.0);

    pub fn new(u: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&u) {
            Ok(Control(u))
        } else {
            Err(Error::Domain(format!("control {u} outside [0, 1]")))
        }
    }

    /// Clamps into `[0, 1]`; NaN maps to 0.
    pub fn saturating(u: f64) -> Self {
        if u.is_nan() {
            Control(0.0)
        } else {
            Control(u.clamp(0.0, 1.0))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

fn check_finite(values: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidState(format!("non-finite component in {values:?}")))
    }
}

/// Time derivatives `(p', n', x')` of the resident system.
pub fn resident_rhs(s: &ResidentState, u: Control, params: &ModelParams) -> Result<(f64, f64, f64)> {
    check_finite(&[s.p, s.n, s.x])?;
    if s.n <= 0.0 {
        return Err(Error::InvalidState(format!("resource must be positive, got {}", s.n)));
    }
    let u = u.value();
    let (a, b, c) = (params.a, params.b, params.c);
    Ok((
        -a * s.p + b * s.n * u,
        -c * s.n * u,
        -a * s.x + (b + c * s.x) * u,
    ))
}

/// Time derivatives `(p_m', x_m')` of a rare mutant. The depletion term uses
/// the resident control, since only the resident consumes the resource.
pub fn mutant_rhs(
    m: &MutantState,
    u_m: Control,
    u_res: Control,
    n: f64,
    params: &ModelParams,
) -> Result<(f64, f64)> {
    check_finite(&[m.p_m, m.x_m, n])?;
    if n <= 0.0 {
        return Err(Error::InvalidState(format!("resource must be positive, got {n}")));
    }
    let (a, b, c) = (params.a, params.b, params.c);
    let (um, u) = (u_m.value(), u_res.value());
    Ok((-a * m.p_m + b * n * um, -a * m.x_m + b * um + c * m.x_m * u))
}

/// Coasting (`u = 0`) arc through `(t_ref, x_ref)`.
pub fn arc_u0(t: f64, t_ref: f64, x_ref: f64, params: &ModelParams) -> f64 {
    x_ref * (params.a * (t_ref - t)).exp()
}

/// Feeding (`u = 1`) arc through `(t_s, x_s)`, i.e. the solution of
/// `x' = (c - a) x + b`. May leave the positive half-line backward in time.
pub fn arc_u1(t: f64, t_s: f64, x_s: f64, params: &ModelParams) -> f64 {
    let (a, b, c) = (params.a, params.b, params.c);
    if params.is_degenerate() {
        return x_s - b * (t_s - t);
    }
    let k = b / (c - a);
    (x_s + k) * (-(c - a) * (t_s - t)).exp() - k
}

/// `(e^z - 1) / z`, accurate near zero.
pub(crate) fn exprel(z: f64) -> f64 {
    if z.abs() < 1e-5 {
        1.0 + z / 2.0 + z * z / 6.0
    } else {
        z.exp_m1() / z
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn base() -> ModelParams {
        ModelParams::baseline()
    }

    #[test]
    fn rejects_nonpositive_params() {
        assert!(ModelParams::new(0.0, 1.0, 1.0, 1.0).is_err());
        assert!(ModelParams::new(1.0, -1.0, 1.0, 1.0).is_err());
        assert!(ModelParams::new(1.0, 1.0, f64::NAN, 1.0).is_err());
        assert!(ModelParams::new(1.0, 1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn params_deserialize_validates() {
        let ok: ModelParams = serde_json::from_str(r#"{"a":1,"b":1,"c":2,"T":2}"#).unwrap();
        assert_eq!(ok, base());
        assert!(serde_json::from_str::<ModelParams>(r#"{"a":-1,"b":1,"c":2,"T":2}"#).is_err());
    }

    #[test]
    fn long_season_threshold_and_limit() {
        let p = base();
        let expected = std::f64::consts::LN_2 + (1.5f64).ln();
        assert!((p.long_season_threshold() - expected).abs() < 1e-15);
        assert!(p.long_season());
        let q = ModelParams::new(1.0, 1.0, 1.0, 1.0).unwrap();
        assert!((q.long_season_threshold() - (std::f64::consts::LN_2 + 0.5)).abs() < 1e-15);
        // continuity of the limit
        let r = ModelParams::new(1.0, 1.0, 1.0 + 1e-6, 1.0).unwrap();
        assert!((r.long_season_threshold() - q.long_season_threshold()).abs() < 1e-6);
    }

    #[test]
    fn resident_rhs_examples() {
        let s = ResidentState::new(0.0, 1.0).unwrap();
        assert_eq!(resident_rhs(&s, Control::COAST, &base()).unwrap(), (0.0, 0.0, 0.0));
        let s = ResidentState::new(0.5, 1.0).unwrap();
        let (dp, dn, dx) = resident_rhs(&s, Control::FEED, &base()).unwrap();
        assert!((dp - 0.5).abs() < 1e-15 && (dn + 2.0).abs() < 1e-15 && (dx - 1.5).abs() < 1e-15);
    }

    #[test]
    fn rhs_rejects_bad_state() {
        let s = ResidentState { p: f64::NAN, n: 1.0, x: 0.0 };
        assert!(resident_rhs(&s, Control::FEED, &base()).is_err());
        let s = ResidentState { p: 0.1, n: 0.0, x: 0.0 };
        assert!(resident_rhs(&s, Control::FEED, &base()).is_err());
        assert!(ResidentState::new(0.1, -1.0).is_err());
    }

    #[test]
    fn mutant_rhs_examples() {
        let m = MutantState { p_m: 0.5, x_m: 0.5 };
        let (dp, dx) = mutant_rhs(&m, Control::FEED, Control::COAST, 1.0, &base()).unwrap();
        assert!((dp - 0.5).abs() < 1e-15 && (dx - 0.5).abs() < 1e-15);
        let z = MutantState { p_m: 0.0, x_m: 0.0 };
        for u in [0.0, 0.4, 1.0] {
            let r = mutant_rhs(&z, Control::COAST, Control::new(u).unwrap(), 1.0, &base()).unwrap();
            assert_eq!(r, (0.0, 0.0));
        }
    }

    #[test]
    fn control_bounds() {
        assert!(Control::new(1.2).is_err());
        assert!(Control::new(-0.1).is_err());
        assert_eq!(Control::saturating(1.5).value(), 1.0);
        assert_eq!(Control::saturating(f64::NAN).value(), 0.0);
    }

    #[test]
    fn arc_examples() {
        let p = base();
        assert_eq!(arc_u0(1.3, 1.3, 0.7, &p), 0.7);
        let x = arc_u0(2.0 - std::f64::consts::LN_2, 2.0, 0.25, &p);
        assert!((x - 0.5).abs() < 1e-15);
        assert_eq!(arc_u1(1.0, 1.0, 0.5, &p), 0.5);
        let x = arc_u1(0.0, 1.0, 0.5, &p);
        assert!((x - (1.5 * (-1.0f64).exp() - 1.0)).abs() < 1e-15);
        assert!((x + 0.44818).abs() < 1e-5);
        let q = ModelParams::new(1.0, 1.0, 1.0, 2.0).unwrap();
        assert!((arc_u1(0.9, 1.0, 0.5, &q) - 0.4).abs() < 1e-12);
    }

    #[test]
    fn arc_u1_matches_rk4_of_affine_ode() {
        // x' = x + 1 backward from (1, 0.5)
        let mut y = [0.5];
        let h = -1e-4;
        let mut t = 1.0;
        for _ in 0..10_000 {
            y = rk4_step(&|_, y: &[f64; 1]| [y[0] + 1.0], t, &y, h);
            t += h;
        }
        assert!((y[0] - arc_u1(0.0, 1.0, 0.5, &base())).abs() < 1e-12);
    }

    #[test]
    fn arc_u0_matches_rk4() {
        let p = base();
        let mut y = [0.3];
        let h = 1e-4;
        let mut max_err: f64 = 0.0;
        for i in 0..20_000 {
            let t = i as f64 * h;
            y = rk4_step(&|_, y: &[f64; 1]| [-p.a() * y[0]], t, &y, h);
            max_err = max_err.max((y[0] - arc_u0(t + h, 0.0, 0.3, &p)).abs());
        }
        assert!(max_err <= 1e-8, "{max_err}");
    }

    #[test]
    fn exprel_is_smooth_near_zero() {
        for z in [-1e-3f64, -1e-6, 0.0, 1e-6, 1e-3, 0.5] {
            let direct = if z == 0.0 { 1.0 } else { z.exp_m1() / z };
            assert!((exprel(z) - direct).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn x_rate_is_quotient_rule(p in 0.0f64..5.0, n in 0.01f64..5.0, u in 0.0f64..=1.0,
                                   a in 0.1f64..3.0, b in 0.1f64..3.0, c in 0.1f64..3.0) {
            let params = ModelParams::new(a, b, c, 1.0).unwrap();
            let s = ResidentState::new(p, n).unwrap();
            let (dp, dn, dx) = resident_rhs(&s, Control::new(u).unwrap(), &params).unwrap();
            let quotient = (dp * n - p * dn) / (n * n);
            prop_assert!((dx - quotient).abs() <= 1e-12 * (1.0 + dx.abs()));
        }

        #[test]
        fn copying_mutant_has_resident_ratio_rate(p in 0.0f64..5.0, n in 0.01f64..5.0, u in 0.0f64..=1.0) {
            let params = base();
            let s = ResidentState::new(p, n).unwrap();
            let uc = Control::new(u).unwrap();
            let (_, _, dx) = resident_rhs(&s, uc, &params).unwrap();
            let m = MutantState { p_m: p, x_m: s.x };
            let (_, dxm) = mutant_rhs(&m, uc, uc, n, &params).unwrap();
            prop_assert!((dx - dxm).abs() <= 1e-12 * (1.0 + dx.abs()));
        }
    }
}
