//! Exact one-step maps under a constant control.

use crate::model::{exprel, ModelParams};

/// Derivative of `exprel`.
fn exprel_prime(z: f64) -> f64 {
    if z.abs() < 1e-2 {
        0.5 + z * (1.0 / 3.0 + z * (1.0 / 8.0 + z * (1.0 / 30.0 + z * (1.0 / 144.0 + z / 840.0))))
    } else {
        (z * z.exp() - z.exp_m1()) / (z * z)
    }
}

/// Divided difference `(exprel(z1) - exprel(z2)) / (z1 - z2)`.
pub(crate) fn exprel_slope(z1: f64, z2: f64) -> f64 {
    let h = z1 - z2;
    if h.abs() < 1e-6 {
        exprel_prime(0.5 * (z1 + z2))
    } else {
        (exprel(z1) - exprel(z2)) / h
    }
}

/// Coefficients of one step of length `dt` with constant control `u`.
///
/// With resource `n0` and energy `p0` at the start of the step:
/// `p1 = decay·p0 + gain·n0`, `n1 = depletion·n0`, and the accrued reward is
/// `reward_p·p0 + reward_n·n0`. The same numbers act on the ratio `x` with
/// `n0 = 1`, the reduced reward being discounted by `depletion`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepMap {
    pub u: f64,
    pub decay: f64,
    pub gain: f64,
    pub depletion: f64,
    pub reward_p: f64,
    pub reward_n: f64,
    /// Reduced map `x1 = ratio_decay·x0 + ratio_gain`.
    pub ratio_decay: f64,
    pub ratio_gain: f64,
}

impl StepMap {
    pub fn new(u: f64, dt: f64, params: &ModelParams) -> Self {
        let (a, b, c) = (params.a(), params.b(), params.c());
        let k = a - c * u;
        let decay = (-a * dt).exp();
        let depletion = (-c * u * dt).exp();
        let slope = exprel_slope(-c * u * dt, -a * dt);
        StepMap {
            u,
            decay,
            gain: b * u * dt * decay * exprel(k * dt),
            depletion,
            reward_p: (1.0 - u) * dt * exprel(-a * dt),
            reward_n: (1.0 - u) * b * u * dt * dt * slope,
            ratio_decay: (-k * dt).exp(),
            ratio_gain: b * u * dt * exprel(-k * dt),
        }
    }

    #[inline]
    pub fn advance_ratio(&self, x: f64) -> f64 {
        self.ratio_decay * x + self.ratio_gain
    }

    /// Reward per unit resource, measured at the start of the step.
    #[inline]
    pub fn ratio_reward(&self, x: f64) -> f64 {
        self.reward_p * x + self.reward_n
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::rk4_step;
    use proptest::prelude::*;

    fn rk4_reference(u: f64, dt: f64, p0: f64, n0: f64, params: &ModelParams) -> [f64; 3] {
        let (a, b, c) = (params.a(), params.b(), params.c());
        let f = |_t: f64, y: &[f64; 3]| [-a * y[0] + b * y[1] * u, -c * y[1] * u, (1.0 - u) * y[0]];
        let mut y = [p0, n0, 0.0];
        let m = 400;
        for i in 0..m {
            y = rk4_step(&f, i as f64 * dt / m as f64, &y, dt / m as f64);
        }
        y
    }

    #[test]
    fn slope_branches_agree() {
        for z in [-0.3, -0.02, -1e-3, 0.0, 5e-3, 0.2] {
            let h = 1e-5;
            let fd = (exprel(z + h) - exprel(z - h)) / (2.0 * h);
            assert!((exprel_prime(z) - fd).abs() < 1e-8, "{z}");
        }
        let z = 0.01;
        assert!((exprel_prime(z - 1e-12) - exprel_prime(z + 1e-12)).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn step_map_matches_integration(u in 0.0f64..=1.0, p0 in 0.0f64..3.0, n0 in 0.1f64..3.0,
                                        dt in 1e-4f64..0.5) {
            let params = ModelParams::baseline();
            let m = StepMap::new(u, dt, &params);
            let [p1, n1, r] = rk4_reference(u, dt, p0, n0, &params);
            prop_assert!((m.decay * p0 + m.gain * n0 - p1).abs() < 1e-10);
            prop_assert!((m.depletion * n0 - n1).abs() < 1e-12);
            prop_assert!((m.reward_p * p0 + m.reward_n * n0 - r).abs() < 1e-10);
            let x1 = m.advance_ratio(p0 / n0);
            prop_assert!((x1 - p1 / n1).abs() < 1e-9 * (1.0 + x1));
        }

        #[test]
        fn degenerate_rate_is_smooth(dt in 1e-3f64..0.5) {
            // a = c u makes the ratio map linear in time
            let params = ModelParams::new(1.0, 1.0, 2.0, 2.0).unwrap();
            let m = StepMap::new(0.5, dt, &params);
            prop_assert!((m.ratio_decay - 1.0).abs() < 1e-15);
            prop_assert!((m.ratio_gain - 0.5 * dt).abs() < 1e-15);
        }
    }
}
