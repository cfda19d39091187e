//! Degree-one homogeneous control problems and their reduction by the
//! last state component.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Admissible scalar controls `[lower, upper]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlInterval {
    pub lower: f64,
    pub upper: f64,
}

/// A control problem `y' = f(y, u)` maximizing `K(y(t1)) + ∫ L(y, u) dt`,
/// stopped on `𝒯(t, y) = 0`. The last component of `y` is the one
/// factored out by [`reduce`] and must stay positive.
pub trait HomogeneousProblem: Sync {
    fn dim(&self) -> usize;
    fn controls(&self) -> ControlInterval;
    fn dynamics(&self, y: &[f64], u: f64) -> Vec<f64>;
    fn reward(&self, y: &[f64], u: f64) -> f64;
    fn terminal_reward(&self, y: &[f64]) -> f64;
    fn terminal_manifold(&self, t: f64, y: &[f64]) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeSpec {
    pub count: usize,
    pub seed: u64,
    /// Components are drawn from `[0, y_max]`, the last one from `[y_max/20, y_max]`.
    pub y_max: f64,
    pub horizon: f64,
}

impl Default for ProbeSpec {
    fn default() -> Self {
        ProbeSpec {
            count: 1000,
            seed: 0,
            y_max: 2.0,
            horizon: 2.0,
        }
    }
}

/// A probe where `|φ(s·y, u) - s·φ(y, u)|` exceeded the tolerance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub function: String,
    pub y: Vec<f64>,
    pub u: f64,
    pub s: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomogeneityReport {
    pub probes: usize,
    /// Largest `|φ(s·y) - s·φ(y)| / (1 + |s·φ(y)|)` per function name.
    pub max_error: Vec<(String, f64)>,
    pub violations: Vec<Violation>,
}

impl HomogeneityReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

pub const HOMOGENEITY_TOLERANCE: f64 = 1e-9;

fn scaled(y: &[f64], s: f64) -> Vec<f64> {
    y.iter().map(|v| v * s).collect()
}

/// Tests degree-one homogeneity of every `f` component, `L`, `K` and `𝒯`
/// at random `(y, u, s)` with `s ∈ [0.1, 10]`. The first probe uses `s = 1`.
pub fn check_homogeneity<P: HomogeneousProblem + ?Sized>(prob: &P, probes: &ProbeSpec) -> HomogeneityReport {
    let n = prob.dim();
    let ctl = prob.controls();
    let mut rng = ChaCha8Rng::seed_from_u64(probes.seed);
    let mut names: Vec<String> = (0..n).map(|i| format!("f[{i}]")).collect();
    names.extend(["L", "K", "T"].map(String::from));
    let mut max_error = vec![0.0f64; names.len()];
    let mut violations = Vec::new();

    for k in 0..probes.count {
        let mut y: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..=probes.y_max)).collect();
        y[n - 1] = rng.random_range(probes.y_max / 20.0..=probes.y_max);
        let u = rng.random_range(ctl.lower..=ctl.upper);
        let t = rng.random_range(0.0..=probes.horizon);
        let s = if k == 0 { 1.0 } else { rng.random_range(0.1..=10.0) };
        let ys = scaled(&y, s);

        let mut pairs: Vec<(f64, f64)> = prob
            .dynamics(&ys, u)
            .into_iter()
            .zip(prob.dynamics(&y, u))
            .collect();
        pairs.push((prob.reward(&ys, u), prob.reward(&y, u)));
        pairs.push((prob.terminal_reward(&ys), prob.terminal_reward(&y)));
        pairs.push((prob.terminal_manifold(t, &ys), prob.terminal_manifold(t, &y)));

        for (i, (at_scaled, at_y)) in pairs.into_iter().enumerate() {
            let expect = s * at_y;
            let err = (at_scaled - expect).abs() / (1.0 + expect.abs());
            max_error[i] = max_error[i].max(err);
            if !(err <= HOMOGENEITY_TOLERANCE) {
                violations.push(Violation {
                    function: names[i].clone(),
                    y: y.clone(),
                    u,
                    s,
                    error: err,
                });
            }
        }
    }
    HomogeneityReport {
        probes: probes.count,
        max_error: names.into_iter().zip(max_error).collect(),
        violations,
    }
}

/// The reduced problem in `x = y[..n-1] / y[n-1]`, with running reward
/// discounted by `y_n(t) / y_n(0) = exp(∫ f̃_n)`.
#[derive(Debug, Clone, Copy)]
pub struct ReducedProblem<'a, P: ?Sized> {
    prob: &'a P,
}

/// Builds the reduced problem after checking homogeneity with default probes.
pub fn reduce<P: HomogeneousProblem + ?Sized>(prob: &P) -> Result<ReducedProblem<'_, P>> {
    if prob.dim() < 2 {
        return Err(Error::Config("reduction needs at least two state components".into()));
    }
    let report = check_homogeneity(prob, &ProbeSpec::default());
    if let Some(v) = report.violations.first() {
        return Err(Error::Domain(format!(
            "{} is not homogeneous of degree one (error {:e} at s = {})",
            v.function, v.error, v.s
        )));
    }
    Ok(ReducedProblem { prob })
}

impl<'a, P: HomogeneousProblem + ?Sized> ReducedProblem<'a, P> {
    pub fn original(&self) -> &'a P {
        self.prob
    }

    pub fn dim(&self) -> usize {
        self.prob.dim() - 1
    }

    /// `(x, 1)`.
    pub fn lift(&self, x: &[f64]) -> Vec<f64> {
        let mut y = x.to_vec();
        y.push(1.0);
        y
    }

    /// `(x, y_n)` from a full state.
    pub fn project(&self, y: &[f64]) -> (Vec<f64>, f64) {
        let (head, last) = y.split_at(y.len() - 1);
        let yn = last[0];
        (head.iter().map(|v| v / yn).collect(), yn)
    }

    /// `f̃_n(x, u)`: relative growth rate of the eliminated component.
    pub fn discount_rate(&self, x: &[f64], u: f64) -> f64 {
        self.prob.dynamics(&self.lift(x), u)[self.dim()]
    }

    /// `g̃(x, u) = f̃^{n-1}(x, u) - x·f̃_n(x, u)`.
    pub fn dynamics(&self, x: &[f64], u: f64) -> Vec<f64> {
        let f = self.prob.dynamics(&self.lift(x), u);
        let rate = f[self.dim()];
        x.iter().zip(&f).map(|(xi, fi)| fi - xi * rate).collect()
    }

    pub fn reward(&self, x: &[f64], u: f64) -> f64 {
        self.prob.reward(&self.lift(x), u)
    }

    /// `K̃(x)`, weighted by `y_n(t1)` in the reduced criterion.
    pub fn terminal_reward(&self, x: &[f64]) -> f64 {
        self.prob.terminal_reward(&self.lift(x))
    }

    pub fn terminal_manifold(&self, t: f64, x: &[f64]) -> f64 {
        self.prob.terminal_manifold(t, &self.lift(x))
    }

    /// Reduced Hamiltonian `f̃_n·Ṽ + λ·g̃ + L̃`.
    pub fn hamiltonian(&self, x: &[f64], u: f64, lambda: &[f64], value: f64) -> f64 {
        let g = self.dynamics(x, u);
        self.discount_rate(x, u) * value + lambda.iter().zip(&g).map(|(l, gi)| l * gi).sum::<f64>() + self.reward(x, u)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelParams;
    use crate::reduction::SeasonProblem;
    use proptest::{prop_assert, prop_assert_eq, proptest};

    struct SquaredReward(SeasonProblem);

    impl HomogeneousProblem for SquaredReward {
        fn dim(&self) -> usize {
            2
        }
        fn controls(&self) -> ControlInterval {
            self.0.controls()
        }
        fn dynamics(&self, y: &[f64], u: f64) -> Vec<f64> {
            self.0.dynamics(y, u)
        }
        fn reward(&self, y: &[f64], u: f64) -> f64 {
            (1.0 - u) * y[0] * y[0]
        }
        fn terminal_reward(&self, y: &[f64]) -> f64 {
            self.0.terminal_reward(y)
        }
        fn terminal_manifold(&self, t: f64, y: &[f64]) -> f64 {
            self.0.terminal_manifold(t, y)
        }
    }

    fn season() -> SeasonProblem {
        SeasonProblem::new(ModelParams::baseline())
    }

    #[test]
    fn season_problem_is_homogeneous() {
        let r = check_homogeneity(&season(), &ProbeSpec::default());
        assert!(r.passed(), "{:?}", r.violations.first());
        assert_eq!(r.max_error.len(), 5);
    }

    #[test]
    fn squared_reward_is_flagged() {
        let prob = SquaredReward(season());
        let r = check_homogeneity(&prob, &ProbeSpec::default());
        assert!(!r.passed());
        assert!(r.violations.iter().all(|v| v.function == "L"));
        // the identity probe never violates
        assert!(r.violations.iter().all(|v| v.s != 1.0));
        assert!(reduce(&prob).is_err());
    }

    #[test]
    fn identity_scale_is_exact() {
        let prob = SquaredReward(season());
        let r = check_homogeneity(&prob, &ProbeSpec { count: 1, ..ProbeSpec::default() });
        assert!(r.passed());
        assert!(r.max_error.iter().all(|(_, e)| *e == 0.0));
    }

    #[test]
    fn season_reduction_matches_model() {
        let p = ModelParams::baseline();
        let prob = SeasonProblem::new(p);
        let red = reduce(&prob).unwrap();
        assert_eq!(red.dim(), 1);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let x = rng.random_range(0.0..3.0);
            let u = rng.random_range(0.0..=1.0);
            let rate = -p.a() * x + (p.b() + p.c() * x) * u;
            assert!((red.dynamics(&[x], u)[0] - rate).abs() <= 1e-12 * (1.0 + rate.abs()));
            assert!((red.discount_rate(&[x], u) + p.c() * u).abs() <= 1e-15);
            assert_eq!(red.reward(&[x], u), (1.0 - u) * x);
        }
        assert_eq!(red.terminal_manifold(p.horizon(), &[0.4]), 0.0);
    }

    proptest! {
        #[test]
        fn project_inverts_scaling(x in 0.0f64..5.0, yn in 0.01f64..10.0) {
            let prob = season();
            let red = reduce(&prob).unwrap();
            let (x1, yn1) = red.project(&[x * yn, yn]);
            prop_assert!((x1[0] - x).abs() <= 1e-12 * (1.0 + x));
            prop_assert_eq!(yn1, yn);
        }
    }
}
