//! Numerical checks of the reduction: trajectories, payoffs, values and
//! the Hamilton-Jacobi equation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::SeasonProblem;
use super::problem::{check_homogeneity, reduce, HomogeneousProblem, ProbeSpec, ReducedProblem};
use crate::error::{Error, Result};
use crate::model::{build_time_grid, ModelParams, PiecewiseConstant, Schedule};
use crate::oracle::{solve_full, solve_reduced, ControlMesh, FullGridSpec, ReducedGridSpec};

fn rk4(f: &dyn Fn(&[f64]) -> Vec<f64>, y: &[f64], h: f64) -> Vec<f64> {
    let shift = |base: &[f64], k: &[f64], w: f64| -> Vec<f64> { base.iter().zip(k).map(|(a, b)| a + w * b).collect() };
    let k1 = f(y);
    let k2 = f(&shift(y, &k1, 0.5 * h));
    let k3 = f(&shift(y, &k2, 0.5 * h));
    let k4 = f(&shift(y, &k3, h));
    (0..y.len())
        .map(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect()
}

/// One schedule run in both coordinate systems.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleIdentity {
    pub full_payoff: f64,
    /// `y_n(0)` times the discounted reduced payoff.
    pub reduced_payoff: f64,
    pub payoff_rel_err: f64,
    /// Sup over grid times of `|y - y_n·(x, 1)|` relative to `1 + |y|`.
    pub state_sup_err: f64,
    /// Sup of `|y_n - y_n(0)·exp(∫ f̃_n)|` relative to `y_n`.
    pub discount_sup_err: f64,
}

/// Integrates `y` directly and `(x, ∫ f̃_n, reduced payoff)` side by side
/// under the same open-loop schedule on `[0, t1]`.
pub fn schedule_identity<P, S>(
    reduced: &ReducedProblem<'_, P>,
    y0: &[f64],
    schedule: &S,
    t1: f64,
    step: f64,
) -> Result<ScheduleIdentity>
where
    P: HomogeneousProblem + ?Sized,
    S: Schedule + ?Sized,
{
    let prob = reduced.original();
    let n = prob.dim();
    if y0.len() != n || !(y0[n - 1] > 0.0) {
        return Err(Error::InvalidState(format!("initial state {y0:?} needs {n} components, the last positive")));
    }
    let grid = build_time_grid(0.0, t1, step, &schedule.breakpoints())?;
    let (x0, yn0) = reduced.project(y0);

    // full: (y, payoff)
    let mut full: Vec<f64> = y0.iter().copied().chain([0.0]).collect();
    // reduced: (x, log-discount, payoff)
    let mut red: Vec<f64> = x0.iter().copied().chain([0.0, 0.0]).collect();
    let (mut state_err, mut disc_err) = (0.0f64, 0.0f64);
    for w in grid.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let u = schedule.value_in_step(0.5 * (lo + hi), lo, hi);
        let f_full = |z: &[f64]| {
            let mut d = prob.dynamics(&z[..n], u);
            d.push(prob.reward(&z[..n], u));
            d
        };
        let f_red = |z: &[f64]| {
            let x = &z[..n - 1];
            let mut d = reduced.dynamics(x, u);
            d.push(reduced.discount_rate(x, u));
            d.push(z[n - 1].exp() * reduced.reward(x, u));
            d
        };
        full = rk4(&f_full, &full, hi - lo);
        red = rk4(&f_red, &red, hi - lo);

        let yn = yn0 * red[n - 1].exp();
        disc_err = disc_err.max((full[n - 1] - yn).abs() / full[n - 1].abs());
        for i in 0..n {
            let rebuilt = if i < n - 1 { yn * red[i] } else { yn };
            state_err = state_err.max((full[i] - rebuilt).abs() / (1.0 + full[i].abs()));
        }
    }
    let y1 = &full[..n];
    let full_payoff = full[n] + prob.terminal_reward(y1);
    let yn1 = yn0 * red[n - 1].exp();
    let reduced_payoff = yn0 * red[n] + yn1 * reduced.terminal_reward(&red[..n - 1]);
    Ok(ScheduleIdentity {
        full_payoff,
        reduced_payoff,
        payoff_rel_err: (full_payoff - reduced_payoff).abs() / full_payoff.abs().max(f64::MIN_POSITIVE),
        state_sup_err: state_err,
        discount_sup_err: disc_err,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueProbe {
    pub y: Vec<f64>,
    pub full: f64,
    /// `y_n·Ṽ(x)`.
    pub reduced: f64,
    pub rel_err: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueHomogeneity {
    pub probes: Vec<ValueProbe>,
    pub max_rel_err: f64,
}

/// Compares `V(y)` with `y_n·Ṽ(y[..n-1] / y_n)` using caller-supplied estimators.
pub fn verify_value_homogeneity<P, F, R>(
    reduced: &ReducedProblem<'_, P>,
    full_value: F,
    reduced_value: R,
    probes: &[Vec<f64>],
) -> Result<ValueHomogeneity>
where
    P: HomogeneousProblem + ?Sized,
    F: Fn(&[f64]) -> Result<f64>,
    R: Fn(&[f64]) -> Result<f64>,
{
    let mut out = Vec::with_capacity(probes.len());
    for y in probes {
        let (x, yn) = reduced.project(y);
        let full = full_value(y)?;
        let red = yn * reduced_value(&x)?;
        out.push(ValueProbe {
            y: y.clone(),
            full,
            reduced: red,
            rel_err: (full - red).abs() / full.abs().max(f64::MIN_POSITIVE),
        });
    }
    let max_rel_err = out.iter().map(|p| p.rel_err).fold(0.0, f64::max);
    Ok(ValueHomogeneity { probes: out, max_rel_err })
}

/// Largest relative gap between the generic reduced Hamiltonian of the
/// season problem and `λ(-ax + (b + cx)u) - Ṽcu + (1 - u)x`, with the
/// reduced rate checked against `-ax + (b + cx)u` and the discount rate
/// against `-cu`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeasonIdentities {
    pub rate_err: f64,
    pub discount_err: f64,
    pub hamiltonian_err: f64,
    /// `g̃(y_1 / y_n)` against the quotient rule applied to `f(y)`.
    pub ratio_derivative_err: f64,
}

pub fn season_identities(params: &ModelParams, probes: usize, seed: u64) -> Result<SeasonIdentities> {
    let prob = SeasonProblem::new(*params);
    let red = reduce(&prob)?;
    let (a, b, c) = (params.a(), params.b(), params.c());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = SeasonIdentities {
        rate_err: 0.0,
        discount_err: 0.0,
        hamiltonian_err: 0.0,
        ratio_derivative_err: 0.0,
    };
    let rel = |got: f64, want: f64| (got - want).abs() / (1.0 + want.abs());
    for _ in 0..probes {
        let x = rng.random_range(0.0..3.0);
        let u = rng.random_range(0.0..=1.0);
        let lambda = rng.random_range(-2.0..2.0);
        let value = rng.random_range(0.0..2.0);
        let rate = -a * x + (b + c * x) * u;
        out.rate_err = out.rate_err.max(rel(red.dynamics(&[x], u)[0], rate));
        out.discount_err = out.discount_err.max(rel(red.discount_rate(&[x], u), -c * u));
        let h = lambda * rate - value * c * u + (1.0 - u) * x;
        out.hamiltonian_err = out.hamiltonian_err.max(rel(red.hamiltonian(&[x], u, &[lambda], value), h));

        let yn = rng.random_range(0.05..3.0);
        let y = [x * yn, yn];
        let f = prob.dynamics(&y, u);
        let quotient = (f[0] * y[1] - y[0] * f[1]) / (y[1] * y[1]);
        out.ratio_derivative_err = out.ratio_derivative_err.max(rel(red.dynamics(&[y[0] / y[1]], u)[0], quotient));
    }
    Ok(out)
}

/// Grid resolutions for the value comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValueGrids {
    pub full: FullGridSpec,
    pub reduced: ReducedGridSpec,
    pub full_controls: usize,
    pub reduced_controls: usize,
}

impl ValueGrids {
    /// `400³` full grid over `n(0) ∈ [0.5, 2]`, `2000²` reduced grid.
    pub fn standard(params: &ModelParams) -> Self {
        ValueGrids {
            full: FullGridSpec::covering(params, 0.5, 2.0, 400, 400, 400),
            reduced: ReducedGridSpec::with_resolution(params, 2000, 2000),
            full_controls: 11,
            reduced_controls: 21,
        }
    }
}

/// Full-grid `V(0, p, n)` against `n·Ṽ(0, p/n)` for the season problem.
pub fn season_value_homogeneity(params: &ModelParams, grids: &ValueGrids, probes: &[Vec<f64>]) -> Result<ValueHomogeneity> {
    let prob = SeasonProblem::new(*params);
    let red = reduce(&prob)?;
    let full = solve_full(params, &grids.full, &ControlMesh::uniform(grids.full_controls)?)?;
    let reduced = solve_reduced(params, &grids.reduced, &ControlMesh::uniform(grids.reduced_controls)?)?;
    verify_value_homogeneity(&red, |y| full.value_at(y[0], y[1]), |x| Ok(reduced.value_at(0, x[0])), probes)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckEntry {
    pub name: String,
    pub error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// JSON report `{checks, max_rel_err}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionReport {
    pub checks: Vec<CheckEntry>,
    pub max_rel_err: f64,
}

impl ReductionReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Every reduction check on the season problem. The grid comparison runs
/// only when `grids` is given.
pub fn season_report(params: &ModelParams, seed: u64, grids: Option<&ValueGrids>) -> Result<ReductionReport> {
    let prob = SeasonProblem::new(*params);
    let probes = ProbeSpec {
        seed,
        horizon: params.horizon(),
        ..ProbeSpec::default()
    };
    let mut checks = Vec::new();
    let mut push = |name: &str, error: f64, tolerance: f64| {
        checks.push(CheckEntry {
            name: name.to_string(),
            error,
            tolerance,
            passed: error <= tolerance,
        })
    };
    let hom = check_homogeneity(&prob, &probes);
    for (name, err) in &hom.max_error {
        push(&format!("homogeneity {name}"), *err, 1e-9);
    }
    let ids = season_identities(params, 1000, seed)?;
    push("reduced dynamics", ids.rate_err, 1e-12);
    push("discount rate", ids.discount_err, 1e-12);
    push("hamiltonian", ids.hamiltonian_err, 1e-12);
    push("ratio derivative", ids.ratio_derivative_err, 1e-9);

    let red = reduce(&prob)?;
    let t = params.horizon();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut payoff_err = 0.0f64;
    let mut state_err = 0.0f64;
    let mut disc_err = 0.0f64;
    for _ in 0..5 {
        let values: Vec<f64> = (0..20).map(|_| rng.random_range(0.0..=1.0)).collect();
        let sched = PiecewiseConstant::uniform(t, 20, 0.0)?.with_values(values)?;
        let y0 = [rng.random_range(0.0..1.0), rng.random_range(0.2..2.0)];
        let id = schedule_identity(&red, &y0, &sched, t, t / 2000.0)?;
        payoff_err = payoff_err.max(id.payoff_rel_err);
        state_err = state_err.max(id.state_sup_err);
        disc_err = disc_err.max(id.discount_sup_err);
    }
    push("schedule payoff", payoff_err, 1e-8);
    push("trajectory reconstruction", state_err, 1e-8);
    push("discount factor", disc_err, 1e-8);

    if let Some(g) = grids {
        let probes = vec![vec![0.3, 1.0], vec![0.6, 2.0], vec![0.15, 0.5]];
        let vh = season_value_homogeneity(params, g, &probes)?;
        push("grid value homogeneity", vh.max_rel_err, 2e-2);
    }
    let max_rel_err = checks.iter().map(|c| c.error).fold(0.0, f64::max);
    Ok(ReductionReport { checks, max_rel_err })
}
