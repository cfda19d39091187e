//! Individuals with on/off controls sharing one resource.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{exprel, ModelParams};
use crate::oracle::maps::{exprel_slope, StepMap};

/// How the feeding individuals are chosen on each interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PopulationMode {
    /// Every individual redraws independently with probability `target(t)`.
    RandomRedraw,
    /// Individuals are ranked once at random; the first `round(target(t)·N)` feed.
    FixedSplit,
}

impl std::fmt::Display for PopulationMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PopulationMode::RandomRedraw => "random-redraw",
            PopulationMode::FixedSplit => "fixed-split",
        })
    }
}

impl std::str::FromStr for PopulationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random-redraw" => Ok(PopulationMode::RandomRedraw),
            "fixed-split" => Ok(PopulationMode::FixedSplit),
            _ => Err(Error::Config(format!("unknown population mode {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PopulationConfig {
    /// Number of individuals.
    pub size: usize,
    /// Length of the intervals on which controls stay fixed; must divide `T`.
    pub tau: f64,
    pub mode: PopulationMode,
    pub seed: u64,
    /// Common initial energy.
    pub p0: f64,
    pub n0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PopulationOutcome {
    pub mode: PopulationMode,
    #[serde(rename = "N")]
    pub size: usize,
    pub tau: f64,
    pub seed: u64,
    /// Mean over individuals of `∫ (1 - v_i) π_i dt`.
    #[serde(rename = "F")]
    pub offspring: f64,
    /// `∫ (1 - u) p dt` on the aggregate control and energy.
    #[serde(rename = "J_agg")]
    pub aggregate_payoff: f64,
    pub gap: f64,
    /// `|F - ∫ mean_i (1 - v_i) π_i dt| / F`.
    pub fubini_err: f64,
    /// Sup over interval ends of the relative distance between the aggregate
    /// `(p, n)` and the monomorphic trajectory under the target.
    pub trajectory_err: f64,
    /// Time averages of the realized aggregate control and of the target.
    pub u_mean: f64,
    pub target_mean: f64,
    /// Payoff of a monomorphic population playing the target.
    #[serde(rename = "J_target")]
    pub target_payoff: f64,
}

const CHUNK: usize = 256;

struct Individual {
    rng: ChaCha8Rng,
    energy: f64,
    offspring: f64,
    feeding: bool,
    rank: usize,
}

/// Runs one season. `target` gives the fraction of feeders at the midpoint
/// of each interval and is clamped to `[0, 1]`.
pub fn simulate_population(
    target: &(dyn Fn(f64) -> f64 + Sync),
    params: &ModelParams,
    cfg: &PopulationConfig,
) -> Result<PopulationOutcome> {
    let horizon = params.horizon();
    if cfg.size == 0 {
        return Err(Error::Config("population needs at least one individual".into()));
    }
    if !(cfg.tau > 0.0 && cfg.tau.is_finite()) {
        return Err(Error::Config(format!("interval length must be positive, got {}", cfg.tau)));
    }
    let steps = (horizon / cfg.tau).round() as usize;
    if steps == 0 || (steps as f64 * cfg.tau - horizon).abs() > 1e-9 * horizon {
        return Err(Error::Config(format!("interval {} does not divide the season {horizon}", cfg.tau)));
    }
    if !(cfg.p0 >= 0.0 && cfg.n0 > 0.0) {
        return Err(Error::InvalidState(format!("initial state ({}, {})", cfg.p0, cfg.n0)));
    }
    let tau = horizon / steps as f64;
    let (a, b, c) = (params.a(), params.b(), params.c());
    let size = cfg.size;

    let mut ranks: Vec<usize> = (0..size).collect();
    let mut rng0 = ChaCha8Rng::seed_from_u64(cfg.seed);
    ranks.shuffle(&mut rng0);
    let mut pop: Vec<Individual> = ranks
        .into_iter()
        .enumerate()
        .map(|(i, rank)| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(i as u64 + 1);
            Individual {
                rng,
                energy: cfg.p0,
                offspring: 0.0,
                feeding: false,
                rank,
            }
        })
        .collect();

    let decay = (-a * tau).exp();
    let coast_integral = tau * exprel(-a * tau);
    let (mut n, mut p_mono, mut n_mono) = (cfg.n0, cfg.p0, cfg.n0);
    let (mut j_agg, mut cross, mut j_target) = (0.0, 0.0, 0.0);
    let (mut u_sum, mut target_sum, mut traj_err) = (0.0, 0.0, 0.0f64);

    for k in 0..steps {
        let u_target = target((k as f64 + 0.5) * tau).clamp(0.0, 1.0);
        let quota = (u_target * size as f64).round() as usize;
        let mode = cfg.mode;
        let feeders: usize = pop
            .par_chunks_mut(CHUNK)
            .map(|chunk| {
                let mut m = 0;
                for ind in chunk {
                    ind.feeding = match mode {
                        PopulationMode::RandomRedraw => ind.rng.random::<f64>() < u_target,
                        PopulationMode::FixedSplit => ind.rank < quota,
                    };
                    m += ind.feeding as usize;
                }
                m
            })
            .collect::<Vec<_>>()
            .into_iter()
            .sum();
        let u = feeders as f64 / size as f64;

        let feed_gain = b * n * tau * decay * exprel((a - c * u) * tau);
        let feed_integral = b * n * tau * tau * exprel_slope(-c * u * tau, -a * tau);
        let sums: Vec<(f64, f64, f64)> = pop
            .par_chunks_mut(CHUNK)
            .map(|chunk| {
                let (mut all, mut laid, mut energy) = (0.0, 0.0, 0.0);
                for ind in chunk {
                    let integral = ind.energy * coast_integral + if ind.feeding { feed_integral } else { 0.0 };
                    all += integral;
                    if ind.feeding {
                        ind.energy = decay * ind.energy + feed_gain;
                    } else {
                        ind.offspring += integral;
                        laid += integral;
                        ind.energy *= decay;
                    }
                    energy += ind.energy;
                }
                (all, laid, energy)
            })
            .collect();
        let (all, laid, energy) = sums
            .into_iter()
            .fold((0.0, 0.0, 0.0), |s, q| (s.0 + q.0, s.1 + q.1, s.2 + q.2));
        j_agg += (1.0 - u) * all / size as f64;
        cross += laid / size as f64;
        n *= (-c * u * tau).exp();

        let mono = StepMap::new(u_target, tau, params);
        j_target += mono.reward_p * p_mono + mono.reward_n * n_mono;
        p_mono = mono.decay * p_mono + mono.gain * n_mono;
        n_mono *= mono.depletion;
        let p_agg = energy / size as f64;
        traj_err = traj_err
            .max((p_agg - p_mono).abs() / p_mono.abs().max(f64::MIN_POSITIVE))
            .max((n - n_mono).abs() / n_mono);
        u_sum += u;
        target_sum += u_target;
    }

    let offspring = pop
        .par_chunks(CHUNK)
        .map(|chunk| chunk.iter().map(|ind| ind.offspring).sum::<f64>())
        .collect::<Vec<_>>()
        .into_iter()
        .sum::<f64>()
        / size as f64;
    Ok(PopulationOutcome {
        mode: cfg.mode,
        size,
        tau,
        seed: cfg.seed,
        offspring,
        aggregate_payoff: j_agg,
        gap: (offspring - j_agg).abs(),
        fubini_err: (offspring - cross).abs() / offspring.abs().max(f64::MIN_POSITIVE),
        trajectory_err: traj_err,
        u_mean: u_sum / steps as f64,
        target_mean: target_sum / steps as f64,
        target_payoff: j_target,
    })
}
