//! Gap between individual and aggregate payoffs as the redraw interval shrinks.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::sim::{simulate_population, PopulationConfig, PopulationOutcome};
use crate::error::{Error, Result};
use crate::model::ModelParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub tau: f64,
    #[serde(rename = "N")]
    pub size: usize,
    pub seed: u64,
    #[serde(rename = "F")]
    pub offspring: f64,
    #[serde(rename = "J_agg")]
    pub aggregate_payoff: f64,
    pub gap: f64,
}

impl From<&PopulationOutcome> for SweepRow {
    fn from(o: &PopulationOutcome) -> Self {
        SweepRow {
            tau: o.tau,
            size: o.size,
            seed: o.seed,
            offspring: o.offspring,
            aggregate_payoff: o.aggregate_payoff,
            gap: o.gap,
        }
    }
}

/// One run per `(tau, seed)`; `taus` must be strictly decreasing.
pub fn convergence_sweep(
    target: &(dyn Fn(f64) -> f64 + Sync),
    params: &ModelParams,
    base: &PopulationConfig,
    taus: &[f64],
    seeds: &[u64],
) -> Result<Vec<SweepRow>> {
    if taus.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::Config(format!("interval lengths must decrease: {taus:?}")));
    }
    let mut rows = Vec::with_capacity(taus.len() * seeds.len());
    for &tau in taus {
        for &seed in seeds {
            let cfg = PopulationConfig { tau, seed, ..*base };
            rows.push(SweepRow::from(&simulate_population(target, params, &cfg)?));
        }
    }
    Ok(rows)
}

/// Mean gap per interval length, in the order the lengths first appear.
pub fn mean_gaps(rows: &[SweepRow]) -> Vec<(f64, f64)> {
    let mut out: Vec<(f64, f64, usize)> = Vec::new();
    for r in rows {
        match out.iter_mut().find(|e| e.0 == r.tau) {
            Some(e) => {
                e.1 += r.gap;
                e.2 += 1;
            }
            None => out.push((r.tau, r.gap, 1)),
        }
    }
    out.into_iter().map(|(t, g, k)| (t, g / k as f64)).collect()
}

/// Table `tau,N,seed,F,J_agg,gap`.
pub fn write_sweep_csv<W: Write>(out: W, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
