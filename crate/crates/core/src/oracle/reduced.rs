//! Backward induction for the reduced value `Ṽ(t, x)`.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::maps::StepMap;
use crate::error::{Error, Result};
use crate::model::ModelParams;

/// Control values tried at every node. Always contains 0 and 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ControlMesh(Vec<f64>);

impl ControlMesh {
    /// `points` equally spaced values on `[0, 1]`.
    pub fn uniform(points: usize) -> Result<Self> {
        if points < 2 {
            return Err(Error::Config(format!("control mesh needs at least 2 points, got {points}")));
        }
        let step = 1.0 / (points - 1) as f64;
        Self::new((0..points).map(|i| (i as f64 * step).min(1.0)).collect())
    }

    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|u| !(0.0..=1.0).contains(u)) {
            return Err(Error::Config(format!("control mesh values must lie in [0, 1]: {values:?}")));
        }
        values.sort_by(f64::total_cmp);
        values.dedup();
        if values.first() != Some(&0.0) || values.last() != Some(&1.0) {
            return Err(Error::Config("control mesh must contain 0 and 1".into()));
        }
        if values.len() > u8::MAX as usize {
            return Err(Error::Config(format!("control mesh too fine: {} points", values.len())));
        }
        Ok(ControlMesh(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn interior_points(&self) -> usize {
        self.0.len() - 2
    }
}

impl Default for ControlMesh {
    fn default() -> Self {
        Self::uniform(21).expect("valid mesh")
    }
}

impl TryFrom<Vec<f64>> for ControlMesh {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        ControlMesh::new(v)
    }
}

impl From<ControlMesh> for Vec<f64> {
    fn from(m: ControlMesh) -> Self {
        m.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReducedGridSpec {
    /// Number of time steps.
    pub nt: usize,
    /// Number of `x` nodes on `[0, x_max]`.
    pub nx: usize,
    pub x_max: f64,
}

impl ReducedGridSpec {
    /// Smallest upper bound that contains every optimal trajectory started
    /// at or below `b/(4a)`.
    pub fn min_x_max(params: &ModelParams) -> f64 {
        params.b() / (4.0 * params.a()) * (params.a() * params.horizon()).exp()
    }

    /// `nt × nx` grid reaching 5% past [`Self::min_x_max`].
    pub fn with_resolution(params: &ModelParams, nt: usize, nx: usize) -> Self {
        ReducedGridSpec {
            nt,
            nx,
            x_max: 1.05 * Self::min_x_max(params),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.nt == 0 || self.nx < 2 || !(self.x_max.is_finite() && self.x_max > 0.0) {
            return Err(Error::Config(format!("bad reduced grid {self:?}")));
        }
        Ok(())
    }
}

/// Solved reduced grid. Rows are time levels `0..=nt`, columns `x` nodes.
#[derive(Debug, Clone)]
pub struct ValueGrid {
    params: ModelParams,
    spec: ReducedGridSpec,
    mesh: ControlMesh,
    values: Vec<f64>,
    policy: Vec<u8>,
    clamped: usize,
}

/// Linear interpolation on a uniform grid starting at 0; returns the value
/// and whether `x` lay past the last node.
#[inline]
fn interp(row: &[f64], dx: f64, x: f64) -> (f64, bool) {
    let last = row.len() - 1;
    let s = (x / dx).max(0.0);
    if s >= last as f64 {
        return (row[last], s > last as f64 + 1e-9);
    }
    let j = s as usize;
    let w = s - j as f64;
    (row[j] + w * (row[j + 1] - row[j]), false)
}

/// Backward semi-Lagrangian induction with exact constant-control steps.
/// Landing points past `x_max` read the last node; each node whose chosen
/// control lands there is counted in [`ValueGrid::clamped`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub x: f64,
    pub value: f64,
}

/// JSON summary of `Ṽ(0, x)` at probe points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeSummary {
    pub params: ModelParams,
    pub grid: ReducedGridSpec,
    pub controls: usize,
    pub clamped: usize,
    pub probes: Vec<Probe>,
}

/// One step of a forward pass driven by the solved values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyStep {
    pub t: f64,
    pub x: f64,
    pub u: f64,
}

pub fn solve_reduced(params: &ModelParams, spec: &ReducedGridSpec, mesh: &ControlMesh) -> Result<ValueGrid> {
    spec.validate()?;
    let dt = params.horizon() / spec.nt as f64;
    let dx = spec.x_max / (spec.nx - 1) as f64;
    let maps: Vec<StepMap> = mesh.values().iter().map(|&u| StepMap::new(u, dt, params)).collect();
    let nx = spec.nx;
    let mut values = vec![0.0; (spec.nt + 1) * nx];
    let mut policy = vec![0u8; (spec.nt + 1) * nx];
    let mut clamped = 0;

    for i in (0..spec.nt).rev() {
        let (head, tail) = values.split_at_mut((i + 1) * nx);
        let next = &tail[..nx];
        let row = &mut head[i * nx..];
        let pol = &mut policy[i * nx..(i + 1) * nx];
        clamped += row
            .par_iter_mut()
            .zip(pol.par_iter_mut())
            .enumerate()
            .map(|(j, (v, k))| {
                let x = j as f64 * dx;
                let mut best = (f64::NEG_INFINITY, 0usize, false);
                for (m, map) in maps.iter().enumerate() {
                    let (cont, out) = interp(next, dx, map.advance_ratio(x));
                    let q = map.ratio_reward(x) + map.depletion * cont;
                    if q > best.0 {
                        best = (q, m, out);
                    }
                }
                *v = best.0;
                *k = best.1 as u8;
                best.2 as usize
            })
            .sum::<usize>();
    }
    Ok(ValueGrid {
        params: *params,
        spec: *spec,
        mesh: mesh.clone(),
        values,
        policy,
        clamped,
    })
}

impl ValueGrid {
    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn spec(&self) -> &ReducedGridSpec {
        &self.spec
    }

    pub fn mesh(&self) -> &ControlMesh {
        &self.mesh
    }

    pub fn dt(&self) -> f64 {
        self.params.horizon() / self.spec.nt as f64
    }

    pub fn dx(&self) -> f64 {
        self.spec.x_max / (self.spec.nx - 1) as f64
    }

    pub fn t(&self, i: usize) -> f64 {
        i as f64 * self.dt()
    }

    pub fn x(&self, j: usize) -> f64 {
        j as f64 * self.dx()
    }

    /// Nodes whose maximizing step left the grid.
    pub fn clamped(&self) -> usize {
        self.clamped
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.spec.nx..(i + 1) * self.spec.nx]
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.spec.nx + j]
    }

    pub fn policy(&self, i: usize, j: usize) -> f64 {
        self.mesh.values()[self.policy[i * self.spec.nx + j] as usize]
    }

    /// `Ṽ(t_i, x)` by linear interpolation.
    pub fn value_at(&self, i: usize, x: f64) -> f64 {
        interp(self.row(i), self.dx(), x).0
    }

    pub fn probe_summary(&self, xs: &[f64]) -> ProbeSummary {
        ProbeSummary {
            params: self.params,
            grid: self.spec,
            controls: self.mesh.values().len(),
            clamped: self.clamped,
            probes: xs.iter().map(|&x| Probe { x, value: self.value_at(0, x) }).collect(),
        }
    }

    /// Forward pass from `x0` at `t = 0`, re-maximizing over the mesh at the
    /// actual state of every step. Also returns the accrued reduced payoff.
    pub fn follow(&self, x0: f64) -> (Vec<PolicyStep>, f64) {
        let dt = self.dt();
        let maps: Vec<StepMap> = self.mesh.values().iter().map(|&u| StepMap::new(u, dt, &self.params)).collect();
        let (mut x, mut discount, mut payoff) = (x0, 1.0, 0.0);
        let mut steps = Vec::with_capacity(self.spec.nt);
        for i in 0..self.spec.nt {
            let next = self.row(i + 1);
            let best = maps
                .iter()
                .map(|m| (m.ratio_reward(x) + m.depletion * interp(next, self.dx(), m.advance_ratio(x)).0, m))
                .fold((f64::NEG_INFINITY, &maps[0]), |acc, q| if q.0 > acc.0 { q } else { acc })
                .1;
            steps.push(PolicyStep { t: self.t(i), x, u: best.u });
            payoff += discount * best.ratio_reward(x);
            discount *= best.depletion;
            x = best.advance_ratio(x);
        }
        (steps, payoff)
    }

    /// Table `t,x,value,policy`, keeping every `stride`-th node on both axes.
    pub fn write_csv<W: Write>(&self, out: W, stride: usize) -> Result<()> {
        let stride = stride.max(1);
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "x", "value", "policy"])?;
        for i in (0..=self.spec.nt).step_by(stride) {
            for j in (0..self.spec.nx).step_by(stride) {
                w.write_record([
                    self.t(i).to_string(),
                    self.x(j).to_string(),
                    self.value(i, j).to_string(),
                    self.policy(i, j).to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}
