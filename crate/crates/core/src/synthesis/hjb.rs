//! Finite-difference residual of the reduced HJB equation for a field's
//! own value, obtained by rolling the field out from every grid node.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::field::StrategyField;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HjbGrid {
    pub nt: usize,
    pub nx: usize,
    pub x_max: f64,
    /// Rollout step used for the value at each node.
    pub step: f64,
}

impl HjbGrid {
    /// `200 × 200` nodes on `[0, T] × [0, b/a]` with rollout step `T/2000`.
    pub fn standard(field: &StrategyField) -> Self {
        let p = field.params();
        HjbGrid {
            nt: 200,
            nx: 200,
            x_max: p.b() / p.a(),
            step: p.horizon() / 2000.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HjbReport {
    pub max_residual: f64,
    pub interior_nodes: usize,
    /// Fraction of interior nodes where the maximizing control equals the field's.
    pub argmax_agreement: f64,
    pub max_terminal_value: f64,
}

/// Largest `|Ṽ_t + max_u[-Ṽ_x(ax - (b + cx)u) - Ṽcu + (1 - u)x]|` over grid
/// nodes whose centred stencil stays clear of the field boundary.
pub fn hjb_residual(field: &StrategyField, grid: &HjbGrid) -> Result<HjbReport> {
    if grid.nt < 3 || grid.nx < 3 || !(grid.x_max > 0.0) {
        return Err(Error::Config("HJB grid needs at least 3 × 3 nodes".into()));
    }
    let p = *field.params();
    let (a, b, c) = (p.a(), p.b(), p.c());
    let dt = p.horizon() / (grid.nt - 1) as f64;
    let dx = grid.x_max / (grid.nx - 1) as f64;
    let t_of = |i: usize| dt * i as f64;
    let x_of = |j: usize| dx * j as f64;

    let values: Vec<Vec<f64>> = (0..grid.nt)
        .into_par_iter()
        .map(|i| {
            (0..grid.nx)
                .map(|j| field.value(t_of(i), x_of(j), grid.step))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;

    let max_terminal_value = values[grid.nt - 1].iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let clear = |i: usize, j: usize| {
        let side = |ii: usize, jj: usize| x_of(jj) - field.boundary(t_of(ii));
        let s0 = side(i, j);
        if s0.abs() <= 2.0 * dx {
            return false;
        }
        [(i - 1, j), (i + 1, j), (i, j - 1), (i, j + 1)]
            .iter()
            .all(|&(ii, jj)| {
                let s = side(ii, jj);
                s.abs() > 2.0 * dx && s.signum() == s0.signum()
            })
    };

    let mut max_residual = 0.0f64;
    let mut interior = 0usize;
    let mut agree = 0usize;
    for i in 1..grid.nt - 1 {
        for j in 1..grid.nx - 1 {
            if !clear(i, j) {
                continue;
            }
            let (t, x, v) = (t_of(i), x_of(j), values[i][j]);
            let v_t = (values[i + 1][j] - values[i - 1][j]) / (2.0 * dt);
            let v_x = (values[i][j + 1] - values[i][j - 1]) / (2.0 * dx);
            let switching = v_x * (b + c * x) - c * v - x;
            let u_star = if switching > 0.0 { 1.0 } else { 0.0 };
            let ham = -v_x * a * x + x + u_star * switching;
            max_residual = max_residual.max((v_t + ham).abs());
            interior += 1;
            if u_star == field.feedback(t, x).value() {
                agree += 1;
            }
        }
    }
    if interior == 0 {
        return Err(Error::InsufficientInterior(
            "every grid node lies within two cells of the field boundary".into(),
        ));
    }
    Ok(HjbReport {
        max_residual,
        interior_nodes: interior,
        argmax_agreement: agree as f64 / interior as f64,
        max_terminal_value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelParams;
    use crate::synthesis::{build_field, FieldKind};

    #[test]
    fn coarse_grid_residual_small() {
        let f = build_field(FieldKind::Cooperative, &ModelParams::baseline()).unwrap();
        let g = HjbGrid {
            nt: 60,
            nx: 60,
            x_max: 1.0,
            step: 1e-3,
        };
        let r = hjb_residual(&f, &g).unwrap();
        assert_eq!(r.max_terminal_value, 0.0);
        assert!(r.interior_nodes > 1000);
        assert!(r.max_residual < 5e-2, "{r:?}");
        assert!(r.argmax_agreement >= 0.99, "{r:?}");
    }

    #[test]
    fn tiny_grid_has_no_interior() {
        let f = build_field(FieldKind::Cooperative, &ModelParams::baseline()).unwrap();
        let g = HjbGrid {
            nt: 3,
            nx: 3,
            x_max: 0.01,
            step: 1e-3,
        };
        assert!(matches!(hjb_residual(&f, &g), Err(Error::InsufficientInterior(_))));
    }
}
