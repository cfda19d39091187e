//! Principal branch of the Lambert W function and the explicit form of the
//! cooperative singular arc.

use crate::error::{Error, Result};
use crate::model::ModelParams;

/// `W0(z)` for `z >= -1/e` by Halley iteration.
pub fn lambert_w0(z: f64) -> Result<f64> {
    let branch = -(-1.0f64).exp();
    if !(z >= branch) || !z.is_finite() {
        return Err(Error::Domain(format!("W0 needs z >= -1/e, got {z}")));
    }
    if z == 0.0 {
        return Ok(0.0);
    }
    let mut w = if z < 1.0 {
        // series about the branch point
        let q = (2.0 * (1.0 + std::f64::consts::E * z)).max(0.0).sqrt();
        -1.0 + q - q * q / 3.0
    } else {
        let l = z.ln();
        l - l.max(1.0).ln()
    };
    for _ in 0..100 {
        let e = w.exp();
        let f = w * e - z;
        let wp1 = w + 1.0;
        if wp1.abs() < 1e-300 {
            break;
        }
        let step = f / (e * wp1 - (w + 2.0) * f / (2.0 * wp1));
        w -= step;
        if step.abs() <= 1e-15 * (1.0 + w.abs()) {
            break;
        }
    }
    Ok(w)
}

/// Cooperative arc as an explicit function of time:
/// `x(t) = (2b/c) / W0((2a/c) exp(a(T - t) + 4a/c))`.
pub fn coop_arc_explicit(t: f64, params: &ModelParams) -> Result<f64> {
    let (a, b, c) = (params.a(), params.b(), params.c());
    let z = (2.0 * a / c) * (a * (params.horizon() - t) + 4.0 * a / c).exp();
    Ok(2.0 * b / (c * lambert_w0(z)?))
}
