//! Empirical feeding boundary read off a solved policy.

use serde::{Deserialize, Serialize};

use super::reduced::ValueGrid;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPoint {
    pub t: f64,
    /// Centre of the transition band between the lowest run of full feeding
    /// and the first coasting node above it. `None` for a row without one.
    pub x: Option<f64>,
    /// Nodes strictly inside the band, i.e. with interior controls.
    pub band: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyBoundary {
    pub points: Vec<BoundaryPoint>,
    pub gaps: usize,
}

pub fn extract_policy_boundary(vg: &ValueGrid) -> PolicyBoundary {
    let nx = vg.spec().nx;
    let points: Vec<BoundaryPoint> = (0..vg.spec().nt)
        .map(|i| {
            let feed = (0..nx).take_while(|&j| vg.policy(i, j) == 1.0).last();
            let coast = feed.and_then(|l| (l + 1..nx).find(|&j| vg.policy(i, j) == 0.0).map(|f| (l, f)));
            match coast {
                Some((l, f)) => BoundaryPoint {
                    t: vg.t(i),
                    x: Some(0.5 * (vg.x(l) + vg.x(f))),
                    band: f - l - 1,
                },
                None => BoundaryPoint {
                    t: vg.t(i),
                    x: None,
                    band: 0,
                },
            }
        })
        .collect();
    let gaps = points.iter().filter(|q| q.x.is_none()).count();
    PolicyBoundary { points, gaps }
}

impl PolicyBoundary {
    /// Largest `|x - reference(t)|` over rows with `t` in `[lo, hi)`, with
    /// the number of rows compared.
    pub fn max_offset(&self, lo: f64, hi: f64, reference: impl Fn(f64) -> f64) -> (f64, usize) {
        self.points
            .iter()
            .filter(|q| q.t >= lo && q.t < hi)
            .filter_map(|q| q.x.map(|x| (x - reference(q.t)).abs()))
            .fold((0.0, 0), |(m, n), d| (m.max(d), n + 1))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelParams;
    use crate::oracle::{solve_reduced, ControlMesh, ReducedGridSpec};
    use crate::synthesis::{build_field, coop_singular_control, FieldKind};

    fn solved() -> ValueGrid {
        let p = ModelParams::baseline();
        solve_reduced(&p, &ReducedGridSpec::with_resolution(&p, 2000, 2000), &ControlMesh::default()).unwrap()
    }

    #[test]
    fn boundary_tracks_arc_and_switch_line() {
        let g = solved();
        let p = *g.params();
        let coop = build_field(FieldKind::Cooperative, &p).unwrap();
        let t_hat = coop.junction().t_hat;
        let b = extract_policy_boundary(&g);
        assert!(b.gaps <= 1, "{}", b.gaps);
        let (arc, n_arc) = b.max_offset(0.5, t_hat - 0.01, |t| coop.boundary(t));
        assert!(n_arc > 700);
        assert!(arc <= 2.0 * g.dx(), "{}", arc / g.dx());
        // interpolation drift grows with time to go
        let (early, _) = b.max_offset(0.0, 0.5, |t| coop.boundary(t));
        assert!(early <= 2.5 * g.dx(), "{}", early / g.dx());
        let (line, _) = b.max_offset(t_hat + 0.1, p.horizon(), |t| coop.boundary(t));
        assert!(line <= 2.0 * g.dx(), "{}", line / g.dx());
        // coasting arcs graze the switch line at the junction, so the
        // discrete switch time lags there
        let (corner, _) = b.max_offset(t_hat - 0.01, t_hat + 0.1, |t| coop.boundary(t));
        assert!(corner <= 6.0 * g.dx(), "{}", corner / g.dx());
    }

    #[test]
    fn followed_policy_rides_the_arc() {
        let g = solved();
        let p = *g.params();
        let coop = build_field(FieldKind::Cooperative, &p).unwrap();
        let t_hat = coop.junction().t_hat;
        for x0 in [0.1, 0.3, 0.6] {
            let (steps, payoff) = g.follow(x0);
            let j = coop.rollout_season(x0, 1.0).unwrap().payoff();
            assert!((payoff - j).abs() <= 1e-5 * j, "{payoff} vs {j}");
            let on: Vec<_> = steps
                .iter()
                .filter(|s| s.t < t_hat && (s.x - coop.boundary(s.t)).abs() < 3.0 * g.dx())
                .collect();
            let windows: Vec<f64> = on
                .chunks_exact(25)
                .map(|w| {
                    let u: f64 = w.iter().map(|s| s.u).sum();
                    let us: f64 = w.iter().map(|s| coop_singular_control(s.x, &p).value()).sum();
                    (u - us).abs() / 25.0
                })
                .collect();
            assert!(windows.len() > 20);
            let mean = windows.iter().sum::<f64>() / windows.len() as f64;
            assert!(mean <= 0.05, "{x0}: {mean}");
        }
    }
}
