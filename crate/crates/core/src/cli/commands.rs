//! Subcommand bodies.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::{RunConfig, Target};
use super::{Command, EXIT_INVADABLE, EXIT_NUMERICAL, EXIT_OK};
use crate::error::{Error, Result};
use crate::game::{certify_with, rollout_resident, Verdict};
use crate::model::{integrate, rk4_step, Constant, Costate, ModelParams, ResidentState, Sample};
use crate::oracle::{extract_policy_boundary, solve_reduced, ControlMesh, ReducedGridSpec};
use crate::population::{
    convergence_sweep, mean_gaps, simulate_population, write_sweep_csv, PopulationConfig, PopulationMode,
    PopulationOutcome, SweepRow,
};
use crate::reduction::{season_report, ValueGrids};
use crate::oracle::FullGridSpec;
use crate::synthesis::{
    arc_rows, boundary_rows, build_field, summarize, tributary_rows, write_curve_csv, FieldKind,
};

pub(super) fn dispatch(cmd: &Command, cfg: &RunConfig) -> Result<i32> {
    fs::create_dir_all(&cfg.out)?;
    match cmd {
        Command::Synthesize { kind } => synthesize(cfg, *kind),
        Command::Certify { kind } => certify(cfg, *kind),
        Command::Simulate { kind, control } => simulate(cfg, *kind, *control),
        Command::Oracle { compare, kind } => oracle(cfg, *compare, *kind),
        Command::Reduce { check, grids } => reduce(cfg, *check, *grids),
        Command::Popsim { mode, sweep } => popsim(cfg, mode.unwrap_or(cfg.popsim.mode), *sweep),
    }
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<PathBuf> {
    let mut w = create(dir, name)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(dir.join(name))
}

fn synthesize(cfg: &RunConfig, kind: FieldKind) -> Result<i32> {
    let s = &cfg.synthesize;
    let field = build_field(kind, &cfg.params)?;
    let arc = arc_rows(&field, s.arc_rows);
    let boundary = boundary_rows(&field, s.boundary_samples);
    let (tribs, spans) = tributary_rows(&field, &s.tributaries, s.tributary_rows)?;
    write_curve_csv(create(&cfg.out, &format!("{kind}_boundary.csv"))?, &boundary)?;
    write_curve_csv(create(&cfg.out, &format!("{kind}_arc.csv"))?, &arc)?;
    write_curve_csv(create(&cfg.out, &format!("{kind}_tributaries.csv"))?, &tribs)?;
    let summary = summarize(&field, &arc, spans);
    write_json(&cfg.out, &format!("{kind}_summary.json"), &summary)?;
    println!(
        "{kind}: t_hat = {:.6}, x_hat = {:.6}, x_bar = {:.6}, x_T = {}",
        summary.t_hat, summary.x_hat, summary.x_bar, summary.x_t
    );
    Ok(EXIT_OK)
}

fn certify(cfg: &RunConfig, kind: FieldKind) -> Result<i32> {
    let field = build_field(kind, &cfg.params)?;
    let cert = certify_with(&field, cfg.initial.p0, cfg.initial.n0, cfg.tolerance, &cfg.certify.options())?;
    write_json(&cfg.out, &format!("{kind}_certify.json"), &cert.report)?;
    cert.write_schedules(create(&cfg.out, &format!("{kind}_schedules.csv"))?)?;
    let r = &cert.report;
    println!(
        "{kind}: J = {:.8}, J_m = {:.8}, delta_J = {:.3e}, verdict = {}",
        r.j,
        r.j_m,
        r.delta_j,
        serde_json::to_value(r.verdict)?.as_str().unwrap_or_default()
    );
    Ok(match r.verdict {
        Verdict::Invadable => EXIT_INVADABLE,
        Verdict::UninvadableWithinTolerance => EXIT_OK,
    })
}

#[derive(Debug, Serialize)]
struct TrajectoryRow {
    t: f64,
    x: f64,
    u: f64,
    lambda: f64,
    mu: f64,
    sigma: f64,
    p: f64,
    n: f64,
}

#[derive(Debug, Serialize)]
struct SimulationSummary {
    source: String,
    params: ModelParams,
    p0: f64,
    n0: f64,
    payoff: f64,
    #[serde(rename = "x_T")]
    x_t: f64,
    samples: usize,
}

/// Costates of a constant control: `λ` in closed form, `μ` by backward RK4
/// on the sample grid.
fn constant_control_costates(samples: &mut [Sample], u: f64, params: &ModelParams) {
    let (a, b, c, horizon) = (params.a(), params.b(), params.c(), params.horizon());
    let lambda = |t: f64| -(1.0 - u) * (-a * (horizon - t)).exp_m1() / a;
    let mut mu = [0.0];
    let m = samples.len();
    for k in (0..m).rev() {
        if k + 1 < m {
            let (lo, hi) = (samples[k].t, samples[k + 1].t);
            mu = rk4_step(&|t: f64, y: &[f64; 1]| [(c * y[0] - b * lambda(t)) * u], hi, &mu, lo - hi);
        }
        let (l, s) = (lambda(samples[k].t), &mut samples[k]);
        s.costate = Some(Costate {
            lambda: l,
            mu: mu[0],
            sigma: b * l - c * mu[0] - s.x,
            sigma_m: b * l - s.x,
        });
    }
}

fn simulate(cfg: &RunConfig, kind: FieldKind, control: Option<f64>) -> Result<i32> {
    let (p0, n0) = (cfg.initial.p0, cfg.initial.n0);
    let (source, samples, switching, payoff): (String, Vec<Sample>, Vec<f64>, f64) = match control {
        Some(u) => {
            if !(0.0..=1.0).contains(&u) {
                return Err(Error::Config(format!("--control must lie in [0, 1], got {u}")));
            }
            let rec = integrate(&cfg.params, ResidentState::new(p0, n0)?, 0.0, cfg.params.horizon(), &Constant(u), cfg.step)?;
            let mut samples = rec.samples;
            constant_control_costates(&mut samples, u, &cfg.params);
            let sw = samples.iter().map(|s| s.costate.map_or(f64::NAN, |c| c.sigma)).collect();
            (format!("constant-{u}"), samples, sw, rec.payoff)
        }
        None => {
            let field = build_field(kind, &cfg.params)?;
            let roll = field.rollout(p0, n0, 0.0, cfg.step)?;
            let sw = roll.samples().iter().map(|s| roll.switching(s)).collect();
            (kind.to_string(), roll.samples().to_vec(), sw, roll.payoff())
        }
    };
    let mut w = csv::Writer::from_writer(create(&cfg.out, &format!("{source}_trajectory.csv"))?);
    for (s, sigma) in samples.iter().zip(&switching) {
        let cs = s.costate.expect("costates attached");
        w.serialize(TrajectoryRow {
            t: s.t,
            x: s.x,
            u: s.u,
            lambda: cs.lambda,
            mu: cs.mu,
            sigma: *sigma,
            p: s.p,
            n: s.n,
        })?;
    }
    w.flush()?;
    let summary = SimulationSummary {
        source: source.clone(),
        params: cfg.params,
        p0,
        n0,
        payoff,
        x_t: samples.last().map_or(f64::NAN, |s| s.x),
        samples: samples.len(),
    };
    write_json(&cfg.out, &format!("{source}_simulate.json"), &summary)?;
    println!("{source}: J = {payoff:.10}, x(T) = {:.6}", summary.x_t);
    Ok(EXIT_OK)
}

#[derive(Debug, Serialize)]
struct CompareRow {
    x: f64,
    oracle: f64,
    synthesis: f64,
    rel_err: f64,
}

#[derive(Debug, Serialize)]
struct CompareSummary {
    kind: FieldKind,
    max_rel_err: f64,
    /// Largest distance, in `x` cells, between the empirical and analytic boundary.
    boundary_max_offset_cells: f64,
    boundary_gaps: usize,
    rows: Vec<CompareRow>,
}

fn oracle(cfg: &RunConfig, compare: bool, kind: FieldKind) -> Result<i32> {
    let o = &cfg.oracle;
    let mut spec = ReducedGridSpec::with_resolution(&cfg.params, o.nt, o.nx);
    if let Some(x_max) = o.x_max {
        spec.x_max = x_max;
    }
    let grid = solve_reduced(&cfg.params, &spec, &ControlMesh::uniform(o.controls)?)?;
    if grid.clamped() > 0 {
        eprintln!("warning: {} nodes stepped past x_max = {}", grid.clamped(), spec.x_max);
    }
    grid.write_csv(create(&cfg.out, "oracle_grid.csv")?, o.export_stride)?;
    write_json(&cfg.out, "oracle_probes.json", &grid.probe_summary(&o.probes))?;
    println!("oracle: {} x {} grid, {} clamped nodes", o.nt, o.nx, grid.clamped());
    if !compare {
        return Ok(EXIT_OK);
    }

    let field = build_field(kind, &cfg.params)?;
    let mut rows = Vec::new();
    for &x in &o.probes {
        let synthesis = field.rollout_season(x, 1.0)?.payoff();
        let oracle = grid.value_at(0, x);
        rows.push(CompareRow {
            x,
            oracle,
            synthesis,
            rel_err: (oracle - synthesis).abs() / synthesis.abs(),
        });
    }
    let boundary = extract_policy_boundary(&grid);
    let (offset, _) = boundary.max_offset(0.0, cfg.params.horizon(), |t| field.boundary(t));
    let summary = CompareSummary {
        kind,
        max_rel_err: rows.iter().map(|r| r.rel_err).fold(0.0, f64::max),
        boundary_max_offset_cells: offset / grid.dx(),
        boundary_gaps: boundary.gaps,
        rows,
    };
    let mut w = csv::Writer::from_writer(create(&cfg.out, &format!("oracle_compare_{kind}.csv"))?);
    for r in &summary.rows {
        w.serialize(r)?;
    }
    w.flush()?;
    write_json(&cfg.out, &format!("oracle_compare_{kind}.json"), &summary)?;
    println!(
        "compare {kind}: max relative value error = {:.3e}, boundary offset = {:.2} cells",
        summary.max_rel_err, summary.boundary_max_offset_cells
    );
    Ok(EXIT_OK)
}

fn reduce(cfg: &RunConfig, check: bool, grids: bool) -> Result<i32> {
    let r = &cfg.reduce;
    let spec = grids.then(|| ValueGrids {
        full: FullGridSpec::covering(&cfg.params, 0.5, 2.0, r.full_nt, r.full_np, r.full_nn),
        reduced: ReducedGridSpec::with_resolution(&cfg.params, r.reduced_nt, r.reduced_nx),
        full_controls: r.full_controls,
        reduced_controls: cfg.oracle.controls,
    });
    let report = season_report(&cfg.params, cfg.seed, spec.as_ref())?;
    write_json(&cfg.out, "reduce_report.json", &report)?;
    for c in &report.checks {
        println!("{} {}: {:.3e} (tolerance {:.0e})", if c.passed { "PASS" } else { "FAIL" }, c.name, c.error, c.tolerance);
    }
    Ok(if check && !report.passed() { EXIT_NUMERICAL } else { EXIT_OK })
}

#[derive(Debug, Serialize)]
struct PopsimSummary {
    mode: PopulationMode,
    target: Target,
    outcomes: Vec<PopulationOutcome>,
    /// Mean of `gap / J_agg` over seeds.
    mean_relative_gap: f64,
}

#[derive(Debug, Serialize)]
struct SweepSummary {
    mode: PopulationMode,
    target: Target,
    mean_gaps: Vec<(f64, f64)>,
}

fn popsim(cfg: &RunConfig, mode: PopulationMode, sweep: bool) -> Result<i32> {
    let p = &cfg.popsim;
    let (p0, n0) = (cfg.initial.p0, cfg.initial.n0);
    let resident = match p.target {
        Target::Field(kind) => Some(rollout_resident(&build_field(kind, &cfg.params)?, p0, n0)?),
        Target::Constant(_) => None,
    };
    let target = |t: f64| match (&resident, p.target) {
        (Some(ctx), _) => ctx.u_at(t),
        (None, Target::Constant(u)) => u,
        (None, Target::Field(_)) => unreachable!("field targets carry a resident"),
    };
    let base = PopulationConfig {
        size: p.size,
        tau: cfg.popsim_tau(),
        mode,
        seed: cfg.seed,
        p0,
        n0,
    };
    let seeds: Vec<u64> = (0..p.runs as u64).map(|k| cfg.seed + k).collect();
    if sweep {
        let horizon = cfg.params.horizon();
        let taus: Vec<f64> = (0..=p.halvings).map(|k| horizon / 100.0 / 2f64.powi(k as i32)).collect();
        let rows = convergence_sweep(&target, &cfg.params, &base, &taus, &seeds)?;
        write_sweep_csv(create(&cfg.out, "popsim_sweep.csv")?, &rows)?;
        let means = mean_gaps(&rows);
        for (tau, g) in &means {
            println!("tau = {tau:.6}: mean gap = {g:.6e}");
        }
        write_json(
            &cfg.out,
            "popsim_sweep.json",
            &SweepSummary {
                mode,
                target: p.target,
                mean_gaps: means,
            },
        )?;
        return Ok(EXIT_OK);
    }
    let outcomes = seeds
        .iter()
        .map(|&seed| simulate_population(&target, &cfg.params, &PopulationConfig { seed, ..base }))
        .collect::<Result<Vec<_>>>()?;
    let rows: Vec<SweepRow> = outcomes.iter().map(SweepRow::from).collect();
    write_sweep_csv(create(&cfg.out, "popsim.csv")?, &rows)?;
    let mean_relative_gap = outcomes.iter().map(|o| o.gap / o.aggregate_payoff).sum::<f64>() / outcomes.len() as f64;
    println!("{mode}: mean |F - J_agg| / J_agg = {mean_relative_gap:.6e} over {} seeds", outcomes.len());
    write_json(
        &cfg.out,
        "popsim_summary.json",
        &PopsimSummary {
            mode,
            target: p.target,
            outcomes,
            mean_relative_gap,
        },
    )?;
    Ok(EXIT_OK)
}
