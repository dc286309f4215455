use anyhow::{anyhow, bail, Result};
use serde_json::{json, Value};

use roughlab::filter::{
    bump_direction, dyadic_coarsening, model_uncertainty_lm, oracle_filter, robust_filter, robustness_pvar,
    simulate_observation, simulate_signal_and_observation, FilterModel, FilterOptions, FilterRun, LmSpec,
    ObservationRealization,
};
use roughlab::moments::{brownian_max_exp_moment, rough_integral_exp_moment};
use roughlab::noise::{events_to_csv, sample_brownian, sample_poisson_measure, MartingaleSample, RngStream};
use roughlab::parallel::run_indexed;
use roughlab::presets::{filter_preset, list_presets, rsde_preset, PresetKind};
use roughlab::roughpath::{GridPath, RoughPath, TimeChange};
use roughlab::rsde::{
    consistency_check, skorokhod_convergence_experiment, skorokhod_counterexample, solve_rsde, stability_table,
    CoefficientSet, ConsistencySpec, EnsembleSpec, SkorokhodSpec, StabilitySpec,
};
use roughlab::stats::{mean, std_error, variance};
use roughlab::{GridPath64, TimeGrid64};

use crate::output::{num, opt, Table};
use crate::scenario::{Experiment, LmConfig, MeasureChoice, RouteChoice, Scenario};

/// Result of one experiment before it is written out.
#[derive(Debug)]
pub struct Outcome {
    pub result: Value,
    pub tables: Vec<Table>,
    /// Verbatim CSV files, `(file name, contents)`.
    pub files: Vec<(String, String)>,
    /// Set when an assumption the experiment relies on does not hold.
    pub skipped: Option<String>,
}

impl Outcome {
    fn new(result: Value) -> Self {
        Outcome {
            result,
            tables: Vec::new(),
            files: Vec::new(),
            skipped: None,
        }
    }
}

fn base_grid(s: &Scenario) -> Result<TimeGrid64> {
    Ok(TimeGrid64::uniform(s.grid.horizon, s.grid.cells)?)
}

fn preset_kind(name: &str) -> Result<PresetKind> {
    list_presets()
        .iter()
        .find(|p| p.name == name)
        .map(|p| p.kind)
        .ok_or_else(|| anyhow!("unknown preset `{}` (see `roughlab list-presets`)", name))
}

fn model_name(s: &Scenario) -> Result<&str> {
    s.model
        .as_ref()
        .map(|m| m.preset.as_str())
        .ok_or_else(|| anyhow!("experiment `{}` needs a [model] section", s.experiment.kind()))
}

fn rsde_model(s: &Scenario) -> Result<(CoefficientSet, Vec<f64>)> {
    let name = model_name(s)?;
    if preset_kind(name)? != PresetKind::Rsde {
        bail!("experiment `{}` needs a rough SDE preset, `{}` is a filter model", s.experiment.kind(), name);
    }
    let m = s.model.as_ref().unwrap();
    let coeffs = rsde_preset(name, &m.params)?;
    let y0 = m.y0.clone().unwrap_or_else(|| vec![1.0; coeffs.dim]);
    if y0.len() != coeffs.dim {
        bail!("model.y0 has {} entries, the preset has dimension {}", y0.len(), coeffs.dim);
    }
    Ok((coeffs, y0))
}

fn filter_model(s: &Scenario) -> Result<FilterModel> {
    let name = model_name(s)?;
    if preset_kind(name)? != PresetKind::Filter {
        bail!("experiment `{}` needs a filter preset, `{}` is a rough SDE", s.experiment.kind(), name);
    }
    let m = s.model.as_ref().unwrap();
    if m.y0.is_some() {
        bail!("model.y0 does not apply to filter presets");
    }
    Ok(filter_preset(name, &m.params)?)
}

fn no_deterministic_jump(s: &Scenario) -> Result<()> {
    if s.noise.jump_time.is_some() || s.noise.jump_size.is_some() {
        bail!("noise.jump_time applies to consistency, stability and skorokhod only");
    }
    Ok(())
}

fn even_checkpoints(horizon: f64, n: usize) -> Vec<f64> {
    (1..=n).map(|i| horizon * i as f64 / n as f64).collect()
}

pub fn run_experiment(s: &Scenario, threads: Option<usize>) -> Result<Outcome> {
    let out = match &s.experiment {
        Experiment::Simulate(c) => simulate(s, c.paths, c.write_paths, threads),
        Experiment::Filter(c) => filter(s, c.particles, c.checkpoints.clone(), c.stride, c.route, c.measure, threads),
        Experiment::Consistency(c) => consistency(s, c.fine_cells, c.mesh_cells, c.outer, c.inner, threads),
        Experiment::Stability(c) => stability(s, c.p, c.q, c.level, c.paths, &c.amplitudes, c.component, threads),
        Experiment::Skorokhod(c) => skorokhod(s, c.counterexample, c.t0, c.jump, &c.levels, c.paths, threads),
        Experiment::Robustness(c) => robustness(
            s,
            c.particles,
            c.checkpoints.clone(),
            c.stride,
            c.p,
            c.amplitudes.clone(),
            c.component,
            threads,
        ),
        Experiment::Lm(c) => lm(s, c, threads),
        Experiment::Moments(c) => moments(
            s,
            &c.lambdas,
            c.paths,
            &c.rough_cells,
            c.rough_lambda,
            c.rough_paths,
            c.p,
            c.alpha,
            threads,
        ),
    };
    match out {
        Err(e) => match e.downcast_ref::<roughlab::Error>() {
            Some(roughlab::Error::HypothesisNotMet(reason)) => Ok(Outcome {
                skipped: Some(reason.clone()),
                ..Outcome::new(Value::Null)
            }),
            _ => Err(e),
        },
        ok => ok,
    }
}

fn path_table(name: &str, rows: &[(usize, &GridPath64, &[(&str, &GridPath64)])]) -> Table {
    let mut header = vec!["path".to_string(), "time".to_string()];
    if let Some((_, _, cols)) = rows.first() {
        for (label, p) in cols.iter() {
            for c in 0..p.dim() {
                header.push(format!("{}{}", label, c));
            }
        }
    }
    let mut t = Table {
        name: name.to_string(),
        header,
        rows: Vec::new(),
    };
    for (id, time_path, cols) in rows {
        for i in 0..time_path.len() {
            let mut row = vec![id.to_string(), num(time_path.grid().time(i))];
            for (_, p) in cols.iter() {
                row.extend(p.value(i).iter().map(|v| num(*v)));
            }
            t.push(row);
        }
    }
    t
}

fn simulate(s: &Scenario, paths: usize, write_paths: usize, threads: Option<usize>) -> Result<Outcome> {
    no_deterministic_jump(s)?;
    let grid = base_grid(s)?;
    let root = RngStream::new(s.seed).child("simulate");
    if preset_kind(model_name(s)?)? == PresetKind::Filter {
        let model = filter_model(s)?;
        let obs = simulate_signal_and_observation(&model, &root, &grid)?;
        let x = obs.signal.as_ref().expect("signal mode keeps the signal");
        let mut out = Outcome::new(json!({
            "model": model.name,
            "events": obs.events.len(),
            "event_times": obs.events.times(),
            "terminal_signal": x.last(),
            "terminal_observation": obs.y.last(),
        }));
        out.tables.push(path_table("path", &[(0, &obs.y, &[("x", x), ("y", &obs.y), ("g", &obs.g)])]));
        out.files.push(("events.csv".into(), events_to_csv(&obs.events)));
        return Ok(out);
    }
    let (coeffs, y0) = rsde_model(s)?;
    let nu = s.noise.measure()?;
    let runs = run_indexed(paths, threads, |w| -> Result<_> {
        let st = root.indexed("path", w as u64);
        let events = sample_poisson_measure(&st.child("events"), &grid, &nu);
        let g = events.insert_into(&grid)?;
        let x = sample_brownian(&st.child("driver"), &g, coeffs.driver_dim).path;
        let m = if s.noise.brownian_dim == 0 {
            MartingaleSample::zero(&g, coeffs.noise_dim.max(1))
        } else {
            sample_brownian(&st.child("martingale"), &g, coeffs.noise_dim)
        };
        let sol = solve_rsde(&coeffs, &y0, &RoughPath::ito_lift(&x), &m, &events, &g)?;
        Ok((x, sol, events))
    })?
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let mut terminal = Table::new("terminal", &["path", "aborted"]);
    for c in 0..coeffs.dim {
        terminal.header.push(format!("y{}", c));
    }
    let mut finals: Vec<Vec<f64>> = vec![Vec::new(); coeffs.dim];
    for (w, (_, sol, _)) in runs.iter().enumerate() {
        let mut row = vec![w.to_string(), (sol.is_aborted() as u8).to_string()];
        row.extend(sol.y.last().iter().map(|v| num(*v)));
        terminal.push(row);
        if !sol.is_aborted() {
            for (c, v) in sol.y.last().iter().enumerate() {
                finals[c].push(*v);
            }
        }
    }
    let kept = finals[0].len();
    let shown: Vec<(usize, &GridPath64, [(&str, &GridPath64); 2])> = runs
        .iter()
        .take(write_paths)
        .enumerate()
        .map(|(w, (x, sol, _))| (w, x, [("x", x), ("y", &sol.y)]))
        .collect();
    let rows: Vec<(usize, &GridPath64, &[(&str, &GridPath64)])> =
        shown.iter().map(|(w, x, cols)| (*w, *x, &cols[..])).collect();
    let mut out = Outcome::new(json!({
        "model": model_name(s)?,
        "paths": paths,
        "aborted": paths - kept,
        "terminal_mean": finals.iter().map(|f| mean(f)).collect::<Vec<_>>(),
        "terminal_sd": finals.iter().map(|f| variance(f).sqrt()).collect::<Vec<_>>(),
        "terminal_se": finals.iter().map(|f| std_error(f)).collect::<Vec<_>>(),
        "mean_events": mean(&runs.iter().map(|r| r.2.len() as f64).collect::<Vec<_>>()),
    }));
    out.tables.push(terminal);
    out.tables.push(path_table("paths", &rows));
    if let Some((_, _, ev)) = runs.first() {
        out.files.push(("events.csv".into(), events_to_csv(ev)));
    }
    Ok(out)
}

fn without_particles(mut run: FilterRun) -> FilterRun {
    run.particles = None;
    run
}

#[allow(clippy::too_many_arguments)]
fn filter(
    s: &Scenario,
    particles: usize,
    checkpoints: Option<Vec<f64>>,
    stride: usize,
    route: RouteChoice,
    measure: MeasureChoice,
    threads: Option<usize>,
) -> Result<Outcome> {
    no_deterministic_jump(s)?;
    let model = filter_model(s)?;
    let grid = base_grid(s)?;
    let root = RngStream::new(s.seed).child("filter");
    let obs: ObservationRealization = match measure {
        MeasureChoice::Signal => simulate_signal_and_observation(&model, &root.child("observation"), &grid)?,
        MeasureChoice::Reference => simulate_observation(&model, &root.child("observation"), &grid)?,
    };
    let mut opts = FilterOptions::new(particles, checkpoints.unwrap_or_else(|| even_checkpoints(s.grid.horizon, 5)));
    opts.stride = stride;
    opts.threads = threads;
    let robust = match route {
        RouteChoice::Robust | RouteChoice::Both => {
            Some(without_particles(robust_filter(&model, &obs, &opts, &root.child("robust"))?))
        }
        RouteChoice::Oracle => None,
    };
    let oracle = match route {
        RouteChoice::Oracle | RouteChoice::Both => {
            Some(without_particles(oracle_filter(&model, &obs, &opts, &root.child("oracle"))?))
        }
        RouteChoice::Robust => None,
    };
    let first = robust.as_ref().or(oracle.as_ref()).unwrap();
    let times = first.times();
    let signal_f: Option<Vec<f64>> = obs
        .signal
        .as_ref()
        .map(|x| times.iter().map(|&t| model.test_fn.eval(x.eval(t), obs.y.eval(t))).collect());

    let mut out = Outcome::new(Value::Null);
    let mut comparison = Value::Null;
    if let (Some(a), Some(b)) = (&robust, &oracle) {
        let mut t = Table::new("comparison", &["time", "robust", "oracle", "combined_se", "z"]);
        let mut max_z: f64 = 0.0;
        let mut rows = Vec::new();
        for (x, y) in a.checkpoints.iter().zip(&b.checkpoints) {
            let se = (x.se_theta.powi(2) + y.se_theta.powi(2)).sqrt();
            let z = (x.theta - y.theta) / se;
            max_z = max_z.max(z.abs());
            t.push(vec![num(x.time), num(x.theta), num(y.theta), num(se), num(z)]);
            rows.push(json!({"time": x.time, "robust": x.theta, "oracle": y.theta, "combined_se": se, "z": z}));
        }
        comparison = json!({"points": rows, "max_abs_z": max_z, "within_3se": max_z <= 3.0});
        out.tables.push(t);
    }
    for run in robust.iter().chain(oracle.iter()) {
        let name = format!("filter-{}.csv", if run.route == roughlab::filter::Route::Robust { "robust" } else { "oracle" });
        out.files.push((name, run.to_csv()));
    }
    out.result = json!({
        "model": model.name,
        "within_assumptions": model.within_assumptions,
        "test_function": model.test_fn.name,
        "measure": measure,
        "observation_events": obs.events.len(),
        "computation_cells": first.grid_cells,
        "signal_f": signal_f,
        "robust": robust,
        "oracle": oracle,
        "comparison": comparison,
    });
    Ok(out)
}

fn consistency(
    s: &Scenario,
    fine_cells: usize,
    mesh_cells: [usize; 2],
    outer: usize,
    inner: usize,
    threads: Option<usize>,
) -> Result<Outcome> {
    let (coeffs, y0) = rsde_model(s)?;
    let spec = ConsistencySpec {
        horizon: s.grid.horizon,
        fine_cells,
        mesh_cells,
        noise: s.noise.spec()?,
        ensemble: EnsembleSpec {
            n_outer: outer,
            n_inner: inner,
            seed: s.seed,
            threads,
        },
    };
    let rep = consistency_check(&coeffs, &y0, &spec)?;
    let mut t = Table::new(
        "levels",
        &[
            "cells",
            "mean_terminal_gap",
            "se_terminal_gap",
            "rms_terminal_gap",
            "mean_sup_gap",
            "max_sup_gap",
            "rough_rms_error",
            "classical_rms_error",
        ],
    );
    for l in &rep.levels {
        t.push(vec![
            l.cells.to_string(),
            num(l.mean_terminal_gap),
            num(l.se_terminal_gap),
            num(l.rms_terminal_gap),
            num(l.mean_sup_gap),
            num(l.max_sup_gap),
            num(l.rough_rms_error),
            num(l.classical_rms_error),
        ]);
    }
    let mut out = Outcome::new(serde_json::to_value(&rep)?);
    out.tables.push(t);
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn stability(
    s: &Scenario,
    p: f64,
    q: f64,
    level: u32,
    paths: usize,
    amplitudes: &[f64],
    component: usize,
    threads: Option<usize>,
) -> Result<Outcome> {
    let (coeffs, y0) = rsde_model(s)?;
    let grid = base_grid(s)?;
    let x = sample_brownian(&RngStream::new(s.seed).child("stability-driver"), &grid, coeffs.driver_dim).path;
    let direction = bump_direction(&grid, coeffs.driver_dim, component)?;
    let spec = StabilitySpec {
        p,
        q,
        level,
        noise: s.noise.spec()?,
        n_paths: paths,
        seed: s.seed,
        threads,
    };
    let rows = stability_table(&coeffs, &y0, &x, &direction, amplitudes, &spec)?;
    let mut t = Table::new(
        "stability",
        &["amplitude", "driver_distance", "solution_distance", "ratio", "terminal_l2", "aborted"],
    );
    for r in &rows {
        t.push(vec![
            num(r.amplitude),
            num(r.report.driver_distance),
            num(r.report.solution_distance),
            opt(r.report.ratio),
            num(r.report.terminal_l2),
            r.report.aborted.to_string(),
        ]);
    }
    let mut out = Outcome::new(json!({ "rows": rows }));
    out.tables.push(t);
    Ok(out)
}

fn skorokhod(
    s: &Scenario,
    counterexample: bool,
    t0: f64,
    jump: f64,
    levels: &[u32],
    paths: usize,
    threads: Option<usize>,
) -> Result<Outcome> {
    let horizon = s.grid.horizon;
    let rep = if counterexample {
        if s.model.is_some() {
            bail!("the counterexample fixes its own coefficients; drop the [model] section");
        }
        skorokhod_counterexample(jump, t0, horizon, s.grid.cells, levels)?
    } else {
        let (coeffs, y0) = rsde_model(s)?;
        let grid = base_grid(s)?.with_times(&[t0])?;
        let d = coeffs.driver_dim;
        let b = sample_brownian(&RngStream::new(s.seed).child("skorokhod-driver"), &grid, d).path;
        let step = GridPath::from_fn(grid, d, |t| vec![if t >= t0 { jump } else { 0.0 }; d])?;
        let rp = RoughPath::ito_lift(&b.axpy(1.0, &step)?);
        let shifts = levels
            .iter()
            .map(|&n| {
                let h = horizon / (1u64 << n) as f64;
                TimeChange::local(horizon, t0, t0 + h, 1.5 * h)
            })
            .collect::<roughlab::Result<Vec<_>>>()?;
        let spec = SkorokhodSpec {
            noise: s.noise.spec()?,
            n_paths: paths,
            seed: s.seed,
            threads,
        };
        skorokhod_convergence_experiment(&coeffs, &y0, &rp, &shifts, &spec)?
    };
    let mut t = Table::new("gaps", &["level", "shift", "l2_gap", "se_sq_gap"]);
    for (n, p) in levels.iter().zip(&rep.points) {
        t.push(vec![n.to_string(), num(p.shift), num(p.l2_gap), num(p.se_sq_gap)]);
    }
    let mut out = Outcome::new(json!({ "counterexample": counterexample, "report": rep }));
    out.tables.push(t);
    Ok(out)
}

fn outside_assumptions(model: &FilterModel) -> Option<String> {
    (!model.within_assumptions).then(|| {
        format!(
            "model `{}` has unbounded coefficients; the continuity statements do not cover it",
            model.name
        )
    })
}

#[allow(clippy::too_many_arguments)]
fn robustness(
    s: &Scenario,
    particles: usize,
    checkpoints: Option<Vec<f64>>,
    stride: usize,
    p: f64,
    amplitudes: Option<Vec<f64>>,
    component: usize,
    threads: Option<usize>,
) -> Result<Outcome> {
    no_deterministic_jump(s)?;
    let model = filter_model(s)?;
    if let Some(reason) = outside_assumptions(&model) {
        return Ok(Outcome {
            skipped: Some(reason),
            ..Outcome::new(Value::Null)
        });
    }
    let root = RngStream::new(s.seed).child("robustness");
    let obs = simulate_observation(&model, &root.child("observation"), &base_grid(s)?)?;
    let mut opts = FilterOptions::new(particles, checkpoints.unwrap_or_else(|| even_checkpoints(s.grid.horizon, 16)));
    opts.stride = stride;
    opts.threads = threads;
    let amps = amplitudes.unwrap_or_else(|| (1..=6).map(|k| 0.5 / (1u64 << k) as f64).collect());
    let direction = bump_direction(&obs.grid, model.driver_dim(), component)?;
    let rep = robustness_pvar(&model, &obs, &direction, &amps, p, &opts, &root.child("particles"))?;
    let mut out = Outcome::new(serde_json::to_value(&rep)?);
    out.files.push(("robustness.csv".into(), rep.to_csv()));
    Ok(out)
}

fn lm(s: &Scenario, c: &LmConfig, threads: Option<usize>) -> Result<Outcome> {
    let LmConfig {
        levels,
        outer,
        particles,
        m,
        epsilon,
        p,
        alpha,
        beta,
        precondition_cells,
        stride,
    } = c;
    no_deterministic_jump(s)?;
    let model = filter_model(s)?;
    if let Some(reason) = outside_assumptions(&model) {
        return Ok(Outcome {
            skipped: Some(reason),
            ..Outcome::new(Value::Null)
        });
    }
    let grid = base_grid(s)?;
    let mut filter = FilterOptions::new(*particles, even_checkpoints(s.grid.horizon, 8));
    filter.stride = *stride;
    filter.threads = threads;
    let spec = LmSpec {
        m: *m,
        epsilon: *epsilon,
        p: *p,
        alpha: *alpha,
        beta: *beta,
        precondition_cells: *precondition_cells,
        n_outer: *outer,
        filter,
    };
    let exact = |st: &RngStream| simulate_observation(&model, st, &grid);
    let mut t = Table::new("lm", &["level", "lhs", "rhs", "ratio", "skipped"]);
    let mut reports = Vec::new();
    let mut skipped = None;
    for &level in levels {
        let (mr, gr) = (&model, &grid);
        let coarse = move |st: &RngStream| dyadic_coarsening(mr, &simulate_observation(mr, st, gr)?, level);
        let rep = model_uncertainty_lm(&model, &exact, &coarse, &spec, &RngStream::new(s.seed).child("lm"))?;
        t.push(vec![
            level.to_string(),
            num(rep.lhs),
            num(rep.rhs),
            opt(rep.ratio),
            (rep.skipped as u8).to_string(),
        ]);
        if rep.skipped && skipped.is_none() {
            skipped = Some(format!("exponential-moment precondition failed at level {}", level));
        }
        reports.push(json!({ "level": level, "report": rep }));
    }
    let mut out = Outcome::new(json!({ "levels": reports }));
    out.tables.push(t);
    out.skipped = skipped;
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn moments(
    s: &Scenario,
    lambdas: &[f64],
    paths: usize,
    rough_cells: &[usize],
    rough_lambda: f64,
    rough_paths: Option<usize>,
    p: f64,
    alpha: f64,
    threads: Option<usize>,
) -> Result<Outcome> {
    if s.model.is_some() {
        bail!("the moments experiment uses Brownian paths only; drop the [model] section");
    }
    let horizon = s.grid.horizon;
    let mut bm = Table::new("brownian-max", &["lambda", "moment", "bootstrap_se", "exact", "z"]);
    let mut bm_rows = Vec::new();
    for &l in lambdas {
        let (rep, exact) = brownian_max_exp_moment(l, horizon, s.grid.cells, paths, s.seed, threads)?;
        let z = (rep.moment - exact) / rep.bootstrap_se;
        bm.push(vec![num(l), num(rep.moment), num(rep.bootstrap_se), num(exact), num(z)]);
        bm_rows.push(json!({ "report": rep, "exact": exact, "z": z }));
    }
    let mut out = Outcome::new(Value::Null);
    out.tables.push(bm);
    let mut rough = Value::Null;
    if !rough_cells.is_empty() {
        let reps = rough_integral_exp_moment(
            rough_lambda,
            horizon,
            rough_cells,
            p,
            alpha,
            rough_paths.unwrap_or(paths),
            s.seed,
            threads,
        )?;
        let mut t = Table::new("rough-integral", &["cells", "moment", "bootstrap_se", "fitted_constant"]);
        for r in &reps {
            t.push(vec![
                r.grid_cells.unwrap_or(0).to_string(),
                num(r.moment),
                num(r.bootstrap_se),
                opt(r.fitted_constant),
            ]);
        }
        let spread = reps
            .windows(2)
            .map(|w| (w[1].moment / w[0].moment - 1.0).abs())
            .fold(0.0, f64::max);
        rough = json!({ "reports": reps, "max_relative_change": spread });
        out.tables.push(t);
    }
    out.result = json!({ "brownian_max": bm_rows, "rough_integral": rough });
    Ok(out)
}
