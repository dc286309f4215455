use serde::{Deserialize, Serialize};

use super::model::FilterModel;
use super::observation::ObservationRealization;
use crate::error::{invalid, Error, Result};
use crate::noise::{sample_brownian, sample_poisson_measure, MartingaleSample, RngStream};
use crate::parallel::run_indexed;
use crate::roughpath::RoughPath;
use crate::rsde::{solve_doubly_sde_with, solve_rsde_with, SolverOptions};
use crate::stats::pairwise_sum;
use crate::{GridPath64, RoughPath64, TimeGrid64};

/// Denominators `g¹` below this fail the run.
pub const NORMALIZATION_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Route {
    /// Rough SDE driven by the lift of `G`.
    Robust,
    /// Classical doubly stochastic SDE driven by the increments of `G` alone.
    Oracle,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterOptions {
    pub n_particles: usize,
    /// Times at which the filter is reported; each maps to the last grid time not after it.
    pub checkpoints: Vec<f64>,
    /// Every `stride`-th point of the observation grid (plus all `N2` times) forms the
    /// computation grid; the lift carries the level 2 of the skipped cells.
    #[serde(default = "one")]
    pub stride: usize,
    #[serde(default)]
    pub threads: Option<usize>,
    /// Keep per-particle `I¹`, `I²` and `F` in the run.
    #[serde(default)]
    pub keep_particles: bool,
}

fn one() -> usize {
    1
}

impl FilterOptions {
    pub fn new(n_particles: usize, checkpoints: Vec<f64>) -> Self {
        Self {
            n_particles,
            checkpoints,
            stride: 1,
            threads: None,
            keep_particles: false,
        }
    }
}

/// Per-particle record at the checkpoints.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParticleRecord {
    pub i1: Vec<f64>,
    pub i2: Vec<f64>,
    pub f: Vec<f64>,
    pub aborted_at: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointEstimate {
    pub time: f64,
    pub g_f: f64,
    pub g_1: f64,
    pub log_g_1: f64,
    pub theta: f64,
    /// Delta-method standard error of `theta`.
    pub se_theta: f64,
    pub se_g_f: f64,
    pub se_g_1: f64,
    pub mean_i: f64,
    pub mean_i1: f64,
    pub mean_i2: f64,
    pub sd_i: f64,
    pub min_i: f64,
    pub max_i: f64,
    /// `(Σw)² / Σw²`.
    pub ess: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterRun {
    pub route: Route,
    pub test_fn: String,
    pub checkpoints: Vec<CheckpointEstimate>,
    pub n_particles: usize,
    /// Particles entering the averages (the non-aborted ones).
    pub used_particles: usize,
    pub aborted: usize,
    pub stride: usize,
    pub grid_cells: usize,
    pub stream: Vec<String>,
    pub seed: u64,
    pub particles: Option<Vec<ParticleRecord>>,
}

impl FilterRun {
    pub fn thetas(&self) -> Vec<f64> {
        self.checkpoints.iter().map(|c| c.theta).collect()
    }

    pub fn times(&self) -> Vec<f64> {
        self.checkpoints.iter().map(|c| c.time).collect()
    }

    /// `time,g_f,g_1,theta,se` rows with 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("time,g_f,g_1,theta,se\n");
        for c in &self.checkpoints {
            s.push_str(&format!(
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\n",
                c.time, c.g_f, c.g_1, c.theta, c.se_theta
            ));
        }
        s
    }
}

/// Computation grid: strided observation grid plus every `N2` event time.
pub(crate) fn computation_grid(obs: &ObservationRealization, stride: usize) -> Result<TimeGrid64> {
    if stride == 0 {
        return Err(invalid("stride", "must be positive"));
    }
    obs.grid.subsample(stride)?.with_times(&obs.events.times())
}

/// Driver handed to the particles on the computation grid: the restricted lift for the
/// robust route, the same lift with its level 2 zeroed for the oracle route.
pub(crate) fn route_driver(obs: &ObservationRealization, route: Route, grid: &TimeGrid64) -> Result<RoughPath64> {
    let lift = obs.lift.restrict_to(grid)?;
    Ok(match route {
        Route::Robust => lift,
        Route::Oracle => RoughPath::new(lift.path().clone(), vec![0.0; lift.level2().len()])?,
    })
}

struct Sample {
    i1: Vec<f64>,
    i2: Vec<f64>,
    f: Vec<f64>,
    aborted_at: Option<f64>,
}

fn run_particle(
    model: &FilterModel,
    coeffs: &crate::rsde::CoefficientSet,
    driver: &RoughPath64,
    route: Route,
    times: &[f64],
    stream: &RngStream,
) -> Result<Sample> {
    let grid = driver.grid();
    let n1 = sample_poisson_measure(&stream.child("n1"), grid, &model.nu1);
    let (grid_j, driver_j) = if n1.is_empty() {
        (grid.clone(), driver.clone())
    } else {
        let g = n1.insert_into(grid)?;
        let d = driver.refine_to(&g)?;
        (g, d)
    };
    let b = if model.db > 0 {
        sample_brownian(&stream.child("b"), &grid_j, model.db)
    } else {
        MartingaleSample::zero(&grid_j, 1)
    };
    let z0 = model.initial_state(&model.x0.sample(&stream.child("x0")));
    let opts = SolverOptions {
        diagnostics: false,
        ..SolverOptions::default()
    };
    let (path, aborted_at): (GridPath64, Option<f64>) = match route {
        Route::Robust => {
            let sol = solve_rsde_with(coeffs, &z0, &driver_j, &b, &n1, &grid_j, &opts)?;
            (sol.y, sol.aborted_at)
        }
        Route::Oracle => solve_doubly_sde_with(coeffs, &z0, driver_j.path(), &b, &n1, &grid_j, &opts)?,
    };
    let (dx, dy) = (model.dx, model.dy);
    let mut s = Sample {
        i1: Vec::with_capacity(times.len()),
        i2: Vec::with_capacity(times.len()),
        f: Vec::with_capacity(times.len()),
        aborted_at,
    };
    for &t in times {
        let z = path.eval(t);
        s.f.push(model.test_fn.eval(&z[..dx], &z[dx..dx + dy]));
        s.i1.push(z[dx + dy]);
        s.i2.push(z[dx + dy + 1]);
    }
    Ok(s)
}

/// Weighted averages at one checkpoint, in log space with a max shift.
fn estimate(time: f64, f: &[f64], i1: &[f64], i2: &[f64], sup: f64) -> Result<CheckpointEstimate> {
    let n = f.len();
    let nf = n as f64;
    let i: Vec<f64> = i1.iter().zip(i2).map(|(a, b)| a + b).collect();
    let shift = i.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min_i = i.iter().cloned().fold(f64::INFINITY, f64::min);
    let w: Vec<f64> = i.iter().map(|v| (v - shift).exp()).collect();
    let fw: Vec<f64> = f.iter().zip(&w).map(|(a, b)| a * b).collect();
    let sum_w = pairwise_sum(&w);
    let sum_fw = pairwise_sum(&fw);
    let mean_i = pairwise_sum(&i) / nf;
    let sd_i = (pairwise_sum(&i.iter().map(|v| (v - mean_i) * (v - mean_i)).collect::<Vec<_>>()) / (nf - 1.0)).sqrt();
    let log_g_1 = shift + (sum_w / nf).ln();
    if !(log_g_1 >= NORMALIZATION_FLOOR.ln()) {
        return Err(Error::DegenerateNormalization {
            time,
            log_g1: log_g_1,
            i_mean: mean_i,
            i_min: min_i,
            i_max: shift,
        });
    }
    let mut theta = sum_fw / sum_w;
    if theta.abs() > sup {
        theta = theta.signum() * sup;
    }
    let scale = shift.exp();
    let mean_w = sum_w / nf;
    let mean_fw = sum_fw / nf;
    let var = |xs: &[f64], m: f64| pairwise_sum(&xs.iter().map(|v| (v - m) * (v - m)).collect::<Vec<_>>()) / (nf - 1.0);
    let resid: Vec<f64> = f.iter().zip(&w).map(|(a, b)| b * (a - theta)).collect();
    let var_theta = pairwise_sum(&resid.iter().map(|v| v * v).collect::<Vec<_>>()) / (nf - 1.0);
    let sum_w2 = pairwise_sum(&w.iter().map(|v| v * v).collect::<Vec<_>>());
    Ok(CheckpointEstimate {
        time,
        g_f: scale * mean_fw,
        g_1: scale * mean_w,
        log_g_1,
        theta,
        se_theta: (var_theta / nf).sqrt() / mean_w,
        se_g_f: scale * (var(&fw, mean_fw) / nf).sqrt(),
        se_g_1: scale * (var(&w, mean_w) / nf).sqrt(),
        mean_i,
        mean_i1: pairwise_sum(i1) / nf,
        mean_i2: pairwise_sum(i2) / nf,
        sd_i,
        min_i,
        max_i: shift,
        ess: sum_w * sum_w / sum_w2,
    })
}

fn run_filter(
    model: &FilterModel,
    obs: &ObservationRealization,
    opts: &FilterOptions,
    stream: &RngStream,
    route: Route,
) -> Result<FilterRun> {
    model.validate()?;
    if opts.n_particles < 2 {
        return Err(invalid("n_particles", "need at least two particles"));
    }
    if opts.checkpoints.is_empty() {
        return Err(invalid("checkpoints", "empty"));
    }
    if obs.g.dim() != model.driver_dim() {
        return Err(invalid("obs", "driver dimension does not match the model"));
    }
    let horizon = obs.horizon();
    if opts.checkpoints.iter().any(|t| !(*t >= 0.0 && *t <= horizon)) {
        return Err(invalid("checkpoints", "must lie in [0, T]"));
    }
    let grid = computation_grid(obs, opts.stride)?;
    let driver = route_driver(obs, route, &grid)?;
    let times: Vec<f64> = opts.checkpoints.iter().map(|&t| grid.time(grid.index_at(t))).collect();
    let coeffs = model.particle_coefficients();

    let samples = run_indexed(opts.n_particles, opts.threads, |j| {
        run_particle(model, &coeffs, &driver, route, &times, &stream.indexed("particle", j as u64))
    })?;
    let samples: Vec<Sample> = samples.into_iter().collect::<Result<_>>()?;
    let kept: Vec<&Sample> = samples.iter().filter(|s| s.aborted_at.is_none()).collect();
    if kept.len() < 2 {
        return Err(invalid("particles", "fewer than two particles survived the divergence guard"));
    }
    let mut checkpoints = Vec::with_capacity(times.len());
    for (c, &t) in times.iter().enumerate() {
        let f: Vec<f64> = kept.iter().map(|s| s.f[c]).collect();
        let i1: Vec<f64> = kept.iter().map(|s| s.i1[c]).collect();
        let i2: Vec<f64> = kept.iter().map(|s| s.i2[c]).collect();
        checkpoints.push(estimate(t, &f, &i1, &i2, model.test_fn.sup_norm)?);
    }
    let particles = opts.keep_particles.then(|| {
        samples
            .iter()
            .map(|s| ParticleRecord {
                i1: s.i1.clone(),
                i2: s.i2.clone(),
                f: s.f.clone(),
                aborted_at: s.aborted_at,
            })
            .collect()
    });
    Ok(FilterRun {
        route,
        test_fn: model.test_fn.name.clone(),
        checkpoints,
        n_particles: opts.n_particles,
        used_particles: kept.len(),
        aborted: samples.len() - kept.len(),
        stride: opts.stride,
        grid_cells: grid.cells(),
        stream: stream.path().to_vec(),
        seed: stream.seed(),
        particles,
    })
}

/// `Θ^F` of the lift of `obs` by Monte Carlo over fresh `(X_0, B, N1)` per particle.
///
/// Particle `j` draws from `stream.indexed("particle", j)`, so two runs sharing the
/// stream share their particles.
pub fn robust_filter(
    model: &FilterModel,
    obs: &ObservationRealization,
    opts: &FilterOptions,
    stream: &RngStream,
) -> Result<FilterRun> {
    run_filter(model, obs, opts, stream, Route::Robust)
}

/// The same estimate with the classical scheme on the increments of `G`.
pub fn oracle_filter(
    model: &FilterModel,
    obs: &ObservationRealization,
    opts: &FilterOptions,
    stream: &RngStream,
) -> Result<FilterRun> {
    run_filter(model, obs, opts, stream, Route::Oracle)
}

/// Either route by tag.
pub fn run_route(
    model: &FilterModel,
    obs: &ObservationRealization,
    opts: &FilterOptions,
    stream: &RngStream,
    route: Route,
) -> Result<FilterRun> {
    run_filter(model, obs, opts, stream, route)
}
