use serde::{Deserialize, Serialize};

use super::model::FilterModel;
use super::observation::{observation_from_driver, simulate_observation, y_from_driver, ObservationRealization};
use super::particles::{robust_filter, FilterOptions, FilterRun};
use crate::error::{invalid, Result};
use crate::moments::{exp_moment_of_samples, rough_norm_via_nalpha_bound, MomentReport};
use crate::noise::{Event, MarkedEventStream, RngStream};
use crate::parallel::run_indexed;
use crate::roughpath::{apply_time_change, pvar_dp, rough_distance, GridPath, RoughPath, Table, TimeChange};
use crate::stats::{mean, std_error};
use crate::{GridPath64, TimeGrid64};

// ---------------------------------------------------------------------------
// Martingale property of the likelihood under the reference measure.

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MartingalePoint {
    pub time: f64,
    /// Mean of `exp(I_t)` over observations and particles.
    pub mean: f64,
    pub se: f64,
    /// `(mean - 1) / se`.
    pub z: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MartingaleCheck {
    pub points: Vec<MartingalePoint>,
    pub n_outer: usize,
    pub n_inner: usize,
    /// Every `|z| <= 3`.
    pub passes: bool,
}

/// `E exp(I_t) = 1` over fresh reference-measure observations, `opts.n_particles`
/// particles each. The standard error is taken across observations.
pub fn measure_change_check(
    model: &FilterModel,
    base: &TimeGrid64,
    n_outer: usize,
    opts: &FilterOptions,
    stream: &RngStream,
) -> Result<MartingaleCheck> {
    if n_outer < 2 {
        return Err(invalid("n_outer", "need at least two observations"));
    }
    let inner = FilterOptions {
        threads: None,
        keep_particles: false,
        ..opts.clone()
    };
    let runs = run_indexed(n_outer, opts.threads, |o| {
        let s = stream.indexed("obs", o as u64);
        let obs = simulate_observation(model, &s.child("observation"), base)?;
        robust_filter(model, &obs, &inner, &s.child("particles"))
    })?;
    let runs: Vec<FilterRun> = runs.into_iter().collect::<Result<_>>()?;
    let mut points = Vec::new();
    for c in 0..runs[0].checkpoints.len() {
        let g1: Vec<f64> = runs.iter().map(|r| r.checkpoints[c].g_1).collect();
        let m = mean(&g1);
        let se = std_error(&g1);
        let z = if se > 0.0 { (m - 1.0) / se } else if m == 1.0 { 0.0 } else { f64::INFINITY };
        points.push(MartingalePoint {
            time: runs[0].checkpoints[c].time,
            mean: m,
            se,
            z,
        });
    }
    Ok(MartingaleCheck {
        passes: points.iter().all(|p| p.z.abs() <= 3.0),
        points,
        n_outer,
        n_inner: opts.n_particles,
    })
}

// ---------------------------------------------------------------------------
// Local Lipschitz continuity in the driver.

/// `sin(π t / T)` in one component of `G`, zero elsewhere.
pub fn bump_direction(grid: &TimeGrid64, dim: usize, component: usize) -> Result<GridPath64> {
    if component >= dim {
        return Err(invalid("component", "out of range"));
    }
    let t_end = grid.horizon();
    GridPath::from_fn(grid.clone(), dim, |t| {
        let mut v = vec![0.0; dim];
        v[component] = (std::f64::consts::PI * t / t_end).sin();
        v
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobustnessRow {
    pub amplitude: f64,
    /// `‖η - η_k‖_{p,[0,T]}`.
    pub rough_distance: f64,
    /// `sup_t |Θ(η) - Θ(η_k)|` over the checkpoints.
    pub sup_gap: f64,
    /// p-variation of `Θ(η) - Θ(η_k)` over the checkpoints.
    pub pvar_gap: f64,
    pub ratio_sup: f64,
    pub ratio_pvar: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobustnessReport {
    pub p: f64,
    pub base_theta: Vec<f64>,
    pub times: Vec<f64>,
    pub rows: Vec<RobustnessRow>,
    /// `sup_gap` strictly decreasing along the rows.
    pub monotone: bool,
    /// Largest over smallest `ratio_sup`.
    pub band: f64,
}

impl RobustnessReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("amplitude,rough_distance,sup_gap,pvar_gap,ratio_sup,ratio_pvar\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\n",
                r.amplitude, r.rough_distance, r.sup_gap, r.pvar_gap, r.ratio_sup, r.ratio_pvar
            ));
        }
        s
    }
}

fn pvar_of_sequence(v: &[f64], p: f64) -> f64 {
    let n = v.len();
    if n < 2 {
        return 0.0;
    }
    let mut values = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            values[i * n + j] = (v[j] - v[i]).abs();
        }
    }
    pvar_dp(&Table { n, values }, p, 0, n - 1).power_sum.powf(1.0 / p)
}

/// Perturbs `G` by `ε_k · direction`, re-lifts, and compares the filters.
///
/// All runs share `stream`, so the particles are common to every amplitude and the
/// gaps carry no independent Monte Carlo noise.
pub fn robustness_pvar(
    model: &FilterModel,
    obs: &ObservationRealization,
    direction: &GridPath64,
    amplitudes: &[f64],
    p: f64,
    opts: &FilterOptions,
    stream: &RngStream,
) -> Result<RobustnessReport> {
    if direction.grid() != &obs.grid || direction.dim() != obs.g.dim() {
        return Err(invalid("direction", "must live on the observation grid with the driver's dimension"));
    }
    let base = robust_filter(model, obs, opts, stream)?;
    let base_theta = base.thetas();
    let mut rows = Vec::with_capacity(amplitudes.len());
    for &eps in amplitudes {
        let g = obs.g.axpy(eps, direction)?;
        let pert = observation_from_driver(model, g, obs.events.clone(), obs.measure)?;
        let run = robust_filter(model, &pert, opts, stream)?;
        let diff: Vec<f64> = run.thetas().iter().zip(&base_theta).map(|(a, b)| a - b).collect();
        let sup_gap = diff.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
        let pvar_gap = pvar_of_sequence(&diff, p);
        let dist = rough_distance(&obs.lift, &pert.lift, p)?;
        rows.push(RobustnessRow {
            amplitude: eps,
            rough_distance: dist,
            sup_gap,
            pvar_gap,
            ratio_sup: sup_gap / dist,
            ratio_pvar: pvar_gap / dist,
        });
    }
    let monotone = rows.windows(2).all(|w| w[1].sup_gap < w[0].sup_gap);
    let ratios: Vec<f64> = rows.iter().map(|r| r.ratio_sup).collect();
    let hi = ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(RobustnessReport {
        p,
        times: base.times(),
        base_theta,
        rows,
        monotone,
        band: hi / lo,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReparametrizationReport {
    pub theta_base: f64,
    pub theta_changed: f64,
    pub gap: f64,
    /// `sqrt(se_base² + se_changed²)`.
    pub combined_se: f64,
    pub within_3se: bool,
    /// `sup_t |λ(t) - t|`.
    pub shift: f64,
}

/// `Θ_T` of the lift against `Θ_T` of the reparametrized lift `η ∘ λ`.
pub fn reparametrization_gap(
    model: &FilterModel,
    obs: &ObservationRealization,
    lambda: &TimeChange<f64>,
    opts: &FilterOptions,
    stream: &RngStream,
) -> Result<ReparametrizationReport> {
    let t_end = obs.horizon();
    let lift = apply_time_change(&obs.lift, lambda)?;
    let events = MarkedEventStream {
        events: obs
            .events
            .events
            .iter()
            .map(|e| Event {
                time: lift.grid().time(obs.grid.position(e.time).expect("event on grid")),
                mark: e.mark.clone(),
            })
            .collect(),
        rejected: Vec::new(),
        ..obs.events.clone()
    };
    let changed = ObservationRealization {
        grid: lift.grid().clone(),
        g: lift.path().clone(),
        y: y_from_driver(model, lift.path())?,
        lift,
        events,
        signal: None,
        measure: obs.measure,
    };
    let at_end = FilterOptions {
        checkpoints: vec![t_end],
        ..opts.clone()
    };
    let a = robust_filter(model, obs, &at_end, stream)?;
    let b = robust_filter(model, &changed, &at_end, stream)?;
    let (ca, cb) = (&a.checkpoints[0], &b.checkpoints[0]);
    let gap = (ca.theta - cb.theta).abs();
    let combined_se = (ca.se_theta.powi(2) + cb.se_theta.powi(2)).sqrt();
    Ok(ReparametrizationReport {
        theta_base: ca.theta,
        theta_changed: cb.theta,
        gap,
        combined_se,
        within_3se: gap <= 3.0 * combined_se,
        shift: lambda.sup_deviation(),
    })
}

// ---------------------------------------------------------------------------
// L^m continuity over random drivers.

/// Draws one observation record from a stream; two samplers fed the same stream are
/// coupled.
pub type ObservationSampler<'a> = dyn Fn(&RngStream) -> Result<ObservationRealization> + Sync + 'a;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LmSpec {
    pub m: f64,
    pub epsilon: f64,
    pub p: f64,
    /// Slicing level and exponent of the integrability precondition
    /// `E exp(β (N_α + 1)(1 + sup jump)) < ∞`.
    pub alpha: f64,
    pub beta: f64,
    /// Cells of the grid on which `N_α` is counted (the lift is restricted to it).
    pub precondition_cells: usize,
    pub n_outer: usize,
    pub filter: FilterOptions,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LmReport {
    /// `‖sup_t |Θ(A) - Θ(B)|‖_{L^m}`.
    pub lhs: f64,
    /// `‖‖A - B‖_p‖_{L^{m+ε}}`.
    pub rhs: f64,
    /// `lhs / rhs`, absent when both vanish.
    pub ratio: Option<f64>,
    pub sup_gaps: Vec<f64>,
    pub distances: Vec<f64>,
    pub precondition: Vec<MomentReport>,
    /// Set when a precondition moment was not finite; the experiment then did not run.
    pub skipped: bool,
}

fn lq_norm(v: &[f64], q: f64) -> f64 {
    mean(&v.iter().map(|x| x.abs().powf(q)).collect::<Vec<_>>()).powf(1.0 / q)
}

fn precondition(
    samples: &[ObservationRealization],
    spec: &LmSpec,
    stream: &RngStream,
) -> Result<MomentReport> {
    let mut s = Vec::with_capacity(samples.len());
    for obs in samples {
        let stride = (obs.grid.cells() / spec.precondition_cells.max(1)).max(1);
        let coarse = obs.grid.subsample(stride)?.with_times(&obs.events.times())?;
        let r = rough_norm_via_nalpha_bound(&obs.lift.restrict_to(&coarse)?, spec.p, spec.alpha)?;
        s.push((r.n_alpha as f64 + 1.0) * (1.0 + r.jump_sup));
    }
    exp_moment_of_samples(&s, spec.beta, None, stream)
}

/// Coupled outer draws of two driver laws; common particles per outer index.
pub fn model_uncertainty_lm(
    model: &FilterModel,
    sampler_a: &ObservationSampler<'_>,
    sampler_b: &ObservationSampler<'_>,
    spec: &LmSpec,
    stream: &RngStream,
) -> Result<LmReport> {
    if spec.n_outer < 1 {
        return Err(invalid("n_outer", "must be positive"));
    }
    let pairs = run_indexed(spec.n_outer, spec.filter.threads, |o| {
        let s = stream.indexed("outer", o as u64);
        Ok::<_, crate::Error>((sampler_a(&s.child("driver"))?, sampler_b(&s.child("driver"))?))
    })?;
    let pairs: Vec<_> = pairs.into_iter().collect::<Result<_>>()?;
    let (a, b): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
    let pre = vec![
        precondition(&a, spec, &stream.child("precondition-a"))?,
        precondition(&b, spec, &stream.child("precondition-b"))?,
    ];
    if pre.iter().any(|r| r.saturated || !r.moment.is_finite()) {
        return Ok(LmReport {
            lhs: f64::NAN,
            rhs: f64::NAN,
            ratio: None,
            sup_gaps: Vec::new(),
            distances: Vec::new(),
            precondition: pre,
            skipped: true,
        });
    }
    let inner = FilterOptions {
        threads: None,
        ..spec.filter.clone()
    };
    let gaps = run_indexed(spec.n_outer, spec.filter.threads, |o| {
        let s = stream.indexed("outer", o as u64).child("particles");
        let (oa, ob) = (&a[o], &b[o]);
        let dist = rough_distance(&oa.lift, &ob.lift, spec.p)?;
        if dist == 0.0 {
            return Ok::<_, crate::Error>((0.0, 0.0));
        }
        let ra = robust_filter(model, oa, &inner, &s)?;
        let rb = robust_filter(model, ob, &inner, &s)?;
        let sup = ra
            .thetas()
            .iter()
            .zip(rb.thetas())
            .fold(0.0, |m: f64, (x, y)| m.max((x - y).abs()));
        Ok((sup, dist))
    })?;
    let gaps: Vec<(f64, f64)> = gaps.into_iter().collect::<Result<_>>()?;
    let sup_gaps: Vec<f64> = gaps.iter().map(|g| g.0).collect();
    let distances: Vec<f64> = gaps.iter().map(|g| g.1).collect();
    let lhs = lq_norm(&sup_gaps, spec.m);
    let rhs = lq_norm(&distances, spec.m + spec.epsilon);
    Ok(LmReport {
        lhs,
        rhs,
        ratio: (rhs > 0.0).then(|| lhs / rhs),
        sup_gaps,
        distances,
        precondition: pre,
        skipped: false,
    })
}

/// `G` restricted to the dyadic grid of `level` plus the event times, then carried back
/// piecewise-constantly to the observation grid and re-lifted there.
pub fn dyadic_coarsening(
    model: &FilterModel,
    obs: &ObservationRealization,
    level: u32,
) -> Result<ObservationRealization> {
    let coarse = TimeGrid64::dyadic(obs.horizon(), level)?.with_times(&obs.events.times())?;
    let g = obs.g.restrict_to(&coarse)?.refine_to(&obs.grid)?;
    let lift = RoughPath::ito_lift(&obs.g.restrict_to(&coarse)?).refine_to(&obs.grid)?;
    Ok(ObservationRealization {
        y: y_from_driver(model, &g)?,
        grid: obs.grid.clone(),
        g,
        lift,
        events: obs.events.clone(),
        signal: None,
        measure: obs.measure,
    })
}

/// Same observation with its `G` scaled by `1 + amplitude` in the Brownian block.
pub fn scaled_brownian_block(
    model: &FilterModel,
    obs: &ObservationRealization,
    amplitude: f64,
) -> Result<ObservationRealization> {
    let dy = model.dy;
    let g = obs.g.map_values(obs.g.dim(), |_, v| {
        let mut out = v.to_vec();
        for c in out.iter_mut().take(dy) {
            *c *= 1.0 + amplitude;
        }
        out
    })?;
    observation_from_driver(model, g, obs.events.clone(), obs.measure)
}
