use serde::{Deserialize, Serialize};

use super::coeffs::CoefficientSet;
use super::norms::{ensemble_pq_seminorm, MomentOrder};
use super::solver::{solve_doubly_sde_with, solve_rsde_with, SolverOptions};
use crate::error::{invalid, Result};
use crate::noise::{sample_brownian, sample_poisson_measure, MarkMeasure, MarkedEventStream, MartingaleSample, RngStream};
use crate::parallel::run_indexed;
use crate::roughpath::{apply_time_change, rough_distance, GridPath, RoughPath, TimeChange};
use crate::stats::{mean, pairwise_sum, std_error};
use crate::{GridPath64, RoughPath64, TimeGrid64};

/// Nested Monte Carlo layout: outer driver realizations times inner particles.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub n_outer: usize,
    pub n_inner: usize,
    pub seed: u64,
    #[serde(default)]
    pub threads: Option<usize>,
}

/// A jump of fixed size at a fixed time, added to the martingale.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeterministicJump {
    pub time: f64,
    pub size: Vec<f64>,
}

/// Martingale and random-measure inputs of an experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// Dimension of `M`; zero disables the Brownian part.
    pub brownian_dim: usize,
    pub jump_measure: MarkMeasure,
    #[serde(default)]
    pub deterministic_jump: Option<DeterministicJump>,
}

impl NoiseSpec {
    fn dim(&self) -> usize {
        self.brownian_dim
            .max(self.deterministic_jump.as_ref().map_or(0, |j| j.size.len()))
            .max(1)
    }

    /// Brownian part on `grid`, or zero when disabled.
    fn brownian(&self, stream: &RngStream, grid: &TimeGrid64) -> MartingaleSample {
        if self.brownian_dim == 0 {
            MartingaleSample::zero(grid, self.dim())
        } else {
            sample_brownian(stream, grid, self.brownian_dim)
        }
    }

    fn with_jump(&self, base: &MartingaleSample) -> Result<MartingaleSample> {
        match &self.deterministic_jump {
            None => Ok(base.clone()),
            Some(j) => {
                let d = base.dim();
                if j.size.len() != d {
                    return Err(invalid("deterministic_jump", "size must match the martingale dimension"));
                }
                let step = GridPath::from_fn(base.grid().clone(), d, |t| {
                    if t >= j.time {
                        j.size.clone()
                    } else {
                        vec![0.0; d]
                    }
                })?;
                Ok(MartingaleSample::from_path(base.path.axpy(1.0, &step)?))
            }
        }
    }
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn sup_gap(a: &GridPath64, b: &GridPath64) -> f64 {
    (0..a.len()).map(|i| euclid(a.value(i), b.value(i))).fold(0.0, f64::max)
}

// ---------------------------------------------------------------------------
// Consistency of the rough route with the classical doubly stochastic route.

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConsistencySpec {
    pub horizon: f64,
    /// Cells of the reference grid; the mesh levels must divide it.
    pub fine_cells: usize,
    /// Cells of the two mesh levels, coarser first.
    pub mesh_cells: [usize; 2],
    pub noise: NoiseSpec,
    pub ensemble: EnsembleSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyLevel {
    pub cells: usize,
    pub mean_terminal_gap: f64,
    pub se_terminal_gap: f64,
    pub rms_terminal_gap: f64,
    pub mean_sup_gap: f64,
    pub max_sup_gap: f64,
    /// RMS terminal error of each route against the classical scheme on the fine grid.
    pub rough_rms_error: f64,
    pub classical_rms_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub levels: Vec<ConsistencyLevel>,
    /// Mean terminal gap at the coarse level over the one at the fine level.
    pub decay_ratio: f64,
    pub decays: bool,
    /// Every gap at every level is exactly zero.
    pub bit_exact: bool,
    pub paths: usize,
    pub aborted: usize,
    pub seed: u64,
}

struct PathGaps {
    terminal: [f64; 2],
    sup: [f64; 2],
    rough_err: [f64; 2],
    classical_err: [f64; 2],
    aborted: bool,
}

/// Runs both routes on the same coarse grid for each mesh level.
///
/// The driver is a Brownian realization per outer index, held fixed across the inner
/// particles; the rough route receives its Itô lift restricted to the coarse grid
/// (so the level 2 carries the sub-cell information), the classical route receives
/// only the coarse increments. Martingale and events come from the same substreams in
/// both routes.
pub fn consistency_check(coeffs: &CoefficientSet, y0: &[f64], spec: &ConsistencySpec) -> Result<ConsistencyReport> {
    let base = TimeGrid64::uniform(spec.horizon, spec.fine_cells)?;
    for &c in &spec.mesh_cells {
        if c == 0 || spec.fine_cells % c != 0 {
            return Err(invalid("mesh_cells", "each level must divide fine_cells"));
        }
    }
    let root = RngStream::new(spec.ensemble.seed).child("consistency");
    let drivers: Vec<GridPath64> = (0..spec.ensemble.n_outer)
        .map(|w| sample_brownian(&root.indexed("outer", w as u64).child("driver"), &base, coeffs.driver_dim).path)
        .collect();
    let total = spec.ensemble.n_outer * spec.ensemble.n_inner;
    let opts = SolverOptions::default();

    let per_path = run_indexed(total, spec.ensemble.threads, |idx| -> Result<PathGaps> {
        let (w, j) = (idx / spec.ensemble.n_inner, idx % spec.ensemble.n_inner);
        let inner = root.indexed("outer", w as u64).indexed("inner", j as u64);
        let events = sample_poisson_measure(&inner.child("events"), &base, &spec.noise.jump_measure);
        let fine = events.insert_into(&base)?;
        let x_fine = drivers[w].refine_to(&fine)?;
        let rp_fine = RoughPath::ito_lift(&drivers[w]).refine_to(&fine)?;
        let m_fine = spec.noise.with_jump(&spec.noise.brownian(&inner.child("martingale"), &fine))?;
        let (reference, ab_ref) = solve_doubly_sde_with(coeffs, y0, &x_fine, &m_fine, &events, &fine, &opts)?;

        let mut gaps = PathGaps {
            terminal: [0.0; 2],
            sup: [0.0; 2],
            rough_err: [0.0; 2],
            classical_err: [0.0; 2],
            aborted: ab_ref.is_some(),
        };
        for (l, &cells) in spec.mesh_cells.iter().enumerate() {
            let coarse = events.insert_into(&base.subsample(spec.fine_cells / cells)?)?;
            let m = m_fine.restrict_to(&coarse)?;
            let rp = rp_fine.restrict_to(&coarse)?;
            let x = x_fine.restrict_to(&coarse)?;
            let rough = solve_rsde_with(coeffs, y0, &rp, &m, &events, &coarse, &opts)?;
            let (classical, ab) = solve_doubly_sde_with(coeffs, y0, &x, &m, &events, &coarse, &opts)?;
            gaps.aborted |= rough.aborted_at.is_some() || ab.is_some();
            gaps.terminal[l] = euclid(rough.y.last(), classical.last());
            gaps.sup[l] = sup_gap(&rough.y, &classical);
            gaps.rough_err[l] = euclid(rough.y.last(), reference.last());
            gaps.classical_err[l] = euclid(classical.last(), reference.last());
        }
        Ok(gaps)
    })?;
    let per_path: Vec<PathGaps> = per_path.into_iter().collect::<Result<_>>()?;

    let kept: Vec<&PathGaps> = per_path.iter().filter(|g| !g.aborted).collect();
    let aborted = per_path.len() - kept.len();
    let rms = |xs: Vec<f64>| mean(&xs.iter().map(|x| x * x).collect::<Vec<_>>()).sqrt();
    let levels: Vec<ConsistencyLevel> = (0..2)
        .map(|l| {
            let term: Vec<f64> = kept.iter().map(|g| g.terminal[l]).collect();
            let sup: Vec<f64> = kept.iter().map(|g| g.sup[l]).collect();
            ConsistencyLevel {
                cells: spec.mesh_cells[l],
                mean_terminal_gap: mean(&term),
                se_terminal_gap: std_error(&term),
                rms_terminal_gap: rms(term.clone()),
                mean_sup_gap: mean(&sup),
                max_sup_gap: sup.iter().fold(0.0, |a: f64, &b| a.max(b)),
                rough_rms_error: rms(kept.iter().map(|g| g.rough_err[l]).collect()),
                classical_rms_error: rms(kept.iter().map(|g| g.classical_err[l]).collect()),
            }
        })
        .collect();
    let bit_exact = kept.iter().all(|g| g.terminal == [0.0; 2] && g.sup == [0.0; 2]);
    let decay_ratio = if bit_exact {
        1.0
    } else {
        levels[0].mean_terminal_gap / levels[1].mean_terminal_gap
    };
    Ok(ConsistencyReport {
        decays: bit_exact || decay_ratio > 1.0,
        decay_ratio,
        bit_exact,
        levels,
        paths: per_path.len(),
        aborted,
        seed: spec.ensemble.seed,
    })
}

// ---------------------------------------------------------------------------
// Stability of the solution map.

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilitySpec {
    pub p: f64,
    pub q: f64,
    /// Norms are evaluated on `2^level + 1` dyadic times.
    pub level: u32,
    pub noise: NoiseSpec,
    pub n_paths: usize,
    pub seed: u64,
    #[serde(default)]
    pub threads: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    /// `|y0 - ỹ0| + ‖Y - Ỹ‖_{p,q}` with the ensemble estimate of the seminorm.
    pub solution_distance: f64,
    /// `|y0 - ỹ0| + ρ_p(𝐗, 𝐗̃)`.
    pub driver_distance: f64,
    pub terminal_l2: f64,
    /// `None` when both distances vanish.
    pub ratio: Option<f64>,
    pub aborted: usize,
    pub paths: usize,
}

/// Solutions for two initial values and two drivers on a common grid, with the same
/// martingale and events in both.
pub fn stability_experiment(
    coeffs: &CoefficientSet,
    y0: (&[f64], &[f64]),
    drivers: (&RoughPath64, &RoughPath64),
    spec: &StabilitySpec,
) -> Result<StabilityReport> {
    let (a, b) = drivers;
    let grid = a.grid();
    if b.grid() != grid {
        return Err(invalid("drivers", "both drivers must share a grid"));
    }
    let root = RngStream::new(spec.seed).child("stability");
    let opts = SolverOptions::default();
    let runs = run_indexed(spec.n_paths, spec.threads, |w| -> Result<Option<(GridPath64, GridPath64)>> {
        let s = root.indexed("path", w as u64);
        let events = sample_poisson_measure(&s.child("events"), grid, &spec.noise.jump_measure);
        let g = events.insert_into(grid)?;
        let m = spec.noise.with_jump(&spec.noise.brownian(&s.child("martingale"), &g))?;
        let ya = solve_rsde_with(coeffs, y0.0, &a.refine_to(&g)?, &m, &events, &g, &opts)?;
        let yb = solve_rsde_with(coeffs, y0.1, &b.refine_to(&g)?, &m, &events, &g, &opts)?;
        if ya.is_aborted() || yb.is_aborted() {
            return Ok(None);
        }
        let diff = ya.y.axpy(-1.0, &yb.y)?;
        Ok(Some((diff, ya.y)))
    })?;
    let runs: Vec<Option<(GridPath64, GridPath64)>> = runs.into_iter().collect::<Result<_>>()?;
    let diffs: Vec<&GridPath64> = runs.iter().flatten().map(|r| &r.0).collect();
    let aborted = runs.len() - diffs.len();
    if diffs.is_empty() {
        return Err(invalid("coeffs", "every path was aborted by the divergence guard"));
    }

    let dy0 = euclid(y0.0, y0.1);
    let idx = super::solver::dyadic_indices(grid, spec.level);
    let times: Vec<f64> = idx.iter().map(|&i| grid.time(i)).collect();
    let semi = ensemble_pq_seminorm(&diffs, &times, spec.p, MomentOrder::Finite(spec.q))?;
    let solution_distance = dy0 + semi;
    let driver_distance = dy0 + rough_distance(a, b, spec.p)?;
    let sq: Vec<f64> = diffs.iter().map(|d| d.last().iter().map(|v| v * v).sum()).collect();
    let terminal_l2 = (pairwise_sum(&sq) / sq.len() as f64).sqrt();
    let ratio = if driver_distance == 0.0 && solution_distance == 0.0 {
        None
    } else {
        Some(solution_distance / driver_distance)
    };
    Ok(StabilityReport {
        solution_distance,
        driver_distance,
        terminal_l2,
        ratio,
        aborted,
        paths: runs.len(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityRow {
    pub amplitude: f64,
    pub report: StabilityReport,
}

/// `stability_experiment` for `X` against `X + ε h` over the given amplitudes, both lifted
/// by the Itô lift.
pub fn stability_table(
    coeffs: &CoefficientSet,
    y0: &[f64],
    x: &GridPath64,
    direction: &GridPath64,
    amplitudes: &[f64],
    spec: &StabilitySpec,
) -> Result<Vec<StabilityRow>> {
    let base = RoughPath::ito_lift(x);
    amplitudes
        .iter()
        .map(|&eps| {
            let other = RoughPath::ito_lift(&x.axpy(eps, direction)?);
            Ok(StabilityRow {
                amplitude: eps,
                report: stability_experiment(coeffs, (y0, y0), (&base, &other), spec)?,
            })
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Continuity under time changes of the driver.

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkorokhodSpec {
    pub noise: NoiseSpec,
    pub n_paths: usize,
    pub seed: u64,
    #[serde(default)]
    pub threads: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkorokhodPoint {
    /// `sup_t |λ(t) - t|`.
    pub shift: f64,
    pub l2_gap: f64,
    pub se_sq_gap: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkorokhodReport {
    pub points: Vec<SkorokhodPoint>,
    /// Every gap is at most the previous one.
    pub monotone: bool,
    pub final_gap: f64,
    pub aborted: usize,
}

/// Terminal L² distance between the solutions driven by `rp ∘ λ_n` and by `rp`.
///
/// Both solutions of a pair run on the union grid of the two drivers and the events,
/// with the martingale bridged onto that grid from a skeleton shared by all `n`.
pub fn skorokhod_convergence_experiment(
    coeffs: &CoefficientSet,
    y0: &[f64],
    rp: &RoughPath64,
    shifts: &[TimeChange<f64>],
    spec: &SkorokhodSpec,
) -> Result<SkorokhodReport> {
    let root = RngStream::new(spec.seed).child("skorokhod");
    let opts = SolverOptions::default();
    let moved: Vec<RoughPath64> = shifts
        .iter()
        .map(|l| apply_time_change(rp, l))
        .collect::<Result<_>>()?;
    let runs = run_indexed(spec.n_paths, spec.threads, |w| -> Result<Option<Vec<f64>>> {
        let s = root.indexed("path", w as u64);
        let events = sample_poisson_measure(&s.child("events"), rp.grid(), &spec.noise.jump_measure);
        let mut base = events.insert_into(rp.grid())?;
        if let Some(j) = &spec.noise.deterministic_jump {
            base = base.with_times(&[j.time])?;
        }
        let skeleton = spec.noise.brownian(&s.child("martingale"), &base);
        let mut out = Vec::with_capacity(moved.len());
        for (n, rpn) in moved.iter().enumerate() {
            let g = base.union(rpn.grid())?;
            let m = if spec.noise.brownian_dim == 0 {
                MartingaleSample::zero(&g, skeleton.dim())
            } else {
                skeleton.refine_brownian(&g, &s.indexed("bridge", n as u64))?
            };
            let m = spec.noise.with_jump(&m)?;
            let yn = solve_rsde_with(coeffs, y0, &rpn.refine_to(&g)?, &m, &events, &g, &opts)?;
            let y = solve_rsde_with(coeffs, y0, &rp.refine_to(&g)?, &m, &events, &g, &opts)?;
            if yn.is_aborted() || y.is_aborted() {
                return Ok(None);
            }
            out.push(euclid(yn.y.last(), y.y.last()));
        }
        Ok(Some(out))
    })?;
    let runs: Vec<Option<Vec<f64>>> = runs.into_iter().collect::<Result<_>>()?;
    let kept: Vec<&Vec<f64>> = runs.iter().flatten().collect();
    if kept.is_empty() {
        return Err(invalid("coeffs", "every path was aborted by the divergence guard"));
    }
    let points: Vec<SkorokhodPoint> = shifts
        .iter()
        .enumerate()
        .map(|(n, l)| {
            let sq: Vec<f64> = kept.iter().map(|g| g[n] * g[n]).collect();
            SkorokhodPoint {
                shift: l.sup_deviation(),
                l2_gap: mean(&sq).sqrt(),
                se_sq_gap: std_error(&sq),
            }
        })
        .collect();
    let monotone = points.windows(2).all(|w| w[1].l2_gap <= w[0].l2_gap);
    Ok(SkorokhodReport {
        final_gap: points.last().map_or(0.0, |p| p.l2_gap),
        monotone,
        points,
        aborted: runs.len() - kept.len(),
    })
}

/// The scalar example where continuity fails: `dY = Y dM + dX` with `M = ξ 1_{[t0, T]}`
/// and `X = 1_{[t0, T]}`, against drivers whose jump is moved to `t0 - T 2^{-n}`.
pub fn skorokhod_counterexample(xi: f64, t0: f64, horizon: f64, cells: usize, levels: &[u32]) -> Result<SkorokhodReport> {
    use std::sync::Arc;
    let coeffs = CoefficientSet::new(1, 1, 1)
        .with_diffusion(Arc::new(|_, y, o| o[0] = y[0]))
        .with_rough(Arc::new(|_, _, o| o[0] = 1.0), Arc::new(|_, _, o| o[0] = 0.0));
    let grid = TimeGrid64::uniform(horizon, cells)?.with_times(&[t0])?;
    let x = GridPath::from_fn(grid, 1, |t| vec![if t >= t0 { 1.0 } else { 0.0 }])?;
    let rp = RoughPath::ito_lift(&x);
    let shifts: Vec<TimeChange<f64>> = levels
        .iter()
        .map(|&n| TimeChange::moving(horizon, t0, t0 - horizon / (1u64 << n) as f64))
        .collect::<Result<_>>()?;
    let spec = SkorokhodSpec {
        noise: NoiseSpec {
            brownian_dim: 0,
            jump_measure: MarkMeasure::empty(),
            deterministic_jump: Some(DeterministicJump {
                time: t0,
                size: vec![xi],
            }),
        },
        n_paths: 1,
        seed: 0,
        threads: Some(1),
    };
    skorokhod_convergence_experiment(&coeffs, &[0.0], &rp, &shifts, &spec)
}

// ---------------------------------------------------------------------------
// Moments of compensated jump integrals.

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JumpMomentReport {
    pub q: f64,
    /// `E sup_t |∫ g dÑ|^q`.
    pub lhs: f64,
    /// `E (Σ |g|^2 over events)^{q/2} + E (∫∫ |g|^2 ν dt)^{q/2}`.
    pub rhs: f64,
    pub fitted_constant: f64,
    pub paths: usize,
}

/// Empirical constant in the maximal inequality for `∫ g(t, u) Ñ(dt, du)` with a
/// deterministic scalar integrand.
pub fn jump_moment_check(
    nu: &MarkMeasure,
    g: &(dyn Fn(f64, &[f64]) -> f64 + Sync),
    horizon: f64,
    cells: usize,
    q: f64,
    n_paths: usize,
    seed: u64,
) -> Result<JumpMomentReport> {
    let base = TimeGrid64::uniform(horizon, cells)?;
    let root = RngStream::new(seed).child("jump-moments");
    let rows = run_indexed(n_paths, None, |w| -> Result<(f64, f64, f64)> {
        let events: MarkedEventStream = sample_poisson_measure(&root.indexed("path", w as u64), &base, nu);
        let grid = events.insert_into(&base)?;
        let zero = GridPath64::zeros(grid.clone(), 1);
        let integral = crate::noise::compensated_integral(&events, &|t, _, u| vec![g(t, u)], 1, &zero, &grid)?;
        let sup = (0..integral.len()).map(|i| integral.value(i)[0].abs()).fold(0.0, f64::max);
        let bracket: f64 = events.events.iter().map(|e| g(e.time, &e.mark).powi(2)).sum();
        let mut comp = 0.0;
        for k in 0..grid.cells() {
            for a in &nu.atoms {
                comp += a.weight * g(grid.time(k), &a.mark).powi(2) * grid.dt(k);
            }
        }
        Ok((sup.powf(q), bracket.powf(q / 2.0), comp.powf(q / 2.0)))
    })?;
    let rows: Vec<(f64, f64, f64)> = rows.into_iter().collect::<Result<_>>()?;
    let lhs = mean(&rows.iter().map(|r| r.0).collect::<Vec<_>>());
    let rhs = mean(&rows.iter().map(|r| r.1).collect::<Vec<_>>()) + mean(&rows.iter().map(|r| r.2).collect::<Vec<_>>());
    Ok(JumpMomentReport {
        q,
        lhs,
        rhs,
        fitted_constant: if rhs > 0.0 { lhs / rhs } else { 0.0 },
        paths: n_paths,
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;

    fn noise(mass: f64) -> NoiseSpec {
        NoiseSpec {
            brownian_dim: 1,
            jump_measure: MarkMeasure::scalar(&[(-0.3, mass), (0.4, mass / 2.0)]).unwrap(),
            deterministic_jump: None,
        }
    }

    fn small_ensemble(seed: u64) -> EnsembleSpec {
        EnsembleSpec {
            n_outer: 4,
            n_inner: 3,
            seed,
            threads: None,
        }
    }

    #[test]
    fn trivial_consistency_is_bit_exact() {
        let spec = ConsistencySpec {
            horizon: 1.0,
            fine_cells: 64,
            mesh_cells: [8, 16],
            noise: noise(1.0),
            ensemble: small_ensemble(3),
        };
        let no_rough = CoefficientSet::linear_scalar(-0.3, 0.2, 0.0, true);
        assert!(consistency_check(&no_rough, &[1.0], &spec).unwrap().bit_exact);
        let additive = CoefficientSet::linear_scalar(-0.3, 0.2, 0.0, true).with_rough(
            Arc::new(|_, _, o| o[0] = 0.7),
            Arc::new(|_, _, o| o[0] = 0.0),
        );
        let r = consistency_check(&additive, &[1.0], &spec).unwrap();
        assert!(r.bit_exact, "{:?}", r);
        let mult = CoefficientSet::linear_scalar(-0.3, 0.2, 0.7, true);
        let r = consistency_check(&mult, &[1.0], &spec).unwrap();
        assert!(!r.bit_exact && r.levels[0].mean_terminal_gap > 0.0);
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let mut spec = ConsistencySpec {
            horizon: 1.0,
            fine_cells: 32,
            mesh_cells: [4, 8],
            noise: noise(2.0),
            ensemble: small_ensemble(8),
        };
        let c = CoefficientSet::linear_scalar(-0.3, 0.2, 0.7, true);
        spec.ensemble.threads = Some(1);
        let a = consistency_check(&c, &[1.0], &spec).unwrap();
        spec.ensemble.threads = Some(4);
        let b = consistency_check(&c, &[1.0], &spec).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn identical_inputs_give_zero_distance() {
        let g = TimeGrid64::uniform(1.0, 32).unwrap();
        let rp = RoughPath::ito_lift(&sample_brownian(&RngStream::new(1), &g, 1).path);
        let spec = StabilitySpec {
            p: 2.5,
            q: 2.0,
            level: 4,
            noise: noise(1.0),
            n_paths: 8,
            seed: 2,
            threads: None,
        };
        let c = CoefficientSet::linear_scalar(-0.3, 0.2, 0.7, true);
        let r = stability_experiment(&c, (&[1.0], &[1.0]), (&rp, &rp), &spec).unwrap();
        assert_eq!(r.ratio, None);
        assert_eq!(r.solution_distance, 0.0);
    }

    #[test]
    fn counterexample_gap_persists() {
        let r = skorokhod_counterexample(1.0, 0.5, 1.0, 64, &[2, 3, 4, 5, 6]).unwrap();
        for p in &r.points {
            assert_eq!(p.l2_gap, 1.0);
        }
    }

    #[test]
    fn identity_shift_gives_zero_gap() {
        let g = TimeGrid64::uniform(1.0, 32).unwrap();
        let rp = RoughPath::ito_lift(&sample_brownian(&RngStream::new(1), &g, 1).path);
        let spec = SkorokhodSpec {
            noise: noise(1.0),
            n_paths: 4,
            seed: 1,
            threads: None,
        };
        let c = CoefficientSet::linear_scalar(-0.3, 0.2, 0.7, true);
        let r = skorokhod_convergence_experiment(&c, &[1.0], &rp, &[TimeChange::identity(1.0)], &spec).unwrap();
        assert_eq!(r.final_gap, 0.0);
    }
}
