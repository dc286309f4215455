use serde::{Deserialize, Serialize};

use super::coeffs::CoefficientSet;
use crate::error::{invalid, Error, Result};
use crate::noise::{MarkedEventStream, MartingaleSample};
use crate::{GridPath64, RoughPath64, TimeGrid64};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// A state whose norm exceeds this freezes the path and marks it aborted.
    pub divergence_bound: f64,
    /// Fill `remainder_diag`; large ensembles switch this off.
    #[serde(default = "yes")]
    pub diagnostics: bool,
}

fn yes() -> bool {
    true
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            divergence_bound: 1e8,
            diagnostics: true,
        }
    }
}

/// Pathwise sizes of `δY`, `δY'` and `R^Y` over one dyadic level of windows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DyadicLevelDiag {
    pub level: u32,
    pub max_dy: f64,
    pub max_dy_prime: f64,
    pub max_remainder: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ControlledSolution {
    pub y: GridPath64,
    /// `f(Y)`, row-major `m x d` per grid time.
    pub y_prime: GridPath64,
    pub aborted_at: Option<f64>,
    pub remainder_diag: Vec<DyadicLevelDiag>,
}

impl ControlledSolution {
    /// `R^Y_{i,j} = δY_{i,j} - Y'_i δX_{i,j}`.
    pub fn remainder(&self, rp: &RoughPath64, i: usize, j: usize) -> Vec<f64> {
        let m = self.y.dim();
        let d = rp.dim();
        let dx = rp.increment(i, j);
        let yp = self.y_prime.value(i);
        let mut r = self.y.increment(i, j);
        for a in 0..m {
            for b in 0..d {
                r[a] -= yp[a * d + b] * dx[b];
            }
        }
        r
    }

    pub fn is_aborted(&self) -> bool {
        self.aborted_at.is_some()
    }
}

/// Grid indices closest to the dyadic times `l T / 2^level` (from the left).
pub(crate) fn dyadic_indices(grid: &TimeGrid64, level: u32) -> Vec<usize> {
    let n = 1usize << level;
    let t = grid.horizon();
    let mut idx: Vec<usize> = (0..=n).map(|l| grid.index_at(t * l as f64 / n as f64)).collect();
    idx.dedup();
    idx
}

fn diagnostics(sol: &ControlledSolution, rp: &RoughPath64) -> Vec<DyadicLevelDiag> {
    let grid = rp.grid();
    let max_level = (grid.cells() as f64).log2().floor().min(6.0) as u32;
    (0..=max_level)
        .map(|level| {
            let idx = dyadic_indices(grid, level);
            let mut diag = DyadicLevelDiag {
                level,
                max_dy: 0.0,
                max_dy_prime: 0.0,
                max_remainder: 0.0,
            };
            for w in idx.windows(2) {
                let (i, j) = (w[0], w[1]);
                diag.max_dy = diag.max_dy.max(sol.y.increment_norm(i, j));
                diag.max_dy_prime = diag.max_dy_prime.max(sol.y_prime.increment_norm(i, j));
                let r = sol.remainder(rp, i, j);
                diag.max_remainder = diag.max_remainder.max(r.iter().map(|v| v * v).sum::<f64>().sqrt());
            }
            diag
        })
        .collect()
}

fn check_inputs(
    coeffs: &CoefficientSet,
    y0: &[f64],
    x: &GridPath64,
    m: &MartingaleSample,
    events: &MarkedEventStream,
    grid: &TimeGrid64,
) -> Result<()> {
    if y0.len() != coeffs.dim {
        return Err(invalid("y0", format!("expected dimension {}", coeffs.dim)));
    }
    if x.dim() != coeffs.driver_dim {
        return Err(invalid("driver", format!("expected dimension {}", coeffs.driver_dim)));
    }
    if coeffs.diffusion.is_some() && m.dim() != coeffs.noise_dim {
        return Err(invalid("M", format!("expected dimension {}", coeffs.noise_dim)));
    }
    if x.grid() != grid || m.grid() != grid {
        return Err(Error::GridMismatch("driver, martingale and solver grids must coincide".into()));
    }
    events.check_grid(grid)
}

/// The explicit one-step scheme shared by both routes.
///
/// Every term of a cell is evaluated at `Y_k`; they are added in the order drift,
/// martingale, events at `t_{k+1}`, compensator, rough increment, level-2 correction.
fn scheme(
    coeffs: &CoefficientSet,
    y0: &[f64],
    x: &GridPath64,
    level2: Option<&RoughPath64>,
    m: &MartingaleSample,
    events: &MarkedEventStream,
    opts: &SolverOptions,
) -> Result<(GridPath64, Option<f64>)> {
    let grid = x.grid();
    let dim = coeffs.dim;
    let d = coeffs.driver_dim;
    let k_dim = m.dim();
    let n = grid.len();
    let mut values = vec![0.0; n * dim];
    values[..dim].copy_from_slice(y0);

    let mut drift = vec![0.0; dim];
    let mut sigma = vec![0.0; dim * k_dim];
    let mut f = vec![0.0; dim * d];
    let mut jac = vec![0.0; dim * d * dim];
    let mut g = vec![0.0; dim];
    let mut dm = vec![0.0; k_dim];
    let mut dx = vec![0.0; d];
    let mut cursor = 0usize;
    let mut aborted_at = None;

    for k in 0..grid.cells() {
        let (t, t1) = (grid.time(k), grid.time(k + 1));
        let dt = t1 - t;
        let (head, tail) = values.split_at_mut((k + 1) * dim);
        let y = &head[k * dim..];
        let out = &mut tail[..dim];
        out.copy_from_slice(y);
        let in_cell = events.at_time(&mut cursor, t1);
        if aborted_at.is_some() {
            continue;
        }

        if let Some(b) = &coeffs.drift {
            b(t, y, &mut drift);
            for i in 0..dim {
                out[i] += drift[i] * dt;
            }
        }
        if let Some(s) = &coeffs.diffusion {
            m.path.increment_into(k, k + 1, &mut dm);
            s(t, y, &mut sigma);
            for i in 0..dim {
                let mut v = 0.0;
                for c in 0..k_dim {
                    v += sigma[i * k_dim + c] * dm[c];
                }
                out[i] += v;
            }
        }
        if let Some(jump) = &coeffs.jump {
            for e in &events.events[in_cell] {
                jump(e.time, y, &e.mark, &mut g);
                for i in 0..dim {
                    out[i] += g[i];
                }
            }
            for a in &events.measure.atoms {
                let w = a.weight * events.rate(t, y, &a.mark) * dt;
                jump(t, y, &a.mark, &mut g);
                for i in 0..dim {
                    out[i] -= w * g[i];
                }
            }
        }
        if let Some(fr) = &coeffs.rough {
            x.increment_into(k, k + 1, &mut dx);
            fr(t, y, &mut f);
            for i in 0..dim {
                let mut v = 0.0;
                for b in 0..d {
                    v += f[i * d + b] * dx[b];
                }
                out[i] += v;
            }
            if let Some(rp) = level2 {
                let s = rp.cell_level2(k);
                if s.iter().any(|v| *v != 0.0) {
                    let jf = coeffs
                        .rough_jacobian
                        .as_ref()
                        .ok_or_else(|| invalid("coeffs", "rough coefficient without Jacobian"))?;
                    jf(t, y, &mut jac);
                    for i in 0..dim {
                        let mut v = 0.0;
                        for a in 0..d {
                            for b in 0..d {
                                let sab = s[a * d + b];
                                if sab == 0.0 {
                                    continue;
                                }
                                let mut dff = 0.0;
                                for j in 0..dim {
                                    dff += jac[(i * d + b) * dim + j] * f[j * d + a];
                                }
                                v += dff * sab;
                            }
                        }
                        if v != 0.0 {
                            out[i] += v;
                        }
                    }
                }
            }
        }

        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence { time: t1 });
        }
        if out.iter().map(|v| v * v).sum::<f64>().sqrt() > opts.divergence_bound {
            aborted_at = Some(t1);
        }
    }
    // Freeze everything after an abort at the last accepted value.
    if let Some(ta) = aborted_at {
        let ka = grid.position(ta).expect("abort time is a grid time");
        for k in ka + 1..n {
            let (head, tail) = values.split_at_mut(k * dim);
            tail[..dim].copy_from_slice(&head[(k - 1) * dim..]);
        }
    }
    Ok((GridPath64::new(grid.clone(), dim, values)?, aborted_at))
}

/// Rough SDE with jumps driven by the level-2 path `rp`, the martingale `m` and the
/// compensated random measure `events`, all on `grid`.
pub fn solve_rsde(
    coeffs: &CoefficientSet,
    y0: &[f64],
    rp: &RoughPath64,
    m: &MartingaleSample,
    events: &MarkedEventStream,
    grid: &TimeGrid64,
) -> Result<ControlledSolution> {
    solve_rsde_with(coeffs, y0, rp, m, events, grid, &SolverOptions::default())
}

pub fn solve_rsde_with(
    coeffs: &CoefficientSet,
    y0: &[f64],
    rp: &RoughPath64,
    m: &MartingaleSample,
    events: &MarkedEventStream,
    grid: &TimeGrid64,
    opts: &SolverOptions,
) -> Result<ControlledSolution> {
    check_inputs(coeffs, y0, rp.path(), m, events, grid)?;
    let (y, aborted_at) = scheme(coeffs, y0, rp.path(), Some(rp), m, events, opts)?;
    let md = coeffs.dim * coeffs.driver_dim;
    let y_prime = match &coeffs.rough {
        Some(f) => y.map_values(md, |t, v| {
            let mut out = vec![0.0; md];
            f(t, v, &mut out);
            out
        })?,
        None => GridPath64::zeros(grid.clone(), md),
    };
    let mut sol = ControlledSolution {
        y,
        y_prime,
        aborted_at,
        remainder_diag: Vec::new(),
    };
    if opts.diagnostics {
        sol.remainder_diag = diagnostics(&sol, rp);
    }
    Ok(sol)
}

/// Classical Euler scheme with `x_path` used as a plain Itô integrator.
pub fn solve_doubly_sde(
    coeffs: &CoefficientSet,
    y0: &[f64],
    x_path: &GridPath64,
    m: &MartingaleSample,
    events: &MarkedEventStream,
    grid: &TimeGrid64,
) -> Result<GridPath64> {
    solve_doubly_sde_with(coeffs, y0, x_path, m, events, grid, &SolverOptions::default()).map(|r| r.0)
}

/// As [`solve_doubly_sde`], also returning the abort time if the guard fired.
pub fn solve_doubly_sde_with(
    coeffs: &CoefficientSet,
    y0: &[f64],
    x_path: &GridPath64,
    m: &MartingaleSample,
    events: &MarkedEventStream,
    grid: &TimeGrid64,
    opts: &SolverOptions,
) -> Result<(GridPath64, Option<f64>)> {
    check_inputs(coeffs, y0, x_path, m, events, grid)?;
    scheme(coeffs, y0, x_path, None, m, events, opts)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::noise::{sample_brownian, sample_poisson_measure, Event, MarkMeasure, RngStream};
    use crate::roughpath::{GridPath, RoughPath};
    use crate::stats::median;

    fn no_events(grid: &TimeGrid64) -> MarkedEventStream {
        MarkedEventStream::empty(grid.horizon(), MarkMeasure::empty())
    }

    #[test]
    fn zero_coefficients_keep_initial_value() {
        let g = TimeGrid64::uniform(1.0, 16).unwrap();
        let rp = RoughPath::ito_lift(&sample_brownian(&RngStream::new(1), &g, 2).path);
        let m = sample_brownian(&RngStream::new(2), &g, 1);
        let c = CoefficientSet::new(3, 2, 1);
        let sol = solve_rsde(&c, &[1.0, -2.0, 0.5], &rp, &m, &no_events(&g), &g).unwrap();
        for k in 0..g.len() {
            assert_eq!(sol.y.value(k), &[1.0, -2.0, 0.5]);
        }
        let y = solve_doubly_sde(&c, &[1.0, -2.0, 0.5], rp.path(), &m, &no_events(&g), &g).unwrap();
        assert_eq!(y, sol.y);
    }

    #[test]
    fn smooth_driver_matches_exponential() {
        let exact = (0.8f64).sin().exp();
        let c = CoefficientSet::linear_scalar(0.0, 0.0, 1.0, false);
        let mut errs = Vec::new();
        for n in [64usize, 256, 1024] {
            let g = TimeGrid64::uniform(1.0, n).unwrap();
            let x = GridPath::from_fn(g.clone(), 1, |t| vec![(0.8 * t).sin()]).unwrap();
            let rp = RoughPath::smooth_lift(&x);
            let sol = solve_rsde(&c, &[1.0], &rp, &MartingaleSample::zero(&g, 1), &no_events(&g), &g).unwrap();
            errs.push((sol.y.last()[0] - exact).abs());
        }
        assert!(errs[2] < 1e-4, "{:?}", errs);
        assert!(errs[0] > errs[1] && errs[1] > errs[2]);
    }

    #[test]
    fn geometric_brownian_strong_rate() {
        let c = CoefficientSet::linear_scalar(0.0, 0.0, 1.0, false);
        let fine = TimeGrid64::uniform(1.0, 1024).unwrap();
        let coarse = TimeGrid64::uniform(1.0, 256).unwrap();
        let mut e_f = Vec::new();
        let mut e_c = Vec::new();
        for w in 0..200u64 {
            let b = sample_brownian(&RngStream::new(9).indexed("path", w), &fine, 1);
            let exact = (b.path.last()[0] - 0.5).exp();
            for (grid, errs) in [(&fine, &mut e_f), (&coarse, &mut e_c)] {
                let rp = RoughPath::ito_lift(&b.path.restrict_to(grid).unwrap());
                let sol = solve_rsde(&c, &[1.0], &rp, &MartingaleSample::zero(grid, 1), &no_events(grid), grid)
                    .unwrap();
                errs.push((sol.y.last()[0] / exact - 1.0).abs());
            }
        }
        let ratio = median(&e_c) / median(&e_f);
        assert!(ratio > 1.4 && ratio < 2.8, "ratio {}", ratio);
    }

    #[test]
    fn canonical_jump_of_driver_and_martingale() {
        // σ(y) = y, f = 1: M and X jump together at 0.5, X alone at 0.25.
        let g = TimeGrid64::uniform(1.0, 8).unwrap();
        let c = CoefficientSet::new(1, 1, 1)
            .with_diffusion(Arc::new(|_, y, o| o[0] = y[0]))
            .with_rough(Arc::new(|_, _, o| o[0] = 1.0), Arc::new(|_, _, o| o[0] = 0.0));
        let m = MartingaleSample::from_path(GridPath::from_fn(g.clone(), 1, |t| vec![if t >= 0.5 { 1.0 } else { 0.0 }]).unwrap());
        let same = RoughPath::ito_lift(&m.path);
        let early = RoughPath::ito_lift(&GridPath::from_fn(g.clone(), 1, |t| vec![if t >= 0.25 { 1.0 } else { 0.0 }]).unwrap());
        let ev = no_events(&g);
        assert_eq!(solve_rsde(&c, &[0.0], &same, &m, &ev, &g).unwrap().y.last()[0], 1.0);
        assert_eq!(solve_rsde(&c, &[0.0], &early, &m, &ev, &g).unwrap().y.last()[0], 2.0);
    }

    #[test]
    fn event_jump_and_compensator() {
        // dY = ∫ u dÑ with a single unit-mark atom of weight 2 and one event at 0.5.
        let g = TimeGrid64::uniform(1.0, 4).unwrap();
        let c = CoefficientSet::new(1, 1, 1).with_jump(Arc::new(|_, _, u, o| o[0] = u[0]));
        let mut ev = MarkedEventStream::empty(1.0, MarkMeasure::scalar(&[(1.0, 2.0)]).unwrap());
        ev.events.push(Event { time: 0.5, mark: vec![1.0] });
        let x = RoughPath::zero(g.clone(), 1);
        let sol = solve_rsde(&c, &[0.0], &x, &MartingaleSample::zero(&g, 1), &ev, &g).unwrap();
        let expect = [0.0, -0.5, 0.0, -0.5, -1.0];
        for k in 0..5 {
            assert!((sol.y.value(k)[0] - expect[k]).abs() < 1e-15);
        }
        let off = TimeGrid64::uniform(1.0, 3).unwrap();
        let err = solve_rsde(&c, &[0.0], &RoughPath::zero(off.clone(), 1), &MartingaleSample::zero(&off, 1), &ev, &off);
        assert!(matches!(err, Err(Error::GridContract { .. })));
    }

    #[test]
    fn divergence_guard_and_error() {
        let g = TimeGrid64::uniform(1.0, 64).unwrap();
        let blow = CoefficientSet::new(1, 1, 1).with_drift(Arc::new(|_, y, o| o[0] = 1e3 * y[0]));
        let x = RoughPath::zero(g.clone(), 1);
        let m = MartingaleSample::zero(&g, 1);
        let sol = solve_rsde(&blow, &[1.0], &x, &m, &no_events(&g), &g).unwrap();
        let ta = sol.aborted_at.expect("guard fires");
        assert!(ta < 1.0);
        assert_eq!(sol.y.last(), sol.y.eval(ta));
        let nan = CoefficientSet::new(1, 1, 1).with_drift(Arc::new(|t, _, o| o[0] = if t > 0.3 { f64::NAN } else { 0.0 }));
        assert!(matches!(
            solve_rsde(&nan, &[1.0], &x, &m, &no_events(&g), &g),
            Err(Error::Divergence { .. })
        ));
    }

    #[test]
    fn remainder_identity_and_diagnostics() {
        let g = TimeGrid64::uniform(1.0, 64).unwrap();
        let rp = RoughPath::ito_lift(&sample_brownian(&RngStream::new(4), &g, 1).path);
        let c = CoefficientSet::linear_scalar(-0.2, 0.0, 0.7, true);
        let nu = MarkMeasure::scalar(&[(0.3, 1.0)]).unwrap();
        let ev = sample_poisson_measure(&RngStream::new(5), &g, &nu);
        let grid = ev.insert_into(&g).unwrap();
        let rp = rp.refine_to(&grid).unwrap();
        let sol = solve_rsde(&c, &[1.0], &rp, &MartingaleSample::zero(&grid, 1), &ev, &grid).unwrap();
        let (i, j) = (3, 40);
        let r = sol.remainder(&rp, i, j);
        let rebuilt = sol.y_prime.value(i)[0] * rp.increment(i, j)[0] + r[0];
        assert!((rebuilt - sol.y.increment(i, j)[0]).abs() < 1e-14);
        assert_eq!(sol.remainder_diag.len(), 7);
        assert!(sol.remainder_diag.iter().all(|l| l.max_remainder.is_finite()));
    }
}
