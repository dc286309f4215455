//! Greedy control counts and empirical exponential moments.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::noise::{sample_brownian, sample_brownian_with_max, RngStream};
use crate::parallel::run_indexed;
use crate::roughpath::{rough_norm, Closure, Control, GridControl, RoughPath, TimeGrid, Window};
use crate::rsde::rough_stochastic_integral;
use crate::scalar::Scalar;
use crate::stats::{bootstrap_se, mean, normal_cdf};
use crate::{GridPath64, RoughPath64};

/// Greedy times `t_0 = s < t_1 < ... < t_N < t` at which the control accumulates `α`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct AlphaPartition<S> {
    pub alpha: S,
    /// `t_0, ..., t_N` (all strictly before the window end).
    pub times: Vec<S>,
    pub indices: Vec<usize>,
    pub count: usize,
}

fn scan<S: Scalar>(w: &impl Control<S>, alpha: S, start: usize, end: usize) -> Vec<usize> {
    let mut idx = vec![start];
    let mut cur = start;
    loop {
        let next = (cur + 1..=end).find(|&u| w.eval(cur, u) >= alpha);
        match next {
            Some(u) if u < end => {
                idx.push(u);
                cur = u;
            }
            _ => break,
        }
    }
    idx
}

/// `N_{α,[s,t]}(w)` by a left-to-right scan over grid times.
pub fn n_alpha<S: Scalar>(w: &impl Control<S>, grid: &TimeGrid<S>, alpha: S, window: Window) -> Result<AlphaPartition<S>> {
    if !(alpha > S::zero()) {
        return Err(invalid("alpha", "must be positive"));
    }
    if w.len() != grid.len() {
        return Err(Error::GridMismatch("control and grid sizes differ".into()));
    }
    window.check(grid.len())?;
    if !w.regular_from_inside() {
        return Err(invalid("w", "control must be regular from the inside"));
    }
    let indices = scan(w, alpha, window.start, window.end);
    Ok(AlphaPartition {
        alpha,
        times: indices.iter().map(|&i| grid.time(i)).collect(),
        count: indices.len() - 1,
        indices,
    })
}

fn count<S: Scalar>(w: &impl Control<S>, alpha: S, s: usize, t: usize) -> usize {
    scan(w, alpha, s, t).len() - 1
}

/// A window `[s, t]` where an inequality failed, with both sides.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub start: usize,
    pub end: usize,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemmaCheck {
    pub hypothesis_met: bool,
    pub windows: usize,
    pub violation: Option<Witness>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemmaSuiteReport {
    /// `N_{Cα}(w1) <= N_α(w2)` when `w1 <= C w2` wherever `w2 <= α`.
    pub comparison: LemmaCheck,
    /// `N_α(w) <= C_ab (N_β(w) + 1)` for `w = w1`, with `C_ab = 4β/α + 2⌈2β/α⌉ + 4`.
    pub counting: LemmaCheck,
    pub counting_constant: f64,
    /// Smallest constant that works on this instance: max `N_α / (N_β + 1)`.
    pub counting_fitted: f64,
    /// `N_α(w1 + w2) <= N_{α/2}(w1) + N_{α/2}(w2)`.
    pub sum: LemmaCheck,
}

impl LemmaSuiteReport {
    pub fn violations(&self) -> usize {
        [&self.comparison, &self.counting, &self.sum]
            .iter()
            .filter(|c| c.violation.is_some())
            .count()
    }
}

fn all_windows(n: usize, mut check: impl FnMut(usize, usize) -> Option<Witness>) -> LemmaCheck {
    let mut windows = 0;
    for s in 0..n {
        for t in s + 1..n {
            windows += 1;
            if let Some(w) = check(s, t) {
                return LemmaCheck {
                    hypothesis_met: true,
                    windows,
                    violation: Some(w),
                };
            }
        }
    }
    LemmaCheck {
        hypothesis_met: true,
        windows,
        violation: None,
    }
}

/// Checks the three counting inequalities on every window of the grid.
///
/// `c` is the comparison constant for the first inequality; its hypothesis is verified
/// on the grid and, when it fails, that check is skipped and marked. `beta >= alpha` is
/// the coarse level of the second.
pub fn n_alpha_lemma_suite<S: Scalar>(
    w1: &GridControl<S>,
    w2: &GridControl<S>,
    alpha: S,
    beta: S,
    c: S,
) -> Result<LemmaSuiteReport> {
    if !(alpha > S::zero()) || !(beta >= alpha) || !(c > S::zero()) {
        return Err(invalid("alpha", "need 0 < alpha <= beta and C > 0"));
    }
    let n = w1.len();
    if w2.len() != n {
        return Err(Error::GridMismatch("controls of different size".into()));
    }

    let hypothesis = (0..n).all(|u| (u..n).all(|v| w2.eval(u, v) > alpha || w1.eval(u, v) <= c * w2.eval(u, v)));
    let comparison = if hypothesis {
        all_windows(n, |s, t| {
            let (l, r) = (count(w1, c * alpha, s, t), count(w2, alpha, s, t));
            (l > r).then(|| Witness {
                start: s,
                end: t,
                lhs: l as f64,
                rhs: r as f64,
            })
        })
    } else {
        LemmaCheck {
            hypothesis_met: false,
            windows: 0,
            violation: None,
        }
    };

    let (a, b) = (alpha.as_f64(), beta.as_f64());
    let counting_constant = 4.0 * b / a + 2.0 * (2.0 * b / a).ceil() + 4.0;
    let mut counting_fitted: f64 = 0.0;
    let counting = all_windows(n, |s, t| {
        let (na, nb) = (count(w1, alpha, s, t) as f64, count(w1, beta, s, t) as f64);
        counting_fitted = counting_fitted.max(na / (nb + 1.0));
        let rhs = counting_constant * (nb + 1.0);
        (na > rhs).then(|| Witness {
            start: s,
            end: t,
            lhs: na,
            rhs,
        })
    });

    let both = w1.sum(w2)?;
    let half = alpha / S::c(2.0);
    let sum = all_windows(n, |s, t| {
        let l = count(&both, alpha, s, t);
        let r = count(w1, half, s, t) + count(w2, half, s, t);
        (l > r).then(|| Witness {
            start: s,
            end: t,
            lhs: l as f64,
            rhs: r as f64,
        })
    });

    Ok(LemmaSuiteReport {
        comparison,
        counting,
        counting_constant,
        counting_fitted,
        sum,
    })
}

/// Both sides of `‖𝐗‖_p <= C (N + 1)^3 (1 + sup |Δ𝐗|)^2`, with `N` counted for the control
/// `‖𝐗‖^p_{p,[·,·)}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormBoundReport {
    pub p: f64,
    pub alpha: f64,
    pub norm: f64,
    pub n_alpha: usize,
    pub jump_sup: f64,
    /// `norm / ((N + 1)^3 (1 + jump)^2)`: the smallest `C` for this path.
    pub fitted_constant: f64,
}

pub fn rough_norm_via_nalpha_bound(rp: &RoughPath64, p: f64, alpha: f64) -> Result<NormBoundReport> {
    let w = GridControl::from_rough_path(rp, p, Closure::HalfOpen);
    let part = n_alpha(&w, rp.grid(), alpha, Window::full(rp.len()))?;
    let norm = rough_norm(rp, p, Window::full(rp.len()), Closure::Closed)?;
    let jump_sup = rp.max_jump();
    let denom = (part.count as f64 + 1.0).powi(3) * (1.0 + jump_sup).powi(2);
    Ok(NormBoundReport {
        p,
        alpha,
        norm,
        n_alpha: part.count,
        jump_sup,
        fitted_constant: norm / denom,
    })
}

/// Reference quantities for the exponential bound `exp(C (N_α + 1)(1 + J))`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JnReference {
    pub alpha: f64,
    pub n_alpha: f64,
    pub jump_sup: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub lambda: f64,
    pub alpha: Option<f64>,
    /// Sample mean of `exp(λ S)`.
    pub moment: f64,
    pub bootstrap_se: f64,
    /// `moment ± 1.96 se`.
    pub ci: (f64, f64),
    /// `ln(moment) / ((N_α + 1)(1 + J))` when a reference is given.
    pub fitted_constant: Option<f64>,
    pub jump_sup: Option<f64>,
    pub ensemble_size: usize,
    pub grid_cells: Option<usize>,
    /// Set when the moment exceeded `1e300`.
    pub saturated: bool,
}

/// `E exp(λ S)` from samples `S` with a bootstrap standard error.
pub fn exp_moment_of_samples(
    samples: &[f64],
    lambda: f64,
    reference: Option<&JnReference>,
    stream: &RngStream,
) -> Result<MomentReport> {
    if samples.is_empty() {
        return Err(invalid("samples", "empty ensemble"));
    }
    let values: Vec<f64> = samples.iter().map(|s| (lambda * s).exp()).collect();
    let moment = mean(&values);
    let saturated = !(moment <= 1e300);
    let se = if saturated { f64::NAN } else { bootstrap_se(&values, 200, stream) };
    let fitted_constant = reference.map(|r| moment.ln() / ((r.n_alpha + 1.0) * (1.0 + r.jump_sup)));
    Ok(MomentReport {
        lambda,
        alpha: reference.map(|r| r.alpha),
        moment,
        bootstrap_se: se,
        ci: (moment - 1.96 * se, moment + 1.96 * se),
        fitted_constant,
        jump_sup: reference.map(|r| r.jump_sup),
        ensemble_size: samples.len(),
        grid_cells: None,
        saturated,
    })
}

/// `E exp(λ sup_t |δV_{0,t}|)` over scalar grid paths.
pub fn empirical_exp_moment(
    paths: &[&GridPath64],
    lambda: f64,
    reference: Option<&JnReference>,
    stream: &RngStream,
) -> Result<MomentReport> {
    if paths.iter().any(|p| p.dim() != 1) {
        return Err(invalid("paths", "scalar paths expected"));
    }
    let sups: Vec<f64> = paths
        .iter()
        .map(|p| {
            let v0 = p.value(0)[0];
            (0..p.len()).map(|i| (p.value(i)[0] - v0).abs()).fold(0.0, f64::max)
        })
        .collect();
    let mut report = exp_moment_of_samples(&sups, lambda, reference, stream)?;
    report.grid_cells = paths.first().map(|p| p.grid().cells());
    Ok(report)
}

/// `E exp(λ max_{[0,T]} W)` from exact bridge maxima, with the closed form
/// `2 e^{λ²T/2} Φ(λ√T)` alongside.
pub fn brownian_max_exp_moment(
    lambda: f64,
    horizon: f64,
    cells: usize,
    n_paths: usize,
    seed: u64,
    threads: Option<usize>,
) -> Result<(MomentReport, f64)> {
    let grid = crate::TimeGrid64::uniform(horizon, cells)?;
    let root = RngStream::new(seed).child("brownian-max");
    let maxima = run_indexed(n_paths, threads, |w| sample_brownian_with_max(&root.indexed("path", w as u64), &grid).1)?;
    let mut report = exp_moment_of_samples(&maxima, lambda, None, &root.child("bootstrap"))?;
    report.grid_cells = Some(cells);
    let exact = 2.0 * (0.5 * lambda * lambda * horizon).exp() * normal_cdf(lambda * horizon.sqrt());
    Ok((report, exact))
}

/// Paths used for the mean count; the control table is cubic in the grid size.
const REFERENCE_PATHS: usize = 256;

/// `E exp(λ sup_t |∫_0^t cos(W) d𝐖|)` at several resolutions of the same Brownian paths.
///
/// `cells` must divide the largest entry, which sets the sampling grid; each coarser
/// lift is the restriction of the fine Itô lift. The reference count is the ensemble
/// mean of `N_α(‖𝐖‖^p_{p,[·,·)})` at the coarsest resolution over the first paths.
pub fn rough_integral_exp_moment(
    lambda: f64,
    horizon: f64,
    cells: &[usize],
    p: f64,
    alpha: f64,
    n_paths: usize,
    seed: u64,
    threads: Option<usize>,
) -> Result<Vec<MomentReport>> {
    let finest = *cells.iter().max().ok_or_else(|| invalid("cells", "empty"))?;
    let coarsest = *cells.iter().min().unwrap();
    if cells.iter().any(|&c| c == 0 || finest % c != 0) {
        return Err(invalid("cells", "each resolution must divide the finest"));
    }
    let fine = crate::TimeGrid64::uniform(horizon, finest)?;
    let root = RngStream::new(seed).child("rough-integral-moment");
    let rows = run_indexed(n_paths, threads, |w| -> Result<(Vec<f64>, usize)> {
        let path = sample_brownian(&root.indexed("path", w as u64), &fine, 1).path;
        let lift = RoughPath::ito_lift(&path);
        let mut sups = Vec::with_capacity(cells.len());
        let mut n_coarse = 0;
        for &c in cells {
            let grid = fine.subsample(finest / c)?;
            let rp = lift.restrict_to(&grid)?;
            let y = rp.path().map_values(1, |_, x| vec![x[0].cos()])?;
            let yp = rp.path().map_values(1, |_, x| vec![-x[0].sin()])?;
            let v = rough_stochastic_integral(&y, &yp, &rp, Window::full(rp.len()))?;
            sups.push((0..v.len()).map(|i| v.value(i)[0].abs()).fold(0.0, f64::max));
            if c == coarsest && w < REFERENCE_PATHS {
                let wc = GridControl::from_rough_path(&rp, p, Closure::HalfOpen);
                n_coarse = n_alpha(&wc, rp.grid(), alpha, Window::full(rp.len()))?.count;
            }
        }
        Ok((sups, n_coarse))
    })?;
    let rows: Vec<(Vec<f64>, usize)> = rows.into_iter().collect::<Result<_>>()?;
    let counted = rows.len().min(REFERENCE_PATHS);
    let reference = JnReference {
        alpha,
        n_alpha: mean(&rows[..counted].iter().map(|r| r.1 as f64).collect::<Vec<_>>()),
        jump_sup: 0.0,
    };
    cells
        .iter()
        .enumerate()
        .map(|(k, &c)| {
            let samples: Vec<f64> = rows.iter().map(|r| r.0[k]).collect();
            let mut rep = exp_moment_of_samples(&samples, lambda, Some(&reference), &root.indexed("bootstrap", k as u64))?;
            rep.grid_cells = Some(c);
            Ok(rep)
        })
        .collect()
}
