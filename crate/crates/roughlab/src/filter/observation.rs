use rand::Rng;
use serde::{Deserialize, Serialize};

use super::model::FilterModel;
use crate::error::Result;
use crate::noise::{
    compensated_integral, sample_brownian, sample_poisson_measure, MarkMeasure, MarkedEventStream, MartingaleSample,
    RngStream,
};
use crate::roughpath::{GridPath, RoughPath};
use crate::rsde::solve_doubly_sde;
use crate::{GridPath64, RoughPath64, TimeGrid64};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ObservationMeasure {
    /// Under the reference measure: `W̃` Brownian, `N2` Poisson with compensator `ν2 dt`.
    Reference,
    /// Under the model measure, with a simulated hidden signal.
    Signal,
}

/// One observation record: `G`, its Itô lift, the raw `N2` events and `Y`.
#[derive(Clone, Debug)]
pub struct ObservationRealization {
    pub grid: TimeGrid64,
    /// Blocks `(W̃, ∫g2 dÑ, ∫g3 dÑ, ∫γ dÑ)`.
    pub g: GridPath64,
    pub lift: RoughPath64,
    /// Accepted `N2` events; `measure` is `ν2`, so `Ñ = N2 - ν2 dt`.
    pub events: MarkedEventStream,
    pub y: GridPath64,
    /// Hidden signal, present for [`ObservationMeasure::Signal`].
    pub signal: Option<GridPath64>,
    pub measure: ObservationMeasure,
}

impl ObservationRealization {
    pub fn horizon(&self) -> f64 {
        self.grid.horizon()
    }
}

/// The three jump blocks of `G` for a fixed event record on `grid`.
fn jump_blocks(model: &FilterModel, events: &MarkedEventStream, grid: &TimeGrid64) -> Result<GridPath64> {
    let (k2, k3) = (model.k2, model.k3);
    let out_dim = k2 + k3 + 1;
    let integrand = |t: f64, _: &[f64], u: &[f64]| {
        let mut v = vec![0.0; out_dim];
        (model.g2)(t, u, &mut v[..k2]);
        (model.g3)(t, u, &mut v[k2..k2 + k3]);
        v[out_dim - 1] = (model.gamma)(t, u);
        v
    };
    let dummy = GridPath64::zeros(grid.clone(), 1);
    compensated_integral(events, &integrand, out_dim, &dummy, grid)
}

/// `Y` from `dY = (σ2, 0, h3, 0) dG` by the classical scheme on the grid of `g`.
pub fn y_from_driver(model: &FilterModel, g: &GridPath64) -> Result<GridPath64> {
    let grid = g.grid();
    let coeffs = model.observation_coefficients();
    let m = MartingaleSample::zero(grid, 1);
    let none = MarkedEventStream::empty(grid.horizon(), MarkMeasure::empty());
    solve_doubly_sde(&coeffs, &model.y0, g, &m, &none, grid)
}

/// Wraps an arbitrary `G` (for instance a perturbed one) as an observation record.
pub fn observation_from_driver(
    model: &FilterModel,
    g: GridPath64,
    events: MarkedEventStream,
    measure: ObservationMeasure,
) -> Result<ObservationRealization> {
    let y = y_from_driver(model, &g)?;
    Ok(ObservationRealization {
        grid: g.grid().clone(),
        lift: RoughPath::ito_lift(&g),
        g,
        events,
        y,
        signal: None,
        measure,
    })
}

/// Samples `W̃` and `N2` under the reference measure on `base` plus the event times.
pub fn simulate_observation(
    model: &FilterModel,
    stream: &RngStream,
    base: &TimeGrid64,
) -> Result<ObservationRealization> {
    model.validate()?;
    let events = sample_poisson_measure(&stream.child("n2"), base, &model.nu2);
    let grid = events.insert_into(base)?;
    let w = sample_brownian(&stream.child("w"), &grid, model.dy).path;
    let jumps = jump_blocks(model, &events, &grid)?;
    let g = GridPath::stack(&[&w, &jumps])?;
    observation_from_driver(model, g, events, ObservationMeasure::Reference)
}

/// Simulates signal and observation under the model measure by an Euler scheme.
///
/// `N2` is obtained by thinning candidates from `λ_max ν2` with `λ(t, X_{t-}, u)`;
/// `G` is then read off with the reference compensator, `W̃ = W + ∫ h ds`.
pub fn simulate_signal_and_observation(
    model: &FilterModel,
    stream: &RngStream,
    base: &TimeGrid64,
) -> Result<ObservationRealization> {
    model.validate()?;
    let (dx, dy, db, k2, k3) = (model.dx, model.dy, model.db, model.k2, model.k3);
    let (_, lmax) = model.lambda_bounds();
    let candidates = sample_poisson_measure(&stream.child("n2"), base, &model.nu2.scaled(lmax));
    let n1 = sample_poisson_measure(&stream.child("n1"), base, &model.nu1);
    let mut extra = candidates.times();
    extra.extend(n1.times());
    let grid = base.with_times(&extra)?;
    let w = sample_brownian(&stream.child("w"), &grid, dy).path;
    let b = sample_brownian(&stream.child("b"), &grid, db.max(1)).path;
    let mut thin = stream.child("thin").rng();

    let n = grid.len();
    let gd = model.driver_dim();
    let mut xs = vec![0.0; n * dx];
    let mut ys = vec![0.0; n * dy];
    let mut gs = vec![0.0; n * gd];
    xs[..dx].copy_from_slice(&model.x0.sample(&stream.child("x0")));
    ys[..dy].copy_from_slice(&model.y0);

    let mut accepted = Vec::new();
    let mut rejected = Vec::new();
    let (mut c2, mut c1) = (0usize, 0usize);
    let mut buf_x = vec![0.0; dx];
    let mut buf_y = vec![0.0; dy];
    let mut s0 = vec![0.0; dx * db];
    let mut s1 = vec![0.0; dx * dy];
    let mut s2 = vec![0.0; dy * dy];
    let mut h = vec![0.0; dy];
    let mut h2 = vec![0.0; dx * k2];
    let mut h3 = vec![0.0; dy * k3];
    let mut g2 = vec![0.0; k2];
    let mut g3 = vec![0.0; k3];
    let mut f1 = vec![0.0; dx];
    let mut dw = vec![0.0; dy];
    let mut dbm = vec![0.0; db.max(1)];

    for k in 0..grid.cells() {
        let (t, t1) = (grid.time(k), grid.time(k + 1));
        let dt = t1 - t;
        let x = xs[k * dx..(k + 1) * dx].to_vec();
        let y = ys[k * dy..(k + 1) * dy].to_vec();
        let mut xn = x.clone();
        let mut yn = y.clone();
        let mut gn = gs[k * gd..(k + 1) * gd].to_vec();
        w.increment_into(k, k + 1, &mut dw);
        b.increment_into(k, k + 1, &mut dbm);

        (model.b1)(t, &x, &y, &mut buf_x);
        (model.sigma0)(t, &x, &y, &mut s0);
        (model.sigma1)(t, &x, &y, &mut s1);
        (model.b2)(t, &x, &y, &mut buf_y);
        (model.sigma2)(t, &y, &mut s2);
        model.h(t, &x, &y, &mut h);
        (model.h2)(t, &x, &y, &mut h2);
        (model.h3)(t, &y, &mut h3);
        for i in 0..dx {
            let mut v = buf_x[i] * dt;
            for c in 0..db {
                v += s0[i * db + c] * dbm[c];
            }
            for c in 0..dy {
                v += s1[i * dy + c] * dw[c];
            }
            xn[i] += v;
        }
        for i in 0..dy {
            let mut v = buf_y[i] * dt;
            for c in 0..dy {
                v += s2[i * dy + c] * dw[c];
            }
            yn[i] += v;
            gn[i] += dw[i] + h[i] * dt;
        }
        // Compensators: N2 under the model measure for X and Y, under the reference
        // measure for the jump blocks of G; N1 for X.
        for a in &model.nu2.atoms {
            let lam = model.lambda(t, &x, &a.mark);
            (model.g2)(t, &a.mark, &mut g2);
            (model.g3)(t, &a.mark, &mut g3);
            for i in 0..dx {
                let mut v = 0.0;
                for j in 0..k2 {
                    v += h2[i * k2 + j] * g2[j];
                }
                xn[i] -= a.weight * lam * v * dt;
            }
            for i in 0..dy {
                let mut v = 0.0;
                for j in 0..k3 {
                    v += h3[i * k3 + j] * g3[j];
                }
                yn[i] -= a.weight * lam * v * dt;
            }
            for j in 0..k2 {
                gn[dy + j] -= a.weight * g2[j] * dt;
            }
            for j in 0..k3 {
                gn[dy + k2 + j] -= a.weight * g3[j] * dt;
            }
            gn[gd - 1] -= a.weight * (model.gamma)(t, &a.mark) * dt;
        }
        if let Some(f) = &model.f1 {
            for a in &model.nu1.atoms {
                f(t, &x, &y, &a.mark, &mut f1);
                for i in 0..dx {
                    xn[i] -= a.weight * f1[i] * dt;
                }
            }
            for e in n1.events.iter().skip(c1).take_while(|e| e.time <= t1) {
                f(e.time, &x, &y, &e.mark, &mut f1);
                for i in 0..dx {
                    xn[i] += f1[i];
                }
                c1 += 1;
            }
        }
        while c2 < candidates.events.len() && candidates.events[c2].time <= t1 {
            let e = &candidates.events[c2];
            c2 += 1;
            let u: f64 = thin.gen();
            if u * lmax >= model.lambda(e.time, &x, &e.mark) {
                rejected.push(e.clone());
                continue;
            }
            (model.g2)(e.time, &e.mark, &mut g2);
            (model.g3)(e.time, &e.mark, &mut g3);
            (model.h2)(e.time, &x, &y, &mut h2);
            (model.h3)(e.time, &y, &mut h3);
            for i in 0..dx {
                for j in 0..k2 {
                    xn[i] += h2[i * k2 + j] * g2[j];
                }
            }
            for i in 0..dy {
                for j in 0..k3 {
                    yn[i] += h3[i * k3 + j] * g3[j];
                }
            }
            for j in 0..k2 {
                gn[dy + j] += g2[j];
            }
            for j in 0..k3 {
                gn[dy + k2 + j] += g3[j];
            }
            gn[gd - 1] += (model.gamma)(e.time, &e.mark);
            accepted.push(e.clone());
        }
        xs[(k + 1) * dx..(k + 2) * dx].copy_from_slice(&xn);
        ys[(k + 1) * dy..(k + 2) * dy].copy_from_slice(&yn);
        gs[(k + 1) * gd..(k + 2) * gd].copy_from_slice(&gn);
    }

    let g = GridPath64::new(grid.clone(), gd, gs)?;
    let events = MarkedEventStream {
        horizon: grid.horizon(),
        events: accepted,
        measure: model.nu2.clone(),
        intensity: None,
        rejected,
    };
    Ok(ObservationRealization {
        lift: RoughPath::ito_lift(&g),
        g,
        events,
        y: GridPath64::new(grid.clone(), dy, ys)?,
        signal: Some(GridPath64::new(grid.clone(), dx, xs)?),
        grid,
        measure: ObservationMeasure::Signal,
    })
}
