use rand::Rng;
use rand_distr::StandardNormal;

use super::rng::RngStream;
use crate::error::Result;
use crate::{GridPath64, TimeGrid64};

/// Martingale path with its realized bracket `[M]^{ab} = Σ δM^a δM^b`.
#[derive(Clone, Debug, PartialEq)]
pub struct MartingaleSample {
    pub path: GridPath64,
    /// Row-major `dim x dim` per grid time.
    pub bracket: GridPath64,
}

impl MartingaleSample {
    pub fn from_path(path: GridPath64) -> Self {
        let d = path.dim();
        let n = path.len();
        let mut values = vec![0.0; n * d * d];
        for k in 1..n {
            let inc = path.increment(k - 1, k);
            for a in 0..d {
                for b in 0..d {
                    values[k * d * d + a * d + b] = values[(k - 1) * d * d + a * d + b] + inc[a] * inc[b];
                }
            }
        }
        let bracket = GridPath64::new(path.grid().clone(), d * d, values).expect("sizes match");
        Self { path, bracket }
    }

    pub fn zero(grid: &TimeGrid64, dim: usize) -> Self {
        Self::from_path(GridPath64::zeros(grid.clone(), dim))
    }

    pub fn dim(&self) -> usize {
        self.path.dim()
    }

    pub fn grid(&self) -> &TimeGrid64 {
        self.path.grid()
    }

    /// Subsample at coarse grid points (a martingale stays a martingale).
    pub fn restrict_to(&self, coarse: &TimeGrid64) -> Result<Self> {
        Ok(Self::from_path(self.path.restrict_to(coarse)?))
    }

    /// Insert points by Brownian-bridge sampling between existing values, left to right.
    pub fn refine_brownian(&self, fine: &TimeGrid64, stream: &RngStream) -> Result<Self> {
        let d = self.dim();
        let old = self.path.grid();
        let idx = fine.embedding(old)?;
        let mut values = vec![0.0; fine.len() * d];
        let mut rng = stream.rng();
        for (k, w) in idx.windows(2).enumerate() {
            let (a, b) = (w[0], w[1]);
            let tb = fine.time(b);
            values[a * d..(a + 1) * d].copy_from_slice(self.path.value(k));
            values[b * d..(b + 1) * d].copy_from_slice(self.path.value(k + 1));
            for i in (a + 1)..b {
                let (tl, t) = (fine.time(i - 1), fine.time(i));
                let frac = (t - tl) / (tb - tl);
                let sd = ((t - tl) * (tb - t) / (tb - tl)).sqrt();
                for c in 0..d {
                    let left = values[(i - 1) * d + c];
                    let right = values[b * d + c];
                    let z: f64 = rng.sample(StandardNormal);
                    values[i * d + c] = left + frac * (right - left) + sd * z;
                }
            }
        }
        Ok(Self::from_path(GridPath64::new(fine.clone(), d, values)?))
    }
}

/// Independent `N(0, Δt)` increments per cell and component, cumulated from 0.
pub fn sample_brownian(stream: &RngStream, grid: &TimeGrid64, dim: usize) -> MartingaleSample {
    let mut rng = stream.rng();
    let n = grid.len();
    let mut values = vec![0.0; n * dim];
    for k in 0..grid.cells() {
        let sd = grid.dt(k).sqrt();
        for c in 0..dim {
            let z: f64 = rng.sample(StandardNormal);
            values[(k + 1) * dim + c] = values[k * dim + c] + sd * z;
        }
    }
    MartingaleSample::from_path(GridPath64::new(grid.clone(), dim, values).expect("sizes match"))
}

/// Scalar Brownian skeleton together with its exact continuous-time maximum.
///
/// Given the endpoints of a cell, the bridge maximum has the closed-form quantile
/// `(a + b + sqrt((b - a)^2 - 2 Δt ln U)) / 2`; the skeleton is identical to
/// [`sample_brownian`] on the same stream.
pub fn sample_brownian_with_max(stream: &RngStream, grid: &TimeGrid64) -> (MartingaleSample, f64) {
    let m = sample_brownian(stream, grid, 1);
    let mut rng = stream.child("bridge-max").rng();
    let mut best = 0.0f64;
    for k in 0..grid.cells() {
        let a = m.path.value(k)[0];
        let b = m.path.value(k + 1)[0];
        let u: f64 = 1.0 - rng.gen::<f64>();
        let top = 0.5 * (a + b + ((b - a) * (b - a) - 2.0 * grid.dt(k) * u.ln()).sqrt());
        best = best.max(top);
    }
    (m, best)
}
