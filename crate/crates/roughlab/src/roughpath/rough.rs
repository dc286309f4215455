use serde::{Deserialize, Serialize};

use super::grid::TimeGrid;
use super::path::GridPath;
use crate::error::{Error, Result};
use crate::scalar::{norm, Scalar};

/// Level-1 path plus the level-2 increments `𝕊_k = 𝕏_{t_k, t_{k+1}}` of every cell.
///
/// Matrices are row-major `d x d` with `𝕏^{a,b} ≈ ∫ δX^a dX^b`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct RoughPath<S> {
    path: GridPath<S>,
    level2: Vec<S>,
}

/// Running `(δX_{i,j}, 𝕏_{i,j})` for a fixed left point as `j` advances one cell at a time.
pub struct ChenSweep<'a, S> {
    rp: &'a RoughPath<S>,
    pub j: usize,
    pub inc: Vec<S>,
    pub area: Vec<S>,
    cell: Vec<S>,
}

impl<'a, S: Scalar> ChenSweep<'a, S> {
    pub fn new(rp: &'a RoughPath<S>, i: usize) -> Self {
        let d = rp.dim();
        Self {
            rp,
            j: i,
            inc: vec![S::zero(); d],
            area: vec![S::zero(); d * d],
            cell: vec![S::zero(); d],
        }
    }

    /// Extend the window by one cell.
    pub fn step(&mut self) {
        let d = self.rp.dim();
        let k = self.j;
        self.rp.path.increment_into(k, k + 1, &mut self.cell);
        let s = self.rp.cell_level2(k);
        for a in 0..d {
            let ia = self.inc[a];
            for b in 0..d {
                self.area[a * d + b] += s[a * d + b] + ia * self.cell[b];
            }
        }
        for a in 0..d {
            self.inc[a] += self.cell[a];
        }
        self.j += 1;
    }
}

impl<S: Scalar> RoughPath<S> {
    pub fn new(path: GridPath<S>, level2: Vec<S>) -> Result<Self> {
        let d = path.dim();
        let expected = path.grid().cells() * d * d;
        if level2.len() != expected {
            return Err(Error::GridMismatch(format!(
                "level 2 has {} entries, expected {}",
                level2.len(),
                expected
            )));
        }
        Ok(Self { path, level2 })
    }

    /// Itô lift `𝕏_{s,t} = ∫ δX_{s,u-} ⊗ dX_u` of a grid path.
    ///
    /// The only jump inside `(t_k, t_{k+1}]` sits at `t_{k+1}` and `δX_{t_k, t_{k+1}-} = 0`,
    /// so every cell block vanishes; all area comes from the Chen cross terms.
    pub fn ito_lift(path: &GridPath<S>) -> Self {
        let d = path.dim();
        let level2 = vec![S::zero(); path.grid().cells() * d * d];
        Self {
            path: path.clone(),
            level2,
        }
    }

    /// Lift that treats each cell as a straight segment, `𝕊_k = δX_k ⊗ δX_k / 2`.
    ///
    /// Used for fine samples of smooth drivers, where the sampled path stands in for a
    /// continuous bounded-variation one.
    pub fn smooth_lift(path: &GridPath<S>) -> Self {
        let d = path.dim();
        let n = path.grid().cells();
        let half = S::c(0.5);
        let mut level2 = vec![S::zero(); n * d * d];
        for k in 0..n {
            let inc = path.increment(k, k + 1);
            let blk = &mut level2[k * d * d..(k + 1) * d * d];
            for a in 0..d {
                for b in 0..d {
                    blk[a * d + b] = half * inc[a] * inc[b];
                }
            }
        }
        Self {
            path: path.clone(),
            level2,
        }
    }

    pub fn zero(grid: TimeGrid<S>, dim: usize) -> Self {
        Self::ito_lift(&GridPath::zeros(grid, dim))
    }

    pub fn path(&self) -> &GridPath<S> {
        &self.path
    }

    pub fn grid(&self) -> &TimeGrid<S> {
        self.path.grid()
    }

    pub fn dim(&self) -> usize {
        self.path.dim()
    }

    pub fn len(&self) -> usize {
        self.path.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn level2(&self) -> &[S] {
        &self.level2
    }

    pub fn cell_level2(&self, k: usize) -> &[S] {
        let dd = self.dim() * self.dim();
        &self.level2[k * dd..(k + 1) * dd]
    }

    pub fn increment(&self, i: usize, j: usize) -> Vec<S> {
        self.path.increment(i, j)
    }

    pub fn sweep(&self, i: usize) -> ChenSweep<'_, S> {
        ChenSweep::new(self, i)
    }

    /// `𝕏_{t_i, t_j}` by left-to-right Chen composition, O(j - i).
    pub fn chen_reconstruct(&self, i: usize, j: usize) -> Result<Vec<S>> {
        if i > j || j >= self.len() {
            return Err(Error::InvalidWindow {
                start: i,
                end: j,
                len: self.len(),
            });
        }
        let mut sw = self.sweep(i);
        while sw.j < j {
            sw.step();
        }
        Ok(sw.area)
    }

    /// Re-sample on a coarser sub-grid, composing the level 2 of merged cells.
    pub fn restrict_to(&self, coarse: &TimeGrid<S>) -> Result<Self> {
        let idx = self.grid().embedding(coarse)?;
        let path = self.path.restrict_to(coarse)?;
        let dd = self.dim() * self.dim();
        let mut level2 = Vec::with_capacity((idx.len() - 1) * dd);
        for w in idx.windows(2) {
            level2.extend(self.chen_reconstruct(w[0], w[1])?);
        }
        Self::new(path, level2)
    }

    /// Re-express on a finer grid. The path is constant on `[t_k, t_{k+1})`, so each
    /// original cell's increment and level 2 move to the sub-cell ending at `t_{k+1}`.
    pub fn refine_to(&self, fine: &TimeGrid<S>) -> Result<Self> {
        let path = self.path.refine_to(fine)?;
        let dd = self.dim() * self.dim();
        let idx = fine.embedding(self.grid())?;
        let mut level2 = vec![S::zero(); fine.cells() * dd];
        for k in 0..self.grid().cells() {
            let sub = idx[k + 1] - 1;
            level2[sub * dd..(sub + 1) * dd].copy_from_slice(self.cell_level2(k));
        }
        Self::new(path, level2)
    }

    /// `𝐗^{(τ1, τ2-)}`: zero before τ1, `δX_{τ1,t}` on `[τ1, τ2)`, frozen afterwards.
    pub fn slice(&self, tau1: S, tau2: S) -> Result<Self> {
        let grid = self.grid();
        let lookup = |t: S| {
            grid.position(t)
                .ok_or_else(|| Error::GridMismatch(format!("slice time {} is not a grid time", t)))
        };
        let i1 = lookup(tau1)?;
        let i2 = lookup(tau2)?;
        if i1 > i2 {
            return Err(Error::InvalidWindow {
                start: i1,
                end: i2,
                len: self.len(),
            });
        }
        let d = self.dim();
        let dd = d * d;
        let base = self.path.value(i1).to_vec();
        // Last index whose value belongs to [τ1, τ2).
        let stop = if i2 > i1 { i2 - 1 } else { i1 };
        let mut values = Vec::with_capacity(self.len() * d);
        for i in 0..self.len() {
            if i < i1 || i2 == i1 {
                values.extend(std::iter::repeat(S::zero()).take(d));
            } else {
                let src = self.path.value(i.min(stop));
                values.extend(src.iter().zip(&base).map(|(&x, &b)| x - b));
            }
        }
        let mut level2 = vec![S::zero(); grid.cells() * dd];
        if i2 > i1 {
            for k in i1..stop {
                level2[k * dd..(k + 1) * dd].copy_from_slice(self.cell_level2(k));
            }
        }
        Self::new(GridPath::new(grid.clone(), d, values)?, level2)
    }

    /// `(t, |ΔX_t|, |Δ𝕏_t|)` for every grid time where either level moves.
    pub fn jump_profile(&self) -> Vec<(S, S, S)> {
        (0..self.grid().cells())
            .filter_map(|k| {
                let dx = self.path.increment_norm(k, k + 1);
                let dxx = norm(self.cell_level2(k));
                (dx > S::zero() || dxx > S::zero())
                    .then(|| (self.grid().time(k + 1), dx, dxx))
            })
            .collect()
    }

    /// `sup_t |ΔX_t| + |Δ𝕏_t|`.
    pub fn max_jump(&self) -> S {
        self.jump_profile()
            .into_iter()
            .map(|(_, a, b)| a + b)
            .fold(S::zero(), S::max)
    }

    /// Same level 2 on a different grid with the same number of points.
    pub(crate) fn with_grid(&self, grid: TimeGrid<S>) -> Result<Self> {
        let path = GridPath::new(grid, self.dim(), self.path.values().to_vec())?;
        Self::new(path, self.level2.clone())
    }

    pub(crate) fn check_same(&self, other: &Self) -> Result<()> {
        self.path.check_same(&other.path)
    }
}
