use serde::{Deserialize, Serialize};

use super::grid::TimeGrid;
use crate::error::{Error, Result};
use crate::scalar::{norm_diff, Scalar};

/// Piecewise-constant càdlàg path: `X_t = values[i]` for `t_i <= t < t_{i+1}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct GridPath<S> {
    grid: TimeGrid<S>,
    dim: usize,
    values: Vec<S>,
}

impl<S: Scalar> GridPath<S> {
    /// `values` is row-major, one row of length `dim` per grid time.
    pub fn new(grid: TimeGrid<S>, dim: usize, values: Vec<S>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter {
                name: "dim",
                reason: "must be >= 1".into(),
            });
        }
        if values.len() != grid.len() * dim {
            return Err(Error::GridMismatch(format!(
                "{} values for {} points of dimension {}",
                values.len(),
                grid.len(),
                dim
            )));
        }
        Ok(Self { grid, dim, values })
    }

    pub fn zeros(grid: TimeGrid<S>, dim: usize) -> Self {
        let n = grid.len() * dim;
        Self::new(grid, dim, vec![S::zero(); n]).expect("consistent sizes")
    }

    pub fn from_rows(grid: TimeGrid<S>, rows: &[Vec<S>]) -> Result<Self> {
        let dim = rows.first().map(|r| r.len()).unwrap_or(0);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::GridMismatch("ragged rows".into()));
        }
        Self::new(grid, dim, rows.concat())
    }

    pub fn from_scalars(grid: TimeGrid<S>, values: Vec<S>) -> Result<Self> {
        Self::new(grid, 1, values)
    }

    /// Sample `f` at every grid time.
    pub fn from_fn(grid: TimeGrid<S>, dim: usize, f: impl Fn(S) -> Vec<S>) -> Result<Self> {
        let rows: Vec<Vec<S>> = grid.times().iter().map(|&t| f(t)).collect();
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::GridMismatch("sampler returned wrong dimension".into()));
        }
        Self::new(grid, dim, rows.concat())
    }

    pub fn grid(&self) -> &TimeGrid<S> {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn values(&self) -> &[S] {
        &self.values
    }

    pub fn value(&self, i: usize) -> &[S] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn value_mut(&mut self, i: usize) -> &mut [S] {
        let d = self.dim;
        &mut self.values[i * d..(i + 1) * d]
    }

    pub fn last(&self) -> &[S] {
        self.value(self.len() - 1)
    }

    /// Value at the largest grid time `<= t`.
    pub fn eval(&self, t: S) -> &[S] {
        self.value(self.grid.index_at(t))
    }

    /// `X_{t_i -}`; at `t_0` the left limit is the initial value.
    pub fn left_limit(&self, i: usize) -> &[S] {
        self.value(i.saturating_sub(1))
    }

    pub fn increment(&self, i: usize, j: usize) -> Vec<S> {
        self.value(j)
            .iter()
            .zip(self.value(i))
            .map(|(&b, &a)| b - a)
            .collect()
    }

    pub fn increment_into(&self, i: usize, j: usize, out: &mut [S]) {
        for ((o, &b), &a) in out.iter_mut().zip(self.value(j)).zip(self.value(i)) {
            *o = b - a;
        }
    }

    /// Euclidean size of `X_j - X_i`.
    pub fn increment_norm(&self, i: usize, j: usize) -> S {
        norm_diff(self.value(j), self.value(i))
    }

    pub fn component(&self, c: usize) -> Vec<S> {
        (0..self.len()).map(|i| self.value(i)[c]).collect()
    }

    /// Jumps `(index, ΔX)` at every grid time where the value changes.
    pub fn jumps(&self) -> Vec<(usize, Vec<S>)> {
        (1..self.len())
            .filter_map(|i| {
                let inc = self.increment(i - 1, i);
                inc.iter().any(|x| *x != S::zero()).then_some((i, inc))
            })
            .collect()
    }

    pub fn map_values(&self, dim: usize, f: impl Fn(S, &[S]) -> Vec<S>) -> Result<Self> {
        let mut out = Vec::with_capacity(self.len() * dim);
        for i in 0..self.len() {
            let row = f(self.grid.time(i), self.value(i));
            if row.len() != dim {
                return Err(Error::GridMismatch("map returned wrong dimension".into()));
            }
            out.extend(row);
        }
        Self::new(self.grid.clone(), dim, out)
    }

    /// Pointwise `self + scale * other` on an identical grid.
    pub fn axpy(&self, scale: S, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| a + scale * b)
            .collect();
        Self::new(self.grid.clone(), self.dim, values)
    }

    /// Concatenate components of paths on one grid.
    pub fn stack(parts: &[&Self]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::GridMismatch("nothing to stack".into()))?;
        let dim: usize = parts.iter().map(|p| p.dim).sum();
        let mut values = Vec::with_capacity(first.len() * dim);
        for p in parts {
            if p.grid != first.grid {
                return Err(Error::GridMismatch("stacked paths on different grids".into()));
            }
        }
        for i in 0..first.len() {
            for p in parts {
                values.extend_from_slice(p.value(i));
            }
        }
        Self::new(first.grid.clone(), dim, values)
    }

    /// Subsample onto a coarser grid whose times are all points of this grid.
    pub fn restrict_to(&self, coarse: &TimeGrid<S>) -> Result<Self> {
        let idx = self.grid.embedding(coarse)?;
        let mut values = Vec::with_capacity(idx.len() * self.dim);
        for &i in &idx {
            values.extend_from_slice(self.value(i));
        }
        Self::new(coarse.clone(), self.dim, values)
    }

    /// Re-express on a finer grid containing this grid; values ride along.
    pub fn refine_to(&self, fine: &TimeGrid<S>) -> Result<Self> {
        if fine.horizon() != self.grid.horizon() || !fine.contains_grid(&self.grid) {
            return Err(Error::GridMismatch("target grid does not contain the path grid".into()));
        }
        let mut values = Vec::with_capacity(fine.len() * self.dim);
        for &t in fine.times() {
            values.extend_from_slice(self.eval(t));
        }
        Self::new(fine.clone(), self.dim, values)
    }

    pub fn sup_norm(&self) -> S {
        (0..self.len())
            .map(|i| self.value(i).iter().map(|&x| x * x).sum::<S>().sqrt())
            .fold(S::zero(), S::max)
    }

    pub(crate) fn check_same(&self, other: &Self) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch("paths live on different grids".into()));
        }
        if self.dim != other.dim {
            return Err(Error::GridMismatch(format!(
                "dimensions {} and {} differ",
                self.dim, other.dim
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g4() -> TimeGrid<f64> {
        TimeGrid::uniform(1.0, 3).unwrap()
    }

    #[test]
    fn evaluation_is_cadlag() {
        let p = GridPath::from_scalars(g4(), vec![0.0, 1.0, 3.0, 6.0]).unwrap();
        assert_eq!(p.eval(0.5), &[1.0]);
        assert_eq!(p.eval(1.0 / 3.0), &[1.0]);
        assert_eq!(p.left_limit(2), &[1.0]);
        assert_eq!(p.left_limit(0), &[0.0]);
        assert_eq!(p.jumps().len(), 3);
    }

    #[test]
    fn refine_then_restrict_roundtrips() {
        let p = GridPath::from_scalars(g4(), vec![0.0, 1.0, 3.0, 6.0]).unwrap();
        let fine = p.grid().with_times(&[0.1, 0.5, 0.9]).unwrap();
        let q = p.refine_to(&fine).unwrap();
        assert_eq!(q.component(0), vec![0.0, 0.0, 1.0, 1.0, 3.0, 3.0, 6.0]);
        assert_eq!(q.restrict_to(p.grid()).unwrap(), p);
    }
}
