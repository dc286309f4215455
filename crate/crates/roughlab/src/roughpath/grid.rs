use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Finite partition `0 = t_0 < t_1 < ... < t_n = T`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct TimeGrid<S> {
    times: Vec<S>,
}

impl<S: Scalar> TimeGrid<S> {
    pub fn new(times: Vec<S>) -> Result<Self> {
        if times.len() < 2 {
            return Err(Error::InvalidGrid("need at least two points".into()));
        }
        if times[0] != S::zero() {
            return Err(Error::InvalidGrid(format!("first time is {}, not 0", times[0])));
        }
        for w in times.windows(2) {
            if !(w[1] > w[0]) || !w[1].is_finite() {
                return Err(Error::InvalidGrid(format!(
                    "times not strictly increasing at {} -> {}",
                    w[0], w[1]
                )));
            }
        }
        Ok(Self { times })
    }

    pub fn uniform(horizon: S, cells: usize) -> Result<Self> {
        if cells == 0 || !(horizon > S::zero()) {
            return Err(Error::InvalidGrid("uniform grid needs cells >= 1 and T > 0".into()));
        }
        let n = S::from_usize(cells).unwrap();
        let mut times: Vec<S> = (0..=cells)
            .map(|k| horizon * S::from_usize(k).unwrap() / n)
            .collect();
        times[cells] = horizon;
        Self::new(times)
    }

    /// Uniform grid with `2^level` cells.
    pub fn dyadic(horizon: S, level: u32) -> Result<Self> {
        Self::uniform(horizon, 1usize << level)
    }

    pub fn times(&self) -> &[S] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn cells(&self) -> usize {
        self.times.len() - 1
    }

    pub fn horizon(&self) -> S {
        *self.times.last().unwrap()
    }

    pub fn time(&self, i: usize) -> S {
        self.times[i]
    }

    pub fn dt(&self, k: usize) -> S {
        self.times[k + 1] - self.times[k]
    }

    pub fn max_step(&self) -> S {
        (0..self.cells()).map(|k| self.dt(k)).fold(S::zero(), S::max)
    }

    /// Index of the largest grid time `<= t` (clamped to the grid).
    pub fn index_at(&self, t: S) -> usize {
        match self.times.binary_search_by(|x| x.partial_cmp(&t).unwrap()) {
            Ok(i) => i,
            Err(0) => 0,
            Err(i) => i - 1,
        }
    }

    /// Exact position of `t` among the grid times.
    pub fn position(&self, t: S) -> Option<usize> {
        self.times
            .binary_search_by(|x| x.partial_cmp(&t).unwrap())
            .ok()
    }

    /// Union with extra instants inside `(0, T]`; duplicates are dropped.
    pub fn with_times(&self, extra: &[S]) -> Result<Self> {
        let t_end = self.horizon();
        let mut merged: Vec<S> = self.times.clone();
        for &t in extra {
            if t < S::zero() || t > t_end {
                return Err(Error::InvalidGrid(format!("time {} outside [0, {}]", t, t_end)));
            }
            merged.push(t);
        }
        merged.sort_by(|a, b| a.partial_cmp(b).unwrap());
        merged.dedup();
        Self::new(merged)
    }

    pub fn union(&self, other: &Self) -> Result<Self> {
        if self.horizon() != other.horizon() {
            return Err(Error::GridMismatch(format!(
                "horizons {} and {} differ",
                self.horizon(),
                other.horizon()
            )));
        }
        self.with_times(&other.times)
    }

    /// True when every time of `other` is a grid time of `self`.
    pub fn contains_grid(&self, other: &Self) -> bool {
        other.times.iter().all(|&t| self.position(t).is_some())
    }

    /// Every `stride`-th point, always keeping the horizon.
    pub fn subsample(&self, stride: usize) -> Result<Self> {
        if stride == 0 {
            return Err(Error::InvalidGrid("stride must be positive".into()));
        }
        let mut times: Vec<S> = self.times.iter().step_by(stride).copied().collect();
        if *times.last().unwrap() != self.horizon() {
            times.push(self.horizon());
        }
        Self::new(times)
    }

    /// Positions of `coarse` times inside `self`.
    pub fn embedding(&self, coarse: &Self) -> Result<Vec<usize>> {
        coarse
            .times
            .iter()
            .map(|&t| {
                self.position(t).ok_or_else(|| {
                    Error::GridMismatch(format!("time {} is not a point of the fine grid", t))
                })
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_hits_horizon() {
        let g = TimeGrid::<f64>::uniform(1.0, 10).unwrap();
        assert_eq!(g.len(), 11);
        assert_eq!(g.horizon(), 1.0);
        assert_eq!(g.index_at(0.55), 5);
        assert_eq!(g.index_at(2.0), 10);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(TimeGrid::<f64>::new(vec![0.0]).is_err());
        assert!(TimeGrid::<f64>::new(vec![0.1, 1.0]).is_err());
        assert!(TimeGrid::<f64>::new(vec![0.0, 0.5, 0.5, 1.0]).is_err());
    }

    #[test]
    fn insertion_keeps_order() {
        let g = TimeGrid::<f64>::uniform(1.0, 4).unwrap();
        let h = g.with_times(&[0.3, 0.5, 0.9]).unwrap();
        assert_eq!(h.times(), &[0.0, 0.25, 0.3, 0.5, 0.75, 0.9, 1.0]);
        assert!(h.contains_grid(&g));
        assert_eq!(h.embedding(&g).unwrap(), vec![0, 1, 3, 4, 6]);
    }
}
