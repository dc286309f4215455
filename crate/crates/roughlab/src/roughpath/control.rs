use super::grid::TimeGrid;
use super::path::GridPath;
use super::pvar::{pvar_all_windows, Closure, Increments, Level2, Table};
use super::rough::RoughPath;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Superadditive two-parameter function on grid indices.
pub trait Control<S: Scalar> {
    fn len(&self) -> usize;
    fn eval(&self, i: usize, j: usize) -> S;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Grid controls extend piecewise-constantly, which is regular from the inside.
    fn regular_from_inside(&self) -> bool {
        true
    }
}

/// Dense control table; `w(i, j)` for `i <= j` stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct GridControl<S> {
    n: usize,
    table: Vec<S>,
    regular: bool,
}

impl<S: Scalar> Control<S> for GridControl<S> {
    fn len(&self) -> usize {
        self.n
    }

    fn eval(&self, i: usize, j: usize) -> S {
        self.table[i * self.n + j]
    }

    fn regular_from_inside(&self) -> bool {
        self.regular
    }
}

impl<S: Scalar> GridControl<S> {
    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> S) -> Self {
        let mut table = vec![S::zero(); n * n];
        for i in 0..n {
            for j in i..n {
                table[i * n + j] = f(i, j);
            }
        }
        Self {
            n,
            table,
            regular: true,
        }
    }

    /// `w(s, t) = t - s`.
    pub fn linear(grid: &TimeGrid<S>) -> Self {
        Self::from_fn(grid.len(), |i, j| grid.time(j) - grid.time(i))
    }

    /// `w(i, j) = (Σ_{i <= k < j} a_k)^θ` with `a_k >= 0`, `θ >= 1`.
    pub fn power_of_sum(weights: &[S], theta: S) -> Self {
        let n = weights.len() + 1;
        let mut cum = vec![S::zero(); n];
        for k in 0..weights.len() {
            cum[k + 1] = cum[k] + weights[k];
        }
        Self::from_fn(n, |i, j| (cum[j] - cum[i]).powf(theta))
    }

    /// `‖X‖^p_{p,[t_i,t_j]}` (or the half-open version) for all windows.
    pub fn from_path(path: &GridPath<S>, p: S, closure: Closure) -> Self {
        let n = path.len();
        let table = Table::build(&Increments(path), n);
        Self::shift(n, pvar_all_windows(&table, p), closure)
    }

    /// `‖𝐗‖^p_{p,[t_i,t_j]}` (or the half-open version) for all windows.
    pub fn from_rough_path(rp: &RoughPath<S>, p: S, closure: Closure) -> Self {
        let n = rp.len();
        let x = pvar_all_windows(&Table::build(&Increments(rp.path()), n), p);
        let xx = pvar_all_windows(&Table::build(&Level2(rp), n), p / S::c(2.0));
        let both: Vec<S> = x.iter().zip(&xx).map(|(&a, &b)| a + b * b).collect();
        Self::shift(n, both, closure)
    }

    fn shift(n: usize, closed: Vec<S>, closure: Closure) -> Self {
        match closure {
            Closure::Closed => Self {
                n,
                table: closed,
                regular: true,
            },
            Closure::HalfOpen => Self::from_fn(n, |i, j| {
                if j > i {
                    closed[i * n + j - 1]
                } else {
                    S::zero()
                }
            }),
        }
    }

    pub fn scaled(&self, c: S) -> Self {
        Self {
            n: self.n,
            table: self.table.iter().map(|&x| c * x).collect(),
            regular: self.regular,
        }
    }

    pub fn sum(&self, other: &Self) -> Result<Self> {
        if self.n != other.n {
            return Err(Error::GridMismatch("controls of different size".into()));
        }
        Ok(Self {
            n: self.n,
            table: self.table.iter().zip(&other.table).map(|(&a, &b)| a + b).collect(),
            regular: self.regular && other.regular,
        })
    }

    /// First triple `(i, k, j)` violating `w(i,k) + w(k,j) <= w(i,j)` beyond `tol`, if any.
    pub fn superadditivity_witness(&self, tol: S) -> Option<(usize, usize, usize)> {
        let n = self.n;
        for i in 0..n {
            if self.eval(i, i) != S::zero() {
                return Some((i, i, i));
            }
            for j in i..n {
                for k in i..=j {
                    if self.eval(i, k) + self.eval(k, j) > self.eval(i, j) + tol {
                        return Some((i, k, j));
                    }
                }
            }
        }
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn path_controls_are_superadditive() {
        let g = TimeGrid::<f64>::uniform(1.0, 7).unwrap();
        let p = GridPath::from_scalars(g, vec![0.0, 0.4, -0.3, 0.9, 0.8, 1.7, -0.2, 0.1]).unwrap();
        let w = GridControl::from_path(&p, 2.5, Closure::Closed);
        assert_eq!(w.superadditivity_witness(1e-12), None);
        let h = GridControl::from_path(&p, 2.5, Closure::HalfOpen);
        assert_eq!(h.superadditivity_witness(1e-12), None);
        let rp = RoughPath::ito_lift(&p);
        let r = GridControl::from_rough_path(&rp, 2.2, Closure::Closed);
        assert_eq!(r.superadditivity_witness(1e-12), None);
    }

    #[test]
    fn power_of_sum_is_superadditive() {
        let w = GridControl::<f64>::power_of_sum(&[0.3, 0.0, 1.2, 0.5], 1.7);
        assert_eq!(w.superadditivity_witness(1e-12), None);
        assert_eq!(w.eval(1, 2), 0.0);
    }
}
