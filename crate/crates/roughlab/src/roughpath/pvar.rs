use serde::{Deserialize, Serialize};

use super::path::GridPath;
use super::rough::RoughPath;
use crate::error::{invalid, Error, Result};
use crate::scalar::{norm, norm_diff, Scalar};

/// Whether the terminal point of a window is included.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Closure {
    Closed,
    /// `[s, t)`: the limit from the left, which drops the jump at `t`.
    HalfOpen,
}

/// Inclusive range of grid indices.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub start: usize,
    pub end: usize,
}

impl Window {
    pub fn new(start: usize, end: usize) -> Self {
        Self { start, end }
    }

    pub fn full(len: usize) -> Self {
        Self {
            start: 0,
            end: len - 1,
        }
    }

    pub(crate) fn check(&self, len: usize) -> Result<()> {
        if self.start > self.end || self.end >= len {
            return Err(Error::InvalidWindow {
                start: self.start,
                end: self.end,
                len,
            });
        }
        Ok(())
    }

    /// Last index that counts for the given closure.
    pub(crate) fn effective_end(&self, closure: Closure) -> usize {
        match closure {
            Closure::Closed => self.end,
            Closure::HalfOpen => self.end.saturating_sub(1).max(self.start),
        }
    }
}

/// Two-parameter function on grid indices, consumed row by row: `row(i)` yields
/// `|F(i, j)|` for `j = i, ..., end`.
pub trait TwoParam<S> {
    fn row(&self, i: usize, end: usize, out: &mut Vec<S>);
}

pub struct Increments<'a, S>(pub &'a GridPath<S>);

impl<S: Scalar> TwoParam<S> for Increments<'_, S> {
    fn row(&self, i: usize, end: usize, out: &mut Vec<S>) {
        out.clear();
        out.extend((i..=end).map(|j| self.0.increment_norm(i, j)));
    }
}

pub struct Level2<'a, S>(pub &'a RoughPath<S>);

impl<S: Scalar> TwoParam<S> for Level2<'_, S> {
    fn row(&self, i: usize, end: usize, out: &mut Vec<S>) {
        out.clear();
        out.push(S::zero());
        let mut sw = self.0.sweep(i);
        while sw.j < end {
            sw.step();
            out.push(norm(&sw.area));
        }
    }
}

pub struct IncrementDiff<'a, S>(pub &'a GridPath<S>, pub &'a GridPath<S>);

impl<S: Scalar> TwoParam<S> for IncrementDiff<'_, S> {
    fn row(&self, i: usize, end: usize, out: &mut Vec<S>) {
        out.clear();
        let d = self.0.dim();
        let mut da = vec![S::zero(); d];
        let mut db = vec![S::zero(); d];
        for j in i..=end {
            self.0.increment_into(i, j, &mut da);
            self.1.increment_into(i, j, &mut db);
            out.push(norm_diff(&da, &db));
        }
    }
}

pub struct Level2Diff<'a, S>(pub &'a RoughPath<S>, pub &'a RoughPath<S>);

impl<S: Scalar> TwoParam<S> for Level2Diff<'_, S> {
    fn row(&self, i: usize, end: usize, out: &mut Vec<S>) {
        out.clear();
        out.push(S::zero());
        let mut a = self.0.sweep(i);
        let mut b = self.1.sweep(i);
        while a.j < end {
            a.step();
            b.step();
            out.push(norm_diff(&a.area, &b.area));
        }
    }
}

/// Dense table of `|F(i, j)|`, row-major `n x n`, upper triangle used.
pub struct Table<S> {
    pub n: usize,
    pub values: Vec<S>,
}

impl<S: Scalar> Table<S> {
    pub fn build(f: &impl TwoParam<S>, n: usize) -> Self {
        let mut values = vec![S::zero(); n * n];
        let mut row = Vec::new();
        for i in 0..n {
            f.row(i, n - 1, &mut row);
            values[i * n + i..(i + 1) * n].copy_from_slice(&row);
        }
        Self { n, values }
    }
}

impl<S: Scalar> TwoParam<S> for Table<S> {
    fn row(&self, i: usize, end: usize, out: &mut Vec<S>) {
        out.clear();
        out.extend_from_slice(&self.values[i * self.n + i..i * self.n + end + 1]);
    }
}

/// Optimal partition returned by the dynamic program.
#[derive(Clone, Debug, PartialEq)]
pub struct PVarSolution<S> {
    /// `sup_P Σ |F(u, v)|^p` (the p-th power of the p-variation).
    pub power_sum: S,
    /// Grid indices of the maximizing partition, ties resolved toward fewer points.
    pub partition: Vec<usize>,
}

/// Forward dynamic program over split points in `[start, end]`.
///
/// `best[j]` is the largest `Σ |F|^p` over partitions of `[start, j]`. When a candidate
/// equals the incumbent we keep the one with fewer intervals, which makes the
/// maximizing partition (and hence every reported value) independent of scan order.
pub fn pvar_dp<S: Scalar>(f: &impl TwoParam<S>, p: S, start: usize, end: usize) -> PVarSolution<S> {
    if end <= start {
        return PVarSolution {
            power_sum: S::zero(),
            partition: vec![start],
        };
    }
    let m = end - start + 1;
    let mut best = vec![S::neg_infinity(); m];
    let mut count = vec![usize::MAX; m];
    let mut parent = vec![usize::MAX; m];
    best[0] = S::zero();
    count[0] = 0;
    let mut row = Vec::with_capacity(m);
    for a in 0..m - 1 {
        f.row(start + a, end, &mut row);
        let base = best[a];
        let c = count[a] + 1;
        for b in (a + 1)..m {
            let v = base + row[b - a].powf(p);
            if v > best[b] || (v == best[b] && c < count[b]) {
                best[b] = v;
                count[b] = c;
                parent[b] = a;
            }
        }
    }
    let mut partition = vec![end];
    let mut k = m - 1;
    while k != 0 {
        k = parent[k];
        partition.push(start + k);
    }
    partition.reverse();
    PVarSolution {
        power_sum: best[m - 1],
        partition,
    }
}

/// `sup Σ|F|^p` for every window `[i, j]` at once, O(n^3); entry `i * n + j`.
pub fn pvar_all_windows<S: Scalar>(table: &Table<S>, p: S) -> Vec<S> {
    let n = table.n;
    let mut out = vec![S::zero(); n * n];
    let mut best = vec![S::zero(); n];
    for i in 0..n {
        best[i] = S::zero();
        for j in (i + 1)..n {
            let mut bj = S::neg_infinity();
            for k in i..j {
                let v = best[k] + table.values[k * n + j].powf(p);
                if v > bj {
                    bj = v;
                }
            }
            best[j] = bj;
            out[i * n + j] = bj;
        }
    }
    out
}

fn check_p<S: Scalar>(p: S) -> Result<()> {
    if !(p >= S::one()) || !p.is_finite() {
        return Err(invalid("p", format!("need p >= 1, got {}", p)));
    }
    Ok(())
}

fn check_rough_p<S: Scalar>(p: S) -> Result<()> {
    if !(p >= S::c(2.0) && p < S::c(3.0)) {
        return Err(invalid("p", format!("need p in [2, 3), got {}", p)));
    }
    Ok(())
}

/// `‖X‖_{p, window}`: exact supremum over sub-partitions of the window's grid points.
pub fn p_variation<S: Scalar>(path: &GridPath<S>, p: S, window: Window, closure: Closure) -> Result<S> {
    Ok(p_variation_partition(path, p, window, closure)?.power_sum.powf(p.recip()))
}

pub fn p_variation_partition<S: Scalar>(
    path: &GridPath<S>,
    p: S,
    window: Window,
    closure: Closure,
) -> Result<PVarSolution<S>> {
    check_p(p)?;
    window.check(path.len())?;
    let end = window.effective_end(closure);
    Ok(pvar_dp(&Increments(path), p, window.start, end))
}

/// `‖X‖_p^p + ‖𝕏‖_{p/2}^p` over the window.
pub fn rough_norm_pow<S: Scalar>(rp: &RoughPath<S>, p: S, window: Window, closure: Closure) -> Result<S> {
    check_rough_p(p)?;
    window.check(rp.len())?;
    let end = window.effective_end(closure);
    let x = pvar_dp(&Increments(rp.path()), p, window.start, end).power_sum;
    let xx = pvar_dp(&Level2(rp), p / S::c(2.0), window.start, end).power_sum;
    Ok(x + xx * xx)
}

/// `(‖X‖_p^p + ‖𝕏‖_{p/2}^p)^{1/p}`.
pub fn rough_norm<S: Scalar>(rp: &RoughPath<S>, p: S, window: Window, closure: Closure) -> Result<S> {
    Ok(rough_norm_pow(rp, p, window, closure)?.powf(p.recip()))
}

/// `‖a - b‖_{p,[0,T]}` with level-wise differences; requires identical grids.
pub fn rough_distance<S: Scalar>(a: &RoughPath<S>, b: &RoughPath<S>, p: S) -> Result<S> {
    check_rough_p(p)?;
    a.check_same(b)?;
    let end = a.len() - 1;
    let x = pvar_dp(&IncrementDiff(a.path(), b.path()), p, 0, end).power_sum;
    let xx = pvar_dp(&Level2Diff(a, b), p / S::c(2.0), 0, end).power_sum;
    Ok((x + xx * xx).powf(p.recip()))
}

/// Drop interior points whose value moved by at most `tol` since the last kept point.
///
/// Intended as a preprocessor for very long paths (n > 5000) before the quadratic DP;
/// the result is a path on a sub-grid.
pub fn coarsen<S: Scalar>(path: &GridPath<S>, tol: S) -> Result<GridPath<S>> {
    let n = path.len();
    let mut keep = vec![0usize];
    for i in 1..n - 1 {
        let last = *keep.last().unwrap();
        if path.increment_norm(last, i) > tol {
            keep.push(i);
        }
    }
    keep.push(n - 1);
    let times: Vec<S> = keep.iter().map(|&i| path.grid().time(i)).collect();
    let grid = super::grid::TimeGrid::new(times)?;
    path.restrict_to(&grid)
}
