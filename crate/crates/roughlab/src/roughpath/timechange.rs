use serde::{Deserialize, Serialize};

use super::grid::TimeGrid;
use super::pvar::rough_distance;
use super::rough::RoughPath;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Strictly increasing piecewise-linear bijection of `[0, T]` given by knots `(t, λ(t))`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct TimeChange<S> {
    knots: Vec<(S, S)>,
}

impl<S: Scalar> TimeChange<S> {
    pub fn new(knots: Vec<(S, S)>) -> Result<Self> {
        if knots.len() < 2 {
            return Err(Error::InvalidTimeChange("need at least two knots".into()));
        }
        let (t0, l0) = knots[0];
        let (tn, ln) = *knots.last().unwrap();
        if t0 != S::zero() || l0 != S::zero() || tn != ln || !(tn > S::zero()) {
            return Err(Error::InvalidTimeChange("endpoints must be fixed".into()));
        }
        for w in knots.windows(2) {
            if !(w[1].0 > w[0].0) || !(w[1].1 > w[0].1) {
                return Err(Error::InvalidTimeChange(format!(
                    "knots not strictly increasing at ({}, {}) -> ({}, {})",
                    w[0].0, w[0].1, w[1].0, w[1].1
                )));
            }
        }
        Ok(Self { knots })
    }

    pub fn identity(horizon: S) -> Self {
        Self {
            knots: vec![(S::zero(), S::zero()), (horizon, horizon)],
        }
    }

    /// `λ` with `λ(to) = from`: a path jumping at `from` jumps at `to` after composition.
    pub fn moving(horizon: S, from: S, to: S) -> Result<Self> {
        if from == to {
            return Ok(Self::identity(horizon));
        }
        Self::new(vec![(S::zero(), S::zero()), (to, from), (horizon, horizon)])
    }

    /// Like [`TimeChange::moving`], but equal to the identity outside
    /// `[from - halfwidth, from + halfwidth]`.
    pub fn local(horizon: S, from: S, to: S, halfwidth: S) -> Result<Self> {
        if from == to {
            return Ok(Self::identity(horizon));
        }
        let (a, b) = (from - halfwidth, from + halfwidth);
        let mut knots = vec![(S::zero(), S::zero())];
        if a > S::zero() {
            knots.push((a, a));
        }
        knots.push((to, from));
        if b < horizon {
            knots.push((b, b));
        }
        knots.push((horizon, horizon));
        Self::new(knots)
    }

    pub fn knots(&self) -> &[(S, S)] {
        &self.knots
    }

    pub fn horizon(&self) -> S {
        self.knots.last().unwrap().0
    }

    fn interp(pts: &[(S, S)], t: S, inverse: bool) -> S {
        let key = |k: &(S, S)| if inverse { k.1 } else { k.0 };
        let val = |k: &(S, S)| if inverse { k.0 } else { k.1 };
        let last = pts.len() - 1;
        if t <= key(&pts[0]) {
            return val(&pts[0]);
        }
        if t >= key(&pts[last]) {
            return val(&pts[last]);
        }
        let mut k = 0;
        while key(&pts[k + 1]) < t {
            k += 1;
        }
        let (a, b) = (&pts[k], &pts[k + 1]);
        if t == key(b) {
            return val(b);
        }
        let r = (t - key(a)) / (key(b) - key(a));
        val(a) + r * (val(b) - val(a))
    }

    pub fn eval(&self, t: S) -> S {
        Self::interp(&self.knots, t, false)
    }

    pub fn inverse(&self, t: S) -> S {
        Self::interp(&self.knots, t, true)
    }

    /// `|λ| = sup_t |λ(t) - t|`, attained at a knot.
    pub fn sup_deviation(&self) -> S {
        self.knots
            .iter()
            .map(|&(t, l)| (l - t).abs())
            .fold(S::zero(), S::max)
    }
}

/// `𝐗 ∘ λ`: grid times are mapped through `λ^{-1}`, values and level 2 ride along.
pub fn apply_time_change<S: Scalar>(rp: &RoughPath<S>, lambda: &TimeChange<S>) -> Result<RoughPath<S>> {
    let t_end = rp.grid().horizon();
    if lambda.horizon() != t_end {
        return Err(Error::InvalidTimeChange("horizon differs from the path's".into()));
    }
    let n = rp.len();
    let times: Vec<S> = rp
        .grid()
        .times()
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            if i == 0 {
                S::zero()
            } else if i == n - 1 {
                t_end
            } else {
                lambda.inverse(t)
            }
        })
        .collect();
    rp.with_grid(TimeGrid::new(times)?)
}

/// Candidate family for the Skorokhod upper bound.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SkorokhodSearch {
    /// Only jump pairs at most this far apart are matched.
    pub window: f64,
    /// Largest jumps of each path taken into account.
    pub max_jumps: usize,
}

impl Default for SkorokhodSearch {
    fn default() -> Self {
        Self {
            window: f64::INFINITY,
            max_jumps: 8,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct SkorokhodBound<S> {
    pub value: S,
    pub lambda: TimeChange<S>,
    pub family_size: usize,
}

/// `max(|λ|, ‖a ∘ λ - b‖_p)` for one time change, comparing on the union grid.
pub fn skorokhod_objective<S: Scalar>(
    a: &RoughPath<S>,
    b: &RoughPath<S>,
    lambda: &TimeChange<S>,
    p: S,
) -> Result<S> {
    let moved = apply_time_change(a, lambda)?;
    let grid = moved.grid().union(b.grid())?;
    let da = moved.refine_to(&grid)?;
    let db = b.refine_to(&grid)?;
    Ok(lambda.sup_deviation().max(rough_distance(&da, &db, p)?))
}

fn largest_jumps<S: Scalar>(rp: &RoughPath<S>, k: usize) -> Vec<S> {
    let mut prof = rp.jump_profile();
    prof.sort_by(|x, y| (y.1 + y.2).partial_cmp(&(x.1 + x.2)).unwrap().then(x.0.partial_cmp(&y.0).unwrap()));
    let mut times: Vec<S> = prof.into_iter().take(k).map(|j| j.0).collect();
    times.sort_by(|x, y| x.partial_cmp(y).unwrap());
    times
}

/// Upper bound on the J1 distance: minimum over the identity, every single jump-pair
/// match within the window, and one order-preserving greedy match of all large jumps.
pub fn skorokhod_distance_upper<S: Scalar>(
    a: &RoughPath<S>,
    b: &RoughPath<S>,
    p: S,
    search: &SkorokhodSearch,
) -> Result<SkorokhodBound<S>> {
    if a.dim() != b.dim() {
        return Err(Error::GridMismatch("dimensions differ".into()));
    }
    let t_end = a.grid().horizon();
    if b.grid().horizon() != t_end {
        return Err(Error::GridMismatch("horizons differ".into()));
    }
    let window = S::c(search.window);
    let ja = largest_jumps(a, search.max_jumps);
    let jb = largest_jumps(b, search.max_jumps);
    let interior = |t: S| t > S::zero() && t < t_end;

    let mut family = vec![TimeChange::identity(t_end)];
    for &ta in &ja {
        for &tb in &jb {
            if ta != tb && (ta - tb).abs() <= window && interior(ta) && interior(tb) {
                family.push(TimeChange::moving(t_end, ta, tb)?);
            }
        }
    }
    // Greedy order-preserving matching by proximity.
    let mut knots = vec![(S::zero(), S::zero())];
    let mut used_b = 0usize;
    for &ta in &ja {
        if !interior(ta) {
            continue;
        }
        let candidate = jb[used_b.min(jb.len())..]
            .iter()
            .enumerate()
            .filter(|(_, &tb)| interior(tb) && (ta - tb).abs() <= window)
            .min_by(|x, y| (ta - *x.1).abs().partial_cmp(&(ta - *y.1).abs()).unwrap());
        if let Some((off, &tb)) = candidate {
            let last = *knots.last().unwrap();
            if tb > last.0 && ta > last.1 {
                knots.push((tb, ta));
                used_b += off + 1;
            }
        }
    }
    knots.push((t_end, t_end));
    if knots.len() > 3 {
        family.push(TimeChange::new(knots)?);
    }

    let mut best: Option<(S, TimeChange<S>)> = None;
    for lambda in &family {
        let v = skorokhod_objective(a, b, lambda, p)?;
        if best.as_ref().map_or(true, |(bv, _)| v < *bv) {
            best = Some((v, lambda.clone()));
        }
    }
    let (value, lambda) = best.expect("identity is always a candidate");
    Ok(SkorokhodBound {
        value,
        lambda,
        family_size: family.len(),
    })
}
