use serde::{Deserialize, Serialize};

use super::solver::ControlledSolution;
use crate::error::{invalid, Result};
use crate::roughpath::{pvar_dp, Table};
use crate::stats::pairwise_sum;
use crate::{GridPath64, RoughPath64};

/// Moment order for ensemble norms; `Max` stands in for the essential supremum.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum MomentOrder {
    Finite(f64),
    Max,
}

fn moment(values: &mut [f64], order: MomentOrder) -> f64 {
    match order {
        MomentOrder::Max => values.iter().fold(0.0, |a: f64, &b| a.max(b)),
        MomentOrder::Finite(q) => {
            for v in values.iter_mut() {
                *v = v.powf(q);
            }
            (pairwise_sum(values) / values.len() as f64).powf(1.0 / q)
        }
    }
}

/// `‖Z‖_{p,q}` over `times`: the p-variation of `(s, t) ↦ ‖δZ_{s,t}‖_{L^q}` with the
/// q-th moment replaced by an ensemble mean (or maximum).
///
/// Each member is read at `times` through its own grid, so members may live on
/// different grids.
pub fn ensemble_pq_seminorm(paths: &[&GridPath64], times: &[f64], p: f64, order: MomentOrder) -> Result<f64> {
    if paths.is_empty() || times.len() < 2 {
        return Err(invalid("paths", "need at least one path and two times"));
    }
    let dim = paths[0].dim();
    let samples: Vec<Vec<f64>> = paths
        .iter()
        .map(|p| times.iter().flat_map(|&t| p.eval(t).to_vec()).collect())
        .collect();
    let n = times.len();
    let mut values = vec![0.0; n * n];
    let mut buf = vec![0.0; paths.len()];
    for i in 0..n {
        for j in i + 1..n {
            for (w, s) in samples.iter().enumerate() {
                let mut acc = 0.0;
                for c in 0..dim {
                    let d = s[j * dim + c] - s[i * dim + c];
                    acc += d * d;
                }
                buf[w] = acc.sqrt();
            }
            values[i * n + j] = moment(&mut buf, order);
        }
    }
    let table = Table { n, values };
    Ok(pvar_dp(&table, p, 0, n - 1).power_sum.powf(1.0 / p))
}

/// Ensemble estimates of `‖Y‖_{p,q}`, `‖Y'‖_{p,q}` and `‖R^Y‖_{p/2,q}` on dyadic times.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleNorms {
    pub y: f64,
    pub y_prime: f64,
    /// Uses `‖R^Y‖` in place of `‖E_s R^Y‖`, which only makes the estimate larger.
    pub remainder: f64,
    pub order: MomentOrder,
    pub points: usize,
}

/// Members must share the grid of `rp` (use the common grid before inserting events,
/// then restrict each member onto it).
pub fn ensemble_norms(
    solutions: &[&ControlledSolution],
    rp: &RoughPath64,
    p: f64,
    order: MomentOrder,
    level: u32,
) -> Result<EnsembleNorms> {
    if solutions.is_empty() {
        return Err(invalid("solutions", "empty ensemble"));
    }
    for s in solutions {
        if s.y.grid() != rp.grid() {
            return Err(invalid("solutions", "members must live on the driver grid"));
        }
    }
    let idx = super::solver::dyadic_indices(rp.grid(), level);
    let times: Vec<f64> = idx.iter().map(|&i| rp.grid().time(i)).collect();
    let ys: Vec<&GridPath64> = solutions.iter().map(|s| &s.y).collect();
    let yps: Vec<&GridPath64> = solutions.iter().map(|s| &s.y_prime).collect();
    let y = ensemble_pq_seminorm(&ys, &times, p, order)?;
    let y_prime = ensemble_pq_seminorm(&yps, &times, p, order)?;

    let n = idx.len();
    let mut values = vec![0.0; n * n];
    let mut buf = vec![0.0; solutions.len()];
    for a in 0..n {
        for b in a + 1..n {
            for (w, s) in solutions.iter().enumerate() {
                let r = s.remainder(rp, idx[a], idx[b]);
                buf[w] = r.iter().map(|v| v * v).sum::<f64>().sqrt();
            }
            values[a * n + b] = moment(&mut buf, order);
        }
    }
    let remainder = pvar_dp(&Table { n, values }, p / 2.0, 0, n - 1)
        .power_sum
        .powf(2.0 / p);
    Ok(EnsembleNorms {
        y,
        y_prime,
        remainder,
        order,
        points: n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::roughpath::GridPath;
    use crate::TimeGrid64;

    #[test]
    fn deterministic_ensemble_reduces_to_pvar() {
        let g = TimeGrid64::uniform(1.0, 4).unwrap();
        let x = GridPath::from_scalars(g.clone(), vec![0.0, 1.0, 0.0, 1.0, 0.0]).unwrap();
        let v = ensemble_pq_seminorm(&[&x, &x], g.times(), 2.0, MomentOrder::Finite(2.0)).unwrap();
        assert!((v - 2.0).abs() < 1e-15);
        let m = ensemble_pq_seminorm(&[&x], g.times(), 2.0, MomentOrder::Max).unwrap();
        assert!((m - 2.0).abs() < 1e-15);
    }

    #[test]
    fn moments_are_ordered() {
        let g = TimeGrid64::uniform(1.0, 2).unwrap();
        let a = GridPath::from_scalars(g.clone(), vec![0.0, 1.0, 1.0]).unwrap();
        let b = GridPath::from_scalars(g.clone(), vec![0.0, 3.0, 3.0]).unwrap();
        let q1 = ensemble_pq_seminorm(&[&a, &b], g.times(), 2.5, MomentOrder::Finite(1.0)).unwrap();
        let q2 = ensemble_pq_seminorm(&[&a, &b], g.times(), 2.5, MomentOrder::Finite(2.0)).unwrap();
        let qm = ensemble_pq_seminorm(&[&a, &b], g.times(), 2.5, MomentOrder::Max).unwrap();
        assert!(q1 < q2 && q2 < qm);
        assert_eq!(qm, 3.0);
    }
}
