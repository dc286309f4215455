//! Random inputs and brute-force oracles shared by the integration tests.
#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use roughlab::roughpath::{GridControl, GridPath, RoughPath, TimeGrid};

/// Random strictly increasing grid on `[0, T]` with `n` points.
pub fn random_grid(rng: &mut ChaCha8Rng, n: usize, horizon: f64) -> TimeGrid<f64> {
    let mut w: Vec<f64> = (0..n - 1).map(|_| 0.1 + rng.gen::<f64>()).collect();
    let total: f64 = w.iter().sum();
    let mut times = vec![0.0];
    let mut acc = 0.0;
    for x in w.iter_mut().take(n - 2) {
        acc += *x / total * horizon;
        times.push(acc);
    }
    times.push(horizon);
    TimeGrid::new(times).unwrap()
}

/// Gaussian random walk with occasional larger jumps.
pub fn random_path(rng: &mut ChaCha8Rng, n: usize, d: usize) -> GridPath<f64> {
    let grid = random_grid(rng, n, 1.0);
    let mut values = vec![0.0; n * d];
    for i in 1..n {
        let big = rng.gen_bool(0.1);
        for a in 0..d {
            let z: f64 = rng.sample(StandardNormal);
            values[i * d + a] = values[(i - 1) * d + a] + if big { 2.0 * z } else { 0.3 * z };
        }
    }
    GridPath::new(grid, d, values).unwrap()
}

/// Random path with random cell blocks on level 2; Chen holds by construction.
pub fn random_rough_path(rng: &mut ChaCha8Rng, n: usize, d: usize) -> RoughPath<f64> {
    let path = random_path(rng, n, d);
    let level2 = (0..(n - 1) * d * d).map(|_| 0.2 * rng.sample::<f64, _>(StandardNormal)).collect();
    RoughPath::new(path, level2).unwrap()
}

/// `𝕏_{i,j}` from the naive double sum `Σ_k 𝕊_k + Σ_{k<l} δX_k ⊗ δX_l`.
pub fn naive_level2(rp: &RoughPath<f64>, i: usize, j: usize) -> Vec<f64> {
    let d = rp.dim();
    let mut out = vec![0.0; d * d];
    for k in i..j {
        let s = rp.cell_level2(k);
        let dk = rp.path().increment(k, k + 1);
        for a in 0..d * d {
            out[a] += s[a];
        }
        for l in (k + 1)..j {
            let dl = rp.path().increment(l, l + 1);
            for a in 0..d {
                for b in 0..d {
                    out[a * d + b] += dk[a] * dl[b];
                }
            }
        }
    }
    out
}

pub fn frob(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `sup Σ F(u, v)^p` over every partition of `{start, ..., end}`, by enumerating subsets
/// of the interior points.
pub fn brute_force_power_sum(f: impl Fn(usize, usize) -> f64, p: f64, start: usize, end: usize) -> f64 {
    if end <= start {
        return 0.0;
    }
    let interior = end - start - 1;
    let mut best = f64::NEG_INFINITY;
    for mask in 0u64..(1u64 << interior) {
        let mut prev = start;
        let mut sum = 0.0;
        for k in 0..interior {
            if mask >> k & 1 == 1 {
                let u = start + 1 + k;
                sum += f(prev, u).powf(p);
                prev = u;
            }
        }
        sum += f(prev, end).powf(p);
        best = best.max(sum);
    }
    best
}

pub fn brute_force_pvar(path: &GridPath<f64>, p: f64, start: usize, end: usize) -> f64 {
    brute_force_power_sum(|u, v| frob(&path.increment(u, v)), p, start, end).powf(1.0 / p)
}

/// `(‖X‖_p^p + ‖𝕏‖_{p/2}^p)^{1/p}` by enumeration, level 2 from the naive double sum.
pub fn brute_force_rough_norm(rp: &RoughPath<f64>, p: f64, start: usize, end: usize) -> f64 {
    let x = brute_force_power_sum(|u, v| frob(&rp.path().increment(u, v)), p, start, end);
    let xx = brute_force_power_sum(|u, v| frob(&naive_level2(rp, u, v)), p / 2.0, start, end);
    (x + xx * xx).powf(1.0 / p)
}

/// `w(i, j) = Σ_k c_k (Σ_{i <= l < j} a_{k,l})^{θ_k}`: random superadditive grid control.
pub fn random_control(rng: &mut ChaCha8Rng, n: usize) -> GridControl<f64> {
    let terms = rng.gen_range(1..=3);
    let mut parts: Vec<(f64, f64, Vec<f64>)> = Vec::new();
    for _ in 0..terms {
        let c = 0.2 + rng.gen::<f64>();
        let theta = 1.0 + 2.0 * rng.gen::<f64>();
        let mut cum = vec![0.0];
        for _ in 0..n - 1 {
            let a = if rng.gen_bool(0.05) { 1.0 + rng.gen::<f64>() } else { 0.1 * rng.gen::<f64>() };
            cum.push(cum.last().unwrap() + a);
        }
        parts.push((c, theta, cum));
    }
    GridControl::from_fn(n, |i, j| {
        parts
            .iter()
            .map(|(c, theta, cum)| c * (cum[j] - cum[i]).powf(*theta))
            .sum()
    })
}
