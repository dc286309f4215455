//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so the lines always reach the terminal. Pass
//! criterion numbers as arguments to run a subset, e.g.
//! `cargo test -p roughlab --test acceptance -- 4 10`.

mod common;

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use common::*;
use roughlab::filter::*;
use roughlab::moments::*;
use roughlab::noise::*;
use roughlab::presets::{filter_preset, list_presets, rsde_preset, PresetKind};
use roughlab::roughpath::*;
use roughlab::rsde::*;
use roughlab::stats::{median, pairwise_sum};
use roughlab::{GridPath64, RoughPath64, TimeGrid64};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn within(started: Instant, limit_s: u64) -> bool {
    started.elapsed() < Duration::from_secs(limit_s)
}

fn none() -> BTreeMap<String, f64> {
    BTreeMap::new()
}

fn atoms() -> MarkMeasure {
    MarkMeasure::scalar(&[(-0.3, 1.0), (0.4, 0.5)]).unwrap()
}

fn no_events(grid: &TimeGrid64) -> MarkedEventStream {
    MarkedEventStream::empty(grid.horizon(), MarkMeasure::empty())
}

fn c1_chen() -> Outcome {
    let t = Instant::now();
    let mut r = ChaCha8Rng::seed_from_u64(101);
    let mut worst: f64 = 0.0;
    let mut triples = 0;
    for _ in 0..1000 {
        let n = r.gen_range(2..=200);
        let d = r.gen_range(1..=3);
        let rp = RoughPath::ito_lift(&random_path(&mut r, n, d));
        for _ in 0..10 {
            let s = r.gen_range(0..n);
            let e = r.gen_range(s..n);
            let u = r.gen_range(s..=e);
            let whole = rp.chen_reconstruct(s, e).unwrap();
            let left = rp.chen_reconstruct(s, u).unwrap();
            let right = rp.chen_reconstruct(u, e).unwrap();
            let (a, b) = (rp.increment(s, u), rp.increment(u, e));
            let mut joined = vec![0.0; d * d];
            for i in 0..d {
                for j in 0..d {
                    joined[i * d + j] = left[i * d + j] + right[i * d + j] + a[i] * b[j];
                }
            }
            let diff: Vec<f64> = whole.iter().zip(&joined).map(|(x, y)| x - y).collect();
            let scale = frob(&left) + frob(&right) + frob(&a) * frob(&b);
            worst = worst.max(frob(&diff) / scale.max(f64::MIN_POSITIVE));
            triples += 1;
        }
        // The lift itself against the left-point double sum, on one window.
        let s = r.gen_range(0..n);
        let e = r.gen_range(s..n);
        let naive = naive_level2(&rp, s, e);
        let got = rp.chen_reconstruct(s, e).unwrap();
        let diff: Vec<f64> = got.iter().zip(&naive).map(|(x, y)| x - y).collect();
        worst = worst.max(frob(&diff) / frob(&naive).max(1.0));
    }
    let pass = worst <= 1e-12 && within(t, 10);
    outcome(pass, format!("{} triples, worst relative residual {:.2e}", triples, worst))
}

fn c2_pvar() -> Outcome {
    let t = Instant::now();
    let mut r = ChaCha8Rng::seed_from_u64(102);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let n = r.gen_range(2..=12);
        let d = r.gen_range(1..=3);
        let path = random_path(&mut r, n, d);
        for p in [1.0, 2.0, 2.5] {
            let got = p_variation(&path, p, Window::full(n), Closure::Closed).unwrap();
            let want = brute_force_pvar(&path, p, 0, n - 1);
            worst = worst.max((got - want).abs() / want.max(1.0));
        }
    }
    outcome(worst <= 1e-12 && within(t, 30), format!("600 cases, worst relative gap {:.2e}", worst))
}

/// `Y = I` with `Y' = 0`; the integral is `δX`.
fn identity_integrand(rp: &RoughPath64) -> (GridPath64, GridPath64) {
    let d = rp.dim();
    let mut eye = vec![0.0; d * d];
    for a in 0..d {
        eye[a * d + a] = 1.0;
    }
    let y = GridPath::from_fn(rp.grid().clone(), d * d, |_| eye.clone()).unwrap();
    (y, GridPath64::zeros(rp.grid().clone(), d * d * d))
}

/// `Y = δX_{s,·}` acting by tensor product with `Y' = I`; the integral is `𝕏_{s,·}`.
fn increment_integrand(rp: &RoughPath64, s: usize) -> (GridPath64, GridPath64) {
    let d = rp.dim();
    let g = rp.grid().clone();
    let mut y = GridPath64::zeros(g.clone(), d * d * d);
    let mut yp = GridPath64::zeros(g, d * d * d * d);
    for k in s..rp.len() {
        let inc = rp.increment(s, k);
        for p in 0..d {
            for q in 0..d {
                let i = p * d + q;
                y.value_mut(k)[i * d + q] = inc[p];
                yp.value_mut(k)[i * d * d + p * d + q] = 1.0;
            }
        }
    }
    (y, yp)
}

fn c3_integral() -> Outcome {
    let mut r = ChaCha8Rng::seed_from_u64(103);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let n = r.gen_range(3..80);
        let d = r.gen_range(1..=3);
        let rp = random_rough_path(&mut r, n, d);
        let s = r.gen_range(0..n - 1);
        let e = r.gen_range(s + 1..n);
        let (y, yp) = identity_integrand(&rp);
        let out = rough_stochastic_integral(&y, &yp, &rp, Window::new(s, e)).unwrap();
        for (a, b) in out.value(e).iter().zip(rp.increment(s, e)) {
            worst = worst.max((a - b).abs() / b.abs().max(1.0));
        }
        let (y, yp) = increment_integrand(&rp, s);
        let out = rough_stochastic_integral(&y, &yp, &rp, Window::new(s, e)).unwrap();
        for (a, b) in out.value(e).iter().zip(naive_level2(&rp, s, e)) {
            worst = worst.max((a - b).abs() / b.abs().max(1.0));
        }
        // Jump at every cell: Y_- ΔX + Y'_- Δ𝕏 for a nonlinear integrand.
        let y = rp.path().map_values(d, |_, x| x.iter().map(|v| v.sin()).collect()).unwrap();
        let yp = rp
            .path()
            .map_values(d * d, |_, x| {
                let mut m = vec![0.0; d * d];
                for a in 0..d {
                    m[a * d + a] = x[a].cos();
                }
                m
            })
            .unwrap();
        let out = rough_stochastic_integral(&y, &yp, &rp, Window::full(n)).unwrap();
        for k in 0..n - 1 {
            let dx = rp.increment(k, k + 1);
            let cell = rp.cell_level2(k);
            let want: f64 = (0..d).map(|a| y.value(k)[a] * dx[a]).sum::<f64>()
                + yp.value(k).iter().zip(cell).map(|(a, b)| a * b).sum::<f64>();
            let got = out.value(k + 1)[0] - out.value(k)[0];
            worst = worst.max((got - want).abs() / out.value(k + 1)[0].abs().max(1.0));
        }
    }
    outcome(worst <= 1e-12, format!("100 paths, worst relative gap {:.2e}", worst))
}

fn c4_convergence() -> Outcome {
    let t = Instant::now();
    // dY = Y d𝐗 with 𝐗 the Itô lift of a Brownian motion sampled on the mesh:
    // Y_T = exp(W_T - T/2).
    let c = CoefficientSet::linear_scalar(0.0, 0.0, 1.0, false);
    let fine = TimeGrid64::uniform(1.0, 1 << 12).unwrap();
    let coarse = TimeGrid64::uniform(1.0, 1 << 10).unwrap();
    let root = RngStream::new(104);
    let (mut ef, mut ec) = (Vec::new(), Vec::new());
    for w in 0..200u64 {
        let b = sample_brownian(&root.indexed("path", w), &fine, 1).path;
        let exact = (b.last()[0] - 0.5).exp();
        for (g, errs) in [(&fine, &mut ef), (&coarse, &mut ec)] {
            let rp = RoughPath::ito_lift(&b.restrict_to(g).unwrap());
            let m = MartingaleSample::zero(g, 1);
            let y = solve_rsde(&c, &[1.0], &rp, &m, &no_events(g), g).unwrap().y.last()[0];
            errs.push((y / exact - 1.0).abs());
        }
    }
    let (mf, mc) = (median(&ef), median(&ec));
    let ratio = mc / mf;
    let pass = mf <= 5e-2 && (1.5..=3.0).contains(&ratio) && within(t, 120);
    outcome(pass, format!("median rel err {:.3e} at 2^-12, {:.3e} at 2^-10, ratio {:.3}", mf, mc, ratio))
}

fn consistency_spec(fine: usize, mesh: [usize; 2], outer: usize, inner: usize) -> ConsistencySpec {
    ConsistencySpec {
        horizon: 1.0,
        fine_cells: fine,
        mesh_cells: mesh,
        noise: NoiseSpec {
            brownian_dim: 1,
            jump_measure: atoms(),
            deterministic_jump: None,
        },
        ensemble: EnsembleSpec {
            n_outer: outer,
            n_inner: inner,
            seed: 11,
            threads: None,
        },
    }
}

fn c5_consistency() -> Outcome {
    let t = Instant::now();
    let small = consistency_spec(128, [16, 32], 10, 5);
    let mut exact = true;
    for name in ["no-rough", "additive"] {
        let c = rsde_preset(name, &none()).unwrap();
        exact &= consistency_check(&c, &[1.0], &small).unwrap().bit_exact;
    }
    let c = rsde_preset("multiplicative-jump-diffusion", &none()).unwrap();
    let r = consistency_check(&c, &[1.0], &consistency_spec(512, [32, 64], 200, 50)).unwrap();
    let pass = exact && r.decays && r.decay_ratio >= 1.3 && within(t, 300);
    outcome(
        pass,
        format!(
            "trivial cases bit-exact: {}; gaps {:.3e} -> {:.3e}, ratio {:.3}",
            exact, r.levels[0].mean_terminal_gap, r.levels[1].mean_terminal_gap, r.decay_ratio
        ),
    )
}

fn skorokhod_setup(cells: usize, n_paths: usize, levels: &[i32]) -> (CoefficientSet, RoughPath64, Vec<TimeChange<f64>>, SkorokhodSpec) {
    let c = rsde_preset("bounded-nonlinear", &none()).unwrap();
    let (t0, jump) = (0.5, 0.5);
    let g = TimeGrid64::uniform(1.0, cells).unwrap().with_times(&[t0]).unwrap();
    let x = GridPath::from_fn(g.clone(), 1, |t| vec![if t >= t0 { jump } else { 0.0 }]).unwrap();
    let b = sample_brownian(&RngStream::new(3).child("driver"), &g, 1).path;
    let rp = RoughPath::ito_lift(&b.axpy(1.0, &x).unwrap());
    let shifts = levels
        .iter()
        .map(|&n| {
            let d = 0.5f64.powi(n);
            TimeChange::local(1.0, t0, t0 + d, 1.5 * d).unwrap()
        })
        .collect();
    let spec = SkorokhodSpec {
        noise: NoiseSpec {
            brownian_dim: 1,
            jump_measure: atoms(),
            deterministic_jump: None,
        },
        n_paths,
        seed: 3,
        threads: None,
    };
    (c, rp, shifts, spec)
}

fn c6_skorokhod() -> Outcome {
    let (c, rp, shifts, spec) = skorokhod_setup(1024, 400, &[2, 3, 4, 5, 6]);
    let r = skorokhod_convergence_experiment(&c, &[0.0], &rp, &shifts, &spec).unwrap();
    let last_shift = r.points.last().unwrap().shift;
    let ce = skorokhod_counterexample(1.0, 0.5, 1.0, 64, &[2, 4, 6, 8]).unwrap();
    let persistent = ce.points.iter().all(|p| (p.l2_gap - 1.0).abs() <= 1e-9);
    let pass = r.monotone && r.final_gap < 0.05 && (last_shift - 1.0 / 64.0).abs() < 1e-15 && persistent;
    let gaps: Vec<String> = r.points.iter().map(|p| format!("{:.4}", p.l2_gap)).collect();
    let ce_gaps: Vec<String> = ce.points.iter().map(|p| format!("{}", p.l2_gap)).collect();
    outcome(pass, format!("gaps [{}]; counterexample gaps [{}]", gaps.join(", "), ce_gaps.join(", ")))
}

fn c7_lemmas() -> Outcome {
    let mut r = ChaCha8Rng::seed_from_u64(107);
    let mut violations = 0;
    let mut fitted: f64 = 0.0;
    for _ in 0..100 {
        let n = r.gen_range(8..40);
        let w2 = random_control(&mut r, n);
        let c: f64 = 0.5 + 2.0 * r.gen::<f64>();
        let w1 = w2.scaled(c * r.gen::<f64>());
        let total = w2.eval(0, n - 1);
        let alpha = total * (0.02 + 0.3 * r.gen::<f64>());
        let beta = alpha * (1.0 + 3.0 * r.gen::<f64>());
        let rep = n_alpha_lemma_suite(&w1, &w2, alpha, beta, c).unwrap();
        assert!(rep.comparison.hypothesis_met);
        violations += rep.violations();
        fitted = fitted.max(rep.counting_fitted);
        let other = random_control(&mut r, n);
        let rep = n_alpha_lemma_suite(&other, &w2, alpha, beta, 1.0).unwrap();
        violations += rep.sum.violation.is_some() as usize + rep.counting.violation.is_some() as usize;
    }
    let mut hand = true;
    for cells in [10usize, 30, 100, 1000] {
        let g = TimeGrid64::uniform(1.0, cells).unwrap();
        hand &= n_alpha(&GridControl::linear(&g), &g, 0.3, Window::full(cells + 1)).unwrap().count == 3;
    }
    outcome(
        violations == 0 && hand && fitted.is_finite(),
        format!("{} violations, max fitted counting constant {:.3}, linear example exact: {}", violations, fitted, hand),
    )
}

fn c8_moments() -> Outcome {
    let t = Instant::now();
    let mut pass = true;
    let mut detail = Vec::new();
    for (lambda, seed) in [(0.5, 108), (1.0, 109)] {
        let (rep, exact) = brownian_max_exp_moment(lambda, 1.0, 16, 100_000, seed, None).unwrap();
        let z = (rep.moment - exact) / rep.bootstrap_se;
        pass &= z.abs() <= 3.0;
        detail.push(format!("λ={}: {:.5} vs {:.5} (z {:.2})", lambda, rep.moment, exact, z));
    }
    let reps = rough_integral_exp_moment(1.0, 1.0, &[64, 128], 2.5, 1.0, 5000, 110, None).unwrap();
    let rel = reps[0].moment / reps[1].moment - 1.0;
    pass &= rel.abs() <= 0.1 && reps.iter().all(|r| r.moment.is_finite() && !r.saturated);
    detail.push(format!("rough integral {:.4} -> {:.4} ({:+.2}%)", reps[0].moment, reps[1].moment, 100.0 * rel));
    outcome(pass && within(t, 120), detail.join("; "))
}

const CPS: [f64; 5] = [0.2, 0.4, 0.6, 0.8, 1.0];

fn opts(n: usize, stride: usize) -> FilterOptions {
    let mut o = FilterOptions::new(n, CPS.to_vec());
    o.stride = stride;
    o
}

fn c9_filter_identities() -> Outcome {
    let base = TimeGrid64::uniform(1.0, 64).unwrap();
    let m = filter_preset("correlated-jump-diffusion", &none()).unwrap().with_test_fn(TestFunction::one());
    let obs = simulate_observation(&m, &RngStream::new(91), &base).unwrap();
    let mut one = true;
    for route in [Route::Robust, Route::Oracle] {
        let run = run_route(&m, &obs, &opts(500, 2), &RngStream::new(92), route).unwrap();
        one &= run.checkpoints.iter().all(|c| c.theta == 1.0);
    }

    let m = filter_preset("degenerate", &none()).unwrap();
    let obs = simulate_observation(&m, &RngStream::new(93), &base).unwrap();
    let mut o = opts(500, 2);
    o.keep_particles = true;
    let run = robust_filter(&m, &obs, &o, &RngStream::new(94)).unwrap();
    let parts = run.particles.as_ref().unwrap();
    let zero_i = parts.iter().all(|p| p.i1.iter().chain(&p.i2).all(|v| *v == 0.0));
    let mean_f = run.checkpoints.iter().enumerate().all(|(c, est)| {
        let f: Vec<f64> = parts.iter().map(|p| p.f[c]).collect();
        est.theta == pairwise_sum(&f) / f.len() as f64
    });

    let mut failing = Vec::new();
    for p in list_presets().iter().filter(|p| p.kind == PresetKind::Filter) {
        let m = filter_preset(p.name, &none()).unwrap();
        // exp(I) is heavy-tailed; at a few hundred observations the sample mean sits low
        // and the standard error is underestimated.
        let check = measure_change_check(&m, &base, 2000, &opts(8, 1), &RngStream::new(95)).unwrap();
        if !check.passes {
            failing.push(p.name);
        }
    }
    outcome(
        one && zero_i && mean_f && failing.is_empty(),
        format!("Θ¹ ≡ 1: {}; I ≡ 0: {}; Θ = mean F: {}; E exp(I) failures: {:?}", one, zero_i, mean_f, failing),
    )
}

fn c10_routes() -> Outcome {
    let t = Instant::now();
    let m = filter_preset("correlated-jump-diffusion", &none()).unwrap();
    let base = TimeGrid64::uniform(1.0, 256).unwrap();
    let obs = simulate_signal_and_observation(&m, &RngStream::new(5), &base).unwrap();
    let o = opts(20_000, 2);
    let a = robust_filter(&m, &obs, &o, &RngStream::new(7)).unwrap();
    let b = oracle_filter(&m, &obs, &o, &RngStream::new(8)).unwrap();
    let z: Vec<f64> = a
        .checkpoints
        .iter()
        .zip(&b.checkpoints)
        .map(|(x, y)| (x.theta - y.theta) / (x.se_theta.powi(2) + y.se_theta.powi(2)).sqrt())
        .collect();
    let pass = z.len() == 5 && z.iter().all(|v| v.abs() <= 3.0) && within(t, 600);
    let zs: Vec<String> = z.iter().map(|v| format!("{:+.2}", v)).collect();
    outcome(pass, format!("{} events, z = [{}]", obs.events.len(), zs.join(", ")))
}

fn robustness_setup(particles: usize, threads: Option<usize>) -> RobustnessReport {
    let m = filter_preset("correlated-jump-diffusion", &none()).unwrap();
    let base = TimeGrid64::uniform(1.0, 256).unwrap();
    let obs = simulate_signal_and_observation(&m, &RngStream::new(5), &base).unwrap();
    let mut o = FilterOptions::new(particles, (1..=16).map(|i| i as f64 / 16.0).collect());
    o.stride = 2;
    o.threads = threads;
    let dir = bump_direction(&obs.grid, m.driver_dim(), 0).unwrap();
    let amps: Vec<f64> = (1..=6).map(|k| 0.5 / (1u64 << k) as f64).collect();
    robustness_pvar(&m, &obs, &dir, &amps, 2.5, &o, &RngStream::new(9)).unwrap()
}

fn c11_robustness() -> Outcome {
    let rep = robustness_setup(2000, None);
    let gaps: Vec<String> = rep.rows.iter().map(|r| format!("{:.2e}", r.sup_gap)).collect();
    outcome(
        rep.monotone && rep.band <= 3.0,
        format!("sup gaps [{}], ratio band {:.3}", gaps.join(", "), rep.band),
    )
}

/// Every experiment, serialized; compared across thread counts.
fn all_experiments(threads: usize) -> String {
    #[derive(Serialize)]
    struct Bundle {
        consistency: ConsistencyReport,
        stability: Vec<StabilityRow>,
        skorokhod: SkorokhodReport,
        brownian_max: (MomentReport, f64),
        rough_integral: Vec<MomentReport>,
        robust: FilterRun,
        oracle: FilterRun,
        measure_change: MartingaleCheck,
        robustness: RobustnessReport,
    }
    let k = Some(threads);
    let mjd = rsde_preset("multiplicative-jump-diffusion", &none()).unwrap();
    let mut cs = consistency_spec(64, [8, 16], 6, 4);
    cs.ensemble.threads = k;

    let bn = rsde_preset("bounded-nonlinear", &none()).unwrap();
    let g = TimeGrid64::uniform(1.0, 32).unwrap();
    let x = sample_brownian(&RngStream::new(120), &g, 1).path;
    let h = GridPath::from_fn(g, 1, |t| vec![(6.0 * t).sin()]).unwrap();
    let ss = StabilitySpec {
        p: 2.5,
        q: 2.0,
        level: 3,
        noise: NoiseSpec {
            brownian_dim: 1,
            jump_measure: atoms(),
            deterministic_jump: None,
        },
        n_paths: 12,
        seed: 121,
        threads: k,
    };

    let (c, rp, shifts, mut sk) = skorokhod_setup(64, 12, &[2, 3]);
    sk.threads = k;

    let fm = filter_preset("correlated-jump-diffusion", &none()).unwrap();
    let base = TimeGrid64::uniform(1.0, 32).unwrap();
    let obs = simulate_signal_and_observation(&fm, &RngStream::new(122), &base).unwrap();
    let mut fo = opts(300, 2);
    fo.threads = k;

    let bundle = Bundle {
        consistency: consistency_check(&mjd, &[1.0], &cs).unwrap(),
        stability: stability_table(&bn, &[0.2], &x, &h, &[0.1, 0.05], &ss).unwrap(),
        skorokhod: skorokhod_convergence_experiment(&c, &[0.0], &rp, &shifts, &sk).unwrap(),
        brownian_max: brownian_max_exp_moment(1.0, 1.0, 8, 500, 123, k).unwrap(),
        rough_integral: rough_integral_exp_moment(1.0, 1.0, &[16, 32], 2.5, 1.0, 100, 124, k).unwrap(),
        robust: robust_filter(&fm, &obs, &fo, &RngStream::new(125)).unwrap(),
        oracle: oracle_filter(&fm, &obs, &fo, &RngStream::new(126)).unwrap(),
        measure_change: measure_change_check(&fm, &base, 10, &opts(8, 1), &RngStream::new(127)).unwrap(),
        robustness: robustness_setup(100, k),
    };
    serde_json::to_string(&bundle).unwrap()
}

fn c12_determinism() -> Outcome {
    let runs: Vec<String> = [1usize, 4, 8].iter().map(|&k| all_experiments(k)).collect();
    let same = runs[0] == runs[1] && runs[0] == runs[2];
    outcome(same, format!("{} bytes of reports, identical at 1/4/8 threads: {}", runs[0].len(), same))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("Chen relation of the Ito lift", c1_chen),
        ("p-variation against enumeration", c2_pvar),
        ("rough integral identities", c3_integral),
        ("solver strong convergence", c4_convergence),
        ("rough vs classical consistency", c5_consistency),
        ("Skorokhod continuity", c6_skorokhod),
        ("N_alpha lemma suite", c7_lemmas),
        ("exponential moments", c8_moments),
        ("filter identities", c9_filter_identities),
        ("robust vs oracle filter", c10_routes),
        ("filter robustness tables", c11_robustness),
        ("thread-count determinism", c12_determinism),
    ];
    let only: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let n = i + 1;
        if !only.is_empty() && !only.contains(&n) {
            continue;
        }
        let t = Instant::now();
        let o = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {}", msg))
        });
        if !o.pass {
            failed += 1;
        }
        println!(
            "criterion {:>2} {} {:<32} [{:>6.1}s] {}",
            n,
            if o.pass { "PASS" } else { "FAIL" },
            name,
            t.elapsed().as_secs_f64(),
            o.detail
        );
    }
    if failed > 0 {
        println!("{} criteria failed", failed);
        std::process::exit(1);
    }
}
