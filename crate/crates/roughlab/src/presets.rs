//! Named coefficient sets and filter models with numeric parameter overrides.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::filter::{FilterModel, InitialLaw, TestFunction};
use crate::noise::MarkMeasure;
use crate::rsde::{CoefficientBounds, CoefficientSet};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PresetKind {
    Rsde,
    Filter,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PresetInfo {
    pub name: &'static str,
    pub kind: PresetKind,
    pub description: &'static str,
    /// Parameter names with their defaults.
    pub params: &'static [(&'static str, f64)],
}

const PRESETS: &[PresetInfo] = &[
    PresetInfo {
        name: "multiplicative-jump-diffusion",
        kind: PresetKind::Rsde,
        description: "dY = aY dt + sY dM + cY dX + ∫ uY dÑ",
        params: &[("a", -0.3), ("s", 0.2), ("c", 0.7)],
    },
    PresetInfo {
        name: "geometric",
        kind: PresetKind::Rsde,
        description: "dY = mu Y dt + sigma Y dX",
        params: &[("mu", 0.1), ("sigma", 0.4)],
    },
    PresetInfo {
        name: "bounded-nonlinear",
        kind: PresetKind::Rsde,
        description: "dY = -kY dt + s cos(Y) dM + f cos(Y) dX + ∫ u(1 + g sin Y) dÑ",
        params: &[("k", 0.5), ("s", 0.3), ("f", 0.5), ("g", 0.5)],
    },
    PresetInfo {
        name: "additive",
        kind: PresetKind::Rsde,
        description: "dY = aY dt + s dM + c dX + ∫ u dÑ",
        params: &[("a", -0.3), ("s", 0.2), ("c", 0.7)],
    },
    PresetInfo {
        name: "no-rough",
        kind: PresetKind::Rsde,
        description: "dY = aY dt + sY dM + ∫ uY dÑ, no rough driver term",
        params: &[("a", -0.3), ("s", 0.2)],
    },
    PresetInfo {
        name: "kalman-linear",
        kind: PresetKind::Filter,
        description: "dX = aX dt + s dB, dY = cX dt + dW, F(x) = x; unbounded, outside the assumptions",
        params: &[("a", -0.5), ("s", 0.5), ("c", 1.0), ("m0", 0.0), ("sd0", 1.0)],
    },
    PresetInfo {
        name: "degenerate",
        kind: PresetKind::Filter,
        description: "kappa = 0 and b2 = 0, so the likelihood is identically one",
        params: &[("drift", 0.5), ("sigma0", 0.4), ("sigma1", 0.3), ("sigma2", 0.5)],
    },
    PresetInfo {
        name: "correlated-diffusion",
        kind: PresetKind::Filter,
        description: "scalar signal with correlated observation noise, no jumps, F = tanh(x)",
        params: &[("drift", 0.5), ("sigma0", 0.4), ("sigma1", 0.3), ("c", 1.0), ("sigma2", 0.5)],
    },
    PresetInfo {
        name: "correlated-jump-diffusion",
        kind: PresetKind::Filter,
        description: "correlated-diffusion plus observation jumps (3 atoms) with state intensity and signal jumps",
        params: &[
            ("drift", 0.5),
            ("sigma0", 0.4),
            ("sigma1", 0.3),
            ("c", 1.0),
            ("sigma2", 0.5),
            ("h2", 0.25),
            ("kappa", 0.6),
        ],
    },
];

pub fn list_presets() -> &'static [PresetInfo] {
    PRESETS
}

fn find(name: &str, kind: PresetKind) -> Result<&'static PresetInfo> {
    PRESETS
        .iter()
        .find(|p| p.name == name && p.kind == kind)
        .ok_or_else(|| Error::UnsupportedMode(format!("unknown {:?} preset `{}`", kind, name)))
}

/// Defaults of `info` overridden by `overrides`; unknown names are an error.
fn resolve(info: &PresetInfo, overrides: &BTreeMap<String, f64>) -> Result<BTreeMap<&'static str, f64>> {
    let mut out: BTreeMap<&'static str, f64> = info.params.iter().cloned().collect();
    for (k, v) in overrides {
        match info.params.iter().find(|(n, _)| n == k) {
            Some((n, _)) => {
                out.insert(n, *v);
            }
            None => {
                return Err(invalid(
                    "params",
                    format!("preset `{}` has no parameter `{}`", info.name, k),
                ))
            }
        }
    }
    Ok(out)
}

pub fn rsde_preset(name: &str, overrides: &BTreeMap<String, f64>) -> Result<CoefficientSet> {
    let info = find(name, PresetKind::Rsde)?;
    let p = resolve(info, overrides)?;
    Ok(match name {
        "multiplicative-jump-diffusion" => CoefficientSet::linear_scalar(p["a"], p["s"], p["c"], true),
        "geometric" => CoefficientSet::linear_scalar(p["mu"], 0.0, p["sigma"], false),
        "bounded-nonlinear" => {
            let (k, s, f, g) = (p["k"], p["s"], p["f"], p["g"]);
            CoefficientSet::new(1, 1, 1)
                .with_drift(Arc::new(move |_, y, o| o[0] = -k * y[0]))
                .with_diffusion(Arc::new(move |_, y, o| o[0] = s * y[0].cos()))
                .with_rough(
                    Arc::new(move |_, y, o| o[0] = f * y[0].cos()),
                    Arc::new(move |_, y, o| o[0] = -f * y[0].sin()),
                )
                .with_rough_hessian(Arc::new(move |_, y, o| o[0] = -f * y[0].cos()))
                .with_jump(Arc::new(move |_, y, u, o| o[0] = u[0] * (1.0 + g * y[0].sin())))
                .with_bounds(CoefficientBounds {
                    drift_c1: k,
                    diffusion_c1: s.abs(),
                    rough_c3: f.abs(),
                })
        }
        "additive" => {
            let (a, s, c) = (p["a"], p["s"], p["c"]);
            CoefficientSet::new(1, 1, 1)
                .with_drift(Arc::new(move |_, y, o| o[0] = a * y[0]))
                .with_diffusion(Arc::new(move |_, _, o| o[0] = s))
                .with_rough(Arc::new(move |_, _, o| o[0] = c), Arc::new(|_, _, o| o[0] = 0.0))
                .with_rough_hessian(Arc::new(|_, _, o| o[0] = 0.0))
                .with_jump(Arc::new(|_, _, u, o| o[0] = u[0]))
        }
        "no-rough" => CoefficientSet::linear_scalar(p["a"], p["s"], 0.0, true),
        _ => unreachable!("registered preset without a builder"),
    })
}

/// `L tanh(x / L)` with `L = 4`: linear near the origin, bounded with bounded derivatives.
fn sat(x: f64) -> f64 {
    4.0 * (x / 4.0).tanh()
}

pub fn filter_preset(name: &str, overrides: &BTreeMap<String, f64>) -> Result<FilterModel> {
    let info = find(name, PresetKind::Filter)?;
    let p = resolve(info, overrides)?;
    let mut m = FilterModel::new(name, 1, 1, 1);
    match name {
        "kalman-linear" => {
            let (a, s, c) = (p["a"], p["s"], p["c"]);
            m.b1 = Arc::new(move |_, x, _, o| o[0] = a * x[0]);
            m.sigma0 = Arc::new(move |_, _, _, o| o[0] = s);
            m.b2 = Arc::new(move |_, x, _, o| o[0] = c * x[0]);
            m.x0 = InitialLaw::Gaussian {
                mean: vec![p["m0"]],
                std: vec![p["sd0"]],
            };
            m.test_fn = TestFunction::coordinate(0);
            m.within_assumptions = false;
        }
        "degenerate" | "correlated-diffusion" | "correlated-jump-diffusion" => {
            let (k, s0, s1, s2) = (p["drift"], p["sigma0"], p["sigma1"], p["sigma2"]);
            if s2 == 0.0 {
                return Err(invalid("sigma2", "must be nonzero"));
            }
            m.b1 = Arc::new(move |_, x, _, o| o[0] = -k * sat(x[0]));
            m.sigma0 = Arc::new(move |_, _, _, o| o[0] = s0);
            m.sigma1 = Arc::new(move |_, _, _, o| o[0] = s1);
            m.sigma2 = Arc::new(move |_, _, o| o[0] = s2);
            m.sigma2_inv_bound = 1.0 / s2.abs();
            m.x0 = InitialLaw::Gaussian {
                mean: vec![0.0],
                std: vec![0.5],
            };
            m.test_fn = TestFunction::tanh_coordinate(0, 1.0);
            if name != "degenerate" {
                let c = p["c"];
                m.b2 = Arc::new(move |_, x, _, o| o[0] = c * sat(x[0]));
            }
            if name != "correlated-diffusion" {
                m.f1 = Some(Arc::new(|_, _, _, u, o| o[0] = u[0]));
                m.h3 = Arc::new(|_, _, o| o[0] = 1.0);
                m.g3 = Arc::new(|_, u, o| o[0] = u[0]);
                m.g2 = Arc::new(|_, u, o| o[0] = u[0]);
            }
            if name == "degenerate" {
                m.nu1 = MarkMeasure::scalar(&[(0.3, 0.5)])?;
                m.nu2 = MarkMeasure::scalar(&[(-0.4, 0.5), (0.6, 0.5)])?;
                m.h2 = Arc::new(|_, _, _, o| o[0] = 0.2);
            }
            if name == "correlated-jump-diffusion" {
                let (h2, kappa) = (p["h2"], p["kappa"]);
                m.nu1 = MarkMeasure::scalar(&[(-0.3, 0.3), (0.3, 0.3)])?;
                m.nu2 = MarkMeasure::scalar(&[(-0.5, 0.6), (0.3, 0.8), (0.8, 0.4)])?;
                m.h2 = Arc::new(move |_, _, _, o| o[0] = h2);
                m.kappa = Arc::new(move |_, x| kappa * x[0].tanh());
                m.gamma = Arc::new(|_, _| 1.0);
                m.kappa_bound = kappa.abs();
            }
        }
        _ => unreachable!("registered preset without a builder"),
    }
    m.validate()?;
    Ok(m)
}
