use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::noise::{MarkMeasure, RngStream};
use crate::rsde::{CoefficientSet, Field, JumpField};

/// `(t, x, y, out)`.
pub type XyField = Arc<dyn Fn(f64, &[f64], &[f64], &mut [f64]) + Send + Sync>;
/// `(t, y, out)`.
pub type YField = Arc<dyn Fn(f64, &[f64], &mut [f64]) + Send + Sync>;
/// `(t, u, out)`.
pub type MarkField = Arc<dyn Fn(f64, &[f64], &mut [f64]) + Send + Sync>;
/// `(t, x, y, u, out)`.
pub type XyJumpField = Arc<dyn Fn(f64, &[f64], &[f64], &[f64], &mut [f64]) + Send + Sync>;
/// `(t, x) -> κ`.
pub type KappaField = Arc<dyn Fn(f64, &[f64]) -> f64 + Send + Sync>;
/// `(t, u) -> γ`.
pub type GammaField = Arc<dyn Fn(f64, &[f64]) -> f64 + Send + Sync>;

/// Law of `X_0`; `Y_0` is observed and fixed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum InitialLaw {
    Point(Vec<f64>),
    /// Independent coordinates.
    Gaussian { mean: Vec<f64>, std: Vec<f64> },
}

impl InitialLaw {
    pub fn dim(&self) -> usize {
        match self {
            Self::Point(x) => x.len(),
            Self::Gaussian { mean, .. } => mean.len(),
        }
    }

    pub fn sample(&self, stream: &RngStream) -> Vec<f64> {
        match self {
            Self::Point(x) => x.clone(),
            Self::Gaussian { mean, std } => {
                let mut rng = stream.rng();
                mean.iter()
                    .zip(std)
                    .map(|(m, s)| {
                        let z: f64 = rng.sample(StandardNormal);
                        m + s * z
                    })
                    .collect()
            }
        }
    }
}

/// The functional `F(x, y)` whose conditional expectation is estimated.
#[derive(Clone)]
pub struct TestFunction {
    pub name: String,
    pub func: Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>,
    /// `‖F‖_∞`, infinite for unbounded functionals.
    pub sup_norm: f64,
    pub lipschitz: f64,
}

impl fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TestFunction")
            .field("name", &self.name)
            .field("sup_norm", &self.sup_norm)
            .field("lipschitz", &self.lipschitz)
            .finish()
    }
}

impl TestFunction {
    pub fn one() -> Self {
        Self {
            name: "one".into(),
            func: Arc::new(|_, _| 1.0),
            sup_norm: 1.0,
            lipschitz: 0.0,
        }
    }

    /// `x_i`, unbounded.
    pub fn coordinate(i: usize) -> Self {
        Self {
            name: format!("x{}", i),
            func: Arc::new(move |x, _| x[i]),
            sup_norm: f64::INFINITY,
            lipschitz: 1.0,
        }
    }

    /// `tanh(x_i / scale)`.
    pub fn tanh_coordinate(i: usize, scale: f64) -> Self {
        Self {
            name: format!("tanh(x{}/{})", i, scale),
            func: Arc::new(move |x, _| (x[i] / scale).tanh()),
            sup_norm: 1.0,
            lipschitz: 1.0 / scale,
        }
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        (self.func)(x, y)
    }
}

/// Signal-observation model with factorized jump coefficients and `log λ = κ γ`.
///
/// Matrix-valued fields fill row-major buffers: `sigma0` is `dx x db`, `sigma1` is
/// `dx x dy`, `sigma2` is `dy x dy`, `h2` is `dx x k2`, `h3` is `dy x k3`.
#[derive(Clone)]
pub struct FilterModel {
    pub name: String,
    pub dx: usize,
    pub dy: usize,
    pub db: usize,
    pub k2: usize,
    pub k3: usize,
    pub b1: XyField,
    pub b2: XyField,
    pub sigma0: XyField,
    pub sigma1: XyField,
    pub sigma2: YField,
    pub sigma2_inv_bound: f64,
    pub f1: Option<XyJumpField>,
    pub nu1: MarkMeasure,
    pub h2: XyField,
    pub g2: MarkField,
    pub h3: YField,
    pub g3: MarkField,
    pub kappa: KappaField,
    pub gamma: GammaField,
    /// `sup |κ|`; with the largest `|γ|` over the atoms of `nu2` it bounds `λ`.
    pub kappa_bound: f64,
    pub nu2: MarkMeasure,
    pub x0: InitialLaw,
    pub y0: Vec<f64>,
    pub test_fn: TestFunction,
    /// False for the unguarded linear-Gaussian mode.
    pub within_assumptions: bool,
    /// `f3` independent of `y` and `σ2` constant, so observation jumps can be split off.
    pub additive_observation: bool,
}

impl fmt::Debug for FilterModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FilterModel")
            .field("name", &self.name)
            .field("dims", &(self.dx, self.dy, self.db, self.k2, self.k3))
            .field("nu1", &self.nu1)
            .field("nu2", &self.nu2)
            .field("kappa_bound", &self.kappa_bound)
            .field("x0", &self.x0)
            .field("y0", &self.y0)
            .field("test_fn", &self.test_fn)
            .field("within_assumptions", &self.within_assumptions)
            .finish()
    }
}

fn zero_xy() -> XyField {
    Arc::new(|_, _, _, out| out.fill(0.0))
}

impl FilterModel {
    /// All coefficients zero except `σ2 = Id`; no jumps; `X_0 = 0`, `Y_0 = 0`, `F = 1`.
    pub fn new(name: impl Into<String>, dx: usize, dy: usize, db: usize) -> Self {
        Self {
            name: name.into(),
            dx,
            dy,
            db,
            k2: 1,
            k3: 1,
            b1: zero_xy(),
            b2: zero_xy(),
            sigma0: zero_xy(),
            sigma1: zero_xy(),
            sigma2: Arc::new(move |_, _, out| {
                out.fill(0.0);
                for i in 0..dy {
                    out[i * dy + i] = 1.0;
                }
            }),
            sigma2_inv_bound: 1.0,
            f1: None,
            nu1: MarkMeasure::empty(),
            h2: zero_xy(),
            g2: Arc::new(|_, _, out| out.fill(0.0)),
            h3: Arc::new(|_, _, out| out.fill(0.0)),
            g3: Arc::new(|_, _, out| out.fill(0.0)),
            kappa: Arc::new(|_, _| 0.0),
            gamma: Arc::new(|_, _| 0.0),
            kappa_bound: 0.0,
            nu2: MarkMeasure::empty(),
            x0: InitialLaw::Point(vec![0.0; dx]),
            y0: vec![0.0; dy],
            test_fn: TestFunction::one(),
            within_assumptions: true,
            additive_observation: true,
        }
    }

    pub fn with_test_fn(mut self, f: TestFunction) -> Self {
        self.test_fn = f;
        self
    }

    /// Driver dimension `dy + k2 + k3 + 1` of `G`.
    pub fn driver_dim(&self) -> usize {
        self.dy + self.k2 + self.k3 + 1
    }

    /// Dimension of the augmented particle state `(X, Y, I¹, I²)`.
    pub fn state_dim(&self) -> usize {
        self.dx + self.dy + 2
    }

    pub fn validate(&self) -> Result<()> {
        if self.dx == 0 || self.dy == 0 {
            return Err(invalid("model", "signal and observation need positive dimension"));
        }
        if self.x0.dim() != self.dx {
            return Err(invalid("x0", format!("expected dimension {}", self.dx)));
        }
        if self.y0.len() != self.dy {
            return Err(invalid("y0", format!("expected dimension {}", self.dy)));
        }
        if self.nu2.total_mass() > 0.0 && self.nu2.mark_dim() == 0 {
            return Err(invalid("nu2", "atoms need marks"));
        }
        if !(self.kappa_bound >= 0.0) || !(self.sigma2_inv_bound > 0.0) {
            return Err(invalid("model", "bounds must be nonnegative"));
        }
        Ok(())
    }

    pub fn lambda(&self, t: f64, x: &[f64], u: &[f64]) -> f64 {
        ((self.kappa)(t, x) * (self.gamma)(t, u)).exp()
    }

    /// `(λ_min, λ_max)` from `kappa_bound` and the atoms of `nu2` at `t = 0`.
    pub fn lambda_bounds(&self) -> (f64, f64) {
        let g = self
            .nu2
            .atoms
            .iter()
            .map(|a| (self.gamma)(0.0, &a.mark).abs())
            .fold(0.0, f64::max);
        let e = self.kappa_bound * g;
        ((-e).exp(), e.exp())
    }

    /// `σ2(t, y)^{-1} v`.
    fn solve_sigma2(&self, t: f64, y: &[f64], v: &mut [f64]) {
        let dy = self.dy;
        let mut s = vec![0.0; dy * dy];
        (self.sigma2)(t, y, &mut s);
        if dy == 1 {
            v[0] /= s[0];
            return;
        }
        let m = DMatrix::from_row_slice(dy, dy, &s);
        let rhs = DVector::from_column_slice(v);
        match m.lu().solve(&rhs) {
            Some(sol) => v.copy_from_slice(sol.as_slice()),
            None => v.fill(f64::NAN),
        }
    }

    /// `h(t, x, y) = σ2^{-1} (b2 + h3 ∫ g3 (1 - λ) dν2)` with the exact atom sum.
    pub fn h(&self, t: f64, x: &[f64], y: &[f64], out: &mut [f64]) {
        let (dy, k3) = (self.dy, self.k3);
        (self.b2)(t, x, y, out);
        if self.nu2.total_mass() > 0.0 {
            let mut acc = vec![0.0; k3];
            let mut g = vec![0.0; k3];
            for a in &self.nu2.atoms {
                let c = a.weight * (1.0 - self.lambda(t, x, &a.mark));
                if c == 0.0 {
                    continue;
                }
                (self.g3)(t, &a.mark, &mut g);
                for j in 0..k3 {
                    acc[j] += c * g[j];
                }
            }
            if acc.iter().any(|v| *v != 0.0) {
                let mut h3 = vec![0.0; dy * k3];
                (self.h3)(t, y, &mut h3);
                for i in 0..dy {
                    for j in 0..k3 {
                        out[i] += h3[i * k3 + j] * acc[j];
                    }
                }
            }
        }
        self.solve_sigma2(t, y, out);
    }

    /// `b̃1 = b1 - σ1 h - h2 ∫ g2 (1 - λ) dν2`.
    pub fn b1_tilde(&self, t: f64, x: &[f64], y: &[f64], out: &mut [f64]) {
        let (dx, dy, k2) = (self.dx, self.dy, self.k2);
        (self.b1)(t, x, y, out);
        let mut h = vec![0.0; dy];
        self.h(t, x, y, &mut h);
        let mut s1 = vec![0.0; dx * dy];
        (self.sigma1)(t, x, y, &mut s1);
        for i in 0..dx {
            for j in 0..dy {
                out[i] -= s1[i * dy + j] * h[j];
            }
        }
        if self.nu2.total_mass() > 0.0 {
            let mut acc = vec![0.0; k2];
            let mut g = vec![0.0; k2];
            for a in &self.nu2.atoms {
                let c = a.weight * (1.0 - self.lambda(t, x, &a.mark));
                if c == 0.0 {
                    continue;
                }
                (self.g2)(t, &a.mark, &mut g);
                for j in 0..k2 {
                    acc[j] += c * g[j];
                }
            }
            if acc.iter().any(|v| *v != 0.0) {
                let mut h2 = vec![0.0; dx * k2];
                (self.h2)(t, x, y, &mut h2);
                for i in 0..dx {
                    for j in 0..k2 {
                        out[i] -= h2[i * k2 + j] * acc[j];
                    }
                }
            }
        }
    }

    /// `∫ (1 - λ + log λ) dν2`, the drift of `I²`.
    pub fn compensator_rate(&self, t: f64, x: &[f64]) -> f64 {
        let mut acc = 0.0;
        for a in &self.nu2.atoms {
            let log_l = (self.kappa)(t, x) * (self.gamma)(t, &a.mark);
            let v = 1.0 - log_l.exp() + log_l;
            if v != 0.0 {
                acc += a.weight * v;
            }
        }
        acc
    }

    /// `G`-coefficient rows of the observation: `(σ2, 0, h3, 0)`, `dy x driver_dim`.
    pub(crate) fn observation_rows(&self, t: f64, y: &[f64], out: &mut [f64]) {
        let (dy, k2, k3) = (self.dy, self.k2, self.k3);
        let dd = self.driver_dim();
        out.fill(0.0);
        let mut s2 = vec![0.0; dy * dy];
        (self.sigma2)(t, y, &mut s2);
        let mut h3 = vec![0.0; dy * k3];
        (self.h3)(t, y, &mut h3);
        for i in 0..dy {
            for j in 0..dy {
                out[i * dd + j] = s2[i * dy + j];
            }
            for j in 0..k3 {
                out[i * dd + dy + k2 + j] = h3[i * k3 + j];
            }
        }
    }

    /// Coefficients of `dY = (σ2, 0, h3, 0) dG` alone.
    pub fn observation_coefficients(&self) -> CoefficientSet {
        let me = Arc::new(self.clone());
        let f: Field = Arc::new(move |t, y, out| me.observation_rows(t, y, out));
        CoefficientSet::new(self.dy, self.driver_dim(), 0).with_rough_fd(f, FD_STEP)
    }

    /// Coefficients of the augmented particle system in the state `(X, Y, I¹, I²)`.
    ///
    /// `I¹` collects `∫ H dG - ½ ∫ |h|² ds` with `H = (h, 0, 0, κ)`, `I²` collects
    /// `∫∫ (1 - λ + log λ) dν2 ds`; their sum is the log-likelihood `I`.
    pub fn particle_coefficients(&self) -> CoefficientSet {
        let (dx, dy, db, k2) = (self.dx, self.dy, self.db, self.k2);
        let n = self.state_dim();
        let dd = self.driver_dim();
        let me = Arc::new(self.clone());

        let m = me.clone();
        let drift: Field = Arc::new(move |t, z, out| {
            let (x, y) = (&z[..dx], &z[dx..dx + dy]);
            m.b1_tilde(t, x, y, &mut out[..dx]);
            out[dx..dx + dy].fill(0.0);
            let mut h = vec![0.0; dy];
            m.h(t, x, y, &mut h);
            out[dx + dy] = -0.5 * h.iter().map(|v| v * v).sum::<f64>();
            out[dx + dy + 1] = m.compensator_rate(t, x);
        });

        let m = me.clone();
        let rough: Field = Arc::new(move |t, z, out| {
            let (x, y) = (&z[..dx], &z[dx..dx + dy]);
            out.fill(0.0);
            let mut s1 = vec![0.0; dx * dy];
            (m.sigma1)(t, x, y, &mut s1);
            let mut h2 = vec![0.0; dx * k2];
            (m.h2)(t, x, y, &mut h2);
            for i in 0..dx {
                for j in 0..dy {
                    out[i * dd + j] = s1[i * dy + j];
                }
                for j in 0..k2 {
                    out[i * dd + dy + j] = h2[i * k2 + j];
                }
            }
            m.observation_rows(t, y, &mut out[dx * dd..(dx + dy) * dd]);
            let row = (dx + dy) * dd;
            m.h(t, x, y, &mut out[row..row + dy]);
            out[row + dd - 1] = (m.kappa)(t, x);
        });

        let mut set = CoefficientSet::new(n, dd, db)
            .with_drift(drift)
            .with_rough_fd(rough, FD_STEP);

        if db > 0 {
            let m = me.clone();
            set = set.with_diffusion(Arc::new(move |t, z, out| {
                out.fill(0.0);
                (m.sigma0)(t, &z[..dx], &z[dx..dx + dy], &mut out[..dx * db]);
            }));
        }
        if let Some(f1) = &self.f1 {
            if self.nu1.total_mass() > 0.0 {
                let f1 = f1.clone();
                let jump: JumpField = Arc::new(move |t, z, u, out| {
                    out.fill(0.0);
                    f1(t, &z[..dx], &z[dx..dx + dy], u, &mut out[..dx]);
                });
                set = set.with_jump(jump);
            }
        }
        set
    }

    /// Augmented initial state for a given `X_0`.
    pub fn initial_state(&self, x0: &[f64]) -> Vec<f64> {
        let mut z = Vec::with_capacity(self.state_dim());
        z.extend_from_slice(x0);
        z.extend_from_slice(&self.y0);
        z.extend_from_slice(&[0.0, 0.0]);
        z
    }
}

/// Relative step of the central-difference Jacobians of the filter coefficients.
pub const FD_STEP: f64 = 1e-6;

#[cfg(test)]
mod tests {
    use super::*;

    fn jumpy() -> FilterModel {
        let mut m = FilterModel::new("t", 1, 1, 1);
        m.nu2 = MarkMeasure::scalar(&[(-0.5, 1.0), (0.8, 0.5)]).unwrap();
        m.b2 = Arc::new(|_, x, _, out| out[0] = 0.7 * x[0].tanh());
        m.sigma2 = Arc::new(|_, _, out| out[0] = 0.5);
        m.h3 = Arc::new(|_, _, out| out[0] = 1.0);
        m.g3 = Arc::new(|_, u, out| out[0] = u[0]);
        m.kappa = Arc::new(|_, x| 0.4 * x[0].tanh());
        m.gamma = Arc::new(|_, _| 1.0);
        m.kappa_bound = 0.4;
        m
    }

    #[test]
    fn h_by_hand() {
        let m = jumpy();
        let (x, y) = ([0.9], [0.0]);
        let lam = (0.4 * 0.9f64.tanh()).exp();
        let comp = 1.0 * (-0.5) * (1.0 - lam) + 0.5 * 0.8 * (1.0 - lam);
        let expected = (0.7 * 0.9f64.tanh() + comp) / 0.5;
        let mut h = [0.0];
        m.h(0.0, &x, &y, &mut h);
        assert!((h[0] - expected).abs() < 1e-15);
        let rate = m.compensator_rate(0.0, &x);
        assert!((rate - 1.5 * (1.0 - lam + lam.ln())).abs() < 1e-15);
        assert!(rate <= 0.0);
    }

    #[test]
    fn lambda_bounds_bracket_lambda() {
        let m = jumpy();
        let (lo, hi) = m.lambda_bounds();
        for x in [-5.0, -0.3, 0.0, 2.0, 40.0] {
            let l = m.lambda(0.0, &[x], &[0.8]);
            assert!(lo <= l && l <= hi);
        }
    }

    #[test]
    fn matrix_sigma2_inverse() {
        let mut m = FilterModel::new("t", 1, 2, 1);
        m.sigma2 = Arc::new(|_, _, out| out.copy_from_slice(&[2.0, 1.0, 0.0, 4.0]));
        m.b2 = Arc::new(|_, _, _, out| out.copy_from_slice(&[3.0, 8.0]));
        let mut h = [0.0; 2];
        m.h(0.0, &[0.0], &[0.0, 0.0], &mut h);
        assert!((h[0] - 0.5).abs() < 1e-15 && (h[1] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn augmented_rows() {
        let m = jumpy();
        let c = m.particle_coefficients();
        let (n, d) = (c.dim, c.driver_dim);
        assert_eq!((n, d), (4, 4));
        let mut f = vec![0.0; n * d];
        (c.rough.as_ref().unwrap())(0.0, &[0.9, 0.2, 0.0, 0.0], &mut f);
        let mut h = [0.0];
        m.h(0.0, &[0.9], &[0.2], &mut h);
        assert_eq!(&f[d..2 * d], &[0.5, 0.0, 1.0, 0.0]);
        assert_eq!(f[2 * d], h[0]);
        assert_eq!(f[3 * d - 1], 0.4 * 0.9f64.tanh());
        assert!(f[3 * d..].iter().all(|v| *v == 0.0));
    }
}
