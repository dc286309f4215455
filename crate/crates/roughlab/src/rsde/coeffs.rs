use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// `(t, y, out)`; writes a flattened value into `out`.
pub type Field = Arc<dyn Fn(f64, &[f64], &mut [f64]) + Send + Sync>;
/// `(t, y, u, out)` for jump coefficients.
pub type JumpField = Arc<dyn Fn(f64, &[f64], &[f64], &mut [f64]) + Send + Sync>;

/// User-declared regularity bounds, carried into reports.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CoefficientBounds {
    pub drift_c1: f64,
    pub diffusion_c1: f64,
    pub rough_c3: f64,
}

/// Coefficients of `dY = b dt + σ dM + ∫ g dÑ + f d𝐗` for `Y ∈ R^m`, `X ∈ R^d`, `M ∈ R^k`.
///
/// Layouts: `σ` is `m x k`, `f` is `m x d`, both row-major. The Jacobian of `f` stores
/// `∂_j f^{i,b}` at `(i * d + b) * m + j`; the Hessian stores `∂_l ∂_j f^{i,b}` at
/// `((i * d + b) * m + j) * m + l`. A missing field is identically zero.
#[derive(Clone)]
pub struct CoefficientSet {
    pub dim: usize,
    pub driver_dim: usize,
    pub noise_dim: usize,
    pub drift: Option<Field>,
    pub diffusion: Option<Field>,
    pub rough: Option<Field>,
    pub rough_jacobian: Option<Field>,
    pub rough_hessian: Option<Field>,
    pub jump: Option<JumpField>,
    pub bounds: CoefficientBounds,
}

impl std::fmt::Debug for CoefficientSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CoefficientSet")
            .field("dim", &self.dim)
            .field("driver_dim", &self.driver_dim)
            .field("noise_dim", &self.noise_dim)
            .field("drift", &self.drift.is_some())
            .field("diffusion", &self.diffusion.is_some())
            .field("rough", &self.rough.is_some())
            .field("jump", &self.jump.is_some())
            .finish()
    }
}

fn central_difference(field: &Field, t: f64, y: &[f64], out_len: usize, h: f64) -> Vec<f64> {
    let m = y.len();
    let mut jac = vec![0.0; out_len * m];
    let mut yp = y.to_vec();
    let mut ym = y.to_vec();
    let mut fp = vec![0.0; out_len];
    let mut fm = vec![0.0; out_len];
    for j in 0..m {
        let step = h * (1.0 + y[j].abs());
        yp[j] = y[j] + step;
        ym[j] = y[j] - step;
        field(t, &yp, &mut fp);
        field(t, &ym, &mut fm);
        for r in 0..out_len {
            jac[r * m + j] = (fp[r] - fm[r]) / (2.0 * step);
        }
        yp[j] = y[j];
        ym[j] = y[j];
    }
    jac
}

impl CoefficientSet {
    pub fn new(dim: usize, driver_dim: usize, noise_dim: usize) -> Self {
        Self {
            dim,
            driver_dim,
            noise_dim,
            drift: None,
            diffusion: None,
            rough: None,
            rough_jacobian: None,
            rough_hessian: None,
            jump: None,
            bounds: CoefficientBounds::default(),
        }
    }

    pub fn with_drift(mut self, f: Field) -> Self {
        self.drift = Some(f);
        self
    }

    pub fn with_diffusion(mut self, f: Field) -> Self {
        self.diffusion = Some(f);
        self
    }

    pub fn with_rough(mut self, f: Field, jacobian: Field) -> Self {
        self.rough = Some(f);
        self.rough_jacobian = Some(jacobian);
        self
    }

    pub fn with_rough_hessian(mut self, h: Field) -> Self {
        self.rough_hessian = Some(h);
        self
    }

    pub fn with_jump(mut self, g: JumpField) -> Self {
        self.jump = Some(g);
        self
    }

    pub fn with_bounds(mut self, bounds: CoefficientBounds) -> Self {
        self.bounds = bounds;
        self
    }

    /// Rough coefficient whose Jacobian is taken by central differences with relative step `h`.
    pub fn with_rough_fd(mut self, f: Field, h: f64) -> Self {
        let out_len = self.dim * self.driver_dim;
        let g = f.clone();
        let jac: Field = Arc::new(move |t, y, out| {
            out.copy_from_slice(&central_difference(&g, t, y, out_len, h));
        });
        self.rough = Some(f);
        self.rough_jacobian = Some(jac);
        self
    }

    /// Largest discrepancy between declared derivatives and central differences of the
    /// functions they belong to, over the given points.
    pub fn derivative_discrepancy(&self, t: f64, points: &[Vec<f64>], h: f64) -> Result<f64> {
        let m = self.dim;
        let d = self.driver_dim;
        let mut worst: f64 = 0.0;
        for y in points {
            if y.len() != m {
                return Err(invalid("points", "wrong state dimension"));
            }
            if let (Some(f), Some(jac)) = (&self.rough, &self.rough_jacobian) {
                let fd = central_difference(f, t, y, m * d, h);
                let mut an = vec![0.0; m * d * m];
                jac(t, y, &mut an);
                for (a, b) in an.iter().zip(&fd) {
                    worst = worst.max((a - b).abs() / (1.0 + a.abs()));
                }
                if let Some(hess) = &self.rough_hessian {
                    let fd2 = central_difference(jac, t, y, m * d * m, h);
                    let mut an2 = vec![0.0; m * d * m * m];
                    hess(t, y, &mut an2);
                    for (a, b) in an2.iter().zip(&fd2) {
                        worst = worst.max((a - b).abs() / (1.0 + a.abs()));
                    }
                }
            }
        }
        Ok(worst)
    }

    /// Scalar `dY = a Y dt + s Y dM + c Y dX + ∫ u Y dÑ(du)`; any zero rate drops the term.
    pub fn linear_scalar(a: f64, s: f64, c: f64, jumps: bool) -> Self {
        let mut set = Self::new(1, 1, 1);
        if a != 0.0 {
            set = set.with_drift(Arc::new(move |_, y, out| out[0] = a * y[0]));
        }
        if s != 0.0 {
            set = set.with_diffusion(Arc::new(move |_, y, out| out[0] = s * y[0]));
        }
        if c != 0.0 {
            set = set
                .with_rough(
                    Arc::new(move |_, y, out| out[0] = c * y[0]),
                    Arc::new(move |_, _, out| out[0] = c),
                )
                .with_rough_hessian(Arc::new(|_, _, out| out[0] = 0.0));
        }
        if jumps {
            set = set.with_jump(Arc::new(|_, y, u, out| out[0] = u[0] * y[0]));
        }
        set.bounds = CoefficientBounds {
            drift_c1: a.abs(),
            diffusion_c1: s.abs(),
            rough_c3: c.abs(),
        };
        set
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn declared_derivatives_match_differences() {
        let set = CoefficientSet::new(2, 1, 0).with_rough(
            Arc::new(|_, y, out| {
                out[0] = y[0].sin() * y[1];
                out[1] = y[1].tanh();
            }),
            Arc::new(|_, y, out| {
                out[0] = y[0].cos() * y[1];
                out[1] = y[0].sin();
                out[2] = 0.0;
                out[3] = 1.0 - y[1].tanh().powi(2);
            }),
        );
        let pts = vec![vec![0.3, -1.2], vec![2.0, 0.5], vec![-0.7, 0.0]];
        assert!(set.derivative_discrepancy(0.0, &pts, 1e-5).unwrap() < 1e-8);

        let wrong = set.clone().with_rough(
            set.rough.clone().unwrap(),
            Arc::new(|_, _, out| out.iter_mut().for_each(|o| *o = 0.0)),
        );
        assert!(wrong.derivative_discrepancy(0.0, &pts, 1e-5).unwrap() > 0.1);
    }

    #[test]
    fn fd_jacobian_is_accurate() {
        let set = CoefficientSet::new(1, 2, 0).with_rough_fd(
            Arc::new(|_, y, out| {
                out[0] = y[0].cos();
                out[1] = y[0] * y[0];
            }),
            1e-5,
        );
        let mut j = vec![0.0; 2];
        (set.rough_jacobian.as_ref().unwrap())(0.0, &[0.4], &mut j);
        assert!((j[0] + 0.4f64.sin()).abs() < 1e-9);
        assert!((j[1] - 0.8).abs() < 1e-9);
    }
}
