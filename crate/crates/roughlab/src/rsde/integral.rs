use crate::error::{Error, Result};
use crate::roughpath::Window;
use crate::{GridPath64, RoughPath64};

/// `∫ Y d𝐗` over `window` as the compensated Riemann sum `Σ (Y_u δX_{u,v} + Y'_u 𝕏_{u,v})`.
///
/// `y` has dimension `m * d` (row-major `m x d`) and `y_prime` has `m * d * d`, where
/// the entry `[i][a][b]` multiplies `𝕏^{a,b}`. The result is zero before the window and
/// frozen after it.
pub fn rough_stochastic_integral(
    y: &GridPath64,
    y_prime: &GridPath64,
    rp: &RoughPath64,
    window: Window,
) -> Result<GridPath64> {
    let d = rp.dim();
    if y.grid() != rp.grid() || y_prime.grid() != rp.grid() {
        return Err(Error::GridMismatch("integrand and driver grids differ".into()));
    }
    if y.dim() % d != 0 || y_prime.dim() != y.dim() * d {
        return Err(Error::GridMismatch(format!(
            "integrand dimensions {} and {} do not fit a driver of dimension {}",
            y.dim(),
            y_prime.dim(),
            d
        )));
    }
    window.check(rp.len())?;
    let m = y.dim() / d;
    let n = rp.len();
    let mut values = vec![0.0; n * m];
    let mut dx = vec![0.0; d];
    for k in 0..n - 1 {
        let (prev, next) = values.split_at_mut((k + 1) * m);
        let acc = &prev[k * m..];
        let out = &mut next[..m];
        out.copy_from_slice(acc);
        if k < window.start || k >= window.end {
            continue;
        }
        rp.path().increment_into(k, k + 1, &mut dx);
        let yk = y.value(k);
        let ypk = y_prime.value(k);
        let s = rp.cell_level2(k);
        for i in 0..m {
            let mut v = 0.0;
            for b in 0..d {
                v += yk[i * d + b] * dx[b];
            }
            for ab in 0..d * d {
                v += ypk[i * d * d + ab] * s[ab];
            }
            out[i] += v;
        }
    }
    GridPath64::new(rp.grid().clone(), m, values)
}
