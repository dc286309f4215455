//! Index-ordered parallel map.

use rayon::prelude::*;

use crate::error::{invalid, Result};

/// `f(0), ..., f(n - 1)` evaluated in parallel and returned in index order.
///
/// With `threads = Some(k)` the work runs on a private pool of `k` threads; results
/// never depend on `k` because every item owns its random stream.
pub fn run_indexed<T, F>(n: usize, threads: Option<usize>, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match threads {
        None => Ok((0..n).into_par_iter().map(&f).collect()),
        Some(k) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(k.max(1))
                .build()
                .map_err(|e| invalid("threads", e.to_string()))?;
            Ok(pool.install(|| (0..n).into_par_iter().map(&f).collect()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_kept() {
        let v = run_indexed(100, Some(3), |i| i * i).unwrap();
        assert_eq!(v, (0..100).map(|i| i * i).collect::<Vec<_>>());
    }
}
