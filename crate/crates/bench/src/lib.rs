//! Shared fixtures for the criterion benchmarks.

use growpop_core::montecarlo::run_rng;
use rand::Rng;

/// `n` agents in `dim` dimensions, uniform on `[-3, 3]^dim`, flattened row-major.
pub fn scattered_opinions(n: usize, dim: usize, seed: u64) -> Vec<f64> {
    let mut rng = run_rng(seed);
    (0..n * dim).map(|_| rng.random_range(-3.0..3.0)).collect()
}

/// Asymptotic injection times `(ln k)^(1/alpha)` for `k = 1..=n`.
pub fn log_times(alpha: f64, n: usize) -> Vec<f64> {
    growpop_core::analysis::asymptotic_times(alpha, n).expect("alpha > 0")
}
