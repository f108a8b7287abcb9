//! Monte Carlo engine over sampled edge fields.
//!
//! Trials are keyed by `derive_seed(seed, trial)` and reduced in trial
//! order, so every report is bit-identical for any worker count.

mod coupling;
mod field;
mod martingale;
mod percolation;
mod recurrence;
pub mod rng;

pub use coupling::{coupling_pushforward_test, CouplingTest};
pub use field::{
    cocycle_sum, rn_derivative, sample_field, sample_field_with_cap, EdgeField, FieldSample, LazyField, Translated,
    DEFAULT_VERTEX_CAP,
};
pub use martingale::{martingale_stats, martingale_w, rn_sqrt_mean, MartingaleStats, MeanEstimate};
pub use percolation::{
    block_sum_distribution, find_block_length, gw_survival, gw_survival_to, percolation_report, PercolationOptions,
    PercolationReport,
};
pub use recurrence::{
    ks_family, recurrence_diagnostic, shift_recurrence_diagnostic, RecurrenceDiagnostic, Verdict, DEFAULT_EPSILON,
};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::tree::TreeSpec;

/// Runs `f(trial)` for `0..trials` and returns results in trial order.
/// `workers == 0` uses rayon's default pool size.
pub(crate) fn run_trials<T, F>(trials: usize, workers: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    let mut builder = rayon::ThreadPoolBuilder::new();
    if workers > 0 {
        builder = builder.num_threads(workers);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::ThreadPool(e.to_string()))?;
    pool.install(|| (0..trials as u64).into_par_iter().map(&f).collect())
}

/// Errors with `DepthBudget` when the ball of radius `depth` exceeds the cap.
pub(crate) fn check_budget(spec: &TreeSpec, depth: usize) -> Result<u64> {
    let vertices = spec.ball_size(depth).unwrap_or(u64::MAX);
    if vertices > DEFAULT_VERTEX_CAP {
        return Err(Error::DepthBudget {
            depth,
            vertices,
            cap: DEFAULT_VERTEX_CAP,
        });
    }
    Ok(vertices)
}

/// Streams the cocycle sums sphere by sphere: `visit(n, S|Σ_n)` in local
/// index order, where `step(index)` returns `X` summed over both
/// orientations of the edge above the vertex with canonical `index`.
pub(crate) fn for_each_sphere(
    spec: &TreeSpec,
    depth: usize,
    mut step: impl FnMut(u64) -> f64,
    mut visit: impl FnMut(usize, &[f64]),
) -> Result<()> {
    check_budget(spec, depth)?;
    let b = spec.branching() as usize;
    let mut prev = vec![0.0];
    visit(0, &prev);
    for n in 1..=depth {
        let offset = spec.depth_offset(n)?;
        let size = spec.sphere_size(n)? as usize;
        let cur: Vec<f64> = (0..size)
            .map(|l| {
                let parent = if n == 1 { 0 } else { l / b };
                prev[parent] + step(offset + l as u64)
            })
            .collect();
        visit(n, &cur);
        prev = cur;
    }
    Ok(())
}

pub(crate) fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

pub(crate) fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

pub(crate) fn log_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}
