use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::measure::MeasurePair;
use crate::tree::{ols_slope, TreeSpec};

use super::field::EdgeTables;
use super::rng::{derive_seed, unit};
use super::{for_each_sphere, log_add_exp, log_sum_exp, run_trials};

/// Default Cauchy threshold on the normalized final increment.
pub const DEFAULT_EPSILON: f64 = 1e-6;
/// Two-sided confidence level of the slope interval.
pub const SLOPE_CONFIDENCE: f64 = 0.99;
/// Recurrent evidence also needs the median relative increment of `T_n`
/// at the last depth to be at least `GROWTH_FLOOR / depth`.
pub const GROWTH_FLOOR: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    RecurrentEvidence,
    DissipativeEvidence,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::RecurrentEvidence => "RecurrentEvidence",
            Verdict::DissipativeEvidence => "DissipativeEvidence",
            Verdict::Inconclusive => "Inconclusive",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecurrenceDiagnostic {
    pub depths: Vec<usize>,
    /// `log T_n` per trial, indexed like `depths`.
    pub log_t: Vec<Vec<f64>>,
    pub mean_log_t: Vec<f64>,
    /// Mean per-trial slope of `log T_n` over the upper half window.
    pub slope: f64,
    pub slope_ci: (f64, f64),
    /// `(T_n − T_{n−1})` at the last depth over the number of new terms.
    pub tail_increments: Vec<f64>,
    pub max_tail_increment: f64,
    /// Median of `(T_n − T_{n−1}) / T_{n−1}` at the last depth.
    pub median_relative_increment: f64,
    pub epsilon: f64,
    pub verdict: Verdict,
    pub truncation_bias: bool,
}

struct TrialCurve {
    log_t: Vec<f64>,
}

fn summarize(
    depths: Vec<usize>,
    curves: Vec<TrialCurve>,
    log_new_terms: f64,
    epsilon: f64,
    truncation_bias: bool,
) -> Result<RecurrenceDiagnostic> {
    let last = depths.len() - 1;
    let trials = curves.len();
    let lo = last / 2;
    let xs: Vec<f64> = depths[lo..].iter().map(|&n| n as f64).collect();
    let slopes: Vec<f64> = curves.iter().map(|c| ols_slope(&xs, &c.log_t[lo..])).collect();
    let (slope, se) = super::mean_and_se(&slopes);
    let quantile = StudentsT::new(0.0, 1.0, (trials - 1) as f64)
        .map_err(|_| Error::out_of_range("trials", trials as f64))?
        .inverse_cdf(0.5 + SLOPE_CONFIDENCE / 2.0);
    let slope_ci = (slope - quantile * se, slope + quantile * se);

    // T_n − T_{n−1} in log space: log(exp(a) − exp(b)) for a ≥ b.
    let log_increment = |c: &TrialCurve| {
        let (a, b) = (c.log_t[last], c.log_t[last - 1]);
        if a <= b {
            f64::NEG_INFINITY
        } else {
            a + (-(b - a).exp_m1()).ln()
        }
    };
    let tail_increments: Vec<f64> = curves
        .iter()
        .map(|c| (log_increment(c) - log_new_terms).exp())
        .collect();
    let max_tail_increment = tail_increments.iter().cloned().fold(0.0, f64::max);
    let mut relative: Vec<f64> = curves
        .iter()
        .map(|c| (log_increment(c) - c.log_t[last - 1]).exp())
        .collect();
    relative.sort_by(f64::total_cmp);
    let median_relative_increment = if trials % 2 == 1 {
        relative[trials / 2]
    } else {
        (relative[trials / 2 - 1] + relative[trials / 2]) / 2.0
    };

    let verdict = if max_tail_increment < epsilon {
        Verdict::DissipativeEvidence
    } else if slope_ci.0 > 0.0 && median_relative_increment >= GROWTH_FLOOR / depths[last] as f64 {
        Verdict::RecurrentEvidence
    } else {
        Verdict::Inconclusive
    };
    let mean_log_t = (0..=last)
        .map(|i| curves.iter().map(|c| c.log_t[i]).sum::<f64>() / trials as f64)
        .collect();
    Ok(RecurrenceDiagnostic {
        depths,
        log_t: curves.into_iter().map(|c| c.log_t).collect(),
        mean_log_t,
        slope,
        slope_ci,
        tail_increments,
        max_tail_increment,
        median_relative_increment,
        epsilon,
        verdict,
        truncation_bias,
    })
}

fn check_common(trials: usize, epsilon: f64) -> Result<()> {
    if trials < 30 {
        return Err(Error::out_of_range("trials", trials as f64));
    }
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::out_of_range("epsilon", epsilon));
    }
    Ok(())
}

/// Growth of `T_n = Σ_{|v| ≤ n} exp(S_v)` across independent fields.
pub fn recurrence_diagnostic(
    spec: &TreeSpec,
    pair: &MeasurePair,
    depth: usize,
    trials: usize,
    seed: u64,
    epsilon: f64,
    workers: usize,
) -> Result<RecurrenceDiagnostic> {
    check_common(trials, epsilon)?;
    if depth < 4 {
        return Err(Error::out_of_range("depth", depth as f64));
    }
    super::check_budget(spec, depth)?;
    let tables = EdgeTables::new(pair);
    let curves = run_trials(trials, workers, |trial| {
        let key = derive_seed(seed, trial);
        let mut log_t = Vec::with_capacity(depth + 1);
        let mut acc = f64::NEG_INFINITY;
        for_each_sphere(spec, depth, |i| tables.step(key, i), |_, s| {
            acc = log_add_exp(acc, log_sum_exp(s));
            log_t.push(acc);
        })?;
        Ok(TrialCurve { log_t })
    })?;
    let new_terms = (spec.sphere_size(depth)? as f64).ln();
    summarize((0..=depth).collect(), curves, new_terms, epsilon, false)
}

/// `μ_n^t(0)`: `1/2` for `n ≤ 4t²`, else `1/2 + t/√n`.
pub fn ks_family(t: f64, n: i64) -> f64 {
    if (n as f64) <= 4.0 * t * t {
        0.5
    } else {
        0.5 + t / (n as f64).sqrt()
    }
}

/// Shift analogue on ℤ with marginals `μ_n^t`: the Radon–Nikodym product is
/// truncated to `|n| ≤ window`, so the report always flags truncation bias.
pub fn shift_recurrence_diagnostic(
    t: f64,
    window: usize,
    trials: usize,
    seed: u64,
    workers: usize,
) -> Result<RecurrenceDiagnostic> {
    check_common(trials, DEFAULT_EPSILON)?;
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::out_of_range("t", t));
    }
    if window < 16 {
        return Err(Error::out_of_range("window", window as f64));
    }
    let w = window as i64;
    let span = 2 * w;
    // log μ_n(0), log μ_n(1) for n ∈ [−2W, 2W], offset by 2W.
    let table: Vec<[f64; 2]> = (-span..=span)
        .map(|n| {
            let p = ks_family(t, n);
            [p.ln(), (1.0 - p).ln()]
        })
        .collect();
    let log_mu = |n: i64, x: usize| table[(n + span) as usize][x];
    let curves = run_trials(trials, workers, |trial| {
        let key = derive_seed(seed, trial);
        let x: Vec<usize> = (-span..=span)
            .map(|n| usize::from(unit(key, (n + span) as u64) >= ks_family(t, n)))
            .collect();
        let xn = |n: i64| x[(n + span) as usize];
        let log_rn = |k: i64| (-w..=w).map(|n| log_mu(n - k, xn(n)) - log_mu(n, xn(n))).sum::<f64>();
        let mut log_t = Vec::with_capacity(window + 1);
        let mut acc = log_rn(0);
        log_t.push(acc);
        for m in 1..=w {
            acc = log_add_exp(acc, log_add_exp(log_rn(m), log_rn(-m)));
            log_t.push(acc);
        }
        Ok(TrialCurve { log_t })
    })?;
    summarize((0..=window).collect(), curves, 2f64.ln(), DEFAULT_EPSILON, true)
}
