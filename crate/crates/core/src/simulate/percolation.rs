use serde::Serialize;

use crate::error::{Error, NoBlockReason, Result};
use crate::measure::{chernoff_min, step_distribution, MeasurePair, ScalarDistribution, MERGE_TOL};
use crate::tree::TreeSpec;

use super::field::EdgeTables;
use super::rng::derive_seed;
use super::run_trials;

const GW_TOL: f64 = 1e-15;
const GW_MAX_ITER: usize = 10_000;

/// Exact law of `R_M`, the sum of `M` independent copies of `Z = X + Y`.
pub fn block_sum_distribution(pair: &MeasurePair, m: usize) -> Result<ScalarDistribution> {
    if m == 0 {
        return Err(Error::out_of_range("M", 0.0));
    }
    step_distribution(pair)?.convolution_power(m)
}

/// Smallest `M ≤ m_max` with `P(R_M ≥ 0) > exp(−Mδ)`.
pub fn find_block_length(pair: &MeasurePair, delta: f64, m_max: usize) -> Result<usize> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::out_of_range("delta", delta));
    }
    if m_max == 0 {
        return Err(Error::out_of_range("M_max", 0.0));
    }
    if chernoff_min(pair)?.value <= (-delta).exp() {
        return Err(Error::NoBlockLength(NoBlockReason::BoundImpossible));
    }
    let z = step_distribution(pair)?;
    let mut r = z.clone();
    for m in 1..=m_max {
        if m > 1 {
            r = r.convolve(&z)?;
        }
        if r.prob_at_least(0.0) > (-(m as f64) * delta).exp() {
            return Ok(m);
        }
    }
    Err(Error::NoBlockLength(NoBlockReason::Exhausted))
}

fn pgf(k: f64, p: f64, s: f64) -> (f64, f64) {
    let base = 1.0 - p + p * s;
    let f = base.powf(k);
    let df = if base > 0.0 { k * p * f / base } else { 0.0 };
    (f, df)
}

/// Survival probability of a Galton–Watson process with
/// `Binomial(k, p)` offspring.
///
/// Starting from `s = 0`, each step moves `s ← s + (f(s) − s)/(1 − f′(s))`;
/// on a convex generating function this climbs monotonically to the
/// smallest fixed point.
pub fn gw_survival(k: f64, p: f64) -> f64 {
    if p >= 1.0 {
        return 1.0;
    }
    if k * p <= 1.0 || p <= 0.0 {
        return 0.0;
    }
    let mut s = 0.0;
    for _ in 0..GW_MAX_ITER {
        let (f, df) = pgf(k, p, s);
        let next = (s + (f - s) / (1.0 - df)).clamp(s, 1.0);
        let done = (next - s).abs() <= GW_TOL;
        s = next;
        if done {
            break;
        }
    }
    1.0 - s
}

/// `P(Z_n > 0)` after `generations` steps, i.e. `1 − f^{∘n}(0)`.
pub fn gw_survival_to(k: f64, p: f64, generations: usize) -> f64 {
    let mut s = 0.0;
    for _ in 0..generations {
        s = pgf(k, p, s).0;
    }
    1.0 - s
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PercolationOptions {
    pub mc_trials: Option<usize>,
    /// Tree depth the retained component must reach.
    pub mc_depth: usize,
    pub seed: u64,
    pub workers: usize,
}

impl Default for PercolationOptions {
    fn default() -> Self {
        Self {
            mc_trials: None,
            mc_depth: 14,
            seed: 0,
            workers: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[allow(non_snake_case)]
pub struct PercolationReport {
    pub tree: String,
    pub M: usize,
    pub p: f64,
    /// Block edges below each block vertex, `branching^M`.
    pub children_per_block: f64,
    pub criterion: f64,
    pub supercritical: bool,
    pub survival: f64,
    pub mc_depth: Option<usize>,
    pub mc_trials: Option<usize>,
    pub mc_survival: Option<f64>,
    pub mc_survival_se: Option<f64>,
    /// Galton–Watson survival to the same number of block generations.
    pub gw_survival_at_depth: Option<f64>,
    pub retained_fraction: Option<f64>,
    pub retained_fraction_se: Option<f64>,
}

/// Block-edge percolation on the derived tree together with its
/// Galton–Watson survival probability.
///
/// Retention events of distinct block edges depend on disjoint geodesic
/// segments, so the percolation is exactly Bernoulli(`p`).
pub fn percolation_report(
    spec: &TreeSpec,
    pair: &MeasurePair,
    m: usize,
    options: PercolationOptions,
) -> Result<PercolationReport> {
    let p = block_sum_distribution(pair, m)?.prob_at_least(0.0).min(1.0);
    let b = spec.branching() as f64;
    let k = b.powi(m as i32);
    let criterion = p * k;
    let survival = gw_survival(k, p);
    let mut report = PercolationReport {
        tree: spec.to_string(),
        M: m,
        p,
        children_per_block: k,
        criterion,
        supercritical: criterion > 1.0,
        survival,
        mc_depth: None,
        mc_trials: None,
        mc_survival: None,
        mc_survival_se: None,
        gw_survival_at_depth: None,
        retained_fraction: None,
        retained_fraction_se: None,
    };
    if let Some(trials) = options.mc_trials {
        if trials < 2 {
            return Err(Error::out_of_range("mc_trials", trials as f64));
        }
        let generations = options.mc_depth / m;
        if generations == 0 {
            return Err(Error::out_of_range("mc_depth", options.mc_depth as f64));
        }
        let k_int = spec.branching().checked_pow(m as u32).ok_or(Error::Overflow("children per block"))?;
        let tables = EdgeTables::new(pair);
        let explorer = Explorer {
            spec,
            tables: &tables,
            m,
            generations,
        };
        let outcomes = run_trials(trials, options.workers, |trial| {
            let key = derive_seed(options.seed, trial);
            let retained = explorer.first_generation_retained(key)?;
            let survived = explorer.survives(key, 1, 0, 0)?;
            Ok((survived, retained))
        })?;
        let n = trials as f64;
        let hits = outcomes.iter().filter(|o| o.0).count() as f64;
        let q = hits / n;
        let edges = n * k_int as f64;
        let kept = outcomes.iter().map(|o| o.1 as f64).sum::<f64>();
        let r = kept / edges;
        report.mc_depth = Some(options.mc_depth);
        report.mc_trials = Some(trials);
        report.mc_survival = Some(q);
        report.mc_survival_se = Some((q * (1.0 - q) / n).sqrt());
        report.gw_survival_at_depth = Some(gw_survival_to(k, p, generations));
        report.retained_fraction = Some(r);
        report.retained_fraction_se = Some((r * (1.0 - r) / edges).sqrt());
    }
    Ok(report)
}

/// Depth-first search of the retained block component.
///
/// The search starts at the depth-1 vertex with local index 0, so every
/// block vertex has exactly `branching^M` block children.
struct Explorer<'a> {
    spec: &'a TreeSpec,
    tables: &'a EdgeTables,
    m: usize,
    generations: usize,
}

impl Explorer<'_> {
    /// Visits the `branching^M` descendants at distance `M` below
    /// `(depth, local)` with the block sum of `Z` along the way.
    fn for_each_block_child(
        &self,
        key: u64,
        depth: usize,
        local: u64,
        visit: &mut dyn FnMut(u64, f64) -> Result<bool>,
    ) -> Result<bool> {
        let b = self.spec.branching() as u64;
        let mut stack = vec![(depth, local, 0.0)];
        while let Some((d, l, sum)) = stack.pop() {
            if d == depth + self.m {
                if visit(l, sum)? {
                    return Ok(true);
                }
                continue;
            }
            let offset = self.spec.depth_offset(d + 1)?;
            for c in (0..b).rev() {
                let child = l * b + c;
                stack.push((d + 1, child, sum + self.tables.step(key, offset + child)));
            }
        }
        Ok(false)
    }

    fn first_generation_retained(&self, key: u64) -> Result<u64> {
        let mut kept = 0;
        self.for_each_block_child(key, 1, 0, &mut |_, r| {
            if r >= -MERGE_TOL {
                kept += 1;
            }
            Ok(false)
        })?;
        Ok(kept)
    }

    fn survives(&self, key: u64, depth: usize, local: u64, generation: usize) -> Result<bool> {
        if generation == self.generations {
            return Ok(true);
        }
        self.for_each_block_child(key, depth, local, &mut |child, r| {
            if r < -MERGE_TOL {
                return Ok(false);
            }
            self.survives(key, depth + self.m, child, generation + 1)
        })
    }
}
