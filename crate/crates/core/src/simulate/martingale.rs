use serde::Serialize;

use crate::action::{act_on_vertex, FreeWord};
use crate::error::{Error, Result};
use crate::measure::MeasurePair;
use crate::tree::{TreeSpec, Vertex};

use super::field::{cocycle_sum, EdgeTables, FieldSample, LazyField};
use super::rng::derive_seed;
use super::{for_each_sphere, mean_and_se, run_trials, EdgeField};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanEstimate {
    pub mean: f64,
    pub std_err: f64,
}

impl MeanEstimate {
    fn of(xs: &[f64]) -> Self {
        let (mean, std_err) = mean_and_se(xs);
        Self { mean, std_err }
    }

    /// `|mean − target|` in units of the standard error.
    pub fn z_score(&self, target: f64) -> f64 {
        let d = (self.mean - target).abs();
        if d == 0.0 {
            0.0
        } else {
            d / self.std_err
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MartingaleStats {
    pub tree: String,
    pub depth: usize,
    pub trials: usize,
    pub seed: u64,
    pub affinity: f64,
    /// `W_n` for `n = 0..=depth`.
    pub w: Vec<MeanEstimate>,
    /// `W_{n+1} − W_n` for `n = 0..depth`.
    pub increments: Vec<MeanEstimate>,
    /// `E W_n = |Σ_n|·affinity^{2n}`.
    pub expected: Vec<f64>,
}

fn require_regular(spec: &TreeSpec) -> Result<()> {
    match spec {
        TreeSpec::Regular { .. } => Ok(()),
        _ => Err(Error::SpecMismatch(format!("martingale W_n needs a regular tree, got {spec}"))),
    }
}

/// `W_n = Σ_{|v| = n} exp(S_v / 2)` on a stored sample.
pub fn martingale_w(sample: &FieldSample, n: usize) -> Result<f64> {
    let spec = *sample.spec();
    require_regular(&spec)?;
    if n > sample.depth() {
        return Err(Error::OutOfDepth {
            distance: n,
            depth: sample.depth(),
        });
    }
    let mut out = 0.0;
    for_each_sphere(&spec, n, |i| sample.step(i), |k, s| {
        if k == n {
            out = s.iter().map(|x| (x / 2.0).exp()).sum();
        }
    })?;
    Ok(out)
}

/// Sample means of `W_n` and its increments over independent trials.
pub fn martingale_stats(
    spec: &TreeSpec,
    pair: &MeasurePair,
    depth: usize,
    trials: usize,
    seed: u64,
    workers: usize,
) -> Result<MartingaleStats> {
    require_regular(spec)?;
    if trials < 2 {
        return Err(Error::out_of_range("trials", trials as f64));
    }
    super::check_budget(spec, depth)?;
    let tables = EdgeTables::new(pair);
    let per_trial = run_trials(trials, workers, |trial| {
        let key = derive_seed(seed, trial);
        let mut w = Vec::with_capacity(depth + 1);
        for_each_sphere(spec, depth, |i| tables.step(key, i), |_, s| {
            w.push(s.iter().map(|x| (x / 2.0).exp()).sum::<f64>())
        })?;
        Ok(w)
    })?;
    let column = |f: &dyn Fn(&Vec<f64>) -> f64| per_trial.iter().map(f).collect::<Vec<f64>>();
    let w = (0..=depth).map(|n| MeanEstimate::of(&column(&|t| t[n]))).collect();
    let increments = (0..depth)
        .map(|n| MeanEstimate::of(&column(&|t| t[n + 1] - t[n])))
        .collect();
    let a2 = pair.affinity().powi(2);
    let expected = (0..=depth)
        .map(|n| Ok(spec.sphere_size(n)? as f64 * a2.powi(n as i32)))
        .collect::<Result<_>>()?;
    Ok(MartingaleStats {
        tree: spec.to_string(),
        depth,
        trials,
        seed,
        affinity: pair.affinity(),
        w,
        increments,
        expected,
    })
}

/// Sample mean of `√(dgμ/dμ) = exp(S_{g·ρ}/2)` over lazily drawn fields.
pub fn rn_sqrt_mean(
    spec: &TreeSpec,
    pair: &MeasurePair,
    g: &FreeWord,
    trials: usize,
    seed: u64,
    workers: usize,
) -> Result<MeanEstimate> {
    let target = act_on_vertex(spec, g, &Vertex::root())?;
    let base = LazyField::new(spec, pair, 0);
    let xs = run_trials(trials, workers, |trial| {
        let field = base.reseeded(derive_seed(seed, trial));
        Ok((cocycle_sum(&field, &target)? / 2.0).exp())
    })?;
    Ok(MeanEstimate::of(&xs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::sample_field;

    fn critical() -> MeasurePair {
        // symmetric binary pair with affinity 2^{-1/2}
        let a = 0.5f64.sqrt();
        let p = (1.0 - (1.0 - a * a).sqrt()) / 2.0;
        MeasurePair::from_weights(vec![1.0 - p, p], vec![p, 1.0 - p]).unwrap()
    }

    #[test]
    fn w_zero_is_one() {
        let spec = TreeSpec::regular(3).unwrap();
        let s = sample_field(&spec, &critical(), 3, 11).unwrap();
        assert_eq!(martingale_w(&s, 0).unwrap(), 1.0);
        assert!(matches!(martingale_w(&s, 4), Err(Error::OutOfDepth { .. })));
    }

    #[test]
    fn stored_and_streamed_agree() {
        let spec = TreeSpec::regular(4).unwrap();
        let pair = critical();
        let stats = martingale_stats(&spec, &pair, 4, 3, 17, 1).unwrap();
        let mut sum = 0.0;
        for trial in 0..3 {
            let s = sample_field(&spec, &pair, 4, derive_seed(17, trial)).unwrap();
            sum += martingale_w(&s, 4).unwrap();
        }
        assert!((stats.w[4].mean - sum / 3.0).abs() < 1e-12 * sum.max(1.0));
    }

    #[test]
    fn subcritical_mean() {
        let a: f64 = 0.6;
        let p = (1.0 - (1.0 - a * a).sqrt()) / 2.0;
        let pair = MeasurePair::from_weights(vec![1.0 - p, p], vec![p, 1.0 - p]).unwrap();
        let spec = TreeSpec::regular(3).unwrap();
        let stats = martingale_stats(&spec, &pair, 2, 20_000, 5, 0).unwrap();
        assert!((stats.expected[2] - 0.7776).abs() < 1e-12);
        assert!(stats.w[2].z_score(0.7776) < 3.0, "{:?}", stats.w[2]);
    }

    #[test]
    fn cayley_rejected() {
        let spec = TreeSpec::cayley(2).unwrap();
        assert!(matches!(
            martingale_stats(&spec, &critical(), 2, 10, 0, 1),
            Err(Error::SpecMismatch(_))
        ));
    }

    #[test]
    fn koopman_single_letter() {
        let pair = MeasurePair::from_weights(vec![0.7, 0.3], vec![0.3, 0.7]).unwrap();
        let spec = TreeSpec::cayley(2).unwrap();
        let g = FreeWord::parse(2, "a").unwrap();
        let est = rn_sqrt_mean(&spec, &pair, &g, 20_000, 1, 0).unwrap();
        assert!(est.z_score(0.84) < 3.0, "{est:?}");
    }
}
