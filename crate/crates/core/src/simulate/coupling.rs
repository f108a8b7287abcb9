use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::measure::{mix, DiscreteMeasure};

use super::rng::{derive_seed, unit, CategoricalSampler};

const CHUNK: usize = 1 << 13;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CouplingTest {
    pub samples: usize,
    pub t: f64,
    pub observed: Vec<u64>,
    pub expected: Vec<f64>,
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Pushes `(x, x′, j) ~ μ × ν × Bernoulli` through `θ` (keep `x` when the
/// coin shows `0`, which happens with probability `t`) and χ²-tests the
/// empirical law against `mix(ν, μ, t)`.
pub fn coupling_pushforward_test(
    nu: &DiscreteMeasure,
    mu: &DiscreteMeasure,
    t: f64,
    samples: usize,
    seed: u64,
) -> Result<CouplingTest> {
    let target = mix(nu, mu, t)?;
    if samples < 1000 {
        return Err(Error::out_of_range("samples", samples as f64));
    }
    let k = nu.len();
    let from_mu = CategoricalSampler::new(mu.weights());
    let from_nu = CategoricalSampler::new(nu.weights());
    let key = derive_seed(seed, 0);
    let chunks = samples.div_ceil(CHUNK);
    let observed = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut counts = vec![0u64; k];
            for i in c * CHUNK..((c + 1) * CHUNK).min(samples) {
                let base = 3 * i as u64;
                let x = from_mu.sample(unit(key, base));
                let x_prime = from_nu.sample(unit(key, base + 1));
                let j = u8::from(unit(key, base + 2) >= t);
                counts[if j == 0 { x } else { x_prime }] += 1;
            }
            counts
        })
        .reduce(
            || vec![0u64; k],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );
    let n = samples as f64;
    let expected: Vec<f64> = target.weights().iter().map(|w| w * n).collect();
    let statistic = observed
        .iter()
        .zip(&expected)
        .map(|(&o, &e)| (o as f64 - e).powi(2) / e)
        .sum::<f64>();
    let dof = k - 1;
    let p_value = if dof == 0 {
        1.0
    } else {
        ChiSquared::new(dof as f64)
            .map_err(|_| Error::out_of_range("dof", dof as f64))?
            .sf(statistic)
    };
    Ok(CouplingTest {
        samples,
        t,
        observed,
        expected,
        statistic,
        dof,
        p_value,
    })
}
