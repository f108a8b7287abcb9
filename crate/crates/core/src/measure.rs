//! Finite probability measures and the scalar laws built from them.
//!
//! Everything here is exact up to floating point: measures live on a finite
//! alphabet with strictly positive weights, so Hellinger affinities,
//! log-likelihood laws and their convolutions are finite sums.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tree::Direction;

/// Tolerance on `Σ w = 1` accepted by [`DiscreteMeasure::new`].
pub const NORMALIZATION_TOL: f64 = 1e-9;
/// Absolute distance (nats) under which two atoms are merged.
pub const MERGE_TOL: f64 = 1e-12;
/// Default cap on the number of atoms a convolution may produce.
pub const DEFAULT_ATOM_CAP: usize = 1_000_000;
/// Values closer than this to zero count as zero in range-group detection.
pub const RANGE_ZERO_TOL: f64 = 1e-12;
/// Euclid on reals stops once the remainder drops below this.
pub const EUCLID_TOL: f64 = 1e-9;
/// Largest integer multiple / denominator accepted as commensurable.
pub const MAX_DENOMINATOR: u64 = 1_000_000;

/// Strictly positive probability weights on `{0, …, n-1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMeasure")]
pub struct DiscreteMeasure {
    weights: Vec<f64>,
}

#[derive(Deserialize)]
struct RawMeasure {
    weights: Vec<f64>,
}

impl TryFrom<RawMeasure> for DiscreteMeasure {
    type Error = Error;

    fn try_from(raw: RawMeasure) -> Result<Self> {
        DiscreteMeasure::new(raw.weights)
    }
}

impl DiscreteMeasure {
    /// Validates the weights; they are stored as given, never renormalized.
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::NotNormalized(0.0));
        }
        for (index, &value) in weights.iter().enumerate() {
            if value.is_nan() || value <= 0.0 || value.is_infinite() {
                return Err(Error::NonPositiveWeight { index, value });
            }
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::NotNormalized(sum));
        }
        Ok(Self { weights })
    }

    pub fn uniform(n: usize) -> Result<Self> {
        Self::new(vec![1.0 / n as f64; n])
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Product measure on the product alphabet, indexed `i * other.len() + j`.
    pub fn product(&self, other: &DiscreteMeasure) -> DiscreteMeasure {
        let weights = self
            .weights
            .iter()
            .flat_map(|a| other.weights.iter().map(move |b| a * b))
            .collect();
        DiscreteMeasure { weights }
    }

    /// Expectation of `f` over the alphabet.
    pub fn expect(&self, f: impl Fn(usize) -> f64) -> f64 {
        self.weights.iter().enumerate().map(|(i, w)| w * f(i)).sum()
    }

    fn check_same_alphabet(&self, other: &DiscreteMeasure) -> Result<()> {
        if self.len() != other.len() {
            return Err(Error::AlphabetMismatch {
                left: self.len(),
                right: other.len(),
            });
        }
        Ok(())
    }
}

/// Bhattacharyya coefficient `Σ √(μᵢνᵢ)`, clamped to `(0, 1]`.
pub fn affinity(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<f64> {
    mu.check_same_alphabet(nu)?;
    let s: f64 = mu
        .weights
        .iter()
        .zip(&nu.weights)
        .map(|(a, b)| (a * b).sqrt())
        .sum();
    Ok(s.min(1.0))
}

/// Squared Hellinger distance `H² = 1 − Σ √(μᵢνᵢ)`.
pub fn hellinger_sq(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<f64> {
    Ok(1.0 - affinity(mu, nu)?)
}

/// Convex combination `(1 − t)ν + tμ`.
pub fn mix(nu: &DiscreteMeasure, mu: &DiscreteMeasure, t: f64) -> Result<DiscreteMeasure> {
    nu.check_same_alphabet(mu)?;
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::out_of_range("t", t));
    }
    if t == 0.0 {
        return Ok(nu.clone());
    }
    if t == 1.0 {
        return Ok(mu.clone());
    }
    let weights = nu
        .weights
        .iter()
        .zip(&mu.weights)
        .map(|(n, m)| (1.0 - t) * n + t * m)
        .collect();
    Ok(DiscreteMeasure { weights })
}

/// Ordered pair `(μ₀, μ₁)` with cached `log(μ₀(i)/μ₁(i))`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeasurePair {
    mu0: DiscreteMeasure,
    mu1: DiscreteMeasure,
    log_ratios: Vec<f64>,
}

impl MeasurePair {
    pub fn new(mu0: DiscreteMeasure, mu1: DiscreteMeasure) -> Result<Self> {
        mu0.check_same_alphabet(&mu1)?;
        let log_ratios = mu0
            .weights
            .iter()
            .zip(&mu1.weights)
            .map(|(a, b)| a.ln() - b.ln())
            .collect();
        Ok(Self {
            mu0,
            mu1,
            log_ratios,
        })
    }

    pub fn from_weights(mu0: Vec<f64>, mu1: Vec<f64>) -> Result<Self> {
        Self::new(DiscreteMeasure::new(mu0)?, DiscreteMeasure::new(mu1)?)
    }

    pub fn mu0(&self) -> &DiscreteMeasure {
        &self.mu0
    }

    pub fn mu1(&self) -> &DiscreteMeasure {
        &self.mu1
    }

    /// `log(dμ₀/dμ₁)` per symbol, in nats.
    pub fn log_ratios(&self) -> &[f64] {
        &self.log_ratios
    }

    pub fn alphabet_len(&self) -> usize {
        self.log_ratios.len()
    }

    pub fn affinity(&self) -> f64 {
        // Alphabets already agree.
        affinity(&self.mu0, &self.mu1).unwrap_or(1.0)
    }

    pub fn hellinger_sq(&self) -> f64 {
        1.0 - self.affinity()
    }

    /// Per-symbol value of the edge variable `X_e` for an edge with the given
    /// orientation: `log(dμ₁/dμ₀)` towards the root, `log(dμ₀/dμ₁)` away.
    pub fn edge_log_value(&self, direction: Direction, symbol: usize) -> f64 {
        match direction {
            Direction::TowardRoot => -self.log_ratios[symbol],
            Direction::AwayFromRoot => self.log_ratios[symbol],
        }
    }

    /// Measure an edge with this orientation is sampled from.
    pub fn edge_measure(&self, direction: Direction) -> &DiscreteMeasure {
        match direction {
            Direction::TowardRoot => &self.mu0,
            Direction::AwayFromRoot => &self.mu1,
        }
    }

    /// The pair `(mix(ν, μ₀, t), mix(ν, μ₁, t))`.
    pub fn mixed(&self, nu: &DiscreteMeasure, t: f64) -> Result<MeasurePair> {
        MeasurePair::new(mix(nu, &self.mu0, t)?, mix(nu, &self.mu1, t)?)
    }
}

/// Finite law on the reals: strictly increasing values, positive masses.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarDistribution {
    atoms: Vec<(f64, f64)>,
}

impl Serialize for ScalarDistribution {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut s = serializer.serialize_struct("ScalarDistribution", 1)?;
        s.serialize_field("atoms", &self.atoms)?;
        s.end()
    }
}

impl ScalarDistribution {
    /// Builds a law from raw `(value, prob)` pairs; sorts, drops zero masses
    /// and merges values closer than [`MERGE_TOL`].
    pub fn from_atoms(mut raw: Vec<(f64, f64)>) -> Result<Self> {
        raw.retain(|&(_, p)| p > 0.0);
        raw.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut atoms: Vec<(f64, f64)> = Vec::with_capacity(raw.len());
        // Cluster start value, used so chained near-duplicates cannot drift.
        let mut anchor = f64::NEG_INFINITY;
        let mut weighted = 0.0;
        for (v, p) in raw {
            match atoms.last_mut() {
                Some(last) if v - anchor <= MERGE_TOL => {
                    weighted += v * p;
                    last.1 += p;
                    last.0 = weighted / last.1;
                }
                _ => {
                    anchor = v;
                    weighted = v * p;
                    atoms.push((v, p));
                }
            }
        }
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        if atoms.is_empty() || (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::NotNormalized(total));
        }
        Ok(Self { atoms })
    }

    pub fn point_mass(value: f64) -> Self {
        Self {
            atoms: vec![(value, 1.0)],
        }
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.1).sum()
    }

    pub fn mean(&self) -> f64 {
        self.atoms.iter().map(|(v, p)| v * p).sum()
    }

    /// `P(V ≥ x)`, where atoms within [`MERGE_TOL`] below `x` count as `x`.
    pub fn prob_at_least(&self, x: f64) -> f64 {
        self.atoms
            .iter()
            .filter(|(v, _)| *v >= x - MERGE_TOL)
            .map(|a| a.1)
            .sum()
    }

    /// Law of the sum of independent samples, capped at [`DEFAULT_ATOM_CAP`].
    pub fn convolve(&self, other: &ScalarDistribution) -> Result<Self> {
        self.convolve_with_cap(other, DEFAULT_ATOM_CAP)
    }

    /// The cap applies to the number of pairwise sums formed before merging.
    pub fn convolve_with_cap(&self, other: &ScalarDistribution, cap: usize) -> Result<Self> {
        let needed = self
            .atoms
            .len()
            .saturating_mul(other.atoms.len());
        if needed > cap {
            return Err(Error::AtomBudgetExceeded { needed, cap });
        }
        let raw = self
            .atoms
            .iter()
            .flat_map(|&(va, pa)| other.atoms.iter().map(move |&(vb, pb)| (va + vb, pa * pb)))
            .collect();
        Self::from_atoms(raw)
    }

    /// `k`-fold self-convolution, `k ≥ 1`.
    pub fn convolution_power(&self, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::out_of_range("k", 0.0));
        }
        let mut acc = self.clone();
        for _ in 1..k {
            acc = acc.convolve(self)?;
        }
        Ok(acc)
    }
}

/// Law of `log(dμ₁/dμ₀)` under `μ₀` (towards the root) or of
/// `log(dμ₀/dμ₁)` under `μ₁` (away from the root).
pub fn log_ratio_distribution(pair: &MeasurePair, direction: Direction) -> ScalarDistribution {
    let measure = pair.edge_measure(direction);
    let raw = measure
        .weights()
        .iter()
        .enumerate()
        .map(|(i, &w)| (pair.edge_log_value(direction, i), w))
        .collect();
    // Weights of a validated measure always sum to one.
    ScalarDistribution::from_atoms(raw).expect("validated measure")
}

/// Law of `Z = X + Y`, the per-edge contribution of a geodesic step.
pub fn step_distribution(pair: &MeasurePair) -> Result<ScalarDistribution> {
    log_ratio_distribution(pair, Direction::TowardRoot)
        .convolve(&log_ratio_distribution(pair, Direction::AwayFromRoot))
}

/// Moment generating function `E exp(tV)`.
pub fn mgf(d: &ScalarDistribution, t: f64) -> f64 {
    d.atoms.iter().map(|(v, p)| p * (t * v).exp()).sum()
}

fn mgf_derivative(d: &ScalarDistribution, t: f64) -> f64 {
    d.atoms.iter().map(|(v, p)| p * v * (t * v).exp()).sum()
}

/// Minimizer and minimum of `φ(t) = E exp(tZ)` over `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChernoffMin {
    pub t_star: f64,
    pub value: f64,
}

/// Golden-section search for the minimum of the convex `φ` on `[0, 1]`,
/// finished by bisection on `φ'` once the bracket is narrow; the flat bottom
/// of `φ` hides the minimizer from value comparisons below ~1e-8.
pub fn chernoff_min(pair: &MeasurePair) -> Result<ChernoffMin> {
    let z = step_distribution(pair)?;
    if z.atoms.iter().all(|(v, _)| v.abs() <= MERGE_TOL) {
        return Ok(ChernoffMin {
            t_star: 0.5,
            value: mgf(&z, 0.5),
        });
    }
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (0.0f64, 1.0f64);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (mgf(&z, c), mgf(&z, d));
    while b - a > 1e-4 {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = mgf(&z, c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = mgf(&z, d);
        }
    }
    // φ' is increasing; widen until it brackets a sign change.
    let (mut lo, mut hi) = (a, b);
    while lo > 0.0 && mgf_derivative(&z, lo) > 0.0 {
        lo = (lo - (b - a)).max(0.0);
    }
    while hi < 1.0 && mgf_derivative(&z, hi) < 0.0 {
        hi = (hi + (b - a)).min(1.0);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if mgf_derivative(&z, mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let t_star = 0.5 * (lo + hi);
    Ok(ChernoffMin {
        t_star,
        value: mgf(&z, t_star),
    })
}

/// Shape of the closed subgroup generated by the examined differences.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RangeKind {
    Trivial,
    Lattice,
    Dense,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RangeGroupReport {
    pub kind: RangeKind,
    /// Positive generator `a` of `aℤ`; present iff `kind == Lattice`.
    pub generator: Option<f64>,
    pub witnesses: Vec<f64>,
    /// Set whenever the verdict rests on float commensurability tests.
    pub heuristic: bool,
}

/// Nearest-integer Euclid on positive reals.
fn real_gcd(a: f64, b: f64) -> f64 {
    let (mut x, mut y) = if a >= b { (a, b) } else { (b, a) };
    while y >= EUCLID_TOL {
        let r = (x - (x / y).round() * y).abs();
        x = y;
        y = r;
    }
    x
}

/// Continued-fraction convergent of `x` with the largest denominator
/// `≤ max_den`, as `(numerator, denominator)`.
pub fn best_rational(x: f64, max_den: u64) -> (i64, u64) {
    let sign = if x < 0.0 { -1 } else { 1 };
    let mut frac = x.abs();
    let (mut p0, mut q0, mut p1, mut q1) = (0i128, 1i128, 1i128, 0i128);
    for _ in 0..64 {
        let a = frac.floor();
        let ai = a as i128;
        let p2 = ai * p1 + p0;
        let q2 = ai * q1 + q0;
        if q2 > max_den as i128 {
            break;
        }
        p0 = p1;
        q0 = q1;
        p1 = p2;
        q1 = q2;
        let rem = frac - a;
        if rem < 1e-15 {
            break;
        }
        frac = 1.0 / rem;
    }
    (sign * p1 as i64, q1.max(1) as u64)
}

fn gcd_u64(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let r = a % b;
        a = b;
        b = r;
    }
    a
}

/// Smallest closed subgroup containing all differences
/// `log(dμ₀/dμ₁)(x) − log(dμ₀/dμ₁)(x′)`, optionally extended by extra
/// generators (e.g. logs of modular function values).
///
/// A lattice verdict needs a real-Euclid generator with every difference
/// an integer multiple (`|n| ≤ 10⁶`, error `≤ 1e-9`), confirmed by
/// continued-fraction approximations of the difference ratios. Anything
/// else is reported as dense.
pub fn essential_range_group(pair: &MeasurePair, extra_generators: Option<&[f64]>) -> RangeGroupReport {
    let lr = pair.log_ratios();
    let mut witnesses = Vec::new();
    for i in 0..lr.len() {
        for j in (i + 1)..lr.len() {
            witnesses.push(lr[i] - lr[j]);
        }
    }
    if let Some(extra) = extra_generators {
        witnesses.extend_from_slice(extra);
    }
    classify_range(witnesses)
}

pub(crate) fn classify_range(witnesses: Vec<f64>) -> RangeGroupReport {
    let nonzero: Vec<f64> = witnesses
        .iter()
        .map(|d| d.abs())
        .filter(|d| *d > RANGE_ZERO_TOL)
        .collect();
    if nonzero.is_empty() {
        return RangeGroupReport {
            kind: RangeKind::Trivial,
            generator: None,
            witnesses,
            heuristic: false,
        };
    }
    let dense = |witnesses| RangeGroupReport {
        kind: RangeKind::Dense,
        generator: None,
        witnesses,
        heuristic: true,
    };
    let g = nonzero.iter().copied().fold(nonzero[0], real_gcd);
    if g.is_nan() || g < EUCLID_TOL {
        return dense(witnesses);
    }
    let mut multiples = Vec::with_capacity(nonzero.len());
    for &d in &nonzero {
        let n = (d / g).round();
        if n < 1.0 || n > MAX_DENOMINATOR as f64 || (d - n * g).abs() > EUCLID_TOL * d.max(1.0) {
            return dense(witnesses);
        }
        multiples.push(n as u64);
    }
    // Independent route: continued fractions of d / d_max must reproduce n / n_max.
    let (ref_idx, _) = nonzero
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("nonempty");
    let (d_ref, n_ref) = (nonzero[ref_idx], multiples[ref_idx]);
    for (&d, &n) in nonzero.iter().zip(&multiples) {
        let (p, q) = best_rational(d / d_ref, MAX_DENOMINATOR);
        let k = gcd_u64(n, n_ref);
        if p as u64 * k != n || q * k != n_ref {
            return dense(witnesses);
        }
    }
    let common = multiples.iter().copied().fold(0, gcd_u64);
    let multiples: Vec<f64> = multiples.iter().map(|&n| (n / common) as f64).collect();
    // Least-squares generator over all differences.
    let num: f64 = nonzero.iter().zip(&multiples).map(|(d, n)| d * n).sum();
    let den: f64 = multiples.iter().map(|n| n * n).sum();
    RangeGroupReport {
        kind: RangeKind::Lattice,
        generator: Some(num / den),
        witnesses,
        heuristic: true,
    }
}

/// Operator norm of `F ↦ tF + (1 − t)ν(F)·1` from the mean-zero part of
/// `L²(mix(ν, μ, t))` into `L²(μ)`. Bounded by `√t`.
pub fn site_contraction_norm(nu: &DiscreteMeasure, mu: &DiscreteMeasure, t: f64) -> Result<f64> {
    nu.check_same_alphabet(mu)?;
    if !(t > 0.0 && t <= 1.0) {
        return Err(Error::out_of_range("t", t));
    }
    let m = mix(nu, mu, t)?;
    let k = nu.len();
    // Orthonormal coordinates: F ↦ (√wᵢ Fᵢ) for each weighted space.
    let op = DMatrix::from_fn(k, k, |i, j| {
        let identity = if i == j { t } else { 0.0 };
        mu.weights[i].sqrt() * (identity + (1.0 - t) * nu.weights[j]) / m.weights[j].sqrt()
    });
    let u = nalgebra::DVector::from_iterator(k, m.weights.iter().map(|w| w.sqrt()));
    let projector = DMatrix::identity(k, k) - &u * u.transpose();
    let restricted = op * projector;
    let svd = restricted.svd(false, false);
    Ok(svd.singular_values.iter().copied().fold(0.0, f64::max))
}
