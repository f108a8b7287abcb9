//! Phase verdicts from the affinity threshold, Krieger types, spectral
//! radii on free groups and scans over the interpolation parameter.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::measure::{essential_range_group, DiscreteMeasure, MeasurePair, RangeGroupReport, RangeKind};

/// `|affinity − threshold|` at or below this counts as critical.
pub const CRITICAL_TOL: f64 = 1e-12;
/// Bisection in [`phase_scan`] stops only once `|affinity − threshold|` is this small.
pub const SCAN_VALUE_TOL: f64 = 1e-9;

/// Ordered from most dissipative to most mixing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum Phase {
    Dissipative,
    CriticalDissipative,
    CriticalUnknown,
    WeaklyMixing,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Dissipative => "Dissipative",
            Phase::CriticalDissipative => "CriticalDissipative",
            Phase::CriticalUnknown => "CriticalUnknown",
            Phase::WeaklyMixing => "WeaklyMixing",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Classification {
    pub phase: Phase,
    pub affinity: f64,
    pub threshold: f64,
    pub delta: f64,
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta.is_finite() {
        Ok(())
    } else {
        Err(Error::out_of_range("delta", delta))
    }
}

/// Threshold verdict for a tree action with Poincaré exponent `delta`.
///
/// At the critical affinity the action is dissipative when the vertex
/// orbit is the whole regular tree; otherwise the verdict is unknown.
pub fn classify_affinity(delta: f64, affinity: f64, regular_full_orbit: bool) -> Result<Classification> {
    check_delta(delta)?;
    if !(affinity > 0.0 && affinity <= 1.0) {
        return Err(Error::out_of_range("affinity", affinity));
    }
    let threshold = (-delta / 2.0).exp();
    let phase = if (affinity - threshold).abs() <= CRITICAL_TOL {
        if regular_full_orbit {
            Phase::CriticalDissipative
        } else {
            Phase::CriticalUnknown
        }
    } else if affinity > threshold {
        Phase::WeaklyMixing
    } else {
        Phase::Dissipative
    };
    Ok(Classification {
        phase,
        affinity,
        threshold,
        delta,
    })
}

pub fn classify_tree_action(delta: f64, pair: &MeasurePair, regular_full_orbit: bool) -> Result<Classification> {
    classify_affinity(delta, pair.affinity(), regular_full_orbit)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "type")]
pub enum KriegerType {
    /// Type II: the flow is `ℝ ↷ ℝ`. II₁ and II_∞ are not distinguished.
    FlowIsTranslation,
    TypeIIIlambda { lambda: f64 },
    TypeIII1,
}

impl KriegerType {
    fn from_range(r: &RangeGroupReport) -> Self {
        match (r.kind, r.generator) {
            (RangeKind::Trivial, _) => KriegerType::FlowIsTranslation,
            (RangeKind::Lattice, Some(a)) => KriegerType::TypeIIIlambda { lambda: (-a).exp() },
            _ => KriegerType::TypeIII1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KriegerReport {
    pub lambda_group: RangeGroupReport,
    pub krieger: KriegerType,
    pub sigma_group: RangeGroupReport,
    pub flow_of_weights: KriegerType,
    pub caveat: &'static str,
}

const WEAK_MIXING_CAVEAT: &str = "valid in the weakly mixing regime; weak mixing is not checked here";

/// Krieger type from the essential range of the log-ratios. `generators`
/// are extra logs (e.g. of modular function values) joined to the range
/// when computing the flow of weights; for discrete groups omit them.
pub fn krieger_type(pair: &MeasurePair, generators: Option<&[f64]>) -> KriegerReport {
    let lambda_group = essential_range_group(pair, None);
    let sigma_group = match generators {
        Some(g) if !g.is_empty() => essential_range_group(pair, Some(g)),
        _ => lambda_group.clone(),
    };
    KriegerReport {
        krieger: KriegerType::from_range(&lambda_group),
        flow_of_weights: KriegerType::from_range(&sigma_group),
        lambda_group,
        sigma_group,
        caveat: WEAK_MIXING_CAVEAT,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SpectralRegime {
    Dissipative,
    WeaklyMixingNonamenable,
    StronglyErgodic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectralReport {
    pub d: u32,
    pub affinity: f64,
    pub rho_action: f64,
    pub rho_group: f64,
    pub regime: SpectralRegime,
}

/// Spectral radius of the averaged Koopman operator for the uniform
/// measure on the free generators of `𝔽_d` and their inverses.
pub fn spectral_radius_free(d: u32, pair: &MeasurePair) -> Result<SpectralReport> {
    spectral_radius_from_affinity(d, pair.affinity())
}

pub fn spectral_radius_from_affinity(d: u32, a: f64) -> Result<SpectralReport> {
    if d < 2 {
        return Err(Error::out_of_range("d", d as f64));
    }
    if !(a > 0.0 && a <= 1.0) {
        return Err(Error::out_of_range("affinity", a));
    }
    let m = (2 * d - 1) as f64;
    let rho_group = m.sqrt() / d as f64;
    let kink = m.powf(-0.25);
    let rho_action = if a > kink {
        a * a / (2.0 * d as f64) * (m + a.powi(-4))
    } else {
        rho_group
    };
    let regime = if a <= m.powf(-0.5) {
        SpectralRegime::Dissipative
    } else if a <= kink {
        SpectralRegime::WeaklyMixingNonamenable
    } else {
        SpectralRegime::StronglyErgodic
    };
    Ok(SpectralReport {
        d,
        affinity: a,
        rho_action,
        rho_group,
        regime,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseScanResult {
    pub delta: f64,
    /// `(t, affinity_t)` on the uniform grid over `[0, 1]`.
    pub grid: Vec<(f64, f64)>,
    pub threshold: f64,
    pub t1: Option<f64>,
    pub crossings: usize,
    pub monotone: bool,
}

impl PhaseScanResult {
    /// Threshold verdict at every grid point.
    pub fn phases(&self) -> Vec<Phase> {
        self.grid
            .iter()
            .map(|&(_, a)| classify_affinity(self.delta, a, false).map(|c| c.phase).unwrap_or(Phase::Dissipative))
            .collect()
    }
}

/// Affinity of the interpolated pair `(mix(ν, μ₀, t), mix(ν, μ₁, t))`.
pub fn affinity_at(nu: &DiscreteMeasure, pair: &MeasurePair, t: f64) -> Result<f64> {
    Ok(pair.mixed(nu, t)?.affinity())
}

pub fn phase_scan(
    delta: f64,
    nu: &DiscreteMeasure,
    pair: &MeasurePair,
    grid_points: usize,
    bisect_tol: f64,
) -> Result<PhaseScanResult> {
    check_delta(delta)?;
    if grid_points < 16 {
        return Err(Error::out_of_range("grid_points", grid_points as f64));
    }
    if !(bisect_tol > 0.0 && bisect_tol.is_finite()) {
        return Err(Error::out_of_range("bisect_tol", bisect_tol));
    }
    if nu.len() != pair.alphabet_len() {
        return Err(Error::AlphabetMismatch {
            left: nu.len(),
            right: pair.alphabet_len(),
        });
    }
    let threshold = (-delta / 2.0).exp();
    let last = (grid_points - 1) as f64;
    let grid = (0..grid_points)
        .into_par_iter()
        .map(|i| {
            let t = i as f64 / last;
            Ok((t, affinity_at(nu, pair, t)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let above: Vec<bool> = grid.iter().map(|&(_, a)| a > threshold).collect();
    let changes: Vec<usize> = (0..grid_points - 1).filter(|&i| above[i] != above[i + 1]).collect();
    let diffs = grid.windows(2).map(|w| w[1].1 - w[0].1);
    let monotone = diffs.clone().all(|x| x <= 0.0) || diffs.clone().all(|x| x >= 0.0);
    let t1 = match changes.as_slice() {
        [i] => Some(bisect(nu, pair, threshold, grid[*i], grid[*i + 1], bisect_tol)?),
        _ => None,
    };
    Ok(PhaseScanResult {
        delta,
        grid,
        threshold,
        t1,
        crossings: changes.len(),
        monotone,
    })
}

fn bisect(
    nu: &DiscreteMeasure,
    pair: &MeasurePair,
    threshold: f64,
    (mut lo, a_lo): (f64, f64),
    (mut hi, _): (f64, f64),
    tol: f64,
) -> Result<f64> {
    let lo_above = a_lo > threshold;
    let mut mid = (lo + hi) / 2.0;
    for _ in 0..200 {
        mid = (lo + hi) / 2.0;
        let f = affinity_at(nu, pair, mid)? - threshold;
        if hi - lo <= tol && f.abs() <= SCAN_VALUE_TOL {
            break;
        }
        if (f > 0.0) == lo_above {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(mid)
}
