//! Nonsingular Bernoulli actions on trees and free groups.
//!
//! Edge marginals alternate between `μ₀` (edges pointing at the root) and
//! `μ₁` (edges pointing away). The crate computes the exact quantities
//! that decide the phase of such an action (Hellinger affinity, Chernoff
//! minimum, essential range of the log-ratios, spectral radius) and
//! checks them by Monte Carlo on sampled edge fields.

pub mod action;
pub mod classify;
pub mod cli;
pub mod error;
pub mod json;
pub mod measure;
pub mod simulate;
pub mod tree;

pub use action::FreeWord;
pub use classify::{Classification, KriegerReport, KriegerType, Phase, PhaseScanResult, SpectralRegime, SpectralReport};
pub use error::{Error, NoBlockReason, Result};
pub use measure::{DiscreteMeasure, MeasurePair, RangeGroupReport, RangeKind, ScalarDistribution};
pub use simulate::{FieldSample, PercolationReport, RecurrenceDiagnostic, Verdict};
pub use tree::{Direction, OrientedEdge, TreeSpec, Vertex};
