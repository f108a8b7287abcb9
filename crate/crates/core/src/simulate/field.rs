use crate::action::{act_on_edge, act_on_vertex, FreeWord};
use crate::error::{Error, Result};
use crate::measure::MeasurePair;
use crate::tree::{Direction, OrientedEdge, TreeSpec, Vertex};

use super::rng::{unit, CategoricalSampler};

/// Default cap on vertices a dense truncation may allocate.
pub const DEFAULT_VERTEX_CAP: u64 = 10_000_000;

/// Per-edge sampling tables shared by the dense and lazy field views.
#[derive(Debug, Clone)]
pub(crate) struct EdgeTables {
    toward: CategoricalSampler,
    away: CategoricalSampler,
    toward_values: Vec<f64>,
    away_values: Vec<f64>,
}

impl EdgeTables {
    pub(crate) fn new(pair: &MeasurePair) -> Self {
        let n = pair.alphabet_len();
        Self {
            toward: CategoricalSampler::new(pair.mu0().weights()),
            away: CategoricalSampler::new(pair.mu1().weights()),
            toward_values: (0..n).map(|i| pair.edge_log_value(Direction::TowardRoot, i)).collect(),
            away_values: (0..n).map(|i| pair.edge_log_value(Direction::AwayFromRoot, i)).collect(),
        }
    }

    /// Symbol on the edge with canonical id `id` (low bit = away).
    #[inline]
    pub(crate) fn symbol(&self, key: u64, id: u64) -> usize {
        let u = unit(key, id);
        if id & 1 == 0 {
            self.toward.sample(u)
        } else {
            self.away.sample(u)
        }
    }

    #[inline]
    pub(crate) fn value(&self, id: u64, symbol: usize) -> f64 {
        if id & 1 == 0 {
            self.toward_values[symbol]
        } else {
            self.away_values[symbol]
        }
    }

    /// `X` summed over both orientations of the edge above vertex `index`.
    #[inline]
    pub(crate) fn step(&self, key: u64, index: u64) -> f64 {
        let t = 2 * index;
        let a = t + 1;
        self.value(t, self.symbol(key, t)) + self.value(a, self.symbol(key, a))
    }
}

/// Read access to a configuration `x ∈ ∏_e X₀`.
pub trait EdgeField {
    fn spec(&self) -> &TreeSpec;
    fn pair(&self) -> &MeasurePair;
    fn symbol(&self, edge: &OrientedEdge) -> Result<usize>;
}

/// Edge field sampled up to a fixed depth and stored by canonical edge id.
///
/// Towards-root edges carry `μ₀` symbols, away-from-root edges `μ₁`
/// symbols. The sample is a pure function of `(spec, pair, depth, seed)`.
#[derive(Debug, Clone)]
pub struct FieldSample {
    spec: TreeSpec,
    pair: MeasurePair,
    depth: usize,
    seed: u64,
    symbols: Vec<u16>,
}

pub fn sample_field(spec: &TreeSpec, pair: &MeasurePair, depth: usize, seed: u64) -> Result<FieldSample> {
    sample_field_with_cap(spec, pair, depth, seed, DEFAULT_VERTEX_CAP)
}

pub fn sample_field_with_cap(
    spec: &TreeSpec,
    pair: &MeasurePair,
    depth: usize,
    seed: u64,
    vertex_cap: u64,
) -> Result<FieldSample> {
    if pair.alphabet_len() > u16::MAX as usize {
        return Err(Error::out_of_range("alphabet size", pair.alphabet_len() as f64));
    }
    let vertices = spec.ball_size(depth).map_err(|_| Error::DepthBudget {
        depth,
        vertices: u64::MAX,
        cap: vertex_cap,
    })?;
    if vertices > vertex_cap {
        return Err(Error::DepthBudget {
            depth,
            vertices,
            cap: vertex_cap,
        });
    }
    let tables = EdgeTables::new(pair);
    // Ids 0 and 1 would belong to the root, which has no parent edge.
    let symbols = (0..2 * vertices)
        .map(|id| if id < 2 { 0 } else { tables.symbol(seed, id) as u16 })
        .collect();
    Ok(FieldSample {
        spec: *spec,
        pair: pair.clone(),
        depth,
        seed,
        symbols,
    })
}

impl FieldSample {
    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of oriented edges carrying a symbol.
    pub fn populated_edges(&self) -> usize {
        self.symbols.len().saturating_sub(2)
    }

    /// `X` over both orientations of the edge above vertex `index`.
    pub(crate) fn step(&self, index: u64) -> f64 {
        let t = 2 * index as usize;
        self.pair.edge_log_value(Direction::TowardRoot, self.symbols[t] as usize)
            + self.pair.edge_log_value(Direction::AwayFromRoot, self.symbols[t + 1] as usize)
    }

    /// `(canonical edge id, symbol)` for every populated edge.
    pub fn symbols(&self) -> impl Iterator<Item = (u64, usize)> + '_ {
        self.symbols
            .iter()
            .enumerate()
            .skip(2)
            .map(|(id, &s)| (id as u64, s as usize))
    }
}

impl EdgeField for FieldSample {
    fn spec(&self) -> &TreeSpec {
        &self.spec
    }

    fn pair(&self) -> &MeasurePair {
        &self.pair
    }

    fn symbol(&self, edge: &OrientedEdge) -> Result<usize> {
        if edge.child.depth() > self.depth {
            return Err(Error::OutOfDepth {
                distance: edge.child.depth(),
                depth: self.depth,
            });
        }
        let id = self.spec.edge_id(edge)?;
        Ok(self.symbols[id as usize] as usize)
    }
}

/// Unbounded field drawn on demand; agrees edge by edge with
/// [`FieldSample`] for the same seed.
#[derive(Debug, Clone)]
pub struct LazyField {
    spec: TreeSpec,
    pair: MeasurePair,
    seed: u64,
    tables: EdgeTables,
}

impl LazyField {
    pub fn new(spec: &TreeSpec, pair: &MeasurePair, seed: u64) -> Self {
        Self {
            spec: *spec,
            pair: pair.clone(),
            seed,
            tables: EdgeTables::new(pair),
        }
    }

    /// Same field under a different seed, reusing the sampling tables.
    pub fn reseeded(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }
}

impl EdgeField for LazyField {
    fn spec(&self) -> &TreeSpec {
        &self.spec
    }

    fn pair(&self) -> &MeasurePair {
        &self.pair
    }

    fn symbol(&self, edge: &OrientedEdge) -> Result<usize> {
        let id = self.spec.edge_id(edge)?;
        Ok(self.tables.symbol(self.seed, id))
    }
}

/// The configuration `h⁻¹·x`, i.e. `(h⁻¹·x)_e = x_{h·e}`.
pub struct Translated<'a, F: EdgeField> {
    inner: &'a F,
    by: FreeWord,
}

impl<'a, F: EdgeField> Translated<'a, F> {
    pub fn new(inner: &'a F, by: FreeWord) -> Self {
        Self { inner, by }
    }
}

impl<F: EdgeField> EdgeField for Translated<'_, F> {
    fn spec(&self) -> &TreeSpec {
        self.inner.spec()
    }

    fn pair(&self) -> &MeasurePair {
        self.inner.pair()
    }

    fn symbol(&self, edge: &OrientedEdge) -> Result<usize> {
        self.inner.symbol(&act_on_edge(self.inner.spec(), &self.by, edge)?)
    }
}

/// `S_v = Σ_{e ∈ E([ρ, v])} X_e`, both orientations of each geodesic edge.
pub fn cocycle_sum<F: EdgeField>(field: &F, v: &Vertex) -> Result<f64> {
    let spec = field.spec();
    spec.check_vertex(v)?;
    let pair = field.pair();
    spec.path_edges(&Vertex::root(), v)
        .iter()
        .try_fold(0.0, |acc, e| Ok(acc + pair.edge_log_value(e.direction, field.symbol(e)?)))
}

/// `dgμ/dμ = exp(S_{g·ρ})`.
pub fn rn_derivative<F: EdgeField>(field: &F, g: &FreeWord) -> Result<f64> {
    let v = act_on_vertex(field.spec(), g, &Vertex::root())?;
    Ok(cocycle_sum(field, &v)?.exp())
}
