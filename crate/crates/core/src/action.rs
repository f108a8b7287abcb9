//! `𝔽_d` acting on its Cayley tree, and the exact nonsingularity and
//! Koopman quantities of the oriented-edge Bernoulli action.

use std::fmt;

use crate::error::{Error, Result};
use crate::measure::{hellinger_sq, DiscreteMeasure, MeasurePair};
use crate::tree::{inverse_letter, Direction, OrientedEdge, TreeSpec, Vertex};

/// Reduced word in `𝔽_d`; letters are `+(i+1)` for generator `i` and
/// `-(i+1)` for its inverse.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FreeWord {
    d: u32,
    letters: Vec<i32>,
}

fn code_of(letter: i32, d: u32) -> u32 {
    if letter > 0 {
        (letter - 1) as u32
    } else {
        (-letter - 1) as u32 + d
    }
}

fn letter_of(code: u32, d: u32) -> i32 {
    if code < d {
        code as i32 + 1
    } else {
        -((code - d) as i32 + 1)
    }
}

impl FreeWord {
    pub fn identity(d: u32) -> Self {
        Self { d, letters: Vec::new() }
    }

    /// Freely reduces the given letters.
    pub fn new(d: u32, letters: &[i32]) -> Result<Self> {
        let mut out: Vec<i32> = Vec::with_capacity(letters.len());
        for &l in letters {
            if l == 0 || l.unsigned_abs() > d {
                return Err(Error::InvalidVertex(format!("letter {l} in F_{d}")));
            }
            if out.last() == Some(&-l) {
                out.pop();
            } else {
                out.push(l);
            }
        }
        Ok(Self { d, letters: out })
    }

    /// Parses the Cayley vertex encoding (`"abA"`); the word must be reduced.
    pub fn parse(d: u32, s: &str) -> Result<Self> {
        let spec = TreeSpec::cayley(d)?;
        Ok(Self::from_vertex(d, &spec.parse_vertex(s)?))
    }

    /// The word `g` with `g·ρ = v`.
    pub fn from_vertex(d: u32, v: &Vertex) -> Self {
        Self {
            d,
            letters: v.steps().iter().map(|&c| letter_of(c, d)).collect(),
        }
    }

    pub fn rank(&self) -> u32 {
        self.d
    }

    pub fn letters(&self) -> &[i32] {
        &self.letters
    }

    /// Word length `|g| = d(ρ, g·ρ)`.
    pub fn len(&self) -> usize {
        self.letters.len()
    }

    /// Same as [`FreeWord::is_identity`].
    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn is_identity(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn inverse(&self) -> Self {
        Self {
            d: self.d,
            letters: self.letters.iter().rev().map(|l| -l).collect(),
        }
    }

    pub fn compose(&self, other: &FreeWord) -> Result<Self> {
        if self.d != other.d {
            return Err(Error::SpecMismatch(format!("F_{} vs F_{}", self.d, other.d)));
        }
        let mut all = self.letters.clone();
        all.extend_from_slice(&other.letters);
        Self::new(self.d, &all)
    }

    /// `g·ρ` as a vertex of the Cayley tree.
    pub fn to_vertex(&self) -> Vertex {
        Vertex::from_steps(self.letters.iter().map(|&l| code_of(l, self.d)).collect())
    }

    fn check_spec(&self, spec: &TreeSpec) -> Result<()> {
        match *spec {
            TreeSpec::Cayley { d } if d == self.d => Ok(()),
            other => Err(Error::SpecMismatch(format!("word in F_{} acting on {other}", self.d))),
        }
    }
}

impl fmt::Display for FreeWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_identity() {
            return f.write_str("e");
        }
        for &l in &self.letters {
            let c = if l > 0 {
                (b'a' + (l - 1) as u8) as char
            } else {
                (b'A' + (-l - 1) as u8) as char
            };
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

/// Left translation `v ↦ g·v` (reduced concatenation).
pub fn act_on_vertex(spec: &TreeSpec, g: &FreeWord, v: &Vertex) -> Result<Vertex> {
    g.check_spec(spec)?;
    spec.check_vertex(v)?;
    let mut steps: Vec<u32> = g.to_vertex().steps().to_vec();
    for &s in v.steps() {
        if steps.last().map(|&l| inverse_letter(l, g.d)) == Some(s) {
            steps.pop();
        } else {
            steps.push(s);
        }
    }
    Ok(Vertex::from_steps(steps))
}

/// `g·e`, keeping the from → to orientation of `e`.
pub fn act_on_edge(spec: &TreeSpec, g: &FreeWord, e: &OrientedEdge) -> Result<OrientedEdge> {
    let (from, to) = e.endpoints();
    let from = act_on_vertex(spec, g, from)?;
    let to = act_on_vertex(spec, g, to)?;
    Ok(OrientedEdge::from_endpoints(from, to).expect("translations preserve adjacency"))
}

/// Oriented edges whose orientation label changes under `g`: `2|g|`.
pub fn flipped_edge_count(g: &FreeWord) -> usize {
    2 * g.len()
}

/// Brute-force count of oriented edges `e` within distance `radius` of the
/// root whose orientation differs from that of `g·e`.
pub fn flipped_edges_brute(g: &FreeWord, radius: usize) -> Result<usize> {
    let spec = TreeSpec::cayley(g.d)?;
    let mut count = 0;
    for depth in 1..=radius {
        for local in 0..spec.sphere_size(depth)? {
            let child = spec.vertex_at(depth, local);
            let parent = child.parent().expect("depth ≥ 1");
            for direction in [Direction::TowardRoot, Direction::AwayFromRoot] {
                let e = OrientedEdge {
                    parent: parent.clone(),
                    child: child.clone(),
                    direction,
                };
                if act_on_edge(&spec, g, &e)?.direction != direction {
                    count += 1;
                }
            }
        }
    }
    Ok(count)
}

fn check_t(t: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::out_of_range("t", t));
    }
    Ok(())
}

/// Kakutani sum `Σ_e H²(μᵗ_{g·e}, μᵗ_e)` for the interpolated family,
/// in closed form `2|g| · H²(mix(ν, μ₀, t), mix(ν, μ₁, t))`.
pub fn kakutani_sum(g: &FreeWord, pair: &MeasurePair, nu: &DiscreteMeasure, t: f64) -> Result<f64> {
    check_t(t)?;
    let mixed = pair.mixed(nu, t)?;
    Ok(flipped_edge_count(g) as f64 * mixed.hellinger_sq())
}

/// Per-edge evaluation of [`kakutani_sum`]; only for cross-checking.
pub fn kakutani_sum_by_edges(g: &FreeWord, pair: &MeasurePair, nu: &DiscreteMeasure, t: f64) -> Result<f64> {
    check_t(t)?;
    let mixed = pair.mixed(nu, t)?;
    let spec = TreeSpec::cayley(g.d)?;
    let label = |dir: Direction| mixed.edge_measure(dir);
    let mut sum = 0.0;
    for depth in 1..=g.len() + 1 {
        for local in 0..spec.sphere_size(depth)? {
            let child = spec.vertex_at(depth, local);
            let parent = child.parent().expect("depth ≥ 1");
            for direction in [Direction::TowardRoot, Direction::AwayFromRoot] {
                let e = OrientedEdge {
                    parent: parent.clone(),
                    child: child.clone(),
                    direction,
                };
                let ge = act_on_edge(&spec, g, &e)?;
                sum += hellinger_sq(label(ge.direction), label(direction))?;
            }
        }
    }
    Ok(sum)
}

/// `⟨ρᵗ_g(1), 1⟩ = exp Σ_h log(1 − H²) = affinity(mix(ν,μ₀,t), mix(ν,μ₁,t))^{2|g|}`.
pub fn koopman_correlation(g: &FreeWord, pair: &MeasurePair, nu: &DiscreteMeasure, t: f64) -> Result<f64> {
    check_t(t)?;
    let a = pair.mixed(nu, t)?.affinity();
    Ok((flipped_edge_count(g) as f64 * a.ln()).exp())
}
