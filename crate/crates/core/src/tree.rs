//! Implicit rooted trees: the full `q`-regular tree and the Cayley tree of
//! the free group `𝔽_d`.
//!
//! Vertices are paths from the root and are never materialized in bulk.
//! Every vertex other than the root has a dense breadth-first index, which
//! also names the two oriented edges joining it to its parent.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};

/// Orientation of an edge relative to the root.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Direction {
    TowardRoot,
    AwayFromRoot,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(tag = "kind")]
pub enum TreeSpec {
    /// Full `q`-regular tree, `q ≥ 3`.
    Regular { q: u32 },
    /// Cayley tree of `𝔽_d`, the `2d`-regular tree, `d ≥ 2`.
    Cayley { d: u32 },
}

impl TreeSpec {
    pub fn regular(q: u32) -> Result<Self> {
        if q < 3 {
            return Err(Error::InvalidTreeSpec(format!("regular:{q}")));
        }
        Ok(TreeSpec::Regular { q })
    }

    pub fn cayley(d: u32) -> Result<Self> {
        if !(2..=26).contains(&d) {
            return Err(Error::InvalidTreeSpec(format!("cayley:{d}")));
        }
        Ok(TreeSpec::Cayley { d })
    }

    /// Vertex degree.
    pub fn degree(&self) -> u32 {
        match *self {
            TreeSpec::Regular { q } => q,
            TreeSpec::Cayley { d } => 2 * d,
        }
    }

    /// Children of a non-root vertex.
    pub fn branching(&self) -> u32 {
        self.degree() - 1
    }

    /// Number of vertices at distance `n` from the root.
    pub fn sphere_size(&self, n: usize) -> Result<u64> {
        if n == 0 {
            return Ok(1);
        }
        let b = self.branching() as u64;
        let mut count = self.degree() as u64;
        for _ in 1..n {
            count = count.checked_mul(b).ok_or(Error::Overflow("sphere size"))?;
        }
        Ok(count)
    }

    /// Number of vertices at distance `≤ n`.
    pub fn ball_size(&self, n: usize) -> Result<u64> {
        (0..=n).try_fold(0u64, |acc, k| {
            acc.checked_add(self.sphere_size(k)?)
                .ok_or(Error::Overflow("ball size"))
        })
    }

    /// Breadth-first index of the first vertex at depth `n`.
    pub fn depth_offset(&self, n: usize) -> Result<u64> {
        if n == 0 {
            Ok(0)
        } else {
            self.ball_size(n - 1)
        }
    }

    /// `δ = log(q − 1)` for the full regular tree, `log(2d − 1)` for `𝔽_d`.
    pub fn poincare_exponent(&self) -> f64 {
        (self.branching() as f64).ln()
    }

    /// Validates step labels of a vertex.
    pub fn check_vertex(&self, v: &Vertex) -> Result<()> {
        let bad = || Error::InvalidVertex(self.encode(v));
        match *self {
            TreeSpec::Regular { q } => {
                for (i, &s) in v.steps.iter().enumerate() {
                    let limit = if i == 0 { q } else { q - 1 };
                    if s >= limit {
                        return Err(bad());
                    }
                }
            }
            TreeSpec::Cayley { d } => {
                for (i, &s) in v.steps.iter().enumerate() {
                    if s >= 2 * d || (i > 0 && s == inverse_letter(v.steps[i - 1], d)) {
                        return Err(bad());
                    }
                }
            }
        }
        Ok(())
    }

    /// Rank of step `i` of `v` among the admissible choices at that step.
    fn step_rank(&self, v: &Vertex, i: usize) -> u64 {
        let s = v.steps[i];
        match *self {
            TreeSpec::Regular { .. } => s as u64,
            TreeSpec::Cayley { d } => {
                if i == 0 {
                    s as u64
                } else {
                    let inv = inverse_letter(v.steps[i - 1], d);
                    if s > inv {
                        (s - 1) as u64
                    } else {
                        s as u64
                    }
                }
            }
        }
    }

    /// Position of `v` within its sphere.
    pub fn local_index(&self, v: &Vertex) -> u64 {
        let b = self.branching() as u64;
        let mut local = 0u64;
        for i in 0..v.steps.len() {
            let r = self.step_rank(v, i);
            local = if i == 0 { r } else { local * b + r };
        }
        local
    }

    /// Dense breadth-first index of `v`; the root is 0.
    pub fn vertex_index(&self, v: &Vertex) -> Result<u64> {
        Ok(self.depth_offset(v.depth())? + self.local_index(v))
    }

    /// Inverse of [`TreeSpec::local_index`].
    pub fn vertex_at(&self, depth: usize, mut local: u64) -> Vertex {
        let b = self.branching() as u64;
        let mut ranks = vec![0u64; depth];
        for i in (0..depth).rev() {
            if i == 0 {
                ranks[0] = local;
            } else {
                ranks[i] = local % b;
                local /= b;
            }
        }
        let mut steps = Vec::with_capacity(depth);
        for (i, &r) in ranks.iter().enumerate() {
            let s = match *self {
                TreeSpec::Regular { .. } => r as u32,
                TreeSpec::Cayley { d } => {
                    if i == 0 {
                        r as u32
                    } else {
                        let inv = inverse_letter(steps[i - 1], d);
                        if r as u32 >= inv {
                            r as u32 + 1
                        } else {
                            r as u32
                        }
                    }
                }
            };
            steps.push(s);
        }
        Vertex { steps }
    }

    /// Canonical string: dot-separated child indices for regular trees,
    /// reduced words (`a`, `b`, … and inverses `A`, `B`, …) for Cayley trees.
    pub fn encode(&self, v: &Vertex) -> String {
        match *self {
            TreeSpec::Regular { .. } => v
                .steps
                .iter()
                .map(|s| s.to_string())
                .collect::<Vec<_>>()
                .join("."),
            TreeSpec::Cayley { d } => v.steps.iter().map(|&s| letter_char(s, d)).collect(),
        }
    }

    pub fn parse_vertex(&self, s: &str) -> Result<Vertex> {
        let bad = || Error::InvalidVertex(s.to_string());
        let steps = if s.is_empty() {
            Vec::new()
        } else {
            match *self {
                TreeSpec::Regular { .. } => s
                    .split('.')
                    .map(|p| p.parse::<u32>().map_err(|_| bad()))
                    .collect::<Result<Vec<_>>>()?,
                TreeSpec::Cayley { d } => s
                    .chars()
                    .map(|c| letter_code(c, d).ok_or_else(bad))
                    .collect::<Result<Vec<_>>>()?,
            }
        };
        let v = Vertex { steps };
        self.check_vertex(&v).map_err(|_| bad())?;
        Ok(v)
    }

    /// Geodesic distance.
    pub fn distance(&self, v: &Vertex, w: &Vertex) -> usize {
        let c = v.common_prefix_len(w);
        v.depth() + w.depth() - 2 * c
    }

    /// Both orientations of every edge on the geodesic `[v, w]`, walking
    /// from `v` up to the branch point and then down to `w`.
    pub fn path_edges(&self, v: &Vertex, w: &Vertex) -> Vec<OrientedEdge> {
        let c = v.common_prefix_len(w);
        let mut edges = Vec::with_capacity(2 * self.distance(v, w));
        for k in (c + 1..=v.depth()).rev() {
            edges.extend(OrientedEdge::pair_above(v.prefix(k)));
        }
        for k in c + 1..=w.depth() {
            edges.extend(OrientedEdge::pair_above(w.prefix(k)));
        }
        edges
    }

    /// Canonical id of an oriented edge: `2·index(child) + [away]`.
    pub fn edge_id(&self, e: &OrientedEdge) -> Result<u64> {
        let idx = self.vertex_index(&e.child)?;
        let bit = match e.direction {
            Direction::TowardRoot => 0,
            Direction::AwayFromRoot => 1,
        };
        idx.checked_mul(2)
            .and_then(|x| x.checked_add(bit))
            .ok_or(Error::Overflow("edge id"))
    }
}

impl fmt::Display for TreeSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TreeSpec::Regular { q } => write!(f, "regular:{q}"),
            TreeSpec::Cayley { d } => write!(f, "cayley:{d}"),
        }
    }
}

impl FromStr for TreeSpec {
    type Err = Error;

    /// Accepts `regular:<q>` or `cayley:<d>`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidTreeSpec(s.to_string());
        let (kind, n) = s.split_once(':').ok_or_else(bad)?;
        let n: u32 = n.trim().parse().map_err(|_| bad())?;
        match kind.trim() {
            "regular" => TreeSpec::regular(n),
            "cayley" => TreeSpec::cayley(n),
            _ => Err(bad()),
        }
    }
}

/// Letter code of the inverse: generator `i < d` ↔ `d + i`.
pub(crate) fn inverse_letter(s: u32, d: u32) -> u32 {
    if s < d {
        s + d
    } else {
        s - d
    }
}

fn letter_char(s: u32, d: u32) -> char {
    if s < d {
        (b'a' + s as u8) as char
    } else {
        (b'A' + (s - d) as u8) as char
    }
}

fn letter_code(c: char, d: u32) -> Option<u32> {
    match c {
        'a'..='z' if (c as u32 - 'a' as u32) < d => Some(c as u32 - 'a' as u32),
        'A'..='Z' if (c as u32 - 'A' as u32) < d => Some(c as u32 - 'A' as u32 + d),
        _ => None,
    }
}

/// A vertex as the sequence of steps from the root.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Vertex {
    steps: Vec<u32>,
}

impl Vertex {
    pub fn root() -> Self {
        Self::default()
    }

    /// Unchecked; validate with [`TreeSpec::check_vertex`].
    pub fn from_steps(steps: Vec<u32>) -> Self {
        Self { steps }
    }

    pub fn steps(&self) -> &[u32] {
        &self.steps
    }

    pub fn depth(&self) -> usize {
        self.steps.len()
    }

    pub fn is_root(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn parent(&self) -> Option<Vertex> {
        if self.is_root() {
            None
        } else {
            Some(self.prefix(self.depth() - 1))
        }
    }

    pub fn child(&self, step: u32) -> Vertex {
        let mut steps = self.steps.clone();
        steps.push(step);
        Vertex { steps }
    }

    pub fn prefix(&self, k: usize) -> Vertex {
        Vertex {
            steps: self.steps[..k].to_vec(),
        }
    }

    fn common_prefix_len(&self, other: &Vertex) -> usize {
        self.steps
            .iter()
            .zip(&other.steps)
            .take_while(|(a, b)| a == b)
            .count()
    }
}

/// Oriented edge between `parent` and `child`, where `child` extends
/// `parent` by one step. `TowardRoot` runs child → parent.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct OrientedEdge {
    pub parent: Vertex,
    pub child: Vertex,
    pub direction: Direction,
}

impl OrientedEdge {
    /// The two oriented edges joining a non-root vertex to its parent.
    fn pair_above(child: Vertex) -> [OrientedEdge; 2] {
        let parent = child.parent().expect("non-root vertex");
        [
            OrientedEdge {
                parent: parent.clone(),
                child: child.clone(),
                direction: Direction::TowardRoot,
            },
            OrientedEdge {
                parent,
                child,
                direction: Direction::AwayFromRoot,
            },
        ]
    }

    /// Edge running `from → to`; `None` unless the endpoints are adjacent.
    pub fn from_endpoints(from: Vertex, to: Vertex) -> Option<OrientedEdge> {
        if to.depth() == from.depth() + 1 && to.parent().as_ref() == Some(&from) {
            Some(OrientedEdge {
                parent: from,
                child: to,
                direction: Direction::AwayFromRoot,
            })
        } else if from.depth() == to.depth() + 1 && from.parent().as_ref() == Some(&to) {
            Some(OrientedEdge {
                parent: to,
                child: from,
                direction: Direction::TowardRoot,
            })
        } else {
            None
        }
    }

    /// `(from, to)` endpoints.
    pub fn endpoints(&self) -> (&Vertex, &Vertex) {
        match self.direction {
            Direction::TowardRoot => (&self.child, &self.parent),
            Direction::AwayFromRoot => (&self.parent, &self.child),
        }
    }
}

/// Least-squares slope of `log(count_n)` against `n` over `n0..=n1`.
pub fn estimate_exponent(sphere_counts: &[u64], window: (usize, usize)) -> Result<f64> {
    let (n0, n1) = window;
    let degenerate = || Error::DegenerateWindow {
        n0,
        n1,
        len: sphere_counts.len(),
    };
    if n0 >= n1 || n1 >= sphere_counts.len() {
        return Err(degenerate());
    }
    if sphere_counts[n0..=n1].contains(&0) {
        return Err(degenerate());
    }
    let xs: Vec<f64> = (n0..=n1).map(|n| n as f64).collect();
    let ys: Vec<f64> = sphere_counts[n0..=n1].iter().map(|&c| (c as f64).ln()).collect();
    Ok(ols_slope(&xs, &ys))
}

pub(crate) fn ols_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}
