//! Labeled simple graphs on `{0..n-1}` with bitset adjacency rows, plus
//! matchings, degree sequences, and the graph6 interchange format.
//!
//! Graphs are labeled throughout: equality and hashing use the row-major
//! adjacency bit string, never an isomorphism-reduced form.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Hard representation cap: one `u64` bitset row per vertex.
pub const MAX_VERTICES: usize = 64;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("vertex count {n} exceeds the configured cap {cap}")]
    TooManyVertices { n: usize, cap: usize },
    #[error("vertex {v} out of range for a graph on {n} vertices")]
    VertexOutOfRange { v: usize, n: usize },
    #[error("self-loop at vertex {0} is not allowed")]
    SelfLoop(usize),
    #[error("matching edge ({u},{v}) already present in the graph")]
    EdgeOverlap { u: usize, v: usize },
    #[error("matching reuses vertex {0}")]
    VertexReused(usize),
    #[error("malformed graph6 input: {0}")]
    MalformedGraph6(String),
}

/// A labeled simple graph: `n` vertices, adjacency as `n` bit rows.
///
/// Invariants maintained by construction: symmetric adjacency, zero diagonal,
/// all bits above `n` clear.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Graph {
    n: usize,
    rows: Vec<u64>,
}

impl Graph {
    /// Graph with no edges.
    pub fn empty(n: usize) -> Result<Self, GraphError> {
        if n > MAX_VERTICES {
            return Err(GraphError::TooManyVertices {
                n,
                cap: MAX_VERTICES,
            });
        }
        Ok(Graph {
            n,
            rows: vec![0; n],
        })
    }

    /// Complete graph `K_n`: all off-diagonal bits set.
    pub fn complete(n: usize) -> Result<Self, GraphError> {
        let mut g = Graph::empty(n)?;
        let full = mask_n(n);
        for v in 0..n {
            g.rows[v] = full & !bit(v);
        }
        Ok(g)
    }

    /// Cycle `0-1-...-(n-1)-0`; requires `n >= 3`.
    pub fn cycle(n: usize) -> Result<Self, GraphError> {
        let mut g = Graph::empty(n)?;
        if n < 3 {
            return Ok(g);
        }
        for v in 0..n {
            g.add_edge(v, (v + 1) % n)?;
        }
        Ok(g)
    }

    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self, GraphError> {
        let mut g = Graph::empty(n)?;
        for &(u, v) in edges {
            g.add_edge(u, v)?;
        }
        Ok(g)
    }

    pub fn vertex_count(&self) -> usize {
        self.n
    }

    pub fn add_edge(&mut self, u: usize, v: usize) -> Result<(), GraphError> {
        self.check_vertex(u)?;
        self.check_vertex(v)?;
        if u == v {
            return Err(GraphError::SelfLoop(u));
        }
        self.rows[u] |= bit(v);
        self.rows[v] |= bit(u);
        Ok(())
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        u < self.n && v < self.n && self.rows[u] & bit(v) != 0
    }

    /// Backtracking support for the enumerators; not part of the public API,
    /// graphs stay immutable after construction everywhere else.
    pub(crate) fn remove_edge(&mut self, u: usize, v: usize) {
        self.rows[u] &= !bit(v);
        self.rows[v] &= !bit(u);
    }

    /// Neighbor bitset of `v`.
    pub fn row(&self, v: usize) -> u64 {
        self.rows[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.rows[v].count_ones() as usize
    }

    pub fn degrees(&self) -> Vec<usize> {
        (0..self.n).map(|v| self.degree(v)).collect()
    }

    pub fn max_degree(&self) -> usize {
        (0..self.n).map(|v| self.degree(v)).max().unwrap_or(0)
    }

    pub fn edge_count(&self) -> usize {
        self.rows
            .iter()
            .map(|r| r.count_ones() as usize)
            .sum::<usize>()
            / 2
    }

    /// Edges as `(u, v)` pairs with `u < v`, in row-major order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.edge_count());
        for u in 0..self.n {
            let mut upper = self.rows[u] & !low_mask(u + 1);
            while upper != 0 {
                let v = upper.trailing_zeros() as usize;
                upper &= upper - 1;
                out.push((u, v));
            }
        }
        out
    }

    /// Edge-complement within `K_n`: `uv` present iff `u != v` and `uv` absent here.
    pub fn complement(&self) -> Graph {
        let full = mask_n(self.n);
        let rows = (0..self.n)
            .map(|v| (full & !bit(v)) & !self.rows[v])
            .collect();
        Graph { n: self.n, rows }
    }

    /// Disjoint union of edge sets with a matching; every matching edge must be
    /// absent from the graph.
    pub fn union_with_matching(&self, m: &Matching) -> Result<Graph, GraphError> {
        let mut g = self.clone();
        for &(u, v) in m.pairs() {
            g.check_vertex(u)?;
            g.check_vertex(v)?;
            if self.has_edge(u, v) {
                return Err(GraphError::EdgeOverlap { u, v });
            }
            g.add_edge(u, v)?;
        }
        Ok(g)
    }

    pub fn is_regular(&self, d: usize) -> bool {
        (0..self.n).all(|v| self.degree(v) == d)
    }

    /// True iff every edge of `self` is an edge of `other` (same vertex count).
    pub fn is_subgraph_of(&self, other: &Graph) -> bool {
        self.n == other.n && self.rows.iter().zip(&other.rows).all(|(a, b)| a & !b == 0)
    }

    /// True iff no edge is shared with `other`.
    pub fn edge_disjoint_from(&self, other: &Graph) -> bool {
        self.rows.iter().zip(&other.rows).all(|(a, b)| a & b == 0)
    }

    fn check_vertex(&self, v: usize) -> Result<(), GraphError> {
        if v >= self.n {
            return Err(GraphError::VertexOutOfRange { v, n: self.n });
        }
        Ok(())
    }

    /// Standard graph6 encoding (single line, no header).
    pub fn to_graph6(&self) -> String {
        let mut out = Vec::new();
        encode_graph6_order(self.n, &mut out);
        // Upper triangle in column order: for j in 1..n, bits (0,j)..(j-1,j).
        let mut acc: u8 = 0;
        let mut nbits = 0;
        for j in 1..self.n {
            for i in 0..j {
                acc <<= 1;
                if self.has_edge(i, j) {
                    acc |= 1;
                }
                nbits += 1;
                if nbits == 6 {
                    out.push(acc + 63);
                    acc = 0;
                    nbits = 0;
                }
            }
        }
        if nbits > 0 {
            acc <<= 6 - nbits;
            out.push(acc + 63);
        }
        String::from_utf8(out).expect("graph6 bytes are printable ASCII")
    }

    /// Decode a graph6 line.
    pub fn from_graph6(s: &str) -> Result<Graph, GraphError> {
        let bytes = s.trim_end().as_bytes();
        let (n, mut pos) = decode_graph6_order(bytes)?;
        let mut g = Graph::empty(n)?;
        let nbits = n * n.saturating_sub(1) / 2;
        let expect_bytes = nbits.div_ceil(6);
        if bytes.len() - pos != expect_bytes {
            return Err(GraphError::MalformedGraph6(format!(
                "expected {} data bytes for n={}, found {}",
                expect_bytes,
                n,
                bytes.len() - pos
            )));
        }
        let mut acc: u32 = 0;
        let mut avail = 0;
        for j in 1..n {
            for i in 0..j {
                if avail == 0 {
                    let b = bytes[pos];
                    pos += 1;
                    if !(63..=126).contains(&b) {
                        return Err(GraphError::MalformedGraph6(format!(
                            "byte {b:#x} outside graph6 range"
                        )));
                    }
                    acc = (b - 63) as u32;
                    avail = 6;
                }
                avail -= 1;
                if acc >> avail & 1 == 1 {
                    g.add_edge(i, j)?;
                }
            }
        }
        // Padding bits must be zero.
        if avail > 0 && acc & low_mask(avail) as u32 != 0 {
            return Err(GraphError::MalformedGraph6(
                "nonzero padding bits".to_string(),
            ));
        }
        Ok(g)
    }
}

impl fmt::Debug for Graph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Graph(n={}, g6={:?})", self.n, self.to_graph6())
    }
}

impl fmt::Display for Graph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_graph6())
    }
}

impl Serialize for Graph {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_graph6())
    }
}

impl<'de> Deserialize<'de> for Graph {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Graph::from_graph6(&s).map_err(serde::de::Error::custom)
    }
}

fn encode_graph6_order(n: usize, out: &mut Vec<u8>) {
    if n <= 62 {
        out.push(n as u8 + 63);
    } else {
        // 63 <= n <= 258047: '~' then 18 bits in three 6-bit groups.
        out.push(126);
        out.push(((n >> 12) & 0x3f) as u8 + 63);
        out.push(((n >> 6) & 0x3f) as u8 + 63);
        out.push((n & 0x3f) as u8 + 63);
    }
}

fn decode_graph6_order(bytes: &[u8]) -> Result<(usize, usize), GraphError> {
    match bytes.first() {
        None => Err(GraphError::MalformedGraph6("empty input".to_string())),
        Some(&126) => {
            if bytes.len() < 4 {
                return Err(GraphError::MalformedGraph6(
                    "truncated multi-byte order".to_string(),
                ));
            }
            if bytes[1] == 126 {
                return Err(GraphError::MalformedGraph6(
                    "8-byte graph6 orders exceed the vertex cap".to_string(),
                ));
            }
            let mut n = 0usize;
            for &b in &bytes[1..4] {
                if !(63..=126).contains(&b) {
                    return Err(GraphError::MalformedGraph6(format!(
                        "byte {b:#x} outside graph6 range"
                    )));
                }
                n = n << 6 | (b - 63) as usize;
            }
            if n > MAX_VERTICES {
                return Err(GraphError::MalformedGraph6(format!(
                    "order {n} exceeds the vertex cap {MAX_VERTICES}"
                )));
            }
            Ok((n, 4))
        }
        Some(&b) => {
            if !(63..=125).contains(&b) {
                return Err(GraphError::MalformedGraph6(format!(
                    "byte {b:#x} outside graph6 range"
                )));
            }
            Ok(((b - 63) as usize, 1))
        }
    }
}

#[inline]
fn bit(v: usize) -> u64 {
    1u64 << v
}

#[inline]
fn low_mask(k: usize) -> u64 {
    if k >= 64 {
        u64::MAX
    } else {
        (1u64 << k) - 1
    }
}

/// Bitset with the lowest `n` bits set.
pub fn mask_n(n: usize) -> u64 {
    low_mask(n)
}

/// A set of pairwise vertex-disjoint edges.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Matching {
    pairs: Vec<(usize, usize)>,
}

impl Matching {
    /// Build from edge pairs; normalizes each pair to `u < v` and sorts.
    pub fn new(pairs: Vec<(usize, usize)>) -> Result<Self, GraphError> {
        let mut norm: Vec<(usize, usize)> = Vec::with_capacity(pairs.len());
        let mut seen: u128 = 0;
        for (a, b) in pairs {
            if a == b {
                return Err(GraphError::SelfLoop(a));
            }
            for v in [a, b] {
                if v >= 128 {
                    return Err(GraphError::VertexOutOfRange { v, n: 128 });
                }
                if seen >> v & 1 == 1 {
                    return Err(GraphError::VertexReused(v));
                }
                seen |= 1 << v;
            }
            norm.push((a.min(b), a.max(b)));
        }
        norm.sort_unstable();
        Ok(Matching { pairs: norm })
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Covers all `n` vertices (`n` even).
    pub fn is_perfect(&self, n: usize) -> bool {
        2 * self.pairs.len() == n && self.pairs.iter().all(|&(u, v)| u < n && v < n)
    }

    pub fn covers(&self, v: usize) -> bool {
        self.pairs.iter().any(|&(a, b)| a == v || b == v)
    }

    /// The matching as a 1-regular-or-less graph on `n` vertices.
    pub fn to_graph(&self, n: usize) -> Result<Graph, GraphError> {
        Graph::from_edges(n, &self.pairs)
    }
}

/// A target degree per vertex, as used by the exact degree-sequence counters.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DegreeSequence {
    values: Vec<usize>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DegreeSequenceError {
    #[error("degree sum {0} is odd")]
    OddSum(usize),
    #[error("entry {value} at vertex {v} must be below the vertex count {n}")]
    EntryTooLarge { v: usize, value: usize, n: usize },
}

impl DegreeSequence {
    pub fn new(values: Vec<usize>) -> Result<Self, DegreeSequenceError> {
        let n = values.len();
        let sum: usize = values.iter().sum();
        if sum % 2 == 1 {
            return Err(DegreeSequenceError::OddSum(sum));
        }
        if let Some((v, &value)) = values.iter().enumerate().find(|&(_, &x)| x >= n) {
            return Err(DegreeSequenceError::EntryTooLarge { v, value, n });
        }
        Ok(DegreeSequence { values })
    }

    /// The constant sequence `(d, ..., d)` on `n` vertices.
    pub fn constant(n: usize, d: usize) -> Result<Self, DegreeSequenceError> {
        DegreeSequence::new(vec![d; n])
    }

    pub fn values(&self) -> &[usize] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Half the degree sum, `m(g)`.
    pub fn half_sum(&self) -> usize {
        self.values.iter().sum::<usize>() / 2
    }

    pub fn max(&self) -> usize {
        self.values.iter().copied().max().unwrap_or(0)
    }
}
