//! Exact arbitrary-precision counters and exhaustive enumerators.
//!
//! Everything here is ground truth: these counts are the oracles that every
//! asymptotic formula and every coupling quantity is checked against.

mod enumerate;
mod pairs;
mod series;

pub use enumerate::{
    enumerate_degseq_avoiding, enumerate_regular, Ensemble, EnumerationLimits, GraphStats,
};
pub use pairs::{
    ln_pm_count_complete, ln_pm_pair_count_asymptotic, pm_count_complete, pm_pair_count_asymptotic,
    pm_pair_count_exact, pm_pair_counts_bruteforce, pm_pair_counts_exact, OverlapTable,
};
pub use series::{
    alternating_cycle_egf, disjoint_pair_egf, disjoint_pm_pairs, disjoint_pm_pairs_from,
    RationalSeries,
};

use std::collections::HashMap;

use num_bigint::BigUint;
use num_traits::{One, Zero};
use thiserror::Error;

use crate::graph::{mask_n, Graph, Matching};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CountError {
    #[error("n={n} with degree {d} exceeds the enumeration cap {cap}")]
    CapExceeded { n: usize, d: usize, cap: usize },
    #[error("degree {d} is not feasible on {n} vertices (dn must be even, d < n)")]
    InfeasibleDegree { n: usize, d: usize },
}

/// Memoizing exact perfect-matching counter for one graph.
///
/// Branches on the lowest-indexed unmatched vertex over its unmatched
/// neighbors; subproblems are keyed by the unmatched-vertex bitset.
pub struct PmCounter<'a> {
    graph: &'a Graph,
    memo: HashMap<u64, BigUint>,
}

impl<'a> PmCounter<'a> {
    pub fn new(graph: &'a Graph) -> Self {
        PmCounter {
            graph,
            memo: HashMap::new(),
        }
    }

    /// Number of perfect matchings of the subgraph induced by `mask`.
    pub fn count(&mut self, mask: u64) -> BigUint {
        if mask.count_ones() % 2 == 1 {
            return BigUint::zero();
        }
        self.count_even(mask)
    }

    fn count_even(&mut self, mask: u64) -> BigUint {
        if mask == 0 {
            return BigUint::one();
        }
        if let Some(hit) = self.memo.get(&mask) {
            return hit.clone();
        }
        let u = mask.trailing_zeros() as usize;
        let mut nbrs = self.graph.row(u) & mask & !(1u64 << u);
        let mut total = BigUint::zero();
        while nbrs != 0 {
            let v = nbrs.trailing_zeros() as usize;
            nbrs &= nbrs - 1;
            total += self.count_even(mask & !(1u64 << u) & !(1u64 << v));
        }
        self.memo.insert(mask, total.clone());
        total
    }
}

/// Exact number of perfect matchings of `g`; 0 when the vertex count is odd.
pub fn count_perfect_matchings(g: &Graph) -> BigUint {
    PmCounter::new(g).count(mask_n(g.vertex_count()))
}

/// Exact number of perfect matchings of the complement of `g`.
pub fn count_pm_in_complement(g: &Graph) -> BigUint {
    count_perfect_matchings(&g.complement())
}

/// Number of 3-cliques.
pub fn count_triangles(g: &Graph) -> u64 {
    let n = g.vertex_count();
    let mut total = 0u64;
    for (u, v) in g.edges() {
        // Common neighbors above v close a triangle exactly once per triple.
        let above = !mask_n(v + 1) & mask_n(n);
        total += (g.row(u) & g.row(v) & above).count_ones() as u64;
    }
    total
}

/// All perfect matchings of `g`, in deterministic (lexicographic) order.
pub fn perfect_matchings(g: &Graph) -> Vec<Matching> {
    let n = g.vertex_count();
    let mut out = Vec::new();
    if n % 2 == 1 {
        return out;
    }
    let mut pairs = Vec::with_capacity(n / 2);
    list_pms(g, mask_n(n), &mut pairs, &mut out);
    out
}

fn list_pms(g: &Graph, mask: u64, pairs: &mut Vec<(usize, usize)>, out: &mut Vec<Matching>) {
    if mask == 0 {
        out.push(Matching::new(pairs.clone()).expect("disjoint by construction"));
        return;
    }
    let u = mask.trailing_zeros() as usize;
    let mut nbrs = g.row(u) & mask & !(1u64 << u);
    while nbrs != 0 {
        let v = nbrs.trailing_zeros() as usize;
        nbrs &= nbrs - 1;
        pairs.push((u, v));
        list_pms(g, mask & !(1u64 << u) & !(1u64 << v), pairs, out);
        pairs.pop();
    }
}
