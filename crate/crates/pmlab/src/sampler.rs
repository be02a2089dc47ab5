//! Exactly uniform samplers: configuration-model G(n,d) with rejection,
//! perfect matchings of `K_n`, and perfect matchings of a complement graph
//! by counting-guided sequential choice.
//!
//! No MCMC anywhere: the coupling acceptance tests lean on exact marginal
//! uniformity, so every sampler here is rejection- or counting-based.

use num_bigint::BigUint;
use num_traits::Zero;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use thiserror::Error;

use crate::counting::{count_perfect_matchings, Ensemble, PmCounter};
use crate::graph::{mask_n, Graph, Matching};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SamplerError {
    #[error("degree {d} infeasible on {n} vertices (dn must be even, d < n)")]
    InfeasibleDegree { n: usize, d: usize },
    #[error("degree {d} exceeds the configuration-model cap {cap}")]
    CapExceeded { d: usize, cap: usize },
    #[error("n = {0} must be even to carry a perfect matching")]
    OddVertexCount(usize),
    #[error("the complement has no perfect matching")]
    NoPerfectMatching,
}

/// A reproducible random stream: identical `(seed, stream)` pairs yield
/// identical draw sequences; distinct stream indices are independent for
/// statistical purposes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RngStream {
    pub seed: u64,
    pub stream: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        RngStream { seed, stream }
    }

    pub fn rng(&self) -> ChaCha12Rng {
        let mut rng = ChaCha12Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}

/// Caps for the configuration-model sampler. Expected rejections grow like
/// `exp((d^2 - 1)/4)`, so degrees above the cap are refused and the caller
/// is pointed at enumeration-index sampling.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SamplerLimits {
    pub max_config_model_degree: usize,
}

impl Default for SamplerLimits {
    fn default() -> Self {
        SamplerLimits {
            max_config_model_degree: 8,
        }
    }
}

/// Exactly uniform draw from G(n,d): configuration-model pairing with
/// rejection of loops and multi-edges.
pub fn sample_regular<R: Rng>(
    n: usize,
    d: usize,
    rng: &mut R,
    limits: &SamplerLimits,
) -> Result<Graph, SamplerError> {
    if d >= n || (n * d) % 2 == 1 {
        return Err(SamplerError::InfeasibleDegree { n, d });
    }
    if d > limits.max_config_model_degree {
        return Err(SamplerError::CapExceeded {
            d,
            cap: limits.max_config_model_degree,
        });
    }
    let mut stubs: Vec<usize> = (0..n).flat_map(|v| std::iter::repeat_n(v, d)).collect();
    'resample: loop {
        stubs.shuffle(rng);
        let mut g = Graph::empty(n).expect("within vertex cap");
        for pair in stubs.chunks_exact(2) {
            let (u, v) = (pair[0], pair[1]);
            if u == v || g.has_edge(u, v) {
                continue 'resample;
            }
            g.add_edge(u, v).expect("checked distinct");
        }
        return Ok(g);
    }
}

/// Uniform perfect matching of `K_n`: shuffle and pair consecutive vertices.
pub fn sample_pm<R: Rng>(n: usize, rng: &mut R) -> Result<Matching, SamplerError> {
    if n % 2 == 1 {
        return Err(SamplerError::OddVertexCount(n));
    }
    let mut vertices: Vec<usize> = (0..n).collect();
    vertices.shuffle(rng);
    let pairs = vertices.chunks_exact(2).map(|c| (c[0], c[1])).collect();
    Ok(Matching::new(pairs).expect("disjoint by construction"))
}

/// How `sample_pm_complement` draws.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ComplementPmMethod {
    /// Sequential choice at the lowest unmatched vertex, each partner
    /// weighted by the exact count of completions. Primary method.
    CountingGuided,
    /// Draw uniform PMs of `K_n` until one avoids the graph; expected
    /// acceptance is about `exp(-d/2)`.
    Rejection,
}

/// Exactly uniform perfect matching of `complement(g)`.
pub fn sample_pm_complement<R: Rng>(
    g: &Graph,
    rng: &mut R,
    method: ComplementPmMethod,
) -> Result<Matching, SamplerError> {
    let n = g.vertex_count();
    if n % 2 == 1 {
        return Err(SamplerError::OddVertexCount(n));
    }
    let comp = g.complement();
    match method {
        ComplementPmMethod::CountingGuided => {
            let mut counter = PmCounter::new(&comp);
            if counter.count(mask_n(n)).is_zero() {
                return Err(SamplerError::NoPerfectMatching);
            }
            let mut mask = mask_n(n);
            let mut pairs = Vec::with_capacity(n / 2);
            while mask != 0 {
                let u = mask.trailing_zeros() as usize;
                let mut options: Vec<(usize, BigUint)> = Vec::new();
                let mut nbrs = comp.row(u) & mask & !(1u64 << u);
                while nbrs != 0 {
                    let v = nbrs.trailing_zeros() as usize;
                    nbrs &= nbrs - 1;
                    let weight = counter.count(mask & !(1u64 << u) & !(1u64 << v));
                    if !weight.is_zero() {
                        options.push((v, weight));
                    }
                }
                let total: BigUint = options.iter().map(|(_, w)| w).sum();
                debug_assert!(!total.is_zero(), "positive count guarantees an extension");
                let mut draw = uniform_biguint_below(rng, &total);
                let mut chosen = options.last().expect("nonempty").0;
                for (v, w) in &options {
                    if draw < *w {
                        chosen = *v;
                        break;
                    }
                    draw -= w;
                }
                pairs.push((u, chosen));
                mask &= !(1u64 << u) & !(1u64 << chosen);
            }
            Ok(Matching::new(pairs).expect("disjoint by construction"))
        }
        ComplementPmMethod::Rejection => {
            if count_perfect_matchings(&comp).is_zero() {
                return Err(SamplerError::NoPerfectMatching);
            }
            loop {
                let m = sample_pm(n, rng)?;
                if m.pairs().iter().all(|&(u, v)| !g.has_edge(u, v)) {
                    return Ok(m);
                }
            }
        }
    }
}

/// Uniform index draw from an enumerated ensemble.
pub fn sample_from_ensemble<'e, R: Rng>(ens: &'e Ensemble, rng: &mut R) -> &'e Graph {
    ens.graph(rng.random_range(0..ens.len()))
}

/// Uniform `BigUint` in `[0, bound)` by rejection on the top bit block.
pub fn uniform_biguint_below<R: Rng>(rng: &mut R, bound: &BigUint) -> BigUint {
    assert!(!bound.is_zero(), "bound must be positive");
    let bits = bound.bits();
    let bytes = bits.div_ceil(8) as usize;
    let excess_bits = (bytes as u64 * 8 - bits) as u8;
    let mut buf = vec![0u8; bytes];
    loop {
        rng.fill_bytes(&mut buf);
        buf[bytes - 1] >>= excess_bits;
        let candidate = BigUint::from_bytes_le(&buf);
        if &candidate < bound {
            return candidate;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::counting::{enumerate_regular, perfect_matchings, EnumerationLimits};
    use crate::stats::{chi_square_two_sample, chi_square_uniform};
    use num_traits::ToPrimitive;
    use rand::RngCore;

    #[test]
    fn rng_streams_are_reproducible_and_distinct() {
        let mut a = RngStream::new(7, 0).rng();
        let mut b = RngStream::new(7, 0).rng();
        let mut c = RngStream::new(7, 1).rng();
        let xs: Vec<u64> = (0..8).map(|_| a.next_u64()).collect();
        let ys: Vec<u64> = (0..8).map(|_| b.next_u64()).collect();
        let zs: Vec<u64> = (0..8).map(|_| c.next_u64()).collect();
        assert_eq!(xs, ys);
        assert_ne!(xs, zs);
    }

    #[test]
    fn sample_regular_determinism_in_graph6() {
        let limits = SamplerLimits::default();
        let mut r1 = RngStream::new(42, 3).rng();
        let mut r2 = RngStream::new(42, 3).rng();
        let a: Vec<String> = (0..20)
            .map(|_| sample_regular(12, 3, &mut r1, &limits).unwrap().to_graph6())
            .collect();
        let b: Vec<String> = (0..20)
            .map(|_| sample_regular(12, 3, &mut r2, &limits).unwrap().to_graph6())
            .collect();
        assert_eq!(a, b);
    }

    #[test]
    fn sample_regular_error_paths() {
        let limits = SamplerLimits::default();
        let mut rng = RngStream::new(1, 0).rng();
        assert!(matches!(
            sample_regular(5, 3, &mut rng, &limits),
            Err(SamplerError::InfeasibleDegree { .. })
        ));
        assert!(matches!(
            sample_regular(20, 9, &mut rng, &limits),
            Err(SamplerError::CapExceeded { cap: 8, .. })
        ));
    }

    #[test]
    fn unique_graph_cases_are_deterministic() {
        let limits = SamplerLimits::default();
        let mut rng = RngStream::new(5, 0).rng();
        let k4 = Graph::complete(4).unwrap();
        for _ in 0..10 {
            assert_eq!(sample_regular(4, 3, &mut rng, &limits).unwrap(), k4);
        }
    }

    #[test]
    fn sample_pm_small_cases() {
        let mut rng = RngStream::new(11, 0).rng();
        let m = sample_pm(2, &mut rng).unwrap();
        assert_eq!(m.pairs(), &[(0, 1)]);
        assert!(sample_pm(3, &mut rng).is_err());

        // n = 4: each of the 3 PMs within 3 sigma of 1/3 over 30000 draws.
        let mut counts = [0u64; 3];
        let pms = perfect_matchings(&Graph::complete(4).unwrap());
        for _ in 0..30_000 {
            let m = sample_pm(4, &mut rng).unwrap();
            let idx = pms.iter().position(|p| p == &m).unwrap();
            counts[idx] += 1;
        }
        let sigma = (30_000.0f64 * (1.0 / 3.0) * (2.0 / 3.0)).sqrt();
        for &c in &counts {
            assert!(
                (c as f64 - 10_000.0).abs() <= 3.0 * sigma,
                "counts {counts:?}"
            );
        }
    }

    #[test]
    fn pm_complement_error_and_exactness() {
        let mut rng = RngStream::new(23, 0).rng();
        let k4 = Graph::complete(4).unwrap();
        assert!(matches!(
            sample_pm_complement(&k4, &mut rng, ComplementPmMethod::CountingGuided),
            Err(SamplerError::NoPerfectMatching)
        ));
        assert!(matches!(
            sample_pm_complement(&k4, &mut rng, ComplementPmMethod::Rejection),
            Err(SamplerError::NoPerfectMatching)
        ));

        // Empty graph on 4 vertices: uniform over the 3 PMs of K4.
        let empty = Graph::empty(4).unwrap();
        let pms = perfect_matchings(&Graph::complete(4).unwrap());
        let mut counts = [0u64; 3];
        for _ in 0..30_000 {
            let m =
                sample_pm_complement(&empty, &mut rng, ComplementPmMethod::CountingGuided).unwrap();
            counts[pms.iter().position(|p| p == &m).unwrap()] += 1;
        }
        let (_, p) = chi_square_uniform(&counts).unwrap();
        assert!(p > 0.001, "p = {p}");
    }

    #[test]
    fn counting_guided_and_rejection_agree_on_c6() {
        // Two-sample chi-square over the 4 PMs of the prism, 20000 draws each.
        let c6 = Graph::cycle(6).unwrap();
        let prism_pms = perfect_matchings(&c6.complement());
        assert_eq!(prism_pms.len(), 4);
        let mut rng = RngStream::new(31, 0).rng();
        let mut counts_a = [0u64; 4];
        let mut counts_b = [0u64; 4];
        for _ in 0..20_000 {
            let a =
                sample_pm_complement(&c6, &mut rng, ComplementPmMethod::CountingGuided).unwrap();
            counts_a[prism_pms.iter().position(|p| p == &a).unwrap()] += 1;
            let b = sample_pm_complement(&c6, &mut rng, ComplementPmMethod::Rejection).unwrap();
            counts_b[prism_pms.iter().position(|p| p == &b).unwrap()] += 1;
        }
        let (_, p) = chi_square_two_sample(&counts_a, &counts_b).unwrap();
        assert!(p > 0.001, "two-sample p = {p}");
    }

    #[test]
    fn config_model_uniform_over_6_2_classes() {
        // Smaller companion to the acceptance run: 14000 draws, 70 classes.
        let ens = enumerate_regular(6, 2, &EnumerationLimits::default()).unwrap();
        let limits = SamplerLimits::default();
        let mut rng = RngStream::new(97, 0).rng();
        let mut counts = vec![0u64; ens.len()];
        for _ in 0..14_000 {
            let g = sample_regular(6, 2, &mut rng, &limits).unwrap();
            counts[ens.class_of(&g).unwrap()] += 1;
        }
        let (_, p) = chi_square_uniform(&counts).unwrap();
        assert!(p > 0.001, "p = {p}");
    }

    #[test]
    fn uniform_biguint_below_is_in_range_and_hits_everything() {
        let mut rng = RngStream::new(3, 0).rng();
        let bound = BigUint::from(5u32);
        let mut seen = [false; 5];
        for _ in 0..200 {
            let v = uniform_biguint_below(&mut rng, &bound);
            let idx = v.to_usize().unwrap();
            assert!(idx < 5);
            seen[idx] = true;
        }
        assert!(seen.iter().all(|&s| s));
    }
}
