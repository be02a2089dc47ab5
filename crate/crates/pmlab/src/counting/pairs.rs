//! Exact and asymptotic counts of ordered pairs of perfect matchings of
//! `K_n` by overlap size.

use num_bigint::BigUint;
use num_integer::binomial;
use num_traits::{One, Zero};

use super::series::disjoint_pm_pairs;
use super::{perfect_matchings, CountError, EnumerationLimits};
use crate::graph::Graph;
use crate::special::{ln_factorial, ln_gamma};

/// `m_k` for `k = 0..n/2`: ordered pairs `(H1, H2)` of perfect matchings of
/// `K_n` with exactly `k` shared edges.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OverlapTable {
    pub n: usize,
    pub counts: Vec<BigUint>,
}

impl OverlapTable {
    pub fn total(&self) -> BigUint {
        self.counts.iter().sum()
    }
}

/// Perfect-matching count of `K_n`: `n!/((n/2)! 2^{n/2})`, the odd double
/// factorial `(n-1)!!`. Zero for odd `n`.
pub fn pm_count_complete(n: u64) -> BigUint {
    if n % 2 == 1 {
        return BigUint::zero();
    }
    let mut acc = BigUint::one();
    let mut k = 1u64;
    while k < n {
        acc *= BigUint::from(k);
        k += 2;
    }
    acc
}

/// `ln` of the perfect-matching count of `K_n` (`n` even).
pub fn ln_pm_count_complete(n: u64) -> f64 {
    assert!(n.is_multiple_of(2), "n must be even");
    ln_factorial(n) - ln_factorial(n / 2) - (n as f64 / 2.0) * std::f64::consts::LN_2
}

/// Exact `m_k` via the product formula
/// `binom(n, 2k) * (2k)!/(2^k k!) * D(n - 2k)` with `D` from the pair EGF.
pub fn pm_pair_count_exact(n: usize, k: usize) -> BigUint {
    assert!(
        n.is_multiple_of(2) && k <= n / 2,
        "need even n and 0 <= k <= n/2"
    );
    let choose = binomial(BigUint::from(n), BigUint::from(2 * k));
    choose * pm_count_complete(2 * k as u64) * disjoint_pm_pairs((n - 2 * k) / 2)
}

/// The full exact overlap table `m_0 .. m_{n/2}` sharing one EGF evaluation.
pub fn pm_pair_counts_exact(n: usize) -> OverlapTable {
    assert!(n.is_multiple_of(2), "need even n");
    let series = super::series::disjoint_pair_egf(n / 2);
    let counts = (0..=n / 2)
        .map(|k| {
            binomial(BigUint::from(n), BigUint::from(2 * k))
                * pm_count_complete(2 * k as u64)
                * super::series::disjoint_pm_pairs_from(&series, (n - 2 * k) / 2)
        })
        .collect();
    OverlapTable { n, counts }
}

/// Brute-force `m_k` by a double loop over all perfect-matching pairs.
pub fn pm_pair_counts_bruteforce(
    n: usize,
    limits: &EnumerationLimits,
) -> Result<OverlapTable, CountError> {
    if n % 2 == 1 {
        return Err(CountError::InfeasibleDegree { n, d: 1 });
    }
    if n > limits.max_n_pm_pairs {
        return Err(CountError::CapExceeded {
            n,
            d: 1,
            cap: limits.max_n_pm_pairs,
        });
    }
    let pms = perfect_matchings(&Graph::complete(n).expect("within cap"));
    let mut counts = vec![BigUint::zero(); n / 2 + 1];
    for a in &pms {
        for b in &pms {
            let overlap = a
                .pairs()
                .iter()
                .filter(|p| b.pairs().binary_search(p).is_ok())
                .count();
            counts[overlap] += 1u32;
        }
    }
    Ok(OverlapTable { n, counts })
}

/// The displayed asymptotic pair count `n! / (2^k k! sqrt(e pi (n-2k)/2))`,
/// in natural log. Requires `0 <= k < n/2`.
pub fn ln_pm_pair_count_asymptotic(n: u64, k: u64) -> f64 {
    assert!(2 * k < n, "asymptotic pair count needs k < n/2");
    ln_factorial(n)
        - k as f64 * std::f64::consts::LN_2
        - ln_gamma(k as f64 + 1.0)
        - 0.5 * (std::f64::consts::E * std::f64::consts::PI * (n - 2 * k) as f64 / 2.0).ln()
}

/// Value form of the asymptotic pair count, for desk-scale `n`.
pub fn pm_pair_count_asymptotic(n: u64, k: u64) -> f64 {
    ln_pm_pair_count_asymptotic(n, k).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::ToPrimitive;

    fn limits() -> EnumerationLimits {
        EnumerationLimits::default()
    }

    #[test]
    fn bruteforce_small_tables() {
        let t4 = pm_pair_counts_bruteforce(4, &limits()).unwrap();
        assert_eq!(t4.counts, vec![6u32.into(), 0u32.into(), 3u32.into()]);
        let t2 = pm_pair_counts_bruteforce(2, &limits()).unwrap();
        assert_eq!(t2.counts, vec![0u32.into(), 1u32.into()]);
        let t6 = pm_pair_counts_bruteforce(6, &limits()).unwrap();
        assert_eq!(t6.total(), 225u32.into());
    }

    #[test]
    fn exact_matches_bruteforce_up_to_ten() {
        for n in [2usize, 4, 6, 8, 10] {
            let table = pm_pair_counts_bruteforce(n, &limits()).unwrap();
            for k in 0..=n / 2 {
                assert_eq!(pm_pair_count_exact(n, k), table.counts[k], "n={n} k={k}");
            }
        }
    }

    #[test]
    fn table_invariants() {
        for n in [4usize, 6, 8, 10] {
            let table = pm_pair_counts_bruteforce(n, &limits()).unwrap();
            let pm = pm_count_complete(n as u64);
            assert_eq!(table.total(), &pm * &pm);
            assert_eq!(table.counts[n / 2], pm);
        }
    }

    #[test]
    fn diagonal_and_spot_values() {
        assert_eq!(pm_pair_count_exact(4, 0), 6u32.into());
        assert_eq!(pm_pair_count_exact(4, 2), 3u32.into());
        assert_eq!(pm_pair_count_exact(6, 3), 15u32.into());
    }

    #[test]
    fn bruteforce_cap_is_enforced() {
        assert!(matches!(
            pm_pair_counts_bruteforce(12, &limits()),
            Err(CountError::CapExceeded { cap: 10, .. })
        ));
    }

    #[test]
    fn asymptotic_ratio_bounds() {
        // Ratio exact/asymptotic within 1 +- 2/(n-2k).
        for (n, k) in [(10u64, 0u64), (10, 2)] {
            let exact = pm_pair_count_exact(n as usize, k as usize)
                .to_f64()
                .unwrap();
            let ratio = exact / pm_pair_count_asymptotic(n, k);
            let slack = 2.0 / (n - 2 * k) as f64;
            assert!(
                (ratio - 1.0).abs() <= slack,
                "(n,k)=({n},{k}) ratio {ratio}"
            );
        }
    }

    #[test]
    fn asymptotic_ratio_improves_with_n() {
        let mut last_gap = f64::INFINITY;
        for n in [6u64, 8, 10] {
            let exact = pm_pair_count_exact(n as usize, 0).to_f64().unwrap();
            let gap = (exact / pm_pair_count_asymptotic(n, 0) - 1.0).abs();
            assert!(gap < last_gap, "gap not improving at n={n}");
            last_gap = gap;
        }
    }

    #[test]
    fn pm_count_matches_factorial_form() {
        for n in [0u64, 2, 4, 6, 8, 10, 12] {
            let direct = pm_count_complete(n);
            // n!/((n/2)! 2^{n/2})
            let mut fact = BigUint::one();
            for i in 2..=n {
                fact *= BigUint::from(i);
            }
            let mut half = BigUint::one();
            for i in 2..=(n / 2) {
                half *= BigUint::from(i);
            }
            let denom = half << (n / 2) as usize;
            assert_eq!(&direct * denom, fact, "n={n}");
        }
        assert_eq!(pm_count_complete(5), BigUint::zero());
    }
}
