//! Formal power series over exact rationals, just enough arithmetic for the
//! disjoint-matching-pair generating function: coefficient cancellation in
//! the series exponential must be exact, so no floats anywhere here.

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

/// Truncated power series `c_0 + c_1 z + ... + c_maxdeg z^maxdeg` with exact
/// rational coefficients.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RationalSeries {
    coeffs: Vec<BigRational>,
}

impl RationalSeries {
    /// Series from explicit coefficients; `coeffs[i]` multiplies `z^i`.
    pub fn new(coeffs: Vec<BigRational>) -> Self {
        RationalSeries { coeffs }
    }

    pub fn zero(max_deg: usize) -> Self {
        RationalSeries {
            coeffs: vec![BigRational::zero(); max_deg + 1],
        }
    }

    /// Truncation degree (inclusive).
    pub fn max_deg(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeff(&self, i: usize) -> BigRational {
        self.coeffs
            .get(i)
            .cloned()
            .unwrap_or_else(BigRational::zero)
    }

    pub fn coeffs(&self) -> &[BigRational] {
        &self.coeffs
    }

    pub fn set_coeff(&mut self, i: usize, c: BigRational) {
        self.coeffs[i] = c;
    }

    /// Series exponential; requires a zero constant term.
    ///
    /// Uses the recurrence `m e_m = sum_{j=1..m} j f_j e_{m-j}`.
    pub fn exp(&self) -> RationalSeries {
        assert!(
            self.coeff(0).is_zero(),
            "series exp requires zero constant term"
        );
        let deg = self.max_deg();
        let mut e = vec![BigRational::zero(); deg + 1];
        e[0] = BigRational::one();
        for m in 1..=deg {
            let mut acc = BigRational::zero();
            for j in 1..=m {
                if !self.coeffs[j].is_zero() {
                    acc += BigRational::from_integer(j.into()) * &self.coeffs[j] * &e[m - j];
                }
            }
            e[m] = acc / BigRational::from_integer(m.into());
        }
        RationalSeries { coeffs: e }
    }

    /// Series logarithm; requires constant term 1.
    pub fn ln(&self) -> RationalSeries {
        assert!(
            self.coeff(0).is_one(),
            "series ln requires constant term one"
        );
        let deg = self.max_deg();
        let mut f = vec![BigRational::zero(); deg + 1];
        for m in 1..=deg {
            let mut acc = BigRational::from_integer(m.into()) * &self.coeffs[m];
            for (j, fj) in f.iter().enumerate().take(m).skip(1) {
                if !fj.is_zero() {
                    acc -= BigRational::from_integer(j.into()) * fj * &self.coeffs[m - j];
                }
            }
            f[m] = acc / BigRational::from_integer(m.into());
        }
        RationalSeries { coeffs: f }
    }
}

/// EGF of alternating cycles of length at least 4:
/// `F(z) = -1/2 (log(1 - z^2) + z^2) = sum_{j >= 2} z^{2j} / (2j)`.
pub fn alternating_cycle_egf(max_deg: usize) -> RationalSeries {
    let mut s = RationalSeries::zero(max_deg);
    let mut j = 2usize;
    while 2 * j <= max_deg {
        s.set_coeff(2 * j, BigRational::new(1.into(), (2 * j).into()));
        j += 1;
    }
    s
}

/// Coefficients of `exp(F(z)) = e^{-z^2/2} / sqrt(1 - z^2)` through degree
/// `2 max_m`: the EGF of ordered pairs of disjoint perfect matchings.
pub fn disjoint_pair_egf(max_m: usize) -> RationalSeries {
    alternating_cycle_egf(2 * max_m).exp()
}

/// `D(2m)`: ordered pairs of disjoint perfect matchings of `K_{2m}`, i.e.
/// `(2m)! [z^{2m}] e^{F(z)}`.
pub fn disjoint_pm_pairs(m: usize) -> BigUint {
    disjoint_pm_pairs_from(&disjoint_pair_egf(m), m)
}

/// `D(2m)` extracted from an already-computed pair EGF of degree >= `2m`.
pub fn disjoint_pm_pairs_from(series: &RationalSeries, m: usize) -> BigUint {
    let c = series.coeff(2 * m);
    let mut fact = BigUint::one();
    for k in 2..=(2 * m) {
        fact *= BigUint::from(k);
    }
    let value = BigRational::from_integer(fact.into()) * c;
    assert!(
        value.is_integer() && !value.is_negative(),
        "pair count must be a non-negative integer, got {value}"
    );
    value
        .to_integer()
        .to_biguint()
        .expect("non-negative by assertion")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn alternating_cycle_coefficients() {
        let f = alternating_cycle_egf(10);
        assert_eq!(f.coeff(0), rat(0, 1));
        assert_eq!(f.coeff(2), rat(0, 1));
        assert_eq!(f.coeff(4), rat(1, 4));
        assert_eq!(f.coeff(6), rat(1, 6));
        assert_eq!(f.coeff(8), rat(1, 8));
        assert_eq!(f.coeff(10), rat(1, 10));
    }

    #[test]
    fn disjoint_pair_values() {
        assert_eq!(disjoint_pm_pairs(0), 1u32.into());
        assert_eq!(disjoint_pm_pairs(1), 0u32.into());
        // 3 perfect matchings of K4, each with exactly 2 disjoint partners.
        assert_eq!(disjoint_pm_pairs(2), 6u32.into());
        // 15 PMs of K6 x 8 disjoint partners.
        assert_eq!(disjoint_pm_pairs(3), 120u32.into());
    }

    #[test]
    fn odd_coefficients_vanish() {
        let e = disjoint_pair_egf(8);
        for i in (1..=e.max_deg()).step_by(2) {
            assert!(e.coeff(i).is_zero(), "odd coefficient {i} nonzero");
        }
    }

    #[test]
    fn exp_ln_round_trip() {
        let f = alternating_cycle_egf(14);
        let back = f.exp().ln();
        for i in 0..=14 {
            assert_eq!(back.coeff(i), f.coeff(i), "coefficient {i}");
        }
    }

    #[test]
    fn exp_matches_closed_form_product() {
        // e^F = e^{-z^2/2} / sqrt(1-z^2); check against the binomial series
        // of (1-z^2)^{-1/2} times the exponential series, degree 8.
        // (1-u)^{-1/2} = sum binom(2k,k) (u/4)^k, u = z^2.
        let e = disjoint_pair_egf(4);
        let mut expect = vec![BigRational::zero(); 9];
        // Central binomials 1, 1/2, 3/8, 5/16, 35/128 as (1/4)^k binom(2k,k).
        let sqrt_inv = [rat(1, 1), rat(1, 2), rat(3, 8), rat(5, 16), rat(35, 128)];
        // e^{-u/2} = sum (-1/2)^j u^j / j!.
        let expneg = [rat(1, 1), rat(-1, 2), rat(1, 8), rat(-1, 48), rat(1, 384)];
        for (k, a) in sqrt_inv.iter().enumerate() {
            for (j, b) in expneg.iter().enumerate() {
                if 2 * (k + j) <= 8 {
                    expect[2 * (k + j)] += a * b;
                }
            }
        }
        for (i, want) in expect.iter().enumerate() {
            assert_eq!(&e.coeff(i), want, "coefficient {i}");
        }
    }
}
