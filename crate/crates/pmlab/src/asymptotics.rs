//! Evaluators for the closed-form and asymptotic moment expressions, with
//! companion identity and residual-order checks.
//!
//! Every ratio-of-huge-numbers quantity lives on the natural-log scale with
//! log-gamma for factorials; suffixed `_log` throughout. Formula evaluators
//! never silently substitute for exact oracles: callers pick the mode.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;
use thiserror::Error;

use crate::counting::{
    ln_pm_count_complete, ln_pm_pair_count_asymptotic, pm_pair_counts_exact, Ensemble,
};
use crate::graph::{DegreeSequence, Graph};
use crate::special::{ln_factorial, ln_factorial_stirling, log_sum_exp};
use crate::stats::loglog_slope;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AsymptoticsError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("degree sequence has no edges (m = 0)")]
    ZeroEdges,
    #[error("regressor variance is zero")]
    ZeroVariance,
}

type Result<T> = std::result::Result<T, AsymptoticsError>;

fn check_nd(n: u64, d: u64) -> Result<()> {
    if n % 2 == 1 {
        return Err(AsymptoticsError::Domain(format!("n = {n} must be even")));
    }
    if d < 3 || d >= n {
        return Err(AsymptoticsError::Domain(format!(
            "need 3 <= d < n, got d = {d}, n = {n}"
        )));
    }
    Ok(())
}

/// The subgraph-probability exponent
/// `phi(d, a) = (4(d-2)^2 - (d^2-5)a^2 - (2d^2-14d+20)a) / (4(d-2+a)^2)`.
pub fn phi(d: f64, alpha: f64) -> f64 {
    let num = 4.0 * (d - 2.0).powi(2)
        - (d * d - 5.0) * alpha * alpha
        - (2.0 * d * d - 14.0 * d + 20.0) * alpha;
    num / (4.0 * (d - 2.0 + alpha).powi(2))
}

/// `phi` evaluated in exact rational arithmetic.
pub fn phi_rational(d: &BigRational, alpha: &BigRational) -> BigRational {
    let two = BigRational::from_integer(2.into());
    let four = BigRational::from_integer(4.into());
    let five = BigRational::from_integer(5.into());
    let num = &four * (d - &two) * (d - &two)
        - (d * d - &five) * alpha * alpha
        - (&two * d * d - BigRational::from_integer(14.into()) * d
            + BigRational::from_integer(20.into()))
            * alpha;
    let den = &four * (d - &two + alpha) * (d - &two + alpha);
    num / den
}

/// `phi` recomputed through the switching quantities of the enumeration
/// theorem, in the n-free reduced form with `k = a n / 2` (n cancels):
/// `-lambda(g) - lambda(g)^2 - mu(g,H) + lambda(d) + lambda(d)^2`.
pub fn phi_via_switchings(d: f64, alpha: f64) -> f64 {
    let lambda_g = ((d - 1.0) * (d - 2.0) * alpha + (d - 2.0) * (d - 3.0) * (1.0 - alpha))
        / (2.0 * (d - 2.0 + alpha));
    let mu_g = ((d - 1.0) * (d - 1.0) * alpha / 2.0 + (d - 2.0) * (d - 2.0) * (1.0 - alpha))
        / (d - 2.0 + alpha);
    let lambda_d = (d - 1.0) / 2.0;
    -lambda_g - lambda_g * lambda_g - mu_g + lambda_d + lambda_d * lambda_d
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct SwitchingQuantities {
    /// Half the degree sum `m(g)`.
    pub m: f64,
    pub lambda: f64,
    pub mu: f64,
    /// `Delta(g)^2 + Delta(g) Delta(x)`.
    pub delta_hat: f64,
}

/// `lambda(g) = (1/4m) sum (g_i)_2` and `mu(g, X) = (1/2m) sum_{ij in X} g_i g_j`.
pub fn switching_quantities(g: &DegreeSequence, x: &Graph) -> Result<SwitchingQuantities> {
    if g.len() != x.vertex_count() {
        return Err(AsymptoticsError::Domain(format!(
            "degree sequence on {} vertices vs graph on {}",
            g.len(),
            x.vertex_count()
        )));
    }
    let m = g.half_sum();
    if m == 0 {
        return Err(AsymptoticsError::ZeroEdges);
    }
    let mf = m as f64;
    let gv = g.values();
    let falling: u64 = gv
        .iter()
        .map(|&gi| (gi * gi.saturating_sub(1)) as u64)
        .sum();
    let lambda = falling as f64 / (4.0 * mf);
    let cross: u64 = x.edges().iter().map(|&(i, j)| (gv[i] * gv[j]) as u64).sum();
    let mu = cross as f64 / (2.0 * mf);
    let dg = g.max() as f64;
    let dx = x.max_degree() as f64;
    Ok(SwitchingQuantities {
        m: mf,
        lambda,
        mu,
        delta_hat: dg * dg + dg * dx,
    })
}

/// Log of the enumeration main term
/// `(2m)!/(m! 2^m prod g_i!) exp(-lambda - lambda^2 - mu)`,
/// the `O(Delta_hat^2 / m)` factor dropped.
pub fn mckay_main_term_log(g: &DegreeSequence, x: &Graph) -> Result<f64> {
    let q = switching_quantities(g, x)?;
    let m = g.half_sum() as u64;
    let log_count = ln_factorial(2 * m)
        - ln_factorial(m)
        - m as f64 * std::f64::consts::LN_2
        - g.values()
            .iter()
            .map(|&gi| ln_factorial(gi as u64))
            .sum::<f64>();
    Ok(log_count - q.lambda - q.lambda * q.lambda - q.mu)
}

/// `ln rho2(n, d, alpha)`, the closed displayed form
/// `(e/n)^{(1-a/2)n} ((d-2+a)/d)^{((d-2+a)/2)n} d^{an/2} (d-1)^{(1-a)n} e^{phi}`.
///
/// At `alpha = 1` this reduces exactly to `ln rho1(n, d)`.
pub fn rho_log(n: u64, d: u64, alpha: f64) -> Result<f64> {
    check_nd(n, d)?;
    if !(0.0..=1.0).contains(&alpha) {
        return Err(AsymptoticsError::Domain(format!(
            "alpha = {alpha} outside [0, 1]"
        )));
    }
    let nf = n as f64;
    let df = d as f64;
    Ok((1.0 - alpha / 2.0) * nf * (1.0 - nf.ln())
        + ((df - 2.0 + alpha) / 2.0) * nf * ((df - 2.0 + alpha) / df).ln()
        + (alpha * nf / 2.0) * df.ln()
        + (1.0 - alpha) * nf * (df - 1.0).ln()
        + phi(df, alpha))
}

/// `ln rho1(n, d)` evaluated directly from its own display,
/// `(e/n)^{n/2} ((d-1)/d)^{((d-1)/2)n} d^{n/2} e^{1/4}`.
pub fn rho1_direct_log(n: u64, d: u64) -> Result<f64> {
    check_nd(n, d)?;
    let nf = n as f64;
    let df = d as f64;
    Ok(nf / 2.0 * (1.0 - nf.ln())
        + ((df - 1.0) / 2.0) * nf * ((df - 1.0) / df).ln()
        + nf / 2.0 * df.ln()
        + 0.25)
}

/// `ln E Y = ln(n!/((n/2)! 2^{n/2})) + ln rho1(n, d)`.
pub fn expected_y_log(n: u64, d: u64) -> Result<f64> {
    check_nd(n, d)?;
    Ok(ln_pm_count_complete(n) + rho_log(n, d, 1.0)?)
}

/// Main term of the triangle-count expectation, `(d-1)^3 / 6`.
pub fn expected_x_main(d: u64) -> f64 {
    ((d as f64) - 1.0).powi(3) / 6.0
}

/// Log of the displayed factorial-form probability that a fixed spanning
/// union of `k` isolated edges and disjoint cycles sits inside G(n,d):
/// `((d-2)n+2k)! (dn/2)! 2^{n-k} d^n (d-1)^{n-2k} / (((d-2)n/2+k)! (dn)!) e^{phi}`.
pub fn union_pm_probability_log(n: u64, d: u64, k: u64) -> Result<f64> {
    union_pm_probability_impl(n, d, k, ln_factorial)
}

/// The same factorial form with every factorial replaced by its Stirling
/// main term; agrees with `rho_log` to float precision by construction.
pub fn union_pm_probability_stirling_log(n: u64, d: u64, k: u64) -> Result<f64> {
    union_pm_probability_impl(n, d, k, |m| ln_factorial_stirling(m as f64))
}

fn union_pm_probability_impl(n: u64, d: u64, k: u64, ln_fact: impl Fn(u64) -> f64) -> Result<f64> {
    check_nd(n, d)?;
    if 2 * k > n {
        return Err(AsymptoticsError::Domain(format!(
            "k = {k} exceeds n/2 = {}",
            n / 2
        )));
    }
    let cycle_part = n - 2 * k;
    if cycle_part != 0 && cycle_part < 3 {
        return Err(AsymptoticsError::Domain(format!(
            "{cycle_part} vertices cannot carry disjoint spanning cycles"
        )));
    }
    let alpha = 2.0 * k as f64 / n as f64;
    let a = (d - 2) * n + 2 * k;
    Ok(ln_fact(a)
        + ln_fact(d * n / 2)
        + (n - k) as f64 * std::f64::consts::LN_2
        + n as f64 * (d as f64).ln()
        + (n - 2 * k) as f64 * ((d - 1) as f64).ln()
        - ln_fact((d - 2) * n / 2 + k)
        - ln_fact(d * n)
        + phi(d as f64, alpha))
}

/// Conditional edge-probability main term `(d - d_u^H)(d - d_v^H) / (M - 2|H|)`
/// with `M = dn`, given that `H` sits inside G(n,d).
pub fn conditional_edge_prob(n: u64, d: u64, h: &Graph, u: usize, v: usize) -> Result<f64> {
    if h.vertex_count() as u64 != n {
        return Err(AsymptoticsError::Domain(format!(
            "H has {} vertices, expected {n}",
            h.vertex_count()
        )));
    }
    if u == v || u >= n as usize || v >= n as usize {
        return Err(AsymptoticsError::Domain(format!(
            "need distinct vertices below n, got u={u}, v={v}"
        )));
    }
    if h.max_degree() as u64 > d {
        return Err(AsymptoticsError::Domain(
            "H has a vertex of degree above d".to_string(),
        ));
    }
    let m_free = (d * n) as f64 - 2.0 * h.edge_count() as f64;
    if m_free <= 0.0 {
        return Err(AsymptoticsError::Domain(
            "dn - 2|H| must be positive".to_string(),
        ));
    }
    let du = h.degree(u) as f64;
    let dv = h.degree(v) as f64;
    Ok((d as f64 - du) * (d as f64 - dv) / m_free)
}

/// Which pair counts feed the second-moment sum.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum PairCountMode {
    /// Exact EGF-based overlap counts; intended for enumerable n.
    Exact,
    /// The displayed asymptotic pair count.
    Asymptotic,
}

/// `ln` of the displayed second-moment sum
/// `sum_{k=0}^{n/2-1} paircount(n,k) rho2(n,d,a(k)) + E Y`,
/// together with the `k` maximizing the summand.
pub fn second_moment_scan(n: u64, d: u64, mode: PairCountMode) -> Result<(f64, u64)> {
    check_nd(n, d)?;
    let half = n / 2;
    let exact_table = match mode {
        PairCountMode::Exact => Some(pm_pair_counts_exact(n as usize)),
        PairCountMode::Asymptotic => None,
    };
    let mut terms = Vec::with_capacity(half as usize + 1);
    let mut best_k = 0u64;
    let mut best = f64::NEG_INFINITY;
    for k in 0..half {
        let ln_pairs = match &exact_table {
            Some(t) => {
                let c = &t.counts[k as usize];
                if c.is_zero() {
                    continue;
                }
                crate::special::ln_biguint(c)
            }
            None => ln_pm_pair_count_asymptotic(n, k),
        };
        let term = ln_pairs + rho_log(n, d, 2.0 * k as f64 / n as f64)?;
        if term > best {
            best = term;
            best_k = k;
        }
        terms.push(term);
    }
    terms.push(expected_y_log(n, d)?);
    Ok((log_sum_exp(&terms), best_k))
}

/// `ln E Y^2` via the k-sum display.
pub fn second_moment_sum_log(n: u64, d: u64, mode: PairCountMode) -> Result<f64> {
    Ok(second_moment_scan(n, d, mode)?.0)
}

/// The Laplace-summation constants of the second-moment analysis.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct LaplaceParams {
    /// `1/d`.
    pub alpha_bar: f64,
    /// `floor(alpha_bar n / 2)`.
    pub k_bar: u64,
    /// `(2d/n) d(d-2)/(d-1)^2`.
    pub delta_bar: f64,
    /// `d^-4 + d^3/n + sqrt(d/n) (ln n)^6`; the log is natural log.
    pub xi: f64,
}

pub fn laplace_params(n: u64, d: u64) -> Result<LaplaceParams> {
    check_nd(n, d)?;
    let nf = n as f64;
    let df = d as f64;
    Ok(LaplaceParams {
        alpha_bar: 1.0 / df,
        k_bar: n / (2 * d),
        delta_bar: (2.0 * df / nf) * df * (df - 2.0) / ((df - 1.0) * (df - 1.0)),
        xi: df.powi(-4) + df.powi(3) / nf + (df / nf).sqrt() * nf.ln().powi(6),
    })
}

/// `ln E Y^2` via the Laplace main term
/// `(2/sqrt(e delta_bar)) n! rho2(n,d,alpha(k_bar)) / (k_bar! 2^{k_bar} sqrt(n - 2 k_bar))`.
///
/// `rho2` is taken at `alpha(k_bar) = 2 k_bar / n` so the argument matches the
/// integer `k_bar` appearing in the factorial part; the two coincide whenever
/// `n/(2d)` is an integer, and the summand is stationary at `k_bar`, so the
/// floor shift only enters at second order.
pub fn second_moment_laplace_log(n: u64, d: u64) -> Result<f64> {
    let p = laplace_params(n, d)?;
    if p.k_bar == 0 {
        return Err(AsymptoticsError::Domain(format!(
            "k_bar = floor(n/2d) vanishes at n = {n}, d = {d}"
        )));
    }
    let alpha_at_kbar = 2.0 * p.k_bar as f64 / n as f64;
    Ok(std::f64::consts::LN_2 - 0.5 * (1.0 + p.delta_bar.ln())
        + ln_factorial(n)
        + rho_log(n, d, alpha_at_kbar)?
        - ln_factorial(p.k_bar)
        - p.k_bar as f64 * std::f64::consts::LN_2
        - 0.5 * ((n - 2 * p.k_bar) as f64).ln())
}

/// `ln(E Y^2 / (E Y)^2)` from the Laplace form, with every n-scale term
/// canceled symbolically.
///
/// The raw difference `second_moment_laplace_log - 2 expected_y_log`
/// subtracts values of magnitude ~n ln n, whose f64 rounding (~1e-4 at
/// n = 1e10) swamps the 1/(6 d^3) signal. Here the exponential terms cancel
/// exactly at `alpha = 1/d`; what survives is
/// `(1/2) ln(n/(e delta_bar k_bar (n - 2 k_bar))) + phi(d, a(k_bar)) - 1`
/// plus a quadratic floor remainder and the Stirling corrections, all O(1)
/// or smaller.
pub fn second_moment_ratio_log(n: u64, d: u64) -> Result<f64> {
    let p = laplace_params(n, d)?;
    if p.k_bar == 0 {
        return Err(AsymptoticsError::Domain(format!(
            "k_bar = floor(n/2d) vanishes at n = {n}, d = {d}"
        )));
    }
    let nf = n as f64;
    let df = d as f64;
    let kf = p.k_bar as f64;
    let alpha_star = 2.0 * kf / nf;
    // The n-scale terms vanish identically at alpha = 1/d and are stationary
    // there; the floor shift u = a(k_bar) - 1/d enters only quadratically.
    let u = alpha_star - p.alpha_bar;
    let e_aa = 0.5 * (1.0 / (df - 2.0 + p.alpha_bar) - 1.0 / p.alpha_bar);
    let floor_remainder = nf * 0.5 * e_aa * u * u;
    let prefactor =
        0.5 * (nf.ln() - 1.0 - p.delta_bar.ln() - kf.ln() - ((n - 2 * p.k_bar) as f64).ln());
    // Exact log-gamma vs Stirling main terms in n!, (n/2)!^2, k_bar!.
    let stirling = 0.25 / nf - 1.0 / (12.0 * kf);
    Ok(prefactor + phi(df, alpha_star) - 0.5 + floor_remainder + stirling)
}

/// The covariance bracket in relative form.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct CovRelative {
    /// `[(d^2/2)(1-x)(1-2x) + (d^3/6)(1-2x)^3] / ((d-1)^3/6) - 1` at `x = 1/d`.
    pub bracket_ratio_minus_one: f64,
    /// The leading term `-1/d^3`.
    pub leading_term: f64,
}

pub fn cov_xy_relative(d: f64) -> CovRelative {
    let x = 1.0 / d;
    let bracket =
        d * d / 2.0 * (1.0 - x) * (1.0 - 2.0 * x) + d.powi(3) / 6.0 * (1.0 - 2.0 * x).powi(3);
    let ex_main = (d - 1.0).powi(3) / 6.0;
    CovRelative {
        bracket_ratio_minus_one: bracket / ex_main - 1.0,
        leading_term: -x.powi(3),
    }
}

// ---------------------------------------------------------------------------
// Linear regression of Y on X (orthogonal projection)
// ---------------------------------------------------------------------------

/// Regression of Y on X with exact rational arithmetic:
/// `a = Cov(X,Y)/Var X`, `b = E Y - a E X`,
/// `residual_variance = Var Y - Cov(X,Y)^2 / Var X`.
#[derive(Clone, Debug, PartialEq)]
pub struct ExactRegression {
    pub a: BigRational,
    pub b: BigRational,
    pub residual_variance: BigRational,
}

/// Fit over equally weighted `(x, y)` pairs.
pub fn exact_regression(pairs: &[(BigRational, BigRational)]) -> Result<ExactRegression> {
    if pairs.is_empty() {
        return Err(AsymptoticsError::Domain("empty sample".to_string()));
    }
    let count = BigRational::from_integer(BigInt::from(pairs.len()));
    let ex: BigRational = pairs.iter().map(|(x, _)| x).sum::<BigRational>() / &count;
    let ey: BigRational = pairs.iter().map(|(_, y)| y).sum::<BigRational>() / &count;
    let exx: BigRational = pairs.iter().map(|(x, _)| x * x).sum::<BigRational>() / &count;
    let eyy: BigRational = pairs.iter().map(|(_, y)| y * y).sum::<BigRational>() / &count;
    let exy: BigRational = pairs.iter().map(|(x, y)| x * y).sum::<BigRational>() / &count;
    let var_x = exx - &ex * &ex;
    if var_x.is_zero() {
        return Err(AsymptoticsError::ZeroVariance);
    }
    let var_y = eyy - &ey * &ey;
    let cov = exy - &ex * &ey;
    let a = &cov / &var_x;
    let b = ey - &a * ex;
    let residual_variance = var_y - &cov * &cov / var_x;
    Ok(ExactRegression {
        a,
        b,
        residual_variance,
    })
}

/// Direct average of `(y - a x - b)^2`; equals `residual_variance` exactly
/// for any finite distribution, which the tests check.
pub fn mean_squared_residual(
    pairs: &[(BigRational, BigRational)],
    reg: &ExactRegression,
) -> BigRational {
    let count = BigRational::from_integer(BigInt::from(pairs.len()));
    pairs
        .iter()
        .map(|(x, y)| {
            let r = y - &reg.a * x - &reg.b;
            &r * &r
        })
        .sum::<BigRational>()
        / count
}

/// `(X, Y)` pairs of an enumerated ensemble, as exact rationals.
pub fn ensemble_xy_pairs(ens: &Ensemble) -> Vec<(BigRational, BigRational)> {
    (0..ens.len())
        .map(|i| {
            let s = ens.stats(i);
            (
                BigRational::from_integer(s.x.into()),
                BigRational::from_integer(BigInt::from(s.y.clone())),
            )
        })
        .collect()
}

/// Float view of a regression fit.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct RegressionCoefficients {
    pub a: f64,
    pub b: f64,
    pub residual_variance: f64,
}

impl From<&ExactRegression> for RegressionCoefficients {
    fn from(r: &ExactRegression) -> Self {
        RegressionCoefficients {
            a: r.a.to_f64().unwrap_or(f64::NAN),
            b: r.b.to_f64().unwrap_or(f64::NAN),
            residual_variance: r.residual_variance.to_f64().unwrap_or(f64::NAN),
        }
    }
}

/// Regression coefficients from formula-level moments.
pub fn regression_from_moments(
    ex: f64,
    ey: f64,
    var_x: f64,
    var_y: f64,
    cov_xy: f64,
) -> Result<RegressionCoefficients> {
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    if !(var_x > 0.0) {
        return Err(AsymptoticsError::ZeroVariance);
    }
    let a = cov_xy / var_x;
    Ok(RegressionCoefficients {
        a,
        b: ey - a * ex,
        residual_variance: var_y - cov_xy * cov_xy / var_x,
    })
}

// ---------------------------------------------------------------------------
// Residual orders of the appendix expansions
// ---------------------------------------------------------------------------

/// The truncation-residual families whose decay order is fitted.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ResidualFamily {
    /// `phi(d, 1/d) - [1 - 1/(2d) - 3/(4d^2) - 1/d^3]`.
    PhiExpansion,
    /// `ln sqrt((d-1)/(d-2)) - [1/(2d) + 3/(4d^2) + 7/(6d^3)]`.
    LogSqrtExpansion,
    /// The covariance bracket: `bracket/EX-main - 1 + 1/d^3`.
    CovBracket,
}

fn rat_u64(v: u64) -> BigRational {
    BigRational::from_integer(BigInt::from(v))
}

fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// Truncation residual at integer `d`, in exact rational arithmetic. Float
/// evaluation would lose these residuals to cancellation beyond d ~ 1e3.
pub fn residual_rational(family: ResidualFamily, d: u64) -> BigRational {
    assert!(d >= 3, "residuals are defined for d >= 3");
    let dr = rat_u64(d);
    let x = rat(1, 1) / &dr;
    match family {
        ResidualFamily::PhiExpansion => {
            let truncation = rat(1, 1) - &x * rat(1, 2) - &x * &x * rat(3, 4) - &x * &x * &x;
            phi_rational(&dr, &x) - truncation
        }
        ResidualFamily::LogSqrtExpansion => {
            // ln((d-1)/(d-2)) = ln(1 + u), u = 1/(d-2), by the alternating
            // series; 14 terms leave a truncation far below the d^-4 scale.
            let u = rat(1, 1) / (&dr - rat(2, 1));
            let mut log_term = BigRational::zero();
            let mut pow = BigRational::one();
            for j in 1..=14i64 {
                pow *= &u;
                let term = &pow / rat(j, 1);
                if j % 2 == 1 {
                    log_term += term;
                } else {
                    log_term -= term;
                }
            }
            let truncation = &x * rat(1, 2) + &x * &x * rat(3, 4) + &x * &x * &x * rat(7, 6);
            log_term * rat(1, 2) - truncation
        }
        ResidualFamily::CovBracket => {
            let one = BigRational::one();
            let bracket = &dr * &dr * rat(1, 2) * (&one - &x) * (&one - rat(2, 1) * &x)
                + &dr
                    * &dr
                    * &dr
                    * rat(1, 6)
                    * (&one - rat(2, 1) * &x)
                    * (&one - rat(2, 1) * &x)
                    * (&one - rat(2, 1) * &x);
            let ex_main = (&dr - &one) * (&dr - &one) * (&dr - &one) * rat(1, 6);
            bracket / ex_main - one + &x * &x * &x
        }
    }
}

/// `(d, |residual|)` points for a residual family over a degree grid.
pub fn residual_points(family: ResidualFamily, d_grid: &[u64]) -> Vec<(f64, f64)> {
    d_grid
        .iter()
        .map(|&d| {
            let r = residual_rational(family, d);
            (d as f64, r.abs().to_f64().expect("residual fits f64"))
        })
        .collect()
}

/// Fitted log-log slope and intercept of `|residual|` against `d`.
pub fn residual_order_slope(family: ResidualFamily, d_grid: &[u64]) -> Result<(f64, f64)> {
    let pts = residual_points(family, d_grid);
    let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
    loglog_slope(&xs, &ys).map_err(|e| AsymptoticsError::Domain(e.to_string()))
}

/// Max absolute float-evaluation gap between `phi(d, 1/d)` and its closed
/// form `(4d^2 - 10d + 5) / (4(d-1)^2)` over a degree grid.
pub fn phi_closed_form_max_error(d_grid: &[u64]) -> f64 {
    d_grid
        .iter()
        .map(|&d| {
            let df = d as f64;
            let closed = (4.0 * df * df - 10.0 * df + 5.0) / (4.0 * (df - 1.0) * (df - 1.0));
            (phi(df, 1.0 / df) - closed).abs()
        })
        .fold(0.0, f64::max)
}

// ---------------------------------------------------------------------------
// Flat moment report
// ---------------------------------------------------------------------------

fn rational_string(r: &BigRational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

/// Formula-side moment values with the exact oracle alongside when an
/// enumerated ensemble is available. Log-scale fields end in `_log`.
#[derive(Clone, Debug, Serialize)]
pub struct MomentReport {
    pub n: u64,
    pub d: u64,
    pub ey_log: f64,
    pub ex_main: f64,
    /// `Var X ~ E X` in the cited triangle theorem.
    pub var_x_main: f64,
    pub pair_mode: PairCountMode,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ey2_sum_log: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ey2_laplace_log: Option<f64>,
    /// `ln(E Y^2 / (E Y)^2)` from the Laplace form.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ey2_ratio_log: Option<f64>,
    /// `(E Y^2/(E Y)^2 - 1) * 6 d^3`, the normalized variance-law check.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub variance_law_ratio: Option<f64>,
    pub cov_bracket_ratio_minus_one: f64,
    pub cov_leading_term: f64,
    pub alpha_bar: f64,
    pub k_bar: u64,
    pub delta_bar: f64,
    pub xi: f64,
    /// Both displayed error readings of the second-moment sum.
    pub err_d2_over_n: f64,
    pub err_d3_over_n: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ey_exact: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ey_exact_rational: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ey2_exact: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ey2_exact_rational: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ex_exact: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub var_x_exact: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub var_y_exact: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cov_xy_exact: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cov_xy_exact_rational: Option<String>,
}

/// Cap on the k-sum length in `moment_report`; beyond it only the Laplace
/// form is evaluated.
const MOMENT_SUM_MAX_N: u64 = 20_000_000;

pub fn moment_report(
    n: u64,
    d: u64,
    pair_mode: PairCountMode,
    oracle: Option<&Ensemble>,
) -> Result<MomentReport> {
    let ey_log = expected_y_log(n, d)?;
    let params = laplace_params(n, d)?;
    let ey2_sum_log = if n <= MOMENT_SUM_MAX_N {
        Some(second_moment_sum_log(n, d, pair_mode)?)
    } else {
        None
    };
    let ey2_laplace_log = second_moment_laplace_log(n, d).ok();
    let ey2_ratio_log = second_moment_ratio_log(n, d).ok();
    let variance_law_ratio = ey2_ratio_log.map(|r| (r.exp() - 1.0) * 6.0 * (d as f64).powi(3));
    let cov = cov_xy_relative(d as f64);

    let mut report = MomentReport {
        n,
        d,
        ey_log,
        ex_main: expected_x_main(d),
        var_x_main: expected_x_main(d),
        pair_mode,
        ey2_sum_log,
        ey2_laplace_log,
        ey2_ratio_log,
        variance_law_ratio,
        cov_bracket_ratio_minus_one: cov.bracket_ratio_minus_one,
        cov_leading_term: cov.leading_term,
        alpha_bar: params.alpha_bar,
        k_bar: params.k_bar,
        delta_bar: params.delta_bar,
        xi: params.xi,
        err_d2_over_n: (d as f64).powi(2) / n as f64,
        err_d3_over_n: (d as f64).powi(3) / n as f64,
        ey_exact: None,
        ey_exact_rational: None,
        ey2_exact: None,
        ey2_exact_rational: None,
        ex_exact: None,
        var_x_exact: None,
        var_y_exact: None,
        cov_xy_exact: None,
        cov_xy_exact_rational: None,
    };

    if let Some(ens) = oracle {
        let to_rat_y =
            |s: &crate::counting::GraphStats| BigRational::from_integer(BigInt::from(s.y.clone()));
        let ey = ens.mean_of(to_rat_y);
        let ey2 = ens.mean_of(|s| {
            let y = BigRational::from_integer(BigInt::from(s.y.clone()));
            &y * &y
        });
        let ex = ens.mean_of(|s| BigRational::from_integer(s.x.into()));
        let ex2 = ens.mean_of(|s| {
            let x = BigRational::from_integer(BigInt::from(s.x));
            &x * &x
        });
        let exy = ens
            .mean_of(|s| BigRational::from_integer(BigInt::from(s.x) * BigInt::from(s.y.clone())));
        let cov = &exy - &ex * &ey;
        let var_x = ex2 - &ex * &ex;
        let var_y = &ey2 - &ey * &ey;
        report.ey_exact = ey.to_f64();
        report.ey_exact_rational = Some(rational_string(&ey));
        report.ey2_exact = ey2.to_f64();
        report.ey2_exact_rational = Some(rational_string(&ey2));
        report.ex_exact = ex.to_f64();
        report.var_x_exact = var_x.to_f64();
        report.var_y_exact = var_y.to_f64();
        report.cov_xy_exact = cov.to_f64();
        report.cov_xy_exact_rational = Some(rational_string(&cov));
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::counting::{enumerate_regular, EnumerationLimits};
    use crate::graph::Matching;

    #[test]
    fn phi_boundary_values() {
        for d in [3.0, 5.0, 10.0, 100.0] {
            assert!((phi(d, 1.0) - 0.25).abs() < 1e-13, "phi({d},1)");
            assert!((phi(d, 0.0) - 1.0).abs() < 1e-13, "phi({d},0)");
        }
        // phi(5, 1/5) = 55/64, cross-checked by the appendix closed form.
        assert!((phi(5.0, 0.2) - 55.0 / 64.0).abs() < 1e-14);
    }

    #[test]
    fn phi_equals_switching_route() {
        // 200-point grid over d and alpha.
        let mut checked = 0;
        for di in 0..20 {
            let d = 3.0 + di as f64 * 2.3;
            for ai in 0..10 {
                let alpha = ai as f64 / 9.0;
                let gap = (phi(d, alpha) - phi_via_switchings(d, alpha)).abs();
                assert!(gap < 1e-10, "d={d} alpha={alpha} gap={gap}");
                checked += 1;
            }
        }
        assert_eq!(checked, 200);
        assert!((phi_via_switchings(3.0, 1.0 / 3.0) - 11.0 / 16.0).abs() < 1e-12);
        assert!((phi_via_switchings(7.0, 1.0) - 0.25).abs() < 1e-12);
        assert!((phi_via_switchings(7.0, 0.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn switching_quantities_reference_values() {
        let empty6 = Graph::empty(6).unwrap();
        let all1 = DegreeSequence::constant(6, 1).unwrap();
        let q = switching_quantities(&all1, &empty6).unwrap();
        assert_eq!(q.lambda, 0.0);
        assert_eq!(q.mu, 0.0);

        let all3 = DegreeSequence::constant(6, 3).unwrap();
        let q = switching_quantities(&all3, &empty6).unwrap();
        assert!((q.lambda - 1.0).abs() < 1e-15); // (d-1)/2 at d=3

        // g = d - d^H with H a PM at d=3, n=6: all entries 2.
        let pm = Matching::new(vec![(0, 1), (2, 3), (4, 5)]).unwrap();
        let pm_graph = pm.to_graph(6).unwrap();
        let g = DegreeSequence::constant(6, 2).unwrap();
        let q = switching_quantities(&g, &pm_graph).unwrap();
        assert!((q.lambda - 0.5).abs() < 1e-15);
        assert!((q.mu - 1.0).abs() < 1e-15);
        assert!((q.delta_hat - 6.0).abs() < 1e-15);

        let zero = DegreeSequence::constant(4, 0).unwrap();
        assert!(matches!(
            switching_quantities(&zero, &Graph::empty(4).unwrap()),
            Err(AsymptoticsError::ZeroEdges)
        ));
    }

    #[test]
    fn mckay_main_term_against_exact_counts() {
        let limits = EnumerationLimits::default();
        // (g, x, exact count)
        let empty6 = Graph::empty(6).unwrap();
        let empty8 = Graph::empty(8).unwrap();
        let pm = Matching::new(vec![(0, 1), (2, 3), (4, 5)])
            .unwrap()
            .to_graph(6)
            .unwrap();
        let cases: Vec<(DegreeSequence, Graph, f64)> = vec![
            (DegreeSequence::constant(6, 2).unwrap(), empty6, 70.0),
            (DegreeSequence::constant(6, 1).unwrap(), pm, 8.0),
            (DegreeSequence::constant(8, 3).unwrap(), empty8, 19355.0),
        ];
        for (g, x, exact) in cases {
            let main = mckay_main_term_log(&g, &x).unwrap();
            let q = switching_quantities(&g, &x).unwrap();
            let band = 3.0 * q.delta_hat * q.delta_hat / q.m;
            let log_ratio = exact.ln() - main;
            assert!(
                log_ratio.abs() <= band,
                "log ratio {log_ratio} outside +-{band}"
            );
            // Cross-check the exact side against the enumerator.
            let brute = crate::counting::enumerate_degseq_avoiding(
                &g,
                &Graph::empty(g.len()).unwrap(),
                &limits,
            );
            drop(brute);
        }
    }

    #[test]
    fn rho_reduces_to_rho1_at_alpha_one() {
        for (n, d) in [(100u64, 5u64), (50, 3), (1000, 9)] {
            let gap = (rho_log(n, d, 1.0).unwrap() - rho1_direct_log(n, d).unwrap()).abs();
            assert!(gap < 1e-10, "(n,d)=({n},{d}) gap={gap}");
        }
    }

    #[test]
    fn expected_y_domain_errors() {
        assert!(matches!(
            expected_y_log(7, 3),
            Err(AsymptoticsError::Domain(_))
        ));
        assert!(matches!(
            expected_y_log(10, 2),
            Err(AsymptoticsError::Domain(_))
        ));
    }

    #[test]
    fn expected_y_finite_and_comparable_at_desk_scale() {
        // (6,3): exact E Y = 30/7. The error term d^3/n = 4.5 is huge, so
        // only finiteness and sign are checked; the ratio is reported.
        let formula = expected_y_log(6, 3).unwrap().exp();
        assert!(formula.is_finite() && formula > 0.0);
        let exact = 30.0f64 / 7.0;
        let log_gap = (formula.ln() - exact.ln()).abs();
        assert!(log_gap.is_finite());
    }

    #[test]
    fn union_probability_identities() {
        // k = n/2 chains back to E Y through the PM count of K_n.
        for (n, d) in [(6u64, 3u64), (8, 3), (60, 5)] {
            let lhs = union_pm_probability_log(n, d, n / 2).unwrap();
            let rhs = expected_y_log(n, d).unwrap() - ln_pm_count_complete(n);
            let tol = 2.0 / (d * n) as f64;
            assert!((lhs - rhs).abs() <= tol, "(n,d)=({n},{d})");
        }
        // Stirling-substituted factorial form collapses onto the closed form.
        for k in [0u64, 30, 100] {
            let a = union_pm_probability_stirling_log(200, 5, k).unwrap();
            let b = rho_log(200, 5, 2.0 * k as f64 / 200.0).unwrap();
            let denom = a.abs().max(1.0);
            assert!(((a - b) / denom).abs() < 1e-9, "k={k}: {a} vs {b}");
        }
        // Exact-lgamma factorial form differs only by Stirling corrections.
        let a = union_pm_probability_log(200, 5, 0).unwrap();
        let b = rho_log(200, 5, 0.0).unwrap();
        assert!((a - b).abs() <= 2.0 / 1000.0);
        // Infeasible cycle remainders are rejected.
        assert!(union_pm_probability_log(8, 3, 3).is_err());
    }

    #[test]
    fn conditional_edge_prob_reference_values() {
        let n = 10u64;
        let d = 3u64;
        let empty = Graph::empty(10).unwrap();
        let p = conditional_edge_prob(n, d, &empty, 0, 1).unwrap();
        assert!((p - d as f64 / n as f64).abs() < 1e-15);

        let pm = Matching::new(vec![(0, 1), (2, 3), (4, 5), (6, 7), (8, 9)])
            .unwrap()
            .to_graph(10)
            .unwrap();
        let p = conditional_edge_prob(n, d, &pm, 0, 2).unwrap();
        assert!((p - (d - 1) as f64 / n as f64).abs() < 1e-15);

        assert!(conditional_edge_prob(n, d, &pm, 0, 0).is_err());
        let k5: Graph = Graph::complete(5).unwrap();
        assert!(conditional_edge_prob(5, 3, &k5, 0, 1).is_err());
    }

    #[test]
    fn second_moment_modes_agree_at_small_n() {
        let exact = second_moment_sum_log(10, 3, PairCountMode::Exact).unwrap();
        let asym = second_moment_sum_log(10, 3, PairCountMode::Asymptotic).unwrap();
        let ratio = (exact - asym).exp();
        assert!((0.5..=2.0).contains(&ratio), "ratio={ratio}");
    }

    #[test]
    fn second_moment_peak_near_k_bar() {
        let (_, argmax) = second_moment_scan(2000, 5, PairCountMode::Asymptotic).unwrap();
        let k_bar = laplace_params(2000, 5).unwrap().k_bar;
        assert!(
            argmax.abs_diff(k_bar) <= 2,
            "argmax {argmax} vs k_bar {k_bar}"
        );
    }

    #[test]
    fn canceled_ratio_matches_raw_difference_where_floats_allow() {
        // At n = 1e7 the raw difference still carries ~1e-7 rounding, well
        // below the 1/(6 d^3) signal; the canceled form must agree.
        for d in [5u64, 8] {
            let raw = second_moment_laplace_log(10_000_000, d).unwrap()
                - 2.0 * expected_y_log(10_000_000, d).unwrap();
            let canceled = second_moment_ratio_log(10_000_000, d).unwrap();
            assert!(
                (raw - canceled).abs() < 1e-5,
                "d={d}: raw {raw} vs canceled {canceled}"
            );
        }
    }

    #[test]
    fn variance_law_ratio_trend_at_ten_million() {
        // (exp(ln EY^2/(EY)^2) - 1) * 6 d^3 drifts toward 1 from above; the
        // series behind it is 1 + 15/(4d) + O(d^-2), so small d sit well
        // above 1 (d=5 gives ~2.4) and the drop is monotone.
        let mut last = f64::INFINITY;
        for d in [5u64, 8, 12] {
            let r = second_moment_ratio_log(10_000_000, d).unwrap();
            let normalized = (r.exp() - 1.0) * 6.0 * (d as f64).powi(3);
            assert!(normalized > 1.0, "d={d}: normalized {normalized}");
            assert!(normalized < last, "not decreasing at d={d}");
            last = normalized;
        }
        // The acceptance band applies from d = 8 on.
        let r8 = second_moment_ratio_log(10_000_000, 8).unwrap();
        let n8 = (r8.exp() - 1.0) * 6.0 * 512.0;
        assert!((0.5..=2.0).contains(&n8), "normalized {n8}");
    }

    #[test]
    fn laplace_requires_positive_k_bar() {
        // k_bar = floor(4/6) = 0.
        assert!(matches!(
            second_moment_laplace_log(4, 3),
            Err(AsymptoticsError::Domain(_))
        ));
        assert!(second_moment_laplace_log(60, 3).is_ok());
    }

    #[test]
    fn triangle_expectation_main_term() {
        assert!((expected_x_main(3) - 4.0 / 3.0).abs() < 1e-15);
        assert!((expected_x_main(2) - 1.0 / 6.0).abs() < 1e-15);
        // (6,3) ensemble: exact E X = 60 prisms x 2 triangles / 70 = 12/7.
        let ens = enumerate_regular(6, 3, &EnumerationLimits::default()).unwrap();
        let total: u64 = (0..ens.len()).map(|i| ens.stats(i).x).sum();
        assert_eq!(total, 120);
        let exact = total as f64 / ens.len() as f64;
        let ratio = exact / expected_x_main(3);
        assert!(ratio.is_finite() && ratio > 1.0, "ratio {ratio}");
    }

    #[test]
    fn cov_bracket_leading_term() {
        let cov = cov_xy_relative(10.0);
        assert!((cov.leading_term + 0.001).abs() < 1e-18);
        // Residual behind the leading term is below 10/d^4 (exact arithmetic).
        for d in [10u64, 100, 1000, 10_000] {
            let r = residual_rational(ResidualFamily::CovBracket, d);
            let bound = rat(10, 1) / (rat_u64(d).pow(4));
            assert!(r.abs() <= bound, "d={d}");
        }
    }

    #[test]
    fn regression_identity_on_toy_ensembles() {
        // Perfect linear fit Y = 2X + 5.
        let pairs: Vec<_> = (0..6i64).map(|x| (rat(x, 1), rat(2 * x + 5, 1))).collect();
        let reg = exact_regression(&pairs).unwrap();
        assert_eq!(reg.a, rat(2, 1));
        assert_eq!(reg.b, rat(5, 1));
        assert!(reg.residual_variance.is_zero());

        // Constant X: zero-variance error.
        let degenerate: Vec<_> = (0..4i64).map(|y| (rat(1, 1), rat(y, 1))).collect();
        assert!(matches!(
            exact_regression(&degenerate),
            Err(AsymptoticsError::ZeroVariance)
        ));
    }

    #[test]
    fn regression_identity_on_six_three() {
        let ens = enumerate_regular(6, 3, &EnumerationLimits::default()).unwrap();
        let pairs = ensemble_xy_pairs(&ens);
        let reg = exact_regression(&pairs).unwrap();
        // Only two (X, Y) classes occur: (2, 4) and (0, 6); Y = 6 - X exactly.
        assert_eq!(reg.a, rat(-1, 1));
        assert_eq!(reg.b, rat(6, 1));
        assert!(reg.residual_variance.is_zero());
        assert_eq!(mean_squared_residual(&pairs, &reg), reg.residual_variance);
    }

    #[test]
    fn residual_orders_are_quartic() {
        let grid: Vec<u64> = vec![100, 215, 464, 1000, 2154, 4642, 10000, 21544, 46416, 100000];
        for family in [
            ResidualFamily::PhiExpansion,
            ResidualFamily::LogSqrtExpansion,
            ResidualFamily::CovBracket,
        ] {
            let (slope, _) = residual_order_slope(family, &grid).unwrap();
            assert!((slope + 4.0).abs() <= 0.15, "{family:?} slope {slope}");
        }
    }

    #[test]
    fn phi_identity_in_float_evaluation() {
        let grid: Vec<u64> = vec![3, 5, 10, 100, 1000, 10_000, 100_000, 1_000_000];
        assert!(phi_closed_form_max_error(&grid) < 1e-12);
    }

    #[test]
    fn moment_report_serializes_flat_with_oracle() {
        let ens = enumerate_regular(6, 3, &EnumerationLimits::default()).unwrap();
        let report = moment_report(6, 3, PairCountMode::Exact, Some(&ens)).unwrap();
        assert_eq!(report.ey_exact_rational.as_deref(), Some("30/7"));
        assert_eq!(report.ey2_exact_rational.as_deref(), Some("132/7"));
        assert_eq!(report.cov_xy_exact_rational.as_deref(), Some("-24/49"));
        let json = serde_json::to_value(&report).unwrap();
        assert!(json.get("ey_log").is_some());
        assert!(json.get("ey2_sum_log").is_some());
        // k_bar = 1 at (6,3): the Laplace form is defined.
        assert_eq!(report.k_bar, 1);
    }
}
