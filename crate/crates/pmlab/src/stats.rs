//! Statistical verification utilities: goodness-of-fit against the uniform
//! law, moment summaries, the main-theorem standardization, and the
//! log-log residual-order fits.

use serde::Serialize;
use thiserror::Error;

use crate::special::{gamma_q, normal_cdf};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("zero variance in the regressor")]
    ZeroVariance,
}

/// Pearson chi-square statistic of observed class counts against the uniform
/// distribution, with the `k - 1` degrees-of-freedom tail p-value.
pub fn chi_square_uniform(counts: &[u64]) -> Result<(f64, f64), StatsError> {
    let k = counts.len();
    if k < 2 {
        return Err(StatsError::DegenerateInput(format!(
            "need at least 2 classes, got {k}"
        )));
    }
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(StatsError::DegenerateInput("no observations".to_string()));
    }
    let expected = total as f64 / k as f64;
    let stat: f64 = counts
        .iter()
        .map(|&o| {
            let diff = o as f64 - expected;
            diff * diff / expected
        })
        .sum();
    Ok((stat, chi_square_pvalue(stat, (k - 1) as f64)))
}

/// Upper-tail chi-square p-value with `df` degrees of freedom, via the
/// regularized incomplete gamma function.
pub fn chi_square_pvalue(stat: f64, df: f64) -> f64 {
    gamma_q(df / 2.0, stat / 2.0)
}

/// Two-sample chi-square homogeneity test over shared classes.
pub fn chi_square_two_sample(a: &[u64], b: &[u64]) -> Result<(f64, f64), StatsError> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(StatsError::DegenerateInput(
            "need two equal-length count vectors with at least 2 classes".to_string(),
        ));
    }
    let ta: u64 = a.iter().sum();
    let tb: u64 = b.iter().sum();
    if ta == 0 || tb == 0 {
        return Err(StatsError::DegenerateInput("empty sample".to_string()));
    }
    let grand = (ta + tb) as f64;
    let mut stat = 0.0;
    let mut classes = 0usize;
    for (&oa, &ob) in a.iter().zip(b) {
        let pooled = (oa + ob) as f64;
        if pooled == 0.0 {
            continue;
        }
        classes += 1;
        let ea = pooled * ta as f64 / grand;
        let eb = pooled * tb as f64 / grand;
        stat += (oa as f64 - ea).powi(2) / ea + (ob as f64 - eb).powi(2) / eb;
    }
    if classes < 2 {
        return Err(StatsError::DegenerateInput(
            "fewer than 2 populated classes".to_string(),
        ));
    }
    Ok((stat, chi_square_pvalue(stat, (classes - 1) as f64)))
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct SampleSummary {
    pub count: usize,
    pub mean: f64,
    /// Unbiased (n-1) variance.
    pub variance: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
}

/// Mean, unbiased variance, and standardized third and fourth moments.
pub fn empirical_moments(samples: &[f64]) -> Result<SampleSummary, StatsError> {
    let n = samples.len();
    if n < 2 {
        return Err(StatsError::DegenerateInput(format!(
            "need at least 2 samples, got {n}"
        )));
    }
    let nf = n as f64;
    let mean = samples.iter().sum::<f64>() / nf;
    let mut m2 = 0.0;
    let mut m3 = 0.0;
    let mut m4 = 0.0;
    for &x in samples {
        let d = x - mean;
        m2 += d * d;
        m3 += d * d * d;
        m4 += d * d * d * d;
    }
    let variance = m2 / (nf - 1.0);
    m2 /= nf;
    m3 /= nf;
    m4 /= nf;
    let (skewness, excess_kurtosis) = if m2 > 0.0 {
        (m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0)
    } else {
        (0.0, 0.0)
    };
    Ok(SampleSummary {
        count: n,
        mean,
        variance,
        skewness,
        excess_kurtosis,
    })
}

/// Standardization of the main limit theorem: `(y - EY) / (EY / sqrt(6 d^3))`.
///
/// `expected_y` comes from either the formula evaluator or an exact oracle;
/// the caller picks the mode.
pub fn standardize_y(samples: &[f64], expected_y: f64, d: u64) -> Result<Vec<f64>, StatsError> {
    if samples.is_empty() {
        return Err(StatsError::DegenerateInput("empty sample".to_string()));
    }
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    if !(expected_y > 0.0) || d == 0 {
        return Err(StatsError::Domain(format!(
            "need expected_y > 0 and d >= 1, got expected_y={expected_y}, d={d}"
        )));
    }
    let scale = expected_y / (6.0 * (d as f64).powi(3)).sqrt();
    Ok(samples.iter().map(|&y| (y - expected_y) / scale).collect())
}

/// Kolmogorov-Smirnov sup-distance between the empirical CDF of standardized
/// samples and the standard normal CDF.
pub fn ks_distance_normal(samples: &[f64]) -> Result<f64, StatsError> {
    let n = samples.len();
    if n < 10 {
        return Err(StatsError::DegenerateInput(format!(
            "need at least 10 samples, got {n}"
        )));
    }
    let mut xs = samples.to_vec();
    xs.sort_by(|a, b| a.partial_cmp(b).expect("no NaN samples"));
    let nf = n as f64;
    let mut dist: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let cdf = normal_cdf(x);
        let hi = (i + 1) as f64 / nf - cdf;
        let lo = cdf - i as f64 / nf;
        dist = dist.max(hi).max(lo);
    }
    Ok(dist)
}

/// Least-squares fit of `ln y` on `ln x`; returns `(slope, intercept)`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Result<(f64, f64), StatsError> {
    if xs.len() != ys.len() || xs.len() < 3 {
        return Err(StatsError::Domain(format!(
            "need matching xs/ys with at least 3 points, got {} and {}",
            xs.len(),
            ys.len()
        )));
    }
    // The negated form also rejects NaN inputs.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    if xs.iter().chain(ys).any(|&v| !(v > 0.0)) {
        return Err(StatsError::Domain(
            "log-log fit requires strictly positive values".to_string(),
        ));
    }
    let n = xs.len() as f64;
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    if sxx == 0.0 {
        return Err(StatsError::Domain(
            "all x values coincide; slope undefined".to_string(),
        ));
    }
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}
