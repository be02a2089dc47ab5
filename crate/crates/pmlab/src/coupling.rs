//! The coupling of G(n,d) with G(n,d+1) by adding a uniform perfect matching
//! of the complement, with the three-branch acceptance rule, its exact-mode
//! verification (uniform marginal, containment probability, degree-bound
//! checks), and the chained multi-degree coupling.
//!
//! Exact mode replaces the paper-level "sufficiently large" constants with
//! ensemble-derived quantities; all of its probabilities are rationals, so
//! the uniform-marginal claim is checked as an exact equality.

use std::sync::Arc;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::counting::{perfect_matchings, Ensemble};
use crate::graph::Graph;
use crate::sampler::{sample_pm_complement, uniform_biguint_below, ComplementPmMethod};
use crate::special::ln_gamma;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CouplingError {
    #[error("ensemble is empty")]
    EmptyEnsemble,
    #[error("ensemble mismatch: {0}")]
    EnsembleMismatch(String),
    #[error("eta = {eta} is out of range; the coupling needs eta < 1")]
    EtaOutOfRange { eta: f64 },
    #[error("branch mass exceeds 1: {0}")]
    ProbabilityOverflow(String),
    #[error("graph not found in the low-degree ensemble")]
    UnknownGraph,
    #[error("asymptotic configs are evaluator-only: {0}")]
    NotSamplable(String),
    #[error("domain error: {0}")]
    Domain(String),
}

type Result<T> = std::result::Result<T, CouplingError>;

fn big_ratio(n: &BigUint) -> BigRational {
    BigRational::from_integer(BigInt::from(n.clone()))
}

/// Rational serialized as numerator/denominator strings.
#[derive(Clone, Debug, Serialize)]
pub struct RationalJson {
    pub num: String,
    pub den: String,
}

impl From<&BigRational> for RationalJson {
    fn from(r: &BigRational) -> Self {
        RationalJson {
            num: r.numer().to_string(),
            den: r.denom().to_string(),
        }
    }
}

// ---------------------------------------------------------------------------
// Exact-mode configuration
// ---------------------------------------------------------------------------

/// Coupling configuration at enumerable scale: every scalar is an exact
/// rational derived from the two ensembles.
#[derive(Clone, Debug)]
pub struct ExactCouplingConfig {
    /// Degree-d side; `G_d` is drawn uniformly from here.
    pub ens_lo: Arc<Ensemble>,
    /// Degree-(d+1) side.
    pub ens_hi: Arc<Ensemble>,
    /// The threshold knob the lower bound `y_lower` was built from.
    pub q: BigRational,
    /// Lower PM-count threshold (the paper's Y-underline).
    pub y_lower: BigRational,
    /// Upper complement-PM bound (the paper's Z-overline).
    pub z_upper: BigRational,
    /// Fallback probability; well-defined configs have `0 <= eta < 1`.
    pub eta: BigRational,
    /// `sum_B (y_lower - Y(G'')) / d_hat`: the total demote-branch factor,
    /// and the branch-rule floor on `eta`.
    pub demote_mass_factor: BigRational,
    /// Indices into `ens_hi` with `Y < y_lower` (the bad set B).
    pub bad_set: Vec<usize>,
    /// `y_lower - Y(G'')` per bad member, aligned with `bad_set`.
    pub bad_weights: Vec<BigRational>,
    /// Upper bad set B'; empty by construction in exact mode.
    pub b_prime: Vec<usize>,
    /// Total in-degree `D = sum Y(G')`.
    pub d_total: BigUint,
    /// In-degree of the non-bad part, `D-hat = sum_{G' not in B} Y(G')`.
    pub d_hat: BigUint,
}

/// Build the exact-mode config from two consecutive ensembles.
///
/// `z_upper = max Z`; `y_lower` interpolates the observed Y-range as
/// `Y_min + 2q (Y_max - Y_min)`; `B` holds the graphs strictly below the
/// threshold. `eta` is the least value satisfying both lemma inequalities at
/// once: the branch-mass bound `sum_B (y_lower - Y)/D-hat <= eta` and the
/// degree bound `d^-(B) + d^-(B') <= eta D`. Everything the branch rule and
/// the bound checks need then holds by construction, or the build fails with
/// `EtaOutOfRange`.
pub fn build_exact_config(
    ens_lo: Arc<Ensemble>,
    ens_hi: Arc<Ensemble>,
    q: BigRational,
) -> Result<ExactCouplingConfig> {
    if ens_lo.is_empty() || ens_hi.is_empty() {
        return Err(CouplingError::EmptyEnsemble);
    }
    if ens_lo.n != ens_hi.n || ens_lo.d + 1 != ens_hi.d {
        return Err(CouplingError::EnsembleMismatch(format!(
            "expected (n,d) and (n,d+1), got ({},{}) and ({},{})",
            ens_lo.n, ens_lo.d, ens_hi.n, ens_hi.d
        )));
    }
    if q.is_negative() {
        return Err(CouplingError::Domain(format!("q = {q} must be >= 0")));
    }
    if (0..ens_lo.len()).any(|i| ens_lo.stats(i).z.is_zero()) {
        return Err(CouplingError::Domain(
            "some low-degree graph has no complement perfect matching; \
             the add-a-matching step is undefined"
                .to_string(),
        ));
    }

    let z_upper = big_ratio(&ens_lo.max_z());
    let y_min = big_ratio(&ens_hi.min_y());
    let y_max = big_ratio(&ens_hi.max_y());
    let y_lower = &y_min + BigRational::from_integer(2.into()) * &q * (&y_max - &y_min);

    let mut bad_set = Vec::new();
    let mut bad_weights = Vec::new();
    let mut d_total = BigUint::zero();
    let mut d_hat = BigUint::zero();
    for i in 0..ens_hi.len() {
        let y = &ens_hi.stats(i).y;
        d_total += y;
        if big_ratio(y) < y_lower {
            bad_set.push(i);
            bad_weights.push(&y_lower - big_ratio(y));
        } else {
            d_hat += y;
        }
    }
    if d_hat.is_zero() {
        return Err(CouplingError::Domain(
            "every high-degree graph fell below the threshold; lower q".to_string(),
        ));
    }
    let demote_mass_factor = bad_weights.iter().sum::<BigRational>() / big_ratio(&d_hat);
    let in_degree_bad: BigUint = bad_set.iter().map(|&j| ens_hi.stats(j).y.clone()).sum();
    let eta_degree_floor = big_ratio(&in_degree_bad) / big_ratio(&d_total);
    let eta = demote_mass_factor.clone().max(eta_degree_floor);
    if eta >= BigRational::one() {
        return Err(CouplingError::EtaOutOfRange {
            eta: eta.to_f64().unwrap_or(f64::INFINITY),
        });
    }
    Ok(ExactCouplingConfig {
        ens_lo,
        ens_hi,
        q,
        y_lower,
        z_upper,
        eta,
        demote_mass_factor,
        bad_set,
        bad_weights,
        b_prime: Vec::new(),
        d_total,
        d_hat,
    })
}

/// Scalar summary of an exact config, for the JSON output.
#[derive(Clone, Debug, Serialize)]
pub struct ExactConfigSummary {
    pub mode: &'static str,
    pub n: usize,
    pub d_from: usize,
    pub d_to: usize,
    pub q: RationalJson,
    pub y_lower: RationalJson,
    pub z_upper: RationalJson,
    pub eta: RationalJson,
    pub eta_value: f64,
    pub demote_mass_factor: RationalJson,
    pub d_total: String,
    pub d_hat: String,
    pub bad_set: Vec<usize>,
    pub b_prime: Vec<usize>,
}

impl ExactCouplingConfig {
    pub fn summary(&self) -> ExactConfigSummary {
        ExactConfigSummary {
            mode: "exact",
            n: self.ens_lo.n,
            d_from: self.ens_lo.d,
            d_to: self.ens_hi.d,
            q: (&self.q).into(),
            y_lower: (&self.y_lower).into(),
            z_upper: (&self.z_upper).into(),
            eta: (&self.eta).into(),
            eta_value: self.eta.to_f64().unwrap_or(f64::NAN),
            demote_mass_factor: (&self.demote_mass_factor).into(),
            d_total: self.d_total.to_string(),
            d_hat: self.d_hat.to_string(),
            bad_set: self.bad_set.clone(),
            b_prime: self.b_prime.clone(),
        }
    }

    fn is_bad(&self, hi_idx: usize) -> bool {
        self.bad_set.binary_search(&hi_idx).is_ok()
    }
}

// ---------------------------------------------------------------------------
// Branch masses and the exact step kernel
// ---------------------------------------------------------------------------

/// Arithmetic the kernel sweep is generic over: exact rationals for the
/// machine-checked uniformity claim, plain floats for the float-mode check.
pub trait KernelScalar:
    Clone
    + PartialOrd
    + for<'a> std::ops::Add<&'a Self, Output = Self>
    + for<'a> std::ops::Sub<&'a Self, Output = Self>
    + for<'a> std::ops::Mul<&'a Self, Output = Self>
    + for<'a> std::ops::Div<&'a Self, Output = Self>
    + for<'a> std::ops::AddAssign<&'a Self>
{
    fn scalar_zero() -> Self;
    fn scalar_one() -> Self;
    fn from_ratio(r: &BigRational) -> Self;
}

impl KernelScalar for BigRational {
    fn scalar_zero() -> Self {
        <BigRational as Zero>::zero()
    }
    fn scalar_one() -> Self {
        <BigRational as One>::one()
    }
    fn from_ratio(r: &BigRational) -> Self {
        r.clone()
    }
}

impl KernelScalar for f64 {
    fn scalar_zero() -> Self {
        0.0
    }
    fn scalar_one() -> Self {
        1.0
    }
    fn from_ratio(r: &BigRational) -> Self {
        r.to_f64().expect("config scalar fits f64")
    }
}

fn clip_unit<S: KernelScalar>(x: S) -> S {
    let one = S::scalar_one();
    if x > one {
        one
    } else {
        x
    }
}

/// One-step transition kernel `K[g][g-hat] = P(G_next = g-hat | G_d = g)`.
///
/// Branch masses above 1 are clipped to the operational sampling semantics
/// (cumulative thresholds intersected with `[0,1]`); `overflow` records
/// whether any clipping happened. Valid configs never clip.
pub struct StepKernel<S> {
    pub rows: Vec<Vec<S>>,
    pub overflow: bool,
}

pub fn step_kernel<S: KernelScalar>(cfg: &ExactCouplingConfig) -> StepKernel<S> {
    let n_lo = cfg.ens_lo.len();
    let n_hi = cfg.ens_hi.len();
    let one_m_eta = S::scalar_one() - &S::from_ratio(&cfg.eta);
    let z_upper = S::from_ratio(&cfg.z_upper);
    // y_lower / Y(G') per non-bad high class (bad members keep with the bare
    // base mass and may have Y = 0), and (y_lower - Y(G''))/d_hat per bad one.
    let keep_factor: Vec<Option<S>> = (0..n_hi)
        .map(|j| {
            if cfg.is_bad(j) {
                None
            } else {
                Some(
                    S::from_ratio(&cfg.y_lower)
                        / &S::from_ratio(&big_ratio(&cfg.ens_hi.stats(j).y)),
                )
            }
        })
        .collect();
    let d_hat = S::from_ratio(&big_ratio(&cfg.d_hat));
    let demote_factors: Vec<S> = cfg
        .bad_weights
        .iter()
        .map(|w| S::from_ratio(w) / &d_hat)
        .collect();
    let sigma_hi = S::scalar_one() / &S::from_ratio(&BigRational::from_integer(BigInt::from(n_hi)));

    let mut rows = Vec::with_capacity(n_lo);
    let mut overflow = false;
    for i in 0..n_lo {
        let mut row = vec![S::scalar_zero(); n_hi];
        let g = cfg.ens_lo.graph(i);
        let pms = perfect_matchings(&g.complement());
        debug_assert_eq!(BigUint::from(pms.len()), cfg.ens_lo.stats(i).z);
        let inv_z =
            S::scalar_one() / &S::from_ratio(&BigRational::from_integer(BigInt::from(pms.len())));
        let base =
            one_m_eta.clone() * &(S::from_ratio(&big_ratio(&cfg.ens_lo.stats(i).z)) / &z_upper);
        let mut h_mass = S::scalar_zero();
        for m in &pms {
            let g_prime = g.union_with_matching(m).expect("matching avoids g");
            let j = cfg
                .ens_hi
                .class_of(&g_prime)
                .expect("union is (d+1)-regular, so enumerated");
            // Cumulative branch thresholds, clipped to [0, 1].
            let keep_raw = match &keep_factor[j] {
                None => base.clone(),
                Some(f) => base.clone() * f,
            };
            let mut cum = keep_raw.clone();
            let mut prev_clipped = clip_unit(keep_raw);
            row[j] += &(inv_z.clone() * &prev_clipped);
            if !cfg.is_bad(j) {
                for (&b_idx, factor) in cfg.bad_set.iter().zip(&demote_factors) {
                    cum += &(base.clone() * factor);
                    let cur_clipped = clip_unit(cum.clone());
                    let eff = cur_clipped.clone() - &prev_clipped;
                    row[b_idx] += &(inv_z.clone() * &eff);
                    prev_clipped = cur_clipped;
                }
            }
            if cum > S::scalar_one() {
                overflow = true;
            }
            h_mass += &(inv_z.clone() * &(S::scalar_one() - &prev_clipped));
        }
        let spread = h_mass * &sigma_hi;
        for cell in row.iter_mut() {
            *cell += &spread;
        }
        rows.push(row);
    }
    StepKernel { rows, overflow }
}

/// Full marginal of `G_next` in exact rationals.
#[derive(Clone, Debug)]
pub struct MarginalReport {
    pub probabilities: Vec<BigRational>,
    /// `max |P(g-hat) - 1/|G(n,d+1)||`, exact.
    pub max_deviation: BigRational,
    /// Exact equality with the uniform vector.
    pub is_uniform: bool,
    /// Some branch mass was clipped; the config violates the branch lemma.
    pub overflow_clipped: bool,
}

/// `P(G_next = g-hat)` for every member of the high ensemble, by exact
/// summation over all `(G_d, matching, branch)` triples.
pub fn exact_marginal(cfg: &ExactCouplingConfig) -> MarginalReport {
    let kernel = step_kernel::<BigRational>(cfg);
    let n_lo = BigRational::from_integer(BigInt::from(cfg.ens_lo.len()));
    let n_hi = cfg.ens_hi.len();
    let sigma_hi = BigRational::new(BigInt::one(), BigInt::from(n_hi));
    let mut probabilities = vec![BigRational::zero(); n_hi];
    for row in &kernel.rows {
        for (p, cell) in probabilities.iter_mut().zip(row) {
            *p += cell;
        }
    }
    for p in probabilities.iter_mut() {
        *p /= &n_lo;
    }
    let max_deviation = probabilities
        .iter()
        .map(|p| (p - &sigma_hi).abs())
        .max()
        .unwrap_or_else(BigRational::zero);
    MarginalReport {
        is_uniform: max_deviation.is_zero(),
        max_deviation,
        probabilities,
        overflow_clipped: kernel.overflow,
    }
}

/// Float-arithmetic marginal: the same sweep in f64, with the max absolute
/// deviation from uniform.
pub fn exact_marginal_f64(cfg: &ExactCouplingConfig) -> (Vec<f64>, f64) {
    let kernel = step_kernel::<f64>(cfg);
    let n_lo = cfg.ens_lo.len() as f64;
    let n_hi = cfg.ens_hi.len();
    let mut probabilities = vec![0.0; n_hi];
    for row in &kernel.rows {
        for (p, cell) in probabilities.iter_mut().zip(row) {
            *p += cell;
        }
    }
    let mut max_dev: f64 = 0.0;
    for p in probabilities.iter_mut() {
        *p /= n_lo;
        max_dev = max_dev.max((*p - 1.0 / n_hi as f64).abs());
    }
    (probabilities, max_dev)
}

/// Exact `P(G_d subset of G_next)` under the coupling.
pub fn containment_probability(cfg: &ExactCouplingConfig) -> BigRational {
    let kernel = step_kernel::<BigRational>(cfg);
    let sigma_lo = BigRational::new(BigInt::one(), BigInt::from(cfg.ens_lo.len()));
    let mut total = BigRational::zero();
    for (i, row) in kernel.rows.iter().enumerate() {
        let g = cfg.ens_lo.graph(i);
        for (j, cell) in row.iter().enumerate() {
            if !cell.is_zero() && g.is_subgraph_of(cfg.ens_hi.graph(j)) {
                total += cell;
            }
        }
    }
    total * sigma_lo
}

// ---------------------------------------------------------------------------
// Degree-bound verification
// ---------------------------------------------------------------------------

/// Pass/fail report for the well-definedness inequalities.
#[derive(Clone, Debug, Serialize)]
pub struct DegreeBoundReport {
    /// `d^-(B) = sum_{G' in B} Y(G')`.
    pub in_degree_bad: String,
    /// `d^-(B')`; zero with the empty upper bad set.
    pub in_degree_bad_prime: String,
    /// `eta * D`.
    pub eta_d: RationalJson,
    /// `d^-(B) + d^-(B') <= eta D`.
    pub degree_inequality_ok: bool,
    /// `Z(G) <= z_upper` for every low-degree graph.
    pub z_bound_ok: bool,
    /// `y_lower <= Y(G')` for every high-degree graph outside B.
    pub y_bound_ok: bool,
    pub all_ok: bool,
}

pub fn verify_degree_bounds(cfg: &ExactCouplingConfig) -> DegreeBoundReport {
    let in_bad: BigUint = cfg
        .bad_set
        .iter()
        .map(|&j| cfg.ens_hi.stats(j).y.clone())
        .sum();
    let in_bad_prime: BigUint = cfg
        .b_prime
        .iter()
        .map(|&j| cfg.ens_hi.stats(j).y.clone())
        .sum();
    let eta_d = &cfg.eta * big_ratio(&cfg.d_total);
    let degree_inequality_ok = big_ratio(&(&in_bad + &in_bad_prime)) <= eta_d;
    let z_bound_ok =
        (0..cfg.ens_lo.len()).all(|i| big_ratio(&cfg.ens_lo.stats(i).z) <= cfg.z_upper);
    let y_bound_ok = (0..cfg.ens_hi.len())
        .filter(|&j| !cfg.is_bad(j))
        .all(|j| cfg.y_lower <= big_ratio(&cfg.ens_hi.stats(j).y));
    DegreeBoundReport {
        in_degree_bad: in_bad.to_string(),
        in_degree_bad_prime: in_bad_prime.to_string(),
        eta_d: (&eta_d).into(),
        all_ok: degree_inequality_ok && z_bound_ok && y_bound_ok,
        degree_inequality_ok,
        z_bound_ok,
        y_bound_ok,
    }
}

// ---------------------------------------------------------------------------
// Sampling one coupled step
// ---------------------------------------------------------------------------

/// Which branch of the three-way rule fired.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Branch {
    /// Kept `G' = G_d + matching`; containment holds by construction.
    AcceptPrime,
    /// Redistributed onto a bad-set member.
    DemoteToBad,
    /// Fell back to the independent uniform draw `H`.
    FallbackH,
}

impl std::fmt::Display for Branch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Branch::AcceptPrime => "accept-G'",
            Branch::DemoteToBad => "demote-to-B-member",
            Branch::FallbackH => "fallback-H",
        })
    }
}

#[derive(Clone, Debug)]
pub struct CouplingOutcome {
    pub g_d: Graph,
    pub g_prime: Graph,
    pub g_next: Graph,
    pub branch: Branch,
    pub contained: bool,
}

/// One coupled step: draw `G_d` uniformly, then extend.
pub fn couple_step<R: Rng>(cfg: &ExactCouplingConfig, rng: &mut R) -> Result<CouplingOutcome> {
    let idx = rng.random_range(0..cfg.ens_lo.len());
    couple_step_from_class(cfg, idx, rng)
}

/// One coupled step conditioned on `G_d = g`; `g` must be an ensemble member.
pub fn couple_step_from<R: Rng>(
    cfg: &ExactCouplingConfig,
    g: &Graph,
    rng: &mut R,
) -> Result<CouplingOutcome> {
    let idx = cfg.ens_lo.class_of(g).ok_or(CouplingError::UnknownGraph)?;
    couple_step_from_class(cfg, idx, rng)
}

fn couple_step_from_class<R: Rng>(
    cfg: &ExactCouplingConfig,
    idx: usize,
    rng: &mut R,
) -> Result<CouplingOutcome> {
    let g = cfg.ens_lo.graph(idx).clone();
    let m = sample_pm_complement(&g, rng, ComplementPmMethod::CountingGuided)
        .map_err(|e| CouplingError::Domain(e.to_string()))?;
    let g_prime = g.union_with_matching(&m).expect("matching avoids g");
    let j = cfg
        .ens_hi
        .class_of(&g_prime)
        .expect("union is (d+1)-regular, so enumerated");

    let one = BigRational::one();
    let base = (&one - &cfg.eta) * big_ratio(&cfg.ens_lo.stats(idx).z) / &cfg.z_upper;
    let in_bad = cfg.is_bad(j);
    let keep = if in_bad {
        base.clone()
    } else {
        &base * &cfg.y_lower / big_ratio(&cfg.ens_hi.stats(j).y)
    };
    let demote_total = if in_bad {
        BigRational::zero()
    } else {
        &base * &cfg.demote_mass_factor
    };
    let assigned = &keep + &demote_total;
    if assigned > one {
        return Err(CouplingError::ProbabilityOverflow(format!(
            "keep + demote = {assigned} for classes ({idx} -> {j})"
        )));
    }

    let branch = draw_branch(rng, &keep, &demote_total)?;
    let (g_next, branch) = match branch {
        0 => (g_prime.clone(), Branch::AcceptPrime),
        1 => {
            // Weighted choice over B with weights y_lower - Y(G'').
            let denom = cfg
                .bad_weights
                .iter()
                .fold(BigInt::one(), |acc, w| acc.lcm(w.denom()));
            let weights: Vec<BigUint> = cfg
                .bad_weights
                .iter()
                .map(|w| {
                    (w * BigRational::from_integer(denom.clone()))
                        .to_integer()
                        .to_biguint()
                        .expect("positive weight")
                })
                .collect();
            let total: BigUint = weights.iter().sum();
            let mut draw = uniform_biguint_below(rng, &total);
            let mut chosen = *cfg.bad_set.last().expect("demote implies nonempty B");
            for (&b_idx, w) in cfg.bad_set.iter().zip(&weights) {
                if draw < *w {
                    chosen = b_idx;
                    break;
                }
                draw -= w;
            }
            (cfg.ens_hi.graph(chosen).clone(), Branch::DemoteToBad)
        }
        _ => {
            let h = cfg.ens_hi.graph(rng.random_range(0..cfg.ens_hi.len()));
            (h.clone(), Branch::FallbackH)
        }
    };
    let contained = g.is_subgraph_of(&g_next);
    debug_assert!(branch != Branch::AcceptPrime || contained);
    Ok(CouplingOutcome {
        g_d: g,
        g_prime,
        g_next,
        branch,
        contained,
    })
}

/// Exact categorical draw over `[keep, demote, rest]`: scale to a common
/// denominator and sample a uniform integer below it.
fn draw_branch<R: Rng>(rng: &mut R, keep: &BigRational, demote: &BigRational) -> Result<usize> {
    let denom = keep.denom().lcm(demote.denom());
    let scale = |r: &BigRational| -> BigUint {
        (r * BigRational::from_integer(denom.clone()))
            .to_integer()
            .to_biguint()
            .expect("non-negative mass")
    };
    let keep_n = scale(keep);
    let demote_n = scale(demote);
    let total = denom.to_biguint().expect("positive denominator");
    let draw = uniform_biguint_below(rng, &total);
    if draw < keep_n {
        Ok(0)
    } else if draw < &keep_n + &demote_n {
        Ok(1)
    } else {
        Ok(2)
    }
}

// ---------------------------------------------------------------------------
// Chained coupling across consecutive degrees
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct ChainOutcome {
    /// `G_d, G_{d+1}, ..., G_{d+steps}`.
    pub graphs: Vec<Graph>,
    /// Whether every consecutive containment held.
    pub fully_contained: bool,
    pub branches: Vec<Branch>,
}

fn check_chain(configs: &[ExactCouplingConfig]) -> Result<()> {
    if configs.is_empty() {
        return Err(CouplingError::Domain("empty config chain".to_string()));
    }
    for pair in configs.windows(2) {
        if pair[0].ens_hi.n != pair[1].ens_lo.n || pair[0].ens_hi.d != pair[1].ens_lo.d {
            return Err(CouplingError::EnsembleMismatch(
                "chain configs must share consecutive degrees on one vertex set".to_string(),
            ));
        }
    }
    Ok(())
}

/// Sequential composition: sample the base graph uniformly, then extend one
/// coupled step per config, each conditioned on the current top graph.
pub fn chain_couple<R: Rng>(configs: &[ExactCouplingConfig], rng: &mut R) -> Result<ChainOutcome> {
    check_chain(configs)?;
    let first = &configs[0];
    let mut current = first
        .ens_lo
        .graph(rng.random_range(0..first.ens_lo.len()))
        .clone();
    let mut graphs = vec![current.clone()];
    let mut branches = Vec::with_capacity(configs.len());
    let mut fully_contained = true;
    for cfg in configs {
        let outcome = couple_step_from(cfg, &current, rng)?;
        fully_contained &= outcome.contained;
        current = outcome.g_next.clone();
        graphs.push(outcome.g_next);
        branches.push(outcome.branch);
    }
    Ok(ChainOutcome {
        graphs,
        fully_contained,
        branches,
    })
}

/// Exact marginal of the final graph of the chain, by kernel composition.
pub fn chain_final_marginal(configs: &[ExactCouplingConfig]) -> Result<Vec<BigRational>> {
    check_chain(configs)?;
    let n0 = configs[0].ens_lo.len();
    let sigma = BigRational::new(BigInt::one(), BigInt::from(n0));
    let mut weights = vec![sigma; n0];
    for cfg in configs {
        let kernel = step_kernel::<BigRational>(cfg);
        let mut next = vec![BigRational::zero(); cfg.ens_hi.len()];
        for (i, w) in weights.iter().enumerate() {
            if w.is_zero() {
                continue;
            }
            for (j, cell) in kernel.rows[i].iter().enumerate() {
                if !cell.is_zero() {
                    next[j] += w * cell;
                }
            }
        }
        weights = next;
    }
    Ok(weights)
}

/// Exact probability that every containment in the chain holds
/// simultaneously, by dynamic programming over the step kernels.
pub fn chain_containment_probability(configs: &[ExactCouplingConfig]) -> Result<BigRational> {
    check_chain(configs)?;
    let n0 = configs[0].ens_lo.len();
    let sigma = BigRational::new(BigInt::one(), BigInt::from(n0));
    let mut weights = vec![sigma; n0];
    for cfg in configs {
        let kernel = step_kernel::<BigRational>(cfg);
        let mut next = vec![BigRational::zero(); cfg.ens_hi.len()];
        for (i, w) in weights.iter().enumerate() {
            if w.is_zero() {
                continue;
            }
            let g = cfg.ens_lo.graph(i);
            for (j, cell) in kernel.rows[i].iter().enumerate() {
                if !cell.is_zero() && g.is_subgraph_of(cfg.ens_hi.graph(j)) {
                    next[j] += w * cell;
                }
            }
        }
        weights = next;
    }
    Ok(weights.iter().sum())
}

// ---------------------------------------------------------------------------
// Asymptotic-mode configuration (evaluator/diagnostic only)
// ---------------------------------------------------------------------------

/// The displayed asymptotic scalars, in natural-log scale. The bad sets are
/// implicit Y-threshold predicates and `d_hat` is an estimate, so this mode
/// is excluded from all exactness claims; sampling refuses to run on it.
#[derive(Clone, Debug, Serialize)]
pub struct AsymptoticCouplingConfig {
    pub n: f64,
    pub d: f64,
    pub alpha: f64,
    pub c: f64,
    pub c_prime: f64,
    /// `ln Z* = ln(n! e^{-d/2} / ((n/2)! 2^{n/2}))`.
    pub z_star_log: f64,
    /// `ln Y*`, the expected-PM-count main term.
    pub y_star_log: f64,
    /// `ln((1 - alpha - C d^3/n) Y*)`. At astronomical n the additive margin
    /// sits far below the f64 granularity of the log value; `y_lower_factor`
    /// keeps it observable.
    pub y_lower_log: f64,
    /// `ln((1 + C d^2/n) Z*)`.
    pub z_upper_log: f64,
    /// `1 - alpha - C d^3/n`.
    pub y_lower_factor: f64,
    /// `1 + C d^2/n`.
    pub z_upper_factor: f64,
    /// `2a + 1/(d^3 a^2) + C' d^3/(n a^2) + C' sqrt(d/n) (ln n)^6 / a^2`.
    pub eta: f64,
    /// Estimated in-degree of the non-bad part per high-degree graph:
    /// `D-hat / |G(n,d+1)| ~ E Y`.
    pub d_hat_per_graph_log: f64,
}

fn ln_pm_count_f(n: f64) -> f64 {
    ln_gamma(n + 1.0) - ln_gamma(n / 2.0 + 1.0) - n / 2.0 * std::f64::consts::LN_2
}

fn rho1_log_f(n: f64, d: f64) -> f64 {
    n / 2.0 * (1.0 - n.ln()) + (d - 1.0) / 2.0 * n * ((d - 1.0) / d).ln() + n / 2.0 * d.ln() + 0.25
}

/// Evaluate the displayed asymptotic config. Fails with `EtaOutOfRange`
/// whenever `eta >= 1`, the expected outcome at every desk-scale `n`.
pub fn build_asymptotic_config(
    n: f64,
    d: f64,
    alpha: f64,
    c: f64,
    c_prime: f64,
) -> Result<AsymptoticCouplingConfig> {
    // Negated comparisons catch NaN arguments as domain errors.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    if !(d >= 3.0) || !(n > d) || !n.is_finite() {
        return Err(CouplingError::Domain(format!(
            "need 3 <= d < n, got d = {d}, n = {n}"
        )));
    }
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(CouplingError::Domain(format!(
            "alpha = {alpha} must lie in (0, 1)"
        )));
    }
    let eta = 2.0 * alpha
        + 1.0 / (d.powi(3) * alpha * alpha)
        + c_prime * d.powi(3) / (n * alpha * alpha)
        + c_prime * (d / n).sqrt() * n.ln().powi(6) / (alpha * alpha);
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    if !(eta < 1.0) {
        return Err(CouplingError::EtaOutOfRange { eta });
    }
    let margin = 1.0 - alpha - c * d.powi(3) / n;
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    if !(margin > 0.0) {
        return Err(CouplingError::Domain(format!(
            "1 - alpha - C d^3/n = {margin} must be positive"
        )));
    }
    let z_star_log = ln_pm_count_f(n) - d / 2.0;
    let y_star_log = ln_pm_count_f(n) + rho1_log_f(n, d);
    let z_factor = 1.0 + c * d * d / n;
    Ok(AsymptoticCouplingConfig {
        n,
        d,
        alpha,
        c,
        c_prime,
        z_star_log,
        y_star_log,
        y_lower_log: margin.ln() + y_star_log,
        z_upper_log: z_factor.ln() + z_star_log,
        y_lower_factor: margin,
        z_upper_factor: z_factor,
        eta,
        d_hat_per_graph_log: y_star_log,
    })
}

/// Exact or asymptotic configuration, as the CLI mode flag selects.
#[derive(Clone, Debug)]
pub enum CouplingConfig {
    Exact(Box<ExactCouplingConfig>),
    Asymptotic(AsymptoticCouplingConfig),
}

/// Dispatching step: asymptotic configs refuse to sample.
pub fn couple_step_any<R: Rng>(cfg: &CouplingConfig, rng: &mut R) -> Result<CouplingOutcome> {
    match cfg {
        CouplingConfig::Exact(c) => couple_step(c, rng),
        CouplingConfig::Asymptotic(c) => {
            #[allow(clippy::neg_cmp_op_on_partial_ord)]
            if !(c.eta < 1.0) {
                return Err(CouplingError::EtaOutOfRange { eta: c.eta });
            }
            Err(CouplingError::NotSamplable(format!(
                "eta = {:.3} < 1 needs n ~ {:.1e}, far beyond the graph cap; \
                 use exact mode at enumerable scale",
                c.eta, c.n
            )))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::counting::{enumerate_regular, EnumerationLimits};
    use crate::sampler::RngStream;

    fn arc_ens(n: usize, d: usize) -> Arc<Ensemble> {
        Arc::new(enumerate_regular(n, d, &EnumerationLimits::default()).unwrap())
    }

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn build_trivial_four_zero_one() {
        let cfg = build_exact_config(arc_ens(4, 0), arc_ens(4, 1), rat(1, 10)).unwrap();
        assert_eq!(cfg.z_upper, rat(3, 1));
        assert_eq!(cfg.y_lower, rat(1, 1));
        assert!(cfg.bad_set.is_empty());
        assert!(cfg.eta.is_zero());
        assert_eq!(cfg.d_total, 3u32.into());
    }

    #[test]
    fn build_six_two_three_at_tenth() {
        let cfg = build_exact_config(arc_ens(6, 2), arc_ens(6, 3), rat(1, 10)).unwrap();
        assert_eq!(cfg.d_total, 300u32.into());
        // Range rule: y_lower = 4 + 2(1/10)(6-4) = 22/5. The branch floor is
        // 60(22/5 - 4)/60 = 2/5, the degree floor 240/300 = 4/5; eta takes
        // the max.
        assert_eq!(cfg.y_lower, rat(22, 5));
        assert_eq!(cfg.demote_mass_factor, rat(2, 5));
        assert_eq!(cfg.eta, rat(4, 5));
        assert_eq!(cfg.bad_set.len(), 60);
        assert_eq!(cfg.d_hat, 60u32.into());
    }

    #[test]
    fn build_rejects_large_q() {
        // q = 1/2 pushes y_lower to 6 and eta to 2.
        let err = build_exact_config(arc_ens(6, 2), arc_ens(6, 3), rat(1, 2)).unwrap_err();
        match err {
            CouplingError::EtaOutOfRange { eta } => assert!((eta - 2.0).abs() < 1e-12),
            other => panic!("expected EtaOutOfRange, got {other:?}"),
        }
    }

    #[test]
    fn marginal_is_exactly_uniform() {
        for (lo, hi) in [((4, 0), (4, 1)), ((6, 2), (6, 3)), ((6, 1), (6, 2))] {
            let cfg =
                build_exact_config(arc_ens(lo.0, lo.1), arc_ens(hi.0, hi.1), rat(1, 10)).unwrap();
            let report = exact_marginal(&cfg);
            assert!(!report.overflow_clipped);
            assert!(
                report.is_uniform,
                "{lo:?}->{hi:?}: {:?}",
                report.max_deviation
            );
            let sigma = BigRational::new(BigInt::one(), BigInt::from(cfg.ens_hi.len()));
            assert!(report.probabilities.iter().all(|p| p == &sigma));
            let (_, dev) = exact_marginal_f64(&cfg);
            assert!(dev < 1e-12, "float deviation {dev}");
        }
    }

    #[test]
    fn four_zero_one_always_accepts() {
        let cfg = build_exact_config(arc_ens(4, 0), arc_ens(4, 1), rat(1, 10)).unwrap();
        let mut rng = RngStream::new(8, 0).rng();
        for _ in 0..200 {
            let out = couple_step(&cfg, &mut rng).unwrap();
            assert_eq!(out.branch, Branch::AcceptPrime);
            assert!(out.contained);
            assert!(out.g_next.is_regular(1));
        }
        assert_eq!(containment_probability(&cfg), BigRational::one());
    }

    #[test]
    fn six_two_three_containment_vs_exact() {
        let cfg = build_exact_config(arc_ens(6, 2), arc_ens(6, 3), rat(1, 10)).unwrap();
        let exact = containment_probability(&cfg);
        // Exact value worked out by the kernel; must clear 1 - 2 eta.
        let bound = BigRational::one() - rat(2, 1) * &cfg.eta;
        assert!(
            exact >= bound,
            "containment {exact} below 1 - 2 eta {bound}"
        );

        // Monte Carlo within 3 sigma of the exact value.
        let p = exact.to_f64().unwrap();
        let steps = 20_000;
        let mut rng = RngStream::new(9, 0).rng();
        let mut contained = 0u64;
        for _ in 0..steps {
            if couple_step(&cfg, &mut rng).unwrap().contained {
                contained += 1;
            }
        }
        let freq = contained as f64 / steps as f64;
        let sigma = (p * (1.0 - p) / steps as f64).sqrt();
        assert!(
            freq >= p - 3.0 * sigma && freq <= p + 3.0 * sigma,
            "freq {freq} vs exact {p}"
        );
    }

    #[test]
    fn degree_bounds_pass_on_built_configs() {
        for (lo, hi) in [((4, 0), (4, 1)), ((6, 2), (6, 3)), ((6, 1), (6, 2))] {
            let cfg =
                build_exact_config(arc_ens(lo.0, lo.1), arc_ens(hi.0, hi.1), rat(1, 10)).unwrap();
            let report = verify_degree_bounds(&cfg);
            assert!(report.all_ok, "{report:?}");
        }
    }

    #[test]
    fn doctored_y_lower_fails_bounds() {
        let mut cfg = build_exact_config(arc_ens(6, 2), arc_ens(6, 3), rat(1, 10)).unwrap();
        cfg.y_lower = rat(7, 1); // above max Y
        let report = verify_degree_bounds(&cfg);
        assert!(!report.y_bound_ok);
        assert!(!report.all_ok);
    }

    #[test]
    fn doctored_z_upper_breaks_uniformity() {
        let mut cfg = build_exact_config(arc_ens(6, 2), arc_ens(6, 3), rat(1, 10)).unwrap();
        // Clipping needs (1 - eta) Z_max / z_upper > 1; with eta = 4/5 and
        // max Z = 6 anything below 6/5 works.
        cfg.z_upper = rat(1, 1);
        let report = exact_marginal(&cfg);
        assert!(report.overflow_clipped);
        assert!(!report.is_uniform);
        assert!(report.max_deviation > BigRational::zero());
        let bounds = verify_degree_bounds(&cfg);
        assert!(!bounds.z_bound_ok);
    }

    #[test]
    fn doctored_eta_overflows_couple_step() {
        let mut cfg = build_exact_config(arc_ens(6, 2), arc_ens(6, 3), rat(1, 10)).unwrap();
        cfg.eta = rat(-1, 1); // (1 - eta) = 2 forces branch mass above 1
        let mut rng = RngStream::new(10, 0).rng();
        let mut saw_overflow = false;
        for _ in 0..50 {
            if matches!(
                couple_step(&cfg, &mut rng),
                Err(CouplingError::ProbabilityOverflow(_))
            ) {
                saw_overflow = true;
                break;
            }
        }
        assert!(saw_overflow);
    }

    #[test]
    fn chain_composes_and_preserves_uniformity() {
        let ens1 = arc_ens(6, 1);
        let ens2 = arc_ens(6, 2);
        let ens3 = arc_ens(6, 3);
        let cfg12 = build_exact_config(ens1, ens2.clone(), rat(1, 10)).unwrap();
        let cfg23 = build_exact_config(ens2, ens3.clone(), rat(1, 10)).unwrap();
        let configs = vec![cfg12, cfg23];

        // Exact composition marginal stays uniform.
        let final_marginal = chain_final_marginal(&configs).unwrap();
        let sigma = BigRational::new(BigInt::one(), BigInt::from(ens3.len()));
        assert!(final_marginal.iter().all(|p| p == &sigma));

        // A one-config chain behaves as couple_step.
        let single = &configs[1..];
        let mut rng = RngStream::new(11, 0).rng();
        let out = chain_couple(single, &mut rng).unwrap();
        assert_eq!(out.graphs.len(), 2);
        assert_eq!(out.branches.len(), 1);

        // Chained containment: MC frequency within 3 sigma of the exact DP.
        let exact = chain_containment_probability(&configs)
            .unwrap()
            .to_f64()
            .unwrap();
        let runs = 10_000;
        let mut hits = 0u64;
        for _ in 0..runs {
            if chain_couple(&configs, &mut rng).unwrap().fully_contained {
                hits += 1;
            }
        }
        let freq = hits as f64 / runs as f64;
        let sig = (exact * (1.0 - exact) / runs as f64).sqrt();
        assert!(
            (freq - exact).abs() <= 3.0 * sig,
            "freq {freq} vs exact {exact}"
        );
    }

    #[test]
    fn chain_rejects_mismatched_configs() {
        let cfg01 = build_exact_config(arc_ens(4, 0), arc_ens(4, 1), rat(1, 10)).unwrap();
        let cfg23 = build_exact_config(arc_ens(6, 2), arc_ens(6, 3), rat(1, 10)).unwrap();
        assert!(matches!(
            chain_couple(&[cfg01, cfg23], &mut RngStream::new(1, 0).rng()),
            Err(CouplingError::EnsembleMismatch(_))
        ));
    }

    #[test]
    fn asymptotic_config_feasibility_boundary() {
        // Desk scale: the sqrt(d/n) log^6 n term alone towers over 1.
        assert!(matches!(
            build_asymptotic_config(1e4, 10.0, 0.1, 1.0, 1.0),
            Err(CouplingError::EtaOutOfRange { .. })
        ));
        // Far beyond astronomical n the display does drop below 1.
        let cfg = build_asymptotic_config(1e34, 100.0, 0.01, 1.0, 1.0).unwrap();
        assert!(cfg.eta < 1.0, "eta = {}", cfg.eta);
        assert!(cfg.y_lower_factor < 1.0 && cfg.y_lower_factor > 0.0);
        // At n = 1e34 the relative widening 1 + C d^2/n rounds to 1 in f64.
        assert!(cfg.z_upper_factor >= 1.0);
        // Sampling refuses asymptotic mode.
        assert!(matches!(
            couple_step_any(
                &CouplingConfig::Asymptotic(cfg),
                &mut RngStream::new(2, 0).rng()
            ),
            Err(CouplingError::NotSamplable(_))
        ));
        // alpha = 0 violates the precondition.
        assert!(matches!(
            build_asymptotic_config(1e34, 100.0, 0.0, 1.0, 1.0),
            Err(CouplingError::Domain(_))
        ));
    }

    #[test]
    fn config_summary_serializes_rationals_as_strings() {
        let cfg = build_exact_config(arc_ens(6, 2), arc_ens(6, 3), rat(1, 10)).unwrap();
        let json = serde_json::to_value(cfg.summary()).unwrap();
        assert_eq!(json["eta"]["num"], "4");
        assert_eq!(json["eta"]["den"], "5");
        assert_eq!(json["demote_mass_factor"]["num"], "2");
        assert_eq!(json["d_total"], "300");
    }
}
