//! Subcommand implementations. Each run assembles one JSON document
//! `{spec, version, seed, results}` and optional CSV/graph6 sidecars.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use num_traits::ToPrimitive;
use serde_json::{json, Value};

use pmlab::acceptance;
use pmlab::asymptotics::{moment_report, PairCountMode};
use pmlab::counting::{
    count_perfect_matchings, count_pm_in_complement, count_triangles, enumerate_regular,
    ln_pm_pair_count_asymptotic, pm_pair_counts_bruteforce, pm_pair_counts_exact, CountError,
    Ensemble, EnumerationLimits,
};
use pmlab::coupling::{
    build_asymptotic_config, build_exact_config, chain_containment_probability, chain_couple,
    chain_final_marginal, containment_probability, couple_step, exact_marginal, exact_marginal_f64,
    verify_degree_bounds, CouplingError, ExactCouplingConfig, RationalJson,
};
use pmlab::graph::Graph;
use pmlab::sampler::{sample_regular, RngStream, SamplerLimits};
use pmlab::stats::chi_square_uniform;

use crate::rational::parse_rational;
use crate::{Command, Mode, PairMode, PairTableMode};

const VERSION: &str = env!("CARGO_PKG_VERSION");

pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    fn invalid(message: impl Into<String>) -> Self {
        CliError {
            code: 1,
            message: message.into(),
        }
    }
}

impl From<CouplingError> for CliError {
    fn from(e: CouplingError) -> Self {
        let code = match e {
            CouplingError::EtaOutOfRange { .. } => 3,
            _ => 1,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

impl From<CountError> for CliError {
    fn from(e: CountError) -> Self {
        CliError {
            code: 1,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError {
            code: 1,
            message: e.to_string(),
        }
    }
}

fn envelope(spec: Value, seed: Option<u64>, results: Value) -> Value {
    json!({
        "spec": spec,
        "version": VERSION,
        "seed": seed,
        "results": results,
    })
}

fn emit(report: &Value, out: Option<&Path>) -> Result<(), CliError> {
    let body = serde_json::to_string_pretty(report).expect("serializable report");
    match out {
        Some(path) => fs::write(path, body + "\n")?,
        None => println!("{body}"),
    }
    Ok(())
}

/// Sidecar path `{out}.{suffix}` alongside a JSON report at `{out}`.
fn sidecar(out: &Path, suffix: &str) -> PathBuf {
    let mut os = out.as_os_str().to_owned();
    os.push(".");
    os.push(suffix);
    PathBuf::from(os)
}

pub fn run(cmd: Command) -> Result<ExitCode, CliError> {
    match cmd {
        Command::Sample {
            n,
            d,
            samples,
            seed,
            streams,
            out,
        } => sample(n, d, samples, seed, streams, out.as_deref()),
        Command::Count { graph, input, out } => count(graph, input.as_deref(), out.as_deref()),
        Command::Enumerate { n, d, out } => enumerate(n, d, out.as_deref()),
        Command::Pairs { n, mode, out } => pairs(n, mode, out.as_deref()),
        Command::Moments {
            n,
            d,
            pair_mode,
            oracle,
            out,
        } => moments(n, d, pair_mode, oracle, out.as_deref()),
        Command::Coupling {
            n,
            d,
            mode,
            q,
            alpha,
            c,
            c_prime,
            steps,
            marginal,
            seed,
            streams,
            out,
        } => coupling(
            n,
            d,
            mode,
            &q,
            alpha,
            c,
            c_prime,
            steps,
            marginal,
            seed,
            streams,
            out.as_deref(),
        ),
        Command::Chain {
            n,
            d,
            steps,
            q,
            samples,
            seed,
            streams,
            out,
        } => chain(n, d, steps, &q, samples, seed, streams, out.as_deref()),
        Command::Verify { suite, list, out } => verify(&suite, list, out.as_deref()),
    }
}

/// Deterministic split of `total` work items over `streams` RNG streams:
/// stream `i` handles ceil((total - i) / streams) items.
fn stream_quotas(total: u64, streams: u64) -> Vec<u64> {
    let streams = streams.max(1);
    (0..streams)
        .map(|i| total / streams + u64::from(i < total % streams))
        .collect()
}

fn sample(
    n: usize,
    d: usize,
    samples: u64,
    seed: u64,
    streams: u64,
    out: Option<&Path>,
) -> Result<ExitCode, CliError> {
    let limits = SamplerLimits::default();
    let quotas = stream_quotas(samples, streams);
    let mut per_stream: Vec<Vec<String>> = Vec::new();
    std::thread::scope(|scope| {
        let handles: Vec<_> = quotas
            .iter()
            .enumerate()
            .map(|(i, &quota)| {
                let limits = &limits;
                scope.spawn(move || {
                    let mut rng = RngStream::new(seed, i as u64).rng();
                    (0..quota)
                        .map(|_| {
                            sample_regular(n, d, &mut rng, limits)
                                .map(|g| g.to_graph6())
                                .map_err(|e| e.to_string())
                        })
                        .collect::<Result<Vec<_>, _>>()
                })
            })
            .collect();
        for handle in handles {
            per_stream.push(
                handle
                    .join()
                    .expect("sampler thread")
                    .map_err(CliError::invalid)?,
            );
        }
        Ok::<(), CliError>(())
    })?;
    let graphs: Vec<String> = per_stream.into_iter().flatten().collect();
    if let Some(path) = out {
        let mut file = fs::File::create(sidecar(path, "g6"))?;
        for g in &graphs {
            writeln!(file, "{g}")?;
        }
    }
    let report = envelope(
        json!({"subcommand": "sample", "n": n, "d": d, "samples": samples, "streams": streams}),
        Some(seed),
        json!({"graphs": graphs}),
    );
    emit(&report, out)?;
    Ok(ExitCode::SUCCESS)
}

fn count(
    graph: Option<String>,
    input: Option<&Path>,
    out: Option<&Path>,
) -> Result<ExitCode, CliError> {
    let lines: Vec<String> = match (&graph, input) {
        (Some(g), None) => vec![g.clone()],
        (None, Some(path)) => fs::read_to_string(path)?
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(str::to_owned)
            .collect(),
        _ => {
            return Err(CliError::invalid(
                "count needs exactly one of --graph or --input",
            ))
        }
    };
    let mut rows = Vec::new();
    for line in &lines {
        let g = Graph::from_graph6(line).map_err(|e| CliError::invalid(e.to_string()))?;
        rows.push(json!({
            "graph6": g.to_graph6(),
            "n": g.vertex_count(),
            "y": count_perfect_matchings(&g).to_string(),
            "z": count_pm_in_complement(&g).to_string(),
            "x": count_triangles(&g),
        }));
    }
    let report = envelope(
        json!({"subcommand": "count", "graphs": lines.len()}),
        None,
        json!({"counts": rows}),
    );
    emit(&report, out)?;
    Ok(ExitCode::SUCCESS)
}

fn enumerate(n: usize, d: usize, out: Option<&Path>) -> Result<ExitCode, CliError> {
    let ens = enumerate_regular(n, d, &EnumerationLimits::default())?;
    if let Some(path) = out {
        let mut g6 = fs::File::create(sidecar(path, "g6"))?;
        ens.write_graph6(&mut g6)?;
        let mut csv = fs::File::create(sidecar(path, "csv"))?;
        ens.write_csv(&mut csv)?;
    }
    let report = envelope(
        json!({"subcommand": "enumerate", "n": n, "d": d}),
        None,
        json!({
            "count": ens.len(),
            "sum_y": ens.sum_y().to_string(),
            "sum_z": ens.sum_z().to_string(),
        }),
    );
    emit(&report, out)?;
    Ok(ExitCode::SUCCESS)
}

fn pairs(n: usize, mode: PairTableMode, out: Option<&Path>) -> Result<ExitCode, CliError> {
    if n % 2 == 1 || n == 0 {
        return Err(CliError::invalid(format!(
            "pair tables need positive even n, got {n}"
        )));
    }
    let mut results = serde_json::Map::new();
    if matches!(mode, PairTableMode::Exact | PairTableMode::Both) {
        let table = pm_pair_counts_exact(n);
        results.insert(
            "exact".to_string(),
            json!({
                "m_k": table.counts.iter().map(|c| c.to_string()).collect::<Vec<_>>(),
                "total": table.total().to_string(),
            }),
        );
        if n <= EnumerationLimits::default().max_n_pm_pairs {
            let brute = pm_pair_counts_bruteforce(n, &EnumerationLimits::default())?;
            results.insert(
                "bruteforce_matches".to_string(),
                json!(brute.counts == table.counts),
            );
        }
    }
    if matches!(mode, PairTableMode::Asymptotic | PairTableMode::Both) {
        let rows: Vec<Value> = (0..n / 2)
            .map(|k| {
                let ln = ln_pm_pair_count_asymptotic(n as u64, k as u64);
                json!({"k": k, "ln": ln, "value": ln.exp()})
            })
            .collect();
        results.insert("asymptotic".to_string(), json!(rows));
    }
    let report = envelope(
        json!({"subcommand": "pairs", "n": n, "mode": format!("{mode:?}").to_lowercase()}),
        None,
        Value::Object(results),
    );
    emit(&report, out)?;
    Ok(ExitCode::SUCCESS)
}

fn moments(
    n: u64,
    d: u64,
    pair_mode: PairMode,
    oracle: bool,
    out: Option<&Path>,
) -> Result<ExitCode, CliError> {
    let mode = match pair_mode {
        PairMode::Exact => PairCountMode::Exact,
        PairMode::Asymptotic => PairCountMode::Asymptotic,
    };
    let ens: Option<Ensemble> = if oracle {
        Some(enumerate_regular(
            n as usize,
            d as usize,
            &EnumerationLimits::default(),
        )?)
    } else {
        None
    };
    let report_body =
        moment_report(n, d, mode, ens.as_ref()).map_err(|e| CliError::invalid(e.to_string()))?;
    let report = envelope(
        json!({
            "subcommand": "moments", "n": n, "d": d,
            "pair_mode": format!("{pair_mode:?}").to_lowercase(),
            "oracle": oracle,
        }),
        None,
        serde_json::to_value(&report_body).expect("serializable report"),
    );
    emit(&report, out)?;
    Ok(ExitCode::SUCCESS)
}

fn build_exact(n: usize, d: usize, q: &str) -> Result<ExactCouplingConfig, CliError> {
    let q = parse_rational(q).map_err(CliError::invalid)?;
    let limits = EnumerationLimits::default();
    let lo = Arc::new(enumerate_regular(n, d, &limits)?);
    let hi = Arc::new(enumerate_regular(n, d + 1, &limits)?);
    Ok(build_exact_config(lo, hi, q)?)
}

#[allow(clippy::too_many_arguments)]
fn coupling(
    n: usize,
    d: usize,
    mode: Mode,
    q: &str,
    alpha: f64,
    c: f64,
    c_prime: f64,
    steps: u64,
    marginal: bool,
    seed: u64,
    streams: u64,
    out: Option<&Path>,
) -> Result<ExitCode, CliError> {
    let spec = json!({
        "subcommand": "coupling", "n": n, "d": d,
        "mode": format!("{mode:?}").to_lowercase(),
        "q": q, "alpha": alpha, "C": c, "Cprime": c_prime,
        "steps": steps, "marginal": marginal, "streams": streams,
    });
    match mode {
        Mode::Asymptotic => {
            let cfg = build_asymptotic_config(n as f64, d as f64, alpha, c, c_prime)?;
            let report = envelope(
                spec,
                Some(seed),
                json!({"config": serde_json::to_value(&cfg).expect("serializable config")}),
            );
            emit(&report, out)?;
            Ok(ExitCode::SUCCESS)
        }
        Mode::Exact => {
            let cfg = build_exact(n, d, q)?;
            let mut results = serde_json::Map::new();
            results.insert(
                "config".to_string(),
                serde_json::to_value(cfg.summary()).expect("serializable summary"),
            );
            results.insert(
                "degree_bounds".to_string(),
                serde_json::to_value(verify_degree_bounds(&cfg)).expect("serializable report"),
            );
            let exact_containment = containment_probability(&cfg);
            results.insert(
                "containment_probability".to_string(),
                json!({
                    "rational": RationalJson::from(&exact_containment),
                    "value": exact_containment.to_f64(),
                }),
            );
            if marginal {
                let m = exact_marginal(&cfg);
                let (_, float_dev) = exact_marginal_f64(&cfg);
                results.insert(
                    "marginal".to_string(),
                    json!({
                        "is_uniform": m.is_uniform,
                        "max_deviation": RationalJson::from(&m.max_deviation),
                        "float_mode_max_deviation": float_dev,
                        "probabilities": m.probabilities.iter()
                            .map(RationalJson::from).collect::<Vec<_>>(),
                    }),
                );
            }
            if steps > 0 {
                results.insert(
                    "monte_carlo".to_string(),
                    run_coupling_steps(&cfg, steps, seed, streams, out)?,
                );
            }
            let report = envelope(spec, Some(seed), Value::Object(results));
            emit(&report, out)?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn run_coupling_steps(
    cfg: &ExactCouplingConfig,
    steps: u64,
    seed: u64,
    streams: u64,
    out: Option<&Path>,
) -> Result<Value, CliError> {
    let quotas = stream_quotas(steps, streams);
    type StepRows = Vec<(String, bool, String, String)>;
    let mut per_stream: Vec<StepRows> = Vec::new();
    std::thread::scope(|scope| {
        let handles: Vec<_> = quotas
            .iter()
            .enumerate()
            .map(|(i, &quota)| {
                scope.spawn(move || {
                    let mut rng = RngStream::new(seed, i as u64).rng();
                    let mut rows = Vec::with_capacity(quota as usize);
                    for _ in 0..quota {
                        let o = couple_step(cfg, &mut rng).map_err(|e| e.to_string())?;
                        rows.push((
                            o.branch.to_string(),
                            o.contained,
                            o.g_d.to_graph6(),
                            o.g_next.to_graph6(),
                        ));
                    }
                    Ok::<StepRows, String>(rows)
                })
            })
            .collect();
        for handle in handles {
            per_stream.push(
                handle
                    .join()
                    .expect("coupling thread")
                    .map_err(CliError::invalid)?,
            );
        }
        Ok::<(), CliError>(())
    })?;
    let rows: StepRows = per_stream.into_iter().flatten().collect();

    let mut counts = vec![0u64; cfg.ens_hi.len()];
    let mut contained = 0u64;
    let mut accepted = 0u64;
    for (branch, cont, _, g_next) in &rows {
        let g = Graph::from_graph6(g_next).expect("own output");
        counts[cfg.ens_hi.class_of(&g).expect("ensemble member")] += 1;
        contained += u64::from(*cont);
        accepted += u64::from(branch == "accept-G'");
    }
    let (stat, p) = chi_square_uniform(&counts).map_err(|e| CliError::invalid(e.to_string()))?;

    if let Some(path) = out {
        let mut csv = fs::File::create(sidecar(path, "steps.csv"))?;
        writeln!(csv, "branch,contained,g_d,g_next")?;
        for (branch, cont, g_d, g_next) in &rows {
            writeln!(csv, "{branch},{cont},{g_d},{g_next}")?;
        }
    }
    Ok(json!({
        "steps": steps,
        "containment_frequency": contained as f64 / steps as f64,
        "accept_frequency": accepted as f64 / steps as f64,
        "marginal_chi_square": {"statistic": stat, "p_value": p, "classes": counts.len()},
    }))
}

#[allow(clippy::too_many_arguments)]
fn chain(
    n: usize,
    d: usize,
    steps: usize,
    q: &str,
    samples: u64,
    seed: u64,
    streams: u64,
    out: Option<&Path>,
) -> Result<ExitCode, CliError> {
    if steps == 0 {
        return Err(CliError::invalid("chain needs --steps >= 1"));
    }
    let mut configs = Vec::with_capacity(steps);
    for j in 0..steps {
        configs.push(build_exact(n, d + j, q)?);
    }
    let final_ens = configs.last().expect("steps >= 1").ens_hi.clone();

    let quotas = stream_quotas(samples, streams);
    let mut per_stream: Vec<Vec<(usize, bool)>> = Vec::new();
    std::thread::scope(|scope| {
        let configs = &configs;
        let final_ens = &final_ens;
        let handles: Vec<_> = quotas
            .iter()
            .enumerate()
            .map(|(i, &quota)| {
                scope.spawn(move || {
                    let mut rng = RngStream::new(seed, i as u64).rng();
                    let mut draws = Vec::with_capacity(quota as usize);
                    for _ in 0..quota {
                        let o = chain_couple(configs, &mut rng).map_err(|e| e.to_string())?;
                        let last = o.graphs.last().expect("nonempty chain");
                        draws.push((
                            final_ens.class_of(last).expect("ensemble member"),
                            o.fully_contained,
                        ));
                    }
                    Ok::<Vec<(usize, bool)>, String>(draws)
                })
            })
            .collect();
        for handle in handles {
            per_stream.push(
                handle
                    .join()
                    .expect("chain thread")
                    .map_err(CliError::invalid)?,
            );
        }
        Ok::<(), CliError>(())
    })?;

    let mut counts = vec![0u64; final_ens.len()];
    let mut contained = 0u64;
    for (class, cont) in per_stream.into_iter().flatten() {
        counts[class] += 1;
        contained += u64::from(cont);
    }
    let (stat, p) = chi_square_uniform(&counts).map_err(|e| CliError::invalid(e.to_string()))?;
    let exact_containment = chain_containment_probability(&configs)?;
    let exact_final = chain_final_marginal(&configs)?;
    let sigma = num_rational::BigRational::new(1.into(), (final_ens.len() as i64).into());
    let composed_uniform = exact_final.iter().all(|p| p == &sigma);

    let report = envelope(
        json!({
            "subcommand": "chain", "n": n, "d": d, "steps": steps, "q": q,
            "samples": samples, "streams": streams,
        }),
        Some(seed),
        json!({
            "etas": configs.iter()
                .map(|c| RationalJson::from(&c.eta)).collect::<Vec<_>>(),
            "final_marginal_chi_square": {"statistic": stat, "p_value": p},
            "full_containment_frequency": contained as f64 / samples.max(1) as f64,
            "exact_chain_containment": {
                "rational": RationalJson::from(&exact_containment),
                "value": exact_containment.to_f64(),
            },
            "composed_final_marginal_uniform": composed_uniform,
        }),
    );
    emit(&report, out)?;
    Ok(ExitCode::SUCCESS)
}

fn verify(suite: &str, list: bool, out: Option<&Path>) -> Result<ExitCode, CliError> {
    if list {
        for name in acceptance::suite_names() {
            println!("{name}");
        }
        return Ok(ExitCode::SUCCESS);
    }
    let Some(results) = acceptance::run_suite(suite) else {
        return Err(CliError::invalid(format!(
            "unknown suite {suite:?}; available: {}",
            acceptance::suite_names().join(", ")
        )));
    };
    for r in &results {
        println!("{}", r.line());
    }
    let all_passed = results.iter().all(|r| r.passed);
    let report = envelope(
        json!({"subcommand": "verify", "suite": suite}),
        None,
        json!({
            "passed": all_passed,
            "criteria": results.iter().map(|r| json!({
                "id": r.id,
                "name": r.name,
                "passed": r.passed,
                "elapsed_ms": r.elapsed.as_millis() as u64,
                "detail": r.detail,
            })).collect::<Vec<_>>(),
        }),
    );
    emit(&report, out)?;
    Ok(if all_passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    })
}
