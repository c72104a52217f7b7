//! `minimax-multinom`: exact and asymptotic Kullback-Leibler prediction risks
//! of Dirichlet-multinomial predictive densities, from the command line.

mod output;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dirichlet_minimax::expansion::{expansion_error_profile, theorem1_expansion, ExpansionMode};
use dirichlet_minimax::minimax::{compare_priors, default_alpha_grid, optimal_alpha_search, theorem3_sandwich, AnalysisSettings};
use dirichlet_minimax::model::{alpha_hat, EpsilonSchedule, ModelSpec, PriorSpec, ScheduleMode, SymmetricPrior};
use dirichlet_minimax::moments::{lemma3_bound_check, moment_ratio_bound_check, moment_recurrence, BoundCheckReport};
use dirichlet_minimax::montecarlo::DEFAULT_SEED;
use dirichlet_minimax::risk::{risk_coordinatewise, risk_enumeration, sup_risk_with, SupSearchSettings, ThetaPoint};
use dirichlet_minimax::simplex::run_lemma_suite;
use dirichlet_minimax::numeric::QuadratureSettings;
use dirichlet_minimax::Error;
use output::{num, nums, Artifact, Format};
use serde::Serialize;
use serde_json::{json, Map, Value};

const AFTER_HELP: &str = "All risks are Kullback-Leibler risks in nats (natural log); --bits rescales them by 1/ln 2.";

#[derive(Parser, Debug)]
#[command(name = "minimax-multinom", version, about = "Kullback-Leibler prediction risk experiments for Dirichlet-multinomial predictive densities", after_help = AFTER_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    #[command(flatten)]
    global: GlobalArgs,
}

#[derive(Args, Debug)]
struct GlobalArgs {
    /// Seed for every randomized step (sup-search restarts, Monte Carlo, lemma draws).
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    output: Format,
    /// Write the artifact here instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; defaults to the number of logical cores. Output does not depend on it.
    #[arg(long, global = true, env = "MINIMAX_MULTINOM_THREADS")]
    threads: Option<usize>,
    /// Report risks in bits instead of nats.
    #[arg(long, global = true)]
    bits: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Exact risk at one θ together with the four-order 1/N expansion (nats).
    #[command(after_help = AFTER_HELP)]
    Risk(RiskArgs),
    /// Supremum of the exact risk over the truncated simplex {θ_i ≥ ε_N} (nats).
    #[command(after_help = AFTER_HELP)]
    SupRisk(SupRiskArgs),
    /// Sup-risk of several symmetric priors across N: the α̂ = 1 + 1/√6 prior reaches
    /// (k−1)/(2N) − (k−1)[1+(7+2√6)k]/(12N²), the Jeffreys prior exceeds (k−1)/(2N) by at least 1/(24 N² ε_N) (nats).
    #[command(after_help = AFTER_HELP)]
    ComparePriors(CompareArgs),
    /// Upper (sup-risk of α̂) and lower (Bayes risk of the truncated-prior predictive) brackets
    /// on the minimax risk over the truncated simplex; checks the bracket closes faster than N⁻² (nats).
    #[command(after_help = AFTER_HELP)]
    Sandwich(SandwichArgs),
    /// Sup over the truncated simplex of |exact risk − truncated 1/N expansion|, with the residual scaled
    /// by its claimed rate: N⁵ε⁴ for the four-order expansion, N² for the reduced form (nats).
    #[command(after_help = AFTER_HELP)]
    ExpansionError(ExpansionArgs),
    /// Randomized checks of the auxiliary inequalities and identities (log bounds, truncated
    /// Dirichlet integrals, beta-segment means, composition sums, the beta-segment ratio bound).
    VerifyLemmas(LemmaArgs),
    /// Binomial central moments as exact polynomials in θ and Nθ, or (with --l) the
    /// boundedness sweeps of the scaled moments and of E[−w^(2l+1)/(1+w)].
    Moments(MomentArgs),
    /// Grid search for the symmetric concentration α minimizing the sup-risk at finite N;
    /// asymptotically the minimizer is α̂ = 1 + 1/√6 (nats).
    #[command(after_help = AFTER_HELP)]
    OptimalAlpha(OptimalArgs),
}

#[derive(Args, Debug, Serialize)]
struct ScheduleArgs {
    /// Truncation floor ε_N = c·N^(−r): scale c.
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    /// Truncation floor ε_N = c·N^(−r): exponent r.
    #[arg(long, default_value_t = 0.73)]
    r: f64,
}

impl ScheduleArgs {
    fn schedule(&self, mode: ScheduleMode) -> Result<EpsilonSchedule<f64>, CliError> {
        Ok(EpsilonSchedule::new(self.c, self.r, mode)?)
    }
}

#[derive(Args, Debug, Serialize)]
struct RiskArgs {
    #[arg(long)]
    k: usize,
    #[serde(rename = "N")]
    #[arg(long = "N")]
    n: u64,
    /// One concentration (symmetric prior), a name (jeffreys, uniform, minimax), or k comma-separated values.
    #[arg(long, default_value = "minimax")]
    alpha: String,
    /// Comma-separated θ; the last coordinate may be omitted.
    #[arg(long)]
    theta: String,
    #[arg(long, value_enum, default_value_t = Method::Coordinatewise)]
    method: Method,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Method {
    Coordinatewise,
    Enumeration,
}

#[derive(Args, Debug, Serialize)]
struct SupRiskArgs {
    #[arg(long)]
    k: usize,
    #[serde(rename = "N")]
    #[arg(long = "N")]
    n: u64,
    #[arg(long, default_value = "minimax")]
    alpha: String,
    #[command(flatten)]
    schedule: ScheduleArgs,
    /// Points per one-dimensional scan of the sup search.
    #[arg(long, default_value_t = 257)]
    grid: usize,
}

#[derive(Args, Debug, Serialize)]
struct CompareArgs {
    #[arg(long, default_value_t = 2)]
    k: usize,
    #[serde(rename = "N")]
    #[arg(long = "N", value_delimiter = ',', default_value = "256,1024,4096")]
    n: Vec<u64>,
    /// Symmetric priors: names (jeffreys, uniform, minimax) or concentrations.
    #[arg(long, value_delimiter = ',', default_value = "jeffreys,uniform,minimax")]
    priors: Vec<String>,
    #[command(flatten)]
    schedule: ScheduleArgs,
}

#[derive(Args, Debug, Serialize)]
struct SandwichArgs {
    #[arg(long, default_value_t = 2)]
    k: usize,
    #[serde(rename = "N")]
    #[arg(long = "N", value_delimiter = ',', default_value = "16,32,64")]
    n: Vec<u64>,
    #[command(flatten)]
    schedule: ScheduleArgs,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum ModeArg {
    /// All terms of the four-order expansion.
    Full,
    /// Second order plus the most singular terms of orders 3 and 4.
    Reduced,
}

#[derive(Args, Debug, Serialize)]
struct ExpansionArgs {
    #[arg(long, default_value_t = 2)]
    k: usize,
    #[serde(rename = "N")]
    #[arg(long = "N", value_delimiter = ',', default_value = "256,1024,4096")]
    n: Vec<u64>,
    #[arg(long, default_value = "minimax")]
    alpha: String,
    #[command(flatten)]
    schedule: ScheduleArgs,
    /// Truncation order of the expansion, 1..=4.
    #[arg(long, default_value_t = 4)]
    order: usize,
    #[arg(long, value_enum, default_value_t = ModeArg::Full)]
    mode: ModeArg,
}

#[derive(Args, Debug, Serialize)]
struct LemmaArgs {
    /// Which checks to run: 1, 4, 5, 6, 7, 8.
    #[arg(long, value_delimiter = ',', default_value = "1,4,5,6,7,8")]
    lemma: Vec<u8>,
    #[arg(long, default_value_t = 500)]
    trials: usize,
}

#[derive(Args, Debug, Serialize)]
struct MomentArgs {
    /// Highest moment order listed.
    #[arg(long, default_value_t = 8)]
    m_max: usize,
    /// Run the boundedness sweeps for this l instead of listing polynomials.
    #[arg(long)]
    l: Option<usize>,
    /// Shift a in w = (x − Nθ)/(Nθ + a).
    #[arg(long, default_value_t = 1.0)]
    a: f64,
    #[serde(rename = "N")]
    #[arg(long = "N", value_delimiter = ',', default_value = "1024,4096,16384,65536")]
    n: Vec<u64>,
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    #[arg(long, default_value_t = 0.5)]
    r: f64,
}

#[derive(Args, Debug, Serialize)]
struct OptimalArgs {
    #[arg(long, default_value_t = 2)]
    k: usize,
    #[serde(rename = "N")]
    #[arg(long = "N")]
    n: u64,
    #[command(flatten)]
    schedule: ScheduleArgs,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Library(Error),
    Check { message: String, witness: Value },
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Library(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Library(Error::Domain(_) | Error::Size { .. }) => 2,
            _ => 1,
        }
    }

    fn to_json(&self) -> Value {
        let (kind, message, witness) = match self {
            CliError::Usage(m) => ("usage", m.clone(), Value::Null),
            CliError::Library(e) => (library_kind(e), e.to_string(), Value::Null),
            CliError::Check { message, witness } => ("check", message.clone(), witness.clone()),
        };
        json!({ "error": kind, "message": message, "exit_code": self.exit_code(), "witness": witness })
    }
}

fn library_kind(e: &Error) -> &'static str {
    match e {
        Error::Domain(_) => "domain",
        Error::Integration { .. } => "integration",
        Error::Convergence { .. } => "convergence",
        Error::Size { .. } => "size",
        Error::Infeasible { .. } => "infeasible",
        Error::Statistical { .. } => "statistical",
        Error::Check(_) => "check",
    }
}

/// A finished run; `failure` is reported after the artifact is written.
struct Outcome {
    artifact: Artifact,
    failure: Option<CliError>,
}

impl From<Artifact> for Outcome {
    fn from(artifact: Artifact) -> Self {
        Self { artifact, failure: None }
    }
}

fn parse_prior(spec: &str, k: usize) -> Result<PriorSpec<f64>, CliError> {
    let parts: Vec<&str> = spec.split(',').map(str::trim).collect();
    if parts.len() == 1 {
        return Ok(parse_symmetric(parts[0], k)?.to_prior());
    }
    let a = parts
        .iter()
        .map(|p| p.parse::<f64>().map_err(|_| CliError::Usage(format!("bad concentration '{p}'"))))
        .collect::<Result<Vec<_>, _>>()?;
    if a.len() != k {
        return Err(CliError::Usage(format!("--alpha has {} values but k = {k}", a.len())));
    }
    Ok(PriorSpec::new(a)?)
}

fn parse_symmetric(name: &str, k: usize) -> Result<SymmetricPrior<f64>, CliError> {
    let prior = match name {
        "jeffreys" => SymmetricPrior::jeffreys(k),
        "uniform" => SymmetricPrior::uniform(k),
        "minimax" | "alpha_hat" => SymmetricPrior::minimax(k),
        v => {
            let alpha = v.parse::<f64>().map_err(|_| CliError::Usage(format!("unknown prior '{v}'")))?;
            SymmetricPrior::new(alpha, k)
        }
    };
    Ok(prior?)
}

fn parse_theta(spec: &str, k: usize) -> Result<ThetaPoint<f64>, CliError> {
    let v = spec
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|_| CliError::Usage(format!("bad theta coordinate '{p}'"))))
        .collect::<Result<Vec<_>, _>>()?;
    let theta = match v.len() {
        n if n == k => ThetaPoint::new(v)?,
        n if n + 1 == k => ThetaPoint::from_leading(&v)?,
        n => return Err(CliError::Usage(format!("--theta has {n} coordinates, expected {k} or {}", k - 1))),
    };
    Ok(theta)
}

fn meta(command: &str, global: &GlobalArgs, params: &impl Serialize) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("command".into(), json!(command));
    m.insert("version".into(), json!(env!("CARGO_PKG_VERSION")));
    m.insert("seed".into(), json!(global.seed));
    m.insert("units".into(), json!(if global.bits { "bits" } else { "nats" }));
    m.insert("params".into(), serde_json::to_value(params).expect("arguments serialize"));
    m
}

fn settings(global: &GlobalArgs, grid: usize) -> AnalysisSettings {
    let mut s = AnalysisSettings::with_seed(global.seed);
    s.search = SupSearchSettings { grid_size: grid, ..s.search };
    s
}

fn run(command: &Command, global: &GlobalArgs) -> Result<Outcome, CliError> {
    let unit = if global.bits { 1.0 / std::f64::consts::LN_2 } else { 1.0 };
    match command {
        Command::Risk(a) => {
            let prior = parse_prior(&a.alpha, a.k)?;
            let model = ModelSpec::new(a.k, a.n)?;
            let theta = parse_theta(&a.theta, a.k)?;
            let report = match a.method {
                Method::Coordinatewise => risk_coordinatewise(&prior, &model, &theta)?,
                Method::Enumeration => risk_enumeration(&prior, &model, &theta)?,
            };
            let mut art = Artifact::new(
                meta("risk", global, a),
                vec!["k", "N", "theta", "exact_risk", "per_coordinate", "t1", "t2", "t3", "t4", "expansion", "residual"],
            );
            let scaled: Vec<f64> = report.per_coordinate.iter().map(|v| v * unit).collect();
            let mut row = vec![json!(a.k), json!(a.n), nums(theta.as_slice()), num(report.exact_risk * unit), nums(&scaled)];
            if a.n > 0 {
                let e = theorem1_expansion(&prior, &model, &theta)?;
                row.extend(e.terms().iter().map(|t| num(t * unit)));
                row.push(num(e.value() * unit));
                row.push(num((report.exact_risk - e.value()) * unit));
            } else {
                row.extend(std::iter::repeat(Value::Null).take(6));
            }
            art.push(row);
            Ok(art.into())
        }
        Command::SupRisk(a) => {
            let prior = parse_prior(&a.alpha, a.k)?;
            let model = ModelSpec::new(a.k, a.n)?;
            let trunc = a.schedule.schedule(ScheduleMode::Theorem1)?.simplex(a.n, a.k)?;
            let s = settings(global, a.grid);
            let report = sup_risk_with(&prior, &model, &trunc, &s.search)?;
            let excess = report.sup_value - (a.k - 1) as f64 / (2.0 * a.n as f64);
            let mut art = Artifact::new(
                meta("sup-risk", global, a),
                vec!["k", "N", "eps", "sup_risk", "excess_over_t1", "scaled_excess", "argmax_theta"],
            );
            art.push(vec![
                json!(a.k),
                json!(a.n),
                num(trunc.eps),
                num(report.sup_value * unit),
                num(excess * unit),
                num((a.n as f64).powi(2) * excess * unit),
                nums(report.argmax_theta.as_slice()),
            ]);
            Ok(art.into())
        }
        Command::ComparePriors(a) => {
            let priors = a.priors.iter().map(|p| parse_symmetric(p.trim(), a.k)).collect::<Result<Vec<_>, _>>()?;
            let schedule = a.schedule.schedule(ScheduleMode::Theorem1)?;
            let rows = compare_priors(a.k, &a.n, &schedule, &priors, &settings(global, 257))?;
            let mut art = Artifact::new(
                meta("compare-priors", global, a),
                vec!["prior_label", "alpha", "k", "N", "eps", "sup_risk", "excess_over_t1", "scaled_excess"],
            );
            for r in rows {
                art.push(vec![
                    json!(r.prior_label),
                    num(r.alpha),
                    json!(r.k),
                    json!(r.n),
                    num(r.eps),
                    num(r.sup_risk * unit),
                    num(r.excess_over_t1 * unit),
                    num(r.scaled_excess * unit),
                ]);
            }
            Ok(art.into())
        }
        Command::Sandwich(a) => {
            let schedule = a.schedule.schedule(ScheduleMode::Theorem3)?;
            let report = theorem3_sandwich(a.k, &a.n, &schedule, &settings(global, 257))?;
            let mut art = Artifact::new(meta("sandwich", global, a), vec!["k", "N", "eps", "upper", "lower", "gap_scaled"]);
            for r in &report.rows {
                art.push(vec![
                    json!(r.k),
                    json!(r.n),
                    num(r.eps),
                    num(r.upper * unit),
                    num(r.lower * unit),
                    num(r.gap_scaled * unit),
                ]);
            }
            let scaled: Vec<f64> = report.bayes_minus_sup_scaled.iter().map(|v| v * unit).collect();
            art.summary.insert("bayes_minus_sup_scaled".into(), nums(&scaled));
            art.summary.insert("gap_trend_decreasing".into(), json!(report.gap_trend_decreasing));
            let failure = (!report.gap_trend_decreasing && report.rows.len() >= 3).then(|| CliError::Check {
                message: "N^2 (upper - lower) did not fall to 0.6 of its first value across the sweep".into(),
                witness: json!({ "gap_scaled": report.rows.iter().map(|r| r.gap_scaled * unit).collect::<Vec<_>>() }),
            });
            Ok(Outcome { artifact: art, failure })
        }
        Command::ExpansionError(a) => {
            let prior = parse_prior(&a.alpha, a.k)?;
            let (mode, sched_mode) = match a.mode {
                ModeArg::Full => (ExpansionMode::Full, ScheduleMode::Theorem1),
                ModeArg::Reduced => (ExpansionMode::Corollary1, ScheduleMode::Corollary1),
            };
            let schedule = a.schedule.schedule(sched_mode)?;
            let rows = expansion_error_profile(&prior, &schedule, &a.n, a.order, mode, &settings(global, 257).search)?;
            let mut art = Artifact::new(
                meta("expansion-error", global, a),
                vec!["N", "eps", "sup_abs_residual", "scaled_residual", "argmax_theta"],
            );
            for r in rows {
                art.push(vec![
                    json!(r.n),
                    num(r.eps),
                    num(r.sup_abs_residual * unit),
                    num(r.scaled_residual * unit),
                    nums(&r.argmax_theta),
                ]);
            }
            Ok(art.into())
        }
        Command::VerifyLemmas(a) => {
            let quad = QuadratureSettings::default();
            let mut art = Artifact::new(
                meta("verify-lemmas", global, a),
                vec!["lemma", "trials", "max_violation", "passed", "witness"],
            );
            let mut failed = Vec::new();
            for &l in &a.lemma {
                if ![1, 4, 5, 6, 7, 8].contains(&l) {
                    return Err(CliError::Usage(format!("no randomized check for lemma {l}; choose from 1,4,5,6,7,8")));
                }
                let r = run_lemma_suite(l, a.trials, global.seed, &quad)?;
                if !r.passed() {
                    failed.push(json!({ "lemma": r.lemma, "max_violation": r.max_violation, "witness": r.witness }));
                }
                art.push(vec![json!(r.lemma), json!(r.trials), num(r.max_violation), json!(r.passed()), json!(r.witness.to_string())]);
            }
            let failure = (!failed.is_empty()).then(|| CliError::Check {
                message: "inequality violated beyond numerical slack".into(),
                witness: Value::Array(failed),
            });
            Ok(Outcome { artifact: art, failure })
        }
        Command::Moments(a) => match a.l {
            None => {
                let polys = moment_recurrence(a.m_max)?;
                let mut art = Artifact::new(meta("moments", global, a), vec!["m", "power", "coefficients"]);
                for p in &polys {
                    for i in p.powers() {
                        let c: Vec<Value> = p.coefficient(i).coeffs().iter().map(|c| json!(c.to_string())).collect();
                        art.push(vec![json!(p.order), json!(i), Value::Array(c)]);
                    }
                    art.summary.insert(format!("mu_{}", p.order), json!(p.to_string()));
                }
                Ok(art.into())
            }
            Some(l) => {
                let schedule = EpsilonSchedule::new(a.c, a.r, ScheduleMode::Theorem1)?;
                let ratio = moment_ratio_bound_check(l, &schedule, &a.n)?;
                let shifted = lemma3_bound_check(l, a.a, &schedule, &a.n)?;
                let mut art = Artifact::new(
                    meta("moments", global, a),
                    vec!["check", "quantity", "N", "eps", "sup", "argmax_theta", "running_max"],
                );
                let mut push = |check: &str, rep: &BoundCheckReport| {
                    for s in &rep.series {
                        for (row, m) in s.rows.iter().zip(&s.running_max) {
                            art.push(vec![json!(check), json!(s.label), json!(row.n), num(row.eps), num(row.sup), num(row.argmax_theta), num(*m)]);
                        }
                    }
                };
                push("moment_ratio", &ratio);
                push("shifted_moment", &shifted);
                art.summary.insert("bounded".into(), json!(ratio.bounded && shifted.bounded));
                let failure = (!(ratio.bounded && shifted.bounded)).then(|| CliError::Check {
                    message: "a scaled supremum grew across the N sweep".into(),
                    witness: json!({ "moment_ratio": ratio.bounded, "shifted_moment": shifted.bounded }),
                });
                Ok(Outcome { artifact: art, failure })
            }
        },
        Command::OptimalAlpha(a) => {
            let schedule = a.schedule.schedule(ScheduleMode::Theorem1)?;
            let best = optimal_alpha_search(a.k, a.n, &schedule, &default_alpha_grid(), &settings(global, 257))?;
            let mut art = Artifact::new(meta("optimal-alpha", global, a), vec!["alpha", "sup_risk"]);
            for (alpha, v) in &best.curve {
                art.push(vec![num(*alpha), num(v * unit)]);
            }
            art.summary.insert("alpha_star".into(), num(best.alpha_star));
            art.summary.insert("alpha_hat".into(), num(alpha_hat()));
            Ok(art.into())
        }
    }
}

fn emit(bytes: &[u8], out: &Option<PathBuf>) -> Result<(), CliError> {
    let res = match out {
        Some(path) => std::fs::write(path, bytes),
        None => std::io::stdout().lock().write_all(bytes),
    };
    res.map_err(|e| CliError::Usage(format!("cannot write output: {e}")))
}

fn fail(err: &CliError) -> ExitCode {
    eprintln!("{}", err.to_json());
    ExitCode::from(err.exit_code())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            return fail(&CliError::Usage(e.kind().to_string() + ": " + e.to_string().lines().next().unwrap_or("")));
        }
    };
    if let Some(n) = cli.global.threads {
        if n == 0 {
            return fail(&CliError::Usage("--threads must be at least 1".into()));
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            return fail(&CliError::Usage(format!("cannot start the worker pool: {e}")));
        }
    }
    let outcome = match run(&cli.command, &cli.global) {
        Ok(o) => o,
        Err(e) => return fail(&e),
    };
    let bytes = match outcome.artifact.render(cli.global.output) {
        Ok(b) => b,
        Err(e) => return fail(&CliError::Usage(format!("cannot render output: {e}"))),
    };
    if let Err(e) = emit(&bytes, &cli.global.out) {
        return fail(&e);
    }
    match outcome.failure {
        Some(e) => fail(&e),
        None => ExitCode::SUCCESS,
    }
}
