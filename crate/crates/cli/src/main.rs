use std::io::{self, Read as _};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;
use spagg::estimators::{
    convex_ls, estimate_sigma_diff, isotonic_ls, tv_estimator, LambdaRule, NoiseLevel, TVTuning, CONVEX_LS_TOL,
};
use spagg::harness::{run_experiment, EstimatorSpec, ExperimentConfig, SignalSpec};
use spagg::lower::{convex_hypotheses, monotone_hypotheses};
use spagg::oracle::{oracle_rhs_convex, oracle_table_monotone, BoundSpec, ConvexSearch, CONVEX_EXHAUSTIVE_MAX_N};
use spagg::qagg::{solve_qagg, Dictionary, DictionaryMode, QAggConfig};
use spagg::selftest::run_selftest;
use spagg::seq::{parse_csv, read_sequence, to_csv, write_sequence};
use spagg::{PatternFamily, Sequence, ShapeClass};

mod shorthand;

#[derive(Parser)]
#[command(
    name = "spagg",
    version,
    about = "Shape-constrained estimation in the Gaussian sequence model"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit one estimator to a sequence read from CSV.
    Estimate(EstimateArgs),
    /// Run a Monte Carlo experiment grid.
    Experiment(ExperimentArgs),
    /// Evaluate an oracle inequality right-hand side for a mean vector.
    Oracle(OracleArgs),
    /// Build a lower-bound hypothesis family and check its invariants.
    Packing(PackingArgs),
    /// Run the built-in invariant checks.
    Selftest,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Pava,
    Convexls,
    Tv,
    Qagg,
    QaggConvex,
}

#[derive(Clone, Copy, ValueEnum)]
enum RuleArg {
    Kstar,
    Universal,
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    Monotone,
    Convex,
}

impl From<FamilyArg> for PatternFamily {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::Monotone => PatternFamily::Monotone,
            FamilyArg::Convex => PatternFamily::Convex,
        }
    }
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(long, value_enum)]
    method: Method,
    /// Input CSV (one value per line, or comma separated); `-` reads stdin.
    #[arg(long)]
    input: PathBuf,
    /// Noise level. Estimated from first differences when omitted.
    #[arg(long)]
    sigma: Option<f64>,
    /// Explicit TV penalty level.
    #[arg(long, conflicts_with = "lambda_rule")]
    lambda: Option<f64>,
    #[arg(long, value_enum)]
    lambda_rule: Option<RuleArg>,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    /// Variation bound used by the k* rule.
    #[arg(long = "V")]
    v: Option<f64>,
    /// Dictionary: exhaustive, maxcard=M or sampled=COUNT:SEED.
    #[arg(long, default_value = "exhaustive")]
    dict: DictionaryMode,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long, default_value_t = 46.0)]
    qagg_constant: f64,
    /// Output CSV; stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Write diagnostics (noise level, penalty, solver certificate) as JSON.
    #[arg(long)]
    diagnostics: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    /// TOML config. Flags below override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Signal, e.g. `staircase:k=2,v=1` or `custom_csv:path=mu.csv`.
    #[arg(long)]
    signal: Option<String>,
    /// Comma-separated lengths, e.g. `8,12,16`.
    #[arg(long, value_delimiter = ',')]
    n: Vec<usize>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    replicates: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Estimator, repeatable, e.g. `pava`, `qagg:dict=maxcard=8`, `tv:rule=universal`.
    #[arg(long = "estimator")]
    estimators: Vec<String>,
    /// Regret class, e.g. `monotone`, `monotone_k_pieces:k=2`, `convex_q_pieces:q=3`.
    #[arg(long)]
    class: Option<String>,
    /// Oracle spec `FAMILY:C:c:e`, repeatable.
    #[arg(long = "oracle-spec")]
    oracle_specs: Vec<String>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    no_plot: bool,
    #[arg(long)]
    record_runtime: bool,
    /// Worker threads; 0 uses all cores.
    #[arg(long, default_value_t = 0)]
    workers: usize,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum)]
    family: FamilyArg,
    #[arg(long)]
    sigma: f64,
    /// Constants `C:c:e` of `C·approx + c·σ²d/n·log(en/d)^e`.
    #[arg(long, default_value = "1:1:1")]
    spec: String,
    /// Largest piece count tabulated (monotone only).
    #[arg(long)]
    k_max: Option<usize>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct PackingArgs {
    #[arg(long, value_enum)]
    family: FamilyArg,
    #[arg(long)]
    n: usize,
    /// Number of pieces (`k` or `q`).
    #[arg(long)]
    k: usize,
    /// Variation (monotone family).
    #[arg(long = "V", default_value_t = 1.0)]
    v: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    output: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Estimate(a) => estimate(a),
        Command::Experiment(a) => experiment(a),
        Command::Oracle(a) => oracle(a),
        Command::Packing(a) => packing(a),
        Command::Selftest => selftest(),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn read_input(path: &Path) -> anyhow::Result<Sequence> {
    if path == Path::new("-") {
        let mut text = String::new();
        io::stdin().read_to_string(&mut text)?;
        Ok(parse_csv(&text)?)
    } else {
        Ok(read_sequence(path)?)
    }
}

fn write_text(path: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn estimate(a: EstimateArgs) -> anyhow::Result<ExitCode> {
    let y = read_input(&a.input)?;
    let noise = match a.sigma {
        Some(s) => NoiseLevel::known(s)?,
        None => {
            let est = estimate_sigma_diff(&y)?;
            log::warn!("sigma not given; using the difference estimate {}", est.sigma);
            est
        }
    };
    let needs_sigma =
        matches!(a.method, Method::Qagg | Method::QaggConvex) || (matches!(a.method, Method::Tv) && a.lambda.is_none());
    if needs_sigma && noise.sigma <= 0.0 {
        bail!("the estimated noise level is zero; pass --sigma");
    }
    let mut diag = json!({
        "n": y.len(),
        "sigma": noise.sigma,
        "sigma_source": noise.source,
    });
    let fit: Vec<f64> = match a.method {
        Method::Pava => {
            diag["method"] = json!("pava");
            isotonic_ls(&y)
        }
        Method::Convexls => {
            diag["method"] = json!("convexls");
            convex_ls(&y, a.tol.unwrap_or(CONVEX_LS_TOL))?
        }
        Method::Tv => {
            let rule = match (a.lambda, a.lambda_rule) {
                (Some(l), _) => LambdaRule::Explicit { lambda: l },
                (None, Some(RuleArg::Universal)) => LambdaRule::Universal {
                    sigma: noise.sigma,
                    delta: a.delta,
                },
                (None, Some(RuleArg::Kstar)) => LambdaRule::AdaptiveKStar {
                    v: a.v.context("--lambda-rule kstar needs --V")?,
                    sigma: noise.sigma,
                    delta: a.delta,
                },
                (None, None) => bail!("tv needs --lambda or --lambda-rule"),
            };
            let tuning = TVTuning { rule };
            diag["method"] = json!("tv");
            diag["lambda"] = json!(tuning.lambda(y.len())?);
            diag["lambda_rule"] = json!(rule);
            tv_estimator(&y, &tuning)?
        }
        Method::Qagg | Method::QaggConvex => {
            let family = if matches!(a.method, Method::Qagg) {
                PatternFamily::Monotone
            } else {
                PatternFamily::Convex
            };
            let dict = Dictionary::build(family, y.len(), a.dict)?;
            let defaults = QAggConfig::default();
            let cfg = QAggConfig {
                tol: a.tol.unwrap_or(defaults.tol),
                max_iter: a.max_iter.unwrap_or(defaults.max_iter),
                penalty_constant: a.qagg_constant,
                ..defaults
            };
            let sol = match solve_qagg(&y, noise.sigma, &dict, &cfg) {
                Ok(s) => s,
                Err(spagg::Error::QAggConvergence { gap, iterations, best }) => {
                    log::warn!("solver stopped at gap {gap:e} after {iterations} iterations");
                    *best
                }
                Err(e) => return Err(e.into()),
            };
            let support: Vec<_> = sol
                .weights
                .support(1e-12)
                .into_iter()
                .map(|(p, w)| json!({"pattern": p, "weight": w}))
                .collect();
            diag["method"] = json!(if family == PatternFamily::Monotone {
                "qagg"
            } else {
                "qagg-convex"
            });
            diag["dictionary"] = json!(a.dict.to_string());
            diag["penalty_constant"] = json!(cfg.penalty_constant);
            diag["objective_value"] = json!(sol.objective_value);
            diag["dual_gap"] = json!(sol.dual_gap);
            diag["iterations"] = json!(sol.iterations);
            diag["support"] = json!(support);
            sol.estimate.into_vec()
        }
    };
    match &a.output {
        Some(p) => write_sequence(p, &fit)?,
        None => print!("{}", to_csv(&fit)),
    }
    if let Some(p) = &a.diagnostics {
        std::fs::write(p, serde_json::to_string_pretty(&diag)? + "\n")?;
    }
    Ok(ExitCode::SUCCESS)
}

fn experiment(a: ExperimentArgs) -> anyhow::Result<ExitCode> {
    let mut cfg = match &a.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => {
            let signal = a.signal.as_deref().context("without --config, --signal is required")?;
            if a.n.is_empty() {
                bail!("without --config, --n is required");
            }
            if a.estimators.is_empty() {
                bail!("without --config, at least one --estimator is required");
            }
            ExperimentConfig::new(
                shorthand::parse::<SignalSpec>(signal, "family")?,
                a.n.clone(),
                Vec::new(),
            )
        }
    };
    if a.config.is_some() {
        if let Some(s) = &a.signal {
            cfg.signal = shorthand::parse(s, "family")?;
        }
        if !a.n.is_empty() {
            cfg.n_grid = a.n.clone();
        }
    }
    if !a.estimators.is_empty() {
        cfg.estimators = a
            .estimators
            .iter()
            .map(|s| shorthand::parse::<EstimatorSpec>(s, "method"))
            .collect::<anyhow::Result<_>>()?;
    }
    if let Some(c) = &a.class {
        cfg.class = Some(shorthand::parse::<ShapeClass>(c, "kind")?);
    }
    if !a.oracle_specs.is_empty() {
        cfg.oracle_spec = a
            .oracle_specs
            .iter()
            .map(|s| shorthand::bound_spec(s))
            .collect::<anyhow::Result<_>>()?;
    }
    if let Some(s) = a.sigma {
        cfg.sigma = s;
    }
    if let Some(r) = a.replicates {
        cfg.replicates = r;
    }
    if let Some(s) = a.seed {
        cfg.master_seed = s;
    }
    if let Some(d) = a.output_dir {
        cfg.output_dir = d;
    }
    if a.no_plot {
        cfg.plot = false;
    }
    if a.record_runtime {
        cfg.record_runtime = true;
    }
    cfg.validate()?;
    let report = run_experiment(&cfg, a.workers)?;
    eprintln!("{} rows written to {}", report.rows.len(), cfg.output_dir.display());
    for e in &report.errors {
        eprintln!("error: {e}");
    }
    Ok(if report.is_success() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn oracle(a: OracleArgs) -> anyhow::Result<ExitCode> {
    let mu = read_input(&a.input)?;
    let family = PatternFamily::from(a.family);
    let spec = BoundSpec::parse(family, &a.spec)?;
    let out = match family {
        PatternFamily::Monotone => {
            let k_max = a.k_max.unwrap_or(mu.len());
            let table = oracle_table_monotone(&mu, a.sigma, &spec, k_max)?;
            json!({"family": family, "spec": spec, "sigma": a.sigma, "n": mu.len(), "value": table.value,
                   "best_pieces": table.best_pieces, "terms": table.terms})
        }
        PatternFamily::Convex => {
            let search = if mu.len() <= CONVEX_EXHAUSTIVE_MAX_N {
                ConvexSearch::Exhaustive
            } else {
                ConvexSearch::Greedy {
                    max_knots: a.k_max.unwrap_or(mu.len() - 2),
                }
            };
            let o = oracle_rhs_convex(&mu, a.sigma, &spec, search)?;
            json!({"family": family, "spec": spec, "sigma": a.sigma, "n": mu.len(), "value": o.value,
                   "knots": o.knots, "approximation": o.approximation, "upper_bound": o.upper_bound})
        }
    };
    write_text(a.output.as_deref(), &(serde_json::to_string_pretty(&out)? + "\n"))?;
    Ok(ExitCode::SUCCESS)
}

fn packing(a: PackingArgs) -> anyhow::Result<ExitCode> {
    let report = match PatternFamily::from(a.family) {
        PatternFamily::Monotone => monotone_hypotheses(a.n, a.k, a.v, a.sigma, a.seed)?,
        PatternFamily::Convex => convex_hypotheses(a.n, a.k, a.sigma, a.seed)?,
    };
    write_text(a.output.as_deref(), &(serde_json::to_string_pretty(&report)? + "\n"))?;
    let checks = [
        ("zero word present", report.packing_checks.zero_present),
        ("packing size", report.packing_checks.size_ok),
        ("pairwise distance", report.packing_checks.distance_ok),
        ("class membership", report.class_ok),
        ("separation", report.separation_ok),
        ("KL budget", report.budget_ok),
    ];
    for (name, ok) in checks {
        eprintln!("{} {name}", if ok { "ok  " } else { "FAIL" });
    }
    Ok(if report.all_ok() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn selftest() -> anyhow::Result<ExitCode> {
    let outcomes = run_selftest();
    for o in &outcomes {
        println!("{} {}: {}", if o.passed { "PASS" } else { "FAIL" }, o.name, o.detail);
    }
    Ok(if outcomes.iter().all(|o| o.passed) {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}
