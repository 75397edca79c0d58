//! Experiment front end: train plans and policies, evaluate them, compare
//! return distributions, sweep the risk parameter, and run the invariant
//! suite. Every run writes its fully resolved config next to its outputs so
//! results are reconstructible from the output directory alone.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use riskplan_core::config::ExperimentConfig;
use riskplan_core::error::Error;
use riskplan_core::eval;
use riskplan_core::objectives::UtilityKind;
use riskplan_core::params_io;
use riskplan_core::planners::{self, Method, Representation};
use riskplan_core::rng;
use riskplan_core::checks;

/// Default output root, overridable with the RISKPLAN_OUT environment
/// variable or the --output-dir flag.
const OUTPUT_ENV: &str = "RISKPLAN_OUT";

#[derive(Parser)]
#[command(name = "riskplan", about = "Risk-aware planning by backpropagation through rollouts")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a straight-line plan or reactive policy.
    Train(TrainArgs),
    /// Roll out a trained parameter file and write returns, trajectories and
    /// a summary.
    Eval(EvalArgs),
    /// Bootstrap-compare two returns files.
    Compare(CompareArgs),
    /// Train and evaluate one agent per beta in a risk-aversion sweep.
    Sweep(SweepArgs),
    /// Run the invariant and oracle suite.
    Check,
}

#[derive(Args, Clone)]
struct ConfigArgs {
    /// Domain: navigation | reservoir | hvac | toy-quadratic.
    #[arg(long)]
    domain: Option<String>,
    /// Method: slp | drp.
    #[arg(long)]
    method: Option<String>,
    /// Config file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Objective kind: risk-neutral | mean-variance | exact-entropic.
    #[arg(long)]
    objective: Option<String>,
    /// Risk parameter (negative is risk-averse).
    #[arg(long, allow_hyphen_values = true)]
    beta: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Rollouts per epoch.
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    /// Optimizer: rmsprop | adam | sgd.
    #[arg(long)]
    optimizer: Option<String>,
    /// Global-norm gradient clip; 0 disables.
    #[arg(long)]
    grad_clip: Option<f64>,
    /// Reuse one fixed scenario batch every epoch.
    #[arg(long)]
    fixed_scenarios: bool,
    /// Disable the exact-entropic overflow abort.
    #[arg(long)]
    no_entropic_guard: bool,
    #[arg(long)]
    seed: Option<u64>,
    /// Hidden layer widths, comma separated.
    #[arg(long)]
    hidden: Option<String>,
    #[arg(long)]
    eval_episodes: Option<usize>,
    /// Output root; also settable via RISKPLAN_OUT.
    #[arg(long)]
    output_dir: Option<String>,
    /// Extra overrides as section.key=value (repeatable), e.g.
    /// --set domain.sigma-high=2.0
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    sets: Vec<String>,
    /// Run directory name; defaults to <domain>-<method>-seed<seed>.
    #[arg(long)]
    run_name: Option<String>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Args)]
struct EvalArgs {
    /// Trained parameter file produced by `train`.
    #[arg(long)]
    params: PathBuf,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Args)]
struct CompareArgs {
    /// Baseline returns CSV (the "a" side of the verdict).
    #[arg(long)]
    a: PathBuf,
    #[arg(long)]
    b: PathBuf,
    #[arg(long, default_value_t = 10_000)]
    resamples: usize,
    #[arg(long, default_value_t = 0.95)]
    confidence: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

#[derive(Args)]
struct SweepArgs {
    /// Betas in descending order, comma separated, e.g. "0,-10,-100".
    #[arg(long, allow_hyphen_values = true)]
    betas: String,
    #[command(flatten)]
    config: ConfigArgs,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Train(args) => cmd_train(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Compare(args) => cmd_compare(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Check => return cmd_check(),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

/// Distinct exit codes per failure class.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 2,
        Error::Parse { .. } | Error::Io(_) => 3,
        Error::NonFiniteState { .. } | Error::NonFiniteTraining { .. } => 4,
        Error::ParamsMismatch(_) => 5,
        Error::MathDomain { .. } => 6,
    }
}

/// Builds the resolved config from defaults, an optional file, and flags, in
/// that precedence order.
fn resolve_config(args: &ConfigArgs) -> Result<ExperimentConfig, Error> {
    let mut file_config = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            Some(ExperimentConfig::from_text(&text, &path.display().to_string())?)
        }
        None => None,
    };
    if let (Some(fc), Some(name)) = (&file_config, &args.domain) {
        if fc.domain.name() != name {
            // flags change the domain entirely: restart from defaults
            file_config = None;
        }
    }
    let mut config = match file_config {
        Some(c) => c,
        None => {
            let domain = args
                .domain
                .clone()
                .ok_or_else(|| Error::Config("--domain (or --config) is required".into()))?;
            let method = parse_method(args.method.as_deref().unwrap_or("slp"))?;
            ExperimentConfig::defaults(&domain, method)?
        }
    };
    if let Some(m) = &args.method {
        let method = parse_method(m)?;
        if method != config.method {
            // per-method learning-rate default must follow unless overridden
            let fresh = ExperimentConfig::defaults(config.domain.name(), method)?;
            config.method = method;
            if args.learning_rate.is_none() {
                config.learning_rate = fresh.learning_rate;
            }
        }
    }
    if let Some(o) = &args.objective {
        config.apply("objective", "kind", o)?;
    }
    if let Some(b) = args.beta {
        config.utility.beta = b;
        if b != 0.0 && config.utility.kind == UtilityKind::RiskNeutral {
            config.utility.kind = UtilityKind::MeanVariance;
        }
    }
    if let Some(v) = args.epochs {
        config.epochs = v;
    }
    if let Some(v) = args.batch {
        config.batch = v;
    }
    if let Some(v) = args.learning_rate {
        config.learning_rate = v;
    }
    if let Some(o) = &args.optimizer {
        config.apply("training", "optimizer", o)?;
    }
    if let Some(v) = args.grad_clip {
        config.grad_clip = v;
    }
    if args.fixed_scenarios {
        config.fixed_scenarios = true;
    }
    if args.no_entropic_guard {
        config.entropic_guard = false;
    }
    if let Some(v) = args.seed {
        config.seed = v;
    }
    if let Some(h) = &args.hidden {
        config.apply("training", "hidden", h)?;
    }
    if let Some(v) = args.eval_episodes {
        config.eval_episodes = v;
    }
    if let Some(dir) = &args.output_dir {
        config.output_dir = dir.clone();
    } else if let Ok(dir) = std::env::var(OUTPUT_ENV) {
        if args.config.is_none() {
            config.output_dir = dir;
        }
    }
    for set in &args.sets {
        let (key, value) = set
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--set expects section.key=value, got '{set}'")))?;
        let (section, k) = key
            .split_once('.')
            .ok_or_else(|| Error::Config(format!("--set key must be section.key, got '{key}'")))?;
        config.apply(section.trim(), k.trim(), value.trim())?;
    }
    config.utility.validate()?;
    Ok(config)
}

fn parse_method(s: &str) -> Result<Method, Error> {
    Method::from_str(s).ok_or_else(|| Error::Config(format!("unknown method '{s}'")))
}

fn run_dir(config: &ExperimentConfig, args: &ConfigArgs) -> PathBuf {
    let name = args
        .run_name
        .clone()
        .unwrap_or_else(|| format!("{}-{}-seed{}", config.domain.name(), config.method.as_str(), config.seed));
    Path::new(&config.output_dir).join(name)
}

fn write(path: &Path, contents: &str) -> Result<(), Error> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, contents)?;
    Ok(())
}

fn trace_csv(trace: &[planners::TraceRow]) -> String {
    let mut out = String::from("epoch,utility,mean,variance,grad_norm,wall_ms\n");
    for r in trace {
        out.push_str(&format!(
            "{},{:.17e},{:.17e},{:.17e},{:.17e},{:.3}\n",
            r.epoch, r.utility, r.mean, r.variance, r.grad_norm, r.wall_ms
        ));
    }
    out
}

fn cmd_train(args: TrainArgs) -> Result<(), Error> {
    let config = resolve_config(&args.config)?;
    let dir = run_dir(&config, &args.config);
    let rep = Representation::init(
        &config.domain,
        config.method,
        &config.hidden,
        rng::child(config.seed, rng::stream::WEIGHTS_INIT),
    );
    println!(
        "training {} {} for {} epochs (batch {}, lr {}, {} beta {})",
        config.domain.name(),
        config.method.as_str(),
        config.epochs,
        config.batch,
        config.learning_rate,
        config.utility.kind.as_str(),
        config.utility.effective_beta(),
    );
    let out = planners::train(&config.domain, rep, &config.train_settings())?;
    let last = out.trace.last().expect("at least one epoch");
    println!(
        "done: utility {:.4}, mean {:.4}, variance {:.4} at epoch {}",
        last.utility, last.mean, last.variance, last.epoch
    );
    if out.overflow_epochs > 0 {
        println!("warning: {} epochs flagged entropic overflow risk", out.overflow_epochs);
    }
    write(&dir.join("config.txt"), &config.to_text())?;
    write(&dir.join("trace.csv"), &trace_csv(&out.trace))?;
    params_io::save_params(
        &dir.join("params.txt"),
        &out.representation,
        config.domain.name(),
        config.seed,
        &config.hash(),
    )?;
    println!("artifacts in {}", dir.display());
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> Result<(), Error> {
    let loaded = params_io::load_params(&args.params)?;
    // default the config to the one saved next to the params file
    let mut cfg_args = args.config.clone();
    if cfg_args.config.is_none() && cfg_args.domain.is_none() {
        let sibling = args.params.parent().map(|p| p.join("config.txt"));
        match sibling {
            Some(p) if p.exists() => cfg_args.config = Some(p),
            _ => cfg_args.domain = Some(loaded.domain.clone()),
        }
    }
    if cfg_args.method.is_none() {
        cfg_args.method = Some(loaded.representation.method().as_str().to_string());
    }
    let config = resolve_config(&cfg_args)?;
    if config.domain.name() != loaded.domain {
        return Err(Error::ParamsMismatch(format!(
            "params file was trained on '{}' but the config names '{}'",
            loaded.domain,
            config.domain.name()
        )));
    }
    if config.method != loaded.representation.method() {
        return Err(Error::ParamsMismatch(format!(
            "params file holds a {} but the config names {}",
            loaded.representation.method().as_str(),
            config.method.as_str()
        )));
    }
    let dir = run_dir(&config, &cfg_args);
    let (samples, dump) =
        eval::evaluate(&config.domain, &loaded.representation, config.eval_episodes, config.seed)?;
    if samples.excluded_nonfinite > 0 {
        println!("warning: {} episodes diverged and were excluded", samples.excluded_nonfinite);
    }
    let stats = eval::summarize(&samples, config.utility.effective_beta());
    let incidents = eval::incident_stats(&config.domain, &dump);
    println!(
        "evaluated {} episodes: mean {:.4}, variance {:.4}, incidents {:.4}/{:.4}",
        stats.count, stats.mean, stats.variance, incidents.episode_fraction, incidents.unit_fraction
    );
    write(&dir.join("config.txt"), &config.to_text())?;
    write(&dir.join("returns.csv"), &eval::returns_csv(&samples))?;
    write(
        &dir.join("trajectories.csv"),
        &eval::trajectories_csv(&dump, config.domain.state_dim(), config.domain.action_dim()),
    )?;
    let header = vec![
        ("domain", config.domain.name().to_string()),
        ("method", config.method.as_str().to_string()),
        ("config-hash", config.hash()),
        ("eval-seed", config.seed.to_string()),
        ("excluded-nonfinite", samples.excluded_nonfinite.to_string()),
        ("incident-episode-fraction", format!("{:.6}", incidents.episode_fraction)),
        ("incident-unit-fraction", format!("{:.6}", incidents.unit_fraction)),
    ];
    write(&dir.join("summary.txt"), &eval::summary_text(&stats, &header))?;
    println!("artifacts in {}", dir.display());
    Ok(())
}

fn cmd_compare(args: CompareArgs) -> Result<(), Error> {
    let read = |path: &Path| -> Result<eval::ReturnSamples, Error> {
        let text = std::fs::read_to_string(path)?;
        let returns = eval::parse_returns_csv(&text, &path.display().to_string())?;
        Ok(eval::ReturnSamples {
            requested: returns.len(),
            returns,
            seed: 0,
            excluded_nonfinite: 0,
        })
    };
    let a = read(&args.a)?;
    let b = read(&args.b)?;
    let cmp = eval::compare_variance(&a, &b, args.resamples, args.confidence, args.seed);
    println!("a = {} ({} episodes)", args.a.display(), a.returns.len());
    println!("b = {} ({} episodes)", args.b.display(), b.returns.len());
    println!("variance a = {:.6}, b = {:.6}", cmp.var_a, cmp.var_b);
    println!(
        "Var(a)-Var(b) CI at {:.0}%: [{:.6}, {:.6}]",
        cmp.confidence * 100.0,
        cmp.var_diff_ci.0,
        cmp.var_diff_ci.1
    );
    println!("mean a = {:.6}, b = {:.6}", cmp.mean_a, cmp.mean_b);
    println!(
        "Mean(a)-Mean(b) CI at {:.0}%: [{:.6}, {:.6}]",
        cmp.confidence * 100.0,
        cmp.mean_diff_ci.0,
        cmp.mean_diff_ci.1
    );
    println!("verdict: {}", cmp.verdict.as_str());
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> Result<(), Error> {
    let config = resolve_config(&args.config)?;
    let betas: Vec<f64> = args
        .betas
        .split(',')
        .map(|b| {
            b.trim()
                .parse::<f64>()
                .map_err(|e| Error::Config(format!("bad beta '{b}': {e}")))
        })
        .collect::<Result<_, _>>()?;
    let dir = run_dir(&config, &args.config).join("sweep");
    let entries = eval::beta_sweep(
        &config.domain,
        config.method,
        &betas,
        &config.hidden,
        &config.train_settings(),
        config.eval_episodes,
    )?;
    let mut table = String::from("beta,mean,variance\n");
    for entry in &entries {
        match &entry.stats {
            Ok(stats) => {
                println!(
                    "beta {:>10}: mean {:.4}, variance {:.4}",
                    entry.beta, stats.mean, stats.variance
                );
                table.push_str(&format!("{},{:.17e},{:.17e}\n", entry.beta, stats.mean, stats.variance));
                let header = vec![
                    ("domain", config.domain.name().to_string()),
                    ("method", config.method.as_str().to_string()),
                    ("beta", entry.beta.to_string()),
                ];
                write(
                    &dir.join(format!("beta_{}.txt", entry.beta)),
                    &eval::summary_text(stats, &header),
                )?;
            }
            Err(e) => {
                println!("beta {:>10}: training failed: {e}", entry.beta);
                table.push_str(&format!("{},failed,failed\n", entry.beta));
            }
        }
    }
    write(&dir.join("config.txt"), &config.to_text())?;
    write(&dir.join("sweep.csv"), &table)?;
    println!("artifacts in {}", dir.display());
    Ok(())
}

fn cmd_check() -> ExitCode {
    let results = checks::run_all();
    let mut failed = 0;
    for r in &results {
        println!("{} {:<34} {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
        failed += (!r.passed) as u32;
    }
    println!("{} checks, {} failed", results.len(), failed);
    if failed > 0 {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
