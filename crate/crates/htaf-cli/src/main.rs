//! Command-line harness: analytic curve emission, the tabular training
//! protocol, single-model evaluation, and the concept-bottleneck report.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use htaf_cli::analyze::{
    bounds_curve, dhn_analysis, geometric_sweep, ratio_analysis, tail_analysis, write_bounds_csv,
    write_dhn_csv, write_ratio_csv, write_tail_csv,
};
use htaf_cli::config::RunConfig;
use htaf_cli::data::{load_csv, write_csv, Schema};
use htaf_cli::error::{CliError, Result};
use htaf_cli::experiment::{
    best_repeat, run_experiment, write_report_csv, write_report_json, ModelBundle,
};
use htaf_cli::interpret::{emit_prompt_files, run_icbm, write_icbm_json, IcbmConfig};
use htaf_cli::synth::{generate, generate_rows, SynthName};
use htaf_core::activations::HtafParams;
use htaf_core::training::{evaluate, Metric, Targets, TrainSet};

#[derive(Parser)]
#[command(name = "htaf", version, about = "Heavy-tailed activation experiment harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Emit analytic curves as CSV.
    Analyze {
        #[command(subcommand)]
        kind: AnalyzeKind,
    },
    /// Run the repeated train/validate/test protocol from a config file.
    Train(TrainArgs),
    /// Score a saved model bundle against a CSV dataset.
    Evaluate(EvaluateArgs),
    /// Train a concept-bottleneck classifier and report its metric suite.
    IcbmReport(IcbmArgs),
    /// Train a concept-bottleneck classifier and write interpretation
    /// prompts for its most important concept nodes.
    EmitPrompts(PromptArgs),
    /// Generate one of the built-in synthetic benchmark tables as CSV.
    GenData(GenDataArgs),
}

#[derive(Subcommand)]
enum AnalyzeKind {
    /// Lower-bound curve for the frequency gain over a sweep of
    /// saturation gains, with the product column.
    Bounds {
        #[arg(long, default_value_t = 0.1)]
        epsilon: f64,
        /// Smallest saturation gain in the geometric sweep.
        #[arg(long, default_value_t = 3.0)]
        lo: f64,
        /// Largest saturation gain in the geometric sweep.
        #[arg(long, default_value_t = 5000.0)]
        hi: f64,
        #[arg(long, default_value_t = 40)]
        points: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Gradient samples on a tail interval plus the log-linear decay fit.
    Tail {
        #[arg(long, default_value_t = 1.0)]
        alpha0: f64,
        #[arg(long, default_value_t = 22.0)]
        alpha1: f64,
        #[arg(long, default_value_t = 5.0)]
        lo: f64,
        #[arg(long, default_value_t = 10.0)]
        hi: f64,
        #[arg(long, default_value_t = 200)]
        points: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Heavy-tail vs scaled-sigmoid gradient ratio at matched origin slope.
    Ratio {
        #[arg(long, default_value_t = 1.5)]
        alpha0: f64,
        #[arg(long, default_value_t = 5.0)]
        alpha1: f64,
        /// Sigmoid gain; must equal alpha0 * alpha1.
        #[arg(long, default_value_t = 7.5)]
        beta0: f64,
        #[arg(long, default_value_t = 0.0)]
        lo: f64,
        #[arg(long, default_value_t = 3.0)]
        hi: f64,
        #[arg(long, default_value_t = 301)]
        points: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Seeded random step networks against the smooth-twin mean-gap bound.
    DhnApprox {
        #[arg(long, default_value_t = 8)]
        n1: usize,
        #[arg(long, default_value_t = 4)]
        dim: usize,
        #[arg(long, default_value_t = 0.05)]
        epsilon: f64,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        /// Number of seeds, used as 0..seeds.
        #[arg(long, default_value_t = 20)]
        seeds: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct TrainArgs {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Also save each method's best-validation model bundle.
    #[arg(long)]
    save_models: bool,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Model bundle written by `train --save-models`.
    #[arg(long)]
    model: PathBuf,
    /// CSV dataset with raw (unscaled) features.
    #[arg(long)]
    data: PathBuf,
    /// Target column name.
    #[arg(long, default_value = "target")]
    target: String,
    /// Metric override; defaults to the bundle's training metric.
    #[arg(long)]
    metric: Option<String>,
}

#[derive(Args)]
struct IcbmArgs {
    /// JSON concept-bottleneck configuration; defaults are used if absent.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PromptArgs {
    /// JSON concept-bottleneck configuration; defaults are used if absent.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory for the prompt files.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct GenDataArgs {
    /// One of: wine_like, abalone_like, churn_like, fico_like.
    #[arg(long)]
    name: String,
    /// Row count override; defaults to the benchmark's size.
    #[arg(long)]
    rows: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Output root: explicit flag, else the HTAF_OUT_ROOT variable, else the
/// working directory.
fn out_root(explicit: Option<PathBuf>) -> PathBuf {
    explicit
        .or_else(|| std::env::var_os("HTAF_OUT_ROOT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."))
}

/// Interprets `--out` as a file when it names one (has an extension or
/// exists as a file), else as a directory joined with `default_name`.
fn out_file(out: Option<PathBuf>, default_name: &str) -> PathBuf {
    match out {
        Some(p) if p.extension().is_some() && !p.is_dir() => p,
        other => out_root(other).join(default_name),
    }
}

fn parse_metric(name: &str) -> Result<Metric> {
    match name {
        "rmse" => Ok(Metric::Rmse),
        "auroc" => Ok(Metric::Auroc),
        "accuracy" => Ok(Metric::Accuracy),
        _ => Err(CliError::Config {
            reason: format!("unknown metric {name:?}; expected rmse, auroc, or accuracy"),
        }),
    }
}

fn cmd_analyze(kind: AnalyzeKind) -> Result<()> {
    match kind {
        AnalyzeKind::Bounds {
            epsilon,
            lo,
            hi,
            points,
            out,
        } => {
            let sweep = geometric_sweep(lo, hi, points)?;
            let rows = bounds_curve(epsilon, &sweep)?;
            let path = out_file(out, "bounds.csv");
            write_bounds_csv(&rows, &path)?;
            let last = rows.last().expect("sweep is non-empty");
            println!(
                "bounds: {} rows at epsilon {:.3}; product at alpha1 {:.3} is {:.3}",
                rows.len(),
                epsilon,
                last.alpha1,
                last.product
            );
            println!("wrote {}", path.display());
        }
        AnalyzeKind::Tail {
            alpha0,
            alpha1,
            lo,
            hi,
            points,
            out,
        } => {
            let params = HtafParams::new(alpha0, alpha1)?;
            let analysis = tail_analysis(params, lo, hi, points)?;
            let path = out_file(out, "tail.csv");
            write_tail_csv(&analysis, &path)?;
            println!("{analysis}");
            println!("wrote {}", path.display());
        }
        AnalyzeKind::Ratio {
            alpha0,
            alpha1,
            beta0,
            lo,
            hi,
            points,
            out,
        } => {
            let params = HtafParams::new(alpha0, alpha1)?;
            let analysis = ratio_analysis(params, beta0, lo, hi, points)?;
            let path = out_file(out, "ratio.csv");
            write_ratio_csv(&analysis, &path)?;
            println!("{analysis}");
            println!("wrote {}", path.display());
        }
        AnalyzeKind::DhnApprox {
            n1,
            dim,
            epsilon,
            samples,
            seeds,
            out,
        } => {
            let seed_list: Vec<u64> = (0..seeds).collect();
            let rows = dhn_analysis(n1, dim, epsilon, samples, &seed_list)?;
            let path = out_file(out, "dhn_approx.csv");
            write_dhn_csv(&rows, &path)?;
            let held = rows.iter().filter(|r| r.holds).count();
            println!(
                "dhn-approx: bound held for {held}/{} seeds (n1 {n1}, dim {dim}, epsilon {:.3}, {samples} samples)",
                rows.len(),
                epsilon
            );
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let cfg = RunConfig::load(&args.config)?;
    let run = run_experiment(&cfg)?;
    let report = &run.report;
    let out_dir = cfg.resolve_out_dir();
    std::fs::create_dir_all(&out_dir).map_err(|source| CliError::Io {
        path: out_dir.clone(),
        source,
    })?;

    let json_path = out_dir.join(format!("{}_report.json", report.dataset));
    write_report_json(report, &json_path)?;
    let csv_path = out_dir.join(format!("{}_repeats.csv", report.dataset));
    write_report_csv(report, &csv_path)?;

    println!(
        "dataset {} ({} rows, {} features), metric {:?}, {} repeats",
        report.dataset, report.n_rows, report.n_features, report.metric, report.n_repeats
    );
    for method in &report.methods {
        println!(
            "  {:<16} trainmode {:.3} +/- {:.3}   heaviside {:.3} +/- {:.3}",
            method.name,
            method.mean_trainmode,
            method.stderr_trainmode,
            method.mean_heaviside,
            method.stderr_heaviside
        );
    }
    println!("wrote {}", json_path.display());
    println!("wrote {}", csv_path.display());

    if args.save_models {
        for (g, method) in report.methods.iter().enumerate() {
            let r = best_repeat(method, report.metric);
            let bundle = ModelBundle::from_run(&run, g, r)?;
            let path = out_dir.join(format!("{}_{}_model.json", report.dataset, method.name));
            bundle.save(&path)?;
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<()> {
    let bundle = ModelBundle::load(&args.model)?;
    let net = bundle.network()?;
    let metric = match &args.metric {
        Some(name) => parse_metric(name)?,
        None => bundle.metric,
    };
    let schema = Schema {
        target: args.target.clone(),
        features: None,
        classification: metric != Metric::Rmse,
    };
    let ds = load_csv(&args.data, &schema)?;
    let x = bundle.scaling.apply(&ds.features);
    let set = match ds.targets {
        Targets::Values(y) => TrainSet::regression(x, y)?,
        Targets::Labels(l) => TrainSet::classification(x, l)?,
    };
    let value = evaluate(&net, &set, metric)?;
    println!(
        "{} on {} rows of {}: {:.3} ({})",
        match metric {
            Metric::Rmse => "rmse",
            Metric::Auroc => "auroc",
            Metric::Accuracy => "accuracy",
        },
        set.len(),
        args.data.display(),
        value,
        htaf_cli::analyze::sig17(value)
    );
    Ok(())
}

fn load_icbm_config(path: Option<&Path>) -> Result<IcbmConfig> {
    match path {
        Some(p) => IcbmConfig::load(p),
        None => Ok(IcbmConfig::builtin_default()),
    }
}

fn cmd_icbm_report(args: IcbmArgs) -> Result<()> {
    let cfg = load_icbm_config(args.config.as_deref())?;
    let run = run_icbm(&cfg)?;
    let r = &run.report;
    let path = out_file(args.out, &format!("{}_icbm.json", r.dataset));
    write_icbm_json(r, &path)?;
    println!(
        "icbm on {} ({} classes, {} epochs): val {:.3}, test {:.3} trainmode / {:.3} heaviside",
        r.dataset, r.n_classes, r.epochs, r.val_metric, r.test_metric_trainmode, r.test_metric_heaviside
    );
    println!(
        "  accuracy trainmode {:.3}, heaviside {:.3} (gap {:.3}); median-threshold {:.3} (gap {:.3}); matched-proportion {:.3} (gap {:.3})",
        r.accuracy_trainmode,
        r.accuracy_heaviside,
        r.swap_accuracy_gap,
        r.accuracy_bm_median,
        r.bm_median_accuracy_gap,
        r.accuracy_bm_matched,
        r.bm_matched_accuracy_gap
    );
    println!(
        "  binarity {:.3}, concept accuracy {:.3}, specificity concentration {:?}",
        r.binarity_trainmode,
        r.concept_accuracy,
        r.specificity_concentration
            .iter()
            .map(|c| (c * 1000.0).round() / 1000.0)
            .collect::<Vec<_>>()
    );
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_emit_prompts(args: PromptArgs) -> Result<()> {
    let cfg = load_icbm_config(args.config.as_deref())?;
    let run = run_icbm(&cfg)?;
    let dir = out_root(args.out_dir).join("prompts");
    let paths = emit_prompt_files(&run, &dir)?;
    for p in &paths {
        println!("wrote {}", p.display());
    }
    println!(
        "{} prompt files for top-{} nodes per class",
        paths.len(),
        cfg.top_k
    );
    Ok(())
}

fn cmd_gen_data(args: GenDataArgs) -> Result<()> {
    let name = SynthName::parse(&args.name).ok_or_else(|| CliError::Config {
        reason: format!("unknown builtin dataset {:?}", args.name),
    })?;
    let ds = match args.rows {
        Some(n) => generate_rows(name, args.seed, n),
        None => generate(name, args.seed),
    };
    let path = out_file(args.out, &format!("{}.csv", name.as_str()));
    write_csv(&ds, &path)?;
    println!(
        "wrote {} ({} rows, {} features)",
        path.display(),
        ds.n_rows(),
        ds.n_features()
    );
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Analyze { kind } => cmd_analyze(kind),
        Command::Train(args) => cmd_train(args),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::IcbmReport(args) => cmd_icbm_report(args),
        Command::EmitPrompts(args) => cmd_emit_prompts(args),
        Command::GenData(args) => cmd_gen_data(args),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
