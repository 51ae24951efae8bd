//! Experiment command line: reproducible dataset generation and
//! ingestion, balancing-score fits, single annealed trainings and full
//! regularization-path sweeps, plus the exact-oracle identity check.
//!
//! Exit codes: 0 success, 1 usage error, 2 runtime failure, 3 failed
//! oracle check.

use std::collections::BTreeSet;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use fairreg::dataset::{
    apply_scaler, fit_scaler, generate_synthetic, holdout_split, load_adult, Dataset, Manifest,
    DEFAULT_N_INDIRECT, DEFAULT_N_PROXY, DEFAULT_N_SAFE,
};
use fairreg::metrics::MetricsRow;
use fairreg::oracle::identity_suite;
use fairreg::propensity::{fit_propensity, PropensityModel, DEFAULT_CV_SEED, DEFAULT_FOLDS};
use fairreg::schedule::{lambda_grid, run_lambda, Experiment, ModelKind, PenaltyKind};
use fairreg::trainers::GbtConfig;

#[derive(Parser)]
#[command(
    name = "fairreg",
    about = "Train binary classifiers with statistical-parity or causal direct-effect regularization",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset, split it, standardize it and write
    /// train/test CSVs plus a manifest.
    GenData(GenDataArgs),
    /// Ingest the official census income files, one-hot encode and
    /// standardize against the training split.
    IngestAdult(IngestAdultArgs),
    /// Fit the cross-validated L1 balancing-score model on a prepared
    /// training CSV.
    FitPropensity(FitPropensityArgs),
    /// Train one model at a fixed regularization weight.
    Train(TrainArgs),
    /// Train the full regularization path and write the report CSV.
    Sweep(SweepArgs),
    /// Run the causal-identity property suite on random discrete models.
    OracleCheck(OracleCheckArgs),
}

#[derive(Args)]
struct GenDataArgs {
    /// Number of rows to generate.
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_N_SAFE)]
    n_safe: usize,
    #[arg(long, default_value_t = DEFAULT_N_INDIRECT)]
    n_indirect: usize,
    #[arg(long, default_value_t = DEFAULT_N_PROXY)]
    n_proxy: usize,
    /// Fraction of rows held out as the test split.
    #[arg(long, default_value_t = 0.33)]
    test_fraction: f64,
    #[arg(long, default_value_t = 123)]
    split_seed: u64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct IngestAdultArgs {
    /// Path to the official training file (adult.data).
    #[arg(long)]
    train: PathBuf,
    /// Path to the official test file (adult.test).
    #[arg(long)]
    test: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FitPropensityArgs {
    /// Directory produced by gen-data or ingest-adult.
    #[arg(long)]
    data: PathBuf,
    /// Comma-separated inverse-penalty grid.
    #[arg(long, default_value = "0.01,0.1,1,10,100", value_delimiter = ',')]
    c_grid: Vec<f64>,
    #[arg(long, default_value_t = DEFAULT_FOLDS)]
    folds: usize,
    #[arg(long, default_value_t = DEFAULT_CV_SEED)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum LossArg {
    Spd,
    Cde,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Linear,
    Gbt,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Directory produced by gen-data or ingest-adult.
    #[arg(long)]
    data: PathBuf,
    /// Propensity artifact written by fit-propensity.
    #[arg(long)]
    propensity: PathBuf,
    #[arg(long, value_enum)]
    loss: LossArg,
    #[arg(long, value_enum)]
    model: ModelArg,
    #[arg(long, default_value_t = 1)]
    n1: usize,
    #[arg(long, default_value_t = 0)]
    n2: usize,
    /// Decision threshold for outcome metrics.
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
    /// Gradient step size for the linear trainer.
    #[arg(long, default_value_t = 0.1)]
    step: f64,
    /// Booster depth limit.
    #[arg(long, default_value_t = 2)]
    max_depth: usize,
    /// Booster learning rate.
    #[arg(long, default_value_t = 0.1)]
    learning_rate: f64,
    /// Booster leaf ridge.
    #[arg(long, default_value_t = 10.0)]
    reg_lambda: f64,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    exp: ExperimentArgs,
    #[arg(long)]
    lambda: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    exp: ExperimentArgs,
    /// Optional comma-separated λ values; defaults to the 40-point grid.
    #[arg(long, value_delimiter = ',')]
    lambdas: Option<Vec<f64>>,
    /// Worker threads for independent λ points.
    #[arg(long, default_value_t = 1)]
    threads: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct OracleCheckArgs {
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value_t = 200)]
    instances: usize,
    #[arg(long, default_value_t = 1e-8)]
    tolerance: f64,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap prints help/version through the error path too
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> fairreg::Result<ExitCode> {
    match cli.command {
        Command::GenData(args) => gen_data(args)?,
        Command::IngestAdult(args) => ingest_adult(args)?,
        Command::FitPropensity(args) => fit_propensity_cmd(args)?,
        Command::Train(args) => train_cmd(args)?,
        Command::Sweep(args) => sweep_cmd(args)?,
        Command::OracleCheck(args) => return oracle_check(args),
    }
    Ok(ExitCode::SUCCESS)
}

fn ensure_dir(path: &Path) -> fairreg::Result<()> {
    std::fs::create_dir_all(path).map_err(|e| fairreg::Error::io(path, e))
}

fn write_config(dir: &Path, entries: &[(&str, String)]) -> fairreg::Result<()> {
    let path = dir.join("config.txt");
    let mut f = std::fs::File::create(&path).map_err(|e| fairreg::Error::io(&path, e))?;
    for (key, value) in entries {
        writeln!(f, "{key} = {value}").map_err(|e| fairreg::Error::io(&path, e))?;
    }
    Ok(())
}

fn fmt_g(v: f64) -> String {
    format!("{v:.8e}")
}

fn gen_data(args: GenDataArgs) -> fairreg::Result<()> {
    ensure_dir(&args.out)?;
    let raw = generate_synthetic(args.n, args.seed, args.n_safe, args.n_indirect, args.n_proxy)?;
    let (train_raw, test_raw) = holdout_split(&raw, args.test_fraction, args.split_seed)?;
    let scaler = fit_scaler(&train_raw);
    for name in scaler.dropped_names() {
        eprintln!("warning: dropping constant column {name}");
    }
    let train = apply_scaler(&scaler, &train_raw)?;
    let test = apply_scaler(&scaler, &test_raw)?;
    train.to_csv(&args.out.join("train.csv"))?;
    test.to_csv(&args.out.join("test.csv"))?;
    Manifest::from_parts(&train_raw, &scaler).write(&args.out.join("manifest.csv"))?;
    write_config(
        &args.out,
        &[
            ("command", "gen-data".into()),
            ("n", args.n.to_string()),
            ("seed", args.seed.to_string()),
            ("n_safe", args.n_safe.to_string()),
            ("n_indirect", args.n_indirect.to_string()),
            ("n_proxy", args.n_proxy.to_string()),
            ("test_fraction", fmt_g(args.test_fraction)),
            ("split_seed", args.split_seed.to_string()),
        ],
    )?;
    println!(
        "wrote {} train rows and {} test rows with {} features to {}",
        train.n_rows(),
        test.n_rows(),
        train.n_features(),
        args.out.display()
    );
    Ok(())
}

fn ingest_adult(args: IngestAdultArgs) -> fairreg::Result<()> {
    ensure_dir(&args.out)?;
    let (train_raw, test_raw) = load_adult(&args.train, &args.test)?;
    let scaler = fit_scaler(&train_raw);
    for name in scaler.dropped_names() {
        eprintln!("warning: dropping constant column {name}");
    }
    let train = apply_scaler(&scaler, &train_raw)?;
    let test = apply_scaler(&scaler, &test_raw)?;
    train.to_csv(&args.out.join("train.csv"))?;
    test.to_csv(&args.out.join("test.csv"))?;
    Manifest::from_parts(&train_raw, &scaler).write(&args.out.join("manifest.csv"))?;
    write_config(
        &args.out,
        &[
            ("command", "ingest-adult".into()),
            ("train", args.train.display().to_string()),
            ("test", args.test.display().to_string()),
        ],
    )?;
    println!(
        "ingested {} train rows and {} test rows with {} encoded features",
        train.n_rows(),
        test.n_rows(),
        train.n_features()
    );
    Ok(())
}

fn load_splits(data: &Path) -> fairreg::Result<(Dataset, Dataset)> {
    let train = Dataset::from_csv(&data.join("train.csv"))?;
    let test = Dataset::from_csv(&data.join("test.csv"))?;
    Ok((train, test))
}

fn fit_propensity_cmd(args: FitPropensityArgs) -> fairreg::Result<()> {
    ensure_dir(&args.out)?;
    let (train, _) = load_splits(&args.data)?;
    let model = fit_propensity(&train, &args.c_grid, args.folds, args.seed)?;
    model.save(&args.out.join("propensity.csv"))?;
    write_config(
        &args.out,
        &[
            ("command", "fit-propensity".into()),
            ("data", args.data.display().to_string()),
            (
                "c_grid",
                args.c_grid.iter().map(|c| fmt_g(*c)).collect::<Vec<_>>().join(","),
            ),
            ("folds", args.folds.to_string()),
            ("seed", args.seed.to_string()),
            ("selected_c", fmt_g(model.c)),
            ("nonzero_weights", model.n_nonzero().to_string()),
        ],
    )?;
    println!(
        "selected C = {} with {} nonzero weights; artifact at {}",
        model.c,
        model.n_nonzero(),
        args.out.join("propensity.csv").display()
    );
    Ok(())
}

fn build_experiment(args: &ExperimentArgs) -> fairreg::Result<(Experiment, Vec<(&'static str, String)>)> {
    let (train, test) = load_splits(&args.data)?;
    let propensity = PropensityModel::load(&args.propensity)?;
    let kind = match args.loss {
        LossArg::Spd => PenaltyKind::Spd,
        LossArg::Cde => PenaltyKind::Cde,
    };
    let model = match args.model {
        ModelArg::Linear => ModelKind::Linear { step: args.step },
        ModelArg::Gbt => ModelKind::Gbt(GbtConfig {
            max_depth: args.max_depth,
            learning_rate: args.learning_rate,
            reg_lambda: args.reg_lambda,
            ..GbtConfig::default()
        }),
    };
    let exp = Experiment::new(&train, &test, &propensity, kind, model, args.n1, args.n2, args.threshold)?;
    let config = vec![
        ("data", args.data.display().to_string()),
        ("propensity", args.propensity.display().to_string()),
        ("loss", kind.to_string()),
        (
            "model",
            match args.model {
                ModelArg::Linear => "linear".to_string(),
                ModelArg::Gbt => "gbt".to_string(),
            },
        ),
        ("n1", args.n1.to_string()),
        ("n2", args.n2.to_string()),
        ("threshold", fmt_g(args.threshold)),
        ("step", fmt_g(args.step)),
        ("max_depth", args.max_depth.to_string()),
        ("learning_rate", fmt_g(args.learning_rate)),
        ("reg_lambda", fmt_g(args.reg_lambda)),
    ];
    Ok((exp, config))
}

fn save_point_model(point: &fairreg::schedule::SweepPoint, path: &Path) -> fairreg::Result<()> {
    if let Some(model) = &point.linear {
        model.save(path)?;
    }
    if let Some(ensemble) = &point.ensemble {
        ensemble.save(path)?;
    }
    Ok(())
}

fn train_cmd(args: TrainArgs) -> fairreg::Result<()> {
    ensure_dir(&args.out)?;
    let (exp, mut config) = build_experiment(&args.exp)?;
    let point = run_lambda(&exp, args.lambda)?;
    point.trace.write_csv(&args.out.join("trace.csv"))?;
    save_point_model(&point, &args.out.join("model.txt"))?;
    let metrics_path = args.out.join("metrics.csv");
    let mut f = std::fs::File::create(&metrics_path).map_err(|e| fairreg::Error::io(&metrics_path, e))?;
    writeln!(f, "{}", MetricsRow::csv_header(exp.n1, exp.n2)).map_err(|e| fairreg::Error::io(&metrics_path, e))?;
    writeln!(f, "{}", point.metrics.csv_line()).map_err(|e| fairreg::Error::io(&metrics_path, e))?;
    config.insert(0, ("command", "train".into()));
    config.push(("lambda", fmt_g(args.lambda)));
    write_config(&args.out, &config)?;
    println!(
        "λ = {}: accuracy {:.4}, outcome SPD {:.4}; outputs in {}",
        args.lambda,
        point.metrics.accuracy,
        point.metrics.spd_outcome,
        args.out.display()
    );
    Ok(())
}

/// λ values already present in a partially written report, so an
/// interrupted sweep resumes instead of recomputing.
fn completed_lambdas(report: &Path) -> BTreeSet<String> {
    let mut done = BTreeSet::new();
    if let Ok(content) = std::fs::read_to_string(report) {
        for line in content.lines().skip(1) {
            if let Some(first) = line.split(',').next() {
                done.insert(first.to_string());
            }
        }
    }
    done
}

fn sweep_cmd(args: SweepArgs) -> fairreg::Result<()> {
    ensure_dir(&args.out)?;
    let traces_dir = args.out.join("traces");
    let models_dir = args.out.join("models");
    ensure_dir(&traces_dir)?;
    ensure_dir(&models_dir)?;
    let (exp, mut config) = build_experiment(&args.exp)?;
    let grid = args.lambdas.clone().unwrap_or_else(lambda_grid);
    let threads = args.threads.max(1);

    let report_path = args.out.join("report.csv");
    let done = completed_lambdas(&report_path);
    let pending: Vec<(usize, f64)> = grid
        .iter()
        .enumerate()
        .filter(|(_, l)| !done.contains(&fmt_g(**l)))
        .map(|(i, l)| (i, *l))
        .collect();

    let mut report = if done.is_empty() {
        let mut f = std::fs::File::create(&report_path).map_err(|e| fairreg::Error::io(&report_path, e))?;
        writeln!(f, "{}", MetricsRow::csv_header(exp.n1, exp.n2)).map_err(|e| fairreg::Error::io(&report_path, e))?;
        f
    } else {
        std::fs::OpenOptions::new()
            .append(true)
            .open(&report_path)
            .map_err(|e| fairreg::Error::io(&report_path, e))?
    };

    config.insert(0, ("command", "sweep".into()));
    config.push(("lambdas", grid.iter().map(|l| fmt_g(*l)).collect::<Vec<_>>().join(",")));
    config.push(("threads", threads.to_string()));
    write_config(&args.out, &config)?;

    let mut failures: Vec<(f64, String)> = Vec::new();
    // fan out chunks of independent λ points, then flush them in grid
    // order so the report stays sorted and per-λ resumable
    for chunk in pending.chunks(threads) {
        let results: Vec<(usize, f64, fairreg::Result<fairreg::schedule::SweepPoint>)> =
            std::thread::scope(|scope| {
                let exp_ref = &exp;
                let handles: Vec<_> = chunk
                    .iter()
                    .map(|&(idx, lambda)| {
                        scope.spawn(move || (idx, lambda, run_lambda(exp_ref, lambda)))
                    })
                    .collect();
                handles.into_iter().map(|h| h.join().expect("sweep worker")).collect()
            });
        for (_, lambda, result) in results {
            match result {
                Ok(point) => {
                    writeln!(report, "{}", point.metrics.csv_line())
                        .map_err(|e| fairreg::Error::io(&report_path, e))?;
                    report.flush().map_err(|e| fairreg::Error::io(&report_path, e))?;
                    let tag = format!("lambda_{:.6}", lambda);
                    point.trace.write_csv(&traces_dir.join(format!("{tag}.csv")))?;
                    save_point_model(&point, &models_dir.join(format!("{tag}.txt")))?;
                    println!(
                        "λ = {:.6}: accuracy {:.4}, outcome SPD {:.4}",
                        lambda, point.metrics.accuracy, point.metrics.spd_outcome
                    );
                }
                Err(e) => {
                    eprintln!("λ = {lambda:.6} failed: {e}");
                    failures.push((lambda, e.to_string()));
                }
            }
        }
    }
    if !failures.is_empty() {
        let path = args.out.join("failures.csv");
        let mut f = std::fs::File::create(&path).map_err(|e| fairreg::Error::io(&path, e))?;
        writeln!(f, "lambda,error").map_err(|e| fairreg::Error::io(&path, e))?;
        for (lambda, msg) in &failures {
            writeln!(f, "{},{msg}", fmt_g(*lambda)).map_err(|e| fairreg::Error::io(&path, e))?;
        }
    }
    println!("sweep complete: report at {}", report_path.display());
    Ok(())
}

fn oracle_check(args: OracleCheckArgs) -> fairreg::Result<ExitCode> {
    let report = identity_suite(args.seed, args.instances);
    println!("instances checked      : {}", report.instances);
    println!("max averaging deviation: {:.3e}", report.max_averaging_dev);
    println!("max direct-effect dev  : {:.3e}", report.max_nde_dev);
    println!("max fair-target dev    : {:.3e}", report.max_fair_target_dev);
    println!("max total-effect dev   : {:.3e}", report.max_pearl_dev);
    println!("max overall deviation  : {:.3e}", report.max_deviation);
    if report.max_deviation > args.tolerance {
        println!("FAIL: deviation exceeds {:.3e}", args.tolerance);
        Ok(ExitCode::from(3))
    } else {
        println!("PASS: all identities within {:.3e}", args.tolerance);
        Ok(ExitCode::SUCCESS)
    }
}
