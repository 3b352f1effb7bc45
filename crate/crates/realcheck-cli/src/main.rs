//! realcheck: batch CLI for uncertainty-realism assessment.
//!
//! Exit codes: 0 success (and realistic verdict), 1 usage error, 2 data
//! error, 3 statistically not realistic, 4 requested score undefined for
//! the input. The verdict gets its own code so shell pipelines can branch
//! on realism without parsing the report.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind as ClapErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

use realcheck::classification::ScoreKind;
use realcheck::dataset::{
    classification_line, read_classification, read_regression, regression_line, write_lines_atomic,
};
use realcheck::error::Error;
use realcheck::regression::{nll_grid, CovScore, Verdict};
use realcheck::report::{
    build_classification_report, build_regression_report, digest_hex, to_json_string,
    write_classification_report, write_regression_report, write_string_atomic,
    ClassificationReportOptions, RegressionReportOptions, ReportFormat,
};
use realcheck::simulate::{
    gen_classification, gen_regression, ClassificationKind, ClassificationRegime, RegressionKind,
    RegressionRegime,
};

const EXIT_OK: u8 = 0;
const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_NOT_REALISTIC: u8 = 3;
const EXIT_SCORE_UNDEFINED: u8 = 4;

#[derive(Parser)]
#[command(
    name = "realcheck",
    version,
    about = "Statistical checks for predictive-uncertainty realism"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Test regression uncertainties: chi-squared realism of Mahalanobis
    /// distances, covariance orientation, and score-binned error tables.
    RegressionRealism(RegressionArgs),
    /// Evaluate classification uncertainty scores by AUROC/AUPRC with
    /// correctly classified records as positives.
    ClassificationAuc(ClassificationArgs),
    /// Generate a synthetic dataset under a named calibration regime.
    Simulate(SimulateArgs),
    /// Tabulate Gaussian NLL against the realism deviation over a grid.
    NllGrid(NllGridArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ScoreArg {
    Det,
    Maxdiag,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    #[value(name = "csv_bundle")]
    CsvBundle,
}

impl From<FormatArg> for ReportFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Json => ReportFormat::Json,
            FormatArg::CsvBundle => ReportFormat::CsvBundle,
        }
    }
}

#[derive(Args)]
struct RegressionArgs {
    /// Line-delimited regression records
    #[arg(long)]
    input: PathBuf,
    /// Significance level for the realism verdict
    #[arg(long, default_value_t = 0.01)]
    alpha: f64,
    /// Covariance score for the error table
    #[arg(long, value_enum, default_value = "det")]
    score: ScoreArg,
    /// Equal-population bins in the error table
    #[arg(long, default_value_t = 10)]
    bins: usize,
    /// Quantile level for error quantiles and the Gaussian bound
    #[arg(long, default_value_t = 0.99)]
    quantile: f64,
    /// Report destination (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: FormatArg,
    /// Also report the intra-sample set rescaled to the ground-truth set's variance
    #[arg(long)]
    rescale_msample: bool,
    /// Leave-one-out intra-sample distances
    #[arg(long)]
    loo_msample: bool,
    /// Bin per-component absolute errors instead of error norms
    #[arg(long)]
    per_component: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScoreKindArg {
    MaxProb,
    Entropy,
    WinVar,
    Mi,
    All,
}

#[derive(Args)]
struct ClassificationArgs {
    /// Line-delimited classification records
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "all")]
    score: ScoreKindArg,
    /// Also report rejection fractions at the Youden threshold
    #[arg(long)]
    reject: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: FormatArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum TaskArg {
    Regression,
    Classification,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, value_enum)]
    task: TaskArg,
    /// Regression: calibrated | var_scaled | misoriented | fat_tailed | biased.
    /// Classification: informative | uninformative | out_of_data.
    #[arg(long)]
    regime: String,
    /// Output dimension (regression)
    #[arg(long, default_value_t = 4)]
    d: usize,
    /// Samples per record
    #[arg(long, default_value_t = 50)]
    k: usize,
    /// Record count
    #[arg(long, default_value_t = 1000)]
    n: usize,
    /// Class count (classification)
    #[arg(long, default_value_t = 19)]
    c: usize,
    /// Student-t degrees of freedom for fat_tailed (> 2)
    #[arg(long, default_value_t = 3.0)]
    nu: f64,
    /// Covariance scale factor for var_scaled (> 0)
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    /// Comma-separated error offset for biased, e.g. "1,0,0,0"
    #[arg(long)]
    bias: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct NllGridArgs {
    /// Error axis as LO:HI
    #[arg(long)]
    err_range: String,
    /// Sigma axis as LO:HI (LO > 0)
    #[arg(long)]
    sigma_range: String,
    #[arg(long, default_value_t = 50)]
    steps: usize,
    /// CSV destination (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ClapErrorKind::DisplayHelp | ClapErrorKind::DisplayVersion => {
                    print!("{e}");
                    return ExitCode::from(EXIT_OK);
                }
                _ => EXIT_USAGE,
            };
            eprint!("{e}");
            return ExitCode::from(code);
        }
    };
    if let Err(msg) = check_thread_cap() {
        eprintln!("error: {msg}");
        return ExitCode::from(EXIT_USAGE);
    }
    let code = match cli.command {
        Command::RegressionRealism(args) => cmd_regression_realism(&args),
        Command::ClassificationAuc(args) => cmd_classification_auc(&args),
        Command::Simulate(args) => cmd_simulate(&args),
        Command::NllGrid(args) => cmd_nll_grid(&args),
    };
    match code {
        Ok(c) => ExitCode::from(c),
        Err((c, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(c)
        }
    }
}

/// REALCHECK_THREADS caps internal parallelism. The pipelines run
/// single-threaded, so any positive cap is honored; the variable is still
/// validated so typos fail loudly.
fn check_thread_cap() -> Result<(), String> {
    match std::env::var("REALCHECK_THREADS") {
        Err(_) => Ok(()),
        Ok(v) => match v.parse::<usize>() {
            Ok(n) if n >= 1 => Ok(()),
            _ => Err(format!(
                "REALCHECK_THREADS must be a positive integer, got {v:?}"
            )),
        },
    }
}

type CmdResult = Result<u8, (u8, String)>;

fn exit_code_for(e: &Error) -> u8 {
    match e {
        Error::InvalidInput(_) | Error::InvalidRegime(_) => EXIT_USAGE,
        Error::NeedsSamples { .. } => EXIT_SCORE_UNDEFINED,
        _ => EXIT_DATA,
    }
}

fn fail(e: Error) -> (u8, String) {
    (exit_code_for(&e), e.to_string())
}

fn read_input_digest(path: &Path) -> Result<String, (u8, String)> {
    let bytes = std::fs::read(path)
        .map_err(|e| (EXIT_DATA, format!("cannot read {}: {e}", path.display())))?;
    Ok(digest_hex(&bytes))
}

fn cmd_regression_realism(args: &RegressionArgs) -> CmdResult {
    if matches!(args.format, FormatArg::CsvBundle) && args.out.is_none() {
        return Err((EXIT_USAGE, "--format csv_bundle requires --out".into()));
    }
    if !(args.alpha > 0.0 && args.alpha < 1.0) {
        return Err((
            EXIT_USAGE,
            format!("--alpha must lie in (0,1), got {}", args.alpha),
        ));
    }
    if !(args.quantile > 0.0 && args.quantile < 1.0) {
        return Err((
            EXIT_USAGE,
            format!("--quantile must lie in (0,1), got {}", args.quantile),
        ));
    }
    if args.bins < 2 {
        return Err((
            EXIT_USAGE,
            format!("--bins must be at least 2, got {}", args.bins),
        ));
    }
    let digest = read_input_digest(&args.input)?;
    let dataset = read_regression(&args.input).map_err(fail)?;
    let opts = RegressionReportOptions {
        alpha: args.alpha,
        score: match args.score {
            ScoreArg::Det => CovScore::Det,
            ScoreArg::Maxdiag => CovScore::MaxDiag,
        },
        n_bins: args.bins,
        quantile_p: args.quantile,
        per_component: args.per_component,
        rescale_msample: args.rescale_msample,
        loo_msample: args.loo_msample,
    };
    let report = build_regression_report(&dataset, &digest, &opts).map_err(fail)?;
    match &args.out {
        Some(path) => write_regression_report(&report, path, args.format.into()).map_err(fail)?,
        None => println!("{}", to_json_string(&report).map_err(fail)?),
    }
    Ok(match report.verdict {
        Verdict::Realistic => EXIT_OK,
        Verdict::NotRealistic => EXIT_NOT_REALISTIC,
    })
}

fn cmd_classification_auc(args: &ClassificationArgs) -> CmdResult {
    if matches!(args.format, FormatArg::CsvBundle) && args.out.is_none() {
        return Err((EXIT_USAGE, "--format csv_bundle requires --out".into()));
    }
    let digest = read_input_digest(&args.input)?;
    let dataset = read_classification(&args.input).map_err(fail)?;
    let kinds = match args.score {
        ScoreKindArg::MaxProb => vec![ScoreKind::MaxProb],
        ScoreKindArg::Entropy => vec![ScoreKind::Entropy],
        ScoreKindArg::WinVar => vec![ScoreKind::WinVar],
        ScoreKindArg::Mi => vec![ScoreKind::Mi],
        ScoreKindArg::All => ScoreKind::ALL.to_vec(),
    };
    let opts = ClassificationReportOptions {
        kinds,
        with_rejection: args.reject,
    };
    let report = build_classification_report(&dataset, &digest, &opts).map_err(fail)?;
    match &args.out {
        Some(path) => {
            write_classification_report(&report, path, args.format.into()).map_err(fail)?
        }
        None => println!("{}", to_json_string(&report).map_err(fail)?),
    }
    Ok(EXIT_OK)
}

fn parse_bias(spec: &str, d: usize) -> Result<Vec<f64>, (u8, String)> {
    let parts: Result<Vec<f64>, _> = spec.split(',').map(|p| p.trim().parse::<f64>()).collect();
    match parts {
        Ok(v) if v.len() == d && v.iter().all(|x| x.is_finite()) => Ok(v),
        Ok(v) => Err((
            EXIT_USAGE,
            format!("--bias needs {d} finite components, got {}", v.len()),
        )),
        Err(e) => Err((EXIT_USAGE, format!("--bias parse error: {e}"))),
    }
}

fn cmd_simulate(args: &SimulateArgs) -> CmdResult {
    let lines: Vec<String> = match args.task {
        TaskArg::Regression => {
            let kind = match args.regime.as_str() {
                "calibrated" => RegressionKind::Calibrated,
                "var_scaled" => RegressionKind::VarScaled { scale: args.scale },
                "misoriented" => RegressionKind::Misoriented,
                "fat_tailed" => RegressionKind::FatTailed { nu: args.nu },
                "biased" => {
                    let bias = match &args.bias {
                        Some(spec) => parse_bias(spec, args.d)?,
                        None => {
                            let mut b = vec![0.0; args.d];
                            b[0] = 1.0;
                            b
                        }
                    };
                    RegressionKind::Biased { bias }
                }
                other => {
                    return Err((
                        EXIT_USAGE,
                        format!(
                            "unknown regression regime {other:?}; expected calibrated, \
                             var_scaled, misoriented, fat_tailed or biased"
                        ),
                    ))
                }
            };
            let regime = RegressionRegime {
                kind,
                d: args.d,
                k: args.k,
                n: args.n,
                seed: args.seed,
            };
            gen_regression(&regime)
                .map_err(fail)?
                .iter()
                .map(regression_line)
                .collect()
        }
        TaskArg::Classification => {
            let kind = match args.regime.as_str() {
                "informative" => ClassificationKind::Informative,
                "uninformative" => ClassificationKind::Uninformative,
                "out_of_data" => ClassificationKind::OutOfData,
                other => {
                    return Err((
                        EXIT_USAGE,
                        format!(
                            "unknown classification regime {other:?}; expected informative, \
                             uninformative or out_of_data"
                        ),
                    ))
                }
            };
            let regime = ClassificationRegime {
                kind,
                c: args.c,
                k: args.k,
                n: args.n,
                seed: args.seed,
            };
            gen_classification(&regime)
                .map_err(fail)?
                .iter()
                .map(classification_line)
                .collect()
        }
    };
    write_lines_atomic(&args.out, lines).map_err(fail)?;
    Ok(EXIT_OK)
}

fn parse_range(spec: &str, name: &str) -> Result<(f64, f64), (u8, String)> {
    let mut it = spec.splitn(2, ':');
    let parse = |s: Option<&str>| {
        s.and_then(|v| v.trim().parse::<f64>().ok())
            .filter(|v| v.is_finite())
    };
    match (parse(it.next()), parse(it.next())) {
        (Some(lo), Some(hi)) if hi >= lo => Ok((lo, hi)),
        _ => Err((
            EXIT_USAGE,
            format!("{name} must be LO:HI with LO <= HI, got {spec:?}"),
        )),
    }
}

fn cmd_nll_grid(args: &NllGridArgs) -> CmdResult {
    let err_range = parse_range(&args.err_range, "--err-range")?;
    let sigma_range = parse_range(&args.sigma_range, "--sigma-range")?;
    let grid = nll_grid(err_range, sigma_range, args.steps).map_err(fail)?;
    let mut csv = String::from("err,sigma,nll,realism\n");
    for p in &grid {
        csv.push_str(&format!("{},{},{},{}\n", p.err, p.sigma, p.nll, p.realism));
    }
    match &args.out {
        Some(path) => write_string_atomic(path, &csv).map_err(fail)?,
        None => print!("{csv}"),
    }
    Ok(EXIT_OK)
}
