use clap::{Args, Parser, Subcommand};
use homlab::study::{self, StudyConfig, StudyKind, StudyReport};
use homlab::Error;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

/// Numerical homogenization studies driven by TOML configs.
#[derive(Parser, Debug)]
#[command(name = "homlab", version)]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Log progress and warnings to stderr.
    #[arg(long, short, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample V^eps and V^0 on a grid along the schedule.
    Families(StudyArgs),
    /// Cell-mean statistics rho1, rho3 at the chosen eta.
    Criterion(StudyArgs),
    /// Local-mean extraction of the limit coefficient.
    Homogenize(StudyArgs),
    /// Multiplier norms of the deviation and the V -> V* norm of its form.
    Norm(StudyArgs),
    /// Resolvent convergence: kappa, |L|, criterion and the resolvent identity.
    Resolvent(StudyArgs),
    /// Neumann-series truncation errors against their bound.
    Neumann(StudyArgs),
    /// L2 -> H1 resolvent difference against the multiplier-norm bound.
    Theorem6(StudyArgs),
    /// Refit the rates of an existing CSV and redraw its plot.
    Report(ReportArgs),
}

#[derive(Args, Debug)]
struct StudyArgs {
    /// Study configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory for the CSV and plot.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct ReportArgs {
    /// CSV written by a study subcommand.
    csv: PathBuf,
    /// SVG path (defaults to the CSV path with an .svg extension).
    #[arg(long)]
    plot: Option<PathBuf>,
}

enum Failure {
    Config(String),
    Numerical(String),
    Io(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_config() {
            Failure::Config(e.to_string())
        } else if matches!(e, Error::Io(_)) {
            Failure::Io(e.to_string())
        } else {
            Failure::Numerical(e.to_string())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .filter_level(if cli.verbose { log::LevelFilter::Info } else { log::LevelFilter::Error })
        .parse_default_env()
        .init();
    if let Some(k) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(k.max(1)).build_global() {
            eprintln!("error: cannot configure {k} threads: {e}");
            return ExitCode::from(1);
        }
    }
    let result = match cli.command {
        Command::Families(a) => run_study(StudyKind::Families, a),
        Command::Criterion(a) => run_study(StudyKind::Criterion, a),
        Command::Homogenize(a) => run_study(StudyKind::Homogenize, a),
        Command::Norm(a) => run_study(StudyKind::Norm, a),
        Command::Resolvent(a) => run_study(StudyKind::Resolvent, a),
        Command::Neumann(a) => run_study(StudyKind::Neumann, a),
        Command::Theorem6(a) => run_study(StudyKind::Theorem6, a),
        Command::Report(a) => run_report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(3)
        }
        Err(Failure::Io(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}

fn run_study(kind: StudyKind, args: StudyArgs) -> Result<(), Failure> {
    let mut cfg = StudyConfig::from_file(&args.config)?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    log::info!("{} study `{}` over {} eps values", kind.name(), cfg.name, cfg.schedule.len());
    let mut report = study::run(kind, &cfg)?;
    if args.seed.is_some() {
        report.comments.push(format!("seed overridden to {}", cfg.seed));
    }
    std::fs::create_dir_all(&args.out).map_err(|e| Failure::Io(format!("{}: {e}", args.out.display())))?;
    let csv = args.out.join(&cfg.output.csv);
    report.write_csv(&csv, &cfg.source, cfg.output.precision)?;
    if let Some(p) = &cfg.output.plot {
        report.write_plot(&args.out.join(p))?;
    }
    summarize(&report, &csv);
    Ok(())
}

fn run_report(args: ReportArgs) -> Result<(), Failure> {
    let text = std::fs::read_to_string(&args.csv).map_err(|e| Failure::Io(format!("{}: {e}", args.csv.display())))?;
    let report = StudyReport::from_csv(&text)?;
    let plot = args.plot.unwrap_or_else(|| args.csv.with_extension("svg"));
    report.write_plot(&plot)?;
    summarize(&report, &args.csv);
    println!("plot: {}", plot.display());
    Ok(())
}

fn summarize(report: &StudyReport, csv: &Path) {
    println!("{} `{}`: {} rows -> {}", report.kind, report.name, report.rows.len(), csv.display());
    for f in &report.fits {
        println!(
            "  {} vs {}: slope {:.4} intercept {:.4} r2 {:.4} ({} rows)",
            f.column, report.abscissa, f.slope, f.intercept, f.r2, f.used
        );
    }
    for c in &report.comments {
        println!("  note: {c}");
    }
}
