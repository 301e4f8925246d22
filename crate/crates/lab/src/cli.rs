use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::LevelFilter;
use torus_ot_core::rate::RateReport;

use crate::config::{load_experiment, load_suite, SolverKind, SuiteConfig};
use crate::error::LabError;
use crate::experiments::{run_lemma_suite, run_rate_experiment, RateSummary, RunOptions, Sections, SuiteOutput};
use crate::io::{ensure_dir, output_path, rows_to_csv, to_json, write_atomic};
use crate::plot::render_plot;

#[derive(Debug, Parser)]
#[command(name = "torus-ot-lab", version, about = "Empirical transport rates and lemma checks on the flat torus")]
pub struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Monte Carlo rate experiment: CSV of replicates and a JSON rate summary.
    Rate(RateArgs),
    /// Every enabled check of a lemma suite.
    VerifyLemma(RunArgs),
    /// Bias ladders only.
    Bias(RunArgs),
    /// Rosenthal moments and S-sum scalings.
    Fluctuation(RunArgs),
    /// Norm sandwich and weak duality.
    Norms(RunArgs),
    /// Log-log SVG of a rate summary.
    Plot(PlotArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Overrides the seed in the config file.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Omit the timestamp from output names and zero wall-clock fields.
    #[arg(long)]
    pub deterministic_names: bool,
    #[arg(long, env = "TORUS_OT_LAB_JOBS")]
    pub jobs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct RateArgs {
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long, value_enum)]
    pub solver: Option<SolverKind>,
    #[arg(long)]
    pub epsilon: Option<f64>,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    /// Rate summary JSON written by `rate`.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Slope of the dashed guide; defaults to -1/2 for d <= 2 and -1/d otherwise.
    #[arg(long, allow_hyphen_values = true)]
    pub reference_slope: Option<f64>,
}

fn jobs(requested: Option<usize>) -> Result<usize, LabError> {
    match requested {
        Some(0) => Err(LabError::Config("--jobs must be at least 1".into())),
        Some(j) => Ok(j),
        None => Ok(std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)),
    }
}

fn run_rate(args: &RateArgs) -> Result<bool, LabError> {
    let mut cfg = load_experiment(&args.run.config)?;
    if let Some(seed) = args.run.seed {
        cfg.seed = seed;
    }
    if let Some(s) = args.solver {
        cfg.solver = s;
    }
    if args.epsilon.is_some() {
        cfg.epsilon = args.epsilon;
    }
    let opts = RunOptions { jobs: jobs(args.run.jobs)?, deterministic: args.run.deterministic_names };
    let run = run_rate_experiment(&cfg, opts)?;
    ensure_dir(&args.run.out)?;
    let csv = output_path(&args.run.out, &cfg.name, "csv", args.run.deterministic_names);
    let json = output_path(&args.run.out, &cfg.name, "json", args.run.deterministic_names);
    write_atomic(&csv, &rows_to_csv(&run.rows)?)?;
    write_atomic(&json, &to_json(&run.summary)?)?;
    let s = &run.summary;
    println!(
        "{}: slope {:.4} [{:.4}, {:.4}], r^2 {:.4}; band {:?} observed {:.4}: {}",
        s.name,
        s.report.fit.slope,
        s.report.slope_ci.0,
        s.report.slope_ci.1,
        s.report.fit.r_squared,
        s.band.band,
        s.band.observed,
        if s.band.passed { "pass" } else { "FAIL" }
    );
    for c in &s.spot_checks {
        println!("  n = {}: entropic {:.5}, exact {:.5}", c.n, c.entropic_mean, c.exact_mean);
    }
    println!("wrote {} and {}", csv.display(), json.display());
    Ok(s.band.passed)
}

fn run_suite(args: &RunArgs, sections: Sections, suffix: &str) -> Result<bool, LabError> {
    let mut cfg: SuiteConfig = load_suite(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let out: SuiteOutput = run_lemma_suite(&cfg, sections, jobs(args.jobs)?)?;
    ensure_dir(&args.out)?;
    let path = output_path(&args.out, &format!("{}{suffix}", cfg.name), "json", args.deterministic_names);
    write_atomic(&path, &to_json(&out)?)?;
    for r in out.reports.iter().filter(|r| r.is_violated()) {
        eprintln!("violated: {} (lhs {:.6e}, rhs {:.6e}, slack {:.3e})", r.name, r.lhs, r.rhs, r.slack_budget);
    }
    let warned = out.reports.iter().filter(|r| !r.warnings.is_empty()).count();
    if warned > 0 {
        eprintln!("{warned} reports carry warnings (see the JSON, or rerun with -v)");
    }
    for r in out.reports.iter().filter(|r| !r.warnings.is_empty()) {
        for w in &r.warnings {
            log::info!("{}: {w}", r.name);
        }
    }
    println!("{}: {} reports, {} violated; wrote {}", out.name, out.reports.len(), out.violated, path.display());
    Ok(out.violated == 0)
}

fn read_report(path: &Path) -> Result<RateReport, LabError> {
    let text = std::fs::read_to_string(path).map_err(|e| LabError::io(format!("cannot read {}", path.display()), e))?;
    if let Ok(s) = serde_json::from_str::<RateSummary>(&text) {
        return Ok(s.report);
    }
    serde_json::from_str::<RateReport>(&text).map_err(|e| LabError::Config(format!("{}: not a rate summary: {e}", path.display())))
}

fn run_plot(args: &PlotArgs) -> Result<bool, LabError> {
    let report = read_report(&args.input)?;
    let slope = args.reference_slope.unwrap_or(if report.d <= 2 { -0.5 } else { -1.0 / report.d as f64 });
    let svg = render_plot(&report, slope)?;
    if let Some(dir) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        ensure_dir(dir)?;
    }
    write_atomic(&args.out, svg.as_bytes())?;
    println!("wrote {}", args.out.display());
    Ok(true)
}

pub fn execute(cli: &Cli) -> Result<bool, LabError> {
    let only = |f: fn(&mut Sections)| {
        let mut s = Sections::NONE;
        f(&mut s);
        s
    };
    match &cli.command {
        Command::Rate(a) => run_rate(a),
        Command::VerifyLemma(a) => run_suite(a, Sections::ALL, ""),
        Command::Bias(a) => run_suite(a, only(|s| s.bias = true), "-bias"),
        Command::Fluctuation(a) => run_suite(
            a,
            only(|s| {
                s.rosenthal = true;
                s.s_sums = true;
            }),
            "-fluctuation",
        ),
        Command::Norms(a) => run_suite(a, only(|s| s.norms = true), "-norms"),
        Command::Plot(a) => run_plot(a),
    }
}

/// Parses `argv`, runs the command and returns the process exit code:
/// 0 on success, 1 on a violated bound, missed band or runtime failure,
/// 2 on usage or configuration errors.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let level = match cli.verbose {
        0 => LevelFilter::Warn,
        1 => LevelFilter::Info,
        _ => LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new().filter_level(level).parse_default_env().try_init();
    match execute(&cli) {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
