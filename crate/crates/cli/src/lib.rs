//! `gtiming`: simulate cohorts, estimate survival curves, run the benchmarks.
//!
//! The binary is a thin wrapper over [`run_args`], which can also be called
//! in-process.

mod config;
mod output;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use gtiming::bench::{
    run_table1, run_worked_example, Table1Config, WorkedExample, WORKED_EXAMPLE_SEED,
};
use gtiming::bootstrap::bootstrap_many;
use gtiming::dgp::{generate, DgpParams};
use gtiming::estimate::{estimate_points, Method, MethodOptions};
use gtiming::io::{read_csv, write_csv_to, write_curves_to};
use gtiming::SurvivalCurveEstimate;

use config::{load_config, BenchExampleConfig, EstimateConfig, SimulateConfig, Table1FileConfig};
use output::{write_atomic, CliError};

#[derive(Debug, Parser)]
#[command(
    name = "gtiming",
    version,
    about = "Counterfactual survival for two-course treatment sequences"
)]
struct Cli {
    /// Worker threads (defaults to all cores). Results do not depend on it.
    #[arg(long, global = true, env = "GTIMING_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic cohort CSV.
    Simulate(SimulateArgs),
    /// Estimate P(T^{a1,a2} > tau) from a cohort CSV.
    Estimate(EstimateArgs),
    /// Reproduce the simulation study or the worked example.
    #[command(subcommand)]
    Bench(BenchCommand),
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// 1 (no censoring) or 2 (with censoring).
    #[arg(long)]
    scenario: Option<u8>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON generator parameters replacing the scenario's.
    #[arg(long)]
    params: Option<PathBuf>,
    /// JSON file with the same keys as the flags.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EstimateArgs {
    /// ipw, ipw-unadj, naive, cc-ipw, gcomp or msm.
    #[arg(long)]
    method: Option<String>,
    /// Comma-separated horizons.
    #[arg(long, value_delimiter = ',')]
    tau: Option<Vec<f64>>,
    /// Bootstrap resamples (0 for none).
    #[arg(long)]
    boot: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long = "in")]
    input: Option<PathBuf>,
    /// JSON output; a CSV with the same stem is written next to it.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Target first treatment (0 or 1).
    #[arg(long)]
    a1: Option<u8>,
    /// Target second treatment (0 or 1).
    #[arg(long)]
    a2: Option<u8>,
    #[arg(long)]
    level: Option<f64>,
    /// Interval width of the discrete-time grid.
    #[arg(long)]
    width: Option<f64>,
    /// Minimum number of grid intervals.
    #[arg(long)]
    intervals: Option<u32>,
    /// Monte Carlo draws for g-computation.
    #[arg(long)]
    mc_draws: Option<u64>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum BenchCommand {
    /// Simulation study for one scenario.
    Table1(Table1Args),
    /// Worked example: cohort summary and three survival curves.
    Example(ExampleArgs),
}

#[derive(Debug, Args)]
struct Table1Args {
    #[arg(long)]
    scenario: Option<u8>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    boot: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    truth_draws: Option<u64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// 1000 replicates with 500 resamples unless overridden.
    #[arg(long)]
    full: bool,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ExampleArgs {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    boot: Option<usize>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code: 0 on success, 1 on runtime failure, 2 on usage errors.
/// Errors are reported as one JSON line on stderr.
pub fn run_args<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return 0;
            }
            return CliError::usage("usage", e.to_string().trim_end()).report();
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => e.report(),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::usage(
                "invalid_value",
                "--threads must be at least 1",
            ));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::runtime("thread_pool", e.to_string()))?;
    pool.install(|| match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Estimate(a) => estimate(a),
        Command::Bench(BenchCommand::Table1(a)) => table1(a),
        Command::Bench(BenchCommand::Example(a)) => example(a),
    })
}

fn required<T>(v: Option<T>, flag: &str) -> Result<T, CliError> {
    v.ok_or_else(|| CliError::usage("missing_argument", format!("--{flag} is required")))
}

fn to_json<T: Serialize>(v: &T) -> Result<Vec<u8>, CliError> {
    let mut s =
        serde_json::to_vec_pretty(v).map_err(|e| CliError::runtime("json", e.to_string()))?;
    s.push(b'\n');
    Ok(s)
}

fn simulate(a: SimulateArgs) -> Result<(), CliError> {
    let cfg: SimulateConfig = load_config(a.config.as_deref())?;
    let scenario = required(a.scenario.or(cfg.scenario), "scenario")?;
    if !matches!(scenario, 1 | 2) {
        return Err(CliError::usage(
            "invalid_value",
            "--scenario must be 1 or 2",
        ));
    }
    let n = required(a.n.or(cfg.n), "n")?;
    let seed = required(a.seed.or(cfg.seed), "seed")?;
    let out = required(a.out.or(cfg.out), "out")?;
    let params = match a.params.or(cfg.params) {
        Some(p) => {
            let text = std::fs::read_to_string(&p)
                .map_err(|e| CliError::usage("io", format!("{}: {e}", p.display())))?;
            DgpParams::from_json(&text)
                .map_err(|e| CliError::usage("invalid_params", e.to_string()))?
        }
        None => DgpParams::scenario(scenario),
    };
    let ds = generate(&params, n, seed)?;
    let mut buf = Vec::new();
    write_csv_to(&ds, &mut buf)?;
    write_atomic(&out, &buf)
}

#[derive(Debug, Serialize)]
struct PointOut {
    method: String,
    tau: f64,
    estimate: f64,
    n_contributing_one_course: usize,
    n_contributing_two_course: usize,
    lo: Option<f64>,
    hi: Option<f64>,
}

#[derive(Debug, Serialize)]
struct EstimateOut {
    method: String,
    a1: bool,
    a2: bool,
    boot: usize,
    level: f64,
    seed: u64,
    n: usize,
    points: Vec<PointOut>,
}

fn flag_bool(v: u8, flag: &str) -> Result<bool, CliError> {
    match v {
        0 => Ok(false),
        1 => Ok(true),
        _ => Err(CliError::usage(
            "invalid_value",
            format!("--{flag} must be 0 or 1"),
        )),
    }
}

/// `out.json` -> `out.csv`; other names get `.csv` appended.
fn sibling_csv(out: &Path) -> PathBuf {
    if out.extension().is_some_and(|e| e == "json") {
        out.with_extension("csv")
    } else {
        let mut s = out.as_os_str().to_owned();
        s.push(".csv");
        PathBuf::from(s)
    }
}

fn estimate(a: EstimateArgs) -> Result<(), CliError> {
    let cfg: EstimateConfig = load_config(a.config.as_deref())?;
    let method_name = required(a.method.or(cfg.method), "method")?;
    let method: Method = method_name
        .parse()
        .map_err(|_| CliError::usage("invalid_value", format!("unknown method `{method_name}`")))?;
    let taus = required(a.tau.or(cfg.tau), "tau")?;
    if taus.is_empty() || taus.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
        return Err(CliError::usage(
            "invalid_value",
            "--tau must list finite, non-negative horizons",
        ));
    }
    let boot = a.boot.or(cfg.boot).unwrap_or(0);
    if boot == 1 {
        return Err(CliError::usage(
            "invalid_value",
            "--boot must be 0 or at least 2",
        ));
    }
    let seed = required(a.seed.or(cfg.seed), "seed")?;
    let input = required(a.input.or(cfg.input), "in")?;
    let out = required(a.out.or(cfg.out), "out")?;
    let a1 = flag_bool(a.a1.or(cfg.a1).unwrap_or(1), "a1")?;
    let a2 = flag_bool(a.a2.or(cfg.a2).unwrap_or(1), "a2")?;
    let level = a.level.or(cfg.level).unwrap_or(0.95);
    if !(level > 0.0 && level < 1.0) {
        return Err(CliError::usage(
            "invalid_value",
            "--level must lie in (0, 1)",
        ));
    }
    let defaults = MethodOptions::default();
    let opts = MethodOptions {
        width: a.width.or(cfg.width).unwrap_or(defaults.width),
        intervals: a.intervals.or(cfg.intervals).unwrap_or(defaults.intervals),
        mc_draws: a.mc_draws.or(cfg.mc_draws).unwrap_or(defaults.mc_draws),
        mc_seed: seed,
    };
    if !(opts.width.is_finite() && opts.width > 0.0) || opts.intervals == 0 || opts.mc_draws == 0 {
        return Err(CliError::usage(
            "invalid_value",
            "--width, --intervals and --mc-draws must be positive",
        ));
    }

    let ds = read_csv(&input)?;
    let points = estimate_points(&ds, method, a1, a2, &taus, &opts)?;
    let bands: Vec<(Option<f64>, Option<f64>)> = if boot >= 2 {
        let estimator = |d: &gtiming::CohortDataset| -> Vec<gtiming::Result<f64>> {
            match estimate_points(d, method, a1, a2, &taus, &opts) {
                Ok(p) => p.into_iter().map(|p| Ok(p.estimate)).collect(),
                Err(e) => {
                    let msg = e.to_string();
                    taus.iter()
                        .map(|_| Err(gtiming::Error::Numerical(msg.clone())))
                        .collect()
                }
            }
        };
        bootstrap_many(&ds, taus.len(), estimator, boot, level, seed)?
            .into_iter()
            .map(|r| r.map(|b| (Some(b.lo), Some(b.hi))))
            .collect::<gtiming::Result<_>>()?
    } else {
        vec![(None, None); taus.len()]
    };

    let result = EstimateOut {
        method: method.name().into(),
        a1,
        a2,
        boot,
        level,
        seed,
        n: ds.n(),
        points: points
            .into_iter()
            .zip(&bands)
            .map(|(p, (lo, hi))| PointOut {
                method: p.method,
                tau: p.tau,
                estimate: p.estimate,
                n_contributing_one_course: p.n_contributing_one_course,
                n_contributing_two_course: p.n_contributing_two_course,
                lo: *lo,
                hi: *hi,
            })
            .collect(),
    };
    let mut curve = SurvivalCurveEstimate::new(
        method.name(),
        taus.clone(),
        result.points.iter().map(|p| p.estimate).collect(),
    );
    if boot >= 2 {
        curve.lo = Some(bands.iter().filter_map(|b| b.0).collect());
        curve.hi = Some(bands.iter().filter_map(|b| b.1).collect());
    }
    let mut csv = Vec::new();
    write_curves_to(&[&curve], &mut csv)?;
    write_atomic(&out, &to_json(&result)?)?;
    write_atomic(&sibling_csv(&out), &csv)
}

fn table1(a: Table1Args) -> Result<(), CliError> {
    let cfg: Table1FileConfig = load_config(a.config.as_deref())?;
    let scenario = required(a.scenario.or(cfg.scenario), "scenario")?;
    if !matches!(scenario, 1 | 2) {
        return Err(CliError::usage(
            "invalid_value",
            "--scenario must be 1 or 2",
        ));
    }
    let base = if a.full || cfg.full.unwrap_or(false) {
        Table1Config::full(scenario)
    } else {
        Table1Config::desk(scenario)
    };
    let config = Table1Config {
        reps: a.reps.or(cfg.reps).unwrap_or(base.reps),
        n: a.n.or(cfg.n).unwrap_or(base.n),
        boot: a.boot.or(cfg.boot).unwrap_or(base.boot),
        seed: a.seed.or(cfg.seed).unwrap_or(base.seed),
        tau: a.tau.or(cfg.tau).unwrap_or(base.tau),
        truth_draws: a
            .truth_draws
            .or(cfg.truth_draws)
            .unwrap_or(base.truth_draws),
        ..base
    };
    if config.reps == 0 || config.n == 0 || config.boot == 1 {
        return Err(CliError::usage(
            "invalid_value",
            "--reps and --n must be positive; --boot must be 0 or at least 2",
        ));
    }
    let out_dir = required(a.out_dir.or(cfg.out_dir), "out-dir")?;
    let report = run_table1(&config)?;
    let stem = format!("table1_scenario{scenario}");
    let mut csv = Vec::new();
    report.write_replicates_csv(&mut csv)?;
    write_atomic(&out_dir.join(format!("{stem}_replicates.csv")), &csv)?;
    write_atomic(&out_dir.join(format!("{stem}.json")), &to_json(&report)?)?;
    write_atomic(
        &out_dir.join(format!("{stem}.md")),
        report.to_markdown().as_bytes(),
    )
}

fn example(a: ExampleArgs) -> Result<(), CliError> {
    let cfg: BenchExampleConfig = load_config(a.config.as_deref())?;
    let seed = a.seed.or(cfg.seed).unwrap_or(WORKED_EXAMPLE_SEED);
    let boot = a.boot.or(cfg.boot).unwrap_or(300);
    if boot < 2 {
        return Err(CliError::usage(
            "invalid_value",
            "--boot must be at least 2",
        ));
    }
    let out_dir = required(a.out_dir.or(cfg.out_dir), "out-dir")?;
    let ex: WorkedExample = run_worked_example(seed, boot)?;
    for c in &ex.curves {
        let mut csv = Vec::new();
        write_curves_to(&[c], &mut csv)?;
        write_atomic(&out_dir.join(format!("example_{}.csv", c.method)), &csv)?;
    }
    let cohort = gtiming::dgp::generate_worked_example(seed)?;
    let mut csv = Vec::new();
    write_csv_to(&cohort, &mut csv)?;
    write_atomic(&out_dir.join("example_cohort.csv"), &csv)?;
    write_atomic(&out_dir.join("example.json"), &to_json(&ex)?)?;
    write_atomic(
        &out_dir.join("example_summary.md"),
        ex.summary.to_markdown().as_bytes(),
    )
}
