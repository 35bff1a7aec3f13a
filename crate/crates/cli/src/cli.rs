//! `gausteer` command line.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use gausteer_core::homodyne::{measurement_matrix, random_direction, simulate_homodyne};
use gausteer_core::steering::{minimal_witness_prediction, steering_verdict};
use gausteer_core::stats::error_propagation;
use gausteer_core::sweep::{BinSpec, SweepConfig, SweepFamily};
use gausteer_core::witness::{default_max_settings, detect_steering, DetectionConfig, VarianceSource};
use gausteer_core::{CovarianceMatrix, Partition};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{CliError, Result};
use crate::formats::{
    directions_json, format_cm, parse_partition, read_cm, read_gen_config, read_tolerances, write_samples,
    write_text, GenConfig, ToleranceFile,
};
use crate::parallel::run_sweep_parallel;
use crate::report::{render_detection, render_sweep, to_json, Format};
use crate::study::{run_study, StudyConfig, StudyReport};

#[derive(Debug, Parser)]
#[command(name = "gausteer", version, about = "Steering witnesses for Gaussian states from random homodyne settings")]
pub struct Cli {
    /// Master RNG seed.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads for sweeps (default: all cores).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// TOML file with `[tolerances]` and `[solver]` tables.
    #[arg(long, global = true)]
    pub tol_file: Option<PathBuf>,
    /// Output file (default: stdout).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a covariance matrix file.
    Gen(GenArgs),
    /// Steerability verdict, measure and Schur symplectic spectrum.
    Analyze(AnalyzeArgs),
    /// Add random settings until a witness certifies steering.
    Detect(DetectArgs),
    /// Histogram of settings needed against the steering measure.
    Sweep(SweepArgs),
    /// Repetitions needed for a significant witness, or error propagation for given data.
    Stats(StatsArgs),
    /// Simulate homodyne outcomes for random settings.
    Sample(SampleArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum GenFamily {
    Svs,
    Thermal,
    Ghz,
    Random,
    Nonsteerable,
}

#[derive(Debug, clap::Args)]
pub struct GenArgs {
    /// TOML state description; overrides the flags below.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub family: Option<GenFamily>,
    #[arg(long)]
    pub r: Option<f64>,
    #[arg(long)]
    pub a: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub nus: Vec<f64>,
    #[arg(long)]
    pub modes: Option<usize>,
    #[arg(long, default_value_t = 5.0)]
    pub nu_max: f64,
    #[arg(long, default_value_t = 2.0)]
    pub r_max: f64,
    #[arg(long, value_parser = parse_partition)]
    pub partition: Option<Partition>,
}

#[derive(Debug, clap::Args)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub cm: PathBuf,
    #[arg(long, value_parser = parse_partition)]
    pub partition: Partition,
}

#[derive(Debug, clap::Args)]
pub struct DetectArgs {
    #[arg(long)]
    pub cm: PathBuf,
    #[arg(long, value_parser = parse_partition)]
    pub partition: Partition,
    #[arg(long)]
    pub max_settings: Option<usize>,
    /// `exact` or `simulated:<repetitions>`.
    #[arg(long, value_parser = parse_variance_source, default_value = "exact")]
    pub variance_source: VarianceSource,
    #[arg(long, default_value_t = 3.0)]
    pub k_sigma: f64,
    /// Output format; overrides `--format`.
    #[arg(long, value_enum)]
    pub emit: Option<Format>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FamilyArg {
    Svs,
    Random2,
    Ghz3,
}

#[derive(Debug, clap::Args)]
pub struct SweepArgs {
    #[arg(long, value_enum)]
    pub family: FamilyArg,
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
    /// Number of equal-width measure bins over the observed range.
    #[arg(long, default_value_t = 10)]
    pub bins: usize,
    /// Explicit bin edges; overrides `--bins`.
    #[arg(long, value_delimiter = ',')]
    pub edges: Vec<f64>,
    #[arg(long)]
    pub max_settings: Option<usize>,
    #[arg(long)]
    pub r_max: Option<f64>,
    #[arg(long)]
    pub nu_max: Option<f64>,
    #[arg(long)]
    pub a_min: Option<u32>,
    #[arg(long)]
    pub a_max: Option<u32>,
    #[arg(long)]
    pub max_draws: Option<usize>,
    /// Largest tolerated fraction of samples lost to solver failures.
    #[arg(long, default_value_t = 0.01)]
    pub failure_budget: f64,
}

#[derive(Debug, clap::Args)]
pub struct StatsArgs {
    /// Witness coefficients; with `--variances` and `--repetitions` only
    /// propagates errors.
    #[arg(long, value_delimiter = ',')]
    pub coefficients: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    pub variances: Vec<f64>,
    #[arg(long)]
    pub repetitions: Option<usize>,
    #[arg(long, default_value_t = 0.7477)]
    pub target: f64,
    #[arg(long, value_delimiter = ',', default_values_t = [7, 8, 9])]
    pub prefixes: Vec<usize>,
    #[arg(long, default_value_t = 200)]
    pub candidates: usize,
    #[arg(long, default_value_t = 21)]
    pub replicates: usize,
    #[arg(long, default_value_t = 3.0)]
    pub k_sigma: f64,
    #[arg(long, default_value_t = 100)]
    pub n_min: usize,
    #[arg(long, default_value_t = 1_000_000)]
    pub n_max: usize,
    #[arg(long, default_value_t = 10_000)]
    pub resimulations: usize,
    #[arg(long, default_value_t = 1_000)]
    pub resimulation_repetitions: usize,
}

#[derive(Debug, clap::Args)]
pub struct SampleArgs {
    #[arg(long)]
    pub cm: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub settings: usize,
    #[arg(long, default_value_t = 1000)]
    pub repetitions: usize,
    /// Where to write the drawn directions as JSON angle tuples.
    #[arg(long)]
    pub directions_out: Option<PathBuf>,
}

pub fn parse_variance_source(s: &str) -> std::result::Result<VarianceSource, String> {
    if s == "exact" {
        return Ok(VarianceSource::Exact);
    }
    let n = s
        .strip_prefix("simulated:")
        .ok_or_else(|| format!("expected `exact` or `simulated:<n>`, got `{s}`"))?;
    let repetitions: usize = n.parse().map_err(|e| format!("repetitions: {e}"))?;
    if repetitions < 2 {
        return Err("need at least 2 repetitions".into());
    }
    Ok(VarianceSource::Simulated { repetitions })
}

#[derive(Debug, Serialize)]
pub struct AnalysisReport {
    pub modes: usize,
    pub partition: Partition,
    pub steerable: bool,
    pub measure: f64,
    pub schur_symplectic_eigenvalues: Vec<f64>,
    /// `exp(-measure)`, the best second-moment witness value.
    pub minimal_witness_value: f64,
}

struct Context {
    seed: u64,
    workers: Option<usize>,
    tolerances: ToleranceFile,
    out: Option<PathBuf>,
    format: Format,
}

impl Context {
    fn emit(&self, text: &str) -> Result<()> {
        match &self.out {
            Some(path) => write_text(path, text),
            None => {
                let mut out = std::io::stdout().lock();
                let newline = if text.ends_with('\n') { "" } else { "\n" };
                match write!(out, "{text}{newline}").and_then(|_| out.flush()) {
                    Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(CliError::io("stdout", e)),
                    _ => Ok(()),
                }
            }
        }
    }
}

fn gen_config(args: &GenArgs) -> Result<GenConfig> {
    if let Some(path) = &args.config {
        return read_gen_config(path);
    }
    let missing = |what: &str| CliError::Config(format!("--{what} is required for this family"));
    Ok(match args.family.ok_or_else(|| missing("family"))? {
        GenFamily::Svs => GenConfig::Svs { r: args.r.ok_or_else(|| missing("r"))? },
        GenFamily::Ghz => GenConfig::Ghz { a: args.a.ok_or_else(|| missing("a"))? },
        GenFamily::Thermal => {
            if args.nus.is_empty() {
                return Err(missing("nus"));
            }
            GenConfig::Thermal { nus: args.nus.clone() }
        }
        GenFamily::Random => GenConfig::Random {
            modes: args.modes.ok_or_else(|| missing("modes"))?,
            nu_max: args.nu_max,
            r_max: args.r_max,
        },
        GenFamily::Nonsteerable => {
            let p = args.partition.ok_or_else(|| missing("partition"))?;
            GenConfig::Nonsteerable { n_alice: p.n_alice, n_bob: p.n_bob }
        }
    })
}

fn check_partition(gamma: &CovarianceMatrix, part: &Partition) -> Result<()> {
    if part.modes() != gamma.modes() {
        return Err(CliError::Config(format!(
            "partition covers {} modes but the matrix has {}",
            part.modes(),
            gamma.modes()
        )));
    }
    Ok(())
}

fn analyze(ctx: &Context, args: &AnalyzeArgs) -> Result<()> {
    let gamma = read_cm(&args.cm)?;
    check_partition(&gamma, &args.partition)?;
    let verdict = steering_verdict(&gamma, &args.partition)?;
    let prediction = minimal_witness_prediction(&gamma, &args.partition)?;
    ctx.emit(&to_json(&AnalysisReport {
        modes: gamma.modes(),
        partition: args.partition,
        steerable: verdict.steerable,
        measure: verdict.measure,
        schur_symplectic_eigenvalues: verdict.schur_symplectic_eigenvalues,
        minimal_witness_value: prediction.value,
    }))
}

fn detect(ctx: &Context, args: &DetectArgs) -> Result<()> {
    let gamma = read_cm(&args.cm)?;
    check_partition(&gamma, &args.partition)?;
    let config = DetectionConfig {
        max_settings: args.max_settings.unwrap_or_else(|| default_max_settings(gamma.modes())),
        variance_source: args.variance_source,
        k_sigma: args.k_sigma,
        solver: ctx.tolerances.solver,
        tolerances: ctx.tolerances.tolerances,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    let record = detect_steering(&gamma, &args.partition, &config, &mut rng)?;
    log::info!("detected={} after {} settings", record.detected, record.settings_used);
    ctx.emit(&render_detection(&record, args.emit.unwrap_or(ctx.format)))
}

fn sweep(ctx: &Context, args: &SweepArgs) -> Result<()> {
    let family = match args.family {
        FamilyArg::Svs => SweepFamily::Svs,
        FamilyArg::Random2 => SweepFamily::Random2,
        FamilyArg::Ghz3 => SweepFamily::Ghz3,
    };
    if !(0.0..=1.0).contains(&args.failure_budget) {
        return Err(CliError::Config("failure budget must lie in [0, 1]".into()));
    }
    let mut config = SweepConfig::new(family, args.samples, ctx.seed);
    config.bins = if args.edges.is_empty() { BinSpec::Uniform(args.bins) } else { BinSpec::Edges(args.edges.clone()) };
    if let Some(v) = args.max_settings {
        config.max_settings = v;
    }
    if let Some(v) = args.r_max {
        config.r_max = v;
    }
    if let Some(v) = args.nu_max {
        config.nu_max = v;
    }
    if let Some(v) = args.a_min {
        config.ghz_a_min = v;
    }
    if let Some(v) = args.a_max {
        config.ghz_a_max = v;
    }
    if let Some(v) = args.max_draws {
        config.max_draws = v;
    }
    config.solver = ctx.tolerances.solver;
    config.tolerances = ctx.tolerances.tolerances;

    let start = Instant::now();
    let result = run_sweep_parallel(&config, ctx.workers)?;
    log::info!(
        "{} samples in {:.1} s, {} solver failures",
        config.samples,
        start.elapsed().as_secs_f64(),
        result.solver_failures
    );
    ctx.emit(&render_sweep(&result, ctx.format))?;
    let budget = (args.failure_budget * config.samples as f64).floor() as usize;
    if result.solver_failures > budget {
        return Err(CliError::FailureBudget { failures: result.solver_failures, budget });
    }
    Ok(())
}

fn scan_csv(report: &StudyReport) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["settings", "repetitions", "median_bound", "median_z_bar", "median_delta_z", "replicates"])
        .expect("in-memory write");
    for scan in &report.scans {
        for p in &scan.points {
            w.write_record([
                scan.settings.to_string(),
                p.repetitions.to_string(),
                p.median_bound.to_string(),
                p.median_z_bar.to_string(),
                p.median_delta_z.to_string(),
                p.replicates.to_string(),
            ])
            .expect("in-memory write");
        }
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
}

fn stats(ctx: &Context, args: &StatsArgs) -> Result<()> {
    if !args.coefficients.is_empty() || !args.variances.is_empty() || args.repetitions.is_some() {
        let n = args.repetitions.ok_or_else(|| CliError::Config("--repetitions is required".into()))?;
        let estimate = error_propagation(&args.coefficients, &args.variances, n)?;
        return ctx.emit(&to_json(&estimate));
    }
    let config = StudyConfig {
        target_value: args.target,
        prefixes: args.prefixes.clone(),
        candidates: args.candidates,
        replicates: args.replicates,
        k_sigma: args.k_sigma,
        n_min: args.n_min,
        n_max: args.n_max,
        resimulations: args.resimulations,
        resimulation_repetitions: args.resimulation_repetitions,
        seed: ctx.seed,
    };
    let report = run_study(&config, &ctx.tolerances.solver, &ctx.tolerances.tolerances)?;
    match ctx.format {
        Format::Json => ctx.emit(&to_json(&report)),
        Format::Csv => ctx.emit(&scan_csv(&report)),
    }
}

fn sample(ctx: &Context, args: &SampleArgs) -> Result<()> {
    let gamma = read_cm(&args.cm)?;
    let out = ctx.out.as_ref().ok_or_else(|| CliError::Config("sample needs --out".into()))?;
    if args.settings == 0 {
        return Err(CliError::Config("need at least one setting".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    let mut dirs = Vec::with_capacity(args.settings);
    let mut sets = Vec::with_capacity(args.settings);
    for j in 0..args.settings {
        let d = random_direction(gamma.modes(), &mut rng)?;
        let p = measurement_matrix(&d, gamma.modes())?;
        sets.push(simulate_homodyne(&p, &gamma, args.repetitions, j, &mut rng)?);
        dirs.push(d);
    }
    write_samples(out, &sets)?;
    if let Some(path) = &args.directions_out {
        write_text(path, &directions_json(&dirs))?;
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<()> {
    let tolerances = match &cli.tol_file {
        Some(path) => read_tolerances(path)?,
        None => ToleranceFile::default(),
    };
    if cli.workers == Some(0) {
        return Err(CliError::Config("--workers must be positive".into()));
    }
    let ctx = Context { seed: cli.seed, workers: cli.workers, tolerances, out: cli.out, format: cli.format };
    match &cli.command {
        Command::Gen(args) => {
            let gamma = gen_config(args)?.build(ctx.seed)?;
            ctx.emit(&format_cm(&gamma))
        }
        Command::Analyze(args) => analyze(&ctx, args),
        Command::Detect(args) => detect(&ctx, args),
        Command::Sweep(args) => sweep(&ctx, args),
        Command::Stats(args) => stats(&ctx, args),
        Command::Sample(args) => sample(&ctx, args),
    }
}

/// Parses `args` (program name first), runs the verb and returns the exit
/// code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variance_sources() {
        assert_eq!(parse_variance_source("exact").unwrap(), VarianceSource::Exact);
        assert_eq!(
            parse_variance_source("simulated:500").unwrap(),
            VarianceSource::Simulated { repetitions: 500 }
        );
        assert!(parse_variance_source("simulated:1").is_err());
        assert!(parse_variance_source("simulated").is_err());
        assert!(parse_variance_source("noisy:5").is_err());
    }

    #[test]
    fn flags_parse() {
        let cli = Cli::try_parse_from([
            "gausteer", "--seed", "7", "detect", "--cm", "x.csv", "--partition", "1:2", "--variance-source",
            "simulated:100", "--emit", "csv",
        ])
        .unwrap();
        assert_eq!(cli.seed, 7);
        let Command::Detect(d) = cli.command else { panic!("wrong verb") };
        assert_eq!(d.partition, Partition::new(1, 2).unwrap());
        assert_eq!(d.emit, Some(Format::Csv));
    }
}
