//! `sidonlab`: reproducible experiments on quasi-independent sets, meshes,
//! random selections, spectral witnesses and binomial tails.
//!
//! Every subcommand writes one JSON report (stdout or `--out`) and exits 0
//! when all checks pass, 1 when a check fails, 2 on a usage error.

mod commands;
mod config;
mod report;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Serialize, Serializer};

use sidonlab::arith::is_prime;
use sidonlab::growth::GrowthFunction;
use sidonlab::qi::DEFAULT_QI_MAX;
use sidonlab::tails::MIN_TRIALS;

use crate::report::{Report, SCHEMA_VERSION};

#[derive(Debug, Parser)]
#[command(name = "sidonlab", version, about = "Quasi-independent sets, meshes and Sidon-type certificates")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Serialize)]
pub struct GlobalArgs {
    /// Master seed for every random stream.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true, env = "SIDONLAB_THREADS")]
    pub threads: Option<usize>,
    /// key=value file; command-line flags take precedence.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Write the JSON report here instead of stdout.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
    /// Write the subcommand's table as CSV.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub csv: Option<PathBuf>,
    /// Include wall-clock runtime in the report.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub timing: bool,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Decide quasi-independence of a point set or of a level matrix.
    VerifyQi(VerifyQiArgs),
    /// Build the level matrices and the height-1 mesh witnesses.
    Theorem1(Theorem1Args),
    /// Count set points in meshes against a mesh bound.
    MeshReport(MeshReportArgs),
    /// Random selection statistics and the certified freeness search.
    Select(SelectArgs),
    /// Block construction over (Z/pZ)^nu with Pisier ratios and mesh checks.
    Theorem2(Theorem2Args),
    /// Well-spread integer blocks with schedule, spread and mesh checks.
    Theorem3(Theorem3Args),
    /// Flat random subsets of (Z/2Z)^nu and the analyticity witness.
    AnalyticityDemo(AnalyticityArgs),
    /// Sub-Gaussian inequalities against exact binomial tails.
    AppendixCheck(AppendixArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::VerifyQi(_) => "verify-qi",
            Command::Theorem1(_) => "theorem1",
            Command::MeshReport(_) => "mesh-report",
            Command::Select(_) => "select",
            Command::Theorem2(_) => "theorem2",
            Command::Theorem3(_) => "theorem3",
            Command::AnalyticityDemo(_) => "analyticity-demo",
            Command::AppendixCheck(_) => "appendix-check",
        }
    }
}

fn prime(s: &str) -> std::result::Result<u64, String> {
    let p: u64 = s.parse().map_err(|e| format!("{e}"))?;
    if is_prime(p) {
        Ok(p)
    } else {
        Err(format!("{p} is not prime"))
    }
}

fn display<T: std::fmt::Display, S: Serializer>(v: &T, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_str(v)
}

#[derive(Debug, Args, Serialize)]
#[group(required = true, multiple = false)]
pub struct VerifyQiSource {
    /// JSON array of points; each point is an integer, a decimal string, or
    /// an array of them.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Check the columns of the level-`nu` matrix instead.
    #[arg(long)]
    pub level: Option<u32>,
}

#[derive(Debug, Args, Serialize)]
pub struct VerifyQiArgs {
    #[command(flatten)]
    pub source: VerifyQiSource,
    /// Largest input decided exhaustively.
    #[arg(long, default_value_t = DEFAULT_QI_MAX)]
    pub max_size: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct Theorem1Args {
    /// Levels 1..=nu-max; witnesses cover 2 <= k < 2^(nu-max+1).
    #[arg(long, default_value_t = 5)]
    pub nu_max: u32,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundKind {
    /// C k ln(1 + sup l1)
    Sidon,
    /// k w(k)
    Kwk,
    /// k w(kh)
    Kwkh,
    /// ceil(k log2 k / 4), as a lower bound
    Quarter,
}

#[derive(Debug, Args, Serialize)]
pub struct MeshReportArgs {
    /// Point set as for verify-qi; defaults to the level construction.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Levels of the default construction.
    #[arg(long, default_value_t = 4)]
    pub nu_max: u32,
    /// JSON array of {"basis": [...], "h": H} or {"basis": [...], "coefficients": [[...]]}.
    #[arg(long)]
    pub meshes: Option<PathBuf>,
    /// Random box meshes to draw when no mesh file is given.
    #[arg(long, default_value_t = 100)]
    pub count: usize,
    #[arg(long, default_value_t = 4)]
    pub k_max: usize,
    #[arg(long, default_value_t = 2)]
    pub h_max: u32,
    #[arg(long, value_enum, default_value_t = BoundKind::Sidon)]
    pub bound: BoundKind,
    /// Constant of the Sidon-type bound.
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
    /// Growth function for kwk / kwkh.
    #[arg(long, default_value = "double-log:1")]
    #[serde(serialize_with = "display")]
    pub w: GrowthFunction,
    /// Mesh enumeration cap.
    #[arg(long, default_value_t = sidonlab::mesh::DEFAULT_ENUMERATION_CAP)]
    pub cap: u64,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RatioArg {
    Exact,
    OneEighth,
}

#[derive(Debug, Args, Serialize)]
pub struct SelectArgs {
    #[arg(long, default_value = "2", value_parser = prime)]
    pub p: u64,
    #[arg(long, default_value_t = 16)]
    pub nu: u32,
    #[arg(long, default_value_t = 4)]
    pub ell: u64,
    #[arg(long, default_value_t = 1000)]
    pub trials: u64,
    /// Also search for a certified set.
    #[arg(long)]
    pub lemma: bool,
    #[arg(long, value_enum, default_value_t = RatioArg::Exact)]
    pub ratio: RatioArg,
    #[arg(long, default_value_t = sidonlab::selection::DEFAULT_RETRIES)]
    pub retries: u64,
}

#[derive(Debug, Args, Serialize)]
pub struct Theorem2Args {
    #[arg(long, default_value = "3", value_parser = prime)]
    pub p: u64,
    #[arg(long, default_value = "double-log:1")]
    #[serde(serialize_with = "display")]
    pub w: GrowthFunction,
    /// Blocks ell = 2..=ell-max.
    #[arg(long, default_value_t = 6)]
    pub ell_max: u64,
    #[arg(long, default_value_t = sidonlab::theorem2::DEFAULT_NU_CAP)]
    pub nu_cap: u32,
    /// Random meshes to check.
    #[arg(long, default_value_t = 500)]
    pub meshes: usize,
    #[arg(long, default_value_t = 6)]
    pub k_max: usize,
    #[arg(long, default_value_t = 2)]
    pub h_max: u32,
}

#[derive(Debug, Args, Serialize)]
pub struct Theorem3Args {
    /// Number of blocks J.
    #[arg(long, default_value_t = 4)]
    pub j: usize,
    #[arg(long, default_value = "double-log:3000")]
    #[serde(serialize_with = "display")]
    pub w: GrowthFunction,
    /// Comma-separated primes replacing the default schedule.
    #[arg(long, value_delimiter = ',')]
    pub p: Option<Vec<u64>>,
    #[arg(long, value_delimiter = ',')]
    pub nu: Option<Vec<u32>>,
    #[arg(long, value_delimiter = ',')]
    pub ell: Option<Vec<u64>>,
    #[arg(long, default_value_t = sidonlab::theorem3::DEFAULT_GRID_H)]
    pub grid_h: u32,
    #[arg(long, default_value_t = sidonlab::theorem3::DEFAULT_GRID_K)]
    pub grid_k: u32,
    #[arg(long, default_value_t = 500)]
    pub meshes: usize,
    #[arg(long, default_value_t = 5)]
    pub k_max: usize,
    #[arg(long, default_value_t = 3)]
    pub h_max: u32,
    /// Enumeration cap for the well-spread prefixes.
    #[arg(long, default_value_t = sidonlab::mesh::DEFAULT_ENUMERATION_CAP)]
    pub spread_cap: u64,
    #[arg(long, value_delimiter = ',', default_value = "3,5")]
    pub span_primes: Vec<u64>,
    #[arg(long, default_value_t = 4)]
    pub span_max: usize,
    #[arg(long, default_value_t = 25)]
    pub span_trials: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct AnalyticityArgs {
    #[arg(long, default_value_t = 22)]
    pub nu: u32,
    #[arg(long, default_value_t = 40_000)]
    pub ell: u64,
    /// Number of characters in f; defaults to round(log2(sqrt(ell)/20)).
    #[arg(long)]
    pub rho: Option<u32>,
    /// Comma-separated character masks (must be independent).
    #[arg(long, value_delimiter = ',')]
    pub masks: Option<Vec<u64>>,
    #[arg(long, default_value_t = 20)]
    pub retries: u64,
    /// Runs seeds seed, seed+1, ..., seed+sweep-1.
    #[arg(long, default_value_t = 1)]
    pub sweep: u64,
    /// Rows of the CSV spectrum dump (largest |sigma_hat|, first seed).
    #[arg(long, default_value_t = 20)]
    pub top: usize,
    /// Upper bound on the restriction norm by descent (nu <= 8).
    #[arg(long)]
    pub cross_check: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct AppendixArgs {
    /// Monte Carlo trials (only used above the exact-convolution size).
    #[arg(long, default_value_t = MIN_TRIALS)]
    pub trials: u64,
}

/// Errors the user can fix by changing the invocation.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.downcast_ref::<UsageError>().is_some() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<sidonlab::Error>() {
            return match e {
                sidonlab::Error::SearchFailed(_) => 1,
                _ => 2,
            };
        }
    }
    1
}

fn run(args: Vec<String>) -> Result<bool> {
    let (args, provenance) = config::expand(args).map_err(|e| UsageError(format!("{e:#}")))?;
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    if let Some(n) = cli.global.threads {
        if n == 0 {
            return Err(UsageError("--threads must be positive".into()).into());
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the worker pool")?;
    }
    let start = Instant::now();
    let outcome = commands::dispatch(&cli)?;
    let pass = outcome.checks.iter().all(|c| c.pass);
    let mut config = serde_json::to_value(&cli.command)?;
    if let Some(obj) = config.as_object_mut() {
        obj.insert("global".into(), serde_json::to_value(&cli.global)?);
    }
    let report = Report {
        schema_version: SCHEMA_VERSION,
        tool: "sidonlab",
        version: env!("CARGO_PKG_VERSION"),
        command: cli.command.name(),
        seed: cli.global.seed,
        config,
        provenance,
        checks: outcome.checks,
        pass,
        data: outcome.data,
        runtime_secs: cli.global.timing.then(|| start.elapsed().as_secs_f64()),
    };
    for c in &report.checks {
        eprintln!("{} {}", if c.pass { "pass" } else { "FAIL" }, c.name);
    }
    let json = serde_json::to_string_pretty(&report)? + "\n";
    match &cli.global.out {
        Some(path) => fs::write(path, json).with_context(|| format!("writing {}", path.display()))?,
        None => print!("{json}"),
    }
    if let Some(path) = &cli.global.csv {
        match outcome.csv {
            Some(csv) => fs::write(path, csv).with_context(|| format!("writing {}", path.display()))?,
            None => eprintln!("note: {} has no CSV table", report.command),
        }
    }
    Ok(pass)
}

fn main() -> ExitCode {
    match run(std::env::args().collect()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
