use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use lmo_cli::example::{example, EXAMPLE_NAMES};
use lmo_cli::report::{DEFAULT_PHD_POINTS, DEFAULT_PHD_RANGE};
use lmo_cli::{build_report, CliError, DensitySpec, ReportConfig};
use lmo_core::divergence::KldConfig;

/// Labeled multi-object density approximations: validation, reports and
/// bundled examples.
#[derive(Parser)]
#[command(name = "lmo-approx", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a density spec; exit 0 when it is valid after the requested repairs.
    Validate {
        spec: PathBuf,
        /// Report indefinite covariances instead of repairing them.
        #[arg(long)]
        no_fix_pd: bool,
    },
    /// Write cardinality, track, PHD, KLD and cost tables for a spec.
    Report {
        spec: PathBuf,
        #[arg(short, long, default_value = "report")]
        out: PathBuf,
        /// Grid points per axis for 1- and 2-dimensional strata (odd).
        #[arg(long, default_value_t = 401)]
        grid_points: usize,
        /// Grid points per axis for 3-dimensional strata (odd).
        #[arg(long, default_value_t = 121)]
        grid_points_3d: usize,
        /// Monte Carlo samples per stratum above 3 dimensions.
        #[arg(long, default_value_t = 200_000)]
        mc_samples: usize,
        #[arg(long, default_value_t = KldConfig::default().seed)]
        seed: u64,
        /// Skip the divergence tables.
        #[arg(long)]
        skip_kld: bool,
        /// Refuse strata that would need Monte Carlo.
        #[arg(long)]
        no_mc: bool,
        #[arg(long, allow_hyphen_values = true)]
        phd_min: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        phd_max: Option<f64>,
        #[arg(long, default_value_t = DEFAULT_PHD_POINTS)]
        phd_points: usize,
        /// Compare the new bundle with an existing one instead of writing.
        #[arg(long)]
        compare: Option<PathBuf>,
    },
    /// Write a bundled example spec to a file or stdout.
    Example {
        name: String,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
}

fn validate(path: PathBuf, no_fix_pd: bool) -> Result<(), CliError> {
    let mut spec = DensitySpec::load(&path)?;
    if no_fix_pd {
        spec.options.fix_pd = false;
    }
    let prepared = spec.prepare()?;
    println!("spec_sha256: {}", spec.sha256());
    if let Some(total) = prepared.renormalized_from {
        println!("renormalized weights from total {total}");
    }
    for r in &prepared.repairs {
        println!("{r}");
    }
    if prepared.report.is_clean() {
        println!("valid");
        Ok(())
    } else {
        Err(CliError::Invalid(prepared.report.to_string()))
    }
}

fn phd_range(min: Option<f64>, max: Option<f64>) -> Option<(f64, f64)> {
    match (min, max) {
        (None, None) => None,
        (lo, hi) => Some((lo.unwrap_or(DEFAULT_PHD_RANGE.0), hi.unwrap_or(DEFAULT_PHD_RANGE.1))),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Validate { spec, no_fix_pd } => validate(spec, no_fix_pd),
        Command::Report {
            spec,
            out,
            grid_points,
            grid_points_3d,
            mc_samples,
            seed,
            skip_kld,
            no_mc,
            phd_min,
            phd_max,
            phd_points,
            compare,
        } => {
            let doc = DensitySpec::load(&spec)?;
            let cfg = ReportConfig {
                kld: KldConfig {
                    grid_points,
                    grid_points_3d,
                    mc_samples,
                    seed,
                    allow_mc: !no_mc,
                    ..KldConfig::default()
                },
                skip_kld,
                phd_range: phd_range(phd_min, phd_max),
                phd_points,
            };
            let bundle = build_report(&doc, &cfg)?;
            match compare {
                Some(dir) => {
                    bundle.compare(&dir)?;
                    println!("bundle matches {}", dir.display());
                }
                None => {
                    bundle.write(&out)?;
                    for (name, _) in &bundle.files {
                        println!("{}", out.join(name).display());
                    }
                }
            }
            Ok(())
        }
        Command::Example { name, out } => {
            let spec = example(&name).ok_or_else(|| {
                CliError::Spec(format!(
                    "unknown example {name:?}; available: {}",
                    EXAMPLE_NAMES.join(", ")
                ))
            })?;
            match out {
                Some(path) => spec.save(&path),
                None => {
                    print!("{}", spec.to_json_pretty());
                    Ok(())
                }
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = std::env::var("LMO_APPROX_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
    {
        // fails only if a pool already exists
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
