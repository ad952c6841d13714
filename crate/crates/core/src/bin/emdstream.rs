use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use emd_stream::estimators::MultigridConfig;
use emd_stream::geometry::Domain;
use emd_stream::harness::experiment::min_grid_experiment;
use emd_stream::harness::{
    capacitated_search, parse_stream, ratio_envelope, run, verify_claims, Algorithm, CapEstimator,
    EnvelopeConfig, Generator, HarnessError, RunConfig, VerifyConfig,
};
use emd_stream::sketch::L0Mode;

/// Streaming earth-mover distance estimation on [Δ]².
#[derive(Debug, Parser)]
#[command(name = "emdstream", version)]
struct Cli {
    /// Side length Δ of the grid (a power of two).
    #[arg(long, global = true, default_value_t = 64)]
    delta: u32,
    #[arg(long, global = true, value_enum, default_value_t = Algorithm::Combined)]
    algorithm: Algorithm,
    #[arg(long, global = true, default_value_t = 0.1)]
    epsilon: f64,
    /// Overall failure probability δ of the sketches.
    #[arg(long = "delta-prob", global = true, default_value_t = 0.05)]
    delta_prob: f64,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Shifted grids per level (default 2·log₂Δ).
    #[arg(long = "grids-per-level", global = true)]
    grids_per_level: Option<usize>,
    /// Update stream, one `<+|-> <S|T> <x> <y> [count]` per line.
    #[arg(long, global = true)]
    stream: Option<PathBuf>,
    /// Write the JSON report here instead of stdout.
    #[arg(long, global = true)]
    report: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Suite {
    RatioEnvelope,
    MinGrid,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Estimate EMD(S, T) for a stream.
    Estimate {
        /// Distinct-point bound for the coreset algorithm.
        #[arg(long)]
        k: Option<usize>,
        /// Count distinct points exactly instead of sketching them.
        #[arg(long)]
        l0_exact: bool,
        /// Include wall time in the report.
        #[arg(long)]
        timing: bool,
    },
    /// Run a seeded experiment suite against the exact oracle.
    Experiment {
        #[arg(long, value_enum, default_value_t = Suite::RatioEnvelope)]
        suite: Suite,
        #[arg(long, default_value_t = 100)]
        instances: usize,
        #[arg(long, default_value_t = 200)]
        n_max: u64,
        #[arg(long, default_value_t = 4)]
        k_max: usize,
        #[arg(long, value_enum)]
        generator: Option<Generator>,
    },
    /// Capacitated k-median by exhaustive search; the stream lists points as S.
    Capkmedian {
        #[arg(long, default_value_t = 2)]
        k: usize,
        #[arg(long)]
        capacity: u64,
        /// Estimator to search with; every one when omitted.
        #[arg(long, value_enum)]
        estimator: Option<CapEstimator>,
    },
    /// Check the grid and matching claims on seeded instances.
    VerifyClaims {
        #[arg(long, default_value_t = 20)]
        instances: usize,
        #[arg(long, default_value_t = 2000)]
        shifts: usize,
        #[arg(long, default_value_t = 100)]
        n_max: u64,
        #[arg(long, default_value_t = 4)]
        k_max: usize,
    },
}

fn read_stream(path: Option<&Path>, domain: Domain) -> Result<Vec<emd_stream::geometry::StreamUpdate>, HarnessError> {
    let path = path.ok_or_else(|| HarnessError::Config("--stream <file> is required".into()))?;
    let text = std::fs::read_to_string(path)
        .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
    Ok(parse_stream(&text, domain)?)
}

fn emit<T: Serialize>(report: &T, path: Option<&Path>) -> Result<(), HarnessError> {
    let json = serde_json::to_string_pretty(report).expect("report serializes");
    match path {
        Some(p) => std::fs::write(p, json + "\n")?,
        None => println!("{json}"),
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<ExitCode, HarnessError> {
    let domain = Domain::new(cli.delta).map_err(|e| HarnessError::Config(e.to_string()))?;
    let mut config = RunConfig::new(domain, cli.algorithm);
    config.epsilon = cli.epsilon;
    config.delta_prob = cli.delta_prob;
    config.seed = cli.seed;
    config.grids_per_level = cli.grids_per_level;
    config.validate()?;
    let report_path = cli.report.as_deref();

    match cli.command {
        Command::Estimate { k, l0_exact, timing } => {
            config.k = k;
            config.timing = timing;
            if l0_exact {
                config.l0_mode = L0Mode::Exact;
            }
            let updates = read_stream(cli.stream.as_deref(), domain)?;
            let report = run(&config, &updates)?;
            if report_path.is_some() {
                println!("estimate {}", report.estimate);
            }
            emit(&report, report_path)?;
        }
        Command::Experiment {
            suite,
            instances,
            n_max,
            k_max,
            generator,
        } => match suite {
            Suite::RatioEnvelope => {
                let mut c = EnvelopeConfig::new(domain, config.seed);
                c.instances = instances;
                c.n_max = n_max;
                c.k_max = k_max;
                c.epsilon = config.epsilon;
                c.delta_prob = config.delta_prob;
                c.generator = generator;
                c.grids_per_level = config.grids_per_level;
                let r = ratio_envelope(&c)?;
                eprintln!(
                    "{}/{} instances inside the envelope; Z/EMD in [{:.3}, {:.3}]",
                    r.summary.in_envelope, r.summary.instances, r.summary.z_ratio_min, r.summary.z_ratio_max
                );
                emit(&r, report_path)?;
            }
            Suite::MinGrid => {
                let r = min_grid_experiment(domain, n_max, k_max, config.seed..config.seed + instances as u64)?;
                eprintln!("fixed grid worse on {:.0}% of seeds", 100.0 * r.fraction_fixed_worse);
                emit(&r, report_path)?;
            }
        },
        Command::Capkmedian {
            k,
            capacity,
            estimator,
        } => {
            let updates = read_stream(cli.stream.as_deref(), domain)?;
            let mut mg = MultigridConfig::new(domain, config.seed);
            mg.epsilon = config.epsilon;
            mg.delta = config.delta_prob;
            if let Some(g) = config.grids_per_level {
                mg.grids_per_level = g;
            }
            let chosen = estimator.map_or(CapEstimator::ALL.to_vec(), |e| vec![e]);
            let results = chosen
                .into_iter()
                .map(|e| capacitated_search(&updates, k, capacity, e, &mg))
                .collect::<Result<Vec<_>, _>>()?;
            emit(&results, report_path)?;
        }
        Command::VerifyClaims {
            instances,
            shifts,
            n_max,
            k_max,
        } => {
            let mut c = VerifyConfig::new(domain, config.seed);
            c.instances = instances;
            c.shifts = shifts;
            c.n_max = n_max;
            c.k_max = k_max;
            let r = verify_claims(&c)?;
            for check in &r.checks {
                eprintln!(
                    "{} {}: {} checked, {} violations",
                    if check.passed { "PASS" } else { "FAIL" },
                    check.name,
                    check.checked,
                    check.violations
                );
            }
            emit(&r, report_path)?;
            if !r.all_passed() {
                return Ok(ExitCode::from(1));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
