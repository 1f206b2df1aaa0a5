use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use mvred::harness::{
    run_campaign, sampler_campaign, scaling_sweep, verify_bench, ExperimentConfig, SamplerParams,
    VerifyParams,
};
use mvred::{CostAccounting, Error, FailureMode, VerifierMode};

#[derive(Parser)]
#[command(
    name = "mvred",
    version,
    about = "Worst-case to average-case reduction experiments for Mv over F_p"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Master seed (overrides the config file).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Trial count (overrides the config file).
    #[arg(long, global = true)]
    trials: Option<u64>,
    /// Worker threads (overrides the config file).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Exit with status 1 when an acceptance threshold is missed.
    #[arg(long = "assert", global = true)]
    assert: bool,
    /// Directory for CSV and JSON reports.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run a campaign described by a config file.
    Run { config: PathBuf },
    /// Measure mean ALG queries across several alphas and fit a log-log slope.
    Sweep {
        config: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        alphas: Vec<f64>,
        #[arg(long, default_value_t = -2.5, allow_negative_numbers = true)]
        slope_min: f64,
        #[arg(long, default_value_t = -1.5, allow_negative_numbers = true)]
        slope_max: f64,
    },
    /// Check the sampler property of the direct-product query graph.
    SamplerCheck(SamplerArgs),
    /// Measure verifier completeness, false accepts and charged cost.
    VerifyBench(VerifyArgs),
}

#[derive(Args)]
struct SamplerArgs {
    #[arg(long, default_value_t = 2)]
    base_size: u64,
    #[arg(long, default_value_t = 8)]
    k: usize,
    #[arg(long, default_value_t = 0.95)]
    c: f64,
    #[arg(long, default_value_t = 0.99)]
    delta: f64,
    /// Fixed density; by default each set draws one satisfying the lemma.
    #[arg(long)]
    density: Option<f64>,
    #[arg(long, default_value_t = 20)]
    sets: usize,
    #[arg(long, default_value_t = 2000)]
    left_samples: u64,
    #[arg(long, default_value_t = 200)]
    per_left: u64,
    /// Sets that must pass under --assert; defaults to 95% of --sets.
    #[arg(long)]
    min_passing: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Probabilistic,
    Exact,
}

#[derive(Clone, Copy, ValueEnum)]
enum AccountingArg {
    Paper,
    Actual,
}

#[derive(Clone, Copy, ValueEnum)]
enum FailureArg {
    UniformWrong,
    PerturbOne,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = 5)]
    modulus: u64,
    #[arg(long, default_value_t = 4)]
    rows: usize,
    #[arg(long, default_value_t = 4)]
    cols: usize,
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    #[arg(long, value_enum, default_value_t = ModeArg::Probabilistic)]
    mode: ModeArg,
    #[arg(long, value_enum, default_value_t = AccountingArg::Paper)]
    accounting: AccountingArg,
    #[arg(long, value_enum, default_value_t = FailureArg::UniformWrong)]
    failure_mode: FailureArg,
}

fn load(path: &Path, common: &Common) -> Result<ExperimentConfig, Error> {
    let mut cfg = ExperimentConfig::from_path(path)?;
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(t) = common.trials {
        cfg.trials = t;
    }
    if let Some(w) = common.workers {
        cfg.workers = w;
    }
    if let Some(o) = &common.out {
        cfg.out_dir = Some(o.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn emit<T: Serialize>(value: &T, out: Option<&Path>, name: &str) -> Result<(), Error> {
    let json = serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.to_string()))?;
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(name), &json)?;
    }
    println!("{json}");
    Ok(())
}

fn execute(cli: Cli) -> Result<Vec<String>, Error> {
    let common = &cli.common;
    match cli.command {
        Command::Run { config } => {
            let cfg = load(&config, common)?;
            let report = run_campaign(&cfg)?;
            println!("{}", report.summary_json()?);
            Ok(report.summary.failures())
        }
        Command::Sweep {
            config,
            alphas,
            slope_min,
            slope_max,
        } => {
            let cfg = load(&config, common)?;
            let table = scaling_sweep(&cfg, &alphas)?;
            emit(&table, None, "sweep.json")?;
            let mut failures = Vec::new();
            if !(slope_min..=slope_max).contains(&table.slope) {
                failures.push(format!(
                    "slope {:.3} outside [{slope_min}, {slope_max}]",
                    table.slope
                ));
            }
            Ok(failures)
        }
        Command::SamplerCheck(a) => {
            let params = SamplerParams {
                base_size: a.base_size,
                k: a.k,
                c: a.c,
                delta: a.delta,
                density: a.density,
                sets: a.sets,
                left_samples: a.left_samples,
                per_left: a.per_left,
                seed: common.seed.unwrap_or(0),
            };
            let report = sampler_campaign(&params)?;
            emit(&report, common.out.as_deref(), "sampler.json")?;
            let need = a.min_passing.unwrap_or((a.sets * 19).div_ceil(20));
            Ok(if report.passing < need {
                vec![format!(
                    "{} of {} sets passed, need {need}",
                    report.passing, a.sets
                )]
            } else {
                vec![]
            })
        }
        Command::VerifyBench(a) => {
            let params = VerifyParams {
                modulus: a.modulus,
                rows: a.rows,
                cols: a.cols,
                epsilon: a.epsilon,
                mode: match a.mode {
                    ModeArg::Probabilistic => VerifierMode::Probabilistic,
                    ModeArg::Exact => VerifierMode::Exact,
                },
                accounting: match a.accounting {
                    AccountingArg::Paper => CostAccounting::PaperModel,
                    AccountingArg::Actual => CostAccounting::Actual,
                },
                failure_mode: match a.failure_mode {
                    FailureArg::UniformWrong => FailureMode::UniformWrong,
                    FailureArg::PerturbOne => FailureMode::PerturbOne,
                },
                trials: common.trials.unwrap_or(10_000),
                seed: common.seed.unwrap_or(0),
            };
            let report = verify_bench(&params)?;
            emit(&report, common.out.as_deref(), "verify.json")?;
            Ok(if report.passed() {
                vec![]
            } else {
                vec!["verifier contract violated".into()]
            })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let assert = cli.common.assert;
    match execute(cli) {
        Ok(failures) => {
            for f in &failures {
                eprintln!("threshold missed: {f}");
            }
            if assert && !failures.is_empty() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
