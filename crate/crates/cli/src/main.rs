mod artifacts;
mod commands;
mod config;

use artifacts::{resolve_dir, Artifacts};
use clap::{Parser, Subcommand};
use commands::Outcome;
use config::RunConfig;
use qho_kam::KamError;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const EXIT_VALIDATION: u8 = 2;
const EXIT_DIVERGED: u8 = 3;

#[derive(Parser)]
#[command(
    name = "qho-kam",
    version,
    about = "Reducibility of the quasi-periodically driven harmonic oscillator"
)]
struct Cli {
    /// Output directory; overrides the environment variable and the config file.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Worker threads (0 uses every core); overrides the config file.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Weighted Hermite norms at log-spaced indices.
    HermiteCheck {
        #[arg(long)]
        jmax: usize,
        #[arg(long, default_value_t = 2.0)]
        delta1: f64,
        #[arg(long, default_value_t = 40)]
        points: usize,
    },
    /// Decay conditions and weighted matrix elements of the configured potential.
    PotentialCheck {
        #[arg(long)]
        config: PathBuf,
    },
    /// KAM iteration over the configured parameter samples.
    KamRun {
        #[arg(long)]
        config: PathBuf,
    },
    /// Resonance-zone measures and, with a [kam] table, the excised-fraction curve.
    MeasureEstimate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Floquet spectrum and direct evolution against the reduction.
    FloquetVerify {
        #[arg(long)]
        config: PathBuf,
        /// Reduced normal form written by `kam-run`; computed afresh when absent.
        #[arg(long)]
        reduced: Option<PathBuf>,
    },
    /// `kam-run` followed by `floquet-verify`.
    FullPipeline {
        #[arg(long)]
        config: PathBuf,
    },
}

struct Failure {
    code: u8,
    message: String,
}

impl From<KamError> for Failure {
    fn from(e: KamError) -> Self {
        let code = match e {
            KamError::Numeric(_) | KamError::StepTooLarge { .. } | KamError::Accuracy { .. } => {
                EXIT_DIVERGED
            }
            KamError::Io(_) => 1,
            _ => EXIT_VALIDATION,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

fn validation(message: String) -> Failure {
    Failure {
        code: EXIT_VALIDATION,
        message,
    }
}

fn load(path: &Path) -> Result<(RunConfig, Vec<u8>), Failure> {
    let bytes = std::fs::read(path)
        .map_err(|e| validation(format!("cannot read {}: {e}", path.display())))?;
    let text = String::from_utf8(bytes.clone())
        .map_err(|_| validation(format!("{} is not UTF-8", path.display())))?;
    let cfg: RunConfig =
        toml::from_str(&text).map_err(|e| validation(format!("{}: {e}", path.display())))?;
    cfg.validate().map_err(validation)?;
    Ok((cfg, bytes))
}

fn init_pool(threads: usize) -> Result<(), Failure> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Failure {
            code: 1,
            message: format!("thread pool: {e}"),
        })
}

fn execute(cli: Cli) -> Result<Outcome, Failure> {
    let flag_dir = cli.out_dir.as_deref();
    if let Command::HermiteCheck {
        jmax,
        delta1,
        points,
    } = cli.command
    {
        init_pool(cli.threads.unwrap_or(0))?;
        let key = format!("hermite-check jmax={jmax} delta1={delta1} points={points}");
        let mut art =
            Artifacts::new(resolve_dir(flag_dir, None), key.as_bytes()).map_err(KamError::from)?;
        return Ok(commands::hermite_check(&mut art, jmax, delta1, points)?);
    }
    let path = match &cli.command {
        Command::PotentialCheck { config }
        | Command::KamRun { config }
        | Command::MeasureEstimate { config }
        | Command::FloquetVerify { config, .. }
        | Command::FullPipeline { config } => config.clone(),
        Command::HermiteCheck { .. } => unreachable!("handled above"),
    };
    let (cfg, bytes) = load(&path)?;
    init_pool(cli.threads.unwrap_or(cfg.threads))?;
    let mut art = Artifacts::new(resolve_dir(flag_dir, cfg.output_dir.as_deref()), &bytes)
        .map_err(KamError::from)?;
    let out = match cli.command {
        Command::PotentialCheck { .. } => commands::potential_check(&mut art, &cfg)?,
        Command::KamRun { .. } => commands::kam_run(&mut art, &cfg)?,
        Command::MeasureEstimate { .. } => commands::measure_estimate(&mut art, &cfg)?,
        Command::FloquetVerify { reduced, .. } => {
            let imported = match reduced {
                Some(p) => {
                    let text = std::fs::read_to_string(&p)
                        .map_err(|e| validation(format!("cannot read {}: {e}", p.display())))?;
                    let v: serde_json::Value =
                        serde_json::from_str(&text).map_err(|e| validation(e.to_string()))?;
                    Some(qho_kam::ReducedNormalForm64::from_json(&v)?)
                }
                None => None,
            };
            commands::floquet_verify(&mut art, &cfg, imported)?
        }
        Command::FullPipeline { .. } => {
            let kam = commands::kam_run(&mut art, &cfg)?;
            let flo = commands::floquet_verify(&mut art, &cfg, None)?;
            Outcome {
                diverged: kam.diverged,
                summary: serde_json::json!({ "kam": kam.summary, "floquet": flo.summary }),
            }
        }
        Command::HermiteCheck { .. } => unreachable!("handled above"),
    };
    for p in art.written() {
        log::info!("wrote {}", p.display());
    }
    Ok(out)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_VALIDATION } else { 0 });
        }
    };
    match execute(cli) {
        Ok(out) => {
            println!(
                "{}",
                serde_json::to_string_pretty(&out.summary).unwrap_or_default()
            );
            if out.diverged {
                eprintln!("numeric divergence flagged");
                ExitCode::from(EXIT_DIVERGED)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
