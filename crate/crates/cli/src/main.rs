use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use relnet::commands::{self, Architecture, GlobalOptions, ProtocolName, TrainOptions};
use relnet::CliError;
use relnet_core::coding::RelationKind;

/// Spiking relational networks: train, test, probe and export.
#[derive(Debug, Parser)]
#[command(name = "relnet", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Global {
    /// TOML configuration; missing keys take canonical defaults.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR", default_value = "out")]
    out: PathBuf,
    /// Fraction of the canonical population sizes.
    #[arg(long, global = true, value_name = "FRACTION")]
    scale: Option<f64>,
    #[arg(long, global = true, value_enum)]
    relation: Option<Relation>,
    /// Training examples (train), test examples (test) or restoration
    /// trials (probe).
    #[arg(long, global = true, value_name = "N")]
    examples: Option<usize>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Relation {
    Additive,
    AffineNeg,
    DoubleSquare,
}

impl From<Relation> for RelationKind {
    fn from(r: Relation) -> Self {
        match r {
            Relation::Additive => RelationKind::Additive,
            Relation::AffineNeg => RelationKind::AffineNeg,
            Relation::DoubleSquare => RelationKind::DoubleSquare,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Arch {
    Single,
    ThreeWay,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Protocol {
    Restoration,
    CueIntegration,
    SoftWta,
    MultiPeak,
    IoCurve,
}

impl From<Protocol> for ProtocolName {
    fn from(p: Protocol) -> Self {
        match p {
            Protocol::Restoration => ProtocolName::Restoration,
            Protocol::CueIntegration => ProtocolName::CueIntegration,
            Protocol::SoftWta => ProtocolName::SoftWta,
            Protocol::MultiPeak => ProtocolName::MultiPeak,
            Protocol::IoCurve => ProtocolName::IoCurve,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build a network (or resume a snapshot) and train it.
    Train {
        #[arg(long, value_enum, default_value = "three-way")]
        architecture: Arch,
        /// Continue training from a snapshot.
        #[arg(long, value_name = "SNAPSHOT")]
        resume: Option<PathBuf>,
        /// Write a checkpoint snapshot every N examples.
        #[arg(long, value_name = "N")]
        checkpoint_every: Option<usize>,
        /// Record spikes of these groups, e.g. `A.E,H.I`.
        #[arg(long, value_delimiter = ',', value_name = "GROUPS")]
        record: Vec<String>,
        /// Recording window `FROM:TO` in ms.
        #[arg(long, value_name = "FROM:TO", value_parser = parse_window)]
        record_window: Option<(f64, f64)>,
    },
    /// Inference test on a trained three-way snapshot.
    Test {
        #[arg(long, value_name = "SNAPSHOT")]
        snapshot: PathBuf,
        /// Populations that receive input, e.g. `A,B`.
        #[arg(long, value_delimiter = ',', required = true)]
        provide: Vec<String>,
    },
    /// Single-population stimulus protocols.
    Probe {
        #[arg(long, value_enum)]
        protocol: Protocol,
        /// Trained snapshot; without it a fresh single population is built.
        #[arg(long, value_name = "SNAPSHOT")]
        snapshot: Option<PathBuf>,
        #[arg(long, default_value = "A")]
        population: String,
    },
    /// Write the weight tables of a snapshot.
    Export {
        #[arg(long, value_name = "SNAPSHOT")]
        snapshot: PathBuf,
    },
}

fn parse_window(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(':').ok_or("expected FROM:TO")?;
    let from: f64 = a.parse().map_err(|e| format!("{e}"))?;
    let to: f64 = b.parse().map_err(|e| format!("{e}"))?;
    if from < to {
        Ok((from, to))
    } else {
        Err("FROM must be less than TO".into())
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let global = GlobalOptions {
        config: cli.global.config,
        seed: cli.global.seed,
        out: cli.global.out,
        scale: cli.global.scale,
        relation: cli.global.relation.map(Into::into),
        examples: cli.global.examples,
    };
    match cli.command {
        Command::Train {
            architecture,
            resume,
            checkpoint_every,
            record,
            record_window,
        } => {
            let opts = TrainOptions {
                architecture: match architecture {
                    Arch::Single => Architecture::Single,
                    Arch::ThreeWay => Architecture::ThreeWay,
                },
                resume,
                checkpoint_every,
                record,
                record_window,
            };
            commands::train(&global, &opts)?;
        }
        Command::Test { snapshot, provide } => {
            commands::test(&global, &snapshot, &provide)?;
        }
        Command::Probe {
            protocol,
            snapshot,
            population,
        } => {
            let (_, report) = commands::probe(&global, snapshot.as_deref(), &population, protocol.into())?;
            if report.untrained {
                eprintln!("warning: population {population} shows no learned tuning");
            }
        }
        Command::Export { snapshot } => {
            commands::export(&global, &snapshot)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
