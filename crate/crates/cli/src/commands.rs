//! The `train`, `test`, `probe` and `export` commands.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use relnet_core::coding::RelationKind;
use relnet_core::experiment::{
    probe_single_population, run_inference_test, run_training, Cue, ProbeProtocol, ProbeReport,
    ProbeSettings, RunMetrics,
};
use relnet_core::network::SpikeRecorder;
use relnet_core::{Network, NetworkConfig};

use crate::config::{load_config, render_config};
use crate::error::{CliError, CliResult};
use crate::formats;
use crate::manifest::{write_manifest, RunManifest};
use crate::snapshot::{read_snapshot, write_snapshot};

pub const SNAPSHOT_NAME: &str = "snapshot.bin";
pub const DIVERGED_NAME: &str = "diverged.bin";

/// Options shared by all commands.
#[derive(Debug, Clone, Default)]
pub struct GlobalOptions {
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub out: PathBuf,
    pub scale: Option<f64>,
    pub relation: Option<RelationKind>,
    pub examples: Option<usize>,
}

impl GlobalOptions {
    /// The configuration file (or canonical defaults) with command-line
    /// overrides applied.
    pub fn resolve_config(&self) -> CliResult<NetworkConfig> {
        let mut config = match &self.config {
            Some(path) => load_config(path)?,
            None => NetworkConfig::default(),
        };
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(scale) = self.scale {
            config.scale = scale;
        }
        if let Some(relation) = self.relation {
            config.schedule.relation = relation;
        }
        if let Some(n) = self.examples {
            config.schedule.n_train = n;
        }
        config.validate()?;
        Ok(config)
    }

    /// Rejects flags that would change a network loaded from a snapshot.
    fn forbid_network_flags(&self, command: &str) -> CliResult<()> {
        let set = [
            ("--config", self.config.is_some()),
            ("--seed", self.seed.is_some()),
            ("--scale", self.scale.is_some()),
            ("--relation", self.relation.is_some()),
        ];
        match set.iter().find(|s| s.1) {
            Some((flag, _)) => Err(CliError::Usage(format!(
                "{flag} cannot be used with {command} on a snapshot; the snapshot carries its configuration"
            ))),
            None => Ok(()),
        }
    }

    fn out_dir(&self) -> CliResult<&Path> {
        std::fs::create_dir_all(&self.out).map_err(|e| CliError::io(&self.out, e))?;
        Ok(&self.out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Architecture {
    Single,
    #[default]
    ThreeWay,
}

#[derive(Debug, Clone, Default)]
pub struct TrainOptions {
    pub architecture: Architecture,
    pub resume: Option<PathBuf>,
    /// Write `checkpoint-<examples>.bin` every this many examples.
    pub checkpoint_every: Option<usize>,
    /// Group labels such as `A.E` whose spikes are recorded.
    pub record: Vec<String>,
    /// Recording window in ms of simulated time since the network was built.
    pub record_window: Option<(f64, f64)>,
}

fn create(dir: &Path, name: &str) -> CliResult<BufWriter<File>> {
    let path = dir.join(name);
    File::create(&path)
        .map(BufWriter::new)
        .map_err(|e| CliError::io(path, e))
}

fn write_csv<F>(dir: &Path, name: &str, f: F) -> CliResult<()>
where
    F: FnOnce(BufWriter<File>) -> csv::Result<()>,
{
    f(create(dir, name)?).map_err(|e| CliError::io(dir.join(name), std::io::Error::other(e)))
}

fn write_metrics(dir: &Path, net: &Network, metrics: &RunMetrics) -> CliResult<()> {
    let path = dir.join("summary.json");
    formats::write_summary(metrics, create(dir, "summary.json")?)
        .map_err(|e| CliError::io(path, std::io::Error::other(e)))?;
    write_csv(dir, "rates.csv", |w| formats::write_rates_csv(net, w))
}

fn write_config(dir: &Path, config: &NetworkConfig) -> CliResult<()> {
    let path = dir.join("config.toml");
    std::fs::write(&path, render_config(config)).map_err(|e| CliError::io(path, e))
}

fn attach_recorder(net: &mut Network, opts: &TrainOptions) -> CliResult<()> {
    if opts.record.is_empty() {
        return Ok(());
    }
    let groups = opts
        .record
        .iter()
        .map(|label| {
            formats::parse_group(net, label)
                .ok_or_else(|| CliError::Usage(format!("unknown group `{label}` in --record")))
        })
        .collect::<CliResult<Vec<_>>>()?;
    let (from, to) = opts.record_window.unwrap_or((0.0, f64::INFINITY));
    let dt = net.dt();
    let to_step = if to.is_finite() { (to / dt).round() as u64 } else { u64::MAX };
    net.recorder = Some(SpikeRecorder {
        groups,
        from_step: (from / dt).round() as u64,
        to_step,
        events: Vec::new(),
    });
    Ok(())
}

/// Builds (or resumes) a network and trains it.
pub fn train(global: &GlobalOptions, opts: &TrainOptions) -> CliResult<RunManifest> {
    let (mut net, n_train) = match &opts.resume {
        Some(path) => {
            global.forbid_network_flags("train --resume")?;
            let net = read_snapshot(path)?;
            let n = global.examples.unwrap_or(net.config.schedule.n_train);
            (net, n)
        }
        None => {
            let config = global.resolve_config()?;
            let net = match opts.architecture {
                Architecture::Single => Network::single_population(&config)?,
                Architecture::ThreeWay => Network::three_way(&config)?,
            };
            let n = config.schedule.n_train;
            (net, n)
        }
    };
    let dir = global.out_dir()?;
    write_config(dir, &net.config)?;
    attach_recorder(&mut net, opts)?;
    log::info!("training {n_train} examples: {}", net.config.describe());

    let mut checkpoint_error = None;
    let result = run_training(&mut net, n_train, |info, net| {
        let done = info.index + 1;
        if let Some(every) = opts.checkpoint_every.filter(|&e| e > 0) {
            if done % every as u64 == 0 && checkpoint_error.is_none() {
                let path = dir.join(format!("checkpoint-{done}.bin"));
                if let Err(e) = write_snapshot(net, &path) {
                    checkpoint_error = Some(e);
                }
            }
        }
        if done % 500 == 0 {
            log::info!("{done} examples, mean E rates {:?}", info.mean_e_rates);
        }
    });
    let command = if opts.resume.is_some() { "train --resume" } else { "train" };
    let metrics = match result {
        Ok(m) => m,
        Err(e) => {
            if e.is_numeric() {
                write_snapshot(&net, &dir.join(DIVERGED_NAME))?;
                write_manifest(dir, RunManifest::new(command, &net.config))?;
            }
            return Err(e.into());
        }
    };
    if let Some(e) = checkpoint_error {
        return Err(e);
    }
    write_metrics(dir, &net, &metrics)?;
    if net.recorder.is_some() {
        write_csv(dir, "spikes.csv", |w| formats::write_spikes_csv(&net, w))?;
    }
    write_snapshot(&net, &dir.join(SNAPSHOT_NAME))?;
    write_manifest(dir, RunManifest::new(command, &net.config))
}

/// Inference test on a trained three-way snapshot; `provide` lists the
/// populations that receive input.
pub fn test(global: &GlobalOptions, snapshot: &Path, provide: &[String]) -> CliResult<RunManifest> {
    global.forbid_network_flags("test")?;
    let mut net = read_snapshot(snapshot)?;
    let n_test = global.examples.unwrap_or(net.config.schedule.n_test);
    let provided: Vec<&str> = provide.iter().map(String::as_str).collect();
    let metrics = run_inference_test(&mut net, &provided, n_test)?;
    let dir = global.out_dir()?;
    write_config(dir, &net.config)?;
    write_csv(dir, "metrics.csv", |w| formats::write_inference_csv(&metrics.inference, w))?;
    let path = dir.join("test-summary.json");
    formats::write_summary(&metrics, create(dir, "test-summary.json")?)
        .map_err(|e| CliError::io(path, std::io::Error::other(e)))?;
    write_manifest(dir, RunManifest::new(&format!("test --provide {}", provide.join(",")), &net.config))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProtocolName {
    Restoration,
    CueIntegration,
    SoftWta,
    MultiPeak,
    IoCurve,
}

impl ProtocolName {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "restoration" => Self::Restoration,
            "cue-integration" => Self::CueIntegration,
            "soft-wta" => Self::SoftWta,
            "multi-peak" => Self::MultiPeak,
            "io-curve" => Self::IoCurve,
            _ => return None,
        })
    }
}

/// Default stimulus set of each protocol at the training peak rate.
/// `trials` sets the number of restoration trials.
pub fn default_protocol(name: ProtocolName, peak_rate: f64, trials: usize) -> ProbeProtocol {
    match name {
        ProtocolName::Restoration => ProbeProtocol::Restoration {
            trials,
            mask_fraction: 0.32,
            peak_rate,
        },
        ProtocolName::CueIntegration => ProbeProtocol::CueIntegration {
            main: Cue { value: 0.5, peak_rate },
            side: Cue {
                value: 0.4,
                peak_rate: 0.5 * peak_rate,
            },
        },
        ProtocolName::SoftWta => ProbeProtocol::SoftWta {
            strong: Cue { value: 0.5, peak_rate },
            weak: Cue {
                value: 0.0,
                peak_rate: 0.5 * peak_rate,
            },
        },
        ProtocolName::MultiPeak => ProbeProtocol::MultiPeak {
            center: 0.5,
            peak_rate,
            separations: (0..=20).map(|k| 0.025 * k as f64).collect(),
        },
        ProtocolName::IoCurve => ProbeProtocol::IoCurve {
            center: 0.5,
            peak_rates: vec![2.0, 5.0, 10.0, 20.0, 50.0, 100.0],
        },
    }
}

/// Runs a probe protocol on `population` of a snapshot, or of a freshly
/// built single population when no snapshot is given.
pub fn probe(
    global: &GlobalOptions,
    snapshot: Option<&Path>,
    population: &str,
    protocol: ProtocolName,
) -> CliResult<(RunManifest, ProbeReport)> {
    let mut net = match snapshot {
        Some(path) => {
            global.forbid_network_flags("probe")?;
            read_snapshot(path)?
        }
        None => Network::single_population(&global.resolve_config()?)?,
    };
    let pop = net
        .population_index(population)
        .ok_or_else(|| CliError::Usage(format!("no population `{population}`")))?;
    let protocol = default_protocol(protocol, net.config.coding.peak_rate, global.examples.unwrap_or(50));
    let report = probe_single_population(&mut net, pop, &protocol, &ProbeSettings::default())?;
    let dir = global.out_dir()?;
    write_config(dir, &net.config)?;
    let name = format!("probe-{}.csv", report.protocol);
    write_csv(dir, &name, |w| formats::write_probe_csv(&report, w))?;
    let command = format!("probe --protocol {} --population {population}", report.protocol);
    let manifest = write_manifest(dir, RunManifest::new(&command, &net.config))?;
    Ok((manifest, report))
}

/// Writes the weight tables of a snapshot.
pub fn export(global: &GlobalOptions, snapshot: &Path) -> CliResult<RunManifest> {
    global.forbid_network_flags("export")?;
    let net = read_snapshot(snapshot)?;
    let dir = global.out_dir()?;
    let path = dir.join("weights.txt");
    formats::write_weights(&net, create(dir, "weights.txt")?).map_err(|e| CliError::io(path, e))?;
    write_config(dir, &net.config)?;
    write_manifest(dir, RunManifest::new("export", &net.config))
}
