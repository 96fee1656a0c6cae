//! File formats, snapshots, manifests and the command-line driver.

use std::path::Path;
use std::process::Command;

use relnet::commands::{self, Architecture, GlobalOptions, ProtocolName, TrainOptions};
use relnet::manifest::{verify_manifest, MANIFEST_NAME};
use relnet::snapshot::{decode_snapshot, encode_snapshot, FORMAT_VERSION};
use relnet::{formats, CliError};
use relnet_core::experiment::{run_inference_test, run_training};
use relnet_core::{Network, NetworkConfig};

fn tiny_config(seed: u64) -> NetworkConfig {
    let mut c = NetworkConfig::scaled(0.0625);
    c.seed = seed;
    c.schedule.t_example = 100.0;
    c.schedule.t_test = 100.0;
    c.schedule.n_train = 4;
    c.schedule.n_test = 3;
    c
}

fn write_config(dir: &Path, text: &str) -> std::path::PathBuf {
    let path = dir.join("config.in.toml");
    std::fs::write(&path, text).unwrap();
    path
}

const TINY_TOML: &str = "scale = 0.0625\nseed = 3\n[schedule]\nt_example = 100.0\nt_test = 100.0\nn_train = 3\nn_test = 2\n";

fn global(out: &Path) -> GlobalOptions {
    GlobalOptions {
        out: out.to_path_buf(),
        ..GlobalOptions::default()
    }
}

#[test]
fn snapshot_round_trip_is_byte_identical() {
    let mut net = Network::three_way(&tiny_config(1)).unwrap();
    run_training(&mut net, 2, |_, _| {}).unwrap();
    let bytes = encode_snapshot(&net);
    let back = decode_snapshot(&bytes, Path::new("mem")).unwrap();
    assert_eq!(back, net);
    assert_eq!(encode_snapshot(&back), bytes);
}

#[test]
fn corrupt_snapshots_are_rejected() {
    let net = Network::single_population(&tiny_config(1)).unwrap();
    let bytes = encode_snapshot(&net);
    let mut flipped = bytes.clone();
    let k = flipped.len() - 10;
    flipped[k] ^= 0x01;
    let err = decode_snapshot(&flipped, Path::new("mem")).unwrap_err();
    assert!(err.to_string().contains("digest mismatch"), "{err}");

    let mut versioned = bytes.clone();
    versioned[8..12].copy_from_slice(&(FORMAT_VERSION + 1).to_le_bytes());
    let err = decode_snapshot(&versioned, Path::new("mem")).unwrap_err();
    assert!(err.to_string().contains("version"), "{err}");

    assert!(decode_snapshot(&bytes[..20], Path::new("mem")).is_err());
}

#[test]
fn resumed_training_matches_uninterrupted_training() {
    let config = tiny_config(11);
    let mut straight = Network::three_way(&config).unwrap();
    run_training(&mut straight, 6, |_, _| {}).unwrap();

    let mut first = Network::three_way(&config).unwrap();
    run_training(&mut first, 3, |_, _| {}).unwrap();
    let mut resumed = decode_snapshot(&encode_snapshot(&first), Path::new("mem")).unwrap();
    run_training(&mut resumed, 3, |_, _| {}).unwrap();

    assert_eq!(straight.projections, resumed.projections);
    assert_eq!(straight.populations, resumed.populations);
    assert_eq!(straight.traces, resumed.traces);

    let a = run_inference_test(&mut straight, &["A", "B"], 2).unwrap();
    let b = run_inference_test(&mut resumed, &["A", "B"], 2).unwrap();
    let mut csv_a = Vec::new();
    let mut csv_b = Vec::new();
    formats::write_inference_csv(&a.inference, &mut csv_a).unwrap();
    formats::write_inference_csv(&b.inference, &mut csv_b).unwrap();
    assert_eq!(csv_a, csv_b);
}

#[test]
fn weight_export_format() {
    let net = Network::single_population(&tiny_config(2)).unwrap();
    let mut out = Vec::new();
    formats::write_weights(&net, &mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    let mut lines = text.lines();
    let mut headers = 0;
    while let Some(line) = lines.next() {
        let parts: Vec<&str> = line.split(' ').collect();
        assert_eq!(parts[0], "projection", "{line}");
        assert_eq!(parts.len(), 5);
        let n: usize = parts[4].parse().unwrap();
        let mut last = None;
        for _ in 0..n {
            let row: Vec<&str> = lines.next().unwrap().split(',').collect();
            let (pre, post): (u32, u32) = (row[0].parse().unwrap(), row[1].parse().unwrap());
            assert!(last < Some((post, pre)));
            last = Some((post, pre));
            let mantissa = row[2].split('e').next().unwrap().replace(['.', '-'], "");
            assert_eq!(mantissa.len(), 17, "{}", row[2]);
            let _: f64 = row[2].parse().unwrap();
        }
        headers += 1;
    }
    assert_eq!(headers, net.projections.len());
    assert!(text.starts_with("projection A.E A.E EE "));
}

#[test]
fn training_command_is_deterministic_and_closed() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), TINY_TOML);
    let run = |name: &str| {
        let out = tmp.path().join(name);
        let g = GlobalOptions {
            config: Some(cfg.clone()),
            seed: Some(7),
            ..global(&out)
        };
        let opts = TrainOptions {
            record: vec!["A.E".into(), "H.I".into()],
            checkpoint_every: Some(2),
            ..TrainOptions::default()
        };
        commands::train(&g, &opts).unwrap();
        out
    };
    let a = run("a");
    let b = run("b");
    let ma = verify_manifest(&a).unwrap();
    let mb = verify_manifest(&b).unwrap();
    assert_eq!(ma, mb);
    assert_eq!(ma.seed, 7);
    assert_eq!(ma.config.schedule.n_train, 3);
    let names: Vec<&str> = ma.artifacts.iter().map(|x| x.name.as_str()).collect();
    for expected in ["checkpoint-2.bin", "config.toml", "rates.csv", "snapshot.bin", "spikes.csv", "summary.json"] {
        assert!(names.contains(&expected), "{names:?}");
    }
    for name in &names {
        assert_eq!(std::fs::read(a.join(name)).unwrap(), std::fs::read(b.join(name)).unwrap(), "{name}");
    }
    let spikes = std::fs::read_to_string(a.join("spikes.csv")).unwrap();
    assert!(spikes.starts_with("time_ms,population,neuron\n"));

    std::fs::write(a.join("stray.txt"), "x").unwrap();
    assert!(verify_manifest(&a).is_err());
    std::fs::remove_file(a.join("stray.txt")).unwrap();
    std::fs::write(a.join("rates.csv"), "tampered").unwrap();
    assert!(verify_manifest(&a).is_err());
}

#[test]
fn test_probe_and_export_commands() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), TINY_TOML);
    let train_dir = tmp.path().join("train");
    let g = GlobalOptions {
        config: Some(cfg.clone()),
        ..global(&train_dir)
    };
    commands::train(&g, &TrainOptions::default()).unwrap();
    let snap = train_dir.join(commands::SNAPSHOT_NAME);

    let test_dir = tmp.path().join("test");
    commands::test(&global(&test_dir), &snap, &["A".into(), "B".into()]).unwrap();
    let metrics = std::fs::read_to_string(test_dir.join("metrics.csv")).unwrap();
    let mut lines = metrics.lines();
    assert_eq!(lines.next(), Some("example,variable,truth,decoded,error,resultant"));
    assert_eq!(lines.count(), 2 * 3);
    verify_manifest(&test_dir).unwrap();

    let flagged = GlobalOptions {
        seed: Some(1),
        ..global(&test_dir)
    };
    assert!(matches!(commands::test(&flagged, &snap, &["A".into()]), Err(CliError::Usage(_))));

    let probe_dir = tmp.path().join("probe");
    let (_, report) = commands::probe(
        &GlobalOptions {
            examples: Some(2),
            ..global(&probe_dir)
        },
        Some(&snap),
        "A",
        ProtocolName::Restoration,
    )
    .unwrap();
    assert_eq!(report.rows.len(), 2);
    let csv = std::fs::read_to_string(probe_dir.join("probe-restoration.csv")).unwrap();
    assert!(csv.starts_with("parameter,truth,decoded,error,mean_e_rate,mean_i_rate,half_width,peaks\n"));

    let export_dir = tmp.path().join("export");
    commands::export(&global(&export_dir), &snap).unwrap();
    let weights = std::fs::read_to_string(export_dir.join("weights.txt")).unwrap();
    assert_eq!(weights.lines().filter(|l| l.starts_with("projection ")).count(), 34);
    assert!(export_dir.join(MANIFEST_NAME).exists());
}

#[test]
fn architecture_option_selects_network() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), TINY_TOML);
    let out = tmp.path().join("single");
    let g = GlobalOptions {
        config: Some(cfg),
        examples: Some(1),
        ..global(&out)
    };
    let opts = TrainOptions {
        architecture: Architecture::Single,
        ..TrainOptions::default()
    };
    commands::train(&g, &opts).unwrap();
    let net = relnet::read_snapshot(&out.join(commands::SNAPSHOT_NAME)).unwrap();
    assert_eq!(net.populations.len(), 1);
    assert_eq!(net.examples_trained, 1);
}

fn relnet_bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_relnet"))
}

#[test]
fn exit_status_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let ok = write_config(tmp.path(), TINY_TOML);
    let status = relnet_bin()
        .args(["train", "--examples", "1", "--config"])
        .arg(&ok)
        .arg("--out")
        .arg(tmp.path().join("ok"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));

    let bad = tmp.path().join("bad.toml");
    std::fs::write(&bad, "[neuron.excitatory]\ntau_mem = -1.0\n").unwrap();
    let out = relnet_bin()
        .args(["train", "--config"])
        .arg(&bad)
        .arg("--out")
        .arg(tmp.path().join("bad"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("neuron.excitatory.tau_mem"));

    let status = relnet_bin().args(["train", "--no-such-flag"]).status().unwrap();
    assert_eq!(status.code(), Some(1));

    let diverging = tmp.path().join("diverging.toml");
    std::fs::write(&diverging, format!("{TINY_TOML}[connectivity]\nw_input_ei = 6.8e307\n")).unwrap();
    let div_dir = tmp.path().join("div");
    let status = relnet_bin()
        .args(["train", "--config"])
        .arg(&diverging)
        .arg("--out")
        .arg(&div_dir)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
    assert!(div_dir.join(commands::DIVERGED_NAME).exists());
    verify_manifest(&div_dir).unwrap();
}
