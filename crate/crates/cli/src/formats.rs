//! Text artifacts: weight tables, metrics, rates, probe results and spikes.
//!
//! All numbers are written with Rust's locale-independent formatting.

use std::io::Write;

use relnet_core::experiment::{InferenceRecord, ProbeReport, RunMetrics};
use relnet_core::network::{GroupId, Network};
use serde::Serialize;

/// Human-readable name of a group: the input name, or `<population>.E` /
/// `<population>.I`.
pub fn group_label(net: &Network, g: GroupId) -> String {
    match g {
        GroupId::Input(i) => net.inputs[i as usize].name.clone(),
        GroupId::Exc(p) => format!("{}.E", net.populations[p as usize].name),
        GroupId::Inh(p) => format!("{}.I", net.populations[p as usize].name),
    }
}

/// Resolves a label produced by [`group_label`].
pub fn parse_group(net: &Network, label: &str) -> Option<GroupId> {
    if let Some(i) = net.inputs.iter().position(|g| g.name == label) {
        return Some(GroupId::Input(i as u16));
    }
    let (pop, kind) = label.rsplit_once('.')?;
    let p = net.population_index(pop)?;
    match kind {
        "E" => Some(GroupId::Exc(p)),
        "I" => Some(GroupId::Inh(p)),
        _ => None,
    }
}

/// Every projection as a `projection <src> <dst> <kind> <n_pairs>` header
/// followed by `pre,post,weight` rows in (post, pre) order, weights with 17
/// significant digits.
pub fn write_weights<W: Write>(net: &Network, mut out: W) -> std::io::Result<()> {
    for proj in &net.projections {
        writeln!(
            out,
            "projection {} {} {} {}",
            group_label(net, proj.src),
            group_label(net, proj.dst),
            proj.kind.as_str(),
            proj.len()
        )?;
        for (pre, post, w) in proj.pairs() {
            writeln!(out, "{pre},{post},{w:.16e}")?;
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct InferenceRow<'a> {
    example: usize,
    variable: &'a str,
    truth: f64,
    decoded: Option<f64>,
    error: f64,
    resultant: f64,
}

/// `example,variable,truth,decoded,error,resultant`; `decoded` is empty
/// when the population could not be decoded.
pub fn write_inference_csv<W: Write>(records: &[InferenceRecord], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(InferenceRow {
            example: r.example,
            variable: &r.variable,
            truth: r.truth,
            decoded: r.decoded,
            error: r.error,
            resultant: r.resultant,
        })?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct RateRow<'a> {
    population: &'a str,
    neuron_type: &'a str,
    neuron: usize,
    rate_hz: f64,
}

/// Per-neuron rates from the network's current spike counts:
/// `population,neuron_type,neuron,rate_hz`.
pub fn write_rates_csv<W: Write>(net: &Network, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let dt = net.dt();
    for (p, pop) in net.populations.iter().enumerate() {
        for (kind, g) in [("E", GroupId::Exc(p as u16)), ("I", GroupId::Inh(p as u16))] {
            for (neuron, rate_hz) in net.counts.rates(g, dt).into_iter().enumerate() {
                w.serialize(RateRow {
                    population: &pop.name,
                    neuron_type: kind,
                    neuron,
                    rate_hz,
                })?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// `parameter,truth,decoded,error,mean_e_rate,mean_i_rate,half_width,peaks`.
pub fn write_probe_csv<W: Write>(report: &ProbeReport, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in &report.rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct SpikeRow<'a> {
    time_ms: f64,
    population: &'a str,
    neuron: u32,
}

/// Recorded spikes as `time_ms,population,neuron`.
pub fn write_spikes_csv<W: Write>(net: &Network, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let dt = net.dt();
    if let Some(rec) = &net.recorder {
        let labels: Vec<(GroupId, String)> =
            rec.groups.iter().map(|&g| (g, group_label(net, g))).collect();
        for &(step, g, neuron) in &rec.events {
            let label = &labels.iter().find(|l| l.0 == g).expect("recorded group").1;
            w.serialize(SpikeRow {
                time_ms: step as f64 * dt,
                population: label,
                neuron,
            })?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Run summary as pretty-printed JSON.
pub fn write_summary<W: Write>(metrics: &RunMetrics, out: W) -> serde_json::Result<()> {
    serde_json::to_writer_pretty(out, metrics)
}
