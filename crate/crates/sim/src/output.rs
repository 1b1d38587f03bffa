//! Result files. Tables are CSV with unit-suffixed column names; metadata
//! and full metrics are JSON. Every file is written to a temporary sibling
//! and renamed into place.

use std::io::{self, Write};
use std::path::Path;

use serde::Serialize;
use tempfile::NamedTempFile;
use v2v_core::{RunMetrics, ScenarioConfig, Scheme};

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// CSV writer over an in-memory buffer.
pub(crate) struct Table {
    writer: csv::Writer<Vec<u8>>,
}

impl Table {
    pub(crate) fn new(header: &[&str]) -> Self {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer
            .write_record(header)
            .expect("writing to memory cannot fail");
        Self { writer }
    }

    pub(crate) fn row<I, S>(&mut self, fields: I)
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer
            .write_record(fields)
            .expect("writing to memory cannot fail");
    }

    pub(crate) fn into_bytes(self) -> Vec<u8> {
        self.writer
            .into_inner()
            .expect("flushing to memory cannot fail")
    }
}

pub const METRICS_HEADER: &[&str] = &[
    "scheme",
    "v",
    "num_pairs",
    "slots",
    "avg_network_power_w",
    "avg_queue_bits",
    "avg_latency_s",
    "reliability",
    "mean_normalized_queue",
    "normalized_queue_std_error",
    "orthogonality_violations",
];

fn metrics_fields(m: &RunMetrics) -> Vec<String> {
    vec![
        m.scheme.to_string(),
        m.lyapunov_v.to_string(),
        m.num_pairs.to_string(),
        m.slots.to_string(),
        m.avg_network_power.to_string(),
        m.avg_queue.to_string(),
        m.avg_latency.to_string(),
        m.reliability.to_string(),
        m.mean_normalized_queue.to_string(),
        m.normalized_queue_std_error.to_string(),
        m.orthogonality_violations.to_string(),
    ]
}

/// One summary row per run.
pub fn metrics_csv<'a>(runs: impl IntoIterator<Item = &'a RunMetrics>) -> Vec<u8> {
    let mut t = Table::new(METRICS_HEADER);
    for m in runs {
        t.row(metrics_fields(m));
    }
    t.into_bytes()
}

/// One row per pair.
pub fn pair_metrics_csv(m: &RunMetrics) -> Vec<u8> {
    let mut t = Table::new(&[
        "pair_id",
        "avg_power_w",
        "avg_queue_bits",
        "reliability",
        "constraint_margin_bits",
        "final_virtual_queue_bits",
    ]);
    for k in 0..m.num_pairs {
        t.row([
            k.to_string(),
            m.per_pair_avg_power[k].to_string(),
            m.per_pair_avg_queue[k].to_string(),
            m.per_pair_reliability[k].to_string(),
            m.constraint_margin[k].to_string(),
            m.final_virtual_queue[k].to_string(),
        ]);
    }
    t.into_bytes()
}

/// `(V, scheme)` rows sorted by V, then scheme name.
pub fn sweep_csv(rows: &[(f64, &RunMetrics)]) -> Vec<u8> {
    let mut sorted: Vec<&(f64, &RunMetrics)> = rows.iter().collect();
    sorted.sort_by(|a, b| {
        a.0.total_cmp(&b.0)
            .then_with(|| a.1.scheme.name().cmp(b.1.scheme.name()))
    });
    let mut t = Table::new(&[
        "v",
        "scheme",
        "avg_power_w",
        "avg_latency_s",
        "avg_queue_bits",
        "reliability",
    ]);
    for (v, m) in sorted {
        t.row([
            v.to_string(),
            m.scheme.to_string(),
            m.avg_network_power.to_string(),
            m.avg_latency.to_string(),
            m.avg_queue.to_string(),
            m.reliability.to_string(),
        ]);
    }
    t.into_bytes()
}

/// Identification of one run inside a metadata record.
#[derive(Debug, Clone, Serialize)]
pub struct RunInfo {
    pub label: String,
    pub scheme: Scheme,
    pub lyapunov_v: f64,
    pub num_pairs: usize,
    pub rng_seed: u64,
    /// Seed pair of each frame's zone formation.
    pub zone_seeds: Vec<usize>,
}

impl RunInfo {
    pub fn new(label: impl Into<String>, config: &ScenarioConfig, metrics: &RunMetrics) -> Self {
        Self {
            label: label.into(),
            scheme: config.scheme,
            lyapunov_v: config.lyapunov_v,
            num_pairs: config.num_pairs,
            rng_seed: config.rng_seed,
            zone_seeds: metrics.zone_seeds.clone(),
        }
    }
}

/// Provenance written next to every set of result files.
#[derive(Debug, Clone, Serialize)]
pub struct Metadata<'a> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'a str,
    pub rng_seed: u64,
    pub config: &'a ScenarioConfig,
    pub runs: Vec<RunInfo>,
}

impl<'a> Metadata<'a> {
    pub fn new(command: &'a str, config: &'a ScenarioConfig, runs: Vec<RunInfo>) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command,
            rng_seed: config.rng_seed,
            config,
            runs,
        }
    }
}

pub fn to_json<T: Serialize>(value: &T) -> io::Result<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(value).map_err(io::Error::other)?;
    out.push(b'\n');
    Ok(out)
}
