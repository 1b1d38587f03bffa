//! Optional per-slot and per-frame trace files.
//!
//! | file               | columns                                                    |
//! |--------------------|------------------------------------------------------------|
//! | `trajectories.csv` | slot, pair_id, tx_x_m, tx_y_m, rx_x_m, rx_y_m              |
//! | `gains.csv`        | slot, tx_pair_id, rx_pair_id, rb_id, gain                  |
//! | `zones.csv`        | frame, zone, pair_ids, rb_ids                              |
//! | `slots.csv`        | slot, pair_id, arrival_bits, power_w, rate_bps, queue_bits, virtual_queue_bits, latency_s |
//!
//! Id lists in `zones.csv` are space separated. Gains are linear power
//! gains including fading.

use std::io;
use std::path::{Path, PathBuf};

use tempfile::NamedTempFile;
use v2v_core::engine::{Observer, SlotView};
use v2v_core::rsu::ZoneAssignment;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DumpOptions {
    pub trajectories: bool,
    pub gains: bool,
    pub zones: bool,
    pub slots: bool,
}

impl DumpOptions {
    pub fn any(&self) -> bool {
        self.trajectories || self.gains || self.zones || self.slots
    }
}

struct Sink {
    writer: csv::Writer<NamedTempFile>,
    dest: PathBuf,
}

impl Sink {
    fn create(dir: &Path, name: &str, header: &[&str]) -> io::Result<Self> {
        let mut writer = csv::Writer::from_writer(NamedTempFile::new_in(dir)?);
        writer.write_record(header)?;
        Ok(Self {
            writer,
            dest: dir.join(name),
        })
    }

    fn finish(self) -> io::Result<()> {
        let tmp = self
            .writer
            .into_inner()
            .map_err(|e| io::Error::other(e.to_string()))?;
        tmp.persist(&self.dest).map_err(|e| e.error)?;
        Ok(())
    }
}

/// Streams the requested traces to CSV files in one directory. Files appear
/// under their final names only after [`TraceDumper::finish`].
pub struct TraceDumper {
    trajectories: Option<Sink>,
    gains: Option<Sink>,
    zones: Option<Sink>,
    slots: Option<Sink>,
    error: Option<io::Error>,
}

impl TraceDumper {
    pub fn create(dir: &Path, options: DumpOptions) -> io::Result<Self> {
        let open = |on: bool, name: &str, header: &[&str]| -> io::Result<Option<Sink>> {
            if on {
                Sink::create(dir, name, header).map(Some)
            } else {
                Ok(None)
            }
        };
        Ok(Self {
            trajectories: open(
                options.trajectories,
                "trajectories.csv",
                &["slot", "pair_id", "tx_x_m", "tx_y_m", "rx_x_m", "rx_y_m"],
            )?,
            gains: open(
                options.gains,
                "gains.csv",
                &["slot", "tx_pair_id", "rx_pair_id", "rb_id", "gain"],
            )?,
            zones: open(
                options.zones,
                "zones.csv",
                &["frame", "zone", "pair_ids", "rb_ids"],
            )?,
            slots: open(
                options.slots,
                "slots.csv",
                &[
                    "slot",
                    "pair_id",
                    "arrival_bits",
                    "power_w",
                    "rate_bps",
                    "queue_bits",
                    "virtual_queue_bits",
                    "latency_s",
                ],
            )?,
            error: None,
        })
    }

    /// Flushes and renames every file, or reports the first write error.
    pub fn finish(self) -> io::Result<()> {
        if let Some(e) = self.error {
            return Err(e);
        }
        for sink in [self.trajectories, self.gains, self.zones, self.slots]
            .into_iter()
            .flatten()
        {
            sink.finish()?;
        }
        Ok(())
    }

    fn record(&mut self, result: csv::Result<()>) {
        if let Err(e) = result {
            self.error
                .get_or_insert_with(|| io::Error::other(e.to_string()));
        }
    }
}

fn join_ids(ids: &[usize]) -> String {
    ids.iter()
        .map(usize::to_string)
        .collect::<Vec<_>>()
        .join(" ")
}

impl Observer for TraceDumper {
    fn on_frame(&mut self, assignment: &ZoneAssignment) {
        let Some(sink) = self.zones.as_mut() else {
            return;
        };
        let mut result = Ok(());
        for (z, (members, rbs)) in assignment.zones.iter().zip(&assignment.rb_sets).enumerate() {
            result = result.and_then(|_| {
                sink.writer.write_record([
                    assignment.frame.to_string(),
                    z.to_string(),
                    join_ids(members),
                    join_ids(rbs),
                ])
            });
        }
        self.record(result);
    }

    fn on_slot(&mut self, view: &SlotView<'_>) {
        let slot = view.slot.to_string();
        let mut result = Ok(());
        if let Some(sink) = self.trajectories.as_mut() {
            for p in view.pairs {
                result = result.and_then(|_| {
                    sink.writer.write_record([
                        slot.clone(),
                        p.id.to_string(),
                        p.tx_position.x.to_string(),
                        p.tx_position.y.to_string(),
                        p.rx_position.x.to_string(),
                        p.rx_position.y.to_string(),
                    ])
                });
            }
        }
        if let Some(sink) = self.gains.as_mut() {
            let ch = view.channel;
            for tx in 0..ch.num_pairs {
                for rx in 0..ch.num_pairs {
                    for rb in 0..ch.num_rbs {
                        result = result.and_then(|_| {
                            sink.writer.write_record([
                                slot.clone(),
                                tx.to_string(),
                                rx.to_string(),
                                rb.to_string(),
                                ch.gain(tx, rx, rb).to_string(),
                            ])
                        });
                    }
                }
            }
        }
        if let Some(sink) = self.slots.as_mut() {
            for (k, p) in view.record.pairs.iter().enumerate() {
                result = result.and_then(|_| {
                    sink.writer.write_record([
                        slot.clone(),
                        k.to_string(),
                        p.arrival.to_string(),
                        p.power.to_string(),
                        p.rate.to_string(),
                        p.queue.to_string(),
                        p.virtual_queue.to_string(),
                        p.latency.to_string(),
                    ])
                });
            }
        }
        self.record(result);
    }
}
