//! Two-timescale simulation loop.
//!
//! At the start of every frame of `T0` slots the RSU recomputes zones and RB
//! sets (or, for the baseline, shares all RBs among all pairs). Then, every
//! slot:
//!
//! 1. vehicles move,
//! 2. the channel is drawn,
//! 3. arrivals are drawn,
//! 4. each pair solves its power problem from its own gains and queue state,
//! 5. realized rates are computed with co-channel interference,
//! 6. data and virtual queues are updated and the slot is recorded.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use serde::Serialize;

use crate::channel::{gain_matrix, ChannelState};
use crate::mobility::{
    build_grid, init_pairs, step_positions, GeometryError, PairKinematics, Point, RoadNetwork,
};
use crate::queueing::{draw_arrival, QueuePairState};
use crate::rsu::{allocate, RsuError, ZoneAssignment};
use crate::scenario::{PairQos, ScenarioConfig, Scheme, ValidationReport};
use crate::streams::{substream_rng, StreamRng, Substream};
use crate::vue_power::{decide, drift_penalty_weight, LinkParams, PowerDecision, PowerError};

#[derive(Debug, Clone, PartialEq)]
pub enum EngineError {
    Invalid(ValidationReport),
    Geometry(GeometryError),
    Rsu(RsuError),
    Power(PowerError),
}

impl fmt::Display for EngineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EngineError::Invalid(r) => write!(f, "invalid scenario: {r}"),
            EngineError::Geometry(e) => write!(f, "road geometry: {e}"),
            EngineError::Rsu(e) => write!(f, "RSU allocation: {e}"),
            EngineError::Power(e) => write!(f, "power control: {e}"),
        }
    }
}

impl core::error::Error for EngineError {}

impl From<GeometryError> for EngineError {
    fn from(e: GeometryError) -> Self {
        EngineError::Geometry(e)
    }
}

impl From<RsuError> for EngineError {
    fn from(e: RsuError) -> Self {
        EngineError::Rsu(e)
    }
}

impl From<PowerError> for EngineError {
    fn from(e: PowerError) -> Self {
        EngineError::Power(e)
    }
}

/// Outcome of one pair in one slot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairSlot {
    /// Arrival λ(t) (bits).
    pub arrival: f64,
    /// Total transmit power (W).
    pub power: f64,
    /// Realized rate with interference (bits/s).
    pub rate: f64,
    /// Q(t+1) (bits).
    pub queue: f64,
    /// F(t+1) (bits).
    pub virtual_queue: f64,
    /// Q(t+1)/λ̄ (s).
    pub latency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlotRecord {
    pub slot: u64,
    pub pairs: Vec<PairSlot>,
}

/// Everything visible after a slot completes.
pub struct SlotView<'a> {
    pub slot: u64,
    pub pairs: &'a [PairKinematics],
    pub channel: &'a ChannelState,
    pub decisions: &'a [PowerDecision],
    pub record: &'a SlotRecord,
}

/// Hooks for trace dumps. Both methods default to no-ops.
pub trait Observer {
    fn on_frame(&mut self, _assignment: &ZoneAssignment) {}
    fn on_slot(&mut self, _view: &SlotView<'_>) {}
}

impl Observer for () {}

/// Realized rate of every pair (bits/s), including interference from every
/// other pair transmitting on the same RB.
pub fn compute_rates(
    decisions: &[PowerDecision],
    channel: &ChannelState,
    link: &LinkParams,
) -> Vec<f64> {
    let k = channel.num_pairs;
    let n = channel.num_rbs;
    let mut tx_power = vec![0.0; k * n];
    for d in decisions {
        for (&rb, &p) in d.rbs.iter().zip(&d.power) {
            tx_power[d.pair * n + rb] = p;
        }
    }
    let mut rates = vec![0.0; k];
    for d in decisions {
        let rx = d.pair;
        let mut rate = 0.0;
        for (&rb, &p) in d.rbs.iter().zip(&d.power) {
            if p <= 0.0 {
                continue;
            }
            let interference: f64 = (0..k)
                .filter(|&tx| tx != rx)
                .map(|tx| tx_power[tx * n + rb] * channel.gain(tx, rx, rb))
                .sum();
            let sinr = p * channel.gain(rx, rx, rb) / (link.noise + interference);
            rate += link.bandwidth * libm::log2(1.0 + sinr);
        }
        rates[rx] = rate;
    }
    rates
}

/// True if some RB carries power from pairs of two different zones.
pub fn violates_orthogonality(
    decisions: &[PowerDecision],
    zone_of: &[usize],
    num_rbs: usize,
) -> bool {
    let mut owner = vec![usize::MAX; num_rbs];
    for d in decisions {
        for (&rb, &p) in d.rbs.iter().zip(&d.power) {
            if p > 0.0 {
                let z = zone_of[d.pair];
                if owner[rb] == usize::MAX {
                    owner[rb] = z;
                } else if owner[rb] != z {
                    return true;
                }
            }
        }
    }
    false
}

/// Stateful simulation of one scenario.
pub struct Simulation {
    config: ScenarioConfig,
    net: RoadNetwork,
    pairs: Vec<PairKinematics>,
    queues: Vec<QueuePairState>,
    qos: Vec<PairQos>,
    link: LinkParams,
    mobility_rng: StreamRng,
    fading_rng: StreamRng,
    arrivals_rng: StreamRng,
    zone_rng: StreamRng,
    assignment: ZoneAssignment,
    zone_of: Vec<usize>,
    slot: u64,
}

/// Result of [`Simulation::step`].
pub struct StepOutcome {
    pub channel: ChannelState,
    pub decisions: Vec<PowerDecision>,
    pub record: SlotRecord,
    pub orthogonality_violated: bool,
    /// New assignment if this slot opened a frame.
    pub new_frame: bool,
}

impl Simulation {
    pub fn new(config: &ScenarioConfig) -> Result<Self, EngineError> {
        let report = config.validate();
        if !report.is_empty() {
            return Err(EngineError::Invalid(report));
        }
        let net = build_grid(config)?;
        let mut mobility_rng = substream_rng(config.rng_seed, Substream::Mobility);
        let pairs = init_pairs(&net, config, &mut mobility_rng);
        let qos: Vec<PairQos> = (0..config.num_pairs).map(|k| config.pair_qos(k)).collect();
        Ok(Self {
            net,
            pairs,
            queues: qos.iter().map(|&q| QueuePairState::new(q)).collect(),
            qos,
            link: LinkParams {
                bandwidth: config.rb_bandwidth,
                slot: config.slot_duration,
                noise: config.noise_power,
            },
            mobility_rng,
            fading_rng: substream_rng(config.rng_seed, Substream::Fading),
            arrivals_rng: substream_rng(config.rng_seed, Substream::Arrivals),
            zone_rng: substream_rng(config.rng_seed, Substream::ZoneSeed),
            assignment: ZoneAssignment::shared(0, config.num_pairs, config.num_rbs),
            zone_of: vec![0; config.num_pairs],
            slot: 0,
            config: config.clone(),
        })
    }

    pub fn network(&self) -> &RoadNetwork {
        &self.net
    }

    pub fn pairs(&self) -> &[PairKinematics] {
        &self.pairs
    }

    pub fn queues(&self) -> &[QueuePairState] {
        &self.queues
    }

    pub fn assignment(&self) -> &ZoneAssignment {
        &self.assignment
    }

    pub fn slot(&self) -> u64 {
        self.slot
    }

    fn start_frame(&mut self) -> Result<(), EngineError> {
        let frame = self.slot / self.config.frame_length;
        self.assignment = match self.config.scheme {
            Scheme::Baseline => {
                ZoneAssignment::shared(frame, self.config.num_pairs, self.config.num_rbs)
            }
            Scheme::Proposed => {
                let coords: Vec<Point> = self.pairs.iter().map(|p| p.tx_position).collect();
                allocate(
                    frame,
                    &coords,
                    &self.qos,
                    self.config.num_zones,
                    self.config.num_rbs,
                    &mut self.zone_rng,
                )?
            }
        };
        self.zone_of = self.assignment.zone_of(self.config.num_pairs);
        Ok(())
    }

    /// Runs one slot.
    pub fn step(&mut self) -> Result<StepOutcome, EngineError> {
        let cfg = &self.config;
        let new_frame = self.slot.is_multiple_of(cfg.frame_length);
        if new_frame {
            self.start_frame()?;
        }
        let cfg = &self.config;
        let tau = cfg.slot_duration;
        step_positions(&mut self.pairs, &self.net, tau, &mut self.mobility_rng);
        let channel = gain_matrix(
            &self.pairs,
            &self.net,
            cfg.num_rbs,
            self.slot,
            cfg.fading_enabled.then_some(&mut self.fading_rng),
            &cfg.path_loss,
        );
        for (queue, qos) in self.queues.iter_mut().zip(&self.qos) {
            queue.arrival = draw_arrival(qos.mean_arrival, tau, &mut self.arrivals_rng);
        }
        let mut decisions = Vec::with_capacity(cfg.num_pairs);
        for (k, queue) in self.queues.iter().enumerate() {
            let weight = drift_penalty_weight(queue.f, queue.q, queue.arrival);
            let rbs = &self.assignment.rb_sets[self.zone_of[k]];
            decisions.push(decide(
                k,
                weight,
                rbs,
                channel.own_gains(k),
                cfg.lyapunov_v,
                &self.link,
                self.qos[k].p_max,
            )?);
        }
        let rates = compute_rates(&decisions, &channel, &self.link);
        let orthogonality_violated = violates_orthogonality(&decisions, &self.zone_of, cfg.num_rbs);
        let pairs = self
            .queues
            .iter_mut()
            .zip(&decisions)
            .zip(&rates)
            .map(|((queue, decision), &rate)| {
                let q = queue.serve(rate, tau);
                PairSlot {
                    arrival: queue.arrival,
                    power: decision.total_power(),
                    rate,
                    queue: q,
                    virtual_queue: queue.f,
                    latency: q / queue.qos.mean_arrival,
                }
            })
            .collect();
        let record = SlotRecord {
            slot: self.slot,
            pairs,
        };
        self.slot += 1;
        Ok(StepOutcome {
            channel,
            decisions,
            record,
            orthogonality_violated,
            new_frame,
        })
    }
}

/// Aggregated results of one run. Slots before `burn_in` are excluded.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunMetrics {
    pub scheme: Scheme,
    pub lyapunov_v: f64,
    pub num_pairs: usize,
    /// Number of slots aggregated.
    pub slots: u64,
    /// Time-averaged Σ_k Σ_n P (W).
    pub avg_network_power: f64,
    pub per_pair_avg_power: Vec<f64>,
    /// Time-averaged Q per pair (bits).
    pub per_pair_avg_queue: Vec<f64>,
    /// Empirical Pr(Q_k ≥ L_k) per pair.
    pub per_pair_reliability: Vec<f64>,
    /// L_k·ε_k − mean Q_k per pair (bits).
    pub constraint_margin: Vec<f64>,
    pub avg_queue: f64,
    /// Mean of Q/λ̄ over pairs and slots (s).
    pub avg_latency: f64,
    /// Pooled empirical Pr(Q ≥ L).
    pub reliability: f64,
    /// Pooled mean of Q/L.
    pub mean_normalized_queue: f64,
    /// Standard error of `mean_normalized_queue`.
    pub normalized_queue_std_error: f64,
    pub orthogonality_violations: u64,
    /// Seed pair of every frame's zone formation.
    pub zone_seeds: Vec<usize>,
    pub final_virtual_queue: Vec<f64>,
    /// Q/λ̄ samples, slot-major (s).
    #[serde(skip)]
    pub latency_samples: Vec<f64>,
    /// Σ_k Σ_n P per slot (W).
    #[serde(skip)]
    pub network_power_series: Vec<f64>,
    #[serde(skip)]
    pub trace: Vec<SlotRecord>,
}

impl RunMetrics {
    /// Empirical Pr(Q ≥ L) does not exceed the Markov bound mean(Q)/L plus
    /// three standard errors.
    pub fn markov_consistent(&self) -> bool {
        self.reliability <= self.mean_normalized_queue + 3.0 * self.normalized_queue_std_error
    }

    pub fn ccdf(&self, levels: &[f64]) -> Result<Vec<(f64, f64)>, EmptySamples> {
        ccdf(&self.latency_samples, levels)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RunOptions {
    /// Keep every [`SlotRecord`] in [`RunMetrics::trace`].
    pub keep_trace: bool,
}

struct Accumulator {
    power: Vec<f64>,
    queue: Vec<f64>,
    exceed: Vec<u64>,
    norm_sum: f64,
    norm_sq: f64,
    latency: Vec<f64>,
    network_power: Vec<f64>,
    slots: u64,
}

/// Runs a full scenario.
pub fn run(config: &ScenarioConfig) -> Result<RunMetrics, EngineError> {
    run_with(config, RunOptions::default(), &mut ())
}

pub fn run_with<O: Observer + ?Sized>(
    config: &ScenarioConfig,
    options: RunOptions,
    observer: &mut O,
) -> Result<RunMetrics, EngineError> {
    let mut sim = Simulation::new(config)?;
    let k = config.num_pairs;
    let recorded = (config.num_slots - config.burn_in) as usize;
    let mut acc = Accumulator {
        power: vec![0.0; k],
        queue: vec![0.0; k],
        exceed: vec![0; k],
        norm_sum: 0.0,
        norm_sq: 0.0,
        latency: Vec::with_capacity(recorded * k),
        network_power: Vec::with_capacity(recorded),
        slots: 0,
    };
    let qos: Vec<PairQos> = (0..k).map(|i| config.pair_qos(i)).collect();
    let mut violations = 0;
    let mut zone_seeds = Vec::new();
    let mut trace = Vec::new();

    for _ in 0..config.num_slots {
        let out = sim.step()?;
        if out.new_frame {
            if let Some(seed) = sim.assignment().seed_pair {
                zone_seeds.push(seed);
            }
            observer.on_frame(sim.assignment());
        }
        observer.on_slot(&SlotView {
            slot: out.record.slot,
            pairs: sim.pairs(),
            channel: &out.channel,
            decisions: &out.decisions,
            record: &out.record,
        });
        if out.record.slot >= config.burn_in {
            if out.orthogonality_violated {
                violations += 1;
            }
            let mut slot_power = 0.0;
            for (i, p) in out.record.pairs.iter().enumerate() {
                acc.power[i] += p.power;
                acc.queue[i] += p.queue;
                if p.queue >= qos[i].queue_bound {
                    acc.exceed[i] += 1;
                }
                let norm = p.queue / qos[i].queue_bound;
                acc.norm_sum += norm;
                acc.norm_sq += norm * norm;
                acc.latency.push(p.latency);
                slot_power += p.power;
            }
            acc.network_power.push(slot_power);
            acc.slots += 1;
            if options.keep_trace {
                trace.push(out.record);
            }
        }
    }

    let t = acc.slots as f64;
    let samples = t * k as f64;
    let per_pair_avg_queue: Vec<f64> = acc.queue.iter().map(|q| q / t).collect();
    let mean_norm = acc.norm_sum / samples;
    let var = if samples > 1.0 {
        ((acc.norm_sq - samples * mean_norm * mean_norm) / (samples - 1.0)).max(0.0)
    } else {
        0.0
    };
    Ok(RunMetrics {
        scheme: config.scheme,
        lyapunov_v: config.lyapunov_v,
        num_pairs: k,
        slots: acc.slots,
        avg_network_power: acc.network_power.iter().sum::<f64>() / t,
        per_pair_avg_power: acc.power.iter().map(|p| p / t).collect(),
        constraint_margin: per_pair_avg_queue
            .iter()
            .zip(&qos)
            .map(|(q, s)| s.queue_target() - q)
            .collect(),
        avg_queue: per_pair_avg_queue.iter().sum::<f64>() / k as f64,
        per_pair_avg_queue,
        per_pair_reliability: acc.exceed.iter().map(|&e| e as f64 / t).collect(),
        avg_latency: acc.latency.iter().sum::<f64>() / samples,
        reliability: acc.exceed.iter().sum::<u64>() as f64 / samples,
        mean_normalized_queue: mean_norm,
        normalized_queue_std_error: libm::sqrt(var / samples),
        orthogonality_violations: violations,
        zone_seeds,
        final_virtual_queue: sim.queues().iter().map(|q| q.f).collect(),
        latency_samples: acc.latency,
        network_power_series: acc.network_power,
        trace,
    })
}

/// Runs `config` once per value of V. Every run uses the same seed, so the
/// mobility, fading and arrival streams are identical across V.
pub fn sweep_v(
    config: &ScenarioConfig,
    v_values: &[f64],
) -> Result<Vec<(f64, RunMetrics)>, EngineError> {
    v_values
        .iter()
        .map(|&v| {
            let cfg = ScenarioConfig {
                lyapunov_v: v,
                ..config.clone()
            };
            run(&cfg).map(|m| (v, m))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EmptySamples;

impl fmt::Display for EmptySamples {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("CCDF of an empty sample set")
    }
}

impl core::error::Error for EmptySamples {}

/// Empirical `Pr(X ≥ level)` at each level.
pub fn ccdf(samples: &[f64], levels: &[f64]) -> Result<Vec<(f64, f64)>, EmptySamples> {
    if samples.is_empty() {
        return Err(EmptySamples);
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    Ok(levels
        .iter()
        .map(|&level| {
            let below = sorted.partition_point(|&x| x < level);
            (level, (sorted.len() - below) as f64 / n)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::queueing::update_queue;

    const LINK: LinkParams = LinkParams {
        bandwidth: 180e3,
        slot: 1e-3,
        noise: 1e-11,
    };

    fn small(scheme: Scheme) -> ScenarioConfig {
        ScenarioConfig {
            num_pairs: 6,
            num_zones: 3,
            num_rbs: 6,
            num_slots: 600,
            rng_seed: 5,
            scheme,
            ..Default::default()
        }
    }

    fn channel_from(gains: &[(usize, usize, usize, f64)], k: usize, n: usize) -> ChannelState {
        // build through the public constructor path: zero-distance pairs then overwrite
        let mut flat = vec![1e-30; k * k * n];
        for &(tx, rx, rb, g) in gains {
            flat[(tx * k + rx) * n + rb] = g;
        }
        ChannelState::from_parts(0, k, n, flat)
    }

    #[test]
    fn single_pair_rate() {
        let ch = channel_from(&[(0, 0, 0, 3e-11)], 1, 1);
        let d = PowerDecision {
            pair: 0,
            rbs: vec![0],
            power: vec![1.0],
            gamma: 0.0,
            weight: 1.0,
        };
        let r = compute_rates(&[d], &ch, &LINK);
        assert!((r[0] - 360e3).abs() < 1e-6);
    }

    #[test]
    fn co_channel_interference() {
        // desired P·g = 3σ², interference P'·g' = σ²
        let ch = channel_from(
            &[(0, 0, 0, 3e-11), (1, 0, 0, 1e-11), (1, 1, 0, 1e-11)],
            2,
            1,
        );
        let ds = vec![
            PowerDecision {
                pair: 0,
                rbs: vec![0],
                power: vec![1.0],
                gamma: 0.0,
                weight: 1.0,
            },
            PowerDecision {
                pair: 1,
                rbs: vec![0],
                power: vec![1.0],
                gamma: 0.0,
                weight: 1.0,
            },
        ];
        let r = compute_rates(&ds, &ch, &LINK);
        assert!((r[0] - 180e3 * libm::log2(2.5)).abs() < 1e-6);
    }

    #[test]
    fn disjoint_rbs_are_interference_free() {
        let ch = channel_from(
            &[
                (0, 0, 0, 3e-11),
                (1, 1, 1, 7e-11),
                (1, 0, 1, 1e-9),
                (0, 1, 0, 1e-9),
                (1, 0, 0, 1e-9),
                (0, 1, 1, 1e-9),
            ],
            2,
            2,
        );
        let ds = vec![
            PowerDecision {
                pair: 0,
                rbs: vec![0],
                power: vec![1.0],
                gamma: 0.0,
                weight: 1.0,
            },
            PowerDecision {
                pair: 1,
                rbs: vec![1],
                power: vec![1.0],
                gamma: 0.0,
                weight: 1.0,
            },
        ];
        let r = compute_rates(&ds, &ch, &LINK);
        assert_eq!(r[0], 180e3 * libm::log2(1.0 + 3.0));
        assert_eq!(r[1], 180e3 * libm::log2(1.0 + 7.0));
        assert!(!violates_orthogonality(&ds, &[0, 1], 2));
        assert!(violates_orthogonality(
            &[
                PowerDecision {
                    pair: 0,
                    rbs: vec![0],
                    power: vec![1.0],
                    gamma: 0.0,
                    weight: 1.0
                },
                PowerDecision {
                    pair: 1,
                    rbs: vec![0],
                    power: vec![1.0],
                    gamma: 0.0,
                    weight: 1.0
                },
            ],
            &[0, 1],
            1
        ));
    }

    #[test]
    fn ccdf_examples() {
        let s = [1e-3, 2e-3, 3e-3, 4e-3];
        let c = ccdf(&s, &[0.0, 2.5e-3, 5e-3]).unwrap();
        assert_eq!(c, vec![(0.0, 1.0), (2.5e-3, 0.5), (5e-3, 0.0)]);
        assert_eq!(ccdf(&[], &[0.0]), Err(EmptySamples));
    }

    #[test]
    fn single_pair_queue_drains() {
        let cfg = ScenarioConfig {
            num_pairs: 1,
            num_zones: 1,
            num_slots: 2000,
            mean_arrival: 20e3,
            fading_enabled: false,
            ..Default::default()
        };
        let m = run_with(&cfg, RunOptions { keep_trace: true }, &mut ()).unwrap();
        let tail = &m.trace[100..];
        assert!(tail.iter().all(|r| r.pairs[0].queue == 0.0));
        assert!(m.avg_latency < 1e-6);
    }

    #[test]
    fn runs_are_deterministic() {
        for scheme in [Scheme::Proposed, Scheme::Baseline] {
            let a = run(&small(scheme)).unwrap();
            let b = run(&small(scheme)).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn trace_replays_and_is_consistent() {
        let cfg = small(Scheme::Proposed);
        let m = run_with(&cfg, RunOptions { keep_trace: true }, &mut ()).unwrap();
        assert_eq!(m.orthogonality_violations, 0);
        let mut q = vec![0.0; cfg.num_pairs];
        let mut power = 0.0;
        for rec in &m.trace {
            for (k, p) in rec.pairs.iter().enumerate() {
                q[k] = update_queue(q[k], p.arrival, p.rate, cfg.slot_duration);
                assert_eq!(q[k], p.queue);
                assert!(p.power <= cfg.p_max + 1e-12);
                assert!(p.rate >= 0.0);
                power += p.power;
            }
        }
        let avg = power / m.slots as f64;
        assert!((avg - m.avg_network_power).abs() <= 1e-12 * avg.max(1.0));
        assert!(m.markov_consistent());
        assert_eq!(m.zone_seeds.len(), 6);
    }

    #[test]
    fn sweep_zero_reproduces_run() {
        let cfg = small(Scheme::Proposed);
        let sweep = sweep_v(&cfg, &[0.0]).unwrap();
        assert_eq!(sweep[0].1, run(&cfg).unwrap());
    }

    #[test]
    fn burn_in_excludes_slots() {
        let cfg = ScenarioConfig {
            burn_in: 100,
            ..small(Scheme::Baseline)
        };
        let m = run(&cfg).unwrap();
        assert_eq!(m.slots, 500);
        assert_eq!(m.latency_samples.len(), 500 * 6);
    }

    #[test]
    fn invalid_config_is_rejected() {
        let cfg = ScenarioConfig {
            lyapunov_v: -1.0,
            ..small(Scheme::Proposed)
        };
        assert!(matches!(run(&cfg), Err(EngineError::Invalid(_))));
    }
}
