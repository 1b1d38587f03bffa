//! Experiment configuration.
//!
//! [`ScenarioConfig`] stores every physical quantity in SI units (Watts,
//! meters, seconds, bits). Configuration files may give powers in dBm and the
//! vehicle speed in km/h; [`ConfigFile::resolve`] converts those exactly once.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::channel::PathLossParams;

/// Converts a power level in dBm to Watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    libm::pow(10.0, (dbm - 30.0) / 10.0)
}

/// Converts a power level in Watts to dBm.
pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * libm::log10(watts) + 30.0
}

pub fn kmh_to_mps(kmh: f64) -> f64 {
    kmh / 3.6
}

/// Resource allocation scheme under test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    /// RSU zoning plus proportional RB allocation, per-pair power control on
    /// the zone's RB set.
    Proposed,
    /// Every pair optimizes power over all RBs with no zoning.
    Baseline,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Proposed => "proposed",
            Scheme::Baseline => "baseline",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// QoS and power parameters of a single VUE pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairQos {
    /// Total transmit power budget (W).
    pub p_max: f64,
    /// Mean arrival rate (bits/s).
    pub mean_arrival: f64,
    /// Allowable queue length L (bits).
    pub queue_bound: f64,
    /// Tolerance ε on Pr(Q >= L).
    pub reliability_eps: f64,
}

impl PairQos {
    /// Target time-averaged queue length L·ε (bits).
    pub fn queue_target(&self) -> f64 {
        self.queue_bound * self.reliability_eps
    }

    /// QoS pressure λ̄ / (L·ε) used by the RSU when sharing RBs.
    pub fn rb_pressure(&self) -> f64 {
        self.mean_arrival / self.queue_target()
    }
}

/// Per-pair replacement of the default QoS parameters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairOverride {
    pub pair: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_arrival: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub queue_bound: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reliability_eps: Option<f64>,
}

/// All parameters of one experiment, in SI units.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioConfig {
    /// Side of the square simulation area (m).
    pub area_side: f64,
    /// Side of each of the four square building blocks (m).
    pub building_breadth: f64,
    /// Width of one lane (m); each road has two lanes.
    pub lane_width: f64,
    /// K
    pub num_pairs: usize,
    /// N
    pub num_rbs: usize,
    /// RB bandwidth ω (Hz).
    pub rb_bandwidth: f64,
    /// Slot duration τ (s).
    pub slot_duration: f64,
    /// T0, slots per frame.
    pub frame_length: u64,
    /// Z
    pub num_zones: usize,
    /// Noise power σ² per RB (W).
    pub noise_power: f64,
    /// Lyapunov tradeoff parameter V.
    pub lyapunov_v: f64,
    pub num_slots: u64,
    /// Leading slots excluded from the aggregated metrics.
    pub burn_in: u64,
    pub rng_seed: u64,
    /// Default per-pair power budget (W).
    pub p_max: f64,
    /// Default mean arrival rate λ̄ (bits/s).
    pub mean_arrival: f64,
    /// Default allowable queue length L (bits).
    pub queue_bound: f64,
    /// Default reliability tolerance ε.
    pub reliability_eps: f64,
    /// Vehicle speed (m/s).
    pub vehicle_speed: f64,
    pub pair_gap_min: f64,
    pub pair_gap_max: f64,
    /// Speed of the tx–rx gap random walk (m/s).
    pub gap_drift: f64,
    pub fading_enabled: bool,
    pub path_loss: PathLossParams,
    pub scheme: Scheme,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub pair_overrides: Vec<PairOverride>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            area_side: 250.0,
            building_breadth: 100.0,
            lane_width: 3.5,
            num_pairs: 20,
            num_rbs: 15,
            rb_bandwidth: 180e3,
            slot_duration: 1e-3,
            frame_length: 100,
            num_zones: 5,
            noise_power: dbm_to_watts(-80.0),
            lyapunov_v: 0.0,
            num_slots: 100_000,
            burn_in: 0,
            rng_seed: 1,
            p_max: dbm_to_watts(10.0),
            mean_arrival: 200e3,
            queue_bound: 2000.0,
            reliability_eps: 0.1,
            vehicle_speed: kmh_to_mps(50.0),
            pair_gap_min: 10.0,
            pair_gap_max: 20.0,
            gap_drift: 0.5,
            fading_enabled: true,
            path_loss: PathLossParams::default(),
            scheme: Scheme::Proposed,
            pair_overrides: Vec::new(),
        }
    }
}

/// A named invariant violation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub key: &'static str,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

/// Result of [`ScenarioConfig::validate`]; empty iff the config is valid.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn contains(&self, needle: &str) -> bool {
        self.violations.iter().any(|v| v.message.contains(needle))
    }

    fn push(&mut self, key: &'static str, message: impl Into<String>) {
        self.violations.push(Violation {
            key,
            message: message.into(),
        });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

fn positive(x: f64) -> bool {
    x.is_finite() && x > 0.0
}

impl ScenarioConfig {
    /// QoS parameters of pair `k` after applying overrides.
    pub fn pair_qos(&self, k: usize) -> PairQos {
        let mut qos = PairQos {
            p_max: self.p_max,
            mean_arrival: self.mean_arrival,
            queue_bound: self.queue_bound,
            reliability_eps: self.reliability_eps,
        };
        for o in self.pair_overrides.iter().filter(|o| o.pair == k) {
            if let Some(v) = o.p_max {
                qos.p_max = v;
            }
            if let Some(v) = o.mean_arrival {
                qos.mean_arrival = v;
            }
            if let Some(v) = o.queue_bound {
                qos.queue_bound = v;
            }
            if let Some(v) = o.reliability_eps {
                qos.reliability_eps = v;
            }
        }
        qos
    }

    pub fn validate(&self) -> ValidationReport {
        let mut r = ValidationReport::default();
        if self.num_pairs < 1 {
            r.push("num_pairs", "num_pairs must be at least 1");
        }
        if self.num_rbs < 1 {
            r.push("num_rbs", "num_rbs must be at least 1");
        }
        if self.num_zones < 1 || self.num_zones > self.num_pairs {
            r.push("num_zones", "num_zones out of range: require 1 ≤ Z ≤ K");
        }
        if self.scheme == Scheme::Proposed && self.num_zones > self.num_rbs {
            r.push(
                "num_zones",
                "num_zones exceeds num_rbs: every zone needs at least one RB",
            );
        }
        if self.frame_length < 1 {
            r.push("frame_length", "frame_length must be at least 1");
        }
        for (key, value) in [
            ("rb_bandwidth", self.rb_bandwidth),
            ("slot_duration", self.slot_duration),
            ("noise_power", self.noise_power),
            ("area_side", self.area_side),
            ("building_breadth", self.building_breadth),
            ("lane_width", self.lane_width),
            ("vehicle_speed", self.vehicle_speed),
            ("pair_gap_min", self.pair_gap_min),
        ] {
            if !positive(value) {
                r.push(key, format!("{key} must be positive"));
            }
        }
        if !(self.lyapunov_v.is_finite() && self.lyapunov_v >= 0.0) {
            r.push("lyapunov_v", "lyapunov_v must be non-negative");
        }
        if !(self.gap_drift.is_finite() && self.gap_drift >= 0.0) {
            r.push("gap_drift", "gap_drift must be non-negative");
        }
        if !(self.pair_gap_min <= self.pair_gap_max) {
            r.push("pair_gap_max", "pair_gap_min must not exceed pair_gap_max");
        }
        if self.burn_in >= self.num_slots {
            r.push("burn_in", "burn_in must be smaller than num_slots");
        }
        if positive(self.area_side) && positive(self.building_breadth) && positive(self.lane_width)
        {
            let corridor = (self.area_side - 2.0 * self.building_breadth) / 3.0;
            if corridor < 2.0 * self.lane_width {
                r.push(
                    "building_breadth",
                    "building_breadth too large: roads narrower than two lanes",
                );
            }
            if self.pair_gap_max >= self.area_side / 2.0 {
                r.push(
                    "pair_gap_max",
                    "pair_gap_max must be below half the area side",
                );
            }
        }
        self.validate_qos(&mut r, "", &self.pair_qos(usize::MAX));
        for o in &self.pair_overrides {
            if o.pair >= self.num_pairs {
                r.push(
                    "pair_overrides",
                    format!("pair override {} out of range", o.pair),
                );
            } else {
                self.validate_qos(&mut r, " (override)", &self.pair_qos(o.pair));
            }
        }
        self.path_loss.validate_into(&mut r.violations);
        r
    }

    fn validate_qos(&self, r: &mut ValidationReport, suffix: &str, q: &PairQos) {
        if !positive(q.p_max) {
            r.push("p_max", format!("p_max must be positive{suffix}"));
        }
        if !positive(q.mean_arrival) {
            r.push(
                "mean_arrival",
                format!("mean_arrival must be positive{suffix}"),
            );
        }
        if !positive(q.queue_bound) {
            r.push(
                "queue_bound",
                format!("queue_bound must be positive{suffix}"),
            );
        }
        if !(q.reliability_eps > 0.0 && q.reliability_eps < 1.0) {
            r.push(
                "reliability_eps",
                format!("reliability_eps out of (0,1){suffix}"),
            );
        }
    }
}

/// Errors raised while resolving a [`ConfigFile`].
#[derive(Debug, Clone, PartialEq)]
pub enum ConfigError {
    /// Both the linear and the logarithmic form of a quantity were given.
    Conflict {
        first: &'static str,
        second: &'static str,
    },
    /// The resolved config violates one or more invariants.
    Invalid(ValidationReport),
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Conflict { first, second } => {
                write!(f, "keys `{first}` and `{second}` are mutually exclusive")
            }
            ConfigError::Invalid(report) => write!(f, "invalid scenario: {report}"),
        }
    }
}

impl core::error::Error for ConfigError {}

/// On-disk configuration: every key optional, dBm and km/h accepted.
///
/// Canonical keys are the [`ScenarioConfig`] field names; the short symbols
/// `K`, `N`, `Z`, `V` and `T0` are accepted as aliases.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub area_side: Option<f64>,
    pub building_breadth: Option<f64>,
    pub lane_width: Option<f64>,
    #[serde(alias = "K")]
    pub num_pairs: Option<usize>,
    #[serde(alias = "N")]
    pub num_rbs: Option<usize>,
    pub rb_bandwidth: Option<f64>,
    pub slot_duration: Option<f64>,
    #[serde(alias = "T0")]
    pub frame_length: Option<u64>,
    #[serde(alias = "Z")]
    pub num_zones: Option<usize>,
    pub noise_power: Option<f64>,
    pub noise_power_dbm: Option<f64>,
    #[serde(alias = "V")]
    pub lyapunov_v: Option<f64>,
    pub num_slots: Option<u64>,
    pub burn_in: Option<u64>,
    pub rng_seed: Option<u64>,
    pub p_max: Option<f64>,
    pub p_max_dbm: Option<f64>,
    pub mean_arrival: Option<f64>,
    pub queue_bound: Option<f64>,
    pub reliability_eps: Option<f64>,
    pub vehicle_speed: Option<f64>,
    pub vehicle_speed_kmh: Option<f64>,
    pub pair_gap_min: Option<f64>,
    pub pair_gap_max: Option<f64>,
    pub gap_drift: Option<f64>,
    pub fading_enabled: Option<bool>,
    pub path_loss: Option<PathLossFile>,
    pub scheme: Option<Scheme>,
    pub pair_overrides: Option<Vec<PairOverrideFile>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathLossFile {
    pub pl0_db: Option<f64>,
    pub d0: Option<f64>,
    pub n_los: Option<f64>,
    pub n_nlos: Option<f64>,
    pub corner_loss_db: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairOverrideFile {
    pub pair: usize,
    pub p_max: Option<f64>,
    pub p_max_dbm: Option<f64>,
    pub mean_arrival: Option<f64>,
    pub queue_bound: Option<f64>,
    pub reliability_eps: Option<f64>,
}

fn either(
    linear: Option<f64>,
    log: Option<f64>,
    names: (&'static str, &'static str),
    convert: fn(f64) -> f64,
) -> Result<Option<f64>, ConfigError> {
    match (linear, log) {
        (Some(_), Some(_)) => Err(ConfigError::Conflict {
            first: names.0,
            second: names.1,
        }),
        (Some(v), None) => Ok(Some(v)),
        (None, Some(v)) => Ok(Some(convert(v))),
        (None, None) => Ok(None),
    }
}

impl ConfigFile {
    /// Fills defaults, converts dBm and km/h to SI units and validates.
    pub fn resolve(self) -> Result<ScenarioConfig, ConfigError> {
        let mut c = ScenarioConfig::default();
        macro_rules! set {
            ($($field:ident),*) => {$(
                if let Some(v) = self.$field { c.$field = v; }
            )*};
        }
        set!(
            area_side,
            building_breadth,
            lane_width,
            num_pairs,
            num_rbs,
            rb_bandwidth,
            slot_duration,
            frame_length,
            num_zones,
            lyapunov_v,
            num_slots,
            burn_in,
            rng_seed,
            mean_arrival,
            queue_bound,
            reliability_eps,
            pair_gap_min,
            pair_gap_max,
            gap_drift,
            fading_enabled,
            scheme
        );
        if let Some(v) = either(
            self.noise_power,
            self.noise_power_dbm,
            ("noise_power", "noise_power_dbm"),
            dbm_to_watts,
        )? {
            c.noise_power = v;
        }
        if let Some(v) = either(
            self.p_max,
            self.p_max_dbm,
            ("p_max", "p_max_dbm"),
            dbm_to_watts,
        )? {
            c.p_max = v;
        }
        if let Some(v) = either(
            self.vehicle_speed,
            self.vehicle_speed_kmh,
            ("vehicle_speed", "vehicle_speed_kmh"),
            kmh_to_mps,
        )? {
            c.vehicle_speed = v;
        }
        if let Some(pl) = self.path_loss {
            let p = &mut c.path_loss;
            if let Some(v) = pl.pl0_db {
                p.pl0_db = v;
            }
            if let Some(v) = pl.d0 {
                p.d0 = v;
            }
            if let Some(v) = pl.n_los {
                p.n_los = v;
            }
            if let Some(v) = pl.n_nlos {
                p.n_nlos = v;
            }
            if let Some(v) = pl.corner_loss_db {
                p.corner_loss_db = v;
            }
        }
        if let Some(overrides) = self.pair_overrides {
            for o in overrides {
                c.pair_overrides.push(PairOverride {
                    pair: o.pair,
                    p_max: either(o.p_max, o.p_max_dbm, ("p_max", "p_max_dbm"), dbm_to_watts)?,
                    mean_arrival: o.mean_arrival,
                    queue_bound: o.queue_bound,
                    reliability_eps: o.reliability_eps,
                });
            }
        }
        let report = c.validate();
        if report.is_empty() {
            Ok(c)
        } else {
            Err(ConfigError::Invalid(report))
        }
    }
}
