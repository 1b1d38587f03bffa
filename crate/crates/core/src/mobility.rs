//! Manhattan road grid and vehicle movement.
//!
//! The area holds a 2×2 arrangement of square buildings. Three horizontal and
//! three vertical corridors (two outer, one central) separate them; each
//! corridor carries two opposite one-way lanes. Lanes span the whole area,
//! but vehicles never enter the short stubs between the outer corridors and
//! the area edge: at every intersection a continuation is legal only if the
//! road ahead reaches another intersection, so vehicles turn at the border.
//!
//! A pair's transmitter drives along the lanes, and its receiver follows the
//! exact same route `gap` meters behind. The route is kept as a short trail
//! of lane segments indexed by odometer distance.

use alloc::vec::Vec;
use core::fmt;

use rand::Rng;

use crate::scenario::ScenarioConfig;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        libm::hypot(self.x - other.x, self.y - other.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    /// Lane runs along x at fixed y.
    Horizontal,
    /// Lane runs along y at fixed x.
    Vertical,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Corridor {
    pub axis: Axis,
    /// Centerline coordinate (y for horizontal, x for vertical).
    pub center: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crossing {
    /// Arc length on the owning lane.
    pub s: f64,
    pub other_lane: usize,
    /// Arc length of the same point on `other_lane`.
    pub s_other: f64,
    /// Corridor of `other_lane`.
    pub corridor: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lane {
    pub corridor: usize,
    pub axis: Axis,
    /// `true` when traveling in the increasing-coordinate direction.
    pub forward: bool,
    /// Fixed coordinate of the lane line.
    pub offset: f64,
    /// Crossings with perpendicular lanes, sorted by arc length.
    pub crossings: Vec<Crossing>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GeometryError {
    NonPositiveBuilding,
    RoadsTooNarrow,
}

impl fmt::Display for GeometryError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GeometryError::NonPositiveBuilding => f.write_str("building_breadth must be positive"),
            GeometryError::RoadsTooNarrow => f.write_str(
                "building_breadth too large for the area: roads narrower than two lanes",
            ),
        }
    }
}

impl core::error::Error for GeometryError {}

#[derive(Debug, Clone, PartialEq)]
pub struct RoadNetwork {
    pub area_side: f64,
    pub building_breadth: f64,
    pub lane_width: f64,
    /// Width of every corridor (m).
    pub corridor_width: f64,
    /// Horizontal corridors first, then vertical ones.
    pub corridors: Vec<Corridor>,
    pub lanes: Vec<Lane>,
}

impl RoadNetwork {
    /// Point at arc length `s` on `lane`.
    pub fn lane_point(&self, lane: usize, s: f64) -> Point {
        let l = &self.lanes[lane];
        let along = if l.forward { s } else { self.area_side - s };
        match l.axis {
            Axis::Horizontal => Point::new(along, l.offset),
            Axis::Vertical => Point::new(l.offset, along),
        }
    }

    fn arc_of(&self, lane: usize, coord: f64) -> f64 {
        if self.lanes[lane].forward {
            coord
        } else {
            self.area_side - coord
        }
    }

    pub fn wrap(&self, s: f64) -> f64 {
        let r = s % self.area_side;
        if r < 0.0 {
            r + self.area_side
        } else {
            r
        }
    }

    /// The two lanes of corridor `c`.
    pub fn corridor_lanes(&self, c: usize) -> [usize; 2] {
        [2 * c, 2 * c + 1]
    }

    /// Corridors of `axis` whose band contains `p`.
    pub fn corridors_containing(&self, p: Point, axis: Axis) -> impl Iterator<Item = usize> + '_ {
        let half = self.corridor_width / 2.0 + 1e-9;
        self.corridors
            .iter()
            .enumerate()
            .filter(move |(_, c)| {
                c.axis == axis
                    && match axis {
                        Axis::Horizontal => libm::fabs(p.y - c.center) <= half,
                        Axis::Vertical => libm::fabs(p.x - c.center) <= half,
                    }
            })
            .map(|(i, _)| i)
    }

    /// True if `p` lies strictly inside one of the building footprints.
    pub fn inside_building(&self, p: Point) -> bool {
        let w = self.corridor_width;
        let b = self.building_breadth;
        let inside = |v: f64| (v > w && v < w + b) || (v > 2.0 * w + b && v < 2.0 * (w + b));
        inside(p.x) && inside(p.y)
    }
}

/// Builds the 2×2-block Manhattan grid.
pub fn build_grid(config: &ScenarioConfig) -> Result<RoadNetwork, GeometryError> {
    let area = config.area_side;
    let b = config.building_breadth;
    let lw = config.lane_width;
    if !(b > 0.0) {
        return Err(GeometryError::NonPositiveBuilding);
    }
    let w = (area - 2.0 * b) / 3.0;
    if !(w >= 2.0 * lw) {
        return Err(GeometryError::RoadsTooNarrow);
    }
    let centers = [w / 2.0, w + b + w / 2.0, area - w / 2.0];

    let mut corridors = Vec::with_capacity(6);
    for axis in [Axis::Horizontal, Axis::Vertical] {
        for &center in &centers {
            corridors.push(Corridor { axis, center });
        }
    }
    // Right-hand traffic: forward lane on the lower-coordinate side.
    let mut lanes = Vec::with_capacity(12);
    for (c, corridor) in corridors.iter().enumerate() {
        for forward in [true, false] {
            let offset = if forward {
                corridor.center - lw / 2.0
            } else {
                corridor.center + lw / 2.0
            };
            lanes.push(Lane {
                corridor: c,
                axis: corridor.axis,
                forward,
                offset,
                crossings: Vec::new(),
            });
        }
    }
    let mut net = RoadNetwork {
        area_side: area,
        building_breadth: b,
        lane_width: lw,
        corridor_width: w,
        corridors,
        lanes,
    };
    for i in 0..net.lanes.len() {
        let mut crossings = Vec::new();
        for j in 0..net.lanes.len() {
            if net.lanes[i].axis == net.lanes[j].axis {
                continue;
            }
            crossings.push(Crossing {
                s: net.arc_of(i, net.lanes[j].offset),
                other_lane: j,
                s_other: net.arc_of(j, net.lanes[i].offset),
                corridor: net.lanes[j].corridor,
            });
        }
        crossings.sort_by(|a, b| a.s.total_cmp(&b.s));
        net.lanes[i].crossings = crossings;
    }
    Ok(net)
}

/// A stretch of route starting on `lane` at arc length `start_s` when the
/// odometer read `start_odo`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub lane: usize,
    pub start_odo: f64,
    pub start_s: f64,
}

/// Turn chosen at the first lane of a corridor, applied on `target`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct PendingTurn {
    corridor: usize,
    target: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairKinematics {
    pub id: usize,
    pub lane: usize,
    /// Transmitter arc length on `lane`.
    pub s: f64,
    pub odometer: f64,
    pub speed: f64,
    /// Route distance from receiver to transmitter (m).
    pub gap: f64,
    pub gap_min: f64,
    pub gap_max: f64,
    pub gap_drift: f64,
    pub tx_position: Point,
    pub rx_position: Point,
    trail: Vec<Segment>,
    pending: Option<PendingTurn>,
}

impl PairKinematics {
    pub fn trail(&self) -> &[Segment] {
        &self.trail
    }

    /// Lane and arc length at odometer reading `odo`.
    pub fn route_position(&self, net: &RoadNetwork, odo: f64) -> (usize, f64) {
        let seg = self
            .trail
            .iter()
            .rev()
            .find(|seg| seg.start_odo <= odo)
            .unwrap_or(&self.trail[0]);
        (seg.lane, net.wrap(seg.start_s + (odo - seg.start_odo)))
    }

    pub fn rx_lane(&self, net: &RoadNetwork) -> usize {
        self.route_position(net, self.odometer - self.gap).0
    }

    fn refresh_positions(&mut self, net: &RoadNetwork) {
        self.tx_position = net.lane_point(self.lane, self.s);
        let (lane, s) = self.route_position(net, self.odometer - self.gap);
        self.rx_position = net.lane_point(lane, s);
    }

    fn turn_onto(&mut self, lane: usize, s: f64) {
        self.lane = lane;
        self.s = s;
        self.trail.push(Segment {
            lane,
            start_odo: self.odometer,
            start_s: s,
        });
    }

    /// Moves the transmitter `dist` meters along its route.
    pub fn advance<R: Rng + ?Sized>(&mut self, net: &RoadNetwork, dist: f64, rng: &mut R) {
        let mut remaining = dist;
        while remaining > 0.0 {
            let lane = &net.lanes[self.lane];
            let next = lane.crossings.iter().find(|c| c.s > self.s).copied();
            let event_s = next.map_or(net.area_side, |c| c.s);
            let to_event = event_s - self.s;
            if to_event > remaining {
                self.s += remaining;
                self.odometer += remaining;
                break;
            }
            self.s = event_s;
            self.odometer += to_event;
            remaining -= to_event;
            let Some(crossing) = next else {
                // lane end; unreachable once every lane meets a crossing ahead
                self.s = 0.0;
                continue;
            };
            let pending = match self.pending {
                Some(p) if p.corridor == crossing.corridor => p,
                _ => PendingTurn {
                    corridor: crossing.corridor,
                    target: choose_continuation(net, self.lane, &crossing, rng),
                },
            };
            self.pending = Some(pending);
            if pending.target == Some(crossing.other_lane) {
                // keep going straight through the rest of the corridor just left
                self.pending = Some(PendingTurn {
                    corridor: lane.corridor,
                    target: None,
                });
                self.turn_onto(crossing.other_lane, crossing.s_other);
            }
        }
        let keep_from = self.odometer - self.gap_max;
        while self.trail.len() >= 2 && self.trail[1].start_odo <= keep_from {
            self.trail.remove(0);
        }
    }

    fn step_gap<R: Rng + ?Sized>(&mut self, dt: f64, rng: &mut R) {
        let delta = self.gap_drift * dt;
        let mut g = if rng.random_bool(0.5) {
            self.gap + delta
        } else {
            self.gap - delta
        };
        if g > self.gap_max {
            g = 2.0 * self.gap_max - g;
        }
        if g < self.gap_min {
            g = 2.0 * self.gap_min - g;
        }
        self.gap = g.clamp(self.gap_min, self.gap_max);
    }
}

/// Going straight past `crossing` is legal if the lane meets another corridor
/// further ahead.
fn straight_is_legal(net: &RoadNetwork, lane: usize, crossing: &Crossing) -> bool {
    net.lanes[lane]
        .crossings
        .iter()
        .any(|c| c.s > crossing.s && c.corridor != crossing.corridor)
}

/// Turning at `crossing` is legal if the new lane meets a corridor other than
/// the one being left.
fn turn_is_legal(net: &RoadNetwork, lane: usize, crossing: &Crossing) -> bool {
    let from = net.lanes[lane].corridor;
    net.lanes[crossing.other_lane]
        .crossings
        .iter()
        .any(|c| c.s > crossing.s_other && c.corridor != from)
}

/// Draws uniformly among the legal continuations at the corridor of
/// `crossing`: straight (`None`) or a turn onto one of its lanes.
fn choose_continuation<R: Rng + ?Sized>(
    net: &RoadNetwork,
    lane: usize,
    crossing: &Crossing,
    rng: &mut R,
) -> Option<usize> {
    let mut options: [Option<usize>; 3] = [None; 3];
    let mut count = 0;
    if straight_is_legal(net, lane, crossing) {
        count += 1;
    }
    for target in net.corridor_lanes(crossing.corridor) {
        let at = net.lanes[lane]
            .crossings
            .iter()
            .find(|c| c.other_lane == target && c.s >= crossing.s);
        if let Some(c) = at {
            if turn_is_legal(net, lane, c) {
                options[count] = Some(target);
                count += 1;
            }
        }
    }
    if count == 0 {
        return None;
    }
    options[rng.random_range(0..count)]
}

/// Places `num_pairs` pairs uniformly over the drivable lane length, with
/// the receiver `gap` meters behind on the same lane.
pub fn init_pairs<R: Rng + ?Sized>(
    net: &RoadNetwork,
    config: &ScenarioConfig,
    rng: &mut R,
) -> Vec<PairKinematics> {
    (0..config.num_pairs)
        .map(|id| {
            let lane = rng.random_range(0..net.lanes.len());
            let crossings = &net.lanes[lane].crossings;
            let first = crossings.first().map_or(0.0, |c| c.s);
            let last = crossings.last().map_or(net.area_side, |c| c.s);
            let s = rng.random_range(first + config.pair_gap_max..last);
            let gap = if config.pair_gap_max > config.pair_gap_min {
                rng.random_range(config.pair_gap_min..=config.pair_gap_max)
            } else {
                config.pair_gap_min
            };
            let odometer = config.pair_gap_max;
            let mut pair = PairKinematics {
                id,
                lane,
                s,
                odometer,
                speed: config.vehicle_speed,
                gap,
                gap_min: config.pair_gap_min,
                gap_max: config.pair_gap_max,
                gap_drift: config.gap_drift,
                tx_position: Point::default(),
                rx_position: Point::default(),
                trail: alloc::vec![Segment {
                    lane,
                    start_odo: 0.0,
                    start_s: net.wrap(s - odometer),
                }],
                pending: None,
            };
            pair.refresh_positions(net);
            pair
        })
        .collect()
}

/// Advances every pair by `dt` seconds, in id order.
pub fn step_positions<R: Rng + ?Sized>(
    pairs: &mut [PairKinematics],
    net: &RoadNetwork,
    dt: f64,
    rng: &mut R,
) {
    for pair in pairs.iter_mut() {
        pair.advance(net, pair.speed * dt, rng);
        pair.step_gap(dt, rng);
        pair.refresh_positions(net);
    }
}

/// Distance between the pairs' representative (transmitter) coordinates.
pub fn pair_distance(a: &PairKinematics, b: &PairKinematics) -> f64 {
    a.tx_position.distance(b.tx_position)
}
