//! Link gains on the Manhattan grid.
//!
//! Path loss follows a Berg-style corner recursion. With route legs
//! `l_0, …, l_m` separated by `m` corners and cumulative route length
//! `D_j = max(l_0, d0) + l_1 + … + l_j`:
//!
//! ```text
//! PL = PL0 + 10·n_los·log10(D_0 / d0)
//!      + Σ_{j=1..m} [ q_corner + 10·n_nlos·log10(D_j / D_{j-1}) ]
//! ```
//!
//! A single leg (`m = 0`) is the line-of-sight law
//! `PL0 + 10·n_los·log10(max(d, d0)/d0)` with `d` the Euclidean distance.
//! Gains are stored as linear power gains `g = |h|²`.

use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::Serialize;

use crate::mobility::{Axis, PairKinematics, Point, RoadNetwork};
use crate::scenario::Violation;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PathLossParams {
    /// Loss at the reference distance (dB).
    pub pl0_db: f64,
    /// Reference distance (m).
    pub d0: f64,
    pub n_los: f64,
    pub n_nlos: f64,
    /// Extra loss per corner (dB).
    pub corner_loss_db: f64,
}

impl Default for PathLossParams {
    fn default() -> Self {
        Self {
            pl0_db: 47.0,
            d0: 1.0,
            n_los: 2.0,
            n_nlos: 3.5,
            corner_loss_db: 10.0,
        }
    }
}

impl PathLossParams {
    pub(crate) fn validate_into(&self, out: &mut Vec<Violation>) {
        if !self.pl0_db.is_finite() {
            out.push(Violation {
                key: "path_loss.pl0_db",
                message: "path_loss.pl0_db must be finite".into(),
            });
        }
        if !(self.d0 > 0.0 && self.d0.is_finite()) {
            out.push(Violation {
                key: "path_loss.d0",
                message: "path_loss.d0 must be positive".into(),
            });
        }
        if !(self.n_los > 0.0 && self.n_los.is_finite()) {
            out.push(Violation {
                key: "path_loss.n_los",
                message: "path_loss.n_los must be positive".into(),
            });
        }
        if !(self.n_nlos >= self.n_los && self.n_nlos.is_finite()) {
            out.push(Violation {
                key: "path_loss.n_nlos",
                message: "path_loss.n_nlos must be at least n_los".into(),
            });
        }
        if !(self.corner_loss_db > 0.0 && self.corner_loss_db.is_finite()) {
            out.push(Violation {
                key: "path_loss.corner_loss_db",
                message: "path_loss.corner_loss_db must be positive".into(),
            });
        }
    }

    /// Line-of-sight loss at distance `d` (dB).
    pub fn los_db(&self, d: f64) -> f64 {
        self.pl0_db + 10.0 * self.n_los * libm::log10(d.max(self.d0) / self.d0)
    }

    /// Corner recursion over route legs (dB). One leg is the LOS law.
    pub fn route_db(&self, legs: &[f64]) -> f64 {
        let Some((&first, rest)) = legs.split_first() else {
            return self.pl0_db;
        };
        let mut dist = first.max(self.d0);
        let mut pl = self.los_db(first);
        for &leg in rest {
            let next = dist + leg;
            pl += self.corner_loss_db + 10.0 * self.n_nlos * libm::log10(next / dist);
            dist = next;
        }
        pl
    }
}

/// Rectilinear route along corridors from `tx` to `rx`, as legs between
/// corners. A single leg means the two points share a straight corridor.
pub fn manhattan_route(tx: Point, rx: Point, net: &RoadNetwork) -> Vec<f64> {
    for axis in [Axis::Horizontal, Axis::Vertical] {
        if net
            .corridors_containing(tx, axis)
            .any(|c| net.corridors_containing(rx, axis).any(|d| d == c))
        {
            return alloc::vec![tx.distance(rx)];
        }
    }
    let tx_c = membership(tx, net);
    let rx_c = membership(rx, net);
    let mut best: Option<Vec<f64>> = None;
    let mut consider = |legs: Vec<f64>| {
        let total: f64 = legs.iter().sum();
        let better = match &best {
            None => true,
            Some(b) => {
                let bt: f64 = b.iter().sum();
                total < bt || (total == bt && legs.len() < b.len())
            }
        };
        if better {
            best = Some(legs);
        }
    };
    let along = |p: Point, axis: Axis| match axis {
        Axis::Horizontal => p.x,
        Axis::Vertical => p.y,
    };
    for &(a, pa) in &tx_c {
        let ca = net.corridors[a];
        for &(b, pb) in &rx_c {
            let cb = net.corridors[b];
            if ca.axis != cb.axis {
                // one corner at the intersection of a and b
                consider(alloc::vec![
                    pa + libm::fabs(along(tx, ca.axis) - cb.center),
                    libm::fabs(along(rx, cb.axis) - ca.center) + pb,
                ]);
            } else if a != b {
                // two corners through any perpendicular corridor
                for cv in net.corridors.iter().filter(|c| c.axis != ca.axis) {
                    consider(alloc::vec![
                        pa + libm::fabs(along(tx, ca.axis) - cv.center),
                        libm::fabs(ca.center - cb.center),
                        libm::fabs(along(rx, cb.axis) - cv.center) + pb,
                    ]);
                }
            }
        }
    }
    best.unwrap_or_else(|| alloc::vec![tx.distance(rx)])
}

/// Corridors holding `p`, each with the perpendicular distance needed to
/// reach it (zero when inside). Points off the road snap to the nearest one.
fn membership(p: Point, net: &RoadNetwork) -> Vec<(usize, f64)> {
    let mut inside: Vec<(usize, f64)> = net
        .corridors_containing(p, Axis::Horizontal)
        .chain(net.corridors_containing(p, Axis::Vertical))
        .map(|c| (c, 0.0))
        .collect();
    if inside.is_empty() {
        let half = net.corridor_width / 2.0;
        let mut nearest = (0, f64::INFINITY);
        for (i, c) in net.corridors.iter().enumerate() {
            let coord = match c.axis {
                Axis::Horizontal => p.y,
                Axis::Vertical => p.x,
            };
            let d = (libm::fabs(coord - c.center) - half).max(0.0);
            if d < nearest.1 {
                nearest = (i, d);
            }
        }
        inside.push(nearest);
    }
    inside
}

/// Path loss from `tx` to `rx` in dB.
pub fn path_loss(tx: Point, rx: Point, net: &RoadNetwork, params: &PathLossParams) -> f64 {
    params.route_db(&manhattan_route(tx, rx, net))
}

/// Linear power gains `g[k', k, n]` from the transmitter of pair `k'` to the
/// receiver of pair `k` on RB `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelState {
    pub slot: u64,
    pub num_pairs: usize,
    pub num_rbs: usize,
    gains: Vec<f64>,
}

impl ChannelState {
    /// Wraps a flat gain array laid out as `[(tx * K + rx) * N + rb]`.
    ///
    /// # Panics
    ///
    /// Panics if `gains.len() != num_pairs² · num_rbs`.
    pub fn from_parts(slot: u64, num_pairs: usize, num_rbs: usize, gains: Vec<f64>) -> Self {
        assert_eq!(gains.len(), num_pairs * num_pairs * num_rbs);
        Self {
            slot,
            num_pairs,
            num_rbs,
            gains,
        }
    }

    #[inline]
    fn index(&self, tx: usize, rx: usize, rb: usize) -> usize {
        (tx * self.num_pairs + rx) * self.num_rbs + rb
    }

    #[inline]
    pub fn gain(&self, tx: usize, rx: usize, rb: usize) -> f64 {
        self.gains[self.index(tx, rx, rb)]
    }

    /// Gains of pair `k`'s own link over all RBs.
    pub fn own_gains(&self, k: usize) -> &[f64] {
        let start = self.index(k, k, 0);
        &self.gains[start..start + self.num_rbs]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.gains
    }
}

/// Draws the channel of one slot. Each pair's own link uses the LOS law at
/// the pair's route gap; every other link follows the Manhattan route.
/// With fading enabled, each (link, RB) gain is scaled by an independent
/// unit-mean exponential draw.
pub fn gain_matrix<R: Rng + ?Sized>(
    pairs: &[PairKinematics],
    net: &RoadNetwork,
    num_rbs: usize,
    slot: u64,
    fading: Option<&mut R>,
    params: &PathLossParams,
) -> ChannelState {
    let k = pairs.len();
    let mut gains = Vec::with_capacity(k * k * num_rbs);
    let mut fading = fading;
    for tx in pairs {
        for rx in pairs {
            let pl = if tx.id == rx.id {
                params.los_db(tx.gap)
            } else {
                path_loss(tx.tx_position, rx.rx_position, net, params)
            };
            let base = libm::pow(10.0, -pl / 10.0);
            for _ in 0..num_rbs {
                let f = match fading.as_deref_mut() {
                    Some(rng) => {
                        let f: f64 = Exp1.sample(rng);
                        f
                    }
                    None => 1.0,
                };
                gains.push(base * f);
            }
        }
    }
    ChannelState {
        slot,
        num_pairs: k,
        num_rbs,
        gains,
    }
}
