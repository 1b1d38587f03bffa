//! Slow-timescale RSU control: proximity-aware zone formation and
//! QoS-proportional RB allocation, recomputed once per frame.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::Rng;

use crate::mobility::Point;
use crate::scenario::PairQos;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RsuError {
    /// Fewer pairs than zones: some zone would stay empty.
    TooFewPairs {
        pairs: usize,
        zones: usize,
    },
    /// Fewer RBs than zones: some zone would get no RB.
    TooFewRbs {
        rbs: usize,
        zones: usize,
    },
    NoZones,
}

impl fmt::Display for RsuError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RsuError::TooFewPairs { pairs, zones } => {
                write!(f, "cannot form {zones} zones from {pairs} pairs")
            }
            RsuError::TooFewRbs { rbs, zones } => {
                write!(f, "cannot give each of {zones} zones an RB out of {rbs}")
            }
            RsuError::NoZones => f.write_str("at least one zone is required"),
        }
    }
}

impl core::error::Error for RsuError {}

/// Zone membership and RB sets valid for one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct ZoneAssignment {
    pub frame: u64,
    /// Pair ids of each zone, in insertion order.
    pub zones: Vec<Vec<usize>>,
    /// RB indices (0-based) of each zone.
    pub rb_sets: Vec<Vec<usize>>,
    /// Pair picked at random to seed zone formation, if zoning ran.
    pub seed_pair: Option<usize>,
}

impl ZoneAssignment {
    /// One zone holding every pair and every RB.
    pub fn shared(frame: u64, num_pairs: usize, num_rbs: usize) -> Self {
        Self {
            frame,
            zones: vec![(0..num_pairs).collect()],
            rb_sets: vec![(0..num_rbs).collect()],
            seed_pair: None,
        }
    }

    /// Zone index of every pair.
    pub fn zone_of(&self, num_pairs: usize) -> Vec<usize> {
        let mut out = vec![usize::MAX; num_pairs];
        for (z, members) in self.zones.iter().enumerate() {
            for &k in members {
                out[k] = z;
            }
        }
        out
    }
}

/// Runs zone formation with a seed pair drawn uniformly from `rng`.
pub fn form_zones<R: Rng + ?Sized>(
    coords: &[Point],
    num_zones: usize,
    rng: &mut R,
) -> Result<(usize, Vec<Vec<usize>>), RsuError> {
    check_zone_count(coords.len(), num_zones)?;
    let seed = rng.random_range(0..coords.len());
    Ok((seed, form_zones_from(coords, num_zones, seed)?))
}

fn check_zone_count(pairs: usize, zones: usize) -> Result<(), RsuError> {
    if zones == 0 {
        return Err(RsuError::NoZones);
    }
    if pairs < zones {
        return Err(RsuError::TooFewPairs { pairs, zones });
    }
    Ok(())
}

/// Zone formation from a given seed pair.
///
/// Zone 0 starts with `seed`; zones 1.. are seeded one by one with the
/// unsorted pair nearest to `seed`. Every remaining pair, in id order, then
/// joins the zone whose closest member is farthest away. Ties go to the
/// lowest pair id and the lowest zone index.
pub fn form_zones_from(
    coords: &[Point],
    num_zones: usize,
    seed: usize,
) -> Result<Vec<Vec<usize>>, RsuError> {
    check_zone_count(coords.len(), num_zones)?;
    let mut zones: Vec<Vec<usize>> = Vec::with_capacity(num_zones);
    zones.push(vec![seed]);
    let mut unsorted: Vec<usize> = (0..coords.len()).filter(|&k| k != seed).collect();

    for _ in 1..num_zones {
        let (pos, _) = unsorted
            .iter()
            .enumerate()
            .map(|(i, &k)| (i, coords[seed].distance(coords[k])))
            .fold((usize::MAX, f64::INFINITY), |best, cur| {
                if cur.1 < best.1 {
                    cur
                } else {
                    best
                }
            });
        let nearest = unsorted.remove(pos);
        zones.push(vec![nearest]);
    }

    for k in unsorted {
        let mut best = (0, f64::NEG_INFINITY);
        for (z, members) in zones.iter().enumerate() {
            let closest = members
                .iter()
                .map(|&m| coords[k].distance(coords[m]))
                .fold(f64::INFINITY, f64::min);
            if closest > best.1 {
                best = (z, closest);
            }
        }
        zones[best.0].push(k);
    }
    Ok(zones)
}

/// Real-valued RB shares `N · Σ_{k∈z} p_k / Σ_k p_k` with pressure
/// `p_k = λ̄_k / (L_k ε_k)`.
pub fn rb_count_shares(zones: &[Vec<usize>], qos: &[PairQos], num_rbs: usize) -> Vec<f64> {
    let pressure: Vec<f64> = zones
        .iter()
        .map(|members| members.iter().map(|&k| qos[k].rb_pressure()).sum())
        .collect();
    let total: f64 = pressure.iter().sum();
    pressure
        .iter()
        .map(|p| num_rbs as f64 * p / total)
        .collect()
}

/// Rounds shares to integer RB counts (at least one each, largest remainder)
/// and hands out contiguous RB index ranges in zone order.
pub fn assign_rbs(shares: &[f64], num_rbs: usize) -> Result<Vec<Vec<usize>>, RsuError> {
    let zones = shares.len();
    if zones == 0 {
        return Err(RsuError::NoZones);
    }
    if num_rbs < zones {
        return Err(RsuError::TooFewRbs {
            rbs: num_rbs,
            zones,
        });
    }
    let mut counts: Vec<usize> = shares
        .iter()
        .map(|&s| (libm::floor(s) as usize).max(1))
        .collect();
    let surplus = |z: usize, counts: &[usize]| shares[z] - counts[z] as f64;

    let mut total: usize = counts.iter().sum();
    while total > num_rbs {
        // take back from the most over-served zone that can spare one
        let z = (0..zones)
            .filter(|&z| counts[z] > 1)
            .fold(None::<usize>, |best, z| match best {
                Some(b) if surplus(b, &counts) <= surplus(z, &counts) => Some(b),
                _ => Some(z),
            })
            .expect("num_rbs >= zones leaves a zone with more than one RB");
        counts[z] -= 1;
        total -= 1;
    }
    while total < num_rbs {
        let z = (0..zones)
            .fold(None::<usize>, |best, z| match best {
                Some(b) if surplus(b, &counts) >= surplus(z, &counts) => Some(b),
                _ => Some(z),
            })
            .unwrap();
        counts[z] += 1;
        total += 1;
    }

    let mut next = 0;
    Ok(counts
        .into_iter()
        .map(|c| {
            let set: Vec<usize> = (next..next + c).collect();
            next += c;
            set
        })
        .collect())
}

/// Full per-frame RSU decision.
pub fn allocate<R: Rng + ?Sized>(
    frame: u64,
    coords: &[Point],
    qos: &[PairQos],
    num_zones: usize,
    num_rbs: usize,
    rng: &mut R,
) -> Result<ZoneAssignment, RsuError> {
    let (seed, zones) = form_zones(coords, num_zones, rng)?;
    let shares = rb_count_shares(&zones, qos, num_rbs);
    let rb_sets = assign_rbs(&shares, num_rbs)?;
    Ok(ZoneAssignment {
        frame,
        zones,
        rb_sets,
        seed_pair: Some(seed),
    })
}
