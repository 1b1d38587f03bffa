//! Fast-timescale power control at each VUE pair.
//!
//! Every slot, pair `k` minimizes
//!
//! ```text
//! Σ_n V·P_n − w·ω·τ·Σ_n log2(1 + P_n·g_n/σ²),   w = F + Q + λ(t)
//! ```
//!
//! over its RB set subject to `Σ_n P_n ≤ P_max`, `P_n ≥ 0`. Stationarity
//! gives the water-filling level `P_n = w·ω·τ/((V+γ)·ln 2) − σ²/g_n` on
//! active RBs; the total-power multiplier `γ` is found by bisection.
//! Interference is not an input: the allocation sees only noise.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::LN_2;
use core::fmt;

/// Physical constants shared by every power decision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkParams {
    /// RB bandwidth ω (Hz).
    pub bandwidth: f64,
    /// Slot duration τ (s).
    pub slot: f64,
    /// Noise power σ² (W).
    pub noise: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PowerError {
    /// `V + γ = 0` with positive weight: the water level is unbounded.
    Unbounded,
    /// Bisection hit its iteration cap.
    NoConvergence,
}

impl fmt::Display for PowerError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PowerError::Unbounded => f.write_str("V + γ = 0 with positive weight: unbounded power"),
            PowerError::NoConvergence => f.write_str("power multiplier bisection did not converge"),
        }
    }
}

impl core::error::Error for PowerError {}

/// Power allocation of one pair for one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerDecision {
    pub pair: usize,
    /// RB indices the pair may use.
    pub rbs: Vec<usize>,
    /// Power on each of `rbs` (W).
    pub power: Vec<f64>,
    /// Total-power multiplier γ.
    pub gamma: f64,
    /// Drift-plus-penalty weight F + Q + λ(t) (bits).
    pub weight: f64,
}

impl PowerDecision {
    pub fn total_power(&self) -> f64 {
        self.power.iter().sum()
    }
}

/// `F + Q + λ(t)`.
#[inline]
pub fn drift_penalty_weight(f: f64, q: f64, arrival: f64) -> f64 {
    f + q + arrival
}

/// Power solving the stationarity condition on one RB for a fixed `γ`.
pub fn unconstrained_rb_power(
    weight: f64,
    gain: f64,
    v: f64,
    gamma: f64,
    link: &LinkParams,
) -> Result<f64, PowerError> {
    let level = weight * link.bandwidth * link.slot / LN_2;
    let price = v + gamma;
    if level <= 0.0 {
        return Ok(0.0);
    }
    if price <= 0.0 {
        return Err(PowerError::Unbounded);
    }
    if level * gain / link.noise > price {
        Ok(level / price - link.noise / gain)
    } else {
        Ok(0.0)
    }
}

/// Per-slot objective value for a given allocation.
pub fn slot_objective(weight: f64, gains: &[f64], power: &[f64], v: f64, link: &LinkParams) -> f64 {
    power
        .iter()
        .zip(gains)
        .map(|(&p, &g)| {
            v * p - weight * link.bandwidth * link.slot * libm::log2(1.0 + p * g / link.noise)
        })
        .sum()
}

const BUDGET_TOL: f64 = 1e-9;
const MAX_ITERS: usize = 200;

fn allocation(level: f64, price: f64, gains: &[f64], noise: f64) -> Vec<f64> {
    gains
        .iter()
        .map(|&g| {
            if level * g / noise > price {
                level / price - noise / g
            } else {
                0.0
            }
        })
        .collect()
}

/// Solves the per-slot power problem over `gains`.
///
/// Returns the per-RB powers and the multiplier `γ`. The result satisfies
/// `Σ P ≤ p_max`, and `Σ P ≥ (1 − 1e-9)·p_max` whenever `γ > 0`.
pub fn solve_power(
    weight: f64,
    gains: &[f64],
    v: f64,
    link: &LinkParams,
    p_max: f64,
) -> Result<(Vec<f64>, f64), PowerError> {
    let level = weight * link.bandwidth * link.slot / LN_2;
    if !(level > 0.0) || gains.is_empty() {
        return Ok((vec![0.0; gains.len()], 0.0));
    }
    if v > 0.0 {
        let p = allocation(level, v, gains, link.noise);
        if p.iter().sum::<f64>() <= p_max {
            return Ok((p, 0.0));
        }
    }
    let g_max = gains.iter().copied().fold(0.0, f64::max);
    let mut lo = 0.0;
    let mut hi = (level * g_max / link.noise - v).max(0.0);
    let budget = |gamma: f64| allocation(level, v + gamma, gains, link.noise);
    for _ in 0..MAX_ITERS {
        let p_hi = budget(hi);
        let total: f64 = p_hi.iter().sum();
        if p_max - total <= BUDGET_TOL * p_max {
            return Ok((p_hi, hi));
        }
        let mid = lo + (hi - lo) / 2.0;
        if mid <= lo || mid >= hi {
            // bracket exhausted at f64 resolution
            return Ok((p_hi, hi));
        }
        if budget(mid).iter().sum::<f64>() > p_max {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(PowerError::NoConvergence)
}

/// Builds the decision of pair `pair` over the RB subset `rbs`, reading the
/// own-link gains from the full per-RB vector `own_gains`.
pub fn decide(
    pair: usize,
    weight: f64,
    rbs: &[usize],
    own_gains: &[f64],
    v: f64,
    link: &LinkParams,
    p_max: f64,
) -> Result<PowerDecision, PowerError> {
    let gains: Vec<f64> = rbs.iter().map(|&n| own_gains[n]).collect();
    let (power, gamma) = solve_power(weight, &gains, v, link, p_max)?;
    Ok(PowerDecision {
        pair,
        rbs: rbs.to_vec(),
        power,
        gamma,
        weight,
    })
}

/// Baseline allocation: the same optimizer over every RB.
pub fn baseline_power(
    pair: usize,
    weight: f64,
    own_gains: &[f64],
    v: f64,
    link: &LinkParams,
    p_max: f64,
) -> Result<PowerDecision, PowerError> {
    let all: Vec<usize> = (0..own_gains.len()).collect();
    decide(pair, weight, &all, own_gains, v, link, p_max)
}
