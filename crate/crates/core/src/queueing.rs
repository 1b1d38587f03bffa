//! Data queue, virtual queue and traffic arrivals.

use core::fmt;

use rand::Rng;
use rand_distr::{Distribution, Poisson};

use crate::scenario::PairQos;

/// Queue state of one pair, in bits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueuePairState {
    /// Data queue Q.
    pub q: f64,
    /// Virtual queue F.
    pub f: f64,
    /// Arrival of the current slot.
    pub arrival: f64,
    pub qos: PairQos,
}

impl QueuePairState {
    pub fn new(qos: PairQos) -> Self {
        Self {
            q: 0.0,
            f: 0.0,
            arrival: 0.0,
            qos,
        }
    }

    /// Applies one slot of service at rate `rate` (bits/s) and returns the
    /// new data queue length.
    pub fn serve(&mut self, rate: f64, tau: f64) -> f64 {
        self.q = update_queue(self.q, self.arrival, rate, tau);
        self.f = update_virtual_queue(
            self.f,
            self.q,
            self.qos.queue_bound,
            self.qos.reliability_eps,
        );
        self.q
    }
}

/// Poisson number of bits with mean `mean_rate * tau`.
pub fn draw_arrival<R: Rng + ?Sized>(mean_rate: f64, tau: f64, rng: &mut R) -> f64 {
    let mean = mean_rate * tau;
    if !(mean > 0.0) {
        return 0.0;
    }
    match Poisson::new(mean) {
        Ok(p) => p.sample(rng),
        Err(_) => 0.0,
    }
}

/// `max{Q + arrival − τ·R, 0}`.
#[inline]
pub fn update_queue(q: f64, arrival: f64, rate: f64, tau: f64) -> f64 {
    (q + arrival - tau * rate).max(0.0)
}

/// `max{F + Q_next − L·ε, 0}`.
#[inline]
pub fn update_virtual_queue(f: f64, q_next: f64, queue_bound: f64, eps: f64) -> f64 {
    (f + q_next - queue_bound * eps).max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ZeroArrivalRate;

impl fmt::Display for ZeroArrivalRate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("mean arrival rate must be positive to compute latency")
    }
}

impl core::error::Error for ZeroArrivalRate {}

/// Queuing latency `Q / λ̄` in seconds.
pub fn instantaneous_latency(q: f64, mean_rate: f64) -> Result<f64, ZeroArrivalRate> {
    if mean_rate > 0.0 {
        Ok(q / mean_rate)
    } else {
        Err(ZeroArrivalRate)
    }
}
