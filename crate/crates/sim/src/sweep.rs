//! Independent runs in parallel. Each run derives its random streams from
//! its own config, so results do not depend on scheduling.

use rayon::prelude::*;
use v2v_core::engine::EngineError;
use v2v_core::{run, RunMetrics, ScenarioConfig, Scheme};

/// Runs every config, returning metrics in input order.
pub fn run_all(configs: &[ScenarioConfig]) -> Result<Vec<RunMetrics>, EngineError> {
    configs.par_iter().map(run).collect()
}

/// One config per `(V, scheme)` cell, V-major.
pub fn v_grid(base: &ScenarioConfig, v_values: &[f64], schemes: &[Scheme]) -> Vec<ScenarioConfig> {
    v_values
        .iter()
        .flat_map(|&v| {
            schemes.iter().map(move |&scheme| ScenarioConfig {
                lyapunov_v: v,
                scheme,
                ..base.clone()
            })
        })
        .collect()
}

/// `points` log-spaced values from `min` to `max` inclusive.
pub fn log_space(min: f64, max: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![min],
        _ => {
            let (lo, hi) = (min.log10(), max.log10());
            (0..points)
                .map(|i| 10f64.powf(lo + (hi - lo) * i as f64 / (points - 1) as f64))
                .collect()
        }
    }
}
