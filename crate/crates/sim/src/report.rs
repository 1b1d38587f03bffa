//! Derived tables: CCDF grids, tail quantiles and latency reductions.

/// `10^exponent`, correctly rounded for the exponents used in level grids.
fn decade(exponent: i32) -> f64 {
    if exponent >= 0 {
        10f64.powi(exponent)
    } else {
        1.0 / 10f64.powi(-exponent)
    }
}

/// Latency levels `0` followed by `per_decade` log-spaced points per decade
/// from `min` up to `max`. Exact powers of ten fall on the grid whenever
/// `min` is one.
pub fn log_level_grid(min: f64, max: f64, per_decade: u32) -> Vec<f64> {
    assert!(min > 0.0 && max >= min && per_decade > 0, "bad level grid");
    let mut out = vec![0.0];
    let lo = min.log10();
    let steps = ((max.log10() - lo) * per_decade as f64 + 1e-9).floor() as u32;
    for i in 0..=steps {
        let x = lo + i as f64 / per_decade as f64;
        let nearest = x.round();
        let level = if (x - nearest).abs() < 1e-9 {
            decade(nearest as i32)
        } else {
            10f64.powf(x)
        };
        out.push(level);
    }
    out
}

/// Level at which a non-increasing CCDF first reaches `target`, by linear
/// interpolation in `log10(ccdf)` between the bracketing grid rows. `None`
/// if the tail never gets down to `target` on the grid.
pub fn level_at_ccdf(table: &[(f64, f64)], target: f64) -> Option<f64> {
    let i = table.iter().position(|&(_, p)| p <= target)?;
    if i == 0 {
        return Some(table[0].0);
    }
    let (l0, p0) = table[i - 1];
    let (l1, p1) = table[i];
    let t = if p1 > 0.0 {
        (p0.ln() - target.ln()) / (p0.ln() - p1.ln())
    } else {
        (p0 - target) / (p0 - p1)
    };
    Some(l0 + t * (l1 - l0))
}

/// Relative latency reduction `1 − latency / reference`. Zero when both are
/// zero.
pub fn latency_reduction(latency: f64, reference: f64) -> f64 {
    if reference > 0.0 {
        1.0 - latency / reference
    } else if latency > 0.0 {
        f64::NEG_INFINITY
    } else {
        0.0
    }
}
