//! Supremum search for monotone win predicates.
//!
//! A predicate `wins(x)` is monotone when winning at `x` implies winning at
//! every smaller `x`. Its threshold is the supremum of winning reports.

/// Points of the brute-force fallback grid.
pub const FALLBACK_GRID_POINTS: usize = 1000;
/// Points probed by the monotonicity pre-check.
pub const MONOTONICITY_PROBES: usize = 64;

/// `points` evenly spaced values covering `[lo, hi]`, endpoints included.
pub fn grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let step = (hi - lo) / (points - 1) as f64;
            (0..points)
                .map(|k| if k == points - 1 { hi } else { lo + step * k as f64 })
                .collect()
        }
    }
}

/// First `(winning, losing)` pair with `losing < winning` among ascending
/// `points`, if any.
pub fn find_monotonicity_violation(
    wins: impl Fn(f64) -> bool,
    points: &[f64],
) -> Option<(f64, f64)> {
    let mut first_loss: Option<f64> = None;
    for &x in points {
        if wins(x) {
            if let Some(loss) = first_loss {
                return Some((x, loss));
            }
        } else if first_loss.is_none() {
            first_loss = Some(x);
        }
    }
    None
}

/// Largest winning point of an exhaustive sweep.
pub fn sweep_supremum(wins: impl Fn(f64) -> bool, points: &[f64]) -> Option<f64> {
    points
        .iter()
        .copied()
        .filter(|&x| wins(x))
        .max_by(f64::total_cmp)
}

fn next_down(x: f64) -> f64 {
    if x > 0.0 {
        f64::from_bits(x.to_bits() - 1)
    } else if x == 0.0 {
        -f64::from_bits(1)
    } else {
        f64::from_bits(x.to_bits() + 1)
    }
}

/// Bisects `[lo, hi]` down to `resolution`, then snaps to the largest
/// `breakpoint` inside the final bracket that is the supremum of winning
/// reports. Requires `wins(lo)`.
pub fn bisect_supremum(
    wins: impl Fn(f64) -> bool,
    mut lo: f64,
    mut hi: f64,
    resolution: f64,
    breakpoints: &[f64],
) -> f64 {
    debug_assert!(wins(lo));
    if hi <= lo || wins(hi) {
        return hi.max(lo);
    }
    while hi - lo > resolution {
        let mid = lo + (hi - lo) / 2.0;
        if mid <= lo || mid >= hi {
            break;
        }
        if wins(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut inside: Vec<f64> = breakpoints
        .iter()
        .copied()
        .filter(|&b| b > lo && b <= hi)
        .collect();
    inside.sort_by(|a, b| b.total_cmp(a));
    for b in inside {
        // Attained supremum, or an open endpoint just above the last win.
        if wins(b) || wins(next_down(b)) {
            return b;
        }
    }
    lo
}
