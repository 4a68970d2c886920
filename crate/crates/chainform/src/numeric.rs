//! Tolerance and accumulation helpers shared by the closed-form code paths.
//!
//! Every floor, fractional part, and sign test in the equilibrium formulas
//! goes through the snap helpers here, so knife-edge instances (margins that
//! are exactly zero up to floating-point noise) resolve the same way
//! everywhere.

/// Relative tolerance applied before floors, fractional parts, and sign tests.
pub const REL_TOL: f64 = 1e-9;

/// Collapse `x` to exactly zero when it sits within relative tolerance of it.
///
/// `scale` should carry the magnitude of the terms that produced `x`, so the
/// tolerance is relative to the computation rather than to a tiny result.
pub fn snap_margin(x: f64, scale: f64) -> f64 {
    if x.abs() <= REL_TOL * scale.abs().max(1.0) {
        0.0
    } else {
        x
    }
}

/// Floor with near-integers snapped onto the integer first.
pub fn floor_snapped(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() <= REL_TOL * x.abs().max(1.0) {
        r
    } else {
        x.floor()
    }
}

/// Ceiling counterpart of `floor_snapped`.
pub fn ceil_snapped(x: f64) -> f64 {
    -floor_snapped(-x)
}

/// Fractional part consistent with `floor_snapped`; always in [0, 1).
pub fn fract_snapped(x: f64) -> f64 {
    let f = x - floor_snapped(x);
    if f < 0.0 {
        0.0
    } else {
        f
    }
}

/// True when `a` and `b` agree within relative tolerance `tol`.
pub fn close_rel(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

/// Deterministic pairwise sum: a fixed reduction tree independent of thread
/// count, so Monte Carlo accumulation never depends on scheduling order.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 32 {
        let mut acc = 0.0;
        for &x in xs {
            acc += x;
        }
        acc
    } else {
        let mid = xs.len() / 2;
        pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snap_kills_noise_but_keeps_signal() {
        assert_eq!(snap_margin(1e-12, 1.0), 0.0);
        assert_eq!(snap_margin(-1e-12, 1.0), 0.0);
        assert_eq!(snap_margin(1e-6, 1.0), 1e-6);
        assert_eq!(snap_margin(3.0, 100.0), 3.0);
        // scale widens the snap window proportionally
        assert_eq!(snap_margin(1e-6, 1e4), 0.0);
    }

    #[test]
    fn floor_and_fract_agree_at_near_integers() {
        assert_eq!(floor_snapped(8.999999999999), 9.0);
        assert_eq!(floor_snapped(9.000000000001), 9.0);
        assert_eq!(floor_snapped(8.625), 8.0);
        assert_eq!(fract_snapped(8.999999999999), 0.0);
        assert_eq!(fract_snapped(8.625), 0.625);
        assert!(fract_snapped(8.3) >= 0.0 && fract_snapped(8.3) < 1.0);
        assert_eq!(ceil_snapped(9.000000000001), 9.0);
        assert_eq!(ceil_snapped(0.25), 1.0);
    }

    #[test]
    fn pairwise_sum_matches_naive_on_small_inputs() {
        let xs: Vec<f64> = (0..1000).map(|i| (i as f64) * 0.1).collect();
        let naive: f64 = xs.iter().sum();
        assert!((pairwise_sum(&xs) - naive).abs() < 1e-6);
        assert_eq!(pairwise_sum(&[]), 0.0);
    }
}
