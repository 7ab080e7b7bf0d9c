//! Float-to-count conversions that survive decimal inputs.
//!
//! Durations arrive as decimal seconds (`0.07`, `45.3`) which are not exact
//! binary fractions. A naive `(d * 100.0).ceil()` turns `0.07 * 100 =
//! 7.000000000000001` into 8 frames. Each helper therefore snaps values that
//! sit within 1e-9 (relative) of an integer onto that integer before
//! truncating. The tolerance is far below any meaningful duration resolution
//! and far above accumulated f64 noise, so the snap never changes a
//! deliberately fractional value.

const REL_TOL: f64 = 1e-9;

fn snap(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() <= REL_TOL * x.abs().max(1.0) {
        r
    } else {
        x
    }
}

/// `ceil(x)` with integer snapping; `x` must be finite and non-negative.
pub(crate) fn snap_ceil(x: f64) -> u64 {
    debug_assert!(x.is_finite() && x >= -REL_TOL);
    snap(x).ceil().max(0.0) as u64
}

/// `floor(x)` with integer snapping; `x` must be finite and non-negative.
pub(crate) fn snap_floor(x: f64) -> u64 {
    debug_assert!(x.is_finite() && x >= -REL_TOL);
    snap(x).floor().max(0.0) as u64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ceil_of_decimal_products() {
        // 0.07 * 100 lands just above 7.0 in f64; it must stay 7 frames.
        assert_eq!(snap_ceil(0.07 * 100.0), 7);
        assert_eq!(snap_ceil(0.505 * 100.0), 51);
        assert_eq!(snap_ceil(30.0 * 100.0), 3000);
        assert_eq!(snap_ceil(0.0), 0);
        assert_eq!(snap_ceil(6.25), 7);
    }

    #[test]
    fn floor_of_near_integers() {
        // 0.1 * 30 = 2.9999999999999996 in f64: three whole frames.
        assert_eq!(snap_floor(0.1 * 30.0), 3);
        assert_eq!(snap_floor(89.99), 89);
        assert_eq!(snap_floor(90.0 / 30.0), 3);
        assert_eq!(snap_floor(6.9999), 6);
    }
}
