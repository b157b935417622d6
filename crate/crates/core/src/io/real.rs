//! Decimal rendering of reals that reads back bit-exactly.

/// 17 significant digits in scientific notation, enough to round-trip any f64.
pub fn fmt_real(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "NaN".to_string()
    } else if v > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}
