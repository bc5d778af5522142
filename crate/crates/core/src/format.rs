//! Round-trip float formatting for machine-readable output.

/// Shortest representation that parses back to the same `f64`, switching to exponent
/// notation outside `[1e-4, 1e15)`.
pub fn format_float(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || !x.is_finite() || (1e-4..1e15).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips() {
        for x in [
            0.0,
            1.0,
            -2.5,
            1e-20,
            0.1 + 0.2,
            6.02e23,
            1.2341e-4,
            3.0650321,
            f64::MIN_POSITIVE,
        ] {
            let s = format_float(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
        }
        assert_eq!(format_float(1e-20), "1e-20");
        assert_eq!(format_float(0.5), "0.5");
        assert_eq!(format_float(3.0), "3");
    }
}
