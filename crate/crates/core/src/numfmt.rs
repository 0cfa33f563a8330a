//! Float formatting shared by every text format.

/// Shortest decimal string that parses back to the same `f64`. Magnitudes
/// outside `[1e-5, 1e16)` use exponent notation; NaN is written `nan`.
pub fn format_f64(x: f64) -> String {
    if x.is_nan() {
        return "nan".to_string();
    }
    let mag = x.abs();
    if x == 0.0 || x.is_infinite() || (1e-5..1e16).contains(&mag) {
        x.to_string()
    } else {
        format!("{x:e}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn representative_values() {
        assert_eq!(format_f64(0.0), "0");
        assert_eq!(format_f64(0.875), "0.875");
        assert_eq!(format_f64(-2.5), "-2.5");
        assert_eq!(format_f64(3.7989572168697965e-5), "0.000037989572168697965");
        assert_eq!(format_f64(1.1548683095408758e-8), "1.1548683095408758e-8");
        assert_eq!(format_f64(f64::NAN), "nan");
        assert_eq!(format_f64(f64::INFINITY), "inf");
    }

    proptest! {
        #[test]
        fn round_trips(bits in any::<u64>()) {
            let x = f64::from_bits(bits);
            prop_assume!(x.is_finite());
            let back: f64 = format_f64(x).parse().unwrap();
            prop_assert_eq!(back.to_bits(), x.to_bits());
        }
    }
}
