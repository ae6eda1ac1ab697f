//! Mid-tread ADC quantization model.
//!
//! Codes are unsigned `0 .. 2^bits - 1` with the mid-tread mapping
//! `code = clamp(round(v / lsb) + 2^(bits-1), 0, 2^bits - 1)`, so 0 V maps
//! to an exact code and dequantization error is at most half an LSB for
//! in-range inputs. Rounding is round-half-away-from-zero (`f64::round`).

use crate::error::{Error, Result};

/// LSB in millivolts for a `bits`-wide converter spanning `+/- range_mv`.
pub fn adc_lsb_mv(bits: u32, range_mv: f64) -> f64 {
    2.0 * range_mv / (1u64 << bits) as f64
}

pub fn check_adc_params(bits: u32, range_mv: f64) -> Result<()> {
    if !(2..=16).contains(&bits) {
        return Err(Error::InvalidConfig(format!(
            "adc_bits must be in 2..=16, got {bits}"
        )));
    }
    if !(range_mv > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "adc range must be positive, got {range_mv}"
        )));
    }
    Ok(())
}

/// Quantize one sample (millivolts) to an ADC code.
pub fn adc_quantize_sample(v_mv: f64, bits: u32, range_mv: f64) -> u16 {
    let lsb = adc_lsb_mv(bits, range_mv);
    let mid = (1u64 << (bits - 1)) as f64;
    let max_code = ((1u64 << bits) - 1) as f64;
    let code = ((v_mv / lsb).round() + mid).clamp(0.0, max_code);
    code as u16
}

/// Dequantize an ADC code back to millivolts.
pub fn adc_dequantize_sample(code: u16, bits: u32, range_mv: f64) -> f64 {
    let lsb = adc_lsb_mv(bits, range_mv);
    let mid = (1u64 << (bits - 1)) as i64;
    (i64::from(code) - mid) as f64 * lsb
}

pub fn adc_quantize(signal_mv: &[f64], bits: u32, range_mv: f64) -> Result<Vec<u16>> {
    check_adc_params(bits, range_mv)?;
    Ok(signal_mv
        .iter()
        .map(|&v| adc_quantize_sample(v, bits, range_mv))
        .collect())
}

pub fn adc_dequantize(codes: &[u16], bits: u32, range_mv: f64) -> Result<Vec<f64>> {
    check_adc_params(bits, range_mv)?;
    Ok(codes
        .iter()
        .map(|&c| adc_dequantize_sample(c, bits, range_mv))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_maps_to_mid_code() {
        assert_eq!(adc_quantize_sample(0.0, 12, 600.0), 2048);
        assert_eq!(adc_dequantize_sample(2048, 12, 600.0), 0.0);
    }

    #[test]
    fn twelve_bit_lsb_is_exact() {
        // 1200 mV / 4096 codes
        assert_eq!(adc_lsb_mv(12, 600.0), 0.29296875);
        // Max in-range quantization error is half an LSB, about the
        // converter's +/-0.15 mV resolution.
        assert_eq!(adc_lsb_mv(12, 600.0) / 2.0, 0.146484375);
    }

    #[test]
    fn positive_rail_clamps_to_max_code() {
        assert_eq!(adc_quantize_sample(600.0, 12, 600.0), 4095);
        assert_eq!(adc_quantize_sample(1e9, 12, 600.0), 4095);
        assert_eq!(adc_quantize_sample(-1e9, 12, 600.0), 0);
    }

    #[test]
    fn bits_out_of_range_rejected() {
        assert!(adc_quantize(&[0.0], 1, 600.0).is_err());
        assert!(adc_quantize(&[0.0], 17, 600.0).is_err());
        assert!(adc_quantize(&[0.0], 12, 0.0).is_err());
    }

    proptest! {
        #[test]
        fn round_trip_error_within_half_lsb(v in -599.0f64..599.0) {
            let code = adc_quantize_sample(v, 12, 600.0);
            let back = adc_dequantize_sample(code, 12, 600.0);
            let lsb = adc_lsb_mv(12, 600.0);
            prop_assert!((back - v).abs() <= lsb / 2.0 + 1e-12);
        }

        #[test]
        fn quantization_is_monotone(a in -700.0f64..700.0, b in -700.0f64..700.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(
                adc_quantize_sample(lo, 12, 600.0) <= adc_quantize_sample(hi, 12, 600.0)
            );
        }
    }
}
