//! Behavioral model of the analog recording chain.
//!
//! Synthetic signals traverse the same numeric path the hardware imposes:
//! input-referred noise, band-pass filtering, programmable gain into the
//! converter range, 12-bit mid-tread quantization, and back to an
//! input-referred digital signal. The model is single-ended and ignores
//! converter nonlinearities; corner frequencies and noise figures follow
//! the measured amplifier configurations.

mod adc;
mod biquad;

pub use adc::{
    adc_dequantize, adc_dequantize_sample, adc_lsb_mv, adc_quantize, adc_quantize_sample,
    check_adc_params,
};
pub use biquad::{analytic_bandpass_gain, bandpass, BandPass, Biquad};

use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::seed;

/// Gain, band and converter settings of one recording channel.
///
/// `noise_rms_uv` is the input-referred white-noise RMS added before the
/// filter, in the channel's input unit (microvolts for EEG/EMG; the ACC
/// preset reuses the field for g).
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FrontEndConfig {
    pub gain: f64,
    pub band_lo_hz: f64,
    pub band_hi_hz: f64,
    pub noise_rms_uv: f64,
    pub adc_bits: u32,
    pub adc_range_mv: f64,
    /// Expected peak input amplitude, used only for the clipping headroom
    /// warning; `None` skips the check.
    pub expected_input_uv: Option<f64>,
}

impl FrontEndConfig {
    /// EEG channel: gain 200, 0.5-60 Hz, 1.9 uV input-referred noise
    /// (chopper stabilization on).
    pub fn eeg() -> Self {
        FrontEndConfig {
            gain: 200.0,
            band_lo_hz: 0.5,
            band_hi_hz: 60.0,
            noise_rms_uv: 1.9,
            adc_bits: 12,
            adc_range_mv: 600.0,
            expected_input_uv: Some(3000.0),
        }
    }

    /// EEG channel in the wide amplifier-test configuration (0.5-200 Hz).
    pub fn eeg_amp_test() -> Self {
        FrontEndConfig {
            band_hi_hz: 200.0,
            ..Self::eeg()
        }
    }

    /// EMG channel: gain 50, 1-1000 Hz, 4.3 uV input-referred noise
    /// (chopper stabilization off). The full band needs sampling above
    /// 2 kHz; see [`FrontEndConfig::emg_at_rate`] for lower rates.
    pub fn emg() -> Self {
        FrontEndConfig {
            gain: 50.0,
            band_lo_hz: 1.0,
            band_hi_hz: 1000.0,
            noise_rms_uv: 4.3,
            adc_bits: 12,
            adc_range_mv: 600.0,
            expected_input_uv: Some(12_000.0),
        }
    }

    /// EMG preset with the analog low-pass corner clamped under Nyquist for
    /// the given sample rate (surface-EMG energy is concentrated well below
    /// the amplifier's 1 kHz corner).
    pub fn emg_at_rate(sample_rate_hz: f64) -> Self {
        let mut cfg = Self::emg();
        cfg.band_hi_hz = cfg.band_hi_hz.min(0.45 * sample_rate_hz);
        cfg
    }

    /// Accelerometer channel. ACC samples bypass the bio-amplifier; the
    /// ADXL's +/-10 g full scale is mapped onto the +/-600 mV converter
    /// range (60 mV per g), so `gain` here converts g to the converter
    /// input and `noise_rms_uv` is in g.
    pub fn acc() -> Self {
        FrontEndConfig {
            gain: 60_000.0,
            band_lo_hz: 0.5,
            band_hi_hz: 40.0,
            noise_rms_uv: 0.002,
            adc_bits: 12,
            adc_range_mv: 600.0,
            expected_input_uv: Some(10.0),
        }
    }

    /// Validate against a sample rate; returns configuration warnings
    /// (currently only the clipping-headroom check).
    pub fn validate(&self, sample_rate_hz: f64) -> Result<Vec<String>> {
        if !(self.gain > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "gain must be positive, got {}",
                self.gain
            )));
        }
        if !(self.noise_rms_uv >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "noise RMS must be non-negative, got {}",
                self.noise_rms_uv
            )));
        }
        if !(0.0 < self.band_lo_hz
            && self.band_lo_hz < self.band_hi_hz
            && self.band_hi_hz < sample_rate_hz / 2.0)
        {
            return Err(Error::InvalidConfig(format!(
                "band [{}, {}] Hz invalid at {} Hz sampling",
                self.band_lo_hz, self.band_hi_hz, sample_rate_hz
            )));
        }
        check_adc_params(self.adc_bits, self.adc_range_mv)?;
        let mut warnings = Vec::new();
        if let Some(expected_uv) = self.expected_input_uv {
            let peak_mv = self.gain * expected_uv / 1000.0;
            if peak_mv > 2.0 * self.adc_range_mv {
                warnings.push(format!(
                    "configured clipping: gain {} x expected input {} uV reaches {} mV \
                     against a +/-{} mV converter",
                    self.gain, expected_uv, peak_mv, self.adc_range_mv
                ));
            }
        }
        Ok(warnings)
    }

    /// Half an LSB referred to the input, in the channel's input unit.
    /// EEG at gain 200: 0.732... uV; EMG at gain 50: 2.929... uV.
    pub fn input_referred_half_lsb_uv(&self) -> f64 {
        adc_lsb_mv(self.adc_bits, self.adc_range_mv) / 2.0 / self.gain * 1000.0
    }
}

/// Apply gain and clamp into the converter range. Input in microvolts,
/// output in millivolts; returns the number of clipped samples.
pub fn amplify(signal_uv: &[f64], gain: f64, adc_range_mv: f64) -> (Vec<f64>, usize) {
    let mut clipped = 0usize;
    let out = signal_uv
        .iter()
        .map(|&v| {
            let mv = v * gain / 1000.0;
            if mv.abs() > adc_range_mv {
                clipped += 1;
                mv.clamp(-adc_range_mv, adc_range_mv)
            } else {
                mv
            }
        })
        .collect();
    (out, clipped)
}

/// Add white Gaussian noise of the given RMS. Deterministic per seed.
pub fn add_input_noise(signal_uv: &[f64], noise_rms_uv: f64, rng_seed: u64) -> Vec<f64> {
    if noise_rms_uv == 0.0 {
        return signal_uv.to_vec();
    }
    let normal = Normal::new(0.0, noise_rms_uv).expect("valid noise RMS");
    let mut rng = seed::rng(rng_seed);
    signal_uv
        .iter()
        .map(|&v| v + normal.sample(&mut rng))
        .collect()
}

/// Output of the full front-end pass.
#[derive(Debug, Clone)]
pub struct FrontEndOutput {
    /// Digitized signal referred back to the input (same unit as the input).
    pub samples_uv: Vec<f64>,
    /// Raw converter codes.
    pub codes: Vec<u16>,
    /// Samples clamped at the converter rails.
    pub clipped: usize,
}

/// Run a signal through the whole chain: noise injection, band-pass, gain
/// with rail clamping, mid-tread quantization, and back to an
/// input-referred digital signal.
pub fn front_end_pipeline(
    signal_uv: &[f64],
    cfg: &FrontEndConfig,
    sample_rate_hz: f64,
    rng_seed: u64,
) -> Result<FrontEndOutput> {
    cfg.validate(sample_rate_hz)?;
    let noisy = add_input_noise(signal_uv, cfg.noise_rms_uv, rng_seed);
    let filtered = bandpass(&noisy, cfg.band_lo_hz, cfg.band_hi_hz, sample_rate_hz)?;
    let (amplified_mv, clipped) = amplify(&filtered, cfg.gain, cfg.adc_range_mv);
    let codes = adc_quantize(&amplified_mv, cfg.adc_bits, cfg.adc_range_mv)?;
    let dequantized_mv = adc_dequantize(&codes, cfg.adc_bits, cfg.adc_range_mv)?;
    let samples_uv = dequantized_mv
        .iter()
        .map(|&mv| mv / cfg.gain * 1000.0)
        .collect();
    Ok(FrontEndOutput {
        samples_uv,
        codes,
        clipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn amplify_examples() {
        // 1 uV at gain 200 -> 0.2 mV
        let (out, clipped) = amplify(&[1.0], 200.0, 600.0);
        assert_eq!(out[0], 0.2);
        assert_eq!(clipped, 0);

        // 3 mV input at gain 200 lands exactly on the converter rail.
        let (out, clipped) = amplify(&[3000.0], 200.0, 600.0);
        assert_eq!(out[0], 600.0);
        assert_eq!(clipped, 0);

        // 5 mV at gain 200 clamps, and the clip counter says so.
        let (out, clipped) = amplify(&[5000.0], 200.0, 600.0);
        assert_eq!(out[0], 600.0);
        assert_eq!(clipped, 1);
    }

    #[test]
    fn zero_noise_is_identity() {
        let signal = vec![1.0, -2.0, 3.0];
        assert_eq!(add_input_noise(&signal, 0.0, 7), signal);
    }

    #[test]
    fn noise_rms_matches_request() {
        let n = 1_000_000;
        let out = add_input_noise(&vec![0.0; n], 1.9, 42);
        let mean = out.iter().sum::<f64>() / n as f64;
        let var = out.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        let std = var.sqrt();
        assert!((std - 1.9).abs() / 1.9 < 0.01, "std {std}");
        // Mean preserved within 3 RMS / sqrt(N).
        assert!(mean.abs() < 3.0 * 1.9 / (n as f64).sqrt(), "mean {mean}");
    }

    #[test]
    fn noise_is_deterministic_per_seed() {
        let signal: Vec<f64> = (0..256).map(|i| i as f64).collect();
        let a = add_input_noise(&signal, 4.3, 1234);
        let b = add_input_noise(&signal, 4.3, 1234);
        let c = add_input_noise(&signal, 4.3, 1235);
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn input_referred_resolution_matches_hardware_figures() {
        // EEG at gain 200: effective input range +/-3 mV and half-LSB
        // 0.7324 uV; EMG at gain 50: +/-12 mV range and 2.9297 uV.
        let eeg = FrontEndConfig::eeg();
        assert_eq!(eeg.input_referred_half_lsb_uv(), 0.732421875);
        let emg = FrontEndConfig::emg();
        assert_eq!(emg.input_referred_half_lsb_uv(), 2.9296875);
    }

    #[test]
    fn pipeline_round_trips_within_half_lsb_of_filtered_path() {
        let fs = 500.0;
        let n = (fs * 10.0) as usize;
        // +/-1 mV (1000 uV) 10 Hz sine through a wide band at gain 200.
        let signal: Vec<f64> = (0..n)
            .map(|i| 1000.0 * (2.0 * std::f64::consts::PI * 10.0 * i as f64 / fs).sin())
            .collect();
        let cfg = FrontEndConfig {
            gain: 200.0,
            band_lo_hz: 0.05,
            band_hi_hz: 240.0,
            noise_rms_uv: 0.0,
            adc_bits: 12,
            adc_range_mv: 600.0,
            expected_input_uv: None,
        };
        let out = front_end_pipeline(&signal, &cfg, fs, 1).unwrap();
        assert_eq!(out.clipped, 0);
        // Quantization is the only difference against the filter-only path.
        let filtered = bandpass(&signal, cfg.band_lo_hz, cfg.band_hi_hz, fs).unwrap();
        let half_lsb_uv = cfg.input_referred_half_lsb_uv();
        let max_err = out
            .samples_uv
            .iter()
            .zip(&filtered)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert!(max_err <= half_lsb_uv + 1e-9, "max err {max_err} uV");
    }

    #[test]
    fn saturated_input_reports_clipping() {
        let fs = 500.0;
        let signal = vec![10_000.0; 512]; // 10 mV at gain 200 -> 2 V >> rail
        let mut cfg = FrontEndConfig::eeg();
        cfg.noise_rms_uv = 0.0;
        cfg.band_lo_hz = 0.05; // keep the step from being fully rejected
        let out = front_end_pipeline(&signal, &cfg, fs, 1).unwrap();
        assert!(out.clipped > 0);
    }

    #[test]
    fn pipeline_is_deterministic() {
        let signal: Vec<f64> = (0..500).map(|i| (i as f64 * 0.1).sin() * 50.0).collect();
        let cfg = FrontEndConfig::eeg();
        let a = front_end_pipeline(&signal, &cfg, 500.0, 99).unwrap();
        let b = front_end_pipeline(&signal, &cfg, 500.0, 99).unwrap();
        assert_eq!(a.samples_uv, b.samples_uv);
        assert_eq!(a.codes, b.codes);
    }

    #[test]
    fn clipping_headroom_warning() {
        let mut cfg = FrontEndConfig::eeg();
        cfg.expected_input_uv = Some(10_000.0); // 2 V at gain 200
        let warnings = cfg.validate(500.0).unwrap();
        assert_eq!(warnings.len(), 1);
        assert!(warnings[0].contains("configured clipping"));
        assert!(FrontEndConfig::eeg().validate(500.0).unwrap().is_empty());
    }

    #[test]
    fn emg_preset_needs_fast_sampling() {
        assert!(FrontEndConfig::emg().validate(1000.0).is_err());
        assert!(FrontEndConfig::emg().validate(4000.0).is_ok());
        assert!(FrontEndConfig::emg_at_rate(1000.0).validate(1000.0).is_ok());
    }
}
