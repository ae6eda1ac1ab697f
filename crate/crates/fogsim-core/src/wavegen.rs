//! Waveform primitives shared by the synthetic cohort generator and the
//! network simulator's signal sources.

use rand_distr::{Distribution, Normal};

use crate::error::Result;
use crate::frontend::BandPass;
use crate::seed;

/// White Gaussian noise with the given RMS.
pub fn white_noise(n: usize, rms: f64, seed_value: u64) -> Vec<f64> {
    if rms == 0.0 {
        return vec![0.0; n];
    }
    let normal = Normal::new(0.0, rms).expect("valid rms");
    let mut rng = seed::rng(seed_value);
    (0..n).map(|_| normal.sample(&mut rng)).collect()
}

/// Band-limited Gaussian noise, rescaled so the steady-state RMS matches
/// `rms`.
pub fn band_noise(
    n: usize,
    rms: f64,
    lo_hz: f64,
    hi_hz: f64,
    sample_rate_hz: f64,
    seed_value: u64,
) -> Result<Vec<f64>> {
    if rms == 0.0 || n == 0 {
        return Ok(vec![0.0; n]);
    }
    let mut filter = BandPass::new(lo_hz, hi_hz, sample_rate_hz)?;
    // Warm the filter up on a lead-in so the returned block is stationary.
    let lead = (sample_rate_hz * 2.0) as usize;
    let raw = white_noise(n + lead, 1.0, seed_value);
    let mut filtered: Vec<f64> = raw.into_iter().map(|v| filter.process(v)).collect();
    let block = filtered.split_off(lead);
    let actual_rms =
        (block.iter().map(|v| v * v).sum::<f64>() / block.len() as f64).sqrt();
    let scale = if actual_rms > 0.0 { rms / actual_rms } else { 0.0 };
    Ok(block.iter().map(|v| v * scale).collect())
}

/// Sinusoidal tremor-like tone.
pub fn tone(n: usize, freq_hz: f64, amplitude: f64, phase_rad: f64, sample_rate_hz: f64) -> Vec<f64> {
    (0..n)
        .map(|i| {
            amplitude
                * (2.0 * std::f64::consts::PI * freq_hz * i as f64 / sample_rate_hz + phase_rad)
                    .sin()
        })
        .collect()
}

/// On/off burst gate with exponentially distributed burst and gap lengths;
/// values are 0.0 or 1.0.
pub fn burst_gate(
    n: usize,
    sample_rate_hz: f64,
    mean_burst_s: f64,
    mean_gap_s: f64,
    seed_value: u64,
) -> Vec<f64> {
    let mut rng = seed::rng(seed_value);
    let mut gate = Vec::with_capacity(n);
    let mut on = false;
    while gate.len() < n {
        let mean = if on { mean_burst_s } else { mean_gap_s };
        // Inverse-CDF exponential draw.
        let u: f64 = rand::Rng::random_range(&mut rng, 1e-12..1.0);
        let dur_s = -mean * u.ln();
        let len = ((dur_s * sample_rate_hz).round() as usize).max(1);
        let value = if on { 1.0 } else { 0.0 };
        for _ in 0..len.min(n - gate.len()) {
            gate.push(value);
        }
        on = !on;
    }
    gate
}

/// Add `b` into `a` element-wise over the index range `[start, end)`.
pub fn add_into(a: &mut [f64], b: &[f64], start: usize) {
    for (i, v) in b.iter().enumerate() {
        if start + i < a.len() {
            a[start + i] += v;
        }
    }
}
