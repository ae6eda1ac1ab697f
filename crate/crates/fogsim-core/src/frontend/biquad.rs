//! Second-order IIR sections and the Butterworth band-pass used by the
//! recording chain model.

use crate::error::{Error, Result};

/// Direct-form-I biquad with normalized coefficients.
#[derive(Debug, Clone)]
pub struct Biquad {
    b0: f64,
    b1: f64,
    b2: f64,
    a1: f64,
    a2: f64,
    x1: f64,
    x2: f64,
    y1: f64,
    y2: f64,
}

/// Q of a 2nd-order Butterworth section (maximally flat passband).
const BUTTERWORTH_Q: f64 = std::f64::consts::FRAC_1_SQRT_2;

impl Biquad {
    fn from_rbj(b0: f64, b1: f64, b2: f64, a0: f64, a1: f64, a2: f64) -> Self {
        Biquad {
            b0: b0 / a0,
            b1: b1 / a0,
            b2: b2 / a0,
            a1: a1 / a0,
            a2: a2 / a0,
            x1: 0.0,
            x2: 0.0,
            y1: 0.0,
            y2: 0.0,
        }
    }

    /// 2nd-order Butterworth low-pass at `fc` for sample rate `fs`.
    pub fn butterworth_lowpass(fc: f64, fs: f64) -> Self {
        let w0 = 2.0 * std::f64::consts::PI * fc / fs;
        let alpha = w0.sin() / (2.0 * BUTTERWORTH_Q);
        let cos_w0 = w0.cos();
        Self::from_rbj(
            (1.0 - cos_w0) / 2.0,
            1.0 - cos_w0,
            (1.0 - cos_w0) / 2.0,
            1.0 + alpha,
            -2.0 * cos_w0,
            1.0 - alpha,
        )
    }

    /// 2nd-order Butterworth high-pass at `fc` for sample rate `fs`.
    pub fn butterworth_highpass(fc: f64, fs: f64) -> Self {
        let w0 = 2.0 * std::f64::consts::PI * fc / fs;
        let alpha = w0.sin() / (2.0 * BUTTERWORTH_Q);
        let cos_w0 = w0.cos();
        Self::from_rbj(
            (1.0 + cos_w0) / 2.0,
            -(1.0 + cos_w0),
            (1.0 + cos_w0) / 2.0,
            1.0 + alpha,
            -2.0 * cos_w0,
            1.0 - alpha,
        )
    }

    pub fn process(&mut self, x: f64) -> f64 {
        let y = self.b0 * x + self.b1 * self.x1 + self.b2 * self.x2
            - self.a1 * self.y1
            - self.a2 * self.y2;
        self.x2 = self.x1;
        self.x1 = x;
        self.y2 = self.y1;
        self.y1 = y;
        y
    }

    pub fn process_buffer(&mut self, signal: &mut [f64]) {
        for v in signal.iter_mut() {
            *v = self.process(*v);
        }
    }

    pub fn reset(&mut self) {
        self.x1 = 0.0;
        self.x2 = 0.0;
        self.y1 = 0.0;
        self.y2 = 0.0;
    }
}

/// Streaming band-pass: 2nd-order Butterworth high-pass at `lo_hz` cascaded
/// with a 2nd-order Butterworth low-pass at `hi_hz`.
#[derive(Debug, Clone)]
pub struct BandPass {
    hp: Biquad,
    lp: Biquad,
}

impl BandPass {
    pub fn new(lo_hz: f64, hi_hz: f64, sample_rate_hz: f64) -> Result<Self> {
        if !(0.0 < lo_hz && lo_hz < hi_hz && hi_hz < sample_rate_hz / 2.0) {
            return Err(Error::InvalidConfig(format!(
                "band [{lo_hz}, {hi_hz}] Hz invalid at {sample_rate_hz} Hz sampling \
                 (need 0 < lo < hi < rate/2)"
            )));
        }
        Ok(BandPass {
            hp: Biquad::butterworth_highpass(lo_hz, sample_rate_hz),
            lp: Biquad::butterworth_lowpass(hi_hz, sample_rate_hz),
        })
    }

    pub fn process(&mut self, x: f64) -> f64 {
        self.lp.process(self.hp.process(x))
    }

    pub fn process_buffer(&mut self, signal: &mut [f64]) {
        for v in signal.iter_mut() {
            *v = self.process(*v);
        }
    }
}

/// Filter a whole buffer through the band; output length equals input length.
pub fn bandpass(signal: &[f64], lo_hz: f64, hi_hz: f64, sample_rate_hz: f64) -> Result<Vec<f64>> {
    let mut filter = BandPass::new(lo_hz, hi_hz, sample_rate_hz)?;
    let mut out = signal.to_vec();
    filter.process_buffer(&mut out);
    Ok(out)
}

/// Analytic magnitude response of the cascade (analog prototype): the test
/// oracle for the digital realization at frequencies well below Nyquist.
pub fn analytic_bandpass_gain(f_hz: f64, lo_hz: f64, hi_hz: f64) -> f64 {
    let r_hp = (f_hz / lo_hz).powi(2);
    let hp = r_hp / (1.0 + r_hp * r_hp).sqrt();
    let r_lp = (f_hz / hi_hz).powi(2);
    let lp = 1.0 / (1.0 + r_lp * r_lp).sqrt();
    hp * lp
}
