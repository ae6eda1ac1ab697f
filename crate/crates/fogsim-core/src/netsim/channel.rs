//! Bit channel model: five-pulse majority voting over a per-pulse error
//! probability, CRC-CCITT framing checks, and frame corruption.

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Bit error probability after n-pulse majority voting:
/// `sum_{k=ceil(n/2)}^{n} C(n,k) p^k (1-p)^(n-k)`.
pub fn ber_majority(p_pulse: f64, n_pulses: u32) -> Result<f64> {
    if !(0.0..=1.0).contains(&p_pulse) {
        return Err(Error::InvalidConfig(format!(
            "pulse error probability {p_pulse} outside [0, 1]"
        )));
    }
    if n_pulses == 0 || n_pulses % 2 == 0 {
        return Err(Error::InvalidConfig(format!(
            "majority voting needs an odd pulse count, got {n_pulses}"
        )));
    }
    let n = n_pulses as i32;
    let mut sum = 0.0f64;
    for k in (n / 2 + 1)..=n {
        sum += binomial_coefficient(n, k) * p_pulse.powi(k) * (1.0 - p_pulse).powi(n - k);
    }
    Ok(sum.clamp(0.0, 1.0))
}

fn binomial_coefficient(n: i32, k: i32) -> f64 {
    let mut c = 1.0f64;
    for i in 0..k {
        c = c * f64::from(n - i) / f64::from(i + 1);
    }
    c
}

/// Invert [`ber_majority`] by bisection: the pulse error probability that
/// produces the target BER.
pub fn solve_pulse_error_for_ber(target_ber: f64, n_pulses: u32) -> Result<f64> {
    if !(0.0 < target_ber && target_ber <= 0.5) {
        return Err(Error::InvalidConfig(format!(
            "target BER {target_ber} outside (0, 0.5]"
        )));
    }
    let mut lo = 0.0f64;
    let mut hi = 0.5f64;
    // ber_majority is monotone increasing on [0, 0.5]; bisect to f64 limits.
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if ber_majority(mid, n_pulses)? < target_ber {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-17 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// CRC-16/CCITT-FALSE: polynomial 0x1021, initial value 0xFFFF, no
/// reflection, no final xor.
pub fn crc16_ccitt(bytes: &[u8]) -> u16 {
    let mut crc: u16 = 0xFFFF;
    for &b in bytes {
        crc ^= u16::from(b) << 8;
        for _ in 0..8 {
            if crc & 0x8000 != 0 {
                crc = (crc << 1) ^ 0x1021;
            } else {
                crc <<= 1;
            }
        }
    }
    crc
}

/// Link abstraction: each transmitted bit flips independently with the
/// post-majority BER.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ChannelModel {
    pub p_pulse: f64,
    pub pulses_per_bit: u32,
}

impl ChannelModel {
    pub fn new(p_pulse: f64, pulses_per_bit: u32) -> Result<Self> {
        ber_majority(p_pulse, pulses_per_bit)?;
        Ok(ChannelModel {
            p_pulse,
            pulses_per_bit,
        })
    }

    /// The ideal link (no pulse errors).
    pub fn clean() -> Self {
        ChannelModel {
            p_pulse: 0.0,
            pulses_per_bit: 5,
        }
    }

    pub fn bit_error_rate(&self) -> f64 {
        ber_majority(self.p_pulse, self.pulses_per_bit).expect("validated on construction")
    }
}

/// Pass a serialized frame through the channel. Returns the received bytes
/// and the positions of flipped bits. The bit-error count is drawn from the
/// exact binomial; positions are uniform without replacement.
pub fn transmit_bytes(
    bytes: &[u8],
    ber: f64,
    rng: &mut ChaCha8Rng,
) -> (Vec<u8>, Vec<usize>) {
    let n_bits = bytes.len() * 8;
    if ber <= 0.0 || n_bits == 0 {
        return (bytes.to_vec(), Vec::new());
    }
    let binom = Binomial::new(n_bits as u64, ber).expect("valid BER");
    let errors = binom.sample(rng) as usize;
    if errors == 0 {
        return (bytes.to_vec(), Vec::new());
    }
    let mut received = bytes.to_vec();
    let mut positions = std::collections::BTreeSet::new();
    while positions.len() < errors.min(n_bits) {
        positions.insert(rng.random_range(0..n_bits));
    }
    let positions: Vec<usize> = positions.into_iter().collect();
    for &pos in &positions {
        received[pos / 8] ^= 0x80 >> (pos % 8);
    }
    (received, positions)
}
