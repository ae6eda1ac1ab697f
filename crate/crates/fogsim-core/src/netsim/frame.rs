//! Frame layout and bit packing.
//!
//! `[8-bit node id][16-bit sequence][payload][16-bit CRC-CCITT]`, all
//! big-endian on the wire. The payload is a list of sub-blocks, one per
//! channel with pending samples: `[channel index u8][count u8]` followed by
//! the 12-bit ADC codes packed MSB-first and padded to a byte boundary.
//! Payload size is capped at 1024 bits.

use crate::error::{Error, Result};

use super::channel::crc16_ccitt;

pub const MAX_PAYLOAD_BITS: usize = 1024;

#[derive(Debug, Clone, PartialEq)]
pub struct FrameBlock {
    pub channel_idx: u8,
    pub codes: Vec<u16>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub node_id: u8,
    pub seq: u16,
    pub blocks: Vec<FrameBlock>,
}

impl Frame {
    /// Size of the payload area in bits (sub-headers plus padded codes).
    pub fn payload_bits(&self) -> usize {
        self.blocks
            .iter()
            .map(|b| 16 + b.codes.len() * 12 + pad_bits(b.codes.len() * 12))
            .sum()
    }

    /// Total frame size on the wire in bits.
    pub fn total_bits(&self) -> usize {
        8 + 16 + self.payload_bits() + 16
    }

    pub fn serialize(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.total_bits() / 8);
        out.push(self.node_id);
        out.extend_from_slice(&self.seq.to_be_bytes());
        for block in &self.blocks {
            out.push(block.channel_idx);
            out.push(block.codes.len() as u8);
            out.extend_from_slice(&pack_codes(&block.codes));
        }
        let crc = crc16_ccitt(&out);
        out.extend_from_slice(&crc.to_be_bytes());
        out
    }

    pub fn parse(bytes: &[u8]) -> Result<Frame> {
        if bytes.len() < 5 {
            return Err(Error::Container("frame shorter than its framing".into()));
        }
        let (body, crc_bytes) = bytes.split_at(bytes.len() - 2);
        let wire_crc = u16::from_be_bytes([crc_bytes[0], crc_bytes[1]]);
        if crc16_ccitt(body) != wire_crc {
            return Err(Error::Container("frame CRC mismatch".into()));
        }
        let node_id = body[0];
        let seq = u16::from_be_bytes([body[1], body[2]]);
        let mut blocks = Vec::new();
        let mut pos = 3usize;
        while pos < body.len() {
            if pos + 2 > body.len() {
                return Err(Error::Container("truncated sub-block header".into()));
            }
            let channel_idx = body[pos];
            let count = body[pos + 1] as usize;
            pos += 2;
            let code_bytes = (count * 12).div_ceil(8);
            if pos + code_bytes > body.len() {
                return Err(Error::Container("truncated sub-block codes".into()));
            }
            let codes = unpack_codes(&body[pos..pos + code_bytes], count);
            pos += code_bytes;
            blocks.push(FrameBlock { channel_idx, codes });
        }
        Ok(Frame {
            node_id,
            seq,
            blocks,
        })
    }
}

fn pad_bits(bits: usize) -> usize {
    (8 - bits % 8) % 8
}

/// Pack 12-bit codes MSB-first, zero-padded to a byte boundary.
pub fn pack_codes(codes: &[u16]) -> Vec<u8> {
    let total_bits = codes.len() * 12;
    let mut out = vec![0u8; total_bits.div_ceil(8)];
    let mut bit = 0usize;
    for &code in codes {
        for k in (0..12).rev() {
            if code & (1 << k) != 0 {
                out[bit / 8] |= 0x80 >> (bit % 8);
            }
            bit += 1;
        }
    }
    out
}

pub fn unpack_codes(bytes: &[u8], count: usize) -> Vec<u16> {
    let mut out = Vec::with_capacity(count);
    let mut bit = 0usize;
    for _ in 0..count {
        let mut code = 0u16;
        for _ in 0..12 {
            code <<= 1;
            if bytes[bit / 8] & (0x80 >> (bit % 8)) != 0 {
                code |= 1;
            }
            bit += 1;
        }
        out.push(code);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn serialize_parse_round_trip() {
        let frame = Frame {
            node_id: 2,
            seq: 4095,
            blocks: vec![
                FrameBlock {
                    channel_idx: 0,
                    codes: vec![0, 2048, 4095, 1234],
                },
                FrameBlock {
                    channel_idx: 3,
                    codes: vec![7],
                },
            ],
        };
        let bytes = frame.serialize();
        assert_eq!(bytes.len() * 8, frame.total_bits());
        let back = Frame::parse(&bytes).unwrap();
        assert_eq!(back, frame);
    }

    #[test]
    fn corrupted_frame_fails_crc() {
        let frame = Frame {
            node_id: 1,
            seq: 7,
            blocks: vec![FrameBlock {
                channel_idx: 0,
                codes: vec![100, 200, 300],
            }],
        };
        let mut bytes = frame.serialize();
        bytes[4] ^= 0x10;
        assert!(Frame::parse(&bytes).is_err());
    }

    proptest! {
        #[test]
        fn code_packing_round_trips(codes in proptest::collection::vec(0u16..4096, 0..80)) {
            let packed = pack_codes(&codes);
            let back = unpack_codes(&packed, codes.len());
            prop_assert_eq!(back, codes);
        }
    }
}
