use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::channel::awgn_with;
use crate::error::Result;
use crate::phy::{Phy, PhyConfig};

/// Magnitude that corrupted floats are clamped to.
pub const DEFAULT_SATURATION_BOUND: f64 = 4.0;

#[derive(Debug, Clone, PartialEq)]
pub struct FloatLinkOutput {
    pub values: Vec<f64>,
    pub bits_sent: usize,
    pub bit_errors: usize,
}

fn clamp(v: f64, bound: f64) -> f64 {
    if v.is_nan() {
        bound
    } else {
        v.clamp(-bound, bound)
    }
}

/// Separate source/channel coding baseline: values travel as IEEE-754
/// single-precision bit patterns (MSB first) through the digital PHY.
/// Bits are zero-padded to whole OFDM symbols and split into packets of at
/// most the PSDU limit.
pub fn float_serialization_link(
    values: &[f64],
    snr_db: f64,
    seed: u64,
    cfg: &PhyConfig,
    bound: f64,
) -> Result<FloatLinkOutput> {
    let phy = Phy::new(cfg)?;
    let mut bits: Vec<u8> = values
        .iter()
        .flat_map(|&v| {
            let w = (v as f32).to_bits();
            (0..32).rev().map(move |i| (w >> i & 1) as u8)
        })
        .collect();
    let n_dbps = cfg.n_dbps();
    bits.resize(bits.len().div_ceil(n_dbps) * n_dbps, 0);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut received = Vec::with_capacity(bits.len());
    for packet in bits.chunks(cfg.max_packet_ofdm_symbols() * n_dbps) {
        let frame = phy.tx(packet)?;
        received.extend(phy.rx(&awgn_with(&frame, snr_db, &mut rng))?);
    }
    let bit_errors = bits.iter().zip(&received).filter(|(a, b)| a != b).count();
    let values = received
        .chunks_exact(32)
        .take(values.len())
        .map(|w| {
            let word = w.iter().fold(0u32, |acc, &b| acc << 1 | b as u32);
            clamp(f32::from_bits(word) as f64, bound)
        })
        .collect();
    Ok(FloatLinkOutput {
        values,
        bits_sent: bits.len(),
        bit_errors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_round_trip() {
        let cfg = PhyConfig::default();
        let v = vec![0.25, -1.5, 3.0e-3, 0.0, -0.0, 2.75];
        let out = float_serialization_link(&v, f64::INFINITY, 1, &cfg, 4.0).unwrap();
        let expect: Vec<f64> = v.iter().map(|&x| x as f32 as f64).collect();
        assert_eq!(out.values, expect);
        assert_eq!(out.bit_errors, 0);
        assert_eq!(out.bits_sent, 216);
    }

    #[test]
    fn exponent_flip_is_huge() {
        let w = 0.75f32.to_bits() ^ (1 << 30);
        assert!(f32::from_bits(w).abs() > 1e30);
        assert_eq!(clamp(f32::from_bits(w) as f64, 4.0), 4.0);
        assert_eq!(clamp(f64::NAN, 4.0), 4.0);
        assert_eq!(clamp(f64::NEG_INFINITY, 4.0), -4.0);
    }

    #[test]
    fn long_inputs_span_packets() {
        let cfg = PhyConfig::default();
        let v: Vec<f64> = (0..2000).map(|i| i as f64 * 1e-3).collect();
        let out = float_serialization_link(&v, f64::INFINITY, 1, &cfg, 4.0).unwrap();
        assert!(out.bits_sent > cfg.max_packet_ofdm_symbols() * cfg.n_dbps());
        for (a, b) in out.values.iter().zip(&v) {
            assert_eq!(*a, *b as f32 as f64);
        }
    }
}
