//! Digital transmitter (T1..T6) and receiver (R1..R6) chains of a 20 MHz
//! 802.11a-style OFDM PHY, modelling the data field only.
//!
//! Bits are carried as `u8` values in `{0, 1}`. Erasures after depuncturing
//! are `None`.

mod chain;
mod config;
mod convolutional;
mod frame;
mod interleaver;
mod ofdm;
pub mod puncture;
mod qam;
mod scrambler;
mod viterbi;

pub use chain::{rx_chain, tx_chain, Phy};
pub use config::{
    CodeRate, Modulation, PhyConfig, SubcarrierMap, DEFAULT_SCRAMBLER_SEED, MAX_PSDU_BYTES,
    STANDARD_GENERATORS,
};
pub use convolutional::{conv_encode, ConvEncoder, ConvState};
pub use frame::{read_frame, write_frame, BasebandFrame, FRAME_MAGIC, FRAME_VERSION};
pub use interleaver::{deinterleave, interleave, Interleaver};
pub use ofdm::{FreqGrid, Ofdm};
pub use puncture::{depuncture, puncture};
pub use qam::Constellation;
pub use scrambler::{pilot_polarity, scramble, scrambler_sequence, Scrambler};
pub use viterbi::{viterbi_decode, Viterbi};

/// Stage of the chain a bit sequence belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BitRole {
    Raw,
    Scrambled,
    Coded,
    Punctured,
    Interleaved,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitBlock {
    pub bits: Vec<u8>,
    pub role: BitRole,
}

impl BitBlock {
    pub fn new(bits: Vec<u8>, role: BitRole) -> Self {
        debug_assert!(bits.iter().all(|&b| b <= 1));
        BitBlock { bits, role }
    }

    pub fn raw(bits: Vec<u8>) -> Self {
        Self::new(bits, BitRole::Raw)
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }
}

/// Parity of the set bits of `x`.
#[inline]
pub(crate) fn parity(x: u32) -> u8 {
    (x.count_ones() & 1) as u8
}
