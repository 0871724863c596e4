use crate::error::{Error, Result};

/// Frame-synchronous scrambler with generator `x^7 + x^4 + 1`.
///
/// The 7-bit state is held with `x^7` in bit 6; each step emits
/// `x^7 XOR x^4` and shifts it back in at the bottom.
#[derive(Debug, Clone)]
pub struct Scrambler {
    state: u8,
}

impl Scrambler {
    pub fn new(seed: u8) -> Result<Self> {
        if seed & 0x7f == 0 || seed > 0x7f {
            return Err(Error::config(format!(
                "scrambler seed must be a nonzero 7-bit word, got {seed:#x}"
            )));
        }
        Ok(Scrambler { state: seed })
    }

    #[inline]
    pub fn next_bit(&mut self) -> u8 {
        let bit = ((self.state >> 6) ^ (self.state >> 3)) & 1;
        self.state = ((self.state << 1) | bit) & 0x7f;
        bit
    }
}

impl Iterator for Scrambler {
    type Item = u8;

    fn next(&mut self) -> Option<u8> {
        Some(self.next_bit())
    }
}

/// First `len` bits of the scrambling sequence for `seed`.
pub fn scrambler_sequence(seed: u8, len: usize) -> Result<Vec<u8>> {
    Ok(Scrambler::new(seed)?.take(len).collect())
}

/// XORs `bits` with the scrambling sequence. Applying it twice with the same
/// seed restores the input.
pub fn scramble(bits: &[u8], seed: u8) -> Result<Vec<u8>> {
    let s = Scrambler::new(seed)?;
    Ok(bits.iter().zip(s).map(|(b, s)| b ^ s).collect())
}

/// Pilot polarity `p_n` for OFDM symbol `n`: the 127-periodic all-ones-seed
/// scrambler sequence mapped `0 -> +1`, `1 -> -1`.
pub fn pilot_polarity(symbol_index: usize) -> f64 {
    static TABLE: std::sync::OnceLock<[f64; 127]> = std::sync::OnceLock::new();
    let table = TABLE.get_or_init(|| {
        let mut t = [0.0; 127];
        let mut s = Scrambler { state: 0x7f };
        for v in t.iter_mut() {
            *v = if s.next_bit() == 0 { 1.0 } else { -1.0 };
        }
        t
    });
    table[symbol_index % 127]
}
