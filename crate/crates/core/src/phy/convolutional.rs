use super::config::STANDARD_GENERATORS;
use super::parity;

/// Content of the six delay cells of the K=7 encoder.
///
/// Bit 5 holds the most recent input, bit 0 the oldest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct ConvState(u8);

impl ConvState {
    pub const ZERO: ConvState = ConvState(0);

    pub fn new(value: u8) -> Option<Self> {
        (value < 64).then_some(ConvState(value))
    }

    pub fn value(self) -> u8 {
        self.0
    }

    /// State after the encoder has consumed `bits` (only the last six matter).
    pub fn after(self, bits: &[u8]) -> ConvState {
        bits.iter()
            .fold(self, |s, &b| ConvState(((b & 1) << 5) | (s.0 >> 1)))
    }
}

/// Rate-1/2 feed-forward convolutional encoder.
///
/// The 7-bit register is `input << 6 | state`; generator bit 6 taps the
/// current input and bit 0 the input six steps back.
#[derive(Debug, Clone, Copy)]
pub struct ConvEncoder {
    generators: [u8; 2],
}

impl Default for ConvEncoder {
    fn default() -> Self {
        ConvEncoder {
            generators: STANDARD_GENERATORS,
        }
    }
}

impl ConvEncoder {
    pub fn new(generators: [u8; 2]) -> Self {
        ConvEncoder { generators }
    }

    pub fn generators(&self) -> [u8; 2] {
        self.generators
    }

    /// Output pair for `input` entering the encoder in `state`.
    #[inline]
    pub fn branch(&self, state: u8, input: u8) -> (u8, u8) {
        let reg = ((input as u32) << 6) | state as u32;
        (
            parity(reg & self.generators[0] as u32),
            parity(reg & self.generators[1] as u32),
        )
    }

    /// Encodes `bits` starting from `state`; output is `A0 B0 A1 B1 ...`.
    pub fn encode(&self, bits: &[u8], state: ConvState) -> (Vec<u8>, ConvState) {
        let mut out = Vec::with_capacity(2 * bits.len());
        let mut s = state.0;
        for &b in bits {
            let (a, c) = self.branch(s, b);
            out.push(a);
            out.push(c);
            s = ((b & 1) << 5) | (s >> 1);
        }
        (out, ConvState(s))
    }
}

/// Standard 133/171 encoding of `bits` from `state`.
pub fn conv_encode(bits: &[u8], state: ConvState) -> (Vec<u8>, ConvState) {
    ConvEncoder::default().encode(bits, state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Straight shift register: `d[0]` is the current input, `d[i]` the input i steps ago.
    fn oracle_encode(bits: &[u8]) -> Vec<u8> {
        let g0 = [1, 0, 1, 1, 0, 1, 1]; // 133: taps on d0 d2 d3 d5 d6
        let g1 = [1, 1, 1, 1, 0, 0, 1]; // 171: taps on d0 d1 d2 d3 d6
        let mut d = [0u8; 7];
        let mut out = vec![];
        for &b in bits {
            for i in (1..7).rev() {
                d[i] = d[i - 1];
            }
            d[0] = b;
            let a = (0..7).map(|i| g0[i] & d[i]).fold(0, |x, y| x ^ y);
            let c = (0..7).map(|i| g1[i] & d[i]).fold(0, |x, y| x ^ y);
            out.push(a);
            out.push(c);
        }
        out
    }

    #[test]
    fn zero_in_zero_out() {
        let (out, st) = conv_encode(&[0; 30], ConvState::ZERO);
        assert!(out.iter().all(|&b| b == 0));
        assert_eq!(st, ConvState::ZERO);
    }

    #[test]
    fn impulse_response_is_generator_taps() {
        let mut bits = vec![0u8; 8];
        bits[0] = 1;
        let (out, _) = conv_encode(&bits, ConvState::ZERO);
        let a: Vec<u8> = out.iter().step_by(2).copied().collect();
        let b: Vec<u8> = out.iter().skip(1).step_by(2).copied().collect();
        // 133 = 1011011, 171 = 1111001 read from the current-input tap down
        assert_eq!(a, [1, 0, 1, 1, 0, 1, 1, 0]);
        assert_eq!(b, [1, 1, 1, 1, 0, 0, 1, 0]);
        assert_eq!(oracle_encode(&bits), out);
    }

    #[test]
    fn output_length_is_twice_input() {
        let (out, _) = conv_encode(&[1; 100], ConvState::ZERO);
        assert_eq!(out.len(), 200);
    }

    #[test]
    fn state_tracks_last_six_inputs() {
        let bits = [1, 0, 0, 1, 1, 0, 1, 1];
        let (_, st) = conv_encode(&bits, ConvState::ZERO);
        // most recent input in bit 5
        assert_eq!(st.value(), 0b110110);
        assert_eq!(ConvState::ZERO.after(&bits), st);
    }

    proptest! {
        #[test]
        fn matches_register_oracle(bits in proptest::collection::vec(0u8..2, 0..200)) {
            prop_assert_eq!(conv_encode(&bits, ConvState::ZERO).0, oracle_encode(&bits));
        }

        #[test]
        fn splitting_the_stream_carries_state(bits in proptest::collection::vec(0u8..2, 1..200), cut in 0usize..200) {
            let cut = cut.min(bits.len());
            let (whole, end) = conv_encode(&bits, ConvState::ZERO);
            let (head, mid) = conv_encode(&bits[..cut], ConvState::ZERO);
            let (tail, end2) = conv_encode(&bits[cut..], mid);
            prop_assert_eq!([head, tail].concat(), whole);
            prop_assert_eq!(end, end2);
        }
    }
}
