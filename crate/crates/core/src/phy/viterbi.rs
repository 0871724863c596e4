use super::config::{CodeRate, STANDARD_GENERATORS};
use super::convolutional::ConvEncoder;
use super::puncture::depuncture;
use crate::error::Result;

const STATES: usize = 64;
const UNREACHABLE: u32 = u32::MAX / 4;

/// Hard-decision Viterbi decoder for the 64-state mother code.
///
/// The trellis starts in state 0 and ends in the best-metric state (the data
/// field carries no tail). Erased positions cost nothing. Equal metrics resolve
/// toward the lower-numbered predecessor, and toward the lower-numbered final
/// state.
#[derive(Debug, Clone)]
pub struct Viterbi {
    /// Output pair for (predecessor, input), packed as `a << 1 | b`.
    outputs: [[u8; 2]; STATES],
}

impl Default for Viterbi {
    fn default() -> Self {
        Viterbi::new(STANDARD_GENERATORS)
    }
}

impl Viterbi {
    pub fn new(generators: [u8; 2]) -> Self {
        let enc = ConvEncoder::new(generators);
        let mut outputs = [[0u8; 2]; STATES];
        for (s, row) in outputs.iter_mut().enumerate() {
            for u in 0..2u8 {
                let (a, b) = enc.branch(s as u8, u);
                row[u as usize] = (a << 1) | b;
            }
        }
        Viterbi { outputs }
    }

    #[inline]
    fn branch_cost(pair: u8, a: Option<u8>, b: Option<u8>) -> u32 {
        let ca = a.map_or(0, |a| (a != (pair >> 1)) as u32);
        let cb = b.map_or(0, |b| (b != (pair & 1)) as u32);
        ca + cb
    }

    /// Decodes a depunctured mother-code stream (`A0 B0 A1 B1 ...`).
    pub fn decode(&self, received: &[Option<u8>]) -> Vec<u8> {
        let steps = received.len() / 2;
        let mut metric = [UNREACHABLE; STATES];
        metric[0] = 0;
        let mut next = [0u32; STATES];
        // bit s of decisions[t] set => state s came from the odd predecessor
        let mut decisions = vec![0u64; steps];

        for (t, dec) in decisions.iter_mut().enumerate() {
            let a = received[2 * t];
            let b = received[2 * t + 1];
            let mut bits = 0u64;
            for (s, slot) in next.iter_mut().enumerate() {
                let u = s >> 5;
                let p0 = (s & 31) << 1;
                let p1 = p0 | 1;
                let m0 = metric[p0] + Self::branch_cost(self.outputs[p0][u], a, b);
                let m1 = metric[p1] + Self::branch_cost(self.outputs[p1][u], a, b);
                if m1 < m0 {
                    *slot = m1;
                    bits |= 1 << s;
                } else {
                    *slot = m0;
                }
            }
            *dec = bits;
            metric = next;
        }

        let mut state = (0..STATES).min_by_key(|&s| (metric[s], s)).unwrap_or(0);
        let mut out = vec![0u8; steps];
        for t in (0..steps).rev() {
            out[t] = (state >> 5) as u8;
            let odd = (decisions[t] >> state) & 1;
            state = ((state & 31) << 1) | odd as usize;
        }
        out
    }

    /// Hamming distance between the re-encoding of `info` and the non-erased
    /// received bits.
    pub fn path_metric(&self, info: &[u8], received: &[Option<u8>]) -> u32 {
        let mut s = 0usize;
        let mut cost = 0;
        for (t, &u) in info.iter().enumerate() {
            cost += Self::branch_cost(self.outputs[s][u as usize], received[2 * t], received[2 * t + 1]);
            s = ((u as usize) << 5) | (s >> 1);
        }
        cost
    }
}

/// Depunctures `received` for `rate` and decodes it with the standard code.
pub fn viterbi_decode(received: &[u8], rate: CodeRate) -> Result<Vec<u8>> {
    let mother = depuncture(received, rate)?;
    Ok(Viterbi::default().decode(&mother))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phy::convolutional::{conv_encode, ConvState};
    use crate::phy::puncture::puncture;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_bits(rng: &mut ChaCha8Rng, n: usize) -> Vec<u8> {
        (0..n).map(|_| rng.random_range(0..2u8)).collect()
    }

    fn exhaustive_best_metric(v: &Viterbi, received: &[Option<u8>], k: usize) -> u32 {
        (0..1u32 << k)
            .map(|w| {
                let info: Vec<u8> = (0..k).map(|i| ((w >> i) & 1) as u8).collect();
                v.path_metric(&info, received)
            })
            .min()
            .unwrap()
    }

    #[test]
    fn noiseless_decode_every_rate() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for rate in CodeRate::ALL {
            let period = crate::phy::puncture::pattern(rate).len() / 2;
            let info = random_bits(&mut rng, period * 40);
            let (coded, _) = conv_encode(&info, ConvState::ZERO);
            let tx = puncture(&coded, rate).unwrap();
            assert_eq!(viterbi_decode(&tx, rate).unwrap(), info, "rate {rate}");
        }
    }

    #[test]
    fn single_coded_error_corrected() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        // Six zero tail bits so the final info bits are protected too.
        let mut info = random_bits(&mut rng, 24);
        info.extend([0; 6]);
        let (coded, _) = conv_encode(&info, ConvState::ZERO);
        for flip in 0..coded.len() {
            let mut rx = coded.clone();
            rx[flip] ^= 1;
            assert_eq!(viterbi_decode(&rx, CodeRate::Half).unwrap(), info, "flip {flip}");
        }
    }

    #[test]
    fn decoded_metric_equals_exhaustive_ml() {
        let v = Viterbi::default();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..200 {
            let info = random_bits(&mut rng, 12);
            let (coded, _) = conv_encode(&info, ConvState::ZERO);
            let rx: Vec<Option<u8>> = coded
                .iter()
                .map(|&b| Some(b ^ (rng.random_range(0..100) < 15) as u8))
                .collect();
            let decoded = v.decode(&rx);
            let got = v.path_metric(&decoded, &rx);
            assert_eq!(got, exhaustive_best_metric(&v, &rx, 12));
            assert!(got <= v.path_metric(&info, &rx));
        }
    }

    #[test]
    fn erasures_cost_nothing() {
        let v = Viterbi::default();
        let rx = vec![None; 20];
        let decoded = v.decode(&rx);
        assert_eq!(v.path_metric(&decoded, &rx), 0);
        // everything ties: lower predecessors win, so the all-zero path comes out
        assert!(decoded.iter().all(|&b| b == 0));
    }
}
