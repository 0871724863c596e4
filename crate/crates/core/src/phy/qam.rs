use num_complex::Complex64;

use super::config::Modulation;

/// Gray-labelled square constellation with unit average power.
///
/// Labels are `log2 M` bits; the first half selects the I level and the second
/// half the Q level (BPSK uses its single bit on I). Along each axis the label
/// of level index `i` is the Gray code `i ^ (i >> 1)`, MSB first.
#[derive(Debug, Clone, Copy)]
pub struct Constellation {
    modulation: Modulation,
    levels: usize,
    axis_bits: usize,
    norm: f64,
}

impl Constellation {
    pub fn new(modulation: Modulation) -> Self {
        let axis_bits = match modulation {
            Modulation::Bpsk => 1,
            m => m.bits_per_symbol() / 2,
        };
        Constellation {
            modulation,
            levels: modulation.levels_per_axis(),
            axis_bits,
            norm: modulation.normalization(),
        }
    }

    pub fn modulation(&self) -> Modulation {
        self.modulation
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.modulation.bits_per_symbol()
    }

    /// Distance between adjacent levels after normalisation.
    pub fn step(&self) -> f64 {
        2.0 * self.norm
    }

    /// Largest per-axis amplitude, i.e. the half-width of the constellation box.
    pub fn max_amplitude(&self) -> f64 {
        (self.levels - 1) as f64 * self.norm
    }

    fn has_q(&self) -> bool {
        self.modulation != Modulation::Bpsk
    }

    fn level_value(&self, idx: usize) -> f64 {
        (2 * idx) as f64 - (self.levels - 1) as f64
    }

    fn axis_label(&self, idx: usize, out: &mut [u8]) {
        let g = idx ^ (idx >> 1);
        for (b, o) in out.iter_mut().enumerate() {
            *o = ((g >> (self.axis_bits - 1 - b)) & 1) as u8;
        }
    }

    fn axis_index(&self, bits: &[u8]) -> usize {
        let mut g = bits.iter().fold(0usize, |acc, &b| (acc << 1) | (b & 1) as usize);
        // Gray -> binary
        let mut shift = g >> 1;
        while shift != 0 {
            g ^= shift;
            shift >>= 1;
        }
        g
    }

    /// Nearest level index along one axis for an amplitude already in
    /// unnormalised units. Out-of-range values clip to the outer level; exact
    /// midpoints go to the level nearer zero (0 itself goes to +1).
    fn nearest_index(&self, v: f64) -> usize {
        let last = self.levels - 1;
        let pos = (v + last as f64) / 2.0;
        if !(pos > 0.0) {
            return 0;
        }
        if pos >= last as f64 {
            return last;
        }
        let lower = pos.floor();
        let frac = pos - lower;
        let lower = lower as usize;
        if frac > 0.5 {
            lower + 1
        } else if frac < 0.5 {
            lower
        } else {
            let midpoint = (2 * lower + 1) as f64 - last as f64;
            if midpoint > 0.0 {
                lower
            } else {
                lower + 1
            }
        }
    }

    /// Maps `log2 M` label bits to a constellation point.
    pub fn map(&self, bits: &[u8]) -> Complex64 {
        debug_assert_eq!(bits.len(), self.bits_per_symbol());
        let i = self.level_value(self.axis_index(&bits[..self.axis_bits]));
        let q = if self.has_q() {
            self.level_value(self.axis_index(&bits[self.axis_bits..]))
        } else {
            0.0
        };
        Complex64::new(i, q) * self.norm
    }

    /// Nearest constellation point and its label.
    pub fn quantize(&self, z: Complex64) -> (Complex64, Vec<u8>) {
        let mut label = vec![0u8; self.bits_per_symbol()];
        let p = self.quantize_into(z, &mut label);
        (p, label)
    }

    pub fn quantize_into(&self, z: Complex64, label: &mut [u8]) -> Complex64 {
        let ii = self.nearest_index(z.re / self.norm);
        self.axis_label(ii, &mut label[..self.axis_bits]);
        let mut p = Complex64::new(self.level_value(ii), 0.0);
        if self.has_q() {
            let qi = self.nearest_index(z.im / self.norm);
            self.axis_label(qi, &mut label[self.axis_bits..]);
            p.im = self.level_value(qi);
        }
        p * self.norm
    }

    /// Hard decision: label of the nearest point.
    pub fn hard_demap(&self, z: Complex64) -> Vec<u8> {
        self.quantize(z).1
    }

    /// Clips each axis into the constellation box.
    pub fn clip_to_box(&self, z: Complex64) -> Complex64 {
        let a = self.max_amplitude();
        let im = if self.has_q() { z.im.clamp(-a, a) } else { 0.0 };
        Complex64::new(z.re.clamp(-a, a), im)
    }

    /// All `M` points in label order.
    pub fn points(&self) -> Vec<Complex64> {
        let n = self.bits_per_symbol();
        (0..self.modulation.order())
            .map(|label| {
                let bits: Vec<u8> = (0..n).map(|b| ((label >> (n - 1 - b)) & 1) as u8).collect();
                self.map(&bits)
            })
            .collect()
    }
}
