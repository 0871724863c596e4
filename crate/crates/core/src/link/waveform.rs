use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::phy::{Ofdm, PhyConfig};

/// Content of the cyclic-prefix region when synthesizing a waveform.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Guard {
    /// Prefix samples are zero: the reference waveform of the targets.
    Silent,
    /// Prefix is the usual copy of the symbol tail, as a real PHY emits.
    Cyclic,
}

/// Linear maps between symbols on the chosen subcarriers and time-domain
/// samples in the unit-power domain, one OFDM symbol per `N′` symbols.
#[derive(Debug, Clone)]
pub struct WaveformMap {
    ofdm: Ofdm,
    chosen_bins: Vec<usize>,
}

impl WaveformMap {
    pub fn new(cfg: &PhyConfig, chosen: &[i32]) -> Result<Self> {
        if chosen.is_empty() {
            return Err(Error::Selection("no subcarriers chosen".into()));
        }
        Ok(WaveformMap {
            ofdm: Ofdm::new(cfg),
            chosen_bins: chosen.iter().map(|&k| cfg.bin_of(k)).collect(),
        })
    }

    pub fn n_prime(&self) -> usize {
        self.chosen_bins.len()
    }

    pub fn samples_per_ofdm(&self) -> usize {
        self.ofdm.samples_per_symbol()
    }

    pub fn cp_len(&self) -> usize {
        self.ofdm.cp_len()
    }

    pub fn ofdm_symbols_for(&self, k: usize) -> usize {
        k.div_ceil(self.n_prime())
    }

    pub fn samples_for(&self, k: usize) -> usize {
        self.ofdm_symbols_for(k) * self.samples_per_ofdm()
    }

    /// Places `symbols` (zero-padded to whole OFDM symbols) on the chosen
    /// bins and transforms to time domain.
    pub fn synthesize(&self, symbols: &[Complex64], guard: Guard) -> Vec<Complex64> {
        let n = self.fft();
        let cp = self.cp_len();
        let mut out = Vec::with_capacity(self.samples_for(symbols.len()));
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        for chunk in symbols.chunks(self.n_prime()) {
            buf.fill(Complex64::new(0.0, 0.0));
            for (&bin, &z) in self.chosen_bins.iter().zip(chunk) {
                buf[bin] = z;
            }
            self.ofdm.ifft(&mut buf);
            match guard {
                Guard::Silent => out.extend(std::iter::repeat_n(Complex64::new(0.0, 0.0), cp)),
                Guard::Cyclic => out.extend_from_slice(&buf[n - cp..]),
            }
            out.extend_from_slice(&buf);
        }
        out
    }

    /// Reads the chosen bins of every OFDM symbol (prefix discarded) and
    /// returns the first `k` values. The adjoint of silent-guard synthesis.
    pub fn analyze(&self, samples: &[Complex64], k: usize) -> Result<Vec<Complex64>> {
        self.analyze_with(samples, k, Guard::Silent)
    }

    /// Adjoint of [`WaveformMap::synthesize`] for the given guard mode.
    pub fn synthesize_adjoint(&self, samples: &[Complex64], k: usize, guard: Guard) -> Result<Vec<Complex64>> {
        self.analyze_with(samples, k, guard)
    }

    fn analyze_with(&self, samples: &[Complex64], k: usize, guard: Guard) -> Result<Vec<Complex64>> {
        let sps = self.samples_per_ofdm();
        if samples.len() != self.samples_for(k) {
            return Err(Error::Shape(format!(
                "{} samples cannot carry {k} symbols ({} expected)",
                samples.len(),
                self.samples_for(k)
            )));
        }
        let n = self.fft();
        let cp = self.cp_len();
        let mut out = Vec::with_capacity(k);
        for seg in samples.chunks_exact(sps) {
            let mut buf = seg[cp..].to_vec();
            if guard == Guard::Cyclic {
                for i in 0..cp {
                    buf[n - cp + i] += seg[i];
                }
            }
            self.ofdm.fft(&mut buf);
            out.extend(self.chosen_bins.iter().map(|&b| buf[b]));
        }
        out.truncate(k);
        Ok(out)
    }

    /// 0 on prefix samples, 1 elsewhere, for a waveform carrying `k` symbols.
    pub fn guard_mask(&self, k: usize) -> Vec<f64> {
        let sps = self.samples_per_ofdm();
        (0..self.samples_for(k))
            .map(|i| if i % sps < self.cp_len() { 0.0 } else { 1.0 })
            .collect()
    }

    fn fft(&self) -> usize {
        self.ofdm.fft_size()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gf2::default_subset;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rng: &mut ChaCha8Rng, n: usize) -> Vec<Complex64> {
        (0..n)
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect()
    }

    fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
        a.iter().zip(b).map(|(x, y)| x * y.conj()).sum()
    }

    fn map() -> WaveformMap {
        let cfg = PhyConfig::default();
        WaveformMap::new(&cfg, &default_subset(&cfg)).unwrap()
    }

    #[test]
    fn analysis_inverts_synthesis() {
        let m = map();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = random(&mut rng, 100);
        for guard in [Guard::Silent, Guard::Cyclic] {
            let w = m.synthesize(&s, guard);
            assert_eq!(w.len(), 3 * 80);
            let back = m.analyze(&w, 100).unwrap();
            for (a, b) in back.iter().zip(&s) {
                assert!((a - b).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn silent_guard_is_zero_and_energy_preserved() {
        let m = map();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = random(&mut rng, 36);
        let w = m.synthesize(&s, Guard::Silent);
        assert!(w[..16].iter().all(|z| z.norm() == 0.0));
        let e_sym: f64 = s.iter().map(|z| z.norm_sqr()).sum();
        let e_wav: f64 = w.iter().map(|z| z.norm_sqr()).sum();
        assert!((e_sym - e_wav).abs() < 1e-10);
    }

    #[test]
    fn adjoint_identity() {
        let m = map();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for guard in [Guard::Silent, Guard::Cyclic] {
            let x = random(&mut rng, 50);
            let y = random(&mut rng, m.samples_for(50));
            let lhs = dot(&m.synthesize(&x, guard), &y);
            let rhs = dot(&x, &m.synthesize_adjoint(&y, 50, guard).unwrap());
            assert!((lhs - rhs).norm() < 1e-10, "{guard:?}");
        }
    }

    #[test]
    fn mask_marks_prefix() {
        let m = map();
        let mask = m.guard_mask(37);
        assert_eq!(mask.len(), 160);
        assert_eq!(mask.iter().filter(|&&v| v == 0.0).count(), 32);
        assert_eq!((mask[15], mask[16], mask[80], mask[96]), (0.0, 1.0, 0.0, 1.0));
    }

    #[test]
    fn wrong_length_rejected() {
        assert!(map().analyze(&[Complex64::new(0.0, 0.0); 79], 1).is_err());
    }
}
