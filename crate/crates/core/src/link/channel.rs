use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::phy::BasebandFrame;

/// Noise variance for a given signal power and SNR; zero at `+∞` dB.
pub fn noise_variance(signal_power: f64, snr_db: f64) -> f64 {
    if snr_db == f64::INFINITY {
        0.0
    } else {
        signal_power / 10f64.powf(snr_db / 10.0)
    }
}

/// Adds circularly-symmetric complex Gaussian noise of total variance `var`.
pub fn add_complex_noise<R: Rng>(samples: &mut [Complex64], var: f64, rng: &mut R) {
    if var == 0.0 {
        return;
    }
    let sigma = (var / 2.0).sqrt();
    for z in samples {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        *z += Complex64::new(sigma * re, sigma * im);
    }
}

/// AWGN at `snr_db` relative to the power measured on `frame`.
pub fn awgn(frame: &BasebandFrame, snr_db: f64, seed: u64) -> BasebandFrame {
    awgn_with(frame, snr_db, &mut ChaCha8Rng::seed_from_u64(seed))
}

pub fn awgn_with<R: Rng>(frame: &BasebandFrame, snr_db: f64, rng: &mut R) -> BasebandFrame {
    let mut out = frame.clone();
    add_complex_noise(&mut out.samples, noise_variance(frame.mean_power(), snr_db), rng);
    out
}

/// Symbol-level AWGN for unit-power symbols: variance `10^(-snr/10)`.
pub fn ideal_analog_link(targets: &[Complex64], snr_db: f64, seed: u64) -> Vec<Complex64> {
    let mut out = targets.to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    add_complex_noise(&mut out, noise_variance(1.0, snr_db), &mut rng);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_frame(n: usize) -> BasebandFrame {
        let samples = (0..n)
            .map(|i| Complex64::from_polar(1.0, i as f64 * 0.37))
            .collect();
        BasebandFrame::new(samples, 80).unwrap()
    }

    #[test]
    fn infinite_snr_is_identity() {
        let f = unit_frame(160);
        assert_eq!(awgn(&f, f64::INFINITY, 1), f);
        let t = vec![Complex64::new(0.3, -0.1); 5];
        assert_eq!(ideal_analog_link(&t, f64::INFINITY, 1), t);
    }

    #[test]
    fn noise_variance_at_zero_db() {
        let f = unit_frame(1_000_000);
        let g = awgn(&f, 0.0, 7);
        let var = g
            .samples
            .iter()
            .zip(&f.samples)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            / f.samples.len() as f64;
        assert!((var - 1.0).abs() < 0.01, "{var}");
    }

    #[test]
    fn seeded_noise_is_reproducible() {
        let f = unit_frame(800);
        assert_eq!(awgn(&f, 5.0, 3), awgn(&f, 5.0, 3));
        assert_ne!(awgn(&f, 5.0, 3), awgn(&f, 5.0, 4));
    }

    #[test]
    fn ideal_link_mse_at_10db() {
        let t = vec![Complex64::new(0.0, 0.0); 100_000];
        let e = ideal_analog_link(&t, 10.0, 11);
        let mse = e.iter().map(|z| z.norm_sqr()).sum::<f64>() / t.len() as f64;
        assert!((mse - 0.1).abs() < 0.002, "{mse}");
    }
}
