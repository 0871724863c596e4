use std::io::{Read, Write};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::graph::{Graph, Var};
use super::layers::DenseStack;
use super::ops::{complex_to_reals, reals_to_complex};
use super::params::ParamSet;
use super::tensor::Tensor;
use super::ModelConfig;
use crate::error::{Error, Result};

/// Pairs consecutive reals into complex symbols: `(z1, z2) → z1 + j·z2`.
pub fn pair_latent(z: &[f64]) -> Vec<Complex64> {
    reals_to_complex(z)
}

/// Procedural `side × side` grayscale images in `[0, 1]`: two or three
/// strokes (bars, diagonals, blocks) of random brightness on black.
pub fn glyph_images(n: usize, side: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let mut img = vec![0.0; side * side];
            for _ in 0..rng.random_range(2..=3) {
                let v: f64 = rng.random_range(0.5..1.0);
                let mut put = |r: usize, c: usize| {
                    let px = &mut img[r * side + c];
                    *px = f64::max(*px, v);
                };
                let a = rng.random_range(0..side);
                let lo = rng.random_range(0..side / 2 + 1);
                let hi = rng.random_range(side / 2..side);
                match rng.random_range(0..4) {
                    0 => (lo..=hi).for_each(|c| put(a, c)),
                    1 => (lo..=hi).for_each(|r| put(r, a)),
                    2 => (0..side).filter(|&i| i + lo < side).for_each(|i| put(i, i + lo)),
                    _ => {
                        let (r0, c0) = (rng.random_range(0..side - 1), rng.random_range(0..side - 1));
                        let s = rng.random_range(2..=3);
                        for r in r0..(r0 + s).min(side) {
                            for c in c0..(c0 + s).min(side) {
                                put(r, c);
                            }
                        }
                    }
                }
            }
            img
        })
        .collect()
}

/// Pixel variance over a whole image set.
pub fn image_variance(images: &[Vec<f64>]) -> f64 {
    let n: usize = images.iter().map(Vec::len).sum();
    let mean = images.iter().flatten().sum::<f64>() / n as f64;
    images.iter().flatten().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64
}

/// Dense encoder to `2K` reals, per-image power normalization to unit
/// average symbol power, dense decoder back to pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyJscc {
    pub params: ParamSet,
    enc: DenseStack,
    dec: DenseStack,
    pixels: usize,
    latent: usize,
    fingerprint: String,
}

impl ToyJscc {
    pub fn new(cfg: &ModelConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamSet::new();
        let pixels = cfg.image_side * cfg.image_side;
        let latent = 2 * cfg.latent_symbols;
        let mut ew = vec![pixels];
        ew.extend(&cfg.jscc_hidden);
        ew.push(latent);
        let dw: Vec<usize> = ew.iter().rev().copied().collect();
        let enc = DenseStack::new(&mut params, "enc", &ew, cfg.activation, &mut rng);
        let dec = DenseStack::new(&mut params, "dec", &dw, cfg.activation, &mut rng);
        let hidden: Vec<String> = cfg.jscc_hidden.iter().map(|h| h.to_string()).collect();
        let fingerprint = format!(
            "jscc-p{pixels}-z{latent}-h{}-{}",
            if hidden.is_empty() { "none".to_string() } else { hidden.join("x") },
            cfg.act_name()
        );
        ToyJscc {
            params,
            enc,
            dec,
            pixels,
            latent,
            fingerprint,
        }
    }

    pub fn pixels(&self) -> usize {
        self.pixels
    }

    /// Symbols per image.
    pub fn symbols_per_image(&self) -> usize {
        self.latent / 2
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    /// `images: [b, pixels]` → normalized latent `[b, 2K]`.
    pub fn encode_graph(&self, g: &mut Graph, p: &[Var], images: Var) -> Var {
        let z = self.enc.forward(g, p, images);
        g.power_normalize(z, self.latent)
    }

    /// `latent: [b, 2K]` → `[b, pixels]`.
    pub fn decode_graph(&self, g: &mut Graph, p: &[Var], latent: Var) -> Var {
        self.dec.forward(g, p, latent)
    }

    /// Stacks images into a `[b, pixels]` tensor.
    pub fn batch(&self, images: &[Vec<f64>]) -> Result<Tensor> {
        if let Some(bad) = images.iter().find(|i| i.len() != self.pixels) {
            return Err(Error::Shape(format!("image has {} pixels, expected {}", bad.len(), self.pixels)));
        }
        Tensor::new(&[images.len(), self.pixels], images.concat())
    }

    /// `K` symbols per image, concatenated.
    pub fn encode(&self, images: &[Vec<f64>]) -> Result<Vec<Complex64>> {
        let t = self.batch(images)?;
        let mut g = Graph::new();
        let p = self.params.bind(&mut g);
        let x = g.input(t);
        let z = self.encode_graph(&mut g, &p, x);
        Ok(pair_latent(&g.value(z).data))
    }

    pub fn decode(&self, estimates: &[Complex64]) -> Result<Vec<Vec<f64>>> {
        let k = self.symbols_per_image();
        if estimates.is_empty() || estimates.len() % k != 0 {
            return Err(Error::Shape(format!(
                "{} estimates is not a whole number of {k}-symbol images",
                estimates.len()
            )));
        }
        let b = estimates.len() / k;
        let mut g = Graph::new();
        let p = self.params.bind(&mut g);
        let z = g.input(Tensor::new(&[b, self.latent], complex_to_reals(estimates))?);
        let y = self.decode_graph(&mut g, &p, z);
        Ok(g.value(y).data.chunks(self.pixels).map(<[f64]>::to_vec).collect())
    }

    pub fn save<W: Write>(&self, w: W) -> Result<()> {
        self.params.write(w, &self.fingerprint)
    }

    pub fn load<R: Read>(&mut self, r: R) -> Result<()> {
        self.params.read_into(r, &self.fingerprint)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairing() {
        assert_eq!(
            pair_latent(&[1.0, 2.0, 3.0, 4.0]),
            vec![Complex64::new(1.0, 2.0), Complex64::new(3.0, 4.0)]
        );
    }

    #[test]
    fn glyphs_are_deterministic_and_bounded() {
        let a = glyph_images(20, 8, 1);
        assert_eq!(a, glyph_images(20, 8, 1));
        assert_ne!(a, glyph_images(20, 8, 2));
        assert!(a.iter().flatten().all(|&v| (0.0..=1.0).contains(&v)));
        assert!(a.iter().all(|i| i.iter().any(|&v| v > 0.0)));
        assert!(image_variance(&a) > 0.05);
    }

    #[test]
    fn encoder_output_has_unit_symbol_power() {
        let m = ToyJscc::new(&ModelConfig::default(), 3);
        let imgs = glyph_images(5, 8, 3);
        let s = m.encode(&imgs).unwrap();
        assert_eq!(s.len(), 5 * 12);
        for img in s.chunks(12) {
            let p = img.iter().map(|z| z.norm_sqr()).sum::<f64>() / 12.0;
            assert!((p - 1.0).abs() < 1e-12);
        }
        assert_eq!(m.decode(&s).unwrap().len(), 5);
    }

    #[test]
    fn shape_errors() {
        let m = ToyJscc::new(&ModelConfig::default(), 3);
        assert!(matches!(m.encode(&[vec![0.0; 63]]), Err(Error::Shape(_))));
        assert!(matches!(m.decode(&[Complex64::new(0.0, 0.0); 13]), Err(Error::Shape(_))));
    }
}
