use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::data::gaussian_symbols;
use super::stage1::StageReport;
use super::{accumulate, check_progress, derive_seed, TrainConfig, TAG_CODEC, TAG_IMAGES};
use crate::error::Result;
use crate::link::{emulated_link, ideal_analog_link, Emulator, RecoveryMode, TargetSymbols, WaveformCompensator};
use crate::nn::{complex_to_reals, evaluate, glyph_images, Compensator, Sgd, Tensor, ToyJscc};

fn mean_sq_diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let n: usize = a.iter().map(Vec::len).sum();
    a.iter()
        .zip(b)
        .flat_map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q).powi(2)))
        .sum::<f64>()
        / n as f64
}

/// The training image pool of a config.
pub(crate) fn training_images(jscc: &ToyJscc, cfg: &TrainConfig) -> Vec<Vec<f64>> {
    let side = (jscc.pixels() as f64).sqrt() as usize;
    glyph_images(cfg.train_images, side, derive_seed(cfg.seed, TAG_IMAGES))
}

/// Image loss through the ideal analog channel: unit-power symbols plus
/// complex Gaussian noise at `snr_db`, with the given noise draws.
fn awgn_batch_loss(jscc: &ToyJscc, images: &Tensor, noise: &[f64]) -> Result<(f64, Vec<Vec<f64>>)> {
    let shape = [images.shape[0], 2 * jscc.symbols_per_image()];
    evaluate(&jscc.params, |g, p| {
        let x = g.input(images.clone());
        let z = jscc.encode_graph(g, p, x);
        let n = g.input(Tensor { shape: shape.to_vec(), data: noise.to_vec() });
        let zn = g.add(z, n);
        let y = jscc.decode_graph(g, p, zn);
        g.mse(y, x)
    })
}

fn noise_reals(rng: &mut ChaCha8Rng, symbols: usize, snr_db: f64) -> Vec<f64> {
    let sd = 10f64.powf(-snr_db / 20.0);
    complex_to_reals(&gaussian_symbols(symbols, rng)).into_iter().map(|v| v * sd).collect()
}

/// Trains the codec over the ideal analog link with the curriculum SNR.
/// The trace holds the mean training loss of each epoch.
pub fn pretrain_codec_awgn(jscc: &mut ToyJscc, cfg: &TrainConfig) -> Result<StageReport> {
    cfg.validate()?;
    let images = training_images(jscc, cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, TAG_CODEC));
    let mut sgd = Sgd::new(cfg.lr, cfg.momentum);
    let k = jscc.symbols_per_image();
    let mut order: Vec<usize> = (0..images.len()).collect();
    let mut initial_loss = None;
    let mut trace = Vec::with_capacity(cfg.jscc_epochs);
    for _ in 0..cfg.jscc_epochs {
        order.shuffle(&mut rng);
        let mut sum = 0.0;
        let mut batches = 0;
        for batch in order.chunks(cfg.batch_size) {
            let imgs: Vec<Vec<f64>> = batch.iter().map(|&i| images[i].clone()).collect();
            let t = jscc.batch(&imgs)?;
            let snr = cfg.curriculum.snr.sample(&mut rng);
            let noise = noise_reals(&mut rng, batch.len() * k, snr);
            let (l, g) = awgn_batch_loss(jscc, &t, &noise)?;
            let init = *initial_loss.get_or_insert(l);
            check_progress(l, init, "codec pre-training", &trace)?;
            let mut acc = None;
            accumulate(&mut acc, g, 1.0);
            sgd.step(&mut jscc.params, &acc.expect("gradient"));
            sum += l;
            batches += 1;
        }
        trace.push(sum / batches as f64);
    }
    Ok(StageReport {
        initial_loss: initial_loss.unwrap_or(0.0),
        trace,
    })
}

/// Image MSE over the ideal analog link.
pub fn awgn_image_mse(jscc: &ToyJscc, images: &[Vec<f64>], snr_db: f64, seed: u64) -> Result<f64> {
    let s = jscc.encode(images)?;
    let out = jscc.decode(&ideal_analog_link(&s, snr_db, seed))?;
    Ok(mean_sq_diff(images, &out))
}

/// Image MSE through the emulated link, optionally compensated.
pub fn link_image_mse(
    jscc: &ToyJscc,
    comp: Option<&Compensator>,
    em: &Emulator,
    images: &[Vec<f64>],
    snr_db: f64,
    seed: u64,
    mode: RecoveryMode,
) -> Result<f64> {
    let targets = TargetSymbols::with_default_scale(jscc.encode(images)?, em.config().modulation)?;
    let comp = comp.map(|c| c as &dyn WaveformCompensator);
    let out = emulated_link(em, &targets, snr_db, seed, mode, comp)?;
    Ok(mean_sq_diff(images, &jscc.decode(&out.estimates)?))
}

/// An analog-channel codec evaluated over the emulated link with hard
/// recovery and no adaptation: `(snr_db, image_mse)` per point.
pub fn zero_shot_deploy(
    jscc: &ToyJscc,
    em: &Emulator,
    snrs: &[f64],
    images: &[Vec<f64>],
    seed: u64,
) -> Result<Vec<(f64, f64)>> {
    snrs.iter()
        .enumerate()
        .map(|(i, &snr)| {
            let mse = link_image_mse(jscc, None, em, images, snr, derive_seed(seed, i as u64), RecoveryMode::Hard)?;
            Ok((snr, mse))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{image_variance, ModelConfig};
    use crate::phy::PhyConfig;
    use crate::train::SnrPolicy;

    #[test]
    fn linear_codec_learns_small_set() {
        let cfg = TrainConfig {
            train_images: 16,
            batch_size: 16,
            jscc_epochs: 2000,
            lr: 0.05,
            curriculum: crate::train::Curriculum {
                snr: SnrPolicy::Fixed(60.0),
                ..Default::default()
            },
            ..TrainConfig::default()
        };
        let mut m = ToyJscc::new(&ModelConfig::default(), 1);
        let r = pretrain_codec_awgn(&mut m, &cfg).unwrap();
        let images = training_images(&m, &cfg);
        let mse = awgn_image_mse(&m, &images, f64::INFINITY, 0).unwrap();
        let var = image_variance(&images);
        assert!(mse < 0.1 * var, "mse {mse} var {var} trace end {:?}", r.trace.last());
        assert!(r.final_loss() <= r.initial_loss);
    }

    #[test]
    fn zero_shot_is_reproducible() {
        let em = Emulator::new(&PhyConfig::default()).unwrap();
        let m = ToyJscc::new(&ModelConfig::default(), 2);
        let images = glyph_images(6, 8, 1);
        let a = zero_shot_deploy(&m, &em, &[0.0, 20.0], &images, 5).unwrap();
        assert_eq!(a, zero_shot_deploy(&m, &em, &[0.0, 20.0], &images, 5).unwrap());
        assert_eq!(a.len(), 2);
        assert!(a.iter().all(|&(_, v)| v.is_finite() && v >= 0.0));
    }
}
