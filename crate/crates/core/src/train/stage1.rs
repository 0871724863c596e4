use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::data::{gaussian_symbols, transmit_record, CompSample};
use super::{accumulate, check_finite, check_progress, derive_seed, TrainConfig, TAG_STAGE1};
use crate::error::Result;
use crate::link::Emulator;
use crate::nn::{evaluate, Compensator, Graph, Sgd};

/// Loss before training and after each epoch, on the training set.
#[derive(Debug, Clone, PartialEq)]
pub struct StageReport {
    pub initial_loss: f64,
    pub trace: Vec<f64>,
}

impl StageReport {
    pub fn final_loss(&self) -> f64 {
        *self.trace.last().unwrap_or(&self.initial_loss)
    }
}

/// Known waveforms: Gaussian targets sent through the real link at the
/// stage-1 SNR. Identical for identical configs.
pub fn comp_dataset(em: &Emulator, cfg: &TrainConfig) -> Result<Vec<CompSample>> {
    let base = derive_seed(cfg.seed, TAG_STAGE1);
    (0..cfg.comp_waveforms as u64)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(base, 2 * i));
            let symbols = gaussian_symbols(cfg.symbols_per_waveform, &mut rng);
            let record = transmit_record(em, symbols, cfg.comp_snr_db, derive_seed(base, 2 * i + 1))?;
            CompSample::from_record(&record, em.waveform_map())
        })
        .collect()
}

/// Mean waveform MSE of the compensator output against the references.
pub fn comp_loss(comp: &Compensator, samples: &[CompSample]) -> f64 {
    let total: f64 = samples
        .iter()
        .map(|s| {
            let mut g = Graph::new();
            let p = comp.params.bind(&mut g);
            let x = g.input(s.input.clone());
            let y = comp.forward(&mut g, &p, x, &s.mask);
            let r = g.input(s.reference.clone());
            let l = g.mse(y, r);
            g.value(l).item()
        })
        .sum();
    total / samples.len().max(1) as f64
}

pub fn train_compensator_on(samples: &[CompSample], comp: &mut Compensator, cfg: &TrainConfig) -> Result<StageReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, TAG_STAGE1 + 100));
    let mut sgd = Sgd::new(cfg.lr, cfg.momentum);
    let initial_loss = comp_loss(comp, samples);
    check_finite(initial_loss, "stage 1", &[])?;
    let mut trace = Vec::with_capacity(cfg.comp_epochs);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    for _ in 0..cfg.comp_epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            let mut acc = None;
            for &i in batch {
                let s = &samples[i];
                let (_, g) = evaluate(&comp.params, |g, p| {
                    let x = g.input(s.input.clone());
                    let y = comp.forward(g, p, x, &s.mask);
                    let r = g.input(s.reference.clone());
                    g.mse(y, r)
                })?;
                accumulate(&mut acc, g, 1.0 / batch.len() as f64);
            }
            sgd.step(&mut comp.params, &acc.expect("non-empty batch"));
        }
        let l = comp_loss(comp, samples);
        check_progress(l, initial_loss, "stage 1", &trace)?;
        trace.push(l);
    }
    Ok(StageReport { initial_loss, trace })
}

/// Trains on [`comp_dataset`].
pub fn stage1_train_compensator(em: &Emulator, comp: &mut Compensator, cfg: &TrainConfig) -> Result<StageReport> {
    cfg.validate()?;
    let samples = comp_dataset(em, cfg)?;
    train_compensator_on(&samples, comp, cfg)
}
