use num_complex::Complex64;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::codec::training_images;
use super::data::{gaussian_symbols, transmit_record};
use super::{accumulate, check_progress, derive_seed, TargetSource, TrainConfig, TAG_STAGE2};
use crate::error::{Error, Result};
use crate::link::{Emulator, Guard, LinkRecord, WaveformMap};
use crate::nn::{calibrate_distortion, calibrate_noise_ratio, complex_to_reals, evaluate, ProxyModel, Sgd, Tensor, ToyJscc};

#[derive(Debug, Clone, PartialEq)]
pub struct ProxyFit {
    /// Training-set loss before training and after each epoch.
    pub initial_loss: f64,
    pub trace: Vec<f64>,
    /// Mean squared complex error per sample between proxy output and the
    /// real receiver waveform on held-out records.
    pub held_out_mse: f64,
    /// Mean injected noise power per sample over the held-out records.
    pub noise_var: f64,
    /// Mean squared error between the reference waveform and the noiseless
    /// link output on the held-out records.
    pub floor: f64,
    pub train_records: usize,
    pub held_out_records: usize,
}

impl ProxyFit {
    /// `2σ² + floor`.
    pub fn bound(&self) -> f64 {
        2.0 * self.noise_var + self.floor
    }

    pub fn final_loss(&self) -> f64 {
        *self.trace.last().unwrap_or(&self.initial_loss)
    }
}

/// Records for surrogate training: targets from the curriculum source,
/// SNR from the curriculum policy. `tag` separates independent draws.
pub fn proxy_dataset(
    em: &Emulator,
    cfg: &TrainConfig,
    jscc: Option<&ToyJscc>,
    count: usize,
    tag: u64,
) -> Result<Vec<LinkRecord>> {
    let base = derive_seed(derive_seed(cfg.seed, TAG_STAGE2), tag);
    let pool = jscc.map(|m| training_images(m, cfg));
    (0..count as u64)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(base, 2 * i));
            let symbols = match (cfg.curriculum.source, jscc, &pool) {
                (TargetSource::Jscc, Some(m), Some(pool)) => {
                    let n = (cfg.symbols_per_waveform / m.symbols_per_image()).max(1);
                    let imgs: Vec<Vec<f64>> = pool.choose_multiple(&mut rng, n).cloned().collect();
                    m.encode(&imgs)?
                }
                (TargetSource::Jscc, _, _) => {
                    return Err(Error::config("image-encoder targets requested without an encoder"))
                }
                _ => gaussian_symbols(cfg.symbols_per_waveform, &mut rng),
            };
            let snr = cfg.curriculum.snr.sample(&mut rng);
            transmit_record(em, symbols, snr, derive_seed(base, 2 * i + 1))
        })
        .collect()
}

struct Pair {
    input: Tensor,
    target: Tensor,
    noise: Vec<Complex64>,
}

/// Training pairs carry the noise each record actually saw, so the fit
/// matches realizations rather than collapsing onto the conditional mean.
fn pairs(records: &[LinkRecord], proxy: &ProxyModel, map: &WaveformMap) -> Result<Vec<Pair>> {
    records
        .iter()
        .map(|r| {
            let s = map.synthesize(&r.targets, Guard::Silent);
            if s.len() != r.reconstructed.len() {
                return Err(Error::Shape("record waveform lengths differ".into()));
            }
            let n = s.len();
            Ok(Pair {
                input: Tensor::new(&[n, 2], complex_to_reals(&s))?,
                target: Tensor::new(&[n, 2], complex_to_reals(&r.reconstructed))?,
                noise: proxy.record_noise(r),
            })
        })
        .collect()
}

fn pair_loss(proxy: &ProxyModel, p: &Pair) -> Result<(f64, Vec<Vec<f64>>)> {
    evaluate(&proxy.params, |g, v| {
        let x = g.input(p.input.clone());
        let y = proxy.forward(g, v, x, Some(&p.noise));
        let t = g.input(p.target.clone());
        g.mse(y, t)
    })
}

fn sq_err(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>() / a.len() as f64
}

/// Mean squared complex error per sample between the proxy output (noise
/// seeded from `seed`) and the recorded receiver waveforms.
pub fn proxy_fidelity(proxy: &ProxyModel, em: &Emulator, records: &[LinkRecord], seed: u64) -> Result<f64> {
    let map = em.waveform_map();
    let mut total = 0.0;
    for (i, r) in records.iter().enumerate() {
        let s = map.synthesize(&r.targets, Guard::Silent);
        let out = proxy.apply(&s, r.snr_db, derive_seed(seed, i as u64))?;
        total += sq_err(&out, &r.reconstructed);
    }
    Ok(total / records.len().max(1) as f64)
}

/// Mean squared complex error per sample between the proxy output and the
/// recorded receiver waveforms when the proxy is driven by each record's own
/// noise realization. Isolates the surrogate's deterministic mismatch.
pub fn proxy_tracking_error(proxy: &ProxyModel, em: &Emulator, records: &[LinkRecord]) -> Result<f64> {
    let pairs = pairs(records, proxy, em.waveform_map())?;
    mean_pair_loss(proxy, &pairs)
}

fn mean_pair_loss(proxy: &ProxyModel, pairs: &[Pair]) -> Result<f64> {
    let mut s = 0.0;
    for p in pairs {
        s += pair_loss(proxy, p)?.0;
    }
    Ok(s / pairs.len() as f64)
}

/// Fits the surrogate for `epochs` on `records`, recalibrating its noise
/// level first. Returns the initial loss and the per-epoch trace.
pub(crate) fn fit_proxy(
    proxy: &mut ProxyModel,
    em: &Emulator,
    records: &[LinkRecord],
    epochs: usize,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<(f64, Vec<f64>)> {
    proxy.set_noise_ratio(calibrate_noise_ratio(records)?)?;
    proxy.set_distortion(calibrate_distortion(em, &records[..records.len().min(8)])?)?;
    let pairs = pairs(records, proxy, em.waveform_map())?;
    let initial = mean_pair_loss(proxy, &pairs)?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 1));
    let mut sgd = Sgd::new(cfg.lr, cfg.momentum);
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    let mut trace = Vec::with_capacity(epochs);
    for _ in 0..epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.proxy_batch_size) {
            let mut acc = None;
            for &i in batch {
                let (_, g) = pair_loss(proxy, &pairs[i])?;
                accumulate(&mut acc, g, 1.0 / batch.len() as f64);
            }
            sgd.step(&mut proxy.params, &acc.expect("non-empty batch"));
        }
        let l = mean_pair_loss(proxy, &pairs)?;
        check_progress(l, initial, "proxy training", &trace)?;
        trace.push(l);
    }
    Ok((initial, trace))
}

/// Trains on the first three quarters of `records` and reports fidelity on
/// the rest.
pub fn stage2_train_proxy(
    records: &[LinkRecord],
    em: &Emulator,
    proxy: &mut ProxyModel,
    cfg: &TrainConfig,
) -> Result<ProxyFit> {
    cfg.validate()?;
    if records.len() < 2 {
        return Err(Error::Training(format!(
            "surrogate training needs at least 2 records (train and held-out), got {}",
            records.len()
        )));
    }
    let held = (records.len() / 4).max(1);
    let (train, test) = records.split_at(records.len() - held);
    let seed = derive_seed(cfg.seed, TAG_STAGE2 + 100);
    let (initial_loss, trace) = fit_proxy(proxy, em, train, cfg.proxy_epochs, cfg, seed)?;
    let held_out_mse = proxy_fidelity(proxy, em, test, derive_seed(seed, 2))?;
    let map = em.waveform_map();
    let mut floor = 0.0;
    let mut noise_var = 0.0;
    for r in test {
        let clean = transmit_record(em, r.targets.clone(), f64::INFINITY, 0)?;
        floor += sq_err(&map.synthesize(&r.targets, Guard::Silent), &clean.reconstructed);
        noise_var += proxy.sample_noise_variance(r.snr_db);
    }
    Ok(ProxyFit {
        initial_loss,
        trace,
        held_out_mse,
        noise_var: noise_var / test.len() as f64,
        floor: floor / test.len() as f64,
        train_records: train.len(),
        held_out_records: test.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::ModelConfig;
    use crate::phy::PhyConfig;
    use crate::train::{Curriculum, SnrPolicy};

    fn cfg() -> TrainConfig {
        TrainConfig {
            proxy_epochs: 4,
            proxy_records: 8,
            symbols_per_waveform: 72,
            proxy_batch_size: 4,
            curriculum: Curriculum {
                snr: SnrPolicy::Fixed(10.0),
                ..Curriculum::default()
            },
            ..TrainConfig::default()
        }
    }

    fn proxy(em: &Emulator) -> ProxyModel {
        ProxyModel::for_link(&ModelConfig::default(), em, 3)
    }

    #[test]
    fn insufficient_records() {
        let em = Emulator::new(&PhyConfig::default()).unwrap();
        let recs = proxy_dataset(&em, &cfg(), None, 1, 0).unwrap();
        assert!(matches!(
            stage2_train_proxy(&recs, &em, &mut proxy(&em), &cfg()),
            Err(Error::Training(_))
        ));
    }

    #[test]
    fn identical_seeds_identical_parameters() {
        let em = Emulator::new(&PhyConfig::default()).unwrap();
        let c = cfg();
        let recs = proxy_dataset(&em, &c, None, c.proxy_records, 0).unwrap();
        let mut a = proxy(&em);
        let mut b = proxy(&em);
        let fa = stage2_train_proxy(&recs, &em, &mut a, &c).unwrap();
        let fb = stage2_train_proxy(&recs, &em, &mut b, &c).unwrap();
        assert_eq!(a.params, b.params);
        assert_eq!(fa, fb);
        assert_eq!((fa.train_records, fa.held_out_records), (6, 2));
        assert!(fa.initial_loss < 1e-20, "identity nets reproduce records: {}", fa.initial_loss);
        assert!(fa.final_loss() <= fa.initial_loss + 1e-12);
        assert!(fa.held_out_mse <= fa.bound());
    }

    #[test]
    fn image_source_needs_encoder() {
        let em = Emulator::new(&PhyConfig::default()).unwrap();
        let mut c = cfg();
        c.curriculum.source = TargetSource::Jscc;
        assert!(proxy_dataset(&em, &c, None, 2, 0).is_err());
        let m = ToyJscc::new(&ModelConfig::default(), 1);
        let recs = proxy_dataset(&em, &c, Some(&m), 2, 0).unwrap();
        assert_eq!(recs[0].targets.len(), 72);
    }
}
