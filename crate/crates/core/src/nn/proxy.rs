use std::io::{Read, Write};
use std::rc::Rc;
use std::sync::Arc;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::graph::{Graph, Var, ZERO};
use super::layers::ConvStack;
use super::ops::{complex_to_reals, reals_to_complex, AnalyzeOp, SynthOp};
use super::params::ParamSet;
use super::reshape::{fold_index, unfold_index};
use super::tensor::Tensor;
use super::{widths, ModelConfig};
use crate::error::{Error, Result};
use crate::link::{
    default_scale, emulated_link, noise_variance, Emulator, Guard, LinkRecord, RecoveryMode, TargetSymbols,
    WaveformMap,
};
use crate::phy::{Constellation, Modulation};

/// The fixed channel between the sender and receiver nets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProxyChannel {
    /// Noise added directly to the waveform.
    Additive,
    /// The link's own structure: read the chosen subcarriers, clip to the
    /// constellation box, add noise, clip again, synthesize with a cyclic
    /// guard.
    Projected,
}

/// Differentiable surrogate of the link: `f_recv(g(f_send(s)))` where the
/// nets are residual 1D convolution stacks that start as the identity and
/// `g` is a parameter-free channel carrying seeded noise shaped like the
/// receiver's (complex Gaussian on the chosen subcarriers).
#[derive(Debug, Clone)]
pub struct ProxyModel {
    pub params: ParamSet,
    send: ConvStack,
    recv: ConvStack,
    map: WaveformMap,
    channel: ProxyChannel,
    /// Per-axis box half-width in the unit-power domain.
    limit: [f64; 2],
    /// Received noise power per subcarrier relative to the unit-power
    /// symbol domain at 0 dB SNR.
    noise_ratio: f64,
    /// SNR-independent error power per subcarrier (quantization).
    distortion: f64,
    fingerprint: String,
}

/// Mean of frame power over `scale²`, i.e. how much noise per subcarrier
/// the link adds in the unit-power domain at 0 dB.
pub fn calibrate_noise_ratio(records: &[LinkRecord]) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::Training("no records to calibrate the proxy noise".into()));
    }
    let sum: f64 = records.iter().map(|r| r.tx.mean_power() / (r.scale * r.scale)).sum();
    Ok(sum / records.len() as f64)
}

/// Mean per-subcarrier error of noiseless transmission, from the recorded
/// targets re-sent through `em` without noise.
pub fn calibrate_distortion(em: &Emulator, records: &[LinkRecord]) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::Training("no records to calibrate the proxy distortion".into()));
    }
    let mut sum = 0.0;
    let mut count = 0;
    for r in records {
        let targets = TargetSymbols::new(r.targets.clone(), r.scale)?;
        let clean = emulated_link(em, &targets, f64::INFINITY, 0, RecoveryMode::Soft, None)?;
        sum += clean.estimates.iter().zip(&r.targets).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>();
        count += r.targets.len();
    }
    Ok(sum / count as f64)
}

/// Runs a residual 1D stack on `[n, 2]`.
fn residual_1d(g: &mut Graph, p: &[Var], stack: &ConvStack, x: Var, n: usize) -> Var {
    let (fold, shape) = fold_index(n, 2, n);
    let folded = g.gather(x, fold, &shape);
    let y = stack.forward(g, p, folded);
    let back = g.gather(y, unfold_index(n, 2, n), &[n, 2]);
    let x2 = g.reshape(x, &[n, 2]);
    g.add(back, x2)
}

/// Gather index copying the first `keep` of `2·from` reals and zero-filling
/// up to `2·to`.
fn resize_index(from: usize, to: usize) -> Rc<[usize]> {
    (0..2 * to).map(|i| if i < 2 * from { i } else { ZERO }).collect::<Vec<_>>().into()
}

impl ProxyModel {
    /// Box limits follow the link's modulation at the default target scale.
    pub fn new(cfg: &ModelConfig, map: WaveformMap, modulation: Modulation, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamSet::new();
        let k = (1, cfg.proxy_kernel);
        let w = widths(2, cfg.proxy_channels, cfg.proxy_layers, 2);
        let send = ConvStack::new(&mut params, "send", &w, k, cfg.activation, true, &mut rng);
        let recv = ConvStack::new(&mut params, "recv", &w, k, cfg.activation, true, &mut rng);
        let a = Constellation::new(modulation).max_amplitude() / default_scale(modulation);
        let limit = [a, if modulation == Modulation::Bpsk { 0.0 } else { a }];
        let channel = cfg.proxy_channel;
        let fingerprint = format!(
            "proxy-c{}-l{}-k{}-{}-{}-n{}-s{}",
            cfg.proxy_channels,
            cfg.proxy_layers,
            cfg.proxy_kernel,
            cfg.act_name(),
            match channel {
                ProxyChannel::Additive => "add",
                ProxyChannel::Projected => "proj",
            },
            map.n_prime(),
            map.samples_per_ofdm()
        );
        ProxyModel {
            params,
            send,
            recv,
            map,
            channel,
            limit,
            noise_ratio: 1.0,
            distortion: 0.0,
            fingerprint,
        }
    }

    pub fn for_link(cfg: &ModelConfig, em: &Emulator, seed: u64) -> Self {
        Self::new(cfg, em.waveform_map().clone(), em.config().modulation, seed)
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    pub fn channel(&self) -> ProxyChannel {
        self.channel
    }

    pub fn noise_ratio(&self) -> f64 {
        self.noise_ratio
    }

    pub fn set_noise_ratio(&mut self, ratio: f64) -> Result<()> {
        if !(ratio.is_finite() && ratio >= 0.0) {
            return Err(Error::config(format!("noise ratio must be finite and non-negative, got {ratio}")));
        }
        self.noise_ratio = ratio;
        Ok(())
    }

    pub fn distortion(&self) -> f64 {
        self.distortion
    }

    pub fn set_distortion(&mut self, d: f64) -> Result<()> {
        if !(d.is_finite() && d >= 0.0) {
            return Err(Error::config(format!("distortion must be finite and non-negative, got {d}")));
        }
        self.distortion = d;
        Ok(())
    }

    /// Power per complex sample that per-subcarrier variance `v` produces.
    fn per_sample(&self, v: f64) -> f64 {
        let fft = self.map.samples_per_ofdm() - self.map.cp_len();
        v * self.map.n_prime() as f64 / fft as f64
    }

    /// Channel-noise power per complex sample at `snr_db`.
    pub fn sample_noise_variance(&self, snr_db: f64) -> f64 {
        self.per_sample(noise_variance(self.noise_ratio, snr_db))
    }

    /// Total injected power per complex sample (channel noise plus the
    /// distortion floor), before any clipping.
    pub fn injected_variance(&self, snr_db: f64) -> f64 {
        self.per_sample(noise_variance(self.noise_ratio, snr_db) + self.distortion)
    }

    /// Symbols carried by the whole OFDM symbols covering `n` samples.
    fn symbols_for(&self, n: usize) -> usize {
        n.div_ceil(self.map.samples_per_ofdm()) * self.map.n_prime()
    }

    /// Seeded per-subcarrier noise for a waveform of `n` samples.
    pub fn sample_noise(&self, n: usize, snr_db: f64, seed: u64) -> Vec<Complex64> {
        let k = self.symbols_for(n);
        let var = noise_variance(self.noise_ratio, snr_db) + self.distortion;
        if var == 0.0 {
            return vec![Complex64::new(0.0, 0.0); k];
        }
        let sigma = (var / 2.0).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..k)
            .map(|_| {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                Complex64::new(sigma * re, sigma * im)
            })
            .collect()
    }

    /// The noise realization a record actually saw: its estimates minus the
    /// box-clipped targets, zero-padded to whole OFDM symbols. Feeding this
    /// to [`Self::forward`] reproduces the record through identity nets.
    pub fn record_noise(&self, record: &LinkRecord) -> Vec<Complex64> {
        let [a, b] = self.limit;
        let n = self.map.samples_for(record.targets.len());
        let mut noise: Vec<Complex64> = record
            .estimates
            .iter()
            .zip(&record.targets)
            .map(|(e, t)| e - Complex64::new(t.re.clamp(-a, a), t.im.clamp(-b, b)))
            .collect();
        noise.resize(self.symbols_for(n), Complex64::new(0.0, 0.0));
        noise
    }

    fn channel_graph(&self, g: &mut Graph, h: Var, n: usize, noise: Option<&[Complex64]>) -> Var {
        let k = self.symbols_for(n);
        let n_pad = self.map.samples_for(k);
        if let Some(noise) = noise {
            assert_eq!(noise.len(), k, "noise length");
        }
        match self.channel {
            ProxyChannel::Additive => match noise {
                None => h,
                Some(noise) => {
                    let mut w = self.map.synthesize(noise, Guard::Cyclic);
                    w.truncate(n);
                    let nv = g.input(Tensor {
                        shape: vec![n, 2],
                        data: complex_to_reals(&w),
                    });
                    g.add(h, nv)
                }
            },
            ProxyChannel::Projected => {
                let limit: Rc<[f64]> = self.limit.to_vec().into();
                let padded = g.gather(h, resize_index(n, n_pad), &[2 * n_pad]);
                let bins = g.linear(padded, Arc::new(AnalyzeOp::new(self.map.clone(), k)));
                let mut bins = g.clamp(bins, limit.clone());
                if let Some(noise) = noise {
                    let nv = g.input(Tensor::vector(complex_to_reals(noise)));
                    let noisy = g.add(bins, nv);
                    bins = g.clamp(noisy, limit);
                }
                let w = g.linear(bins, Arc::new(SynthOp::new(self.map.clone(), k, Guard::Cyclic)));
                g.gather(w, resize_index(n, n), &[n, 2])
            }
        }
    }

    /// `x` is `[n, 2]`; `noise`, when given, comes from [`Self::sample_noise`].
    pub fn forward(&self, g: &mut Graph, p: &[Var], x: Var, noise: Option<&[Complex64]>) -> Var {
        let n = g.value(x).len() / 2;
        let h = residual_1d(g, p, &self.send, x, n);
        let r = self.channel_graph(g, h, n, noise);
        residual_1d(g, p, &self.recv, r, n)
    }

    pub fn apply(&self, waveform: &[Complex64], snr_db: f64, seed: u64) -> Result<Vec<Complex64>> {
        if waveform.is_empty() {
            return Err(Error::Shape("empty waveform".into()));
        }
        let noise = self.sample_noise(waveform.len(), snr_db, seed);
        let mut g = Graph::new();
        let p = self.params.bind(&mut g);
        let x = g.input(Tensor::new(&[waveform.len(), 2], complex_to_reals(waveform))?);
        let y = self.forward(&mut g, &p, x, Some(&noise));
        Ok(reals_to_complex(&g.value(y).data))
    }

    /// Writes the parameters with the noise calibration as a trailing tensor.
    pub fn save<W: Write>(&self, w: W) -> Result<()> {
        let mut all = self.params.clone();
        all.add("noise", Tensor::vector(vec![self.noise_ratio, self.distortion]));
        all.write(w, &self.fingerprint)
    }

    pub fn load<R: Read>(&mut self, r: R) -> Result<()> {
        let mut all = self.params.clone();
        all.add("noise", Tensor::vector(vec![0.0; 2]));
        all.read_into(r, &self.fingerprint)?;
        let noise = all.tensors.pop().expect("noise tensor").data;
        all.names.pop();
        self.set_noise_ratio(noise[0])?;
        self.set_distortion(noise[1])?;
        self.params = all;
        Ok(())
    }
}
