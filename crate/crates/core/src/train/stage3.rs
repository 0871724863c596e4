use std::ops::Range;
use std::sync::Arc;

use num_complex::Complex64;
use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::codec::training_images;
use super::data::{transmit_record, CompSample};
use super::stage2::{fit_proxy, proxy_tracking_error};
use super::{check_progress, derive_seed, LossRow, TrainConfig, TAG_STAGE3};
use crate::error::Result;
use crate::link::{Emulator, Guard, LinkRecord};
use crate::nn::{evaluate, AnalyzeOp, Compensator, Graph, ParamSet, ProxyModel, Sgd, SynthOp, Tensor, ToyJscc, Var};

/// One joint-training batch: images, the surrogate noise draw, and the
/// real-link receiver waveform of the same images under the current
/// encoder.
#[derive(Debug, Clone)]
pub struct PhaseABatch {
    pub images: Tensor,
    pub noise: Vec<Complex64>,
    pub real: CompSample,
    pub snr_db: f64,
}

pub fn phase_a_batch(
    jscc: &ToyJscc,
    proxy: &ProxyModel,
    em: &Emulator,
    images: &[Vec<f64>],
    snr_db: f64,
    seed: u64,
) -> Result<PhaseABatch> {
    let record = transmit_record(em, jscc.encode(images)?, snr_db, derive_seed(seed, 0))?;
    let real = CompSample::from_record(&record, em.waveform_map())?;
    Ok(PhaseABatch {
        images: jscc.batch(images)?,
        noise: proxy.sample_noise(real.samples(), snr_db, derive_seed(seed, 1)),
        real,
        snr_db,
    })
}

/// All three parameter sets concatenated (codec, compensator, surrogate)
/// with the range of each.
pub fn joint_params(jscc: &ToyJscc, comp: &Compensator, proxy: &ProxyModel) -> (ParamSet, [Range<usize>; 3]) {
    let mut all = ParamSet::new();
    let mut ranges = Vec::new();
    for p in [&jscc.params, &comp.params, &proxy.params] {
        let start = all.len();
        for (n, t) in p.names.iter().zip(&p.tensors) {
            all.add(n.clone(), t.clone());
        }
        ranges.push(start..all.len());
    }
    (all, ranges.try_into().expect("three ranges"))
}

/// Loss of one batch with the image path through the surrogate.
#[derive(Debug, Clone)]
pub struct PhaseALoss {
    pub l_jscc: f64,
    pub l_comp: f64,
    pub total: f64,
    /// Gradients for every tensor of [`joint_params`].
    pub grads: Vec<Vec<f64>>,
}

fn build(
    g: &mut Graph,
    v: &[Var],
    ranges: &[Range<usize>; 3],
    models: (&ToyJscc, &Compensator, &ProxyModel),
    em: &Emulator,
    batch: &PhaseABatch,
    gamma: f64,
) -> [Var; 3] {
    let (jscc, comp, proxy) = models;
    let (pj, pc, pp) = (&v[ranges[0].clone()], &v[ranges[1].clone()], &v[ranges[2].clone()]);
    let b = batch.images.shape[0];
    let k = b * jscc.symbols_per_image();
    let n = batch.real.samples();
    let map = em.waveform_map().clone();

    let x = g.input(batch.images.clone());
    let z = jscc.encode_graph(g, pj, x);
    let s = g.linear(z, Arc::new(SynthOp::new(map.clone(), k, Guard::Silent)));
    let s = g.reshape(s, &[n, 2]);
    let s_hat = proxy.forward(g, pp, s, Some(&batch.noise));
    let s_prime = comp.forward(g, pc, s_hat, &batch.real.mask);
    let est = g.linear(s_prime, Arc::new(AnalyzeOp::new(map, k)));
    let est = g.reshape(est, &[b, 2 * jscc.symbols_per_image()]);
    let y = jscc.decode_graph(g, pj, est);
    let l_jscc = g.mse(y, x);

    let r_in = g.input(batch.real.input.clone());
    let r_out = comp.forward(g, pc, r_in, &batch.real.mask);
    let r_ref = g.input(batch.real.reference.clone());
    let l_comp = g.mse(r_out, r_ref);
    let weighted = g.scale(l_comp, gamma);
    let total = g.add(l_jscc, weighted);
    [l_jscc, l_comp, total]
}

/// `L_JSCC + γ·L_comp` and its gradients at `params` (laid out as
/// [`joint_params`]).
pub fn phase_a_loss(
    params: &ParamSet,
    ranges: &[Range<usize>; 3],
    models: (&ToyJscc, &Compensator, &ProxyModel),
    em: &Emulator,
    batch: &PhaseABatch,
    gamma: f64,
) -> Result<PhaseALoss> {
    let mut parts = [0.0; 2];
    let cell = std::cell::Cell::new(parts);
    let (total, grads) = evaluate(params, |g, v| {
        let [lj, lc, t] = build(g, v, ranges, models, em, batch, gamma);
        cell.set([g.value(lj).item(), g.value(lc).item()]);
        t
    })?;
    parts = cell.get();
    Ok(PhaseALoss {
        l_jscc: parts[0],
        l_comp: parts[1],
        total,
        grads,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stage3Report {
    pub rows: Vec<LossRow>,
    /// Joint loss on the fixed validation batches before training and after
    /// each cycle.
    pub validation: Vec<f64>,
    /// Surrogate tracking error on each refresh's held-out fresh records,
    /// before and after.
    pub refresh: Vec<(f64, f64)>,
    pub cycles: usize,
    pub converged: bool,
}

fn fresh_records(
    jscc: &ToyJscc,
    em: &Emulator,
    pool: &[Vec<f64>],
    cfg: &TrainConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<LinkRecord>> {
    (0..cfg.refresh_batch_count)
        .map(|_| {
            let imgs: Vec<Vec<f64>> = pool.choose_multiple(rng, cfg.batch_size).cloned().collect();
            let snr = cfg.curriculum.snr.sample(rng);
            let seed = rand::Rng::random(rng);
            transmit_record(em, jscc.encode(&imgs)?, snr, seed)
        })
        .collect()
}

const VALIDATION_SNRS: [f64; 5] = [-5.0, 5.0, 15.0, 25.0, 35.0];

/// Joint loss through the surrogate on fixed images, SNRs and noise seeds,
/// so successive cycles are compared on identical draws.
fn validation_loss(
    jscc: &ToyJscc,
    comp: &Compensator,
    proxy: &ProxyModel,
    em: &Emulator,
    images: &[Vec<f64>],
    cfg: &TrainConfig,
    seed: u64,
) -> Result<f64> {
    let (lo, hi) = cfg.curriculum.snr.bounds();
    let (params, ranges) = joint_params(jscc, comp, proxy);
    let mut sum = 0.0;
    let mut count = 0;
    for (i, &snr) in VALIDATION_SNRS.iter().enumerate() {
        if snr < lo || snr > hi {
            continue;
        }
        let batch = phase_a_batch(jscc, proxy, em, images, snr, derive_seed(seed, i as u64))?;
        sum += phase_a_loss(&params, &ranges, (jscc, comp, proxy), em, &batch, cfg.gamma)?.total;
        count += 1;
    }
    if count == 0 {
        let snr = (lo + hi) / 2.0;
        let batch = phase_a_batch(jscc, proxy, em, images, snr, seed)?;
        return Ok(phase_a_loss(&params, &ranges, (jscc, comp, proxy), em, &batch, cfg.gamma)?.total);
    }
    Ok(sum / count as f64)
}

/// Alternates surrogate-based joint updates of codec and compensator
/// (phase A) with surrogate refresh on fresh real-link records (phase B)
/// until one cycle improves the joint loss by less than the tolerance.
pub fn stage3_alternate(
    jscc: &mut ToyJscc,
    comp: &mut Compensator,
    proxy: &mut ProxyModel,
    em: &Emulator,
    cfg: &TrainConfig,
) -> Result<Stage3Report> {
    cfg.validate()?;
    let pool = training_images(jscc, cfg);
    let base = derive_seed(cfg.seed, TAG_STAGE3);
    let mut rng = ChaCha8Rng::seed_from_u64(base);
    let mut sgd_j = Sgd::new(cfg.lr, cfg.momentum);
    let mut sgd_c = Sgd::new(cfg.lr, cfg.momentum);
    let mut report = Stage3Report {
        rows: Vec::new(),
        validation: Vec::new(),
        refresh: Vec::new(),
        cycles: 0,
        converged: false,
    };
    let mut initial: Option<f64> = None;
    let mut totals = Vec::new();
    let val_images: Vec<Vec<f64>> = pool.iter().take(cfg.batch_size.max(32)).cloned().collect();
    let val_seed = derive_seed(base, 3);
    let mut previous = validation_loss(jscc, comp, proxy, em, &val_images, cfg, val_seed)?;
    report.validation.push(previous);
    for cycle in 0..cfg.max_cycles {
        let mut sums = [0.0; 3];
        for _ in 0..cfg.steps_per_cycle {
            let imgs: Vec<Vec<f64>> = pool.choose_multiple(&mut rng, cfg.batch_size).cloned().collect();
            let snr = cfg.curriculum.snr.sample(&mut rng);
            let batch = phase_a_batch(jscc, proxy, em, &imgs, snr, rand::Rng::random(&mut rng))?;
            let (params, ranges) = joint_params(jscc, comp, proxy);
            let loss = phase_a_loss(&params, &ranges, (jscc, comp, proxy), em, &batch, cfg.gamma)?;
            let init = *initial.get_or_insert(loss.total);
            totals.push(loss.total);
            check_progress(loss.total, init, "joint training", &totals)?;
            sgd_j.step(&mut jscc.params, &loss.grads[ranges[0].clone()]);
            sgd_c.step(&mut comp.params, &loss.grads[ranges[1].clone()]);
            sums[0] += loss.l_jscc;
            sums[1] += loss.l_comp;
            sums[2] += loss.total;
        }
        let steps = cfg.steps_per_cycle as f64;
        let mut row = LossRow::new(cycle, "A");
        row.l_jscc = Some(sums[0] / steps);
        row.l_comp = Some(sums[1] / steps);
        row.l_total = Some(sums[2] / steps);
        report.rows.push(row);

        let fresh = fresh_records(jscc, em, &pool, cfg, &mut rng)?;
        let held = (fresh.len() / 4).max(1).min(fresh.len() - 1);
        let (fit, check) = fresh.split_at(fresh.len() - held);
        let before = proxy_tracking_error(proxy, em, check)?;
        let kept = proxy.clone();
        fit_proxy(proxy, em, fit, cfg.refresh_epochs, cfg, derive_seed(base, 2000 + cycle as u64))?;
        let mut after = proxy_tracking_error(proxy, em, check)?;
        if after > before {
            *proxy = kept;
            after = before;
        }
        report.refresh.push((before, after));
        let mut row = LossRow::new(cycle, "B");
        row.l_proxy = Some(after);
        report.rows.push(row);
        report.cycles = cycle + 1;

        let joint = validation_loss(jscc, comp, proxy, em, &val_images, cfg, val_seed)?;
        report.validation.push(joint);
        let improvement = (previous - joint) / previous.abs().max(f64::MIN_POSITIVE);
        previous = joint;
        if improvement < cfg.tolerance {
            report.converged = true;
            break;
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{glyph_images, grad_check, ModelConfig, PeriodSpec};
    use crate::phy::PhyConfig;
    use rand::Rng;

    struct Fixture {
        em: Emulator,
        jscc: ToyJscc,
        comp: Compensator,
        proxy: ProxyModel,
    }

    fn fixture() -> Fixture {
        let em = Emulator::new(&PhyConfig::default()).unwrap();
        let mc = ModelConfig::default();
        let mut comp = Compensator::new(&mc, PeriodSpec::for_link(em.waveform_map(), None).unwrap(), 2);
        let mut proxy = ProxyModel::for_link(&mc, &em, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for t in comp.params.tensors.iter_mut().chain(proxy.params.tensors.iter_mut()) {
            t.data.iter_mut().for_each(|v| *v = rng.random_range(-0.2..0.2));
        }
        Fixture {
            jscc: ToyJscc::new(&mc, 1),
            em,
            comp,
            proxy,
        }
    }

    fn batch(f: &Fixture) -> PhaseABatch {
        phase_a_batch(&f.jscc, &f.proxy, &f.em, &glyph_images(3, 8, 1), 10.0, 5).unwrap()
    }

    #[test]
    fn gradients_pass_finite_differences() {
        let f = fixture();
        let b = batch(&f);
        let (params, ranges) = joint_params(&f.jscc, &f.comp, &f.proxy);
        for gamma in [0.0, 0.5, 1.0] {
            let r = grad_check(
                &params,
                |q| {
                    let l = phase_a_loss(q, &ranges, (&f.jscc, &f.comp, &f.proxy), &f.em, &b, gamma)?;
                    Ok((l.total, l.grads))
                },
                1e-4,
            )
            .unwrap();
            assert!(r.passed, "gamma {gamma}: {r:?}");
        }
    }

    #[test]
    fn gamma_zero_is_pure_image_loss() {
        let f = fixture();
        let b = batch(&f);
        let (params, ranges) = joint_params(&f.jscc, &f.comp, &f.proxy);
        let l0 = phase_a_loss(&params, &ranges, (&f.jscc, &f.comp, &f.proxy), &f.em, &b, 0.0).unwrap();
        assert_eq!(l0.total, l0.l_jscc);
        let pure = evaluate(&params, |g, v| build(g, v, &ranges, (&f.jscc, &f.comp, &f.proxy), &f.em, &b, 0.0)[0]).unwrap();
        assert_eq!(l0.grads, pure.1);
        let l1 = phase_a_loss(&params, &ranges, (&f.jscc, &f.comp, &f.proxy), &f.em, &b, 1.0).unwrap();
        assert!((l1.total - l1.l_jscc - l1.l_comp).abs() < 1e-15);
        assert_ne!(l1.grads[ranges[1].clone()], l0.grads[ranges[1].clone()]);
    }
}
