use super::codec::{link_image_mse, pretrain_codec_awgn};
use super::stage1::{stage1_train_compensator, StageReport};
use super::stage2::{proxy_dataset, stage2_train_proxy, ProxyFit};
use super::stage3::{stage3_alternate, Stage3Report};
use super::{derive_seed, SnrPolicy, TrainConfig};
use crate::error::Result;
use crate::link::{Emulator, RecoveryMode};
use crate::nn::{Compensator, ModelConfig, PeriodSpec, ProxyModel, ToyJscc};

const TAG_INIT_JSCC: u64 = 10;
const TAG_INIT_COMP: u64 = 11;
const TAG_INIT_PROXY: u64 = 12;

/// Freshly initialized models for a training run.
pub fn init_models(em: &Emulator, cfg: &TrainConfig, mc: &ModelConfig) -> Result<(ToyJscc, Compensator, ProxyModel)> {
    mc.validate()?;
    let periods = PeriodSpec::for_link(em.waveform_map(), mc.period_j)?;
    Ok((
        ToyJscc::new(mc, derive_seed(cfg.seed, TAG_INIT_JSCC)),
        Compensator::new(mc, periods, derive_seed(cfg.seed, TAG_INIT_COMP)),
        ProxyModel::for_link(mc, em, derive_seed(cfg.seed, TAG_INIT_PROXY)),
    ))
}

/// Every model a full run produces. `jscc_awgn` and `comp_stage1` are the
/// stage-0 system (codec trained on the analog channel only, compensator
/// after stage 1); `jscc` and `comp` are the jointly trained ones.
#[derive(Debug, Clone)]
pub struct PipelineModels {
    pub jscc_awgn: ToyJscc,
    pub comp_stage1: Compensator,
    pub jscc: ToyJscc,
    pub comp: Compensator,
    pub proxy: ProxyModel,
}

#[derive(Debug, Clone)]
pub struct PipelineReport {
    pub codec: StageReport,
    pub stage1: StageReport,
    pub stage2: ProxyFit,
    pub stage3: Stage3Report,
}

/// Codec pretraining on the analog channel, then stages 1, 2 and 3.
pub fn run_pipeline(em: &Emulator, cfg: &TrainConfig, mc: &ModelConfig) -> Result<(PipelineModels, PipelineReport)> {
    cfg.validate()?;
    let (mut jscc, mut comp, mut proxy) = init_models(em, cfg, mc)?;
    let codec = pretrain_codec_awgn(&mut jscc, cfg)?;
    let stage1 = stage1_train_compensator(em, &mut comp, cfg)?;
    let records = proxy_dataset(em, cfg, Some(&jscc), cfg.proxy_records, 0)?;
    let stage2 = stage2_train_proxy(&records, em, &mut proxy, cfg)?;
    let (jscc_awgn, comp_stage1) = (jscc.clone(), comp.clone());
    let stage3 = stage3_alternate(&mut jscc, &mut comp, &mut proxy, em, cfg)?;
    Ok((
        PipelineModels {
            jscc_awgn,
            comp_stage1,
            jscc,
            comp,
            proxy,
        },
        PipelineReport {
            codec,
            stage1,
            stage2,
            stage3,
        },
    ))
}

/// Image MSE through the real link at one SNR for the three systems.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemComparison {
    pub snr_db: f64,
    /// Jointly trained codec and compensator, soft recovery.
    pub stage3: f64,
    /// Analog-trained codec with the stage-1 compensator, soft recovery.
    pub stage0: f64,
    /// Analog-trained codec, hard recovery, no compensator.
    pub zero_shot: f64,
}

impl SystemComparison {
    pub fn stage3_wins(&self) -> bool {
        self.stage3 < self.stage0 && self.stage3 < self.zero_shot
    }
}

pub fn compare_systems(
    em: &Emulator,
    models: &PipelineModels,
    images: &[Vec<f64>],
    snr_db: f64,
    seed: u64,
) -> Result<SystemComparison> {
    Ok(SystemComparison {
        snr_db,
        stage3: link_image_mse(&models.jscc, Some(&models.comp), em, images, snr_db, seed, RecoveryMode::Soft)?,
        stage0: link_image_mse(
            &models.jscc_awgn,
            Some(&models.comp_stage1),
            em,
            images,
            snr_db,
            seed,
            RecoveryMode::Soft,
        )?,
        zero_shot: link_image_mse(&models.jscc_awgn, None, em, images, snr_db, seed, RecoveryMode::Hard)?,
    })
}

/// One point of [`per_snr_study`].
#[derive(Debug, Clone)]
pub struct SnrStudyPoint {
    pub comparison: SystemComparison,
    pub report: PipelineReport,
}

/// Runs the whole pipeline once per SNR with every stage trained at that
/// SNR, and compares the three systems at the same point.
pub fn per_snr_study(
    em: &Emulator,
    cfg: &TrainConfig,
    mc: &ModelConfig,
    snrs: &[f64],
    images: &[Vec<f64>],
    seed: u64,
) -> Result<Vec<SnrStudyPoint>> {
    snrs.iter()
        .enumerate()
        .map(|(i, &snr)| {
            let mut c = cfg.clone();
            c.curriculum.snr = SnrPolicy::Fixed(snr);
            let (models, report) = run_pipeline(em, &c, mc)?;
            Ok(SnrStudyPoint {
                comparison: compare_systems(em, &models, images, snr, derive_seed(seed, i as u64))?,
                report,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::glyph_images;
    use crate::phy::PhyConfig;

    fn small() -> TrainConfig {
        TrainConfig {
            comp_epochs: 2,
            comp_waveforms: 4,
            proxy_epochs: 2,
            proxy_records: 4,
            jscc_epochs: 2,
            train_images: 32,
            steps_per_cycle: 3,
            max_cycles: 2,
            refresh_batch_count: 2,
            refresh_epochs: 1,
            batch_size: 8,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn pipeline_is_deterministic() {
        let em = Emulator::new(&PhyConfig::default()).unwrap();
        let mc = ModelConfig::default();
        let (a, ra) = run_pipeline(&em, &small(), &mc).unwrap();
        let (b, rb) = run_pipeline(&em, &small(), &mc).unwrap();
        assert_eq!(a.jscc.params, b.jscc.params);
        assert_eq!(a.comp.params, b.comp.params);
        assert_eq!(a.proxy.params, b.proxy.params);
        assert_eq!(ra.stage3, rb.stage3);
        assert_eq!(ra.stage1.trace.len(), 2);
        let imgs = glyph_images(8, 8, 3);
        let ca = compare_systems(&em, &a, &imgs, 10.0, 1).unwrap();
        assert_eq!(ca, compare_systems(&em, &b, &imgs, 10.0, 1).unwrap());
        assert!(ca.stage3.is_finite() && ca.stage0.is_finite() && ca.zero_shot.is_finite());
    }
}
