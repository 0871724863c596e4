use std::io::{Read, Write};
use std::rc::Rc;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::graph::{Graph, Var, ZERO};
use super::layers::ConvStack;
use super::ops::{complex_to_reals, reals_to_complex};
use super::params::ParamSet;
use super::reshape::{rows_for, unfold_index};
use super::tensor::Tensor;
use super::{widths, ModelConfig};
use crate::error::{Error, Result};
use crate::link::{WaveformCompensator, WaveformMap};

/// The two folding periods of the compensator, in samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PeriodSpec {
    /// Samples per OFDM symbol, guard included.
    pub period_o: usize,
    /// Samples per JSCC symbol.
    pub period_j: usize,
}

impl PeriodSpec {
    pub fn new(period_o: usize, period_j: usize) -> Result<Self> {
        if period_o == 0 || period_j == 0 {
            return Err(Error::config("periods must be at least 1"));
        }
        Ok(PeriodSpec { period_o, period_j })
    }

    /// `period_j` defaults to the average sample share of one symbol,
    /// `round(samples_per_ofdm / N′)`, at least 1.
    pub fn for_link(map: &WaveformMap, period_j: Option<usize>) -> Result<Self> {
        let o = map.samples_per_ofdm();
        let j = period_j.unwrap_or_else(|| ((o as f64 / map.n_prime() as f64).round() as usize).max(1));
        PeriodSpec::new(o, j)
    }

    pub fn periods(&self) -> [usize; 2] {
        [self.period_o, self.period_j]
    }
}

/// Shared 2D convolution stack applied to the waveform folded at each
/// period; branch outputs are unfolded, truncated and summed.
#[derive(Debug, Clone, PartialEq)]
pub struct Compensator {
    pub params: ParamSet,
    stack: ConvStack,
    periods: PeriodSpec,
    residual: bool,
    fingerprint: String,
}

/// Folds `[I, Q]` interleaved samples (first `2n` entries) followed by
/// the guard mask (next `n`) into channel-major `[3, rows, period]`.
fn fold_with_mask(n: usize, period: usize) -> (Rc<[usize]>, [usize; 3]) {
    let rows = rows_for(n, period);
    let plane = rows * period;
    let mut idx = Vec::with_capacity(3 * plane);
    for ch in 0..3 {
        for t in 0..plane {
            idx.push(match (t < n, ch) {
                (false, _) => ZERO,
                (true, 2) => 2 * n + t,
                (true, c) => 2 * t + c,
            });
        }
    }
    (idx.into(), [3, rows, period])
}

impl Compensator {
    pub fn new(cfg: &ModelConfig, periods: PeriodSpec, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamSet::new();
        let k = cfg.comp_kernel;
        let stack = ConvStack::new(
            &mut params,
            "comp",
            &widths(3, cfg.comp_channels, cfg.comp_layers, 2),
            (k, k),
            cfg.activation,
            true,
            &mut rng,
        );
        let fingerprint = format!(
            "comp-c{}-l{}-k{}-{}-res{}-o{}-j{}",
            cfg.comp_channels,
            cfg.comp_layers,
            k,
            cfg.act_name(),
            u8::from(cfg.comp_residual),
            periods.period_o,
            periods.period_j
        );
        Compensator {
            params,
            stack,
            periods,
            residual: cfg.comp_residual,
            fingerprint,
        }
    }

    pub fn periods(&self) -> PeriodSpec {
        self.periods
    }

    pub fn residual(&self) -> bool {
        self.residual
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    /// `x` holds `n` samples as `[n, 2]`; `mask` has `n` entries.
    pub fn forward(&self, g: &mut Graph, p: &[Var], x: Var, mask: &[f64]) -> Var {
        let n = mask.len();
        assert_eq!(g.value(x).len(), 2 * n, "waveform and mask lengths differ");
        let m = g.input(Tensor::vector(mask.to_vec()));
        let xm = g.concat(&[x, m]);
        let mut sum: Option<Var> = None;
        for period in self.periods.periods() {
            let (fold, shape) = fold_with_mask(n, period);
            let folded = g.gather(xm, fold, &shape);
            let y = self.stack.forward(g, p, folded);
            let back = g.gather(y, unfold_index(n, 2, period), &[n, 2]);
            sum = Some(match sum {
                Some(s) => g.add(s, back),
                None => back,
            });
        }
        let out = sum.expect("two branches");
        if self.residual {
            let x2 = g.reshape(x, &[n, 2]);
            g.add(out, x2)
        } else {
            out
        }
    }

    pub fn apply(&self, waveform: &[Complex64], mask: &[f64]) -> Result<Vec<Complex64>> {
        if waveform.len() != mask.len() || waveform.is_empty() {
            return Err(Error::Shape(format!(
                "waveform of {} samples with mask of {}",
                waveform.len(),
                mask.len()
            )));
        }
        let mut g = Graph::new();
        let p = self.params.bind(&mut g);
        let x = g.input(Tensor::new(&[waveform.len(), 2], complex_to_reals(waveform))?);
        let y = self.forward(&mut g, &p, x, mask);
        Ok(reals_to_complex(&g.value(y).data))
    }

    pub fn save<W: Write>(&self, w: W) -> Result<()> {
        self.params.write(w, &self.fingerprint)
    }

    pub fn load<R: Read>(&mut self, r: R) -> Result<()> {
        self.params.read_into(r, &self.fingerprint)
    }
}

impl WaveformCompensator for Compensator {
    fn compensate(&self, waveform: &[Complex64], mask: &[f64]) -> Result<Vec<Complex64>> {
        self.apply(waveform, mask)
    }
}
