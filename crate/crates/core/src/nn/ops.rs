use num_complex::Complex64;

use super::graph::LinearOp;
use crate::link::{Guard, WaveformMap};

/// `[re0, im0, re1, im1, ...]`.
pub fn complex_to_reals(z: &[Complex64]) -> Vec<f64> {
    z.iter().flat_map(|c| [c.re, c.im]).collect()
}

pub fn reals_to_complex(x: &[f64]) -> Vec<Complex64> {
    x.chunks_exact(2).map(|p| Complex64::new(p[0], p[1])).collect()
}

/// Symbols on the chosen bins to a waveform, as a real-linear map on
/// interleaved I/Q.
#[derive(Debug, Clone)]
pub struct SynthOp {
    map: WaveformMap,
    symbols: usize,
    guard: Guard,
}

impl SynthOp {
    pub fn new(map: WaveformMap, symbols: usize, guard: Guard) -> Self {
        SynthOp { map, symbols, guard }
    }
}

impl LinearOp for SynthOp {
    fn in_len(&self) -> usize {
        2 * self.symbols
    }

    fn out_len(&self) -> usize {
        2 * self.map.samples_for(self.symbols)
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        complex_to_reals(&self.map.synthesize(&reals_to_complex(x), self.guard))
    }

    fn adjoint(&self, y: &[f64]) -> Vec<f64> {
        let adj = self
            .map
            .synthesize_adjoint(&reals_to_complex(y), self.symbols, self.guard)
            .expect("adjoint length follows from the op shape");
        complex_to_reals(&adj)
    }
}

/// Reads the chosen bins of a waveform: the adjoint of silent synthesis.
#[derive(Debug, Clone)]
pub struct AnalyzeOp {
    map: WaveformMap,
    symbols: usize,
}

impl AnalyzeOp {
    pub fn new(map: WaveformMap, symbols: usize) -> Self {
        AnalyzeOp { map, symbols }
    }
}

impl LinearOp for AnalyzeOp {
    fn in_len(&self) -> usize {
        2 * self.map.samples_for(self.symbols)
    }

    fn out_len(&self) -> usize {
        2 * self.symbols
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let est = self
            .map
            .analyze(&reals_to_complex(x), self.symbols)
            .expect("input length follows from the op shape");
        complex_to_reals(&est)
    }

    fn adjoint(&self, y: &[f64]) -> Vec<f64> {
        complex_to_reals(&self.map.synthesize(&reals_to_complex(y), Guard::Silent))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gf2::default_subset;
    use crate::phy::PhyConfig;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dot(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    #[test]
    fn adjoint_identities() {
        let cfg = PhyConfig::default();
        let map = WaveformMap::new(&cfg, &default_subset(&cfg)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let k = 50;
        let ops: Vec<Box<dyn LinearOp>> = vec![
            Box::new(SynthOp::new(map.clone(), k, Guard::Silent)),
            Box::new(SynthOp::new(map.clone(), k, Guard::Cyclic)),
            Box::new(AnalyzeOp::new(map, k)),
        ];
        for op in ops {
            let x: Vec<f64> = (0..op.in_len()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let y: Vec<f64> = (0..op.out_len()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let lhs = dot(&op.apply(&x), &y);
            let rhs = dot(&x, &op.adjoint(&y));
            assert!((lhs - rhs).abs() < 1e-10 * lhs.abs().max(1.0));
        }
    }
}
