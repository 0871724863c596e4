use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::matrix::{Gf2Matrix, Gf2Vector};
use super::solver::rank;
use crate::error::{Error, Result};
use crate::phy::{puncture, ConvEncoder, ConvState, Interleaver, PhyConfig, STANDARD_GENERATORS};

/// Linear model of one OFDM symbol of the coded transmitter.
///
/// For scrambled input bits `x` (β of them) entering the encoder in state
/// `s`, the interleaved coded bits are `C·x ⊕ state_offset(s)`. Row `q`
/// of `C` is interleaved bit `q`, which lands on data position
/// `q / n_bpsc` as label bit `q % n_bpsc` (MSB first).
#[derive(Debug, Clone)]
pub struct SymbolSystem {
    matrix: Gf2Matrix,
    state_map: Vec<Gf2Vector>,
    row_index: Vec<usize>,
    data_subcarriers: Vec<i32>,
    n_bpsc: usize,
}

/// Builds the system for the standard 133/171 code.
pub fn build_symbol_system(cfg: &PhyConfig) -> Result<SymbolSystem> {
    SymbolSystem::build(cfg)
}

impl SymbolSystem {
    pub fn build(cfg: &PhyConfig) -> Result<Self> {
        cfg.validate()?;
        let beta = cfg.n_dbps();
        let alpha = cfg.n_cbps();
        let n_bpsc = cfg.n_bpsc();
        let kept = puncture::kept_positions(cfg.code_rate, 2 * beta);
        debug_assert_eq!(kept.len(), alpha);
        let interleaver = Interleaver::new(alpha, n_bpsc)?;
        let perm = interleaver.permutation();

        // Mother bit 2i+b is the parity of g_b over (x_i, x_{i-1}, ..., x_{i-6});
        // tap t of g_b is bit 6-t. Inputs before the symbol come from the state,
        // where x_{-j} is state bit 6-j.
        let mut matrix = Gf2Matrix::zeros(alpha, beta);
        let mut state_basis = vec![Gf2Vector::zeros(alpha); 6];
        for (k, &m) in kept.iter().enumerate() {
            let row = perm[k];
            let (i, b) = (m / 2, m % 2);
            let g = STANDARD_GENERATORS[b];
            for t in 0..7 {
                if g >> (6 - t) & 1 == 0 {
                    continue;
                }
                if i >= t {
                    matrix.flip(row, i - t);
                } else {
                    state_basis[6 - (t - i)].flip(row);
                }
            }
        }
        let state_map = (0..64u8)
            .map(|s| {
                let mut v = Gf2Vector::zeros(alpha);
                for (bit, basis) in state_basis.iter().enumerate() {
                    if s >> bit & 1 == 1 {
                        v.xor_assign(basis);
                    }
                }
                v
            })
            .collect();
        Ok(SymbolSystem {
            matrix,
            state_map,
            row_index: (0..alpha).collect(),
            data_subcarriers: cfg.subcarriers.data.clone(),
            n_bpsc,
        })
    }

    /// Number of coded bits per symbol (rows of `C`).
    pub fn alpha(&self) -> usize {
        self.matrix.rows()
    }

    /// Number of input bits per symbol (columns of `C`).
    pub fn beta(&self) -> usize {
        self.matrix.cols()
    }

    pub fn n_data(&self) -> usize {
        self.data_subcarriers.len()
    }

    pub fn n_bpsc(&self) -> usize {
        self.n_bpsc
    }

    pub fn matrix(&self) -> &Gf2Matrix {
        &self.matrix
    }

    pub fn data_subcarriers(&self) -> &[i32] {
        &self.data_subcarriers
    }

    pub fn state_offset(&self, state: ConvState) -> &Gf2Vector {
        &self.state_map[state.value() as usize]
    }

    /// Row of `C` holding label bit `bit` of data position `pos`.
    pub fn row_index_of(&self, pos: usize, bit: usize) -> usize {
        assert!(bit < self.n_bpsc, "label bit {bit} out of range");
        self.row_index[pos * self.n_bpsc + bit]
    }

    pub fn data_position(&self, subcarrier: i32) -> Option<usize> {
        self.data_subcarriers.iter().position(|&k| k == subcarrier)
    }

    /// Row indices of the chosen subcarriers in (subcarrier, bit) order.
    pub fn rows_for(&self, chosen: &[i32]) -> Result<Vec<usize>> {
        let mut seen = vec![false; self.n_data()];
        let mut rows = Vec::with_capacity(chosen.len() * self.n_bpsc);
        for &k in chosen {
            let pos = self.data_position(k).ok_or_else(|| {
                Error::Selection(format!("subcarrier {k} is not a data subcarrier"))
            })?;
            if std::mem::replace(&mut seen[pos], true) {
                return Err(Error::Selection(format!("subcarrier {k} chosen twice")));
            }
            rows.extend((0..self.n_bpsc).map(|b| self.row_index_of(pos, b)));
        }
        Ok(rows)
    }

    /// Interleaved coded bits predicted by the model.
    pub fn coded_bits(&self, x: &Gf2Vector, state: ConvState) -> Gf2Vector {
        let mut y = self.matrix.mul_vec(x);
        y.xor_assign(self.state_offset(state));
        y
    }

    /// Compares the model with the bit pipeline of `cfg` on random
    /// (input, state) probes; returns the number of disagreeing probes.
    pub fn probe_mismatches(&self, cfg: &PhyConfig, probes: usize, seed: u64) -> Result<usize> {
        let encoder = ConvEncoder::new(cfg.generators);
        let interleaver = Interleaver::new(cfg.n_cbps(), cfg.n_bpsc())?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut mismatches = 0;
        for _ in 0..probes {
            let x: Vec<u8> = (0..self.beta()).map(|_| rng.random_range(0..2)).collect();
            let state = ConvState::new(rng.random_range(0..64)).unwrap();
            let (mother, _) = encoder.encode(&x, state);
            let coded = interleaver.interleave(&puncture::puncture(&mother, cfg.code_rate)?)?;
            if self.coded_bits(&Gf2Vector::from_bits(&x), state) != Gf2Vector::from_bits(&coded) {
                mismatches += 1;
            }
        }
        Ok(mismatches)
    }
}

/// `C′`: the rows of `C` belonging to the chosen subcarriers.
pub fn restrict_rows(sys: &SymbolSystem, chosen: &[i32]) -> Result<Gf2Matrix> {
    Ok(sys.matrix.select_rows(&sys.rows_for(chosen)?))
}

/// Largest N′ with N′·log2(M) ≤ β, i.e. ⌊R·N⌋.
pub fn max_usable_subcarriers(cfg: &PhyConfig) -> usize {
    cfg.n_data() * cfg.code_rate.numerator() / cfg.code_rate.denominator()
}

fn by_distance_to_dc(subcarriers: &[i32]) -> Vec<i32> {
    let mut v = subcarriers.to_vec();
    v.sort_by_key(|&k| (k.abs(), k));
    v
}

/// The ⌊R·N⌋ data subcarriers closest to DC, in data-position order.
pub fn default_subset(cfg: &PhyConfig) -> Vec<i32> {
    let mut chosen: Vec<i32> = by_distance_to_dc(&cfg.subcarriers.data)
        .into_iter()
        .take(max_usable_subcarriers(cfg))
        .collect();
    sort_by_position(&cfg.subcarriers.data, &mut chosen);
    chosen
}

fn sort_by_position(data: &[i32], chosen: &mut [i32]) {
    chosen.sort_by_key(|k| data.iter().position(|d| d == k));
}

/// A subset whose restricted matrix was verified to have full row rank.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubsetCertificate {
    pub chosen: Vec<i32>,
    pub rank: usize,
    /// Subcarriers of the candidate that had to be dropped.
    pub removed: Vec<i32>,
    /// Replacements taken from the unused data subcarriers.
    pub added: Vec<i32>,
}

const REPAIR_SEED: u64 = 0x5eed;
const REPAIR_STEPS: usize = 100_000;

/// Checks that `C′` has full row rank for `candidate`. If not, repairs the
/// subset with a seeded random walk over single swaps (chosen ↔ unused)
/// that accepts every swap not lowering the rank, so flat stretches of the
/// rank landscape can be crossed. The result depends only on the inputs.
pub fn certify_subset(sys: &SymbolSystem, candidate: &[i32]) -> Result<SubsetCertificate> {
    let rows_needed = candidate.len() * sys.n_bpsc();
    if rows_needed > sys.beta() {
        return Err(Error::Selection(format!(
            "{} subcarriers need {rows_needed} independent rows but only {} input bits exist",
            candidate.len(),
            sys.beta()
        )));
    }
    let mut chosen = candidate.to_vec();
    let mut current = rank(&restrict_rows(sys, &chosen)?);
    let mut rng = ChaCha8Rng::seed_from_u64(REPAIR_SEED);
    let mut steps = 0;
    while current < rows_needed {
        let unused: Vec<i32> = sys
            .data_subcarriers()
            .iter()
            .copied()
            .filter(|k| !chosen.contains(k))
            .collect();
        if unused.is_empty() || steps == REPAIR_STEPS {
            return Err(Error::Selection(format!(
                "could not reach full row rank: best {current} of {rows_needed}"
            )));
        }
        steps += 1;
        let mut trial = chosen.clone();
        trial[rng.random_range(0..chosen.len())] = unused[rng.random_range(0..unused.len())];
        let r = rank(&restrict_rows(sys, &trial)?);
        if r >= current {
            chosen = trial;
            current = r;
        }
    }
    sort_by_position(sys.data_subcarriers(), &mut chosen);
    Ok(SubsetCertificate {
        removed: candidate.iter().copied().filter(|k| !chosen.contains(k)).collect(),
        added: chosen.iter().copied().filter(|k| !candidate.contains(k)).collect(),
        chosen,
        rank: current,
    })
}
