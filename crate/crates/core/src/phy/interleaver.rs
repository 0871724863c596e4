use crate::error::{Error, Result};

/// Two-permutation block interleaver over one OFDM symbol of coded bits.
#[derive(Debug, Clone)]
pub struct Interleaver {
    /// `perm[k]` is the output position of input bit `k`.
    perm: Vec<usize>,
    inverse: Vec<usize>,
}

impl Interleaver {
    pub fn new(n_cbps: usize, n_bpsc: usize) -> Result<Self> {
        if n_cbps == 0 || n_cbps % 16 != 0 {
            return Err(Error::framing(format!(
                "interleaver block {n_cbps} is not a positive multiple of 16"
            )));
        }
        let s = (n_bpsc / 2).max(1);
        let perm: Vec<usize> = (0..n_cbps)
            .map(|k| {
                let i = (n_cbps / 16) * (k % 16) + k / 16;
                s * (i / s) + (i + n_cbps - (16 * i / n_cbps)) % s
            })
            .collect();
        let mut inverse = vec![0; n_cbps];
        for (k, &j) in perm.iter().enumerate() {
            inverse[j] = k;
        }
        Ok(Interleaver { perm, inverse })
    }

    pub fn block_len(&self) -> usize {
        self.perm.len()
    }

    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    pub fn interleave<T: Copy + Default>(&self, input: &[T]) -> Result<Vec<T>> {
        self.check(input.len())?;
        let mut out = vec![T::default(); input.len()];
        for (k, &j) in self.perm.iter().enumerate() {
            out[j] = input[k];
        }
        Ok(out)
    }

    pub fn deinterleave<T: Copy + Default>(&self, input: &[T]) -> Result<Vec<T>> {
        self.check(input.len())?;
        let mut out = vec![T::default(); input.len()];
        for (j, &k) in self.inverse.iter().enumerate() {
            out[k] = input[j];
        }
        Ok(out)
    }

    fn check(&self, len: usize) -> Result<()> {
        if len != self.perm.len() {
            return Err(Error::framing(format!(
                "interleaver expects {} bits, got {len}",
                self.perm.len()
            )));
        }
        Ok(())
    }
}

pub fn interleave(bits: &[u8], n_cbps: usize, n_bpsc: usize) -> Result<Vec<u8>> {
    Interleaver::new(n_cbps, n_bpsc)?.interleave(bits)
}

pub fn deinterleave(bits: &[u8], n_cbps: usize, n_bpsc: usize) -> Result<Vec<u8>> {
    Interleaver::new(n_cbps, n_bpsc)?.deinterleave(bits)
}
