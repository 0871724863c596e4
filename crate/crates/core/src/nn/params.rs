use std::io::{Read, Write};

use rand::Rng;

use super::graph::{Graph, Gradients, Var};
use super::tensor::Tensor;
use crate::error::{Error, Result};

pub const PARAM_MAGIC: [u8; 8] = *b"JSCCPRM1";

/// Named parameter tensors in declaration order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamSet {
    pub names: Vec<String>,
    pub tensors: Vec<Tensor>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, t: Tensor) -> usize {
        self.names.push(name.into());
        self.tensors.push(t);
        self.tensors.len() - 1
    }

    /// Uniform in `±sqrt(6 / (fan_in + fan_out))`.
    pub fn add_glorot<R: Rng>(&mut self, name: &str, shape: &[usize], fan_in: usize, fan_out: usize, rng: &mut R) -> usize {
        let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let n = shape.iter().product();
        let data = (0..n).map(|_| rng.random_range(-a..a)).collect();
        self.add(name, Tensor::new(shape, data).unwrap())
    }

    pub fn add_zeros(&mut self, name: &str, shape: &[usize]) -> usize {
        self.add(name, Tensor::zeros(shape))
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn count(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    /// Creates graph leaves for every tensor.
    pub fn bind(&self, g: &mut Graph) -> Vec<Var> {
        self.tensors.iter().map(|t| g.input(t.clone())).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().all(Tensor::is_finite)
    }

    /// Shape summary used in architecture fingerprints.
    pub fn layout(&self) -> String {
        self.names
            .iter()
            .zip(&self.tensors)
            .map(|(n, t)| format!("{n}{:?}", t.shape))
            .collect::<Vec<_>>()
            .join(";")
    }

    /// Serializes as magic, fingerprint length (u32 LE), fingerprint bytes,
    /// value count (u64 LE), then every value as f64 LE.
    pub fn write<W: Write>(&self, mut w: W, fingerprint: &str) -> Result<()> {
        let mut buf = Vec::with_capacity(24 + fingerprint.len() + 8 * self.count());
        buf.extend_from_slice(&PARAM_MAGIC);
        buf.extend_from_slice(&(fingerprint.len() as u32).to_le_bytes());
        buf.extend_from_slice(fingerprint.as_bytes());
        buf.extend_from_slice(&(self.count() as u64).to_le_bytes());
        for t in &self.tensors {
            for v in &t.data {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
        w.write_all(&buf)?;
        Ok(())
    }

    /// Loads values into this (already shaped) set, checking the fingerprint.
    pub fn read_into<R: Read>(&mut self, mut r: R, fingerprint: &str) -> Result<()> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        let bad = |m: &str| Error::Format(format!("parameter file: {m}"));
        if bytes.len() < 12 || bytes[..8] != PARAM_MAGIC {
            return Err(bad("bad magic"));
        }
        let flen = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let rest = &bytes[12..];
        if rest.len() < flen + 8 {
            return Err(bad("truncated header"));
        }
        let found = std::str::from_utf8(&rest[..flen]).map_err(|_| bad("fingerprint not UTF-8"))?;
        if found != fingerprint {
            return Err(bad(&format!("architecture mismatch: file has {found:?}, expected {fingerprint:?}")));
        }
        let count = u64::from_le_bytes(rest[flen..flen + 8].try_into().unwrap()) as usize;
        let body = &rest[flen + 8..];
        if count != self.count() || body.len() != 8 * count {
            return Err(bad("value count mismatch"));
        }
        let mut vals = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap()));
        for t in &mut self.tensors {
            for v in &mut t.data {
                *v = vals.next().unwrap();
            }
        }
        Ok(())
    }
}

/// Collects the gradients of bound parameters.
pub fn param_grads(grads: &Gradients, vars: &[Var]) -> Vec<Vec<f64>> {
    vars.iter().map(|&v| grads.get(v)).collect()
}

/// Stochastic gradient descent with heavy-ball momentum.
#[derive(Debug, Clone, PartialEq)]
pub struct Sgd {
    pub lr: f64,
    pub momentum: f64,
    velocity: Vec<Vec<f64>>,
}

impl Sgd {
    pub fn new(lr: f64, momentum: f64) -> Self {
        Sgd {
            lr,
            momentum,
            velocity: Vec::new(),
        }
    }

    pub fn step(&mut self, params: &mut ParamSet, grads: &[Vec<f64>]) {
        assert_eq!(grads.len(), params.len(), "one gradient per parameter tensor");
        if self.velocity.is_empty() {
            self.velocity = params.tensors.iter().map(|t| vec![0.0; t.len()]).collect();
        }
        for ((t, g), v) in params.tensors.iter_mut().zip(grads).zip(&mut self.velocity) {
            for ((p, &gi), vi) in t.data.iter_mut().zip(g).zip(v.iter_mut()) {
                *vi = self.momentum * *vi - self.lr * gi;
                *p += *vi;
            }
        }
    }
}
