use std::fmt;

use crate::error::{Error, Result};

const W: usize = 64;

fn words_for(bits: usize) -> usize {
    bits.div_ceil(W)
}

/// Bit vector over GF(2), packed little-endian into `u64` words.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Gf2Vector {
    len: usize,
    words: Vec<u64>,
}

impl Gf2Vector {
    pub fn zeros(len: usize) -> Self {
        Gf2Vector {
            len,
            words: vec![0; words_for(len)],
        }
    }

    pub fn from_bits(bits: &[u8]) -> Self {
        let mut v = Self::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            if b & 1 == 1 {
                v.words[i / W] |= 1 << (i % W);
            }
        }
        v
    }

    pub fn to_bits(&self) -> Vec<u8> {
        (0..self.len).map(|i| self.get(i) as u8).collect()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit {i} out of range {}", self.len);
        self.words[i / W] >> (i % W) & 1 == 1
    }

    pub fn set(&mut self, i: usize, value: bool) {
        assert!(i < self.len, "bit {i} out of range {}", self.len);
        let mask = 1u64 << (i % W);
        if value {
            self.words[i / W] |= mask;
        } else {
            self.words[i / W] &= !mask;
        }
    }

    pub fn flip(&mut self, i: usize) {
        assert!(i < self.len, "bit {i} out of range {}", self.len);
        self.words[i / W] ^= 1 << (i % W);
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn xor_assign(&mut self, other: &Gf2Vector) {
        assert_eq!(self.len, other.len, "vector length mismatch");
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a ^= b;
        }
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// The sub-vector at the given positions, in the given order.
    pub fn select(&self, positions: &[usize]) -> Gf2Vector {
        let mut out = Gf2Vector::zeros(positions.len());
        for (j, &p) in positions.iter().enumerate() {
            if self.get(p) {
                out.words[j / W] |= 1 << (j % W);
            }
        }
        out
    }
}

impl fmt::Debug for Gf2Vector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: String = (0..self.len).map(|i| if self.get(i) { '1' } else { '0' }).collect();
        write!(f, "Gf2Vector({s})")
    }
}

/// Dense GF(2) matrix stored as bit-packed rows.
#[derive(Clone, PartialEq, Eq)]
pub struct Gf2Matrix {
    rows: usize,
    cols: usize,
    stride: usize,
    data: Vec<u64>,
}

impl Gf2Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        let stride = words_for(cols);
        Gf2Matrix {
            rows,
            cols,
            stride,
            data: vec![0; rows * stride],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, true);
        }
        m
    }

    pub fn from_rows(rows: &[Gf2Vector]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        let mut m = Self::zeros(rows.len(), cols);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != cols {
                return Err(Error::Shape(format!(
                    "row {i} has {} bits, expected {cols}",
                    r.len()
                )));
            }
            m.row_words_mut(i).copy_from_slice(&r.words);
        }
        Ok(m)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> bool {
        assert!(r < self.rows && c < self.cols);
        self.data[r * self.stride + c / W] >> (c % W) & 1 == 1
    }

    pub fn set(&mut self, r: usize, c: usize, value: bool) {
        assert!(r < self.rows && c < self.cols);
        let mask = 1u64 << (c % W);
        let w = &mut self.data[r * self.stride + c / W];
        if value {
            *w |= mask;
        } else {
            *w &= !mask;
        }
    }

    pub fn flip(&mut self, r: usize, c: usize) {
        assert!(r < self.rows && c < self.cols);
        self.data[r * self.stride + c / W] ^= 1 << (c % W);
    }

    pub fn row_words(&self, r: usize) -> &[u64] {
        &self.data[r * self.stride..(r + 1) * self.stride]
    }

    fn row_words_mut(&mut self, r: usize) -> &mut [u64] {
        &mut self.data[r * self.stride..(r + 1) * self.stride]
    }

    pub fn row(&self, r: usize) -> Gf2Vector {
        Gf2Vector {
            len: self.cols,
            words: self.row_words(r).to_vec(),
        }
    }

    /// Rows at the given indices, in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> Gf2Matrix {
        let mut out = Gf2Matrix::zeros(indices.len(), self.cols);
        for (j, &i) in indices.iter().enumerate() {
            out.row_words_mut(j).copy_from_slice(self.row_words(i));
        }
        out
    }

    pub fn mul_vec(&self, x: &Gf2Vector) -> Gf2Vector {
        assert_eq!(x.len, self.cols, "matrix/vector shape mismatch");
        let mut y = Gf2Vector::zeros(self.rows);
        for r in 0..self.rows {
            let acc = self
                .row_words(r)
                .iter()
                .zip(&x.words)
                .fold(0u64, |a, (m, v)| a ^ (m & v));
            if acc.count_ones() & 1 == 1 {
                y.words[r / W] |= 1 << (r % W);
            }
        }
        y
    }

    /// One line per row, `'0'`/`'1'` per column, each line newline-terminated.
    pub fn to_text(&self) -> String {
        let mut s = String::with_capacity(self.rows * (self.cols + 1));
        for r in 0..self.rows {
            for c in 0..self.cols {
                s.push(if self.get(r, c) { '1' } else { '0' });
            }
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let lines: Vec<&str> = text.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
        let cols = lines.first().map_or(0, |l| l.len());
        let mut m = Gf2Matrix::zeros(lines.len(), cols);
        for (r, line) in lines.iter().enumerate() {
            if line.len() != cols {
                return Err(Error::Format(format!(
                    "matrix row {r} has {} columns, expected {cols}",
                    line.len()
                )));
            }
            for (c, ch) in line.chars().enumerate() {
                match ch {
                    '0' => {}
                    '1' => m.set(r, c, true),
                    other => {
                        return Err(Error::Format(format!(
                            "unexpected character {other:?} in matrix row {r}"
                        )))
                    }
                }
            }
        }
        Ok(m)
    }
}

impl fmt::Debug for Gf2Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Gf2Matrix {}x{}", self.rows, self.cols)?;
        f.write_str(&self.to_text())
    }
}
