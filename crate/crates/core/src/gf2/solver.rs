use super::matrix::{Gf2Matrix, Gf2Vector};
use crate::error::Error;

/// The target has no preimage: after reduction, row `row` reads `0 = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Unsolvable {
    pub row: usize,
}

impl From<Unsolvable> for Error {
    fn from(u: Unsolvable) -> Self {
        Error::Unsolvable { row: u.row }
    }
}

/// Reduced row-echelon form of a matrix together with the row transform
/// `E` that produced it, so that many right-hand sides can be solved
/// against one elimination.
#[derive(Debug, Clone)]
pub struct Factorization {
    matrix: Gf2Matrix,
    transform: Gf2Matrix,
    pivot_cols: Vec<usize>,
}

impl Factorization {
    /// Gauss-Jordan elimination on `[A | I]`.
    pub fn new(a: &Gf2Matrix) -> Self {
        let rows = a.rows();
        let cols = a.cols();
        let aw = cols.div_ceil(64);
        let ew = rows.div_ceil(64);
        let stride = aw + ew;
        let mut aug = vec![0u64; rows * stride];
        for r in 0..rows {
            aug[r * stride..r * stride + aw].copy_from_slice(a.row_words(r));
            aug[r * stride + aw + r / 64] |= 1 << (r % 64);
        }

        let mut pivot_cols = Vec::new();
        let mut r = 0;
        for c in 0..cols {
            if r == rows {
                break;
            }
            let (word, bit) = (c / 64, 1u64 << (c % 64));
            let Some(p) = (r..rows).find(|&i| aug[i * stride + word] & bit != 0) else {
                continue;
            };
            if p != r {
                for k in 0..stride {
                    aug.swap(p * stride + k, r * stride + k);
                }
            }
            let (before, rest) = aug.split_at_mut(r * stride);
            let (pivot, after) = rest.split_at_mut(stride);
            for row in before.chunks_exact_mut(stride).chain(after.chunks_exact_mut(stride)) {
                if row[word] & bit != 0 {
                    // Words left of the pivot column are already zero in the pivot row.
                    for k in word..stride {
                        row[k] ^= pivot[k];
                    }
                }
            }
            pivot_cols.push(c);
            r += 1;
        }

        let mut transform = Gf2Matrix::zeros(rows, rows);
        for i in 0..rows {
            for j in 0..rows {
                if aug[i * stride + aw + j / 64] >> (j % 64) & 1 == 1 {
                    transform.set(i, j, true);
                }
            }
        }
        Factorization {
            matrix: a.clone(),
            transform,
            pivot_cols,
        }
    }

    pub fn rank(&self) -> usize {
        self.pivot_cols.len()
    }

    pub fn rows(&self) -> usize {
        self.matrix.rows()
    }

    pub fn cols(&self) -> usize {
        self.matrix.cols()
    }

    pub fn matrix(&self) -> &Gf2Matrix {
        &self.matrix
    }

    pub fn pivot_cols(&self) -> &[usize] {
        &self.pivot_cols
    }

    /// Some `x` with `A·x = y`, free variables zero.
    ///
    /// # Panics
    /// If `y.len()` differs from the number of rows.
    pub fn solve(&self, y: &Gf2Vector) -> Result<Gf2Vector, Unsolvable> {
        assert_eq!(y.len(), self.rows(), "target length must equal row count");
        let reduced = self.transform.mul_vec(y);
        if let Some(row) = (self.rank()..self.rows()).find(|&r| reduced.get(r)) {
            return Err(Unsolvable { row });
        }
        let mut x = Gf2Vector::zeros(self.cols());
        for (r, &c) in self.pivot_cols.iter().enumerate() {
            if reduced.get(r) {
                x.set(c, true);
            }
        }
        debug_assert_eq!(&self.matrix.mul_vec(&x), y, "solver produced a non-solution");
        Ok(x)
    }
}

pub fn rank(m: &Gf2Matrix) -> usize {
    let rows = m.rows();
    let stride = m.cols().div_ceil(64);
    let mut data: Vec<u64> = (0..rows).flat_map(|r| m.row_words(r).to_vec()).collect();
    let mut r = 0;
    for c in 0..m.cols() {
        if r == rows {
            break;
        }
        let (word, bit) = (c / 64, 1u64 << (c % 64));
        let Some(p) = (r..rows).find(|&i| data[i * stride + word] & bit != 0) else {
            continue;
        };
        for k in 0..stride {
            data.swap(p * stride + k, r * stride + k);
        }
        for i in r + 1..rows {
            if data[i * stride + word] & bit != 0 {
                for k in word..stride {
                    data[i * stride + k] ^= data[r * stride + k];
                }
            }
        }
        r += 1;
    }
    r
}

/// One-shot solve; use [`Factorization`] to reuse the elimination.
pub fn solve(a: &Gf2Matrix, y: &Gf2Vector) -> Result<Gf2Vector, Unsolvable> {
    Factorization::new(a).solve(y)
}
