//! Periodic folding of a waveform into a 2D grid so that samples one period
//! apart become vertical neighbours.

use std::rc::Rc;

use super::graph::ZERO;
use super::tensor::Tensor;

/// Rows needed to hold `n` samples at `period` samples per row.
pub fn rows_for(n: usize, period: usize) -> usize {
    assert!(period >= 1, "period must be at least 1");
    n.div_ceil(period).max(1)
}

/// Zero-pads an `[n, c]` waveform to whole periods and folds it into
/// `[rows, period, c]`.
pub fn reshape_period(w: &Tensor, period: usize) -> Tensor {
    let (n, c) = (w.shape[0], w.shape[1]);
    let rows = rows_for(n, period);
    let mut data = w.data.clone();
    data.resize(rows * period * c, 0.0);
    Tensor {
        shape: vec![rows, period, c],
        data,
    }
}

/// Unfolds `[rows, period, c]` and truncates to `n` samples.
pub fn inverse_reshape_trunc(t: &Tensor, n: usize) -> Tensor {
    let c = t.shape[2];
    Tensor {
        shape: vec![n, c],
        data: t.data[..n * c].to_vec(),
    }
}

/// Gather index taking an `[n, c]` waveform to channel-major
/// `[c, rows, period]` (zero padded).
pub fn fold_index(n: usize, c: usize, period: usize) -> (Rc<[usize]>, [usize; 3]) {
    let rows = rows_for(n, period);
    let mut idx = Vec::with_capacity(c * rows * period);
    for ch in 0..c {
        for t in 0..rows * period {
            idx.push(if t < n { t * c + ch } else { ZERO });
        }
    }
    (idx.into(), [c, rows, period])
}

/// Gather index taking channel-major `[c, rows, period]` back to `[n, c]`.
pub fn unfold_index(n: usize, c: usize, period: usize) -> Rc<[usize]> {
    let plane = rows_for(n, period) * period;
    (0..n)
        .flat_map(|t| (0..c).map(move |ch| ch * plane + t))
        .collect::<Vec<_>>()
        .into()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn shapes() {
        let w = Tensor::zeros(&[160, 2]);
        assert_eq!(reshape_period(&w, 80).shape, vec![2, 80, 2]);
        let w = Tensor::new(&[150, 2], (0..300).map(|v| v as f64 + 1.0).collect()).unwrap();
        let r = reshape_period(&w, 80);
        assert_eq!(r.shape, vec![2, 80, 2]);
        assert!(r.data[300..].iter().all(|&v| v == 0.0));
        assert_eq!(inverse_reshape_trunc(&r, 150), w);
    }

    #[test]
    fn fold_then_unfold_is_identity() {
        let (n, c, p) = (37, 3, 8);
        let (fold, shape) = fold_index(n, c, p);
        assert_eq!(shape, [3, 5, 8]);
        let unfold = unfold_index(n, c, p);
        for (i, &j) in unfold.iter().enumerate() {
            assert_eq!(fold[j], i);
        }
    }

    proptest! {
        #[test]
        fn round_trip(n in 1usize..300, p in 1usize..100) {
            let w = Tensor::new(&[n, 2], (0..2 * n).map(|v| v as f64).collect()).unwrap();
            prop_assert_eq!(inverse_reshape_trunc(&reshape_period(&w, p), n), w);
        }
    }
}
