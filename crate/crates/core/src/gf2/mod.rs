//! Bit-packed GF(2) linear algebra and the per-OFDM-symbol linear model of
//! the coded transmitter: interleaved coded bits `y = C·x ⊕ offset(state)`.

mod matrix;
mod solver;
mod system;

pub use matrix::{Gf2Matrix, Gf2Vector};
pub use solver::{rank, solve, Factorization, Unsolvable};
pub use system::{
    build_symbol_system, certify_subset, default_subset, max_usable_subcarriers, restrict_rows,
    SubsetCertificate, SymbolSystem,
};
