//! Symmetric pruning of variational quantum circuits on a dense statevector simulator.
//!
//! The guide in `book/` walks through the modules with runnable examples.

pub mod ansatz;
pub mod error;
pub mod experiments;
pub mod hamiltonians;
pub mod linalg;
pub mod pauli;
pub mod pruning;
pub mod seed;
pub mod state;
pub mod symmetry;
pub mod training;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/paulis.md")]
    mod paulis {}
    #[doc = include_str!("../../../book/src/hamiltonians.md")]
    mod hamiltonians {}
    #[doc = include_str!("../../../book/src/ansatz.md")]
    mod ansatz {}
    #[doc = include_str!("../../../book/src/pruning.md")]
    mod pruning {}
    #[doc = include_str!("../../../book/src/kernel.md")]
    mod kernel {}
    #[doc = include_str!("../../../book/src/training.md")]
    mod training {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
}
