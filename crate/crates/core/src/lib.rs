//! Coherence quantifiers built on the Tsallis relative α entropy.
//!
//! The crate provides
//!
//! - [`linalg`]: dense complex matrices, Hermitian eigen-decomposition and
//!   fractional powers;
//! - [`states`] and [`channels`]: validated density matrices, the incoherent
//!   set, Kraus channels and reproducible random generators;
//! - [`divergence`]: f_α(ρ, σ) = Tr ρ^α σ^{1−α}, the Tsallis relative α
//!   entropy and the von Neumann / relative entropies;
//! - [`coherence`]: the family C_α, the original quantifier C̃_α, their
//!   special cases and a brute-force oracle for the incoherent minimization;
//! - [`harness`]: randomized property checks for every inequality the
//!   measures are expected to satisfy, and a counterexample search for
//!   strong monotonicity.
//!
//! Logarithms are natural throughout.

#![forbid(unsafe_code)]
// `!(x > 0.0)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channels;
pub mod coherence;
pub mod divergence;
pub mod error;
pub mod harness;
pub mod io;
pub mod linalg;
pub mod rng;
pub mod states;

pub use channels::{KrausChannel, Selection, SelectiveOutcome};
pub use coherence::{CoherenceKind, CoherenceResult};
pub use divergence::{Alpha, ExtendedReal};
pub use error::{Error, Result};
pub use linalg::{ComplexMatrix, HermitianSpectrum, MatrixPower};
pub use rng::RngSeed;
pub use states::{DensityMatrix, ProbabilityVector};
