//! Energy levels and wavefunctions of the quartic anharmonic oscillator
//! `H = (p² + ω²x²)/2 + λx⁴`, computed by diagonalizing the Hamiltonian in a
//! harmonic-oscillator basis whose frequency ω₀ is a free parameter.
//!
//! All arithmetic is MPFR-backed; a [`PrecisionContext`] fixes the number of
//! decimal digits, from the usual 8 up to several hundred.

pub mod eigensolve;
pub mod error;
pub mod numerics;
pub mod operator;
pub mod spectrum;
pub mod wavefunction;

pub use error::{Error, Result};
pub use numerics::{make_context, PrecisionContext};
pub use rug::{Float, Rational};
