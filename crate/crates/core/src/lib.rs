//! Eigenvalue densities of sums and products of free random matrices.
//!
//! Hermitian ensembles are handled by scalar R and S transforms
//! ([`hermitian`]). Non-hermitian ensembles use the 2×2 quaternionic
//! extension ([`nonhermitian`]), whose solutions give the complex-plane
//! density, its boundary and the eigenvector correlator. [`ensembles`] and
//! [`montecarlo`] sample finite matrices and compare their spectra with the
//! analytic predictions.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod algebra;
pub mod ensembles;
pub mod error;
pub mod grid;
pub mod hermitian;
pub mod montecarlo;
pub mod nonhermitian;
pub mod par;

pub use algebra::{phase_split, Complex2x2, PhasePoint, QuaternionicGreen, URotation};
pub use error::{Error, Result};
pub use num_complex::Complex64;
