//! Sparse recovery on highly coherent dictionaries.
//!
//! Refined frequency grids make neighbouring dictionary columns almost
//! parallel, which defeats the usual incoherence-based guarantees of greedy
//! and L1 methods. This crate implements two remedies and the algorithms
//! built from them:
//!
//! * **band exclusion**: a new support index may not fall in the double
//!   coherence band of indices already chosen ([`greedy::bomp`],
//!   [`thresh::bmt`]);
//! * **local optimization**: each chosen index is moved within its own
//!   band to the position that best reduces the residual
//!   ([`greedy::local_optimization`]).
//!
//! Combined they give BLOOMP, BLOSP, BLOCoSaMP, BLOIHT and BLOT
//! post-processing for Basis Pursuit and the Lasso. The [`bench`] module is
//! a seeded Monte-Carlo harness that runs these algorithms on the
//! spectral-estimation and redundant-frame ensembles in [`models`].

pub mod bench;
pub mod coherence;
pub mod error;
pub mod greedy;
pub mod l1;
pub mod metrics;
pub mod models;
pub mod numlin;
pub mod par;
pub mod thresh;

pub use coherence::{BandIndex, BandPolicy};
pub use error::{Error, Result};
pub use greedy::{RecoveryResult, Termination};
pub use models::{GridSpec, OffGridScene, SensingMatrix, SparseSignal};
pub use numlin::{CMatrix, CVector, C64};
