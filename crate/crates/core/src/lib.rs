//! Quasi-independent sets, meshes and Sidon-type certificates at desk scale.
//!
//! The crate is organised by subsystem:
//!
//! * [`group`]: `Z^n` and `(Z/pZ)^ν` arithmetic, rank over `F_p`.
//! * [`construction`] and [`qi`]: the recursive matrices `A_ν`, their
//!   embedding through a dissociated sequence, and quasi-independence checks.
//! * [`mesh`]: meshes `Σ n_j γ_j`, membership and intersection counts.
//! * [`selection`]: two-stage Bernoulli selection in `(Z/pZ)^ν` and the
//!   certified freeness search.
//! * [`theorem2`], [`theorem3`]: finite prefixes of sets that satisfy strong
//!   mesh conditions without being Sidon.
//! * [`spectral`]: Walsh spectra on `(Z/2Z)^ν` and the analyticity witness.
//! * [`tails`]: sub-Gaussian and binomial tail bounds against exact tails.

pub mod arith;
pub mod construction;
pub mod digits;
pub mod error;
pub mod group;
pub mod growth;
pub mod mesh;
pub mod qi;
pub mod rng;
pub mod selection;
pub mod spectral;
pub mod tails;
pub mod theorem2;
pub mod theorem3;

pub use error::{Error, Result};
pub use group::{fp_rank, is_free, signed_combination, FpVector, GroupElement, LatticePoint, SignVector};
