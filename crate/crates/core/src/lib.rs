//! KMS states of Nica–Toeplitz algebras over right-angled Artin monoids,
//! computed at the level of traces on a finite coefficient algebra `C(Z)`.
//!
//! The crate is layered bottom-up:
//!
//! * [`monoid`]: normal forms, divisibility, joins and cliques in `P_Γ`.
//! * [`transfer`]: commuting transfer matrices `F_s` and their builders.
//! * [`setalgebra`]: cells `pΩ_J` and the trace-valued measure on them.
//! * [`kms`]: subinvariance, Wold decomposition, critical temperature.
//! * [`model`]: JSON model files.
//!
//! Dense linear algebra is delegated to `nalgebra` through [`linalg`].

// `!(x > y)` is used on purpose so that NaN takes the rejecting branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod kms;
pub mod linalg;
pub mod model;
pub mod monoid;
pub mod setalgebra;
pub mod transfer;

pub use kms::{KmsError, Tolerances};
pub use monoid::{ArtinMonoid, ExtendedElement, Generator, MonoidElement, SimpleGraph, WeightMap};
pub use setalgebra::{Cell, CellSet};
pub use transfer::{TraceVec, TransferSystem};
