//! Dissipative excitation transfer between two noninteracting qubits driven by
//! measurement backaction.
//!
//! The crate covers the Lindblad description, counting and homodyne quantum
//! trajectories, jump statistics and postselection witnesses, and a feedback
//! protocol that switches a collective channel on and off to pump heat from a
//! cold bath into a hot one.
//!
//! Basis ordering everywhere is `{|g,g>, |g,e>, |e,g>, |e,e>}` with qubit 1 as
//! the left tensor factor.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod demon;
pub mod error;
pub mod linalg;
pub mod lindblad;
pub mod model;
pub mod series;
pub mod tolerances;
pub mod trajectory;

pub use error::{Error, Result};
pub use linalg::{Basis, DensityMatrix, Operator, StateVector, C64};
pub use model::{ChannelLabel, JumpChannel, ModelParams};
pub use tolerances::Tolerances;
