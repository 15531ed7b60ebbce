//! Period estimation for discrete periodic mixtures by sparse recovery in
//! nested periodic dictionaries (NPDs).
//!
//! The crate builds Ramanujan (RPT) and Farey dictionaries, computes the
//! coherence measures that certify exact support recovery for mixtures of
//! hidden periods, evaluates the resulting recovery conditions and noise
//! thresholds, and runs OMP / basis pursuit plus the experiment sweeps that
//! check those guarantees empirically.
//!
//! Atom indices in the public API (supports, index sets, recovered supports)
//! are 1-based: atom `1` is the first column of the dictionary.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coherence;
pub mod dictionary;
pub mod error;
pub mod guarantees;
pub mod harness;
mod linalg;
pub mod numtheory;
mod parallel;
pub mod recovery;
pub mod support;

pub use coherence::{Coherence, CoherenceReport, NestedProfiles};
pub use dictionary::{DictionaryFamily, NpdDictionary};
pub use error::{Error, Result};
pub use guarantees::{BoundVerdict, Condition};
pub use recovery::{RecoveryResult, StopReason, StopRule};
pub use support::PeriodSet;

pub use num_complex::Complex64;
