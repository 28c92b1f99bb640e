//! Exact-arithmetic simulator and verifier for sequences of quadratic
//! transforms along rank-1 valuations in Artin-Schreier extensions of
//! surfaces in positive characteristic.
//!
//! The crate has two independent computational routes and checks them
//! against each other:
//!
//! - [`engine`]: the exponent-level state machine executing the
//!   type-switching recurrences with exact rationals, computing distances,
//!   value-group indices and defect verdicts;
//! - [`germ`] / [`series`]: truncated bivariate power series over small
//!   finite fields performing the actual substitutions, Jacobian-ideal
//!   computations and type classification, serving as the brute-force
//!   oracle for the engine.
//!
//! On top of those sit [`synth`] (schedules with prescribed switching and
//! prescribed distance), [`tower`] (two-level towers, the dependent worked
//! example and the independent-defect tower with its strong-monomialization
//! audit), [`oracle`] (the randomized equivalence suite) and [`cli`].

pub mod cli;
pub mod engine;
pub mod field;
pub mod germ;
pub mod oracle;
pub mod rat;
pub mod report;
pub mod series;
pub mod synth;
pub mod tower;

pub use engine::{ExtType, ExtensionState, Schedule, Trace, TransformStep};
pub use rat::{DistanceBound, GroupLattice, Rat};
