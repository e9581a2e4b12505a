//! Exact monotone and Knothe couplings between finitely supported measures on
//! Z^n, and verifiers for discrete Brunn–Minkowski, entropy and transport
//! inequalities attached to translation-equivariant, Knothe-monotone
//! lattice operations.
//!
//! All weights are exact rationals; only logarithms (entropies, `log P`) are
//! floating point.

pub mod coupling;
pub mod error;
pub mod instance;
pub mod lattice_order;
pub mod measures;
pub mod operations;
pub mod random;
pub mod rational;
pub mod report;
pub mod suite;
pub mod verify;

pub use coupling::{Coupling, FiberIndex, KnotheCoupling};
pub use error::{Error, Result};
pub use lattice_order::{AdditiveTotalOrder, Block, Decomposition, LatticePoint};
pub use measures::{ConditionalFamily, FiniteMeasure, ProbabilityMeasure};
pub use operations::{ExponentQuadruple, LatticeOperation, OperationSpec};
pub use report::{Outcome, Quantity, Side, VerificationReport, Witness};
pub use verify::FunctionQuadruple;
