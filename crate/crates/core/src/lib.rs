//! Numerical laboratory for the position-verification game `G_Rad`.
//!
//! The crate evaluates cheating strategies in the simultaneous two-way
//! model, computes hypercube regularity parameters of strategy-derived maps,
//! estimates the Banach-space norms that control them, and searches for
//! strong attacks by see-saw optimization.

pub mod error;
pub mod game;
pub mod hypercube;
pub mod linalg;
pub mod norms;
pub mod report;
pub mod rng;
pub mod seesaw;
pub mod strategies;

pub use error::{LabError, Result};
pub use game::{GameInstance, GameTensor, SignVector};
pub use linalg::{ComplexMatrix, ComplexVector, C64};
pub use rng::SeededRng;
