//! Quantum 3-manifold invariants at roots of unity.
//!
//! Turaev-Viro state sums on triangulations, colored Jones values of a family of
//! links, the identity relating the two, and volume asymptotics.

pub mod asymptotics;
pub mod bridge;
pub mod error;
pub mod jones;
pub mod numeric;
mod precise;
pub mod qarith;
pub mod skein;
pub mod statesum;
pub mod triangulate;

pub use error::{Error, Result};
pub use jones::LinkExpr;
pub use qarith::{Flavor, LogMagnitude, RootContext};
pub use statesum::{Form, StateSumResult};
pub use triangulate::Triangulation;
