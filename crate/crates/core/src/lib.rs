//! Sampson approximations of geometric errors for polynomial constraint systems.
//!
//! The crate provides exact polynomial evaluation ([`poly`]), first-order error approximations
//! ([`sampson`]), exact geometric-error oracles ([`oracle`]), tightness bounds ([`bounds`]),
//! constraint builders for multiple-view geometry ([`geometry`]) and Sampson-based refinement
//! ([`refine`]).

pub mod bounds;
pub mod error;
pub mod geometry;
pub mod linalg;
pub mod oracle;
pub mod poly;
pub mod refine;
pub mod roots;
pub mod sampson;

pub use error::{Error, Result};
