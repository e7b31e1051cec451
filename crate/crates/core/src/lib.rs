//! Exit and entry functionals of a compound Poisson process whose negative
//! jumps are exponential.
//!
//! The numerics are built around the resolvent density `R_x(s)` in
//! [`resolvent`]. [`one_boundary`], [`exit`] and [`entry`] express passage
//! transforms through it, and [`simulate`] provides exact-in-law Monte Carlo
//! counterparts. [`validation`] ties the two together.

pub mod entry;
pub mod error;
pub mod exit;
pub mod inversion;
pub mod model;
pub mod one_boundary;
pub mod poly;
pub mod quadrature;
pub mod rational_oracle;
pub mod resolvent;
pub mod simulate;
pub mod tolerances;
pub mod validation;

pub use error::{Error, Result};

/// Crate version, echoed in output metadata.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/model.md")]
    mod model {}
    #[doc = include_str!("../../../book/src/resolvent.md")]
    mod resolvent {}
    #[doc = include_str!("../../../book/src/one_boundary.md")]
    mod one_boundary {}
    #[doc = include_str!("../../../book/src/exit.md")]
    mod exit {}
    #[doc = include_str!("../../../book/src/entry.md")]
    mod entry {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/validation.md")]
    mod validation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
