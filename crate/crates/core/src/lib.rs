//! Compressed sensing with Tanner-code measurement matrices built on spectral
//! expanders.
//!
//! The pipeline: generate a `d`-regular graph and certify its second
//! eigenvalue ([`graphs`]), find a small inner matrix with the robust null
//! space property ([`inner_code`]), assemble the measurement matrix over the
//! graph's double cover ([`tanner`]), and recover sparse signals by basis
//! pursuit ([`recovery`]). [`analysis`] checks the structural statements
//! behind the recovery guarantee; [`experiment`] runs the whole thing from a
//! config.

pub mod analysis;
pub mod experiment;
pub mod graphs;
pub mod inner_code;
pub mod lp;
pub mod matrix;
pub mod recovery;
pub mod tanner;

pub use graphs::{DoubleCover, RegularGraph, Side};
pub use inner_code::InnerCode;
pub use tanner::TannerMatrix;
