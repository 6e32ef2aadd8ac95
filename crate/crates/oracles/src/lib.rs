//! Independent, deliberately naive reference computations.
//!
//! Nothing here shares code with the `btao` crate: matrices are inverted
//! with Gauss–Jordan elimination, integrals use adaptive Simpson
//! quadrature and probabilities come from plain Monte Carlo. These are
//! slow and only meant for checking the production paths.

#![allow(clippy::needless_range_loop)]

pub mod dense;
pub mod grid;
pub mod mc;
pub mod quad;
