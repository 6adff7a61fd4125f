//! Quantum superchannels, combs and convex dynamical resource theories.
//!
//! The crate is `no_std` with `alloc`; enable the `std` feature for
//! runtime CPU feature detection in the dense kernels.
#![no_std]
#![allow(clippy::needless_range_loop, clippy::too_many_arguments)]

extern crate alloc;
#[cfg(any(test, feature = "std"))]
extern crate std;

pub mod choi;
pub mod comb;
pub mod conic;
pub mod error;
pub mod linalg;
pub mod problems;
pub mod protocols;
pub mod supermap;
pub mod tensor;
pub mod theory;

pub use error::{Error, Result};
