//! Core numerics for physics-informed low-rank adaptation and hypernetworks.
//!
//! The crate is `no_std` + `alloc` when built without the default `std`
//! feature; the pseudo-spectral reference solver for 1D Burgers needs `std`
//! (it runs on `rustfft`) and is unavailable otherwise.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod autodiff;
pub mod error;
pub mod nn;
pub mod pde;
pub mod rng;
pub mod train;

pub use error::{Error, Result};
