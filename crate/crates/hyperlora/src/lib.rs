//! Experiment harness, file formats and helpers behind the `hyperlora`
//! command-line tool. The numerics live in `hyperlora_core`.

pub mod bench;
mod error;
pub mod io;

pub use error::{Error, Result};
pub use hyperlora_core as core;
