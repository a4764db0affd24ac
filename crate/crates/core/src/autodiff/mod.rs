//! Differentiation engine: a reverse-mode tape over dense matrices plus
//! forward-mode input jets recorded on that tape.

mod algebra;
pub mod fd;
mod jet;
mod mat;
mod params;
mod tape;

pub use algebra::{Algebra, Plain};
pub use jet::{Activation, BatchJet, Jet2, JetSpec};
pub use mat::Mat;
pub use params::{BlockKind, LayoutEntry, ParamLayout, ParamVector};
pub use tape::{flatten_grads, log_sigmoid, sigmoid, Grads, Scalar, Tape, Unary, Var};
