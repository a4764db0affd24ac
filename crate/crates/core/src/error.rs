use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::train::EpochRecord;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A primitive was evaluated outside its domain.
    Domain { primitive: &'static str, operand: f64 },
    /// The loss handed to a backward pass was not finite.
    NonFiniteLoss { value: f64 },
    /// A gradient entry came out non-finite.
    NonFiniteGradient { offset: usize },
    /// An operation that is not defined for the requested order or primitive.
    Unsupported { operation: &'static str, detail: String },
    /// Mismatched dimensions. `offset` points at the first offending entry
    /// when the mismatch concerns a flat parameter layout.
    Shape {
        context: &'static str,
        expected: usize,
        found: usize,
        offset: Option<usize>,
    },
    /// Adapter rank not below the smaller dimension of a weight matrix.
    Rank {
        layer: usize,
        rank: usize,
        rows: usize,
        cols: usize,
    },
    /// Invalid configuration value.
    Config(String),
    /// A loss component became non-finite; `point` is a sample offender.
    NonFiniteComponent {
        component: &'static str,
        point: Vec<f64>,
    },
    /// Training diverged; carries the history recorded so far.
    Diverged {
        epoch: usize,
        loss: f64,
        history: Box<Vec<EpochRecord>>,
    },
    /// The reference solver produced a non-finite field.
    Solver { time: f64 },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Domain { primitive, operand } => {
                write!(f, "domain error in `{primitive}` at operand {operand:e}")
            }
            Error::NonFiniteLoss { value } => {
                write!(f, "loss is not finite ({value}); refusing to backpropagate")
            }
            Error::NonFiniteGradient { offset } => {
                write!(f, "non-finite gradient at parameter offset {offset}")
            }
            Error::Unsupported { operation, detail } => {
                write!(f, "unsupported operation `{operation}`: {detail}")
            }
            Error::Shape {
                context,
                expected,
                found,
                offset,
            } => {
                write!(f, "shape mismatch in {context}: expected {expected}, found {found}")?;
                if let Some(o) = offset {
                    write!(f, " (first offending offset {o})")?;
                }
                Ok(())
            }
            Error::Rank {
                layer,
                rank,
                rows,
                cols,
            } => write!(
                f,
                "rank {rank} is not below min({rows}, {cols}) for layer {layer}"
            ),
            Error::Config(msg) => write!(f, "invalid configuration: {msg}"),
            Error::NonFiniteComponent { component, point } => {
                write!(f, "loss component `{component}` is not finite near point {point:?}")
            }
            Error::Diverged { epoch, loss, .. } => {
                write!(f, "training diverged at epoch {epoch} (loss {loss:e})")
            }
            Error::Solver { time } => {
                write!(f, "reference solver became unstable at t = {time}")
            }
        }
    }
}

impl core::error::Error for Error {}

impl Error {
    /// True for failures caused by the numbers rather than by the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Domain { .. }
                | Error::NonFiniteLoss { .. }
                | Error::NonFiniteGradient { .. }
                | Error::NonFiniteComponent { .. }
                | Error::Diverged { .. }
                | Error::Solver { .. }
        )
    }
}
