//! The benchmark PDE families: residuals, data, closed-form and numerical
//! reference solutions, GRF initial conditions and point sets.

pub mod analytic;
mod domain;
mod grf;
mod points;
mod residual;
#[cfg(feature = "std")]
pub mod spectral;
mod system;

pub use domain::Domain;
pub use grf::{grf_mode_std, sample_grf, sample_grf_u0, trig_interpolate, GRF_POINTS};
pub use points::{make_point_sets, BoundarySet, Labeled, PointBudget, PointSets, LATTICE};
pub use residual::{burgers1d, burgers2d, kovasznay, Field};
pub use system::{Reference, SystemKind, Task, BURGERS1D_NU, HORIZON};
