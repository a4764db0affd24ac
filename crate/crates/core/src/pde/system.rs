use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::analytic;
use super::domain::Domain;
use super::grf::{sample_grf_u0, trig_interpolate, GRF_POINTS};
use super::residual::{self, Field};
use crate::autodiff::{Algebra, JetSpec, Mat};
use crate::error::{Error, Result};
use crate::nn::{EmbeddingCodec, TaskEmbedding};
use crate::rng;

/// Viscosity of the 1D Burgers family.
pub const BURGERS1D_NU: f64 = 0.01;
/// Time horizon of both Burgers families.
pub const HORIZON: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemKind {
    Burgers1d,
    Burgers2d,
    Kovasznay,
}

impl SystemKind {
    pub const ALL: [SystemKind; 3] = [SystemKind::Burgers1d, SystemKind::Burgers2d, SystemKind::Kovasznay];

    pub fn name(self) -> &'static str {
        match self {
            SystemKind::Burgers1d => "burgers1d",
            SystemKind::Burgers2d => "burgers2d",
            SystemKind::Kovasznay => "kovasznay",
        }
    }

    pub fn domain(self) -> Domain {
        match self {
            SystemKind::Burgers1d => Domain::unit(1, Some(HORIZON)),
            SystemKind::Burgers2d => Domain::unit(2, Some(HORIZON)),
            SystemKind::Kovasznay => Domain::unit(2, None),
        }
    }

    pub fn input_dim(self) -> usize {
        self.domain().dim()
    }

    pub fn output_dim(self) -> usize {
        self.components().len()
    }

    pub fn components(self) -> &'static [&'static str] {
        match self {
            SystemKind::Burgers1d => &["u"],
            SystemKind::Burgers2d => &["u", "v"],
            SystemKind::Kovasznay => &["u", "v", "p"],
        }
    }

    pub fn coordinates(self) -> &'static [&'static str] {
        match self {
            SystemKind::Burgers1d => &["x", "t"],
            SystemKind::Burgers2d => &["x", "y", "t"],
            SystemKind::Kovasznay => &["x", "y"],
        }
    }

    /// Input derivatives the residual reads.
    pub fn jet_spec(self) -> JetSpec {
        match self {
            SystemKind::Burgers1d => JetSpec::new(&[0, 1], &[0]),
            SystemKind::Burgers2d => JetSpec::new(&[0, 1, 2], &[0, 1]),
            SystemKind::Kovasznay => JetSpec::new(&[0, 1], &[0, 1]),
        }
    }

    pub fn codec(self) -> EmbeddingCodec {
        match self {
            SystemKind::Burgers1d => EmbeddingCodec::Identity { dim: GRF_POINTS },
            SystemKind::Burgers2d => EmbeddingCodec::viscosity(),
            SystemKind::Kovasznay => EmbeddingCodec::reynolds(),
        }
    }

    /// The task base networks are trained on.
    pub fn base_task(self) -> Task {
        match self {
            SystemKind::Burgers1d => Task::Burgers1d { u0: sample_grf_u0(0) },
            SystemKind::Burgers2d => Task::Burgers2d { nu: 5e-4 },
            SystemKind::Kovasznay => Task::Kovasznay { re: 60.0 },
        }
    }

    /// A task drawn from the family's parameter distribution.
    ///
    /// Reynolds numbers are uniform on `[20, 100]`, viscosities log-uniform
    /// on `[1e-4, 1e-3]`, and initial conditions are GRF draws seeded by a
    /// child of `seed`.
    pub fn sample_task(self, seed: u64) -> Task {
        let mut r = rng::seeded(seed);
        match self {
            SystemKind::Burgers1d => Task::Burgers1d {
                u0: sample_grf_u0(rng::derive_seed(seed, 0x6752_46)),
            },
            SystemKind::Burgers2d => Task::Burgers2d {
                nu: libm::pow(10.0, r.random_range(-4.0..=-3.0)),
            },
            SystemKind::Kovasznay => Task::Kovasznay {
                re: r.random_range(20.0..=100.0),
            },
        }
    }
}

impl fmt::Display for SystemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SystemKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SystemKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown system `{s}` (expected burgers1d, burgers2d or kovasznay)")))
    }
}

/// One PDE instance: a family plus its parameter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "system", rename_all = "snake_case")]
pub enum Task {
    Burgers1d { u0: Vec<f64> },
    Burgers2d { nu: f64 },
    Kovasznay { re: f64 },
}

impl Task {
    pub fn kind(&self) -> SystemKind {
        match self {
            Task::Burgers1d { .. } => SystemKind::Burgers1d,
            Task::Burgers2d { .. } => SystemKind::Burgers2d,
            Task::Kovasznay { .. } => SystemKind::Kovasznay,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Task::Burgers1d { u0 } if u0.len() != GRF_POINTS => Err(Error::Shape {
                context: "initial condition samples",
                expected: GRF_POINTS,
                found: u0.len(),
                offset: None,
            }),
            Task::Burgers1d { u0 } if u0.iter().any(|v| !v.is_finite()) => {
                Err(Error::Config("initial condition has non-finite samples".into()))
            }
            Task::Burgers2d { nu } if !(*nu > 0.0) => {
                Err(Error::Config(format!("viscosity must be positive, got {nu}")))
            }
            Task::Kovasznay { re } if !(*re > 0.0) => {
                Err(Error::Config(format!("Reynolds number must be positive, got {re}")))
            }
            _ => Ok(()),
        }
    }

    /// Parameter vector before normalization.
    pub fn raw_parameters(&self) -> Vec<f64> {
        match self {
            Task::Burgers1d { u0 } => u0.clone(),
            Task::Burgers2d { nu } => vec![*nu],
            Task::Kovasznay { re } => vec![*re],
        }
    }

    pub fn embedding(&self) -> Result<TaskEmbedding> {
        self.kind().codec().encode(&self.raw_parameters())
    }

    /// Short human-readable identifier.
    pub fn label(&self) -> String {
        match self {
            Task::Burgers1d { u0 } => {
                let mean = u0.iter().sum::<f64>() / u0.len().max(1) as f64;
                format!("burgers1d(u0 mean {mean:.4})")
            }
            Task::Burgers2d { nu } => format!("burgers2d(nu={nu:.4e})"),
            Task::Kovasznay { re } => format!("kovasznay(re={re:.4})"),
        }
    }

    /// Residuals of every equation of the system at one batch of fields
    /// (one per output component, in component order).
    pub fn residual<A: Algebra>(&self, alg: &mut A, fields: &[Field<A::Elem>]) -> Vec<A::Elem> {
        match self {
            Task::Burgers1d { .. } => vec![residual::burgers1d(alg, &fields[0], BURGERS1D_NU)],
            Task::Burgers2d { nu } => residual::burgers2d(alg, &fields[0], &fields[1], *nu).to_vec(),
            Task::Kovasznay { re } => {
                residual::kovasznay(alg, &fields[0], &fields[1], &fields[2], *re).to_vec()
            }
        }
    }

    /// Closed-form solution, where one exists.
    pub fn analytic(&self, point: &[f64]) -> Option<Vec<f64>> {
        match *self {
            Task::Burgers1d { .. } => None,
            Task::Burgers2d { nu } => Some(analytic::burgers2d(point[0], point[1], point[2], nu).to_vec()),
            Task::Kovasznay { re } => Some(analytic::kovasznay(point[0], point[1], re).to_vec()),
        }
    }

    /// Closed-form solution with input derivatives, where one exists.
    pub fn analytic_fields(&self, point: &[f64]) -> Option<Vec<Field<f64>>> {
        match *self {
            Task::Burgers1d { .. } => None,
            Task::Burgers2d { nu } => {
                Some(analytic::burgers2d_fields(point[0], point[1], point[2], nu).to_vec())
            }
            Task::Kovasznay { re } => Some(analytic::kovasznay_fields(point[0], point[1], re).to_vec()),
        }
    }

    /// Initial data at a spatial point, for time-dependent systems.
    pub fn initial(&self, spatial: &[f64]) -> Option<Vec<f64>> {
        match self {
            Task::Burgers1d { u0 } => {
                let n = u0.len() as f64;
                let j = spatial[0] * n;
                let v = if j.fract() == 0.0 && j >= 0.0 && j < n {
                    u0[j as usize]
                } else {
                    trig_interpolate(u0, spatial[0])
                };
                Some(vec![v])
            }
            Task::Burgers2d { nu } => Some(analytic::burgers2d(spatial[0], spatial[1], 0.0, *nu).to_vec()),
            Task::Kovasznay { .. } => None,
        }
    }

    /// Dirichlet data on the boundary; `None` for periodic systems.
    pub fn boundary(&self, point: &[f64]) -> Option<Vec<f64>> {
        match self {
            Task::Burgers1d { .. } => None,
            _ => self.analytic(point),
        }
    }
}

/// Row-wise evaluation of a pointwise function into an `N x c` matrix.
pub(crate) fn tabulate(points: &Mat, cols: usize, mut f: impl FnMut(&[f64]) -> Vec<f64>) -> Mat {
    let mut data = Vec::with_capacity(points.rows() * cols);
    for i in 0..points.rows() {
        data.extend(f(points.row(i)));
    }
    Mat::from_vec(points.rows(), cols, data)
}

/// Ground truth of one task: closed form or a numerical solution.
#[derive(Clone, Debug)]
pub enum Reference {
    Analytic(Task),
    #[cfg(feature = "std")]
    Spectral(super::spectral::SpectralSolution),
}

impl Reference {
    /// Builds the reference for `task`; the 1D family is solved numerically
    /// with snapshots at `times`.
    #[cfg(feature = "std")]
    pub fn for_task(task: &Task, times: &[f64]) -> Result<Self> {
        task.validate()?;
        match task {
            Task::Burgers1d { u0 } => {
                let cfg = super::spectral::SpectralConfig::default();
                Ok(Reference::Spectral(super::spectral::solve_burgers1d(
                    u0,
                    BURGERS1D_NU,
                    times,
                    &cfg,
                )?))
            }
            _ => Ok(Reference::Analytic(task.clone())),
        }
    }

    /// Reference values at `N` points, `N x components`.
    pub fn values(&self, points: &Mat) -> Mat {
        match self {
            Reference::Analytic(task) => {
                let c = task.kind().output_dim();
                tabulate(points, c, |p| task.analytic(p).expect("analytic task"))
            }
            #[cfg(feature = "std")]
            Reference::Spectral(sol) => tabulate(points, 1, |p| vec![sol.eval(p[0], p[1])]),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Plain;

    #[test]
    fn names_roundtrip() {
        for k in SystemKind::ALL {
            assert_eq!(k.name().parse::<SystemKind>().unwrap(), k);
        }
        assert!("navier".parse::<SystemKind>().is_err());
    }

    #[test]
    fn analytic_solutions_annihilate_residuals() {
        let mut r = rng::seeded(5);
        for re in [20.0, 60.0, 100.0] {
            let task = Task::Kovasznay { re };
            for _ in 0..200 {
                let p = [r.random::<f64>(), r.random::<f64>()];
                let res = task.residual(&mut Plain, &task.analytic_fields(&p).unwrap());
                assert!(res.iter().all(|v| v.abs() <= 1e-8), "{res:?} at {p:?}");
            }
        }
        for nu in [1e-4, 5e-4, 1e-3] {
            let task = Task::Burgers2d { nu };
            for _ in 0..200 {
                let p = [r.random::<f64>(), r.random::<f64>(), r.random::<f64>()];
                let res = task.residual(&mut Plain, &task.analytic_fields(&p).unwrap());
                assert!(res.iter().all(|v| v.abs() <= 1e-8), "{res:?} at {p:?}");
            }
        }
    }

    #[test]
    fn sampled_tasks_stay_in_range() {
        for s in 0..50 {
            match SystemKind::Kovasznay.sample_task(s) {
                Task::Kovasznay { re } => assert!((20.0..=100.0).contains(&re)),
                _ => unreachable!(),
            }
            match SystemKind::Burgers2d.sample_task(s) {
                Task::Burgers2d { nu } => assert!((1e-4..=1e-3).contains(&nu)),
                _ => unreachable!(),
            }
        }
        assert!(SystemKind::Burgers1d.sample_task(3).validate().is_ok());
    }

    #[test]
    fn embeddings_have_family_dimension() {
        for k in SystemKind::ALL {
            let e = k.base_task().embedding().unwrap();
            assert_eq!(e.normalized.len(), k.codec().dim());
        }
        assert_eq!(SystemKind::Kovasznay.base_task().embedding().unwrap().normalized, [0.0]);
    }

    #[test]
    fn invalid_tasks_are_rejected() {
        assert!(Task::Kovasznay { re: -1.0 }.validate().is_err());
        assert!(Task::Burgers2d { nu: 0.0 }.validate().is_err());
        assert!(matches!(
            Task::Burgers1d { u0: vec![0.0; 5] }.validate(),
            Err(Error::Shape { expected: 128, found: 5, .. })
        ));
    }
}
