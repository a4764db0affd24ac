use alloc::vec::Vec;
use rand::seq::index;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::system::{tabulate, SystemKind, Task, HORIZON};
use crate::autodiff::Mat;
use crate::error::{Error, Result};
use crate::rng::{self, Rng};

/// Lattice size per side for Kovasznay sampling.
pub const LATTICE: usize = 101;

/// How many points of each kind to generate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointBudget {
    pub collocation: usize,
    /// Initial-condition points (time-dependent systems).
    pub initial: usize,
    /// Dirichlet points per face of the spatial box.
    pub boundary_per_face: usize,
    /// Sampled times for the periodic pairing of 1D Burgers.
    pub periodic_times: usize,
}

impl PointBudget {
    /// Full budgets of the original experiments.
    pub fn standard(kind: SystemKind) -> Self {
        match kind {
            SystemKind::Burgers1d => Self {
                collocation: 10_000,
                initial: 128,
                boundary_per_face: 0,
                periodic_times: 100,
            },
            SystemKind::Burgers2d => Self {
                collocation: 10_000,
                initial: 500,
                boundary_per_face: 100,
                periodic_times: 0,
            },
            SystemKind::Kovasznay => Self {
                collocation: 2601,
                initial: 0,
                boundary_per_face: 80,
                periodic_times: 0,
            },
        }
    }
}

/// Points with supervised targets, `N x dim` and `N x components`.
#[derive(Clone, Debug, PartialEq)]
pub struct Labeled {
    pub points: Mat,
    pub targets: Mat,
}

impl Labeled {
    pub fn len(&self) -> usize {
        self.points.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum BoundarySet {
    Dirichlet(Labeled),
    /// `u(left_i) = u(right_i)` for every row.
    Periodic { left: Mat, right: Mat },
}

impl BoundarySet {
    /// Number of boundary points (both sides of a periodic pair count).
    pub fn len(&self) -> usize {
        match self {
            BoundarySet::Dirichlet(l) => l.len(),
            BoundarySet::Periodic { left, right } => left.rows() + right.rows(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PointSets {
    pub collocation: Mat,
    pub initial: Option<Labeled>,
    pub boundary: BoundarySet,
}

impl PointSets {
    /// Every generated point, collocation first.
    pub fn all_points(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = (0..self.collocation.rows()).map(|i| self.collocation.row(i)).collect();
        if let Some(ic) = &self.initial {
            out.extend((0..ic.len()).map(|i| ic.points.row(i)));
        }
        match &self.boundary {
            BoundarySet::Dirichlet(l) => out.extend((0..l.len()).map(|i| l.points.row(i))),
            BoundarySet::Periodic { left, right } => {
                out.extend((0..left.rows()).map(|i| left.row(i)));
                out.extend((0..right.rows()).map(|i| right.row(i)));
            }
        }
        out
    }
}

fn uniform_box(rng: &mut Rng, n: usize, dim: usize) -> Mat {
    Mat::from_fn(n, dim, |_, _| rng.random::<f64>())
}

fn lattice(k: usize) -> f64 {
    k as f64 / (LATTICE - 1) as f64
}

/// Generates collocation, initial and boundary points for `task`.
pub fn make_point_sets(task: &Task, budget: &PointBudget, seed: u64) -> Result<PointSets> {
    task.validate()?;
    let mut rng = rng::seeded(seed);
    let kind = task.kind();
    let comps = kind.output_dim();
    match kind {
        SystemKind::Burgers1d => {
            let collocation = Mat::from_fn(budget.collocation, 2, |_, j| {
                let r = rng.random::<f64>();
                if j == 1 { r * HORIZON } else { r }
            });
            let n0 = budget.initial;
            let xs: Vec<f64> = if n0 == super::grf::GRF_POINTS {
                (0..n0).map(|j| j as f64 / n0 as f64).collect()
            } else {
                (0..n0).map(|_| rng.random::<f64>()).collect()
            };
            let points = Mat::from_fn(n0, 2, |i, j| if j == 0 { xs[i] } else { 0.0 });
            let targets = tabulate(&points, 1, |p| task.initial(&p[..1]).expect("time-dependent"));
            let times: Vec<f64> = (0..budget.periodic_times).map(|_| rng.random::<f64>() * HORIZON).collect();
            let left = Mat::from_fn(times.len(), 2, |i, j| if j == 0 { 0.0 } else { times[i] });
            let right = Mat::from_fn(times.len(), 2, |i, j| if j == 0 { 1.0 } else { times[i] });
            Ok(PointSets {
                collocation,
                initial: Some(Labeled { points, targets }),
                boundary: BoundarySet::Periodic { left, right },
            })
        }
        SystemKind::Burgers2d => {
            let collocation = uniform_box(&mut rng, budget.collocation, 3);
            let points = Mat::from_fn(budget.initial, 3, |_, j| if j == 2 { 0.0 } else { rng.random::<f64>() });
            let targets = tabulate(&points, comps, |p| task.initial(&p[..2]).expect("time-dependent"));
            let m = budget.boundary_per_face;
            let mut bc = Vec::with_capacity(4 * m * 3);
            for face in 0..4 {
                for _ in 0..m {
                    let (a, t) = (rng.random::<f64>(), rng.random::<f64>());
                    let fixed = if face % 2 == 0 { 0.0 } else { 1.0 };
                    let (x, y) = if face < 2 { (fixed, a) } else { (a, fixed) };
                    bc.extend_from_slice(&[x, y, t]);
                }
            }
            let bpts = Mat::from_vec(4 * m, 3, bc);
            let btargets = tabulate(&bpts, comps, |p| task.boundary(p).expect("dirichlet"));
            Ok(PointSets {
                collocation,
                initial: Some(Labeled { points, targets }),
                boundary: BoundarySet::Dirichlet(Labeled {
                    points: bpts,
                    targets: btargets,
                }),
            })
        }
        SystemKind::Kovasznay => {
            let total = LATTICE * LATTICE;
            if budget.collocation > total || budget.boundary_per_face > LATTICE {
                return Err(Error::Config(alloc::format!(
                    "lattice has {total} nodes and {LATTICE} per face; asked for {} and {}",
                    budget.collocation, budget.boundary_per_face
                )));
            }
            let picks = index::sample(&mut rng, total, budget.collocation);
            let mut cdata = Vec::with_capacity(2 * budget.collocation);
            for k in picks.iter() {
                cdata.extend_from_slice(&[lattice(k / LATTICE), lattice(k % LATTICE)]);
            }
            let collocation = Mat::from_vec(budget.collocation, 2, cdata);
            let m = budget.boundary_per_face;
            let mut bc = Vec::with_capacity(8 * m);
            for face in 0..4 {
                for k in index::sample(&mut rng, LATTICE, m).iter() {
                    let fixed = if face % 2 == 0 { 0.0 } else { 1.0 };
                    let a = lattice(k);
                    let (x, y) = if face < 2 { (fixed, a) } else { (a, fixed) };
                    bc.extend_from_slice(&[x, y]);
                }
            }
            let bpts = Mat::from_vec(4 * m, 2, bc);
            let btargets = tabulate(&bpts, comps, |p| task.boundary(p).expect("dirichlet"));
            Ok(PointSets {
                collocation,
                initial: None,
                boundary: BoundarySet::Dirichlet(Labeled {
                    points: bpts,
                    targets: btargets,
                }),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_budgets() {
        let k = SystemKind::Kovasznay;
        let p = make_point_sets(&k.base_task(), &PointBudget::standard(k), 1).unwrap();
        assert_eq!(p.collocation.rows(), 2601);
        assert_eq!(p.boundary.len(), 320);
        assert!(p.initial.is_none());

        let k = SystemKind::Burgers1d;
        let p = make_point_sets(&k.base_task(), &PointBudget::standard(k), 1).unwrap();
        assert_eq!(p.initial.as_ref().unwrap().len(), 128);
        assert_eq!(p.collocation.rows(), 10_000);
        assert_eq!(p.boundary.len(), 200);

        let k = SystemKind::Burgers2d;
        let p = make_point_sets(&k.base_task(), &PointBudget::standard(k), 1).unwrap();
        assert_eq!(p.initial.as_ref().unwrap().len(), 500);
        assert_eq!(p.boundary.len(), 400);
    }

    #[test]
    fn points_lie_in_the_domain() {
        for k in SystemKind::ALL {
            let d = k.domain();
            let p = make_point_sets(&k.sample_task(4), &PointBudget::standard(k), 9).unwrap();
            assert!(p.all_points().iter().all(|q| d.contains(q)));
        }
    }

    #[test]
    fn kovasznay_collocation_has_no_duplicates() {
        let k = SystemKind::Kovasznay;
        let p = make_point_sets(&k.base_task(), &PointBudget::standard(k), 2).unwrap();
        let mut keys: Vec<(u64, u64)> = (0..p.collocation.rows())
            .map(|i| {
                let r = p.collocation.row(i);
                (r[0].to_bits(), r[1].to_bits())
            })
            .collect();
        keys.sort_unstable();
        keys.dedup();
        assert_eq!(keys.len(), 2601);
    }

    #[test]
    fn initial_targets_follow_the_task() {
        let task = SystemKind::Burgers1d.base_task();
        let p = make_point_sets(&task, &PointBudget::standard(SystemKind::Burgers1d), 0).unwrap();
        let Task::Burgers1d { u0 } = &task else { unreachable!() };
        assert_eq!(p.initial.unwrap().targets.as_slice(), &u0[..]);
    }

    #[test]
    fn oversized_lattice_budget_is_rejected() {
        let k = SystemKind::Kovasznay;
        let b = PointBudget {
            collocation: 20_000,
            ..PointBudget::standard(k)
        };
        assert!(make_point_sets(&k.base_task(), &b, 0).is_err());
    }
}
