//! Asymptotic direction and speed estimators.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::transience::{classify_levels, Thresholds, WalkClass};
use super::{angle_between, normalize, MeanCi, Outcome};
use crate::cone::RenewalRecord;
use crate::error::{Error, Result};
use crate::walk::Trajectory;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DirectionRoute {
    /// Normalized mean of `X_N / |X_N|` over walks that moved away from the origin.
    RawLimit,
    /// Normalized mean of pooled renewal increments `X_{τ_{k+1}} - X_{τ_k}`.
    RenewalLln,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirectionEstimate {
    pub nu_hat: Vec<f64>,
    /// Mean angle (rad) between the contributing per-walk directions and `nu_hat`.
    pub dispersion: f64,
    pub n_samples: usize,
    pub n_walks: usize,
    pub route: DirectionRoute,
}

/// Input of [`estimate_direction`].
pub enum DirectionInput<'a> {
    /// Paths; a walk contributes when `|X_N|` reaches `min_norm`.
    Trajectories { trajs: &'a [Trajectory], min_norm: f64 },
    /// Renewal records; a walk contributes when it has at least two renewals.
    Renewals(&'a [RenewalRecord]),
}

pub fn estimate_direction(input: DirectionInput<'_>) -> Outcome<DirectionEstimate> {
    let (route, per_walk, n_samples): (_, Vec<Vec<f64>>, usize) = match input {
        DirectionInput::Trajectories { trajs, min_norm } => {
            let units: Vec<Vec<f64>> = trajs
                .iter()
                .map(|t| t.endpoint())
                .filter(|x| x.norm() > 0.0 && x.norm() >= min_norm)
                .map(|x| {
                    let n = x.norm();
                    x.coords().iter().map(|&c| c as f64 / n).collect()
                })
                .collect();
            let n = units.len();
            (DirectionRoute::RawLimit, units, n)
        }
        DirectionInput::Renewals(records) => {
            let mut n = 0;
            let sums: Vec<Vec<f64>> = records
                .iter()
                .filter(|r| r.len() >= 2)
                .map(|r| {
                    n += r.len() - 1;
                    // Increments telescope to X_{τ_last} - X_{τ_1}.
                    let total = r.positions[r.len() - 1].sub(&r.positions[0]);
                    total.coords().iter().map(|&c| c as f64).collect()
                })
                .collect();
            (DirectionRoute::RenewalLln, sums, n)
        }
    };
    if per_walk.is_empty() {
        return Outcome::insufficient("no contributing walks");
    }
    let dim = per_walk[0].len();
    let mut sum = vec![0.0; dim];
    for v in &per_walk {
        for (s, x) in sum.iter_mut().zip(v) {
            *s += x;
        }
    }
    let Some(nu_hat) = normalize(&sum) else {
        return Outcome::insufficient("contributions cancel to the zero vector");
    };
    let dispersion = per_walk
        .iter()
        .filter(|v| v.iter().any(|&x| x != 0.0))
        .map(|v| angle_between(v, &nu_hat))
        .sum::<f64>()
        / per_walk.len() as f64;
    Outcome::Ok(DirectionEstimate { nu_hat, dispersion, n_samples, n_walks: per_walk.len(), route })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpeedReport {
    pub direction: Vec<f64>,
    /// `X_N · l / N` over all walks.
    pub all: MeanCi,
    /// Restricted to walks classified into `A_l`.
    pub plus: Option<MeanCi>,
    /// Restricted to walks classified into `A_{-l}`.
    pub minus: Option<MeanCi>,
}

/// Mean of `X_N · l / N` with a normal interval, overall and per transience class.
pub fn estimate_speed(trajs: &[Trajectory], l: &[f64], th: &Thresholds) -> Result<SpeedReport> {
    if trajs.is_empty() {
        return Err(Error::Precondition("empty ensemble".into()));
    }
    if trajs.iter().any(|t| t.is_empty() || t.dim() != l.len()) {
        return Err(Error::Precondition("speed needs nonempty paths matching the direction".into()));
    }
    let n = trajs.iter().map(|t| t.len()).max().unwrap_or(0);
    let (level, dip) = th.resolve(n);
    let rows: Vec<(f64, WalkClass)> = trajs
        .iter()
        .map(|t| {
            let levels = t.levels_f64(l);
            (levels[t.len()] / t.len() as f64, classify_levels(&levels, level, dip))
        })
        .collect();
    let pick = |c: Option<WalkClass>| {
        MeanCi::from_samples(rows.iter().filter(|r| c.is_none_or(|c| r.1 == c)).map(|r| r.0))
    };
    Ok(SpeedReport {
        direction: l.to_vec(),
        all: pick(None).expect("nonempty"),
        plus: pick(Some(WalkClass::Plus)),
        minus: pick(Some(WalkClass::Minus)),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "result", rename_all = "snake_case")]
pub enum ClusterOutcome {
    Clusters {
        n_clusters: usize,
        centers: Vec<Vec<f64>>,
        sizes: Vec<usize>,
        max_deviation: f64,
        skipped_at_origin: usize,
    },
    NoDirectionalLimit {
        reason: String,
        max_deviation: f64,
    },
}

impl ClusterOutcome {
    pub fn n_clusters(&self) -> usize {
        match self {
            ClusterOutcome::Clusters { n_clusters, .. } => *n_clusters,
            ClusterOutcome::NoDirectionalLimit { .. } => 0,
        }
    }
}

/// Splits final directions `X_N / |X_N|` by the sign of their projection on the
/// leading axis of the second-moment matrix and checks that each group is tight
/// (within `th.cluster_tolerance` of its center) and that two centers are antipodal.
pub fn antipodal_clustering(trajs: &[Trajectory], th: &Thresholds) -> ClusterOutcome {
    let mut skipped = 0;
    let units: Vec<Vec<f64>> = trajs
        .iter()
        .filter_map(|t| {
            let x = t.endpoint();
            let n = x.norm();
            if n == 0.0 {
                skipped += 1;
                return None;
            }
            Some(x.coords().iter().map(|&c| c as f64 / n).collect())
        })
        .collect();
    if units.is_empty() {
        return ClusterOutcome::NoDirectionalLimit { reason: "no walk left the origin".into(), max_deviation: f64::NAN };
    }
    let d = units[0].len();
    let mut m = DMatrix::<f64>::zeros(d, d);
    for u in &units {
        for i in 0..d {
            for j in 0..d {
                m[(i, j)] += u[i] * u[j];
            }
        }
    }
    m /= units.len() as f64;
    let eig = SymmetricEigen::new(m);
    let lead = eig.eigenvalues.imax();
    let axis: Vec<f64> = eig.eigenvectors.column(lead).iter().copied().collect();

    let mut groups: [Vec<&Vec<f64>>; 2] = [Vec::new(), Vec::new()];
    for u in &units {
        let s: f64 = u.iter().zip(&axis).map(|(a, b)| a * b).sum();
        groups[usize::from(s < 0.0)].push(u);
    }
    groups.sort_by_key(|g| std::cmp::Reverse(g.len()));
    let mut centers = Vec::new();
    let mut sizes = Vec::new();
    let mut max_dev: f64 = 0.0;
    for g in groups.iter().filter(|g| !g.is_empty()) {
        let mut sum = vec![0.0; d];
        for u in g {
            for (s, x) in sum.iter_mut().zip(u.iter()) {
                *s += x;
            }
        }
        let Some(c) = normalize(&sum) else {
            return ClusterOutcome::NoDirectionalLimit { reason: "cluster mean vanishes".into(), max_deviation: f64::NAN };
        };
        for u in g {
            max_dev = max_dev.max(angle_between(u, &c));
        }
        centers.push(c);
        sizes.push(g.len());
    }
    if max_dev > th.cluster_tolerance {
        return ClusterOutcome::NoDirectionalLimit {
            reason: format!("final directions spread {max_dev:.3} rad > {}", th.cluster_tolerance),
            max_deviation: max_dev,
        };
    }
    if centers.len() == 2 {
        let neg: Vec<f64> = centers[1].iter().map(|x| -x).collect();
        let gap = angle_between(&centers[0], &neg);
        if gap > th.antipodal_tolerance {
            return ClusterOutcome::NoDirectionalLimit {
                reason: format!("two clusters {gap:.3} rad away from antipodal"),
                max_deviation: max_dev,
            };
        }
    }
    ClusterOutcome::Clusters {
        n_clusters: centers.len(),
        centers,
        sizes,
        max_deviation: max_dev,
        skipped_at_origin: skipped,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{Direction, EnvironmentModel};
    use crate::walk::Ensemble;

    fn straight(dim: usize, axis: i32, n: usize, seed: u64) -> Trajectory {
        Trajectory::from_signed_axes(dim, seed, &vec![axis; n]).unwrap()
    }

    #[test]
    fn straight_paths_give_exact_direction() {
        let trajs: Vec<_> = (0..10).map(|s| straight(2, 1, 50, s)).collect();
        let est = estimate_direction(DirectionInput::Trajectories { trajs: &trajs, min_norm: 1.0 }).unwrap();
        assert_eq!(est.nu_hat, vec![1.0, 0.0]);
        assert_eq!(est.dispersion, 0.0);
        assert_eq!(est.route, DirectionRoute::RawLimit);
    }

    #[test]
    fn origin_only_is_insufficient() {
        let trajs = vec![Trajectory::from_signed_axes(2, 0, &[1, -1]).unwrap()];
        assert!(!estimate_direction(DirectionInput::Trajectories { trajs: &trajs, min_norm: 0.0 }).is_ok());
        assert!(!estimate_direction(DirectionInput::Renewals(&[])).is_ok());
    }

    #[test]
    fn direction_is_equivariant_under_lattice_symmetries() {
        let ens = Ensemble::new(EnvironmentModel::dirichlet(vec![2.0, 1.0, 1.0, 1.5, 1.0, 1.0]).unwrap(), 4, 60, 800).unwrap();
        let trajs = ens.simulate();
        let base = estimate_direction(DirectionInput::Trajectories { trajs: &trajs, min_norm: 1.0 }).unwrap();

        let mirrored: Vec<_> = trajs.iter().map(|t| t.mirrored()).collect();
        let m = estimate_direction(DirectionInput::Trajectories { trajs: &mirrored, min_norm: 1.0 }).unwrap();
        assert_eq!(m.nu_hat, base.nu_hat.iter().map(|x| -x).collect::<Vec<_>>());

        // Cyclic coordinate permutation e1 -> e2 -> e3 -> e1 composed with a reflection of e2.
        let sym = |d: Direction| {
            let axis = (d.axis() + 1) % 3;
            let positive = if axis == 1 { !d.is_positive() } else { d.is_positive() };
            Direction::new(axis, positive)
        };
        let permuted: Vec<_> = trajs.iter().map(|t| t.map_steps(sym)).collect();
        let p = estimate_direction(DirectionInput::Trajectories { trajs: &permuted, min_norm: 1.0 }).unwrap();
        let expect = vec![base.nu_hat[2], -base.nu_hat[0], base.nu_hat[1]];
        assert_eq!(p.nu_hat, expect);
        assert_eq!(p.dispersion, base.dispersion);
    }

    #[test]
    fn speed_of_symmetric_walk_contains_zero() {
        let ens = Ensemble::new(EnvironmentModel::symmetric(1).unwrap(), 8, 500, 2000).unwrap();
        let r = estimate_speed(&ens.simulate(), &[1.0], &Thresholds::default()).unwrap();
        assert!(r.all.contains(0.0), "{r:?}");
    }

    #[test]
    fn speed_1d_drift() {
        let ens = Ensemble::new(EnvironmentModel::homogeneous(vec![0.7, 0.3]).unwrap(), 8, 1000, 10_000).unwrap();
        let r = estimate_speed(&ens.simulate(), &[1.0], &Thresholds::default()).unwrap();
        assert!((r.all.mean - 0.4).abs() <= 0.02, "{r:?}");
        assert_eq!(r.plus.unwrap().n, 1000);
        assert!(r.minus.is_none());
    }

    #[test]
    fn clustering_examples() {
        let th = Thresholds::default();
        let mut trajs: Vec<_> = (0..10).map(|s| straight(2, 1, 30, s)).collect();
        let one = antipodal_clustering(&trajs, &th);
        assert_eq!(one.n_clusters(), 1);
        trajs.extend((0..10).map(|s| straight(2, -1, 30, s)));
        match antipodal_clustering(&trajs, &th) {
            ClusterOutcome::Clusters { n_clusters, centers, .. } => {
                assert_eq!(n_clusters, 2);
                assert!((centers[0][0].abs() - 1.0).abs() < 1e-12);
                assert!((centers[0][0] + centers[1][0]).abs() < 1e-12);
            }
            other => panic!("{other:?}"),
        }
        // Two orthogonal groups are not antipodal.
        let mut ortho: Vec<_> = (0..10).map(|s| straight(2, 1, 30, s)).collect();
        ortho.extend((0..10).map(|s| straight(2, 2, 30, s)));
        assert_eq!(antipodal_clustering(&ortho, &th).n_clusters(), 0);
    }

    #[test]
    fn drifted_and_symmetric_clustering() {
        let th = Thresholds::default();
        let drifted = Ensemble::new(EnvironmentModel::homogeneous(vec![0.4, 0.1, 0.25, 0.25]).unwrap(), 3, 200, 5000)
            .unwrap()
            .simulate();
        match antipodal_clustering(&drifted, &th) {
            ClusterOutcome::Clusters { n_clusters: 1, centers, .. } => {
                assert!(angle_between(&centers[0], &[1.0, 0.0]) < 0.05);
            }
            other => panic!("{other:?}"),
        }
        let srw = Ensemble::new(EnvironmentModel::symmetric(2).unwrap(), 3, 200, 2000).unwrap().simulate();
        assert!(matches!(antipodal_clustering(&srw, &th), ClusterOutcome::NoDirectionalLimit { .. }));
    }
}
