//! Finite-horizon proxies for the transience events `A_l` and `A_{-l}`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::walk::Trajectory;

/// Tunable thresholds of the transience proxy and of direction clustering.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    /// Final level a walk must reach; default `2 √N`.
    pub level_threshold: Option<f64>,
    /// How far below `level_threshold` the last half of the path may dip; default half the threshold.
    pub dip_allowance: Option<f64>,
    /// Frequency at or above which `A_l` is declared to occur almost surely.
    pub plus_cutoff: f64,
    /// Frequency at or below which the opposite event is declared null.
    pub minus_cutoff: f64,
    /// Angular tolerance (rad) around a cluster center.
    pub cluster_tolerance: f64,
    /// Tolerance (rad) for two cluster centers to count as antipodal.
    pub antipodal_tolerance: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            level_threshold: None,
            dip_allowance: None,
            plus_cutoff: 0.99,
            minus_cutoff: 0.01,
            cluster_tolerance: 0.3,
            antipodal_tolerance: 0.05,
        }
    }
}

impl Thresholds {
    /// `(level_threshold, dip_allowance)` for paths of length `n`.
    pub fn resolve(&self, n: usize) -> (f64, f64) {
        let level = self.level_threshold.unwrap_or(2.0 * (n as f64).sqrt());
        let dip = self.dip_allowance.unwrap_or(level / 2.0);
        (level, dip)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WalkClass {
    Plus,
    Minus,
    Neither,
}

/// Classifies one walk: `Plus` if `X_N·l ≥ level` and `X_n·l ≥ level - dip`
/// throughout the last half of the path, `Minus` symmetrically, else `Neither`.
pub fn classify_walk(traj: &Trajectory, l: &[f64], level: f64, dip: f64) -> WalkClass {
    let levels = traj.levels_f64(l);
    classify_levels(&levels, level, dip)
}

pub(crate) fn classify_levels(levels: &[f64], level: f64, dip: f64) -> WalkClass {
    let n = levels.len() - 1;
    let last = levels[n];
    let tail = &levels[n.div_ceil(2)..];
    let floor = level - dip;
    if last >= level && tail.iter().all(|&v| v >= floor) {
        WalkClass::Plus
    } else if -last >= level && tail.iter().all(|&v| -v >= floor) {
        WalkClass::Minus
    } else {
        WalkClass::Neither
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transience {
    TransientPlus,
    TransientMinus,
    Undecided,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransienceVerdict {
    pub direction: Vec<f64>,
    pub verdict: Transience,
    pub p_hat_plus: f64,
    pub p_hat_minus: f64,
    pub n_walks: usize,
    pub level_threshold: f64,
    pub dip_allowance: f64,
    pub plus_cutoff: f64,
    pub minus_cutoff: f64,
}

/// Estimates `P_0(A_l)` and `P_0(A_{-l})` by the fraction of walks of each class.
/// Thresholds are resolved for the longest path in the ensemble.
pub fn classify_transience(trajs: &[Trajectory], l: &[f64], th: &Thresholds) -> Result<TransienceVerdict> {
    if trajs.is_empty() {
        return Err(Error::Precondition("empty ensemble".into()));
    }
    if trajs.iter().any(|t| t.dim() != l.len()) {
        return Err(Error::Config("direction dimension does not match paths".into()));
    }
    let n = trajs.iter().map(|t| t.len()).max().unwrap_or(0);
    let (level, dip) = th.resolve(n);
    let classes: Vec<WalkClass> = {
        use rayon::prelude::*;
        trajs.par_iter().map(|t| classify_walk(t, l, level, dip)).collect()
    };
    Ok(verdict_from_classes(l, &classes, level, dip, th))
}

fn verdict_from_classes(l: &[f64], classes: &[WalkClass], level: f64, dip: f64, th: &Thresholds) -> TransienceVerdict {
    let total = classes.len() as f64;
    let plus = classes.iter().filter(|c| **c == WalkClass::Plus).count() as f64 / total;
    let minus = classes.iter().filter(|c| **c == WalkClass::Minus).count() as f64 / total;
    let verdict = if plus >= th.plus_cutoff && minus <= th.minus_cutoff {
        Transience::TransientPlus
    } else if minus >= th.plus_cutoff && plus <= th.minus_cutoff {
        Transience::TransientMinus
    } else {
        Transience::Undecided
    };
    TransienceVerdict {
        direction: l.to_vec(),
        verdict,
        p_hat_plus: plus,
        p_hat_minus: minus,
        n_walks: classes.len(),
        level_threshold: level,
        dip_allowance: dip,
        plus_cutoff: th.plus_cutoff,
        minus_cutoff: th.minus_cutoff,
    }
}

/// Estimated value of `P_0(A_l)` at one grid angle.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AngleState {
    One,
    Zero,
    Intermediate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AngleRow {
    pub angle: f64,
    pub p_hat_plus: f64,
    pub p_hat_minus: f64,
    pub state: AngleState,
}

/// The possible shapes of `l ↦ P_0(A_l)` on the circle.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZeroOnePattern {
    /// `P_0(A_l) = 0` for every `l`.
    AllZero,
    /// `P_0(A_l) = 1` at exactly one grid direction.
    SingleDirection,
    /// `P_0(A_l) = 1` exactly on an open half-plane `{l · ν > 0}`.
    OpenHalfSpace,
    Inconsistent,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZeroOneScan {
    pub rows: Vec<AngleRow>,
    pub pattern: ZeroOnePattern,
    /// Center of the half-plane when the pattern is `OpenHalfSpace` or `SingleDirection`.
    pub nu: Option<Vec<f64>>,
}

/// Classifies transience along `n_angles` equally spaced directions of the
/// plane and labels the resulting pattern.
pub fn zero_one_scan(trajs: &[Trajectory], n_angles: usize, th: &Thresholds) -> Result<ZeroOneScan> {
    if trajs.iter().any(|t| t.dim() != 2) {
        return Err(Error::Precondition("zero-one scan needs d = 2".into()));
    }
    if n_angles < 3 {
        return Err(Error::Config("zero-one scan needs at least 3 angles".into()));
    }
    let mut rows = Vec::with_capacity(n_angles);
    for j in 0..n_angles {
        let angle = std::f64::consts::TAU * j as f64 / n_angles as f64;
        let v = classify_transience(trajs, &[angle.cos(), angle.sin()], th)?;
        let state = if v.p_hat_plus >= th.plus_cutoff {
            AngleState::One
        } else if v.p_hat_plus <= th.minus_cutoff {
            AngleState::Zero
        } else {
            AngleState::Intermediate
        };
        rows.push(AngleRow { angle, p_hat_plus: v.p_hat_plus, p_hat_minus: v.p_hat_minus, state });
    }
    let (pattern, nu) = label_pattern(&rows);
    Ok(ZeroOneScan { rows, pattern, nu })
}

fn label_pattern(rows: &[AngleRow]) -> (ZeroOnePattern, Option<Vec<f64>>) {
    if rows.iter().any(|r| r.state == AngleState::Intermediate) {
        return (ZeroOnePattern::Inconsistent, None);
    }
    let ones: Vec<&AngleRow> = rows.iter().filter(|r| r.state == AngleState::One).collect();
    match ones.len() {
        0 => return (ZeroOnePattern::AllZero, None),
        1 => {
            let a = ones[0].angle;
            return (ZeroOnePattern::SingleDirection, Some(vec![a.cos(), a.sin()]));
        }
        _ => {}
    }
    let sum = ones.iter().fold([0.0, 0.0], |acc, r| [acc[0] + r.angle.cos(), acc[1] + r.angle.sin()]);
    let Some(nu) = super::normalize(&sum) else {
        return (ZeroOnePattern::Inconsistent, None);
    };
    let matches = rows.iter().all(|r| {
        let positive = r.angle.cos() * nu[0] + r.angle.sin() * nu[1] > 1e-9;
        positive == (r.state == AngleState::One)
    });
    if matches {
        (ZeroOnePattern::OpenHalfSpace, Some(nu))
    } else {
        (ZeroOnePattern::Inconsistent, None)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::EnvironmentModel;
    use crate::walk::Ensemble;

    fn drifted(n_walks: usize, horizon: usize) -> Vec<Trajectory> {
        Ensemble::new(EnvironmentModel::homogeneous(vec![0.4, 0.1, 0.25, 0.25]).unwrap(), 21, n_walks, horizon)
            .unwrap()
            .simulate()
    }

    fn srw(n_walks: usize, horizon: usize) -> Vec<Trajectory> {
        Ensemble::new(EnvironmentModel::symmetric(2).unwrap(), 22, n_walks, horizon).unwrap().simulate()
    }

    #[test]
    fn drifted_walk_verdicts() {
        let trajs = drifted(300, 10_000);
        let th = Thresholds::default();
        let v = classify_transience(&trajs, &[1.0, 0.0], &th).unwrap();
        assert_eq!(v.verdict, Transience::TransientPlus, "{v:?}");
        assert!(v.p_hat_plus + v.p_hat_minus <= 1.0);
        let v = classify_transience(&trajs, &[0.0, 1.0], &th).unwrap();
        assert_eq!(v.verdict, Transience::Undecided, "{v:?}");
        let v = classify_transience(&trajs, &[-1.0, 0.0], &th).unwrap();
        assert_eq!(v.verdict, Transience::TransientMinus);
    }

    #[test]
    fn srw_is_undecided() {
        let v = classify_transience(&srw(200, 4000), &[1.0, 0.0], &Thresholds::default()).unwrap();
        assert_eq!(v.verdict, Transience::Undecided);
        assert!((v.p_hat_plus - v.p_hat_minus).abs() < 0.05);
    }

    #[test]
    fn mirror_swaps_verdicts_exactly() {
        let trajs = drifted(100, 3000);
        let mirrored: Vec<_> = trajs.iter().map(|t| t.mirrored()).collect();
        let th = Thresholds::default();
        for l in [[1.0, 0.0], [0.3, -0.7], [0.0, 1.0]] {
            let a = classify_transience(&trajs, &l, &th).unwrap();
            let b = classify_transience(&mirrored, &l, &th).unwrap();
            assert_eq!(a.p_hat_plus, b.p_hat_minus);
            assert_eq!(a.p_hat_minus, b.p_hat_plus);
            let swapped = match a.verdict {
                Transience::TransientPlus => Transience::TransientMinus,
                Transience::TransientMinus => Transience::TransientPlus,
                Transience::Undecided => Transience::Undecided,
            };
            assert_eq!(b.verdict, swapped);
        }
    }

    #[test]
    fn empty_ensemble_is_rejected() {
        assert!(matches!(
            classify_transience(&[], &[1.0], &Thresholds::default()),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn walk_rule() {
        let up: Vec<f64> = (0..=100).map(f64::from).collect();
        assert_eq!(classify_levels(&up, 20.0, 10.0), WalkClass::Plus);
        let down: Vec<f64> = up.iter().map(|v| -v).collect();
        assert_eq!(classify_levels(&down, 20.0, 10.0), WalkClass::Minus);
        // Ends high but dipped below level - dip during the last half.
        let mut dip = up.clone();
        dip[60] = 5.0;
        assert_eq!(classify_levels(&dip, 20.0, 10.0), WalkClass::Neither);
    }

    #[test]
    fn pattern_labels() {
        let mk = |states: &[AngleState]| -> Vec<AngleRow> {
            let n = states.len();
            states
                .iter()
                .enumerate()
                .map(|(j, &state)| AngleRow {
                    angle: std::f64::consts::TAU * j as f64 / n as f64,
                    p_hat_plus: 0.0,
                    p_hat_minus: 0.0,
                    state,
                })
                .collect()
        };
        use AngleState::*;
        assert_eq!(label_pattern(&mk(&[Zero; 8])).0, ZeroOnePattern::AllZero);
        assert_eq!(label_pattern(&mk(&[One, One, Zero, Zero, Zero, Zero, Zero, One])).0, ZeroOnePattern::OpenHalfSpace);
        assert_eq!(label_pattern(&mk(&[One, One, One, Zero, Zero, Zero, Zero, One])).0, ZeroOnePattern::OpenHalfSpace);
        assert_eq!(label_pattern(&mk(&[One, One, One, One, Zero, Zero, Zero, One])).0, ZeroOnePattern::Inconsistent);
        assert_eq!(label_pattern(&mk(&[One, Zero, One, Zero, Zero, Zero, Zero, Zero])).0, ZeroOnePattern::Inconsistent);
        assert_eq!(label_pattern(&mk(&[Zero, Zero, One, Zero, Zero, Zero, Zero, Zero])).0, ZeroOnePattern::SingleDirection);
        assert_eq!(label_pattern(&mk(&[One, Intermediate, Zero, Zero, Zero, Zero, Zero, One])).0, ZeroOnePattern::Inconsistent);
    }

    #[test]
    fn scan_needs_plane() {
        let trajs = Ensemble::new(EnvironmentModel::symmetric(3).unwrap(), 1, 3, 10).unwrap().simulate();
        assert!(zero_one_scan(&trajs, 8, &Thresholds::default()).is_err());
    }
}
