//! Slab-exit decay curves.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::Proportion;
use crate::error::{config_err, Result};
use crate::walk::{simulate_slab_exit, Ensemble, Slab, SlabSide};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TGammaRow {
    #[serde(rename = "L")]
    pub width: f64,
    pub n_left: usize,
    pub n_right: usize,
    /// Walks still inside the slab after `max_steps`.
    pub n_censored: usize,
    /// `n_left / (n_left + n_right)` with Wilson interval; `None` if every walk was censored.
    pub p_left: Option<Proportion>,
    pub log_p_left: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TGammaCurve {
    pub normal: Vec<f64>,
    pub b: f64,
    pub rows: Vec<TGammaRow>,
    /// Least-squares slope of `log p_left` against `L` over rows with `p_left > 0`.
    pub log_slope: Option<f64>,
}

/// Left-exit frequencies of the slabs `U_{l',b,L}` for each `L`, using walker `i`
/// of `ensemble` (same seed and environment) for every `L`.
pub fn t_gamma_curve(ensemble: &Ensemble, normal: &[f64], b: f64, widths: &[f64], max_steps: usize) -> Result<TGammaCurve> {
    if widths.windows(2).any(|w| w[1] <= w[0]) {
        return config_err("slab widths must be strictly increasing");
    }
    if normal.len() != ensemble.model.dimension() {
        return config_err("slab normal dimension does not match the model");
    }
    let mut rows = Vec::with_capacity(widths.len());
    for &width in widths {
        let slab = Slab::new(normal.to_vec(), b, width)?;
        let sides: Vec<Option<SlabSide>> = (0..ensemble.n_walks)
            .into_par_iter()
            .map(|i| simulate_slab_exit(&ensemble.environment(i), ensemble.walker_seed(i), &slab, max_steps).side())
            .collect();
        let n_left = sides.iter().filter(|s| **s == Some(SlabSide::Left)).count();
        let n_right = sides.iter().filter(|s| **s == Some(SlabSide::Right)).count();
        let p_left = Proportion::new(n_left, n_left + n_right);
        rows.push(TGammaRow {
            width,
            n_left,
            n_right,
            n_censored: sides.len() - n_left - n_right,
            log_p_left: p_left.filter(|p| p.p > 0.0).map(|p| p.p.ln()),
            p_left,
        });
    }
    let pts: Vec<(f64, f64)> = rows.iter().filter_map(|r| r.log_p_left.map(|y| (r.width, y))).collect();
    Ok(TGammaCurve { normal: normal.to_vec(), b, log_slope: least_squares_slope(&pts), rows })
}

fn least_squares_slope(pts: &[(f64, f64)]) -> Option<f64> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::EnvironmentModel;
    use crate::oracle::gamblers_ruin;

    #[test]
    fn one_dimensional_left_exit_matches_ruin() {
        let ens = Ensemble::new(EnvironmentModel::homogeneous(vec![0.7, 0.3]).unwrap(), 17, 40_000, 0).unwrap();
        let curve = t_gamma_curve(&ens, &[1.0], 1.0, &[2.0], 1000).unwrap();
        let p = curve.rows[0].p_left.unwrap();
        let exact = 1.0 - gamblers_ruin(0.7, 2, 2);
        assert!((exact - 9.0 / 58.0).abs() < 1e-12);
        assert!((p.p - exact).abs() < 3.0 * (exact * (1.0 - exact) / p.n as f64).sqrt(), "{p:?}");
    }

    #[test]
    fn slope_of_exact_line() {
        let s = least_squares_slope(&[(1.0, -0.5), (2.0, -1.0), (4.0, -2.0)]).unwrap();
        assert!((s + 0.5).abs() < 1e-12);
        assert!(least_squares_slope(&[(1.0, 0.0)]).is_none());
    }

    #[test]
    fn widths_must_increase() {
        let ens = Ensemble::new(EnvironmentModel::symmetric(2).unwrap(), 1, 10, 0).unwrap();
        assert!(t_gamma_curve(&ens, &[1.0, 0.0], 1.0, &[5.0, 5.0], 100).is_err());
        assert!(t_gamma_curve(&ens, &[1.0, 0.0], 0.0, &[5.0], 100).is_err());
    }

    #[test]
    fn censored_walks_are_counted() {
        let ens = Ensemble::new(EnvironmentModel::symmetric(2).unwrap(), 1, 50, 0).unwrap();
        let curve = t_gamma_curve(&ens, &[1.0, 0.0], 1.0, &[1000.0], 3).unwrap();
        assert_eq!(curve.rows[0].n_censored, 50);
        assert!(curve.rows[0].p_left.is_none());
    }
}
