//! Estimators and diagnostics over ensembles of trajectories and renewal records.
//!
//! Every verdict is three-valued or carries an explicit insufficient-data
//! variant; nothing is silently coerced to a boolean.

mod direction;
mod renewal;
mod slab;
mod transience;

pub use direction::{
    antipodal_clustering, estimate_direction, estimate_speed, ClusterOutcome, DirectionEstimate, DirectionInput,
    DirectionRoute, SpeedReport,
};
pub use renewal::{
    independence_test, lemma5_two_sided_check, orthogonal_oscillation, BootstrapConfig, CoordinateCorrelation,
    IndependenceReport, Lemma5Report, OscillationReport,
};
pub use slab::{t_gamma_curve, TGammaCurve, TGammaRow};
pub use transience::{
    classify_transience, classify_walk, zero_one_scan, AngleRow, AngleState, Thresholds, Transience,
    TransienceVerdict, WalkClass, ZeroOnePattern, ZeroOneScan,
};

use serde::{Deserialize, Serialize};

/// Two-sided 95% standard normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Result of an estimator that may lack the data to say anything.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Outcome<T> {
    Ok(T),
    InsufficientData { reason: String },
}

impl<T> Outcome<T> {
    pub fn insufficient(reason: impl Into<String>) -> Self {
        Outcome::InsufficientData { reason: reason.into() }
    }

    pub fn ok(self) -> Option<T> {
        match self {
            Outcome::Ok(t) => Some(t),
            Outcome::InsufficientData { .. } => None,
        }
    }

    pub fn is_ok(&self) -> bool {
        matches!(self, Outcome::Ok(_))
    }

    pub fn unwrap(self) -> T {
        match self {
            Outcome::Ok(t) => t,
            Outcome::InsufficientData { reason } => panic!("insufficient data: {reason}"),
        }
    }
}

/// Sample mean with a normal 95% interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanCi {
    pub mean: f64,
    pub sd: f64,
    pub n: usize,
    pub lo: f64,
    pub hi: f64,
}

impl MeanCi {
    pub fn from_samples(xs: impl IntoIterator<Item = f64>) -> Option<Self> {
        // Moments of x - x_0: a constant sample has mean exactly x_0 and sd 0.
        let mut xs = xs.into_iter();
        let shift = xs.next()?;
        let mut n = 1usize;
        let mut sum = 0.0;
        let mut sum2 = 0.0;
        for x in xs {
            n += 1;
            sum += x - shift;
            sum2 += (x - shift) * (x - shift);
        }
        let m = Self::from_moments(n, sum, sum2)?;
        let mean = shift + m.mean;
        Some(MeanCi { mean, lo: mean - m.half_width(), hi: mean + m.half_width(), ..m })
    }

    pub(crate) fn from_moments(n: usize, sum: f64, sum2: f64) -> Option<Self> {
        if n == 0 {
            return None;
        }
        let mean = sum / n as f64;
        let var = if n > 1 { ((sum2 - n as f64 * mean * mean) / (n - 1) as f64).max(0.0) } else { 0.0 };
        let sd = var.sqrt();
        let hw = Z95 * sd / (n as f64).sqrt();
        Some(MeanCi { mean, sd, n, lo: mean - hw, hi: mean + hw })
    }

    pub fn half_width(&self) -> f64 {
        (self.hi - self.lo) / 2.0
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

/// A binomial proportion with a Wilson 95% interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Proportion {
    pub successes: usize,
    pub n: usize,
    pub p: f64,
    pub lo: f64,
    pub hi: f64,
}

impl Proportion {
    pub fn new(successes: usize, n: usize) -> Option<Self> {
        if n == 0 {
            return None;
        }
        let nf = n as f64;
        let p = successes as f64 / nf;
        let z2 = Z95 * Z95;
        let denom = 1.0 + z2 / nf;
        let centre = (p + z2 / (2.0 * nf)) / denom;
        let hw = Z95 * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
        Some(Proportion {
            successes,
            n,
            p,
            lo: if successes == 0 { 0.0 } else { (centre - hw).max(0.0) },
            hi: if successes == n { 1.0 } else { (centre + hw).min(1.0) },
        })
    }

    /// Binomial standard error `sqrt(p(1-p)/n)`.
    pub fn sigma(&self) -> f64 {
        (self.p * (1.0 - self.p) / self.n as f64).sqrt()
    }
}

/// Percentile interval of a sample (sorted in place).
pub(crate) fn percentile_interval(xs: &mut [f64], level: f64) -> (f64, f64) {
    xs.sort_by(|a, b| a.total_cmp(b));
    let n = xs.len();
    let q = |p: f64| {
        let idx = ((n - 1) as f64 * p).round() as usize;
        xs[idx.min(n - 1)]
    };
    let a = (1.0 - level) / 2.0;
    (q(a), q(1.0 - a))
}

/// Sum in a canonical (sorted) order, so that permuting or negating the terms
/// cannot change the rounding.
pub(crate) fn canonical_sum(terms: impl IntoIterator<Item = f64>) -> f64 {
    let mut t: Vec<f64> = terms.into_iter().collect();
    t.sort_by(|a, b| a.abs().total_cmp(&b.abs()).then(a.total_cmp(b)));
    t.iter().sum()
}

pub(crate) fn angle_between(a: &[f64], b: &[f64]) -> f64 {
    let dot = canonical_sum(a.iter().zip(b).map(|(x, y)| x * y));
    let na = canonical_sum(a.iter().map(|x| x * x)).sqrt();
    let nb = canonical_sum(b.iter().map(|x| x * x)).sqrt();
    (dot / (na * nb)).clamp(-1.0, 1.0).acos()
}

pub(crate) fn normalize(v: &[f64]) -> Option<Vec<f64>> {
    let n = canonical_sum(v.iter().map(|x| x * x)).sqrt();
    if n > 0.0 && n.is_finite() {
        Some(v.iter().map(|x| x / n).collect())
    } else {
        None
    }
}
