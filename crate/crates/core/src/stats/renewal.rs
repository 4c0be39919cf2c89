//! Statistics of cone renewal increments: the expectation identity linking the
//! mean renewal step to cone-survival and level-hitting probabilities,
//! orthogonal oscillation, and serial independence.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::transience::{classify_levels, Thresholds, WalkClass};
use super::{percentile_interval, MeanCi, Outcome, Proportion, Z95};
use crate::cone::{ConeSpec, RenewalRecord};
use crate::env::SiteCoord;
use crate::error::{Error, Result};
use crate::rng;
use crate::walk::Trajectory;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BootstrapConfig {
    pub resamples: usize,
    pub seed: u64,
    pub level: f64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig { resamples: 400, seed: 0x5eed, level: 0.95 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lemma5Report {
    /// Mean of `(X_{τ_{k+1}} - X_{τ_k}) · l`, `k ≥ 1`, pooled over walks.
    pub lhs: MeanCi,
    /// Fraction of walks classified into `A_l` that never left `C_l` up to the horizon.
    pub p_cone: Proportion,
    /// Window average of the fraction of walks whose first passage above `i - 1`
    /// lands exactly on level `i`.
    pub hit_level_prob: f64,
    pub hit_level_ci: (f64, f64),
    /// `1 / (p_cone · hit_level_prob)`.
    pub rhs: f64,
    pub ratio: f64,
    pub ratio_ci: (f64, f64),
    pub window: (i64, i64),
    pub n_walks: usize,
    pub n_transient: usize,
    pub n_increments: usize,
}

/// Per-walk sufficient statistics; the bootstrap resamples these.
#[derive(Clone, Copy, Default)]
struct WalkSummary {
    transient: bool,
    stays_in_cone: bool,
    inc_sum: f64,
    inc_sum2: f64,
    inc_count: usize,
    hits_in_window: usize,
}

struct Totals {
    n: usize,
    transient: usize,
    stays: usize,
    inc_sum: f64,
    inc_sum2: f64,
    inc_count: usize,
    hits: usize,
}

impl Totals {
    fn of<'a>(walks: impl Iterator<Item = &'a WalkSummary>) -> Totals {
        let mut t = Totals { n: 0, transient: 0, stays: 0, inc_sum: 0.0, inc_sum2: 0.0, inc_count: 0, hits: 0 };
        for w in walks {
            t.n += 1;
            if w.transient {
                t.transient += 1;
                t.stays += usize::from(w.stays_in_cone);
            }
            t.inc_sum += w.inc_sum;
            t.inc_sum2 += w.inc_sum2;
            t.inc_count += w.inc_count;
            t.hits += w.hits_in_window;
        }
        t
    }

    fn ratio(&self, window_len: usize) -> Option<f64> {
        if self.transient == 0 || self.inc_count == 0 || self.hits == 0 {
            return None;
        }
        let lhs = self.inc_sum / self.inc_count as f64;
        let p_cone = self.stays as f64 / self.transient as f64;
        let hit = self.hits as f64 / (self.n * window_len) as f64;
        Some(lhs * p_cone * hit)
    }
}

/// Checks `E[(X_{τ_2} - X_{τ_1})·l] = 1 / (P(D_{C_l} = ∞ | A_l) · lim_i P(X_{T_{i-1}}·l = i))`
/// on an ensemble.
///
/// `window` is the level range `[i_min, i_max]` averaged in place of the limit
/// `i → ∞`; by default the top half of the levels reached by every walk
/// classified into `A_l`.
pub fn lemma5_two_sided_check(
    trajs: &[Trajectory],
    records: &[RenewalRecord],
    spec: &ConeSpec,
    window: Option<(i64, i64)>,
    th: &Thresholds,
    boot: &BootstrapConfig,
) -> Result<Outcome<Lemma5Report>> {
    if trajs.len() != records.len() {
        return Err(Error::Precondition(format!("{} paths but {} renewal records", trajs.len(), records.len())));
    }
    if trajs.is_empty() {
        return Ok(Outcome::insufficient("empty ensemble"));
    }
    let l = spec.direction();
    let n_max = trajs.iter().map(|t| t.len()).max().unwrap_or(0);
    let (level, dip) = th.resolve(n_max);
    let origin = SiteCoord::origin(spec.dim());

    // First pass: classification, cone survival, renewal increments, top level.
    let first: Vec<(WalkSummary, i64, Vec<i64>)> = trajs
        .par_iter()
        .zip(records)
        .map(|(t, r)| {
            let levels = t.levels(l);
            let levels_f: Vec<f64> = levels.iter().map(|&v| v as f64).collect();
            let transient = classify_levels(&levels_f, level, dip) == WalkClass::Plus;
            let stays_in_cone = t.positions().iter().all(|x| spec.contains(&origin, x));
            let incs: Vec<f64> = r.increments().iter().map(|x| x.dot(l) as f64).collect();
            let mut fresh_levels = Vec::new();
            let mut best = 0;
            for &v in &levels[1..] {
                if v > best {
                    best = v;
                    fresh_levels.push(v);
                }
            }
            let s = WalkSummary {
                transient,
                stays_in_cone,
                inc_sum: incs.iter().sum(),
                inc_sum2: incs.iter().map(|x| x * x).sum(),
                inc_count: incs.len(),
                hits_in_window: 0,
            };
            (s, best, fresh_levels)
        })
        .collect();

    let (i_min, i_max) = match window {
        Some(w) => w,
        None => {
            let Some(top) = first.iter().filter(|f| f.0.transient).map(|f| f.1).min() else {
                return Ok(Outcome::insufficient("no walk classified transient in direction l"));
            };
            (top / 2 + 1, top)
        }
    };
    if i_min < 1 || i_min > i_max {
        return Ok(Outcome::insufficient(format!("empty level window [{i_min}, {i_max}]")));
    }
    let window_len = (i_max - i_min + 1) as usize;

    let walks: Vec<WalkSummary> = first
        .into_iter()
        .map(|(mut s, _, fresh)| {
            // The first passage above i - 1 lands on i exactly when i is a fresh-maximum level.
            s.hits_in_window = fresh.iter().filter(|&&v| v >= i_min && v <= i_max).count();
            s
        })
        .collect();
    let totals = Totals::of(walks.iter());
    if totals.transient == 0 {
        return Ok(Outcome::insufficient("no walk classified transient in direction l"));
    }
    if totals.inc_count < 2 {
        return Ok(Outcome::insufficient(format!("{} renewal increments", totals.inc_count)));
    }
    if totals.hits == 0 {
        return Ok(Outcome::insufficient("no first passage lands in the level window"));
    }
    if totals.stays == 0 {
        return Ok(Outcome::insufficient("no transient walk stayed in the cone"));
    }
    let lhs = MeanCi::from_moments(totals.inc_count, totals.inc_sum, totals.inc_sum2).expect("nonempty");
    let p_cone = Proportion::new(totals.stays, totals.transient).expect("nonempty");
    let hit = totals.hits as f64 / (totals.n * window_len) as f64;
    let rhs = 1.0 / (p_cone.p * hit);
    let ratio = lhs.mean / rhs;

    let mut stream = rng::aux_stream(boot.seed, 0x1e55a5);
    let n = walks.len();
    let mut ratios = Vec::with_capacity(boot.resamples);
    let mut hits = Vec::with_capacity(boot.resamples);
    for _ in 0..boot.resamples {
        let sample: Vec<&WalkSummary> = (0..n).map(|_| &walks[stream.random_range(0..n)]).collect();
        let t = Totals::of(sample.into_iter());
        if let Some(r) = t.ratio(window_len) {
            ratios.push(r);
        }
        hits.push(t.hits as f64 / (t.n * window_len) as f64);
    }
    let ratio_ci = if ratios.is_empty() { (f64::NAN, f64::NAN) } else { percentile_interval(&mut ratios, boot.level) };
    let hit_level_ci = percentile_interval(&mut hits, boot.level);

    Ok(Outcome::Ok(Lemma5Report {
        lhs,
        p_cone,
        hit_level_prob: hit,
        hit_level_ci,
        rhs,
        ratio,
        ratio_ci,
        window: (i_min, i_max),
        n_walks: n,
        n_transient: totals.transient,
        n_increments: totals.inc_count,
    }))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OscillationReport {
    pub l_star: Vec<i64>,
    pub mean_increment: MeanCi,
    pub sign_changes: usize,
    pub minimum: f64,
    pub maximum: f64,
    pub n_increments: usize,
    /// All projected increments are zero.
    pub degenerate: bool,
}

/// Partial sums of renewal increments projected on `l_star ⊥ l`, pooled over
/// walks in record order.
pub fn orthogonal_oscillation(records: &[RenewalRecord], l: &[i64], l_star: &[i64]) -> Result<Outcome<OscillationReport>> {
    if l.len() != l_star.len() {
        return Err(Error::Precondition("l and l_star differ in dimension".into()));
    }
    let dot: i128 = l.iter().zip(l_star).map(|(&a, &b)| a as i128 * b as i128).sum();
    if dot != 0 {
        return Err(Error::Precondition(format!("l_star . l = {dot}, not 0")));
    }
    let proj: Vec<f64> = records
        .iter()
        .flat_map(|r| r.increments())
        .map(|x| x.dot(l_star) as f64)
        .collect();
    let Some(mean) = MeanCi::from_samples(proj.iter().copied()) else {
        return Ok(Outcome::insufficient("no renewal increments"));
    };
    let mut sum = 0.0;
    let (mut min, mut max) = (0.0f64, 0.0f64);
    let mut last_sign = 0i8;
    let mut changes = 0;
    for x in &proj {
        sum += x;
        min = min.min(sum);
        max = max.max(sum);
        let s = if sum > 0.0 { 1 } else if sum < 0.0 { -1 } else { 0 };
        if s != 0 {
            if last_sign != 0 && s != last_sign {
                changes += 1;
            }
            last_sign = s;
        }
    }
    Ok(Outcome::Ok(OscillationReport {
        l_star: l_star.to_vec(),
        degenerate: proj.iter().all(|&x| x == 0.0),
        mean_increment: mean,
        sign_changes: changes,
        minimum: min,
        maximum: max,
        n_increments: proj.len(),
    }))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoordinateCorrelation {
    pub coordinate: usize,
    /// Lag-1 autocorrelation; `None` when the coordinate never varies.
    pub correlation: Option<f64>,
    /// Fisher-z 95% interval.
    pub ci: Option<(f64, f64)>,
    pub n_pairs: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndependenceReport {
    pub coordinates: Vec<CoordinateCorrelation>,
    pub n_increments: usize,
    /// Every defined interval contains 0.
    pub pass: bool,
}

/// Minimum number of increments for [`independence_test`].
pub const MIN_INDEPENDENCE_INCREMENTS: usize = 100;

/// Lag-1 autocorrelation of each coordinate of the increment sequences.
/// Pairs are formed within a sequence only; sequences are pooled.
pub fn independence_test(sequences: &[Vec<SiteCoord>]) -> Outcome<IndependenceReport> {
    let n_increments: usize = sequences.iter().map(|s| s.len()).sum();
    if n_increments < MIN_INDEPENDENCE_INCREMENTS {
        return Outcome::insufficient(format!("{n_increments} increments, need {MIN_INDEPENDENCE_INCREMENTS}"));
    }
    let dim = sequences.iter().find_map(|s| s.first()).map_or(0, |x| x.dim());
    let mut coordinates = Vec::with_capacity(dim);
    for k in 0..dim {
        let all: Vec<f64> = sequences.iter().flatten().map(|x| x.coords()[k] as f64).collect();
        let mean = all.iter().sum::<f64>() / all.len() as f64;
        let var: f64 = all.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / all.len() as f64;
        let mut cov = 0.0;
        let mut n_pairs = 0usize;
        for s in sequences {
            for w in s.windows(2) {
                cov += (w[0].coords()[k] as f64 - mean) * (w[1].coords()[k] as f64 - mean);
                n_pairs += 1;
            }
        }
        let (correlation, ci) = if var > 0.0 && n_pairs > 3 {
            let r = (cov / n_pairs as f64 / var).clamp(-0.999_999, 0.999_999);
            let z = r.atanh();
            let hw = Z95 / ((n_pairs - 3) as f64).sqrt();
            (Some(r), Some(((z - hw).tanh(), (z + hw).tanh())))
        } else {
            (None, None)
        };
        coordinates.push(CoordinateCorrelation { coordinate: k, correlation, ci, n_pairs });
    }
    let pass = coordinates.iter().all(|c| c.ci.is_none_or(|(lo, hi)| lo <= 0.0 && 0.0 <= hi));
    Outcome::Ok(IndependenceReport { coordinates, n_increments, pass })
}
