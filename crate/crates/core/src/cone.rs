//! Exact cone geometry and the cone renewal structure.
//!
//! A cone `C_σ(λ, l)` is the intersection of the half-spaces
//! `{x : (λ σ_k l_k + (1-λ) l) · x ≥ 0}`. With `λ = p/q` every defining vector is
//! stored multiplied by `q`, so membership is decided in integer arithmetic.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use num_integer::Integer;
use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::env::{check_dim, SiteCoord};
use crate::error::{config_err, Error, Result};
use crate::walk::Trajectory;

/// Bound on basis and direction entries; keeps every exact computation inside `i128`.
pub const MAX_ENTRY: i64 = 1 << 20;

type Q = Ratio<i128>;

/// An exact rational in `(0, 1]`.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Lambda {
    num: i64,
    den: i64,
}

impl Lambda {
    pub fn new(num: i64, den: i64) -> Result<Self> {
        if den <= 0 || num <= 0 || num > den || den > MAX_ENTRY {
            return config_err(format!("lambda {num}/{den} not a rational in (0, 1] with denominator <= {MAX_ENTRY}"));
        }
        let g = num.gcd(&den);
        Ok(Lambda { num: num / g, den: den / g })
    }

    pub fn one() -> Self {
        Lambda { num: 1, den: 1 }
    }

    pub fn num(&self) -> i64 {
        self.num
    }

    pub fn den(&self) -> i64 {
        self.den
    }

    pub fn as_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// `1, 1/2, 1/4, ...` with `count` entries.
    pub fn dyadic_grid(count: usize) -> Vec<Lambda> {
        (0..count.min(20)).map(|k| Lambda { num: 1, den: 1 << k }).collect()
    }
}

impl fmt::Display for Lambda {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == 1 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

impl fmt::Debug for Lambda {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Lambda({self})")
    }
}

impl FromStr for Lambda {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let parse = |t: &str| {
            t.trim()
                .parse::<i64>()
                .map_err(|_| Error::Config(format!("cannot parse lambda {s:?}")))
        };
        match s.split_once('/') {
            Some((n, d)) => Lambda::new(parse(n)?, parse(d)?),
            None => Lambda::new(parse(s)?, 1),
        }
    }
}

impl Serialize for Lambda {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Lambda {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// `σ`, basis `l_1..l_d`, interpolation `λ` and direction `l` of a cone `C_σ(λ, l)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConeSpec {
    sigma: Vec<i8>,
    basis: Vec<Vec<i64>>,
    lambda: Lambda,
    l: Vec<i64>,
    /// `p σ_k l_k + (q - p) l` for `λ = p/q`.
    normals: Vec<Vec<i64>>,
}

impl ConeSpec {
    /// Validates every invariant, including that `l` points strictly into `C_σ`
    /// (`l · v > 0` for every extreme ray `v` of `C_σ`).
    pub fn new(sigma: Vec<i8>, basis: Vec<Vec<i64>>, l: Vec<i64>, lambda: Lambda) -> Result<Self> {
        let spec = Self::relaxed(sigma, basis, l, lambda)?;
        let rays = spec.extreme_rays();
        if let Some(r) = rays.iter().find(|r| dot_q(r, &spec.l) <= Q::from_integer(0)) {
            return config_err(format!(
                "direction {:?} is not strictly inside C_sigma: l . v <= 0 for extreme ray {:?}",
                spec.l,
                r.iter().map(|q| q.to_string()).collect::<Vec<_>>()
            ));
        }
        Ok(spec)
    }

    /// As [`ConeSpec::new`] but without the strict-containment check on `l`.
    /// The resulting cone is still non-degenerate and exact.
    pub fn relaxed(sigma: Vec<i8>, basis: Vec<Vec<i64>>, l: Vec<i64>, lambda: Lambda) -> Result<Self> {
        let d = sigma.len();
        check_dim(d)?;
        if sigma.iter().any(|&s| s != 1 && s != -1) {
            return config_err("sigma entries must be +1 or -1");
        }
        if basis.len() != d || basis.iter().any(|v| v.len() != d) || l.len() != d {
            return config_err(format!("cone needs {d} basis vectors and a direction, all of length {d}"));
        }
        if basis.iter().flatten().chain(&l).any(|c| c.abs() > MAX_ENTRY) {
            return config_err(format!("cone entries must be bounded by {MAX_ENTRY} in magnitude"));
        }
        let g = l.iter().fold(0i64, |g, &c| g.gcd(&c));
        if g != 1 {
            return config_err(format!("direction {l:?} must have coprime coordinates (gcd {g})"));
        }
        if determinant(&to_q(&basis)) == Q::from_integer(0) {
            return config_err("cone basis is linearly dependent");
        }
        let normals = interpolated_normals(&sigma, &basis, &l, lambda);
        if determinant(&to_q(&normals)) == Q::from_integer(0) {
            return config_err(format!("defining vectors of C_sigma({lambda}, l) are linearly dependent"));
        }
        Ok(ConeSpec { sigma, basis, lambda, l, normals })
    }

    /// Same `σ`, basis and `l` with another `λ`.
    pub fn with_lambda(&self, lambda: Lambda) -> Result<Self> {
        let normals = interpolated_normals(&self.sigma, &self.basis, &self.l, lambda);
        if determinant(&to_q(&normals)) == Q::from_integer(0) {
            return config_err(format!("defining vectors of C_sigma({lambda}, l) are linearly dependent"));
        }
        Ok(ConeSpec { normals, lambda, ..self.clone() })
    }

    pub fn dim(&self) -> usize {
        self.sigma.len()
    }

    pub fn sigma(&self) -> &[i8] {
        &self.sigma
    }

    pub fn basis(&self) -> &[Vec<i64>] {
        &self.basis
    }

    pub fn lambda(&self) -> Lambda {
        self.lambda
    }

    pub fn direction(&self) -> &[i64] {
        &self.l
    }

    /// Integer defining vectors, scaled by the denominator of `λ`.
    pub fn normals(&self) -> &[Vec<i64>] {
        &self.normals
    }

    /// Extreme rays of `C_σ`: the columns of the inverse of the matrix with rows `σ_k l_k`.
    pub fn extreme_rays(&self) -> Vec<Vec<Q>> {
        let rows: Vec<Vec<i64>> = self
            .basis
            .iter()
            .zip(&self.sigma)
            .map(|(v, &s)| v.iter().map(|&c| c * s as i64).collect())
            .collect();
        let inv = inverse(&to_q(&rows)).expect("basis validated as independent");
        let d = self.dim();
        (0..d).map(|j| (0..d).map(|i| inv[i][j]).collect()).collect()
    }

    /// Whether `x ∈ apex + C_σ(λ, l)`.
    #[inline]
    pub fn contains(&self, apex: &SiteCoord, x: &SiteCoord) -> bool {
        let (a, b) = (apex.coords(), x.coords());
        self.normals.iter().all(|n| {
            n.iter()
                .zip(a.iter().zip(b))
                .map(|(&c, (&p, &q))| c as i128 * (q as i128 - p as i128))
                .sum::<i128>()
                >= 0
        })
    }
}

fn interpolated_normals(sigma: &[i8], basis: &[Vec<i64>], l: &[i64], lambda: Lambda) -> Vec<Vec<i64>> {
    let (p, q) = (lambda.num, lambda.den);
    basis
        .iter()
        .zip(sigma)
        .map(|(lk, &s)| lk.iter().zip(l).map(|(&a, &b)| p * s as i64 * a + (q - p) * b).collect())
        .collect()
}

fn to_q(m: &[Vec<i64>]) -> Vec<Vec<Q>> {
    m.iter().map(|r| r.iter().map(|&c| Q::from_integer(c as i128)).collect()).collect()
}

fn dot_q(a: &[Q], b: &[i64]) -> Q {
    a.iter().zip(b).fold(Q::from_integer(0), |acc, (x, &y)| acc + x * Q::from_integer(y as i128))
}

/// Exact determinant by fraction-valued elimination.
fn determinant(m: &[Vec<Q>]) -> Q {
    let n = m.len();
    let mut a = m.to_vec();
    let mut det = Q::from_integer(1);
    for col in 0..n {
        let Some(piv) = (col..n).find(|&r| a[r][col] != Q::from_integer(0)) else {
            return Q::from_integer(0);
        };
        if piv != col {
            a.swap(piv, col);
            det = -det;
        }
        det *= a[col][col];
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            for c in col..n {
                let v = a[col][c];
                a[r][c] -= f * v;
            }
        }
    }
    det
}

/// Exact Gauss-Jordan inverse; `None` if singular.
fn inverse(m: &[Vec<Q>]) -> Option<Vec<Vec<Q>>> {
    let n = m.len();
    let zero = Q::from_integer(0);
    let mut a: Vec<Vec<Q>> = m
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut row = r.clone();
            row.extend((0..n).map(|j| Q::from_integer(i128::from(i == j))));
            row
        })
        .collect();
    for col in 0..n {
        let piv = (col..n).find(|&r| a[r][col] != zero)?;
        a.swap(piv, col);
        let p = a[col][col];
        for c in 0..2 * n {
            a[col][c] /= p;
        }
        for r in 0..n {
            if r != col && a[r][col] != zero {
                let f = a[r][col];
                for c in 0..2 * n {
                    let v = a[col][c];
                    a[r][c] -= f * v;
                }
            }
        }
    }
    Some(a.into_iter().map(|r| r[n..].to_vec()).collect())
}

/// Whether `x ∈ apex + C_σ(λ, l)`.
pub fn cone_contains(spec: &ConeSpec, apex: &SiteCoord, x: &SiteCoord) -> bool {
    spec.contains(apex, x)
}

fn check_direction(l: &[i64], dim: usize) -> Result<()> {
    if l.len() != dim || l.iter().all(|&c| c == 0) {
        return config_err(format!("direction {l:?} must be nonzero with {dim} coordinates"));
    }
    let g = l.iter().fold(0i64, |g, &c| g.gcd(&c));
    if g != 1 {
        return config_err(format!("direction {l:?} must have coprime coordinates"));
    }
    Ok(())
}

/// Times `n ≥ 1` at which `X_n · l` exceeds every earlier level (and hence 0).
pub fn fresh_maxima(traj: &Trajectory, l: &[i64]) -> Result<Vec<usize>> {
    check_direction(l, traj.dim())?;
    let levels = traj.levels(l);
    let mut best = levels[0];
    let mut out = Vec::new();
    for (n, &v) in levels.iter().enumerate().skip(1) {
        if v > best {
            best = v;
            out.push(n);
        }
    }
    Ok(out)
}

/// Confirmed cone renewal times of one path.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenewalRecord {
    #[serde(rename = "tau")]
    pub times: Vec<usize>,
    pub positions: Vec<SiteCoord>,
    #[serde(rename = "H")]
    pub confirm_horizon: usize,
    /// A candidate was still inside its cone when the path ended before its
    /// confirmation window closed. It is not in `times`.
    pub censored_tail: bool,
    pub n_steps: usize,
}

impl RenewalRecord {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// `X_{τ_{k+1}} - X_{τ_k}` for consecutive confirmed renewals (the segment
    /// before `τ_1` is excluded).
    pub fn increments(&self) -> Vec<SiteCoord> {
        self.positions.windows(2).map(|w| w[1].sub(&w[0])).collect()
    }

    /// `τ_{k+1} - τ_k`.
    pub fn durations(&self) -> Vec<usize> {
        self.times.windows(2).map(|w| w[1] - w[0]).collect()
    }

    pub fn mirrored(&self) -> RenewalRecord {
        RenewalRecord { positions: self.positions.iter().map(|p| p.neg()).collect(), ..self.clone() }
    }
}

/// Sliding minimum of `values[n..=min(N, n + h)]` for every `n`.
fn forward_window_min(values: &[i128], h: usize) -> Vec<i128> {
    let n = values.len();
    let mut out = vec![0; n];
    let mut dq: VecDeque<usize> = VecDeque::new();
    for i in (0..n).rev() {
        while dq.back().is_some_and(|&j| values[j] >= values[i]) {
            dq.pop_back();
        }
        dq.push_back(i);
        while dq.front().is_some_and(|&j| j > i + h) {
            dq.pop_front();
        }
        out[i] = values[*dq.front().expect("just pushed")];
    }
    out
}

/// Cone renewal times of `traj` with respect to `spec`, confirmed over `confirm_horizon` steps.
///
/// Runs the `S_k / R_k / M_k` recursion: `S` is the first time the level `X·l`
/// exceeds the running maximum `M`, `R` the first exit from `X_S + C` after `S`.
/// A candidate with no exit during `(S, S + H]` is a renewal; the recursion
/// then restarts from it. A candidate whose window runs past the end of the
/// path without an exit sets `censored_tail` and ends the scan.
pub fn detect_renewals(traj: &Trajectory, spec: &ConeSpec, confirm_horizon: usize) -> Result<RenewalRecord> {
    if confirm_horizon == 0 {
        return config_err("confirm_horizon must be at least 1");
    }
    if spec.dim() != traj.dim() {
        return config_err("cone and path dimensions differ");
    }
    let pos = traj.positions();
    let n_steps = traj.len();
    let levels = traj.levels(spec.direction());
    let proj: Vec<Vec<i128>> = spec
        .normals()
        .iter()
        .map(|v| pos.iter().map(|x| x.dot(v)).collect())
        .collect();
    let window_min: Vec<Vec<i128>> = proj.iter().map(|p| forward_window_min(p, confirm_horizon)).collect();

    let mut times = Vec::new();
    let mut max_level = levels[0];
    let mut cursor = 0usize;
    let mut censored_tail = false;
    loop {
        // S: first time after `cursor` above the running maximum.
        let Some(s) = (cursor + 1..=n_steps).find(|&n| levels[n] > max_level) else {
            break;
        };
        let stays = (0..proj.len()).all(|k| window_min[k][s] >= proj[k][s]);
        if stays {
            if s + confirm_horizon <= n_steps {
                times.push(s);
                max_level = levels[s];
                cursor = s;
                continue;
            }
            censored_tail = true;
            break;
        }
        // R: first exit from X_S + C.
        let r = (s + 1..=n_steps)
            .find(|&m| (0..proj.len()).any(|k| proj[k][m] < proj[k][s]))
            .expect("window minimum below apex implies an exit");
        max_level = levels[cursor..=r].iter().copied().fold(max_level, i64::max);
        cursor = r;
    }
    let positions = times.iter().map(|&t| pos[t]).collect();
    Ok(RenewalRecord { times, positions, confirm_horizon, censored_tail, n_steps })
}

/// Renewal statistics for one `λ` of a scan.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LambdaRate {
    pub lambda: Lambda,
    pub renewals: usize,
    pub steps: usize,
    /// Confirmed renewals per 1000 steps.
    pub rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "result", rename_all = "snake_case")]
pub enum LambdaScan {
    Chosen { lambda: Lambda, table: Vec<LambdaRate> },
    NoRenewalsFound { table: Vec<LambdaRate> },
}

impl LambdaScan {
    pub fn lambda(&self) -> Option<Lambda> {
        match self {
            LambdaScan::Chosen { lambda, .. } => Some(*lambda),
            LambdaScan::NoRenewalsFound { .. } => None,
        }
    }

    pub fn table(&self) -> &[LambdaRate] {
        match self {
            LambdaScan::Chosen { table, .. } | LambdaScan::NoRenewalsFound { table } => table,
        }
    }
}

/// Default acceptance floor of [`lambda_scan`]: renewals per 1000 steps.
pub const DEFAULT_RATE_FLOOR: f64 = 0.5;

/// Measures the confirmed-renewal rate for each `λ` and picks the largest one
/// whose rate reaches `floor` (renewals per 1000 steps).
pub fn lambda_scan(
    trajs: &[Trajectory],
    base: &ConeSpec,
    grid: &[Lambda],
    confirm_horizon: usize,
    floor: f64,
) -> Result<LambdaScan> {
    use rayon::prelude::*;
    if grid.is_empty() {
        return Err(Error::Precondition("lambda grid is empty".into()));
    }
    let mut grid = grid.to_vec();
    grid.sort_by(|a, b| (b.num as i128 * a.den as i128).cmp(&(a.num as i128 * b.den as i128)));
    grid.dedup();
    let steps: usize = trajs.iter().map(|t| t.len()).sum();
    let mut table = Vec::with_capacity(grid.len());
    for &lambda in &grid {
        let spec = base.with_lambda(lambda)?;
        let counts = trajs
            .par_iter()
            .map(|t| detect_renewals(t, &spec, confirm_horizon).map(|r| r.len()))
            .collect::<Result<Vec<_>>>()?;
        let renewals: usize = counts.iter().sum();
        let rate = if steps == 0 { 0.0 } else { 1000.0 * renewals as f64 / steps as f64 };
        table.push(LambdaRate { lambda, renewals, steps, rate });
    }
    Ok(match table.iter().find(|r| r.rate >= floor) {
        Some(r) => LambdaScan::Chosen { lambda: r.lambda, table },
        None => LambdaScan::NoRenewalsFound { table },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{EnvironmentModel, QuenchedEnvironment};
    use crate::walk::simulate;
    use proptest::prelude::*;

    fn site(c: &[i64]) -> SiteCoord {
        SiteCoord::from_slice(c).unwrap()
    }

    fn path(dim: usize, steps: &[i32]) -> Trajectory {
        Trajectory::from_signed_axes(dim, 0, steps).unwrap()
    }

    fn wedge(lambda: Lambda) -> ConeSpec {
        ConeSpec::new(vec![1, 1], vec![vec![1, 1], vec![1, -1]], vec![1, 0], lambda).unwrap()
    }

    #[test]
    fn lambda_parsing() {
        assert_eq!("2/4".parse::<Lambda>().unwrap(), Lambda::new(1, 2).unwrap());
        assert_eq!("1".parse::<Lambda>().unwrap(), Lambda::one());
        assert!("3/2".parse::<Lambda>().is_err());
        assert!("0".parse::<Lambda>().is_err());
        assert!("x".parse::<Lambda>().is_err());
    }

    #[test]
    fn apex_is_member() {
        let spec = wedge(Lambda::new(1, 3).unwrap());
        let a = site(&[4, -7]);
        assert!(cone_contains(&spec, &a, &a));
    }

    #[test]
    fn half_lambda_quadrant_example() {
        let spec = ConeSpec::new(
            vec![1, 1],
            vec![vec![1, 0], vec![0, 1]],
            vec![1, 1],
            Lambda::new(1, 2).unwrap(),
        )
        .unwrap();
        assert_eq!(spec.normals(), &[vec![2, 1], vec![1, 2]]);
        assert!(!cone_contains(&spec, &site(&[0, 0]), &site(&[1, -1])));
        assert!(cone_contains(&spec, &site(&[0, 0]), &site(&[2, -1])));
    }

    #[test]
    fn lambda_one_is_sign_cone() {
        let spec = ConeSpec::new(
            vec![1, -1],
            vec![vec![1, 0], vec![0, 1]],
            vec![1, -1],
            Lambda::one(),
        )
        .unwrap();
        for x in -5..=5 {
            for y in -5..=5 {
                let expect = x >= 0 && -y >= 0;
                assert_eq!(cone_contains(&spec, &site(&[0, 0]), &site(&[x, y])), expect, "({x},{y})");
            }
        }
    }

    #[test]
    fn validation() {
        // Direction on the boundary of the quadrant.
        assert!(ConeSpec::new(vec![1, 1], vec![vec![1, 0], vec![0, 1]], vec![1, 0], Lambda::one()).is_err());
        assert!(ConeSpec::relaxed(vec![1, 1], vec![vec![1, 0], vec![0, 1]], vec![1, 0], Lambda::one()).is_ok());
        // Dependent basis.
        assert!(ConeSpec::new(vec![1, 1], vec![vec![1, 2], vec![2, 4]], vec![1, 1], Lambda::one()).is_err());
        // Non-coprime direction.
        assert!(ConeSpec::new(vec![1, 1], vec![vec![1, 0], vec![0, 1]], vec![2, 2], Lambda::one()).is_err());
        // Direction outside the cone.
        assert!(ConeSpec::new(vec![1, 1], vec![vec![1, 0], vec![0, 1]], vec![-1, 1], Lambda::one()).is_err());
        assert!(ConeSpec::new(vec![1, 2], vec![vec![1, 0], vec![0, 1]], vec![1, 1], Lambda::one()).is_err());
        // d = 1: half-line.
        let s = ConeSpec::new(vec![1], vec![vec![1]], vec![1], Lambda::one()).unwrap();
        assert!(s.contains(&site(&[0]), &site(&[3])));
        assert!(!s.contains(&site(&[0]), &site(&[-1])));
    }

    #[test]
    fn extreme_rays_of_wedge() {
        let rays = wedge(Lambda::one()).extreme_rays();
        let as_f: Vec<Vec<f64>> = rays
            .iter()
            .map(|r| r.iter().map(|q| *q.numer() as f64 / *q.denom() as f64).collect())
            .collect();
        assert_eq!(as_f, vec![vec![0.5, 0.5], vec![0.5, -0.5]]);
    }

    #[test]
    fn fresh_maxima_examples() {
        assert_eq!(fresh_maxima(&path(1, &[1, 1, 1]), &[1]).unwrap(), vec![1, 2, 3]);
        assert_eq!(fresh_maxima(&path(1, &[1, -1, 1, 1]), &[1]).unwrap(), vec![1, 4]);
        assert_eq!(fresh_maxima(&path(1, &[-1, 1, 1]), &[1]).unwrap(), vec![3]);
        assert!(fresh_maxima(&path(1, &[1]), &[2]).is_err());
    }

    #[test]
    fn straight_path_renews_everywhere() {
        let spec = ConeSpec::relaxed(
            vec![1, 1],
            vec![vec![1, 0], vec![0, 1]],
            vec![1, 0],
            Lambda::new(1, 2).unwrap(),
        )
        .unwrap();
        let n = 50;
        let rec = detect_renewals(&path(2, &vec![1; n]), &spec, 10).unwrap();
        assert_eq!(rec.times, (1..=n - 10).collect::<Vec<_>>());
        assert!(rec.censored_tail);
        for (k, &t) in rec.times.iter().enumerate() {
            assert_eq!(rec.positions[k], site(&[t as i64, 0]));
        }
    }

    #[test]
    fn immediate_exits_give_no_renewals() {
        // Every fresh maximum along +e1 is followed by a +e2 -e2 -e2 detour leaving x >= |y|.
        let steps: Vec<i32> = (0..30).flat_map(|_| [1, -2, -2, 2, 2]).collect();
        let rec = detect_renewals(&path(2, &steps), &wedge(Lambda::one()), 5).unwrap();
        assert!(rec.times.is_empty());
    }

    #[test]
    fn rejects_zero_horizon() {
        assert!(detect_renewals(&path(2, &[1]), &wedge(Lambda::one()), 0).is_err());
    }

    #[test]
    fn lambda_scan_picks_largest_passing() {
        let env = QuenchedEnvironment::new(EnvironmentModel::homogeneous(vec![0.4, 0.1, 0.25, 0.25]).unwrap(), 1).unwrap();
        let trajs: Vec<_> = (0..20).map(|s| simulate(&env, s, 3000)).collect();
        let scan = lambda_scan(&trajs, &wedge(Lambda::one()), &Lambda::dyadic_grid(4), 200, DEFAULT_RATE_FLOOR).unwrap();
        assert_eq!(scan.lambda(), Some(Lambda::one()));
        assert_eq!(scan.table().len(), 4);
        // Smaller λ gives a wider cone and never fewer renewals.
        for w in scan.table().windows(2) {
            assert!(w[1].renewals >= w[0].renewals);
        }

        let single = lambda_scan(&trajs, &wedge(Lambda::one()), &[Lambda::new(1, 2).unwrap()], 200, 0.1).unwrap();
        assert_eq!(single.lambda(), Some(Lambda::new(1, 2).unwrap()));
        assert!(lambda_scan(&trajs, &wedge(Lambda::one()), &[], 200, 0.1).is_err());
    }

    #[test]
    fn lambda_scan_on_srw_finds_nothing() {
        let env = QuenchedEnvironment::new(EnvironmentModel::symmetric(2).unwrap(), 1).unwrap();
        let trajs: Vec<_> = (0..40).map(|s| simulate(&env, s, 20_000)).collect();
        let scan = lambda_scan(&trajs, &wedge(Lambda::one()), &Lambda::dyadic_grid(4), 1000, DEFAULT_RATE_FLOOR).unwrap();
        assert!(matches!(scan, LambdaScan::NoRenewalsFound { .. }), "{scan:?}");
    }

    /// Independent characterization: `n` is a renewal iff it is a fresh maximum,
    /// `n + H ≤ N`, and `X_m ∈ X_n + C` for all `m ∈ [n, n + H]`.
    fn brute_renewals(t: &Trajectory, spec: &ConeSpec, h: usize) -> (Vec<usize>, bool) {
        let pos = t.positions();
        let n = t.len();
        let lv = |x: &SiteCoord| -> i64 { x.coords().iter().zip(spec.direction()).map(|(a, b)| a * b).sum() };
        let mut times = Vec::new();
        let mut censored = false;
        for s in 1..=n {
            if !(0..s).all(|m| lv(&pos[s]) > lv(&pos[m])) {
                continue;
            }
            let end = n.min(s + h);
            if (s..=end).all(|m| cone_contains(spec, &pos[s], &pos[m])) {
                if s + h <= n {
                    times.push(s);
                } else {
                    censored = true;
                }
            }
        }
        (times, censored)
    }

    fn arb_spec() -> impl Strategy<Value = ConeSpec> {
        (
            prop_oneof![Just(vec![vec![1i64, 1], vec![1, -1]]), Just(vec![vec![2, 1], vec![2, -1]]), Just(vec![vec![1, 2], vec![1, -3]])],
            1i64..=8,
        )
            .prop_map(|(basis, den)| {
                ConeSpec::new(vec![1, 1], basis, vec![1, 0], Lambda::new(1, den).unwrap()).unwrap()
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn renewals_match_brute_force(seed in any::<u64>(), spec in arb_spec(), h in 1usize..30, n in 0usize..300, bias in 0.3f64..0.6) {
            let probs = vec![bias, 0.1, (0.9 - bias) / 2.0, (0.9 - bias) / 2.0];
            let env = QuenchedEnvironment::new(EnvironmentModel::homogeneous(probs).unwrap(), seed).unwrap();
            let t = simulate(&env, seed ^ 1, n);
            let rec = detect_renewals(&t, &spec, h).unwrap();
            let (times, censored) = brute_renewals(&t, &spec, h);
            prop_assert_eq!(&rec.times, &times);
            prop_assert_eq!(rec.censored_tail, censored);

            // Direct invariants of the record.
            let pos = t.positions();
            for w in rec.times.windows(2) {
                prop_assert!(t.levels(spec.direction())[w[1]] > t.levels(spec.direction())[w[0]]);
            }
            for &tau in &rec.times {
                prop_assert!((0..tau).all(|m| pos[tau].dot(spec.direction()) > pos[m].dot(spec.direction())));
                prop_assert!((tau..=n.min(tau + h)).all(|m| cone_contains(&spec, &pos[tau], &pos[m])));
            }

            // Longer confirmation never adds renewals.
            let longer = detect_renewals(&t, &spec, h + 7).unwrap();
            prop_assert!(longer.len() <= rec.len());
        }

        #[test]
        fn fresh_maxima_match_double_loop(steps in proptest::collection::vec(prop_oneof![Just(1i32), Just(-1), Just(2), Just(-2)], 0..120), a in -3i64..=3, b in -3i64..=3) {
            prop_assume!(a.gcd(&b) == 1);
            let t = path(2, &steps);
            let pos = t.positions();
            let lv = |x: &SiteCoord| x.coords()[0] * a + x.coords()[1] * b;
            let expect: Vec<usize> = (1..pos.len())
                .filter(|&n| (0..n).all(|m| lv(&pos[n]) > lv(&pos[m])))
                .collect();
            prop_assert_eq!(fresh_maxima(&t, &[a, b]).unwrap(), expect);
        }
    }
}
