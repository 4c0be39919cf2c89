//! Exact ground truth on small instances.
//!
//! Quenched exit probabilities of a finite region solve the discrete Dirichlet
//! problem `h(x) = Σ_e ω(x,e) h(x+e)` with boundary values 1 on the target
//! classes and 0 elsewhere. One-dimensional closed forms (gambler's ruin and
//! the Solomon criterion) cross-check the simulator.

use std::collections::{BTreeSet, HashMap};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::env::{EnvironmentModel, QuenchedEnvironment, SiteCoord, TransitionVector};
use crate::error::{config_err, Error, Result};
use crate::rng;
use crate::stats::MeanCi;
use crate::walk::{Slab, SlabSide};

/// Largest region solved by dense LU under [`SolverChoice::Auto`].
pub const DENSE_LIMIT: usize = 2500;
/// Largest region accepted at all.
pub const MAX_REGION_SITES: usize = 200_000;

/// Label of the boundary a walk leaves through.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExitClass {
    Left,
    Right,
    Lateral,
}

/// Finite regions that can be written in a config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RegionDescriptor {
    /// Sites `lo < x < hi` of `Z`; exits at or below `lo` are `Left`, at or above `hi` are `Right`.
    Interval { lo: i64, hi: i64 },
    /// Sites with `lo_k ≤ x_k ≤ hi_k`; leaving through the `-e_1` face is `Left`,
    /// the `+e_1` face `Right`, any other face `Lateral`.
    Box { lo: Vec<i64>, hi: Vec<i64> },
    /// The slab `-bL < x·l' < L` cut to `|x_k| ≤ half_width`. Leaving across the
    /// slab faces is `Left`/`Right`; leaving the bounding box otherwise is `Lateral`.
    Slab {
        normal: Vec<f64>,
        b: f64,
        #[serde(rename = "L")]
        width: f64,
        half_width: i64,
    },
}

impl RegionDescriptor {
    pub fn dim(&self) -> usize {
        match self {
            RegionDescriptor::Interval { .. } => 1,
            RegionDescriptor::Box { lo, .. } => lo.len(),
            RegionDescriptor::Slab { normal, .. } => normal.len(),
        }
    }

    fn bounds(&self) -> Result<(Vec<i64>, Vec<i64>)> {
        match self {
            RegionDescriptor::Interval { lo, hi } => Ok((vec![lo + 1], vec![hi - 1])),
            RegionDescriptor::Box { lo, hi } => {
                if lo.len() != hi.len() {
                    return config_err("box corners differ in dimension");
                }
                Ok((lo.clone(), hi.clone()))
            }
            RegionDescriptor::Slab { normal, half_width, .. } => {
                if *half_width < 0 {
                    return config_err("slab half_width must be nonnegative");
                }
                Ok((vec![-half_width; normal.len()], vec![*half_width; normal.len()]))
            }
        }
    }

    /// Checks the descriptor and fixes its geometry.
    pub fn compile(&self) -> Result<Region> {
        let (lo, hi) = self.bounds()?;
        crate::env::check_dim(lo.len())?;
        let slab = match self {
            RegionDescriptor::Slab { normal, b, width, .. } => Some(Slab::new(normal.clone(), *b, *width)?),
            _ => None,
        };
        let mut count: u128 = 1;
        for k in 0..lo.len() {
            if hi[k] < lo[k] {
                return config_err("region is empty");
            }
            count *= (hi[k] - lo[k] + 1) as u128;
        }
        if count > MAX_REGION_SITES as u128 {
            return config_err(format!("region has {count} candidate sites, limit {MAX_REGION_SITES}"));
        }
        Ok(Region { lo, hi, slab })
    }

    /// Enumerates the region and labels its exterior neighbours.
    pub fn build(&self, env: QuenchedEnvironment, start: SiteCoord) -> Result<FiniteRegionProblem> {
        self.compile()?.problem(env, start)
    }
}

/// A compiled [`RegionDescriptor`].
#[derive(Clone, Debug)]
pub struct Region {
    lo: Vec<i64>,
    hi: Vec<i64>,
    slab: Option<Slab>,
}

impl Region {
    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, x: &SiteCoord) -> bool {
        let in_box = x.coords().iter().enumerate().all(|(k, &c)| self.lo[k] <= c && c <= self.hi[k]);
        in_box && self.slab.as_ref().is_none_or(|s| s.contains(x))
    }

    /// `None` inside the region, otherwise the class of `x` as an exit site.
    pub fn class_of(&self, x: &SiteCoord) -> Option<ExitClass> {
        if self.contains(x) {
            return None;
        }
        Some(match &self.slab {
            Some(s) => match s.side(x) {
                Some(SlabSide::Left) => ExitClass::Left,
                Some(SlabSide::Right) => ExitClass::Right,
                None => ExitClass::Lateral,
            },
            None if x.coords()[0] < self.lo[0] => ExitClass::Left,
            None if x.coords()[0] > self.hi[0] => ExitClass::Right,
            None => ExitClass::Lateral,
        })
    }

    /// Sites of the region in lexicographic order (last coordinate slowest).
    pub fn sites(&self) -> Vec<SiteCoord> {
        let dim = self.dim();
        let mut sites = Vec::new();
        let mut cur = self.lo.clone();
        loop {
            let x = SiteCoord::from_slice(&cur).expect("checked dimension");
            if self.contains(&x) {
                sites.push(x);
            }
            let mut k = 0;
            while k < dim {
                cur[k] += 1;
                if cur[k] <= self.hi[k] {
                    break;
                }
                cur[k] = self.lo[k];
                k += 1;
            }
            if k == dim {
                return sites;
            }
        }
    }

    pub fn problem(&self, env: QuenchedEnvironment, start: SiteCoord) -> Result<FiniteRegionProblem> {
        let dim = self.dim();
        if env.dimension() != dim || start.dim() != dim {
            return config_err("region, environment and start differ in dimension");
        }
        let sites = self.sites();
        let mut boundary = HashMap::new();
        for x in &sites {
            for dir in crate::env::Direction::all(dim) {
                let y = x.step(dir);
                if let Some(c) = self.class_of(&y) {
                    boundary.insert(y, c);
                }
            }
        }
        FiniteRegionProblem::new(env, sites, boundary, start)
    }
}

/// A finite region, labels for every exterior neighbour, an environment and a start.
#[derive(Clone, Debug)]
pub struct FiniteRegionProblem {
    env: QuenchedEnvironment,
    sites: Vec<SiteCoord>,
    index: HashMap<SiteCoord, usize>,
    boundary: HashMap<SiteCoord, ExitClass>,
    start: usize,
}

impl FiniteRegionProblem {
    pub fn new(
        env: QuenchedEnvironment,
        sites: Vec<SiteCoord>,
        boundary: HashMap<SiteCoord, ExitClass>,
        start: SiteCoord,
    ) -> Result<Self> {
        if sites.is_empty() || sites.len() > MAX_REGION_SITES {
            return config_err(format!("region must have 1..={MAX_REGION_SITES} sites"));
        }
        let dim = env.dimension();
        let index: HashMap<SiteCoord, usize> = sites.iter().enumerate().map(|(i, x)| (*x, i)).collect();
        if index.len() != sites.len() {
            return config_err("region lists a site twice");
        }
        if sites.iter().any(|x| x.dim() != dim) {
            return config_err("region sites differ in dimension from the environment");
        }
        let Some(&start) = index.get(&start) else {
            return Err(Error::Precondition("start is not inside the region".into()));
        };
        for x in &sites {
            for dir in crate::env::Direction::all(dim) {
                let y = x.step(dir);
                if !index.contains_key(&y) && !boundary.contains_key(&y) {
                    return config_err(format!("neighbour {y:?} of {x:?} is neither inside nor labelled"));
                }
            }
        }
        Ok(FiniteRegionProblem { env, sites, index, boundary, start })
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn env(&self) -> &QuenchedEnvironment {
        &self.env
    }

    pub fn classes(&self) -> BTreeSet<ExitClass> {
        self.boundary.values().copied().collect()
    }

    /// Sparse rows of `P` restricted to the region and the one-step target mass.
    fn system(&self, targets: &[ExitClass]) -> (Vec<Vec<(usize, f64)>>, Vec<f64>) {
        let dim = self.env.dimension();
        let mut rows = Vec::with_capacity(self.sites.len());
        let mut rhs = Vec::with_capacity(self.sites.len());
        for x in &self.sites {
            let omega: TransitionVector = self.env.transition_unchecked(x);
            let mut row = Vec::with_capacity(2 * dim);
            let mut b = 0.0;
            for dir in crate::env::Direction::all(dim) {
                let y = x.step(dir);
                let p = omega.prob(dir);
                match self.index.get(&y) {
                    Some(&j) => row.push((j, p)),
                    None => {
                        if targets.contains(&self.boundary[&y]) {
                            b += p;
                        }
                    }
                }
            }
            rows.push(row);
            rhs.push(b);
        }
        (rows, rhs)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverChoice {
    /// Dense LU up to [`DENSE_LIMIT`] unknowns, Gauss-Seidel above.
    #[default]
    Auto,
    Dense,
    Iterative,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    pub choice: SolverChoice,
    /// Max-norm residual at which Gauss-Seidel stops.
    pub tolerance: f64,
    pub max_sweeps: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { choice: SolverChoice::Auto, tolerance: 1e-12, max_sweeps: 1_000_000 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExitSolution {
    pub probability: f64,
    pub residual: f64,
    pub solver: SolverChoice,
    pub sweeps: usize,
}

/// Quenched probability, from the start site, of leaving the region through a
/// boundary site whose class is in `targets`.
pub fn exact_quenched_exit(problem: &FiniteRegionProblem, targets: &[ExitClass]) -> Result<f64> {
    exact_quenched_exit_with(problem, targets, &SolverOptions::default()).map(|s| s.probability)
}

pub fn exact_quenched_exit_with(
    problem: &FiniteRegionProblem,
    targets: &[ExitClass],
    opts: &SolverOptions,
) -> Result<ExitSolution> {
    let (rows, rhs) = problem.system(targets);
    let n = rows.len();
    let residual = |h: &[f64]| -> f64 {
        rows.iter()
            .zip(&rhs)
            .enumerate()
            .map(|(i, (row, b))| (h[i] - row.iter().map(|&(j, p)| p * h[j]).sum::<f64>() - b).abs())
            .fold(0.0, f64::max)
    };
    let dense = match opts.choice {
        SolverChoice::Dense => true,
        SolverChoice::Iterative => false,
        SolverChoice::Auto => n <= DENSE_LIMIT,
    };
    if dense {
        let mut a = DMatrix::<f64>::identity(n, n);
        for (i, row) in rows.iter().enumerate() {
            for &(j, p) in row {
                a[(i, j)] -= p;
            }
        }
        let h = a
            .lu()
            .solve(&DVector::from_vec(rhs.clone()))
            .ok_or_else(|| Error::NonConvergence { sweeps: 0, residual: f64::INFINITY })?;
        let h: Vec<f64> = h.iter().copied().collect();
        return Ok(ExitSolution {
            probability: h[problem.start],
            residual: residual(&h),
            solver: SolverChoice::Dense,
            sweeps: 0,
        });
    }
    let mut h = vec![0.0; n];
    let mut sweeps = 0;
    loop {
        for i in 0..n {
            h[i] = rows[i].iter().map(|&(j, p)| p * h[j]).sum::<f64>() + rhs[i];
        }
        sweeps += 1;
        if sweeps % 16 == 0 || sweeps >= opts.max_sweeps {
            let r = residual(&h);
            if r <= opts.tolerance {
                return Ok(ExitSolution {
                    probability: h[problem.start],
                    residual: r,
                    solver: SolverChoice::Iterative,
                    sweeps,
                });
            }
            if sweeps >= opts.max_sweeps {
                return Err(Error::NonConvergence { sweeps, residual: r });
            }
        }
    }
}

/// Probability that the walk with `P(+1) = p` started at 0 reaches `+n_right` before `-m`.
pub fn gamblers_ruin(p: f64, m: u64, n_right: u64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "p must lie in (0, 1)");
    assert!(m >= 1 && n_right >= 1, "barriers must be at distance >= 1");
    if p == 0.5 {
        return m as f64 / (m + n_right) as f64;
    }
    let rho = (1.0 - p) / p;
    (1.0 - rho.powi(m as i32)) / (1.0 - rho.powi((m + n_right) as i32))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Recurrence {
    TransientPlus,
    TransientMinus,
    Recurrent,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolomonResult {
    pub verdict: Recurrence,
    pub speed: f64,
    pub e_log_rho: f64,
    pub e_rho: f64,
    pub e_inv_rho: f64,
}

/// Transience and speed of a one-dimensional i.i.d. environment from the moments
/// of `ρ = ω(0,-1) / ω(0,+1)`.
pub fn solomon_1d(model: &EnvironmentModel) -> Result<SolomonResult> {
    if model.dimension() != 1 {
        return Err(Error::Precondition("Solomon criterion needs a one-dimensional model".into()));
    }
    let atoms: Vec<(TransitionVector, f64)> = match model {
        EnvironmentModel::Mixture { atoms, weights } => atoms.iter().copied().zip(weights.iter().copied()).collect(),
        EnvironmentModel::Dirichlet { .. } => {
            return Err(Error::Unsupported("Dirichlet moments of rho are not available in closed form".into()))
        }
        other => vec![(other.fixed_vector().expect("fixed model"), 1.0)],
    };
    let (mut e_log, mut e_rho, mut e_inv) = (0.0, 0.0, 0.0);
    for (v, w) in &atoms {
        let rho = v.probs()[1] / v.probs()[0];
        e_log += w * rho.ln();
        e_rho += w * rho;
        e_inv += w / rho;
    }
    let verdict = if e_log.abs() <= 1e-12 {
        Recurrence::Recurrent
    } else if e_log < 0.0 {
        Recurrence::TransientPlus
    } else {
        Recurrence::TransientMinus
    };
    let speed = if e_rho < 1.0 {
        (1.0 - e_rho) / (1.0 + e_rho)
    } else if e_inv < 1.0 {
        -(1.0 - e_inv) / (1.0 + e_inv)
    } else {
        0.0
    };
    Ok(SolomonResult { verdict, speed, e_log_rho: e_log, e_rho, e_inv_rho: e_inv })
}

/// Environment `j` of an annealed average seeded by `master_seed`; the same one
/// walker `j` of a per-walk [`crate::walk::Ensemble`] sees.
pub fn annealed_environment(model: &EnvironmentModel, master_seed: u64, j: usize) -> Result<QuenchedEnvironment> {
    QuenchedEnvironment::new(model.clone(), rng::environment_seed(master_seed, j as u64))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnealedExit {
    pub mean: MeanCi,
    pub values: Vec<f64>,
}

/// Mean of exact quenched exit probabilities over `n_env` sampled environments.
pub fn annealed_exit(
    model: &EnvironmentModel,
    region: &RegionDescriptor,
    start: SiteCoord,
    targets: &[ExitClass],
    n_env: usize,
    master_seed: u64,
    opts: &SolverOptions,
) -> Result<AnnealedExit> {
    if n_env == 0 {
        return Err(Error::Precondition("n_env must be at least 1".into()));
    }
    let region = region.compile()?;
    let values = (0..n_env)
        .into_par_iter()
        .map(|j| {
            let problem = region.problem(annealed_environment(model, master_seed, j)?, start)?;
            exact_quenched_exit_with(&problem, targets, opts).map(|s| s.probability)
        })
        .collect::<Result<Vec<f64>>>()?;
    let mean = MeanCi::from_samples(values.iter().copied()).expect("n_env >= 1");
    Ok(AnnealedExit { mean, values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::Direction;

    fn homogeneous(p: Vec<f64>) -> QuenchedEnvironment {
        QuenchedEnvironment::new(EnvironmentModel::homogeneous(p).unwrap(), 0).unwrap()
    }

    fn o1() -> SiteCoord {
        SiteCoord::origin(1)
    }

    #[test]
    fn ruin_closed_form() {
        assert_eq!(gamblers_ruin(0.5, 3, 3), 0.5);
        assert!((gamblers_ruin(0.7, 1, 1) - 0.7).abs() < 1e-15);
        assert!((gamblers_ruin(0.7, 2, 2) - 49.0 / 58.0).abs() < 1e-15);
    }

    #[test]
    fn single_site_interval() {
        let p = RegionDescriptor::Interval { lo: -1, hi: 1 }.build(homogeneous(vec![0.7, 0.3]), o1()).unwrap();
        assert_eq!(p.len(), 1);
        assert!((exact_quenched_exit(&p, &[ExitClass::Right]).unwrap() - 0.7).abs() < 1e-15);
    }

    #[test]
    fn interval_matches_ruin() {
        for (p, m, n) in [(0.7, 2u64, 2u64), (0.55, 5, 9), (0.3, 4, 1), (0.5, 6, 2)] {
            let region = RegionDescriptor::Interval { lo: -(m as i64), hi: n as i64 };
            let prob = region.build(homogeneous(vec![p, 1.0 - p]), o1()).unwrap();
            let exact = exact_quenched_exit(&prob, &[ExitClass::Right]).unwrap();
            assert!((exact - gamblers_ruin(p, m, n)).abs() < 1e-9, "p={p} m={m} n={n}");
        }
    }

    #[test]
    fn classes_sum_to_one_and_solvers_agree() {
        let env = QuenchedEnvironment::new(EnvironmentModel::dirichlet(vec![1.0, 2.0, 1.5, 1.5]).unwrap(), 5).unwrap();
        let region = RegionDescriptor::Slab { normal: vec![1.0, 0.5], b: 1.0, width: 4.0, half_width: 6 };
        let prob = region.build(env, SiteCoord::origin(2)).unwrap();
        let classes: Vec<_> = prob.classes().into_iter().collect();
        assert_eq!(classes, vec![ExitClass::Left, ExitClass::Right, ExitClass::Lateral]);
        let mut total = 0.0;
        for c in &classes {
            let dense = exact_quenched_exit_with(&prob, &[*c], &SolverOptions { choice: SolverChoice::Dense, ..Default::default() }).unwrap();
            let iter = exact_quenched_exit_with(&prob, &[*c], &SolverOptions { choice: SolverChoice::Iterative, ..Default::default() }).unwrap();
            assert!((dense.probability - iter.probability).abs() < 1e-9);
            assert!(iter.residual <= 1e-12);
            total += dense.probability;
        }
        assert!((total - 1.0).abs() < 1e-9);

        // Enlarging the target never lowers the probability.
        let r = exact_quenched_exit(&prob, &[ExitClass::Right]).unwrap();
        let rl = exact_quenched_exit(&prob, &[ExitClass::Right, ExitClass::Lateral]).unwrap();
        assert!(rl >= r);
    }

    #[test]
    fn box_faces() {
        let env = homogeneous(vec![0.25; 4]);
        let prob = RegionDescriptor::Box { lo: vec![-2, -2], hi: vec![2, 2] }.build(env, SiteCoord::origin(2)).unwrap();
        let l = exact_quenched_exit(&prob, &[ExitClass::Left]).unwrap();
        let r = exact_quenched_exit(&prob, &[ExitClass::Right]).unwrap();
        let lat = exact_quenched_exit(&prob, &[ExitClass::Lateral]).unwrap();
        assert!((l - r).abs() < 1e-12);
        // Square symmetry: each of the four faces gets 1/4.
        assert!((l - 0.25).abs() < 1e-12 && (lat - 0.5).abs() < 1e-12);
    }

    #[test]
    fn nonconvergence_is_reported() {
        let prob = RegionDescriptor::Interval { lo: -50, hi: 50 }.build(homogeneous(vec![0.5, 0.5]), o1()).unwrap();
        let opts = SolverOptions { choice: SolverChoice::Iterative, tolerance: 1e-12, max_sweeps: 5 };
        assert!(matches!(exact_quenched_exit_with(&prob, &[ExitClass::Right], &opts), Err(Error::NonConvergence { .. })));
    }

    #[test]
    fn start_outside_is_rejected() {
        let r = RegionDescriptor::Interval { lo: 0, hi: 3 }.build(homogeneous(vec![0.5, 0.5]), o1());
        assert!(matches!(r, Err(Error::Precondition(_))));
    }

    #[test]
    fn unlabelled_neighbour_is_rejected() {
        let env = homogeneous(vec![0.5, 0.5]);
        let sites = vec![o1()];
        let mut boundary = HashMap::new();
        boundary.insert(SiteCoord::from_slice(&[1]).unwrap(), ExitClass::Right);
        assert!(FiniteRegionProblem::new(env, sites, boundary, o1()).is_err());
    }

    #[test]
    fn solomon_examples() {
        let r = solomon_1d(&EnvironmentModel::homogeneous(vec![0.7, 0.3]).unwrap()).unwrap();
        assert_eq!(r.verdict, Recurrence::TransientPlus);
        assert!((r.speed - 0.4).abs() < 1e-12);
        let mix = EnvironmentModel::mixture(vec![vec![0.6, 0.4], vec![0.8, 0.2]], vec![0.5, 0.5]).unwrap();
        let r = solomon_1d(&mix).unwrap();
        assert!((r.e_rho - 11.0 / 24.0).abs() < 1e-12);
        assert!((r.speed - 13.0 / 35.0).abs() < 1e-12);
        let r = solomon_1d(&EnvironmentModel::symmetric(1).unwrap()).unwrap();
        assert_eq!((r.verdict, r.speed), (Recurrence::Recurrent, 0.0));
        let r = solomon_1d(&EnvironmentModel::perturbed_srw(1, 0.2, Direction::new(0, false)).unwrap()).unwrap();
        assert_eq!(r.verdict, Recurrence::TransientMinus);
        assert!((r.speed + 0.4).abs() < 1e-12);
        assert!(matches!(solomon_1d(&EnvironmentModel::dirichlet(vec![1.0, 1.0]).unwrap()), Err(Error::Unsupported(_))));
        assert!(solomon_1d(&EnvironmentModel::symmetric(2).unwrap()).is_err());
    }

    #[test]
    fn annealed_homogeneous_has_no_variance() {
        let model = EnvironmentModel::homogeneous(vec![0.7, 0.3]).unwrap();
        let region = RegionDescriptor::Interval { lo: -2, hi: 2 };
        let a = annealed_exit(&model, &region, o1(), &[ExitClass::Right], 5, 1, &SolverOptions::default()).unwrap();
        assert_eq!(a.mean.sd, 0.0);
        let single = exact_quenched_exit(&region.build(homogeneous(vec![0.7, 0.3]), o1()).unwrap(), &[ExitClass::Right]).unwrap();
        assert_eq!(a.mean.mean, single);
    }

    #[test]
    fn annealed_single_environment_is_bitwise_quenched() {
        let model = EnvironmentModel::mixture(vec![vec![0.6, 0.4], vec![0.8, 0.2]], vec![0.5, 0.5]).unwrap();
        let region = RegionDescriptor::Interval { lo: -3, hi: 4 };
        let a = annealed_exit(&model, &region, o1(), &[ExitClass::Right], 1, 99, &SolverOptions::default()).unwrap();
        let env = annealed_environment(&model, 99, 0).unwrap();
        let q = exact_quenched_exit(&region.build(env, o1()).unwrap(), &[ExitClass::Right]).unwrap();
        assert_eq!(a.mean.mean.to_bits(), q.to_bits());
    }

    #[test]
    fn annealed_ci_shrinks() {
        let model = EnvironmentModel::mixture(vec![vec![0.6, 0.4], vec![0.8, 0.2]], vec![0.5, 0.5]).unwrap();
        let region = RegionDescriptor::Interval { lo: -3, hi: 3 };
        let opts = SolverOptions::default();
        let small = annealed_exit(&model, &region, o1(), &[ExitClass::Right], 100, 3, &opts).unwrap();
        let large = annealed_exit(&model, &region, o1(), &[ExitClass::Right], 1600, 3, &opts).unwrap();
        let ratio = small.mean.half_width() / large.mean.half_width();
        assert!((ratio - 4.0).abs() < 1.0, "{ratio}");
    }
}
