//! Environment laws and lazily generated quenched environments.

use std::fmt;
use std::sync::Arc;

use rand::RngCore;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{config_err, Error, Result};
use crate::rng;

/// Largest supported lattice dimension.
pub const MAX_DIM: usize = 4;

/// Dirichlet components below this are rejected and redrawn.
pub const DIRICHLET_FLOOR: f64 = 1e-9;

/// A signed unit lattice vector `±e_k`.
///
/// Encoded as `2k` for `+e_k` and `2k + 1` for `-e_k` (axes counted from 0),
/// which is also the index into a [`TransitionVector`].
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Direction(u8);

impl Direction {
    pub fn new(axis: usize, positive: bool) -> Self {
        assert!(axis < MAX_DIM, "axis {axis} out of range");
        Direction((2 * axis + usize::from(!positive)) as u8)
    }

    pub fn from_index(index: usize) -> Self {
        assert!(index < 2 * MAX_DIM);
        Direction(index as u8)
    }

    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }

    #[inline]
    pub fn axis(self) -> usize {
        (self.0 >> 1) as usize
    }

    #[inline]
    pub fn is_positive(self) -> bool {
        self.0 & 1 == 0
    }

    #[inline]
    pub fn sign(self) -> i64 {
        if self.is_positive() {
            1
        } else {
            -1
        }
    }

    pub fn opposite(self) -> Self {
        Direction(self.0 ^ 1)
    }

    /// `+(k+1)` for `+e_k`, `-(k+1)` for `-e_k`; the wire encoding of steps.
    pub fn signed_axis(self) -> i32 {
        (self.axis() as i32 + 1) * self.sign() as i32
    }

    pub fn from_signed_axis(v: i32, dim: usize) -> Result<Self> {
        let axis = v.unsigned_abs() as usize;
        if v == 0 || axis > dim {
            return config_err(format!("step {v} is not a signed axis index in dimension {dim}"));
        }
        Ok(Direction::new(axis - 1, v > 0))
    }

    /// All `2d` directions in index order.
    pub fn all(dim: usize) -> impl Iterator<Item = Direction> {
        (0..2 * dim).map(Direction::from_index)
    }
}

impl fmt::Debug for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}e{}", if self.is_positive() { '+' } else { '-' }, self.axis() + 1)
    }
}

/// A point of `Z^d`, `1 <= d <= 4`.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct SiteCoord {
    dim: u8,
    c: [i64; MAX_DIM],
}

impl SiteCoord {
    pub fn new(coords: Vec<i64>) -> Result<Self> {
        Self::from_slice(&coords)
    }

    pub fn from_slice(coords: &[i64]) -> Result<Self> {
        check_dim(coords.len())?;
        let mut c = [0; MAX_DIM];
        c[..coords.len()].copy_from_slice(coords);
        Ok(SiteCoord { dim: coords.len() as u8, c })
    }

    pub fn origin(dim: usize) -> Self {
        assert!((1..=MAX_DIM).contains(&dim));
        SiteCoord { dim: dim as u8, c: [0; MAX_DIM] }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    #[inline]
    pub fn coords(&self) -> &[i64] {
        &self.c[..self.dim as usize]
    }

    /// Coordinates padded with zeros to [`MAX_DIM`].
    #[inline]
    pub fn padded(&self) -> [i64; MAX_DIM] {
        self.c
    }

    #[inline]
    pub fn step(mut self, dir: Direction) -> Self {
        self.c[dir.axis()] += dir.sign();
        self
    }

    /// Exact integer dot product.
    #[inline]
    pub fn dot(&self, v: &[i64]) -> i128 {
        self.coords().iter().zip(v).map(|(&a, &b)| a as i128 * b as i128).sum()
    }

    #[inline]
    pub fn dot_f64(&self, v: &[f64]) -> f64 {
        self.coords().iter().zip(v).map(|(&a, &b)| a as f64 * b).sum()
    }

    pub fn sub(&self, other: &SiteCoord) -> SiteCoord {
        let mut out = *self;
        for k in 0..MAX_DIM {
            out.c[k] -= other.c[k];
        }
        out
    }

    pub fn neg(&self) -> SiteCoord {
        let mut out = *self;
        for k in 0..MAX_DIM {
            out.c[k] = -out.c[k];
        }
        out
    }

    /// Euclidean norm; the squared norm is summed exactly, so the result is
    /// invariant under coordinate permutations and reflections.
    pub fn norm(&self) -> f64 {
        (self.coords().iter().map(|&x| x as i128 * x as i128).sum::<i128>() as f64).sqrt()
    }

    pub fn to_vec(&self) -> Vec<i64> {
        self.coords().to_vec()
    }
}

impl fmt::Debug for SiteCoord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.coords())
    }
}

impl Serialize for SiteCoord {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.coords().serialize(s)
    }
}

impl<'de> Deserialize<'de> for SiteCoord {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = Vec::<i64>::deserialize(d)?;
        SiteCoord::new(v).map_err(serde::de::Error::custom)
    }
}

pub(crate) fn check_dim(dim: usize) -> Result<()> {
    if (1..=MAX_DIM).contains(&dim) {
        Ok(())
    } else {
        config_err(format!("dimension {dim} not in 1..={MAX_DIM}"))
    }
}

/// The `2d` exit probabilities at one site, indexed by [`Direction::index`].
///
/// Every entry is strictly positive and the entries sum to one.
#[derive(Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct TransitionVector {
    dim: u8,
    probs: [f64; 2 * MAX_DIM],
}

impl TransitionVector {
    /// Validates and renormalizes. Inputs must already sum to one within 1e-6.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        Self::from_slice(&probs)
    }

    pub fn from_slice(probs: &[f64]) -> Result<Self> {
        if probs.len() % 2 != 0 {
            return config_err(format!("{} probabilities: need 2d entries", probs.len()));
        }
        check_dim(probs.len() / 2)?;
        if let Some(p) = probs.iter().find(|p| !(p.is_finite() && **p > 0.0)) {
            return config_err(format!("transition probability {p} is not strictly positive"));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > 1e-6 {
            return config_err(format!("transition probabilities sum to {sum}, not 1"));
        }
        Ok(Self::normalized(probs))
    }

    /// Scales strictly positive weights to sum to one.
    fn normalized(weights: &[f64]) -> Self {
        let sum: f64 = weights.iter().sum();
        let mut p = [0.0; 2 * MAX_DIM];
        for (dst, w) in p.iter_mut().zip(weights) {
            *dst = w / sum;
        }
        TransitionVector { dim: (weights.len() / 2) as u8, probs: p }
    }

    /// Simple symmetric random walk: `1/(2d)` in every direction.
    pub fn symmetric(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        Self::new(vec![1.0 / (2 * dim) as f64; 2 * dim])
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    #[inline]
    pub fn probs(&self) -> &[f64] {
        &self.probs[..2 * self.dim as usize]
    }

    #[inline]
    pub fn prob(&self, dir: Direction) -> f64 {
        self.probs[dir.index()]
    }

    /// Inverse-CDF choice of a direction from `u ∈ [0, 1)`.
    #[inline]
    pub fn choose(&self, u: f64) -> Direction {
        let n = 2 * self.dim as usize;
        let mut acc = 0.0;
        for i in 0..n - 1 {
            acc += self.probs[i];
            if u < acc {
                return Direction::from_index(i);
            }
        }
        Direction::from_index(n - 1)
    }

    /// Mean displacement `Σ_e ω(e) e`.
    pub fn drift(&self) -> Vec<f64> {
        (0..self.dim())
            .map(|k| self.probs[2 * k] - self.probs[2 * k + 1])
            .collect()
    }
}

impl TryFrom<Vec<f64>> for TransitionVector {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        TransitionVector::new(v)
    }
}

impl From<TransitionVector> for Vec<f64> {
    fn from(t: TransitionVector) -> Self {
        t.probs().to_vec()
    }
}

impl fmt::Debug for TransitionVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TransitionVector{:?}", self.probs())
    }
}

/// Law of a single site's transition vector; sites are i.i.d. under it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EnvironmentModel {
    Homogeneous {
        probs: TransitionVector,
    },
    Mixture {
        atoms: Vec<TransitionVector>,
        weights: Vec<f64>,
    },
    Dirichlet {
        alphas: Vec<f64>,
    },
    /// `1/(2d) ± epsilon` along `drift` (a signed axis index such as `+1` or `-2`),
    /// `1/(2d)` elsewhere.
    PerturbedSrw {
        dimension: usize,
        epsilon: f64,
        drift: i32,
    },
}

impl EnvironmentModel {
    pub fn homogeneous(probs: Vec<f64>) -> Result<Self> {
        let m = EnvironmentModel::Homogeneous { probs: TransitionVector::new(probs)? };
        m.validate()?;
        Ok(m)
    }

    pub fn mixture(atoms: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        let atoms = atoms.into_iter().map(TransitionVector::new).collect::<Result<Vec<_>>>()?;
        let m = EnvironmentModel::Mixture { atoms, weights };
        m.validate()?;
        Ok(m)
    }

    pub fn dirichlet(alphas: Vec<f64>) -> Result<Self> {
        let m = EnvironmentModel::Dirichlet { alphas };
        m.validate()?;
        Ok(m)
    }

    pub fn perturbed_srw(dimension: usize, epsilon: f64, drift: Direction) -> Result<Self> {
        let m = EnvironmentModel::PerturbedSrw { dimension, epsilon, drift: drift.signed_axis() };
        m.validate()?;
        Ok(m)
    }

    pub fn symmetric(dimension: usize) -> Result<Self> {
        Ok(EnvironmentModel::Homogeneous { probs: TransitionVector::symmetric(dimension)? })
    }

    /// Checks every invariant of the variant. Deserialized models must pass this
    /// before use; [`QuenchedEnvironment::new`] calls it.
    pub fn validate(&self) -> Result<()> {
        match self {
            EnvironmentModel::Homogeneous { .. } => Ok(()),
            EnvironmentModel::Mixture { atoms, weights } => {
                if atoms.is_empty() || atoms.len() != weights.len() {
                    return config_err(format!(
                        "mixture needs matching nonempty atoms/weights ({} vs {})",
                        atoms.len(),
                        weights.len()
                    ));
                }
                let dim = atoms[0].dim();
                if atoms.iter().any(|a| a.dim() != dim) {
                    return config_err("mixture atoms differ in dimension");
                }
                if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
                    return config_err("mixture weights must be positive");
                }
                let s: f64 = weights.iter().sum();
                if (s - 1.0).abs() > 1e-9 {
                    return config_err(format!("mixture weights sum to {s}, not 1"));
                }
                Ok(())
            }
            EnvironmentModel::Dirichlet { alphas } => {
                if alphas.len() % 2 != 0 {
                    return config_err("dirichlet needs 2d alphas");
                }
                check_dim(alphas.len() / 2)?;
                if alphas.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
                    return config_err("dirichlet alphas must be positive");
                }
                Ok(())
            }
            EnvironmentModel::PerturbedSrw { dimension, epsilon, drift } => {
                check_dim(*dimension)?;
                let bound = 1.0 / (2 * dimension) as f64;
                if !(*epsilon > 0.0 && *epsilon < bound) {
                    return config_err(format!("epsilon {epsilon} not in (0, {bound})"));
                }
                Direction::from_signed_axis(*drift, *dimension).map(|_| ())
            }
        }
    }

    pub fn dimension(&self) -> usize {
        match self {
            EnvironmentModel::Homogeneous { probs } => probs.dim(),
            EnvironmentModel::Mixture { atoms, .. } => atoms.first().map_or(0, |a| a.dim()),
            EnvironmentModel::Dirichlet { alphas } => alphas.len() / 2,
            EnvironmentModel::PerturbedSrw { dimension, .. } => *dimension,
        }
    }

    /// The site-independent vector, for models without environment randomness.
    pub fn fixed_vector(&self) -> Option<TransitionVector> {
        match self {
            EnvironmentModel::Homogeneous { probs } => Some(*probs),
            EnvironmentModel::PerturbedSrw { dimension, epsilon, drift } => {
                let base = 1.0 / (2 * dimension) as f64;
                let dir = Direction::from_signed_axis(*drift, *dimension).ok()?;
                let mut p = vec![base; 2 * dimension];
                p[dir.index()] = base + epsilon;
                p[dir.opposite().index()] = base - epsilon;
                TransitionVector::new(p).ok()
            }
            EnvironmentModel::Mixture { atoms, .. } if atoms.len() == 1 => Some(atoms[0]),
            _ => None,
        }
    }

    /// Draws one site's vector from the model using `stream`.
    pub fn sample<R: RngCore + ?Sized>(&self, stream: &mut R) -> Result<TransitionVector> {
        if let Some(v) = self.fixed_vector() {
            return Ok(v);
        }
        match self {
            EnvironmentModel::Mixture { atoms, weights } => {
                let u = rng::unit_f64(stream);
                let mut acc = 0.0;
                for (a, w) in atoms.iter().zip(weights) {
                    acc += w;
                    if u < acc {
                        return Ok(*a);
                    }
                }
                Ok(*atoms.last().expect("validated nonempty"))
            }
            EnvironmentModel::Dirichlet { alphas } => sample_dirichlet(alphas, stream),
            _ => unreachable!("fixed models handled above"),
        }
    }
}

/// Dirichlet draw via normalized independent Gamma(α_i, 1) variates.
///
/// Draws with any component below [`DIRICHLET_FLOOR`] are discarded and redrawn.
pub fn sample_dirichlet<R: RngCore + ?Sized>(alphas: &[f64], stream: &mut R) -> Result<TransitionVector> {
    if alphas.len() % 2 != 0 {
        return config_err("dirichlet needs 2d alphas");
    }
    check_dim(alphas.len() / 2)?;
    let gammas = alphas
        .iter()
        .map(|&a| {
            if a.is_finite() && a > 0.0 {
                Gamma::new(a, 1.0).map_err(|e| Error::Config(format!("alpha {a}: {e}")))
            } else {
                config_err(format!("dirichlet alpha {a} must be positive"))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let mut draw = [0.0; 2 * MAX_DIM];
    let draw = &mut draw[..alphas.len()];
    loop {
        for (x, g) in draw.iter_mut().zip(&gammas) {
            *x = g.sample(stream);
        }
        let sum: f64 = draw.iter().sum();
        if sum > 0.0 && sum.is_finite() && draw.iter().all(|x| x / sum >= DIRICHLET_FLOOR) {
            return Ok(TransitionVector::normalized(draw));
        }
    }
}

/// One realization ω of the environment, generated site by site on demand.
///
/// `transition_at` is a pure function of `(model, master_seed, site)`.
#[derive(Clone, Debug)]
pub struct QuenchedEnvironment {
    model: Arc<EnvironmentModel>,
    master_seed: u64,
    fixed: Option<TransitionVector>,
}

impl QuenchedEnvironment {
    pub fn new(model: EnvironmentModel, master_seed: u64) -> Result<Self> {
        Self::shared(Arc::new(model), master_seed)
    }

    pub fn shared(model: Arc<EnvironmentModel>, master_seed: u64) -> Result<Self> {
        model.validate()?;
        let fixed = model.fixed_vector();
        Ok(QuenchedEnvironment { model, master_seed, fixed })
    }

    pub fn model(&self) -> &EnvironmentModel {
        &self.model
    }

    pub fn model_arc(&self) -> &Arc<EnvironmentModel> {
        &self.model
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn dimension(&self) -> usize {
        self.model.dimension()
    }

    pub fn transition_at(&self, x: &SiteCoord) -> Result<TransitionVector> {
        if x.dim() != self.dimension() {
            return config_err(format!(
                "site has dimension {}, environment has {}",
                x.dim(),
                self.dimension()
            ));
        }
        Ok(self.transition_unchecked(x))
    }

    /// `transition_at` without the dimension check.
    #[inline]
    pub(crate) fn transition_unchecked(&self, x: &SiteCoord) -> TransitionVector {
        match self.fixed {
            Some(v) => v,
            None => {
                let mut stream = rng::site_stream(self.master_seed, x);
                self.model.sample(&mut stream).expect("validated model")
            }
        }
    }
}
