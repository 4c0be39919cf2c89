use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cone::{ConeSpec, Lambda, DEFAULT_RATE_FLOOR};
use crate::env::{EnvironmentModel, SiteCoord};
use crate::error::{config_err, Error, Result};
use crate::oracle::{ExitClass, RegionDescriptor, SolverOptions};
use crate::stats::{BootstrapConfig, Thresholds};
use crate::walk::{EnvironmentSharing, Slab};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Simulate,
    Direction,
    Renewal,
    Lemma5,
    Slab,
    ZeroOneScan,
    OracleCompare,
}

/// A fixed `λ` or a scan over the dyadic grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LambdaChoice {
    Fixed(Lambda),
    Scan,
}

impl Serialize for LambdaChoice {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            LambdaChoice::Fixed(l) => l.serialize(s),
            LambdaChoice::Scan => s.serialize_str("scan"),
        }
    }
}

impl<'de> Deserialize<'de> for LambdaChoice {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        if s == "scan" {
            return Ok(LambdaChoice::Scan);
        }
        s.parse().map(LambdaChoice::Fixed).map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConeConfig {
    pub sigma: Vec<i8>,
    pub basis: Vec<Vec<i64>>,
    pub l: Vec<i64>,
    pub lambda: LambdaChoice,
    #[serde(default)]
    pub scan: ScanConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanConfig {
    /// Number of grid points `1, 1/2, 1/4, ...`.
    pub grid_size: usize,
    /// Renewals per 1000 steps.
    pub rate_floor: f64,
    /// Walks used for the scan; all walks when absent.
    pub pilot_walks: Option<usize>,
}

impl Default for ScanConfig {
    fn default() -> Self {
        ScanConfig { grid_size: 8, rate_floor: DEFAULT_RATE_FLOOR, pilot_walks: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlabConfig {
    pub normal: Vec<f64>,
    pub b: f64,
    #[serde(rename = "L")]
    pub widths: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ZeroOneConfig {
    pub n_angles: usize,
}

impl Default for ZeroOneConfig {
    fn default() -> Self {
        ZeroOneConfig { n_angles: 16 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenewalConfig {
    /// Direction orthogonal to `l` for the oscillation check.
    pub l_star: Option<Vec<i64>>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Lemma5Config {
    pub window: Option<(i64, i64)>,
    pub bootstrap: BootstrapConfig,
    /// Also run with twice the confirmation horizon and compare.
    pub censoring_check: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    pub region: RegionDescriptor,
    pub start: Option<Vec<i64>>,
    #[serde(default = "default_target")]
    pub target: Vec<ExitClass>,
    #[serde(default = "default_n_env")]
    pub n_env: usize,
    #[serde(default)]
    pub solver: SolverOptions,
}

fn default_target() -> Vec<ExitClass> {
    vec![ExitClass::Right]
}

fn default_n_env() -> usize {
    1
}

/// Experiment configuration file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub dimension: usize,
    pub model: EnvironmentModel,
    pub master_seed: u64,
    pub n_walks: usize,
    /// Path length, or the step cap for exit experiments.
    pub horizon: usize,
    pub confirm_horizon: Option<usize>,
    #[serde(default)]
    pub sharing: EnvironmentSharing,
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub thresholds: Thresholds,
    /// Direction `l` of the transience and speed estimates.
    pub direction: Option<Vec<f64>>,
    pub cone: Option<ConeConfig>,
    pub slab: Option<SlabConfig>,
    pub zero_one: Option<ZeroOneConfig>,
    pub renewal: Option<RenewalConfig>,
    pub lemma5: Option<Lemma5Config>,
    pub oracle: Option<OracleConfig>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks every parameter the chosen experiment will use.
    pub fn validate(&self) -> Result<()> {
        let d = self.dimension;
        crate::env::check_dim(d)?;
        self.model.validate()?;
        if self.model.dimension() != d {
            return config_err(format!("model: dimension {} differs from dimension = {d}", self.model.dimension()));
        }
        if self.n_walks == 0 {
            return config_err("n_walks: must be at least 1");
        }
        if self.horizon == 0 {
            return config_err("horizon: must be at least 1");
        }
        if self.confirm_horizon == Some(0) {
            return config_err("confirm_horizon: must be at least 1");
        }
        let th = &self.thresholds;
        if !(0.0..=1.0).contains(&th.plus_cutoff) || !(0.0..=1.0).contains(&th.minus_cutoff) {
            return config_err("thresholds: cutoffs must lie in [0, 1]");
        }
        if let Some(l) = &self.direction {
            if l.len() != d || l.iter().all(|&c| c == 0.0) || l.iter().any(|c| !c.is_finite()) {
                return config_err(format!("direction: must be a finite nonzero vector of length {d}"));
            }
        }
        if self.cone.is_some() {
            self.base_cone()?;
        }
        if let Some(s) = &self.slab {
            if s.normal.len() != d {
                return config_err(format!("slab.normal: must have length {d}"));
            }
            if s.widths.is_empty() {
                return config_err("slab.L: needs at least one width");
            }
            for &w in &s.widths {
                Slab::new(s.normal.clone(), s.b, w).map_err(|e| Error::Config(format!("slab: {e}")))?;
            }
        }
        if let Some(o) = &self.oracle {
            if o.region.dim() != d {
                return config_err(format!("oracle.region: dimension differs from dimension = {d}"));
            }
            let region = o.region.compile().map_err(|e| Error::Config(format!("oracle.region: {e}")))?;
            if !region.contains(&self.oracle_start()?) {
                return config_err("oracle.start: not inside the region");
            }
            if o.target.is_empty() || o.n_env == 0 {
                return config_err("oracle: target must be nonempty and n_env at least 1");
            }
        }
        if let Some(r) = &self.renewal {
            if let Some(ls) = &r.l_star {
                if ls.len() != d {
                    return config_err(format!("renewal.l_star: must have length {d}"));
                }
            }
        }
        if let Some(lemma5) = &self.lemma5 {
            if let Some((a, b)) = lemma5.window {
                if a < 1 || b < a {
                    return config_err("lemma5.window: need 1 <= i_min <= i_max");
                }
            }
            let level = lemma5.bootstrap.level;
            if !(level > 0.0 && level < 1.0) {
                return config_err("lemma5.bootstrap.level: must lie in (0, 1)");
            }
        }
        let need = |present: bool, what: &str| {
            if present {
                Ok(())
            } else {
                config_err(format!("{what}: required for kind = {:?}", self.kind_name()))
            }
        };
        match self.kind {
            ExperimentKind::Simulate => Ok(()),
            ExperimentKind::Direction => {
                need(self.direction.is_some(), "direction")?;
                if self.cone.is_some() {
                    need(self.confirm_horizon.is_some(), "confirm_horizon")?;
                }
                Ok(())
            }
            ExperimentKind::Renewal | ExperimentKind::Lemma5 => {
                need(self.cone.is_some(), "cone")?;
                need(self.confirm_horizon.is_some(), "confirm_horizon")
            }
            ExperimentKind::Slab => need(self.slab.is_some(), "slab"),
            ExperimentKind::ZeroOneScan => {
                if d != 2 {
                    return config_err("dimension: zero-one-scan needs dimension = 2");
                }
                let n = self.zero_one.clone().unwrap_or_default().n_angles;
                if n < 3 {
                    return config_err("zero_one.n_angles: must be at least 3");
                }
                Ok(())
            }
            ExperimentKind::OracleCompare => need(self.oracle.is_some(), "oracle"),
        }
    }

    pub fn kind_name(&self) -> String {
        serde_json::to_value(self.kind).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default()
    }

    /// Cone at `λ = 1` (or the fixed `λ`) with full validation.
    pub fn base_cone(&self) -> Result<ConeSpec> {
        let c = self.cone.as_ref().ok_or_else(|| Error::Config("cone: missing".into()))?;
        let lambda = match c.lambda {
            LambdaChoice::Fixed(l) => l,
            LambdaChoice::Scan => Lambda::one(),
        };
        if c.sigma.len() != self.dimension {
            return config_err(format!("cone.sigma: must have length {}", self.dimension));
        }
        if c.lambda == LambdaChoice::Scan && c.scan.grid_size == 0 {
            return config_err("cone.scan.grid_size: must be at least 1");
        }
        ConeSpec::new(c.sigma.clone(), c.basis.clone(), c.l.clone(), lambda).map_err(|e| Error::Config(format!("cone: {e}")))
    }

    pub fn oracle_start(&self) -> Result<SiteCoord> {
        match self.oracle.as_ref().and_then(|o| o.start.as_ref()) {
            Some(s) => SiteCoord::from_slice(s),
            None => Ok(SiteCoord::origin(self.dimension)),
        }
    }
}

/// Hex SHA-256 of the config bytes, with a seed override folded in when present.
pub fn config_hash(bytes: &[u8], seed_override: Option<u64>) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    if let Some(seed) = seed_override {
        h.update(format!("\n# master_seed override: {seed}\n").as_bytes());
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// JSON schema of [`ExperimentConfig`], as printed by `rwre-lab schema`.
pub const SCHEMA: &str = include_str!("config.schema.json");
