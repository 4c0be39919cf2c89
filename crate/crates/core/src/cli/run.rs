use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Map, Value};

use super::config::{config_hash, ExperimentConfig, ExperimentKind, LambdaChoice};
use crate::cone::{detect_renewals, lambda_scan, ConeSpec, Lambda, LambdaScan, RenewalRecord};
use crate::env::{EnvironmentModel, QuenchedEnvironment, SiteCoord};
use crate::error::{Error, Result};
use crate::oracle::{annealed_exit, exact_quenched_exit_with, gamblers_ruin, ExitClass, RegionDescriptor};
use crate::stats::{
    angle_between, antipodal_clustering, classify_transience, estimate_direction, estimate_speed, independence_test,
    lemma5_two_sided_check, orthogonal_oscillation, t_gamma_curve, zero_one_scan, DirectionInput, MeanCi, Outcome,
    Proportion,
};
use crate::walk::{Ensemble, EnvironmentSharing, Trajectory, Walker};

pub const RESULTS_FILE: &str = "results.jsonl";
pub const CURVES_FILE: &str = "curves.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Everything an experiment produced, before any file is written.
#[derive(Clone, Debug, Default)]
pub struct Report {
    pub rows: Vec<Value>,
    pub curves: Option<Curves>,
    /// Some estimator reported insufficient data.
    pub insufficient: bool,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Curves {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

struct Rows<'a> {
    hash: &'a str,
    report: Report,
}

impl Rows<'_> {
    fn push(&mut self, record: &str, value: impl Serialize) -> Result<()> {
        self.push_with(record, value, Map::new())
    }

    fn push_with(&mut self, record: &str, value: impl Serialize, extra: Map<String, Value>) -> Result<()> {
        let mut obj = match serde_json::to_value(value)? {
            Value::Object(m) => m,
            other => {
                let mut m = Map::new();
                m.insert("value".into(), other);
                m
            }
        };
        obj.extend(extra);
        obj.insert("config_hash".into(), Value::String(self.hash.to_string()));
        obj.insert("record".into(), Value::String(record.to_string()));
        self.report.rows.push(Value::Object(obj));
        Ok(())
    }

    fn outcome<T: Serialize>(&mut self, record: &str, o: &Outcome<T>, extra: Map<String, Value>) -> Result<()> {
        if !o.is_ok() {
            self.report.insufficient = true;
        }
        self.push_with(record, o, extra)
    }
}

fn extra(pairs: &[(&str, Value)]) -> Map<String, Value> {
    pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
}

/// Runs the experiment of `cfg` with `seed` as master seed. Pure computation.
pub fn execute(cfg: &ExperimentConfig, seed: u64, hash: &str) -> Result<Report> {
    cfg.validate()?;
    let ens = Ensemble::new(cfg.model.clone(), seed, cfg.n_walks, cfg.horizon)?.with_sharing(cfg.sharing);
    let mut rows = Rows { hash, report: Report::default() };
    match cfg.kind {
        ExperimentKind::Simulate => simulate(&ens, &mut rows)?,
        ExperimentKind::Direction => direction(cfg, &ens, &mut rows)?,
        ExperimentKind::Renewal => renewal(cfg, &ens, &mut rows)?,
        ExperimentKind::Lemma5 => lemma5(cfg, &ens, &mut rows)?,
        ExperimentKind::Slab => slab(cfg, &ens, &mut rows)?,
        ExperimentKind::ZeroOneScan => zero_one(cfg, &ens, &mut rows)?,
        ExperimentKind::OracleCompare => oracle_compare(cfg, &ens, &mut rows)?,
    }
    Ok(rows.report)
}

fn simulate(ens: &Ensemble, rows: &mut Rows) -> Result<()> {
    for (i, t) in ens.simulate().iter().enumerate() {
        let steps: Vec<i32> = t.steps().iter().map(|d| d.signed_axis()).collect();
        rows.push(
            "trajectory",
            json!({ "walker": i, "walker_seed": t.walker_seed(), "dim": t.dim(), "steps": steps, "endpoint": t.endpoint() }),
        )?;
    }
    Ok(())
}

/// The configured cone, with `λ` chosen by a scan when requested.
fn resolve_cone(cfg: &ExperimentConfig, trajs: &[Trajectory], h: usize, rows: &mut Rows) -> Result<Option<ConeSpec>> {
    let base = cfg.base_cone()?;
    let c = cfg.cone.as_ref().expect("validated");
    if c.lambda != LambdaChoice::Scan {
        return Ok(Some(base));
    }
    let pilot = &trajs[..c.scan.pilot_walks.unwrap_or(trajs.len()).min(trajs.len())];
    let scan = lambda_scan(pilot, &base, &Lambda::dyadic_grid(c.scan.grid_size), h, c.scan.rate_floor)?;
    rows.push("lambda_scan", &scan)?;
    match scan {
        LambdaScan::Chosen { lambda, .. } => Ok(Some(base.with_lambda(lambda)?)),
        LambdaScan::NoRenewalsFound { .. } => {
            rows.report.insufficient = true;
            Ok(None)
        }
    }
}

fn renewals(trajs: &[Trajectory], spec: &ConeSpec, h: usize) -> Result<Vec<RenewalRecord>> {
    trajs.par_iter().map(|t| detect_renewals(t, spec, h)).collect()
}

fn direction(cfg: &ExperimentConfig, ens: &Ensemble, rows: &mut Rows) -> Result<()> {
    let trajs = ens.simulate();
    let l = cfg.direction.clone().expect("validated");
    let th = &cfg.thresholds;
    rows.push("transience", classify_transience(&trajs, &l, th)?)?;
    rows.push("speed", estimate_speed(&trajs, &l, th)?)?;
    let (level, _) = th.resolve(cfg.horizon);
    let raw = estimate_direction(DirectionInput::Trajectories { trajs: &trajs, min_norm: level });
    rows.outcome("direction", &raw, Map::new())?;
    if cfg.cone.is_some() {
        let h = cfg.confirm_horizon.expect("validated");
        if let Some(spec) = resolve_cone(cfg, &trajs, h, rows)? {
            let records = renewals(&trajs, &spec, h)?;
            let ren = estimate_direction(DirectionInput::Renewals(&records));
            rows.outcome("direction", &ren, Map::new())?;
            if let (Outcome::Ok(a), Outcome::Ok(b)) = (&raw, &ren) {
                rows.push("route_agreement", json!({ "angle": angle_between(&a.nu_hat, &b.nu_hat) }))?;
            }
        }
    }
    rows.push("clustering", antipodal_clustering(&trajs, th))
}

fn renewal(cfg: &ExperimentConfig, ens: &Ensemble, rows: &mut Rows) -> Result<()> {
    let trajs = ens.simulate();
    let h = cfg.confirm_horizon.expect("validated");
    let Some(spec) = resolve_cone(cfg, &trajs, h, rows)? else { return Ok(()) };
    let records = renewals(&trajs, &spec, h)?;
    for (i, r) in records.iter().enumerate() {
        rows.push(
            "renewals",
            json!({ "walker": i, "tau": r.times, "H": r.confirm_horizon, "censored_tail": r.censored_tail, "n_steps": r.n_steps }),
        )?;
    }
    let total: usize = records.iter().map(|r| r.len()).sum();
    rows.push(
        "renewal_summary",
        json!({
            "lambda": spec.lambda(),
            "H": h,
            "n_walks": records.len(),
            "n_renewals": total,
            "walks_with_two": records.iter().filter(|r| r.len() >= 2).count(),
            "censored_tails": records.iter().filter(|r| r.censored_tail).count(),
        }),
    )?;
    let incs: Vec<Vec<SiteCoord>> = records.iter().map(|r| r.increments()).collect();
    rows.outcome("independence", &independence_test(&incs), Map::new())?;
    if let Some(l_star) = cfg.renewal.as_ref().and_then(|r| r.l_star.as_ref()) {
        let osc = orthogonal_oscillation(&records, spec.direction(), l_star)?;
        rows.outcome("oscillation", &osc, Map::new())?;
    }
    Ok(())
}

fn lemma5(cfg: &ExperimentConfig, ens: &Ensemble, rows: &mut Rows) -> Result<()> {
    let trajs = ens.simulate();
    let h = cfg.confirm_horizon.expect("validated");
    let Some(spec) = resolve_cone(cfg, &trajs, h, rows)? else { return Ok(()) };
    let opts = cfg.lemma5.clone().unwrap_or_default();
    let check = |h: usize| -> Result<Outcome<_>> {
        let records = renewals(&trajs, &spec, h)?;
        lemma5_two_sided_check(&trajs, &records, &spec, opts.window, &cfg.thresholds, &opts.bootstrap)
    };
    let first = check(h)?;
    let tag = |h: usize| extra(&[("H", json!(h)), ("lambda", json!(spec.lambda()))]);
    rows.outcome("lemma5", &first, tag(h))?;
    if opts.censoring_check {
        let second = check(2 * h)?;
        rows.outcome("lemma5", &second, tag(2 * h))?;
        if let (Outcome::Ok(a), Outcome::Ok(b)) = (&first, &second) {
            let difference = (a.lhs.mean - b.lhs.mean).abs();
            let combined = a.lhs.half_width() + b.lhs.half_width();
            rows.push(
                "censoring_check",
                json!({
                    "H": h, "H2": 2 * h, "lhs_h": a.lhs.mean, "lhs_2h": b.lhs.mean,
                    "difference": difference, "combined_half_width": combined, "pass": difference < combined,
                }),
            )?;
        }
    }
    Ok(())
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(String::new, |v| v.to_string())
}

fn slab(cfg: &ExperimentConfig, ens: &Ensemble, rows: &mut Rows) -> Result<()> {
    let s = cfg.slab.as_ref().expect("validated");
    let curve = t_gamma_curve(ens, &s.normal, s.b, &s.widths, cfg.horizon)?;
    let mut curves = Curves {
        header: ["L", "n_left", "n_right", "n_censored", "p_left", "p_left_lo", "p_left_hi", "log_p_left"]
            .map(String::from)
            .to_vec(),
        rows: Vec::new(),
    };
    for r in &curve.rows {
        if r.p_left.is_none() {
            rows.report.insufficient = true;
        }
        rows.push("t_gamma_row", r)?;
        curves.rows.push(vec![
            r.width.to_string(),
            r.n_left.to_string(),
            r.n_right.to_string(),
            r.n_censored.to_string(),
            fmt_opt(r.p_left.map(|p| p.p)),
            fmt_opt(r.p_left.map(|p| p.lo)),
            fmt_opt(r.p_left.map(|p| p.hi)),
            fmt_opt(r.log_p_left),
        ]);
    }
    rows.push("t_gamma", json!({ "normal": curve.normal, "b": curve.b, "log_slope": curve.log_slope }))?;
    rows.report.curves = Some(curves);
    Ok(())
}

fn zero_one(cfg: &ExperimentConfig, ens: &Ensemble, rows: &mut Rows) -> Result<()> {
    let trajs = ens.simulate();
    let n = cfg.zero_one.clone().unwrap_or_default().n_angles;
    let scan = zero_one_scan(&trajs, n, &cfg.thresholds)?;
    let mut curves = Curves {
        header: ["angle", "p_hat_plus", "p_hat_minus", "state"].map(String::from).to_vec(),
        rows: Vec::new(),
    };
    for r in &scan.rows {
        rows.push("zero_one_angle", r)?;
        let state = serde_json::to_value(r.state)?.as_str().unwrap_or_default().to_string();
        curves.rows.push(vec![r.angle.to_string(), r.p_hat_plus.to_string(), r.p_hat_minus.to_string(), state]);
    }
    rows.push("zero_one_pattern", json!({ "pattern": scan.pattern, "nu": scan.nu, "n_angles": n }))?;
    rows.report.curves = Some(curves);
    Ok(())
}

/// Closed form for a homogeneous walk on an interval, when the target is one end.
fn ruin_closed_form(model: &EnvironmentModel, region: &RegionDescriptor, start: &SiteCoord, targets: &[ExitClass]) -> Option<f64> {
    let (RegionDescriptor::Interval { lo, hi }, Some(v)) = (region, model.fixed_vector()) else { return None };
    let s = start.coords()[0];
    let right = gamblers_ruin(v.probs()[0], (s - lo) as u64, (hi - s) as u64);
    match targets {
        [ExitClass::Right] => Some(right),
        [ExitClass::Left] => Some(1.0 - right),
        _ => None,
    }
}

fn oracle_compare(cfg: &ExperimentConfig, ens: &Ensemble, rows: &mut Rows) -> Result<()> {
    let o = cfg.oracle.as_ref().expect("validated");
    let region = o.region.compile()?;
    let start = cfg.oracle_start()?;
    let exact = match ens.sharing {
        EnvironmentSharing::Shared => {
            let env = QuenchedEnvironment::new(cfg.model.clone(), ens.master_seed)?;
            let p = exact_quenched_exit_with(&region.problem(env, start)?, &o.target, &o.solver)?.probability;
            MeanCi::from_samples([p]).expect("one sample")
        }
        EnvironmentSharing::PerWalk => {
            annealed_exit(&cfg.model, &o.region, start, &o.target, o.n_env, ens.master_seed, &o.solver)?.mean
        }
    };
    let classes: Vec<Option<ExitClass>> = (0..ens.n_walks)
        .into_par_iter()
        .map(|i| {
            let env = ens.environment(i);
            let mut w = Walker::starting_at(&env, ens.walker_seed(i), start);
            while w.time() < ens.horizon && region.contains(&w.position()) {
                w.step();
            }
            region.class_of(&w.position())
        })
        .collect();
    let exited = classes.iter().filter(|c| c.is_some()).count();
    let hits = classes.iter().filter(|c| c.is_some_and(|c| o.target.contains(&c))).count();
    let mc = Proportion::new(hits, exited);
    if mc.is_none() {
        rows.report.insufficient = true;
    }
    let p = exact.mean;
    let sigma = mc.map(|m| (p * (1.0 - p) / m.n as f64 + (exact.sd * exact.sd) / exact.n as f64).sqrt());
    let z = match (mc, sigma) {
        (Some(m), Some(s)) if s > 0.0 => Some((m.p - p) / s),
        (Some(m), Some(_)) => Some(if m.p == p { 0.0 } else { f64::INFINITY }),
        _ => None,
    };
    rows.push(
        "oracle_compare",
        json!({
            "region": o.region,
            "start": start,
            "target": o.target,
            "exact": exact,
            "n_env": o.n_env,
            "closed_form": ruin_closed_form(&cfg.model, &o.region, &start, &o.target),
            "mc": mc,
            "n_censored": ens.n_walks - exited,
            "z_score": z,
            "within_3_sigma": z.map(|z| z.abs() <= 3.0),
        }),
    )
}

/// Command-line options of `run`, already resolved.
#[derive(Clone, Debug)]
pub struct RunOptions {
    pub config: PathBuf,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub threads: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub config_path: String,
    pub master_seed: u64,
    pub seed_override: bool,
    pub tool_version: String,
    pub started_at: String,
    pub finished_at: String,
    pub threads: usize,
    pub kind: String,
    pub insufficient_data: bool,
    pub parameters: ExperimentConfig,
    pub outputs: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RunStatus {
    Ok,
    InsufficientData,
}

fn now() -> String {
    time::OffsetDateTime::now_utc()
        .format(&time::format_description::well_known::Rfc3339)
        .unwrap_or_default()
}

/// Writes `bytes` next to `path` and renames it into place.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn results_bytes(rows: &[Value]) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    for r in rows {
        serde_json::to_writer(&mut buf, r)?;
        buf.push(b'\n');
    }
    Ok(buf)
}

fn curves_bytes(c: &Curves) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(&c.header).map_err(io)?;
    for r in &c.rows {
        w.write_record(r).map_err(io)?;
    }
    w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))
}

/// Reads the config, runs the experiment on a pool of `threads` workers and
/// writes `results.jsonl`, `curves.csv` (when the experiment has curves) and
/// `manifest.json` into the output directory.
pub fn run(opts: &RunOptions) -> Result<(RunStatus, PathBuf)> {
    let started_at = now();
    let bytes = fs::read(&opts.config)?;
    let text = String::from_utf8(bytes.clone()).map_err(|_| Error::Config("config is not UTF-8".into()))?;
    let cfg = ExperimentConfig::from_toml(&text)?;
    let hash = config_hash(&bytes, opts.seed);
    let seed = opts.seed.unwrap_or(cfg.master_seed);
    let out = opts
        .out
        .clone()
        .or_else(|| cfg.output.clone())
        .unwrap_or_else(|| PathBuf::from("rwre-out"));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.threads.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let report = pool.install(|| execute(&cfg, seed, &hash))?;

    fs::create_dir_all(&out)?;
    let mut outputs = vec![RESULTS_FILE.to_string()];
    write_atomic(&out.join(RESULTS_FILE), &results_bytes(&report.rows)?)?;
    if let Some(c) = &report.curves {
        write_atomic(&out.join(CURVES_FILE), &curves_bytes(c)?)?;
        outputs.push(CURVES_FILE.to_string());
    }
    outputs.push(MANIFEST_FILE.to_string());
    let manifest = RunManifest {
        config_hash: hash,
        config_path: opts.config.display().to_string(),
        master_seed: seed,
        seed_override: opts.seed.is_some(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        started_at,
        finished_at: now(),
        threads: opts.threads,
        kind: cfg.kind_name(),
        insufficient_data: report.insufficient,
        parameters: cfg,
        outputs,
    };
    write_atomic(&out.join(MANIFEST_FILE), &serde_json::to_vec_pretty(&manifest)?)?;
    let status = if report.insufficient { RunStatus::InsufficientData } else { RunStatus::Ok };
    Ok((status, out))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(text: &str) -> ExperimentConfig {
        ExperimentConfig::from_toml(text).unwrap()
    }

    const ORACLE: &str = r#"
kind = "oracle-compare"
dimension = 1
master_seed = 3
n_walks = 4000
horizon = 10000
[model]
kind = "homogeneous"
probs = [0.7, 0.3]
[oracle]
region = { kind = "interval", lo = -2, hi = 2 }
"#;

    #[test]
    fn oracle_compare_reports_exact_and_mc() {
        let r = execute(&cfg(ORACLE), 3, "h").unwrap();
        assert_eq!(r.rows.len(), 1);
        let row = &r.rows[0];
        assert_eq!(row["record"], "oracle_compare");
        assert_eq!(row["config_hash"], "h");
        let exact = row["exact"]["mean"].as_f64().unwrap();
        assert!((exact - 49.0 / 58.0).abs() < 1e-12);
        assert!((row["closed_form"].as_f64().unwrap() - 49.0 / 58.0).abs() < 1e-12);
        assert_eq!(row["within_3_sigma"], true);
        assert!(!r.insufficient);
    }

    #[test]
    fn simulate_emits_one_row_per_walk() {
        let text = ORACLE.replace("oracle-compare", "simulate").replace("n_walks = 4000", "n_walks = 10");
        let r = execute(&cfg(&text), 3, "h").unwrap();
        assert_eq!(r.rows.len(), 10);
        assert!(r.rows.iter().all(|row| row["record"] == "trajectory" && row["steps"].as_array().unwrap().len() == 10000));
    }

    #[test]
    fn scan_without_renewals_is_insufficient() {
        let text = r#"
kind = "renewal"
dimension = 2
master_seed = 1
n_walks = 5
horizon = 200
confirm_horizon = 400
[model]
kind = "homogeneous"
probs = [0.25, 0.25, 0.25, 0.25]
[cone]
sigma = [1, 1]
basis = [[1, 1], [1, -1]]
l = [1, 0]
lambda = "scan"
scan = { grid_size = 3 }
"#;
        let r = execute(&cfg(text), 1, "h").unwrap();
        assert!(r.insufficient);
        assert_eq!(r.rows[0]["record"], "lambda_scan");
        assert_eq!(r.rows[0]["result"], "no_renewals_found");
    }
}
