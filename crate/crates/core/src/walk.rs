//! Quenched trajectories and stopping times evaluated on them.
//!
//! Stopping times are computed on finite paths, so an event that has not
//! happened by the end of the path is reported as [`StopResult::NotByHorizon`]
//! rather than as an infinite time.

use std::io::{BufRead, Write};
use std::sync::Arc;

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::env::{check_dim, Direction, EnvironmentModel, QuenchedEnvironment, SiteCoord};
use crate::error::{config_err, Error, Result};
use crate::rng;

/// A finite nearest-neighbour path started at the origin.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Trajectory {
    dim: usize,
    walker_seed: u64,
    steps: Vec<Direction>,
}

impl Trajectory {
    pub fn new(dim: usize, walker_seed: u64, steps: Vec<Direction>) -> Result<Self> {
        check_dim(dim)?;
        if let Some(s) = steps.iter().find(|s| s.axis() >= dim) {
            return config_err(format!("step {s:?} leaves dimension {dim}"));
        }
        Ok(Trajectory { dim, walker_seed, steps })
    }

    /// Builds a path from signed axis indices (`+1` = `+e_1`, `-2` = `-e_2`, ...).
    pub fn from_signed_axes(dim: usize, walker_seed: u64, steps: &[i32]) -> Result<Self> {
        let steps = steps
            .iter()
            .map(|&s| Direction::from_signed_axis(s, dim))
            .collect::<Result<Vec<_>>>()?;
        Self::new(dim, walker_seed, steps)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn walker_seed(&self) -> u64 {
        self.walker_seed
    }

    pub fn steps(&self) -> &[Direction] {
        &self.steps
    }

    /// Number of steps `N`.
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// `X_0, ..., X_N`.
    pub fn positions(&self) -> Vec<SiteCoord> {
        let mut out = Vec::with_capacity(self.steps.len() + 1);
        let mut x = SiteCoord::origin(self.dim);
        out.push(x);
        for &s in &self.steps {
            x = x.step(s);
            out.push(x);
        }
        out
    }

    pub fn endpoint(&self) -> SiteCoord {
        self.steps.iter().fold(SiteCoord::origin(self.dim), |x, &s| x.step(s))
    }

    /// `X_n · l` for `n = 0..=N`, exact.
    pub fn levels(&self, l: &[i64]) -> Vec<i64> {
        let mut out = Vec::with_capacity(self.steps.len() + 1);
        let mut acc = 0i64;
        out.push(0);
        for &s in &self.steps {
            acc += s.sign() * l[s.axis()];
            out.push(acc);
        }
        out
    }

    /// `X_n · l` for a real direction.
    pub fn levels_f64(&self, l: &[f64]) -> Vec<f64> {
        self.positions().iter().map(|x| x.dot_f64(l)).collect()
    }

    /// The path reflected through the origin.
    pub fn mirrored(&self) -> Trajectory {
        self.map_steps(|d| d.opposite())
    }

    /// Applies a lattice symmetry given as an image for each direction.
    pub fn map_steps(&self, f: impl Fn(Direction) -> Direction) -> Trajectory {
        Trajectory {
            dim: self.dim,
            walker_seed: self.walker_seed,
            steps: self.steps.iter().map(|&d| f(d)).collect(),
        }
    }

    pub fn prefix(&self, n: usize) -> Trajectory {
        Trajectory {
            dim: self.dim,
            walker_seed: self.walker_seed,
            steps: self.steps[..n.min(self.steps.len())].to_vec(),
        }
    }
}

/// Finite-horizon value of a stopping time.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopResult {
    Hit(usize),
    NotByHorizon,
}

impl StopResult {
    pub fn time(self) -> Option<usize> {
        match self {
            StopResult::Hit(t) => Some(t),
            StopResult::NotByHorizon => None,
        }
    }

    fn from_position(p: Option<usize>) -> Self {
        p.map_or(StopResult::NotByHorizon, StopResult::Hit)
    }
}

/// A walker advancing one step at a time through a quenched environment.
pub struct Walker<'a> {
    env: &'a QuenchedEnvironment,
    position: SiteCoord,
    stream: ChaCha8Rng,
    time: usize,
}

impl<'a> Walker<'a> {
    pub fn new(env: &'a QuenchedEnvironment, walker_seed: u64) -> Self {
        Walker {
            env,
            position: SiteCoord::origin(env.dimension()),
            stream: rng::walker_stream(walker_seed),
            time: 0,
        }
    }

    /// A walker started at `start` instead of the origin.
    pub fn starting_at(env: &'a QuenchedEnvironment, walker_seed: u64, start: SiteCoord) -> Self {
        assert_eq!(start.dim(), env.dimension(), "start and environment differ in dimension");
        Walker { position: start, ..Walker::new(env, walker_seed) }
    }

    pub fn position(&self) -> SiteCoord {
        self.position
    }

    pub fn time(&self) -> usize {
        self.time
    }

    #[inline]
    pub fn step(&mut self) -> Direction {
        let omega = self.env.transition_unchecked(&self.position);
        let dir = omega.choose(rng::unit_f64(&mut self.stream));
        self.position = self.position.step(dir);
        self.time += 1;
        dir
    }
}

/// Simulates `horizon` steps under the quenched law of `env`.
pub fn simulate(env: &QuenchedEnvironment, walker_seed: u64, horizon: usize) -> Trajectory {
    let mut w = Walker::new(env, walker_seed);
    let steps = (0..horizon).map(|_| w.step()).collect();
    Trajectory { dim: env.dimension(), walker_seed, steps }
}

/// Simulates until `stop(X_n)` holds or `max_steps` steps were taken.
///
/// The result is a prefix of `simulate(env, walker_seed, max_steps)`.
pub fn simulate_until(
    env: &QuenchedEnvironment,
    walker_seed: u64,
    max_steps: usize,
    mut stop: impl FnMut(&SiteCoord) -> bool,
) -> Trajectory {
    let mut w = Walker::new(env, walker_seed);
    let mut steps = Vec::new();
    if !stop(&w.position()) {
        while steps.len() < max_steps {
            steps.push(w.step());
            if stop(&w.position()) {
                break;
            }
        }
    }
    Trajectory { dim: env.dimension(), walker_seed, steps }
}

/// Whether walkers share one environment (quenched averages) or each draws its
/// own (annealed averages).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvironmentSharing {
    #[default]
    PerWalk,
    Shared,
}

/// An ensemble of walkers: seeds, environments and horizon.
#[derive(Clone, Debug)]
pub struct Ensemble {
    pub model: Arc<EnvironmentModel>,
    pub master_seed: u64,
    pub n_walks: usize,
    pub horizon: usize,
    pub sharing: EnvironmentSharing,
}

impl Ensemble {
    pub fn new(model: EnvironmentModel, master_seed: u64, n_walks: usize, horizon: usize) -> Result<Self> {
        model.validate()?;
        Ok(Ensemble {
            model: Arc::new(model),
            master_seed,
            n_walks,
            horizon,
            sharing: EnvironmentSharing::PerWalk,
        })
    }

    pub fn with_sharing(mut self, sharing: EnvironmentSharing) -> Self {
        self.sharing = sharing;
        self
    }

    pub fn walker_seed(&self, i: usize) -> u64 {
        rng::walker_seed(self.master_seed, i as u64)
    }

    pub fn environment(&self, i: usize) -> QuenchedEnvironment {
        let seed = match self.sharing {
            EnvironmentSharing::PerWalk => rng::environment_seed(self.master_seed, i as u64),
            EnvironmentSharing::Shared => self.master_seed,
        };
        QuenchedEnvironment::shared(self.model.clone(), seed).expect("validated model")
    }

    pub fn trajectory(&self, i: usize) -> Trajectory {
        simulate(&self.environment(i), self.walker_seed(i), self.horizon)
    }

    /// All trajectories in walker order. Parallel; output independent of thread count.
    pub fn simulate(&self) -> Vec<Trajectory> {
        (0..self.n_walks).into_par_iter().map(|i| self.trajectory(i)).collect()
    }

    /// Maps each walker's trajectory through `f` without keeping the paths.
    pub fn map<T: Send>(&self, f: impl Fn(usize, Trajectory) -> T + Sync + Send) -> Vec<T> {
        (0..self.n_walks)
            .into_par_iter()
            .map(|i| f(i, self.trajectory(i)))
            .collect()
    }
}

fn check_direction(l: &[i64], dim: usize) -> Result<()> {
    if l.len() != dim {
        return config_err(format!("direction has {} coordinates, path has dimension {dim}", l.len()));
    }
    if l.iter().all(|&c| c == 0) {
        return config_err("direction must be nonzero");
    }
    Ok(())
}

/// `T^l_s`: the first `n` with `X_n · l > s`.
pub fn first_passage(traj: &Trajectory, l: &[i64], s: f64) -> Result<StopResult> {
    check_direction(l, traj.dim)?;
    Ok(StopResult::from_position(
        traj.levels(l).iter().position(|&v| v as f64 > s),
    ))
}

/// `D_l`: the first `n ≥ 1` with `X_n · l < X_0 · l`.
pub fn backtrack_time(traj: &Trajectory, l: &[i64]) -> Result<StopResult> {
    check_direction(l, traj.dim)?;
    Ok(StopResult::from_position(traj.levels(l).iter().position(|&v| v < 0)))
}

/// `D_B`: the first `n` with `X_n ∉ region`.
pub fn region_exit_time(traj: &Trajectory, region: impl Fn(&SiteCoord) -> bool) -> Result<StopResult> {
    if !region(&SiteCoord::origin(traj.dim)) {
        return Err(Error::Precondition("region does not contain the starting point".into()));
    }
    Ok(StopResult::from_position(traj.positions().iter().position(|x| !region(x))))
}

/// The open slab `{x : -bL < x·l' < L}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Slab {
    pub normal: Vec<f64>,
    pub b: f64,
    pub width: f64,
}

impl Slab {
    pub fn new(normal: Vec<f64>, b: f64, width: f64) -> Result<Self> {
        if !(b > 0.0 && width > 0.0 && b.is_finite() && width.is_finite()) {
            return config_err(format!("slab needs b > 0 and L > 0 (got b={b}, L={width})"));
        }
        if normal.iter().all(|&c| c == 0.0) || normal.iter().any(|c| !c.is_finite()) {
            return config_err("slab normal must be finite and nonzero");
        }
        Ok(Slab { normal, b, width })
    }

    /// Exit side of a site, `None` inside. Boundary sites count as exits.
    pub fn side(&self, x: &SiteCoord) -> Option<SlabSide> {
        let v = x.dot_f64(&self.normal);
        if v >= self.width {
            Some(SlabSide::Right)
        } else if v <= -self.b * self.width {
            Some(SlabSide::Left)
        } else {
            None
        }
    }

    pub fn contains(&self, x: &SiteCoord) -> bool {
        self.side(x).is_none()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlabSide {
    Right,
    Left,
}

/// Outcome of a slab-exit experiment on one path.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SlabExit {
    Exited { side: SlabSide, time: usize },
    NotByHorizon,
}

impl SlabExit {
    pub fn side(self) -> Option<SlabSide> {
        match self {
            SlabExit::Exited { side, .. } => Some(side),
            SlabExit::NotByHorizon => None,
        }
    }
}

/// Which side of `U_{l',b,L}` the path leaves through first.
pub fn slab_exit_side(traj: &Trajectory, slab: &Slab) -> Result<SlabExit> {
    if slab.normal.len() != traj.dim {
        return config_err("slab normal dimension does not match path");
    }
    Ok(traj
        .positions()
        .iter()
        .enumerate()
        .find_map(|(n, x)| slab.side(x).map(|side| SlabExit::Exited { side, time: n }))
        .unwrap_or(SlabExit::NotByHorizon))
}

/// Simulates one walk only until it leaves `slab` (or `max_steps`).
pub fn simulate_slab_exit(env: &QuenchedEnvironment, walker_seed: u64, slab: &Slab, max_steps: usize) -> SlabExit {
    let mut w = Walker::new(env, walker_seed);
    while w.time() < max_steps {
        w.step();
        if let Some(side) = slab.side(&w.position()) {
            return SlabExit::Exited { side, time: w.time() };
        }
    }
    SlabExit::NotByHorizon
}

/// One line of a trajectory export.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryRecord {
    pub walker_seed: u64,
    pub dim: usize,
    pub steps: Vec<i32>,
}

impl From<&Trajectory> for TrajectoryRecord {
    fn from(t: &Trajectory) -> Self {
        TrajectoryRecord {
            walker_seed: t.walker_seed,
            dim: t.dim,
            steps: t.steps.iter().map(|d| d.signed_axis()).collect(),
        }
    }
}

impl TryFrom<TrajectoryRecord> for Trajectory {
    type Error = Error;
    fn try_from(r: TrajectoryRecord) -> Result<Self> {
        Trajectory::from_signed_axes(r.dim, r.walker_seed, &r.steps)
    }
}

pub fn write_jsonl<W: Write>(trajs: &[Trajectory], mut out: W) -> Result<()> {
    for t in trajs {
        serde_json::to_writer(&mut out, &TrajectoryRecord::from(t))?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_jsonl<R: BufRead>(input: R) -> Result<Vec<Trajectory>> {
    let mut out = Vec::new();
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: TrajectoryRecord = serde_json::from_str(&line)?;
        out.push(rec.try_into()?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn path(dim: usize, steps: &[i32]) -> Trajectory {
        Trajectory::from_signed_axes(dim, 0, steps).unwrap()
    }

    fn srw(dim: usize) -> QuenchedEnvironment {
        QuenchedEnvironment::new(EnvironmentModel::symmetric(dim).unwrap(), 3).unwrap()
    }

    #[test]
    fn zero_horizon_is_empty() {
        let t = simulate(&srw(2), 1, 0);
        assert!(t.is_empty());
        assert_eq!(t.endpoint(), SiteCoord::origin(2));
    }

    #[test]
    fn first_passage_examples() {
        assert_eq!(first_passage(&path(1, &[1, -1]), &[1], 0.0).unwrap(), StopResult::Hit(1));
        assert_eq!(first_passage(&path(1, &[-1, 1, 1]), &[1], 0.0).unwrap(), StopResult::Hit(3));
        assert_eq!(first_passage(&path(1, &[-1, -1]), &[1], 0.0).unwrap(), StopResult::NotByHorizon);
        assert!(matches!(first_passage(&path(1, &[1]), &[0], 0.0), Err(Error::Config(_))));
    }

    #[test]
    fn backtrack_examples() {
        assert_eq!(backtrack_time(&path(2, &[1, 1, 1, 2]), &[1, 0]).unwrap(), StopResult::NotByHorizon);
        assert_eq!(backtrack_time(&path(1, &[-1]), &[1]).unwrap(), StopResult::Hit(1));
        assert!(backtrack_time(&path(2, &[1]), &[0, 0]).is_err());
    }

    #[test]
    fn region_exit_examples() {
        assert_eq!(region_exit_time(&path(1, &[1, 1, 1]), |_| true).unwrap(), StopResult::NotByHorizon);
        let slab = Slab::new(vec![1.0], 1.0, 2.0).unwrap();
        assert_eq!(region_exit_time(&path(1, &[1, 1]), |x| slab.contains(x)).unwrap(), StopResult::Hit(2));
        assert!(matches!(
            region_exit_time(&path(1, &[1]), |x| x.coords()[0] > 0),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn slab_side_examples() {
        let slab = Slab::new(vec![1.0, 0.0], 3.0, 5.0).unwrap();
        let right = slab_exit_side(&path(2, &[1; 8]), &slab).unwrap();
        assert_eq!(right, SlabExit::Exited { side: SlabSide::Right, time: 5 });
        let slab = Slab::new(vec![1.0, 0.0], 1.0, 5.0).unwrap();
        assert_eq!(slab_exit_side(&path(2, &[-1; 8]), &slab).unwrap().side(), Some(SlabSide::Left));
        assert_eq!(slab_exit_side(&path(2, &[2; 8]), &slab).unwrap(), SlabExit::NotByHorizon);
        assert!(Slab::new(vec![1.0], 0.0, 1.0).is_err());
    }

    #[test]
    fn drift_lln_1d() {
        let ens = Ensemble::new(EnvironmentModel::homogeneous(vec![0.7, 0.3]).unwrap(), 11, 1000, 10_000).unwrap();
        let speeds = ens.map(|_, t| t.endpoint().coords()[0] as f64 / t.len() as f64);
        let mean = speeds.iter().sum::<f64>() / speeds.len() as f64;
        assert!((0.38..=0.42).contains(&mean), "{mean}");
    }

    #[test]
    fn thread_count_does_not_change_paths() {
        let ens = Ensemble::new(EnvironmentModel::dirichlet(vec![1.0; 4]).unwrap(), 5, 64, 500).unwrap();
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(|| ens.simulate());
        let eight = rayon::ThreadPoolBuilder::new().num_threads(8).build().unwrap().install(|| ens.simulate());
        assert_eq!(one, eight);
    }

    #[test]
    fn step_frequencies_match_vector() {
        let probs = [0.4, 0.1, 0.3, 0.2];
        let env = QuenchedEnvironment::new(EnvironmentModel::homogeneous(probs.to_vec()).unwrap(), 0).unwrap();
        let t = simulate(&env, 99, 200_000);
        let n = t.len() as f64;
        for (i, p) in probs.iter().enumerate() {
            let count = t.steps().iter().filter(|d| d.index() == i).count() as f64;
            let sigma = (n * p * (1.0 - p)).sqrt();
            assert!((count - n * p).abs() < 3.0 * sigma, "dir {i}: {count} vs {}", n * p);
        }
    }

    #[test]
    fn slab_exit_shortcut_matches_full_path() {
        let env = QuenchedEnvironment::new(EnvironmentModel::dirichlet(vec![1.0; 4]).unwrap(), 8).unwrap();
        let slab = Slab::new(vec![0.6, 0.8], 1.5, 6.0).unwrap();
        for seed in 0..50 {
            let full = simulate(&env, seed, 2000);
            assert_eq!(simulate_slab_exit(&env, seed, &slab, 2000), slab_exit_side(&full, &slab).unwrap());
        }
    }

    #[test]
    fn jsonl_roundtrip() {
        let trajs: Vec<_> = (0..5).map(|s| simulate(&srw(3), s, 40)).collect();
        let mut buf = Vec::new();
        write_jsonl(&trajs, &mut buf).unwrap();
        let back = read_jsonl(&buf[..]).unwrap();
        assert_eq!(back, trajs);
        assert!(read_jsonl(&b"{\"walker_seed\":1,\"dim\":1,\"steps\":[2]}\n"[..]).is_err());
    }

    fn arb_path() -> impl Strategy<Value = (usize, Vec<i32>)> {
        (1usize..=3).prop_flat_map(|d| {
            let step = prop_oneof![(1..=d as i32), (1..=d as i32).prop_map(|a| -a)];
            (Just(d), proptest::collection::vec(step, 0..60))
        })
    }

    proptest! {
        #[test]
        fn prefix_stability(seed in any::<u64>(), h1 in 0usize..200, extra in 0usize..200) {
            let env = QuenchedEnvironment::new(EnvironmentModel::dirichlet(vec![1.0; 4]).unwrap(), 2).unwrap();
            let short = simulate(&env, seed, h1);
            let long = simulate(&env, seed, h1 + extra);
            prop_assert_eq!(short.steps(), &long.steps()[..h1]);
        }

        #[test]
        fn stopping_times_match_linear_scan(
            (d, steps) in arb_path(),
            lraw in proptest::collection::vec(-3i64..=3, 3),
            s in 0.0f64..5.0,
            normal in proptest::collection::vec(-1.0f64..1.0, 3),
            b in 0.2f64..3.0,
            width in 0.5f64..6.0,
        ) {
            let t = Trajectory::from_signed_axes(d, 0, &steps).unwrap();
            let l = &lraw[..d];
            prop_assume!(l.iter().any(|&c| c != 0));
            let pos = t.positions();
            let dot = |x: &SiteCoord| -> i64 { x.coords().iter().zip(l).map(|(a, b)| a * b).sum() };

            let mut fp = StopResult::NotByHorizon;
            for (n, x) in pos.iter().enumerate() {
                if dot(x) as f64 > s { fp = StopResult::Hit(n); break; }
            }
            prop_assert_eq!(first_passage(&t, l, s).unwrap(), fp);

            let mut bt = StopResult::NotByHorizon;
            for n in 1..pos.len() {
                if dot(&pos[n]) < dot(&pos[0]) { bt = StopResult::Hit(n); break; }
            }
            prop_assert_eq!(backtrack_time(&t, l).unwrap(), bt);

            let normal = &normal[..d];
            prop_assume!(normal.iter().any(|&c| c != 0.0));
            let slab = Slab::new(normal.to_vec(), b, width).unwrap();
            let mut ex = StopResult::NotByHorizon;
            let mut side = None;
            for (n, x) in pos.iter().enumerate() {
                let v: f64 = x.coords().iter().zip(normal).map(|(a, c)| *a as f64 * c).sum();
                if v >= width { ex = StopResult::Hit(n); side = Some(SlabSide::Right); break; }
                if v <= -b * width { ex = StopResult::Hit(n); side = Some(SlabSide::Left); break; }
            }
            prop_assert_eq!(region_exit_time(&t, |x| slab.contains(x)).unwrap(), ex);
            prop_assert_eq!(slab_exit_side(&t, &slab).unwrap().side(), side);
        }
    }
}
