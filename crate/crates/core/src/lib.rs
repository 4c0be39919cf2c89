//! Monte Carlo laboratory for random walks in i.i.d. random environments on `Z^d`.
//!
//! * [`env`]: environment laws and lazily generated, reproducible quenched environments.
//! * [`walk`]: trajectories and stopping times on finite paths.
//! * [`cone`]: exact cone geometry and cone renewal times.
//! * [`stats`]: estimators and diagnostics built on ensembles of paths.
//! * [`oracle`]: exact exit probabilities and one-dimensional closed forms.
//! * [`cli`]: configuration, experiment runner and result comparison.

pub mod cli;
pub mod cone;
pub mod env;
pub mod error;
pub mod oracle;
pub mod rng;
pub mod stats;
pub mod walk;

pub use cone::{cone_contains, detect_renewals, fresh_maxima, lambda_scan, ConeSpec, Lambda, LambdaScan, RenewalRecord};
pub use env::{sample_dirichlet, Direction, EnvironmentModel, QuenchedEnvironment, SiteCoord, TransitionVector};
pub use error::{Error, Result};
pub use walk::{
    backtrack_time, first_passage, region_exit_time, simulate, slab_exit_side, Ensemble, EnvironmentSharing, Slab,
    SlabExit, SlabSide, StopResult, Trajectory,
};
