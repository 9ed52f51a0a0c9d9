//! Budgeted pool-based active learning with nearest-neighbor label inference.
//!
//! The crate is organized around a small pipeline:
//!
//! - [`geometry`]: points, pools, and deterministic nearest-neighbor queries;
//! - [`problems`]: synthetic binary-classification families with an analytic
//!   regression function and verifiers for the smoothness / margin-noise
//!   assumptions they declare;
//! - [`oracle`]: a seeded, budgeted, memoizing label oracle;
//! - [`kalls`]: the active learner itself, producing a 1-NN classifier over
//!   the points whose labels it inferred confidently;
//! - [`baseline`]: the passive k-NN comparison arm;
//! - [`eval`]: excess-risk estimation against the known Bayes rule, log-log
//!   rate fitting, and a couple of executable inequality checkers;
//! - [`sweep`]: seeded replication sweeps over budgets, emitting CSV/JSON.
//!
//! Every randomized entry point takes an explicit seed and is deterministic
//! given it. With the default `parallel` feature, sweeps and Monte Carlo
//! evaluation fan out over a thread pool; outputs are byte-identical to the
//! sequential build because all reductions happen in a fixed order.

pub mod baseline;
pub mod classifier;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod kalls;
pub mod oracle;
mod par;
pub mod problems;
mod seed;
pub mod sweep;

pub use classifier::NNClassifier;
pub use error::Error;
pub use geometry::{Point, Pool};
pub use oracle::BudgetedOracle;
pub use problems::ProblemSpec;

/// Binary class label; only the values 0 and 1 are used.
pub type Label = u8;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
