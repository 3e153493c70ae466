//! Minimization of `max_i f_i(x)` over a Euclidean ball or a truncated
//! simplex by ball-oracle acceleration.

pub mod accelerator;
pub mod apps;
pub mod error;
pub mod ball_oracle;
pub mod geometry;
pub mod linalg;
pub mod maintain_mvm;
pub mod problem;
pub mod refcheck;
pub mod rng;
pub mod sketch_mve;
pub mod softmax_grad;
pub mod sum_tree;

pub use error::{Error, Result};
pub use geometry::{GeometrySetup, SetupKind};
pub use linalg::Matrix;
pub use problem::Objective;
