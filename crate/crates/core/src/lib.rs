//! Level-k gradient play and related optimizers for two-player
//! differentiable games.

pub mod certificates;
pub mod games;
pub mod harness;
pub mod linalg;
pub mod optimizers;
pub mod rng;
pub mod toygan;

pub use games::{AnalyticGame, DifferentiableGame, GameError, GameJacobianBlocks, JointState};
pub use linalg::{LinalgError, Matrix, Vector};
pub use optimizers::{Method, OptimizerConfig, OptimizerError, ReasoningTrace, Trajectory};
