//! Star-set reachability analysis for feed-forward networks with
//! piece-wise linear activations.

pub mod activation;
pub mod hull;
pub mod lp;
pub mod model_io;
pub mod network;
pub mod reach;
pub mod relax;
pub mod sampling;
pub mod star;
pub mod verify;

pub use activation::{ActivationError, ActivationKind};
pub use lp::{Lp, LpConfig, LpError, LpOutcome, Polyhedron, Sense};
pub use network::{Layer, Network, NetworkError};
pub use reach::{reach, reach_approx, reach_exact, Method, ReachError, ReachOptions, ReachResult, ReachStats};
pub use star::{Anchor, DimBounds, Star, StarError};
pub use verify::{
    check_local_robustness, check_safety, counter_input_set, RobustStatus, RobustnessOptions, RobustnessResult,
    SafetyStatus, Verdict, VerifyError,
};
