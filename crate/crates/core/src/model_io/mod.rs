//! Reading networks and verification problems from disk formats.

mod nnet;
mod problem;

pub use nnet::{normalize_input_box, parse_nnet, write_nnet, NnetError, NnetMetadata};
pub use problem::{parse_problem, InputSet, ProblemError, ProblemSpec};
