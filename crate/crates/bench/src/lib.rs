//! Fixtures shared by the criterion benchmarks.

use evoctrl_core::{build_transition_model, ProblemSpec, TransitionModel};

/// Full-grid problem of length `n`.
pub fn spec(n: usize) -> ProblemSpec {
    ProblemSpec::with_default_grid(n).expect("n >= 1")
}

/// Full-grid transition model of length `n`.
pub fn model(n: usize) -> TransitionModel {
    build_transition_model(&spec(n))
}
