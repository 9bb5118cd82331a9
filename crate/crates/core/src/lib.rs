//! Optimal control of the mutation rate of the (1+1) evolutionary algorithm
//! on OneMax.
//!
//! The fitness process is a Markov decision process whose state is the
//! number of ones and whose action is the per-bit flip probability. This
//! crate builds its exact transition law ([`probability`]), solves it by
//! value iteration or backward induction ([`solver`]), learns it model-free
//! with tabular Q-learning ([`qlearning`]), and benchmarks policies on the
//! bit-level algorithm ([`simulator`], [`evaluation`]).

pub mod error;
pub mod evaluation;
pub mod fmt;
pub mod oracle;
pub mod policy;
pub mod probability;
pub mod qlearning;
pub mod simulator;
pub mod solver;

pub use error::{Error, Result};
pub use evaluation::{
    compare_policies, export_figure_data, figure_curves, mean_relative_suboptimality,
    monte_carlo_eval, reference_policies, BenchmarkOptions, BenchmarkReport, EvalStart,
    FigureCurve, MarksOptions, PolicyBenchmark, StepStats,
};
pub use oracle::enumerate_transition_oracle;
pub use policy::{load_policy, save_policy, PolicySpec};
pub use probability::{
    binomial_pmf, build_transition_model, elitist_truncate, net_gain_pmf, NetGainDistribution,
    ProblemSpec, TransitionModel, TransitionRow,
};
pub use qlearning::{
    choose_action, greedy_from_q, q_update, train, AlphaSchedule, EpsilonSchedule, LearningConfig,
    QTable, Sampler, StartDistribution, TrainingReport,
};
pub use simulator::{
    mutate, run_episode, sample_transition, step, Bitstring, EpisodeTrace, RngSeed, Start,
};
pub use solver::{
    backward_induction, greedy_policy, policy_evaluation, policy_evaluation_exact, value_iteration,
    SolveOptions, SolveReport, ValueFunction,
};
