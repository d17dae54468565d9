//! Constrained multi-objective policy optimization: per-objective returns on
//! predicted rollouts, improvement-weighted local policies, bisection-priced
//! constraint multipliers, and a preference-weighted mixture projected onto a
//! parametric global policy.

pub mod global;
pub mod local;
pub mod multipliers;
pub mod objectives;
pub mod planning;
pub mod policy;
pub mod train;

pub use global::{fit_global_policy, mixture_weights, validate_simplex, GlobalFit};
pub use local::{fit_local_policies, improvement_weights, EvaluatedAction, LocalPolicySample};
pub use multipliers::{bisect_multiplier, update_multipliers, BisectOutcome, MultiplierFit, SampleSlacks};
pub use objectives::{
    evaluate_objectives, ObjectiveKind, ObjectiveSet, ObjectiveVector, RolloutAggregate,
    NUM_CONSTRAINTS,
};
pub use planning::plan_rollout;
pub use policy::{load_policy, save_policy, GaussianPolicy, WeightedSample};
pub use train::{evaluate_policy, train, train_with_predictor, EpochRow, TrainConfig, TrainOutcome};
