//! Robust and Wasserstein distributionally robust Bellman operators, the
//! Lagrangian dual of the trajectory-level DR value, and its finite-support
//! oracle.

mod dual;
mod inner;
mod oracle;
mod rectangular;
mod robust;

pub use dual::{dr_value_dual, penalized_infimum, DualEvaluation, DualSolver, LambdaSearch};
pub use inner::{constrained_min_linear, inner_min_linear};
pub use oracle::{
    budgeted_transport_min, budgeted_transport_min_lp, dr_value_oracle, OracleSolver, OracleSupport, MAX_SUPPORT,
};
pub use rectangular::{
    dr_bellman_apply, dr_optimal_apply, dr_policy_evaluation, dr_policy_iteration, dr_row_value, DrPolicyIteration,
};
pub use robust::{robust_bellman_apply, robust_greedy, robust_policy_apply, robust_value_iteration, UncertaintySet};
