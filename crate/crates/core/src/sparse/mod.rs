//! Sparse recovery primitives: weighted ℓ1 minimisation and the
//! add / least-squares / delete support estimation steps.

mod l1;
mod ls;
mod support;

pub use l1::{solve_weighted_l1, solve_weighted_l1_from, L1Problem, L1Solution, SolverConfig};
pub use ls::{least_squares_on_support, LS_CONDITION_LIMIT};
pub use support::{prune, support_overlap_policy, thresh, SupportSet};
