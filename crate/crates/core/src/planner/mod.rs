//! Goal-directed recourse MDPs built from an action catalog, with value
//! iteration and tabular Q-learning solvers.

mod analysis;
mod catalog;
mod mdp;
mod recourse;
mod solve;

pub use analysis::{
    policy_cost, reachability, rollout, simulate_policy, PolicyCost, Step, Trajectory, ABSORPTION_SLACK,
    FIXED_POINT_TOLERANCE,
};
pub use catalog::{generic_class_of, Action, ActionCatalog, Effect, Outcome, PROBABILITY_TOLERANCE};
pub use mdp::{argmax_lowest, reachable_under, Choice, Mdp, Policy, TIE_TOLERANCE};
pub use recourse::{
    build_recourse_mdp, Binning, MdpParams, PlanStep, RecourseMdp, DEFAULT_DISCOUNT, DEFAULT_STATE_CAP,
};
pub use solve::{
    q_learning, value_iteration, PolicySolver, QLearning, QLearningParams, QLearningSolver, SolverRegistry,
    ValueIteration, ValueIterationSolver, DEFAULT_EPSILON,
};
