//! Workbench for Newcomblike sequential decision problems.
//!
//! A decision problem here is a finite absorbing process whose non-terminal
//! states are each controlled by a *dependant*: an actor whose mixed action is
//! a fixed function of the agent's own policy. The crate computes exact
//! absorbing-chain quantities (expected visit counts, state values, ex ante
//! expected utility and its simplex gradient), manipulates the dependence
//! functions themselves (polynomial rewriting, sampler synthesis, Bernstein
//! approximation), builds self-locating belief systems over the non-terminal
//! states, and tests policies for decision-theoretic stability under those
//! beliefs.
//!
//! Module map:
//!
//! - [`policy`]: points and directions on the action simplex.
//! - [`problem`]: decision problems, structural validation, termination.
//! - [`chain`]: exact absorbing-chain quantities and the ex ante gradient.
//! - [`depfun`]: dependence functions and their algebra.
//! - [`beliefs`]: self-locating belief systems (GT, GSGT, LSGT, GGT).
//! - [`cdt`]: causal expected utility, ratifiability, stationary sets.
//! - [`expand`]: expansion of simulation-based problems into plain ones.
//! - [`montecarlo`]: seeded rollouts and statistical validation.
//! - [`fixtures`]: the built-in worked-example registry.
//! - [`fileio`]: the on-disk problem format.
//! - [`verify`]: the end-to-end acceptance suite.

pub mod beliefs;
pub mod cdt;
pub mod chain;
pub mod depfun;
pub mod expand;
pub mod fileio;
pub mod fixtures;
pub mod linalg;
pub mod montecarlo;
pub mod policy;
pub mod problem;
pub mod verify;
pub mod tolerances;

pub use beliefs::{BeliefKind, BeliefSystem, GgtComponents};
pub use chain::ChainSolution;
pub use depfun::DependenceFunction;
pub use policy::{Policy, PolicyDelta};
pub use problem::DecisionProblem;
