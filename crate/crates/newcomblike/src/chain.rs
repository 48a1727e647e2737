//! Exact absorbing-chain quantities.
//!
//! Fixing the agent's policy fixes every dependant's mixed action, which
//! turns the problem into an absorbing Markov chain. Expected visit counts
//! and state values then solve small dense linear systems against `I - Q`
//! and its transpose, where `Q` is the non-terminal block of the transition
//! matrix. The ex ante gradient composes the chain solution with the
//! first-order responses of the dependence functions.

use thiserror::Error;

use crate::depfun::DepfunError;
use crate::linalg::{factor_default, LinalgError};
use crate::policy::{Policy, PolicyDelta};
use crate::problem::DecisionProblem;

pub type Result<T> = std::result::Result<T, ChainError>;

#[derive(Debug, Error)]
pub enum ChainError {
    #[error("problem is not solvable: {0}")]
    Malformed(String),
    #[error("chain does not absorb under this joint policy: {detail}")]
    NotAbsorbing { detail: String },
    #[error("joint policy has {found} entries, problem has {expected} dependants")]
    JointShape { expected: usize, found: usize },
    #[error("paths exceed depth {cap}; the chain is not acyclic")]
    NotAcyclic { cap: usize },
    #[error(transparent)]
    Depfun(#[from] DepfunError),
}

impl ChainError {
    /// True when the error says the analysis is undefined for this input
    /// (as opposed to a malformed request).
    pub fn is_refusal(&self) -> bool {
        match self {
            ChainError::NotAbsorbing { .. } => true,
            ChainError::Depfun(e) => e.is_refusal(),
            _ => false,
        }
    }
}

/// Exact quantities of the absorbing chain induced by one joint dependant
/// policy.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainSolution {
    /// Expected visit count per non-terminal position.
    pub visit_counts: Vec<f64>,
    /// Expected terminal utility from each state (terminals: their own
    /// utility), per state index.
    pub state_values: Vec<f64>,
    /// Expected terminal utility from the initial distribution.
    pub ex_ante_eu: f64,
}

/// Solves the absorbing chain induced by explicit dependant mixtures.
pub fn solve_chain(problem: &DecisionProblem, joint: &[Policy]) -> Result<ChainSolution> {
    problem.ensure_solvable().map_err(ChainError::Malformed)?;
    check_joint(problem, joint)?;
    let m = problem.non_terminals().len();
    let num_states = problem.num_states();
    // Mixed transition rows, and I - Q over the non-terminal block.
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut system = vec![0.0; m * m];
    let mut absorb_values = vec![0.0; m];
    for pos in 0..m {
        let weights = joint[problem.dependant_at(pos)].probs();
        let row = problem.mixed_row(pos, weights);
        for (target, &p) in row.iter().enumerate() {
            match problem.nt_position(target) {
                Some(tpos) => system[pos * m + tpos] -= p,
                None => {
                    let u = problem.state(target).utility.unwrap_or(0.0);
                    absorb_values[pos] += p * u;
                }
            }
        }
        system[pos * m + pos] += 1.0;
        rows.push(row);
    }
    let factors = factor_default(system, m).map_err(|e| match e {
        LinalgError::Singular { index, magnitude } => ChainError::NotAbsorbing {
            detail: format!(
                "(I - Q) is singular at pivot {index} (magnitude {magnitude:.3e}); some states never reach a terminal"
            ),
        },
        other => ChainError::Malformed(other.to_string()),
    })?;
    let nt_values = factors
        .solve(&absorb_values)
        .map_err(|e| ChainError::Malformed(e.to_string()))?;
    let visit_counts = factors
        .solve_transposed(problem.initial_dist())
        .map_err(|e| ChainError::Malformed(e.to_string()))?;
    let mut state_values = vec![0.0; num_states];
    for state in 0..num_states {
        state_values[state] = match problem.nt_position(state) {
            Some(pos) => nt_values[pos],
            None => problem.state(state).utility.unwrap_or(0.0),
        };
    }
    // One step from the initial distribution; identical to the initial
    // mixture of state values because values satisfy the one-step identity.
    let ex_ante_eu = problem
        .initial_dist()
        .iter()
        .enumerate()
        .map(|(pos, &mass)| {
            mass * rows[pos]
                .iter()
                .zip(state_values.iter())
                .map(|(&p, &v)| p * v)
                .sum::<f64>()
        })
        .sum();
    Ok(ChainSolution {
        visit_counts,
        state_values,
        ex_ante_eu,
    })
}

fn check_joint(problem: &DecisionProblem, joint: &[Policy]) -> Result<()> {
    if joint.len() != problem.num_dependants() {
        return Err(ChainError::JointShape {
            expected: problem.num_dependants(),
            found: joint.len(),
        });
    }
    for p in joint {
        if p.num_actions() != problem.num_actions() {
            return Err(ChainError::JointShape {
                expected: problem.num_actions(),
                found: p.num_actions(),
            });
        }
    }
    Ok(())
}

/// Solves the chain at the joint policy the dependence functions induce
/// from the agent's policy.
pub fn solve_at(problem: &DecisionProblem, at: &Policy) -> Result<ChainSolution> {
    let joint = problem.joint_eval(at)?;
    solve_chain(problem, &joint)
}

/// Expected terminal utility when the agent commits to `at`.
pub fn ex_ante_eu(problem: &DecisionProblem, at: &Policy) -> Result<f64> {
    Ok(solve_at(problem, at)?.ex_ante_eu)
}

/// Directional derivatives of the ex ante expected utility along the
/// directions from `at` toward each action vertex. Composes expected visit
/// counts, first-order dependence responses, and continuation values:
///
/// `grad[a] = sum_s visits(s) * sum_b delta_{j(s)}(b | a) * (row(s, b) . values)`
pub fn ex_ante_grad(problem: &DecisionProblem, at: &Policy) -> Result<Vec<f64>> {
    problem.ensure_solvable().map_err(ChainError::Malformed)?;
    let solution = solve_at(problem, at)?;
    let num_actions = problem.num_actions();
    let deltas: Vec<Vec<PolicyDelta>> = problem
        .dependence()
        .iter()
        .map(|f| {
            (0..num_actions)
                .map(|a| f.delta(a, at))
                .collect::<std::result::Result<Vec<_>, _>>()
        })
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let m = problem.non_terminals().len();
    // Continuation value of each pure dependant action at each state.
    let mut action_values = vec![vec![0.0; num_actions]; m];
    for pos in 0..m {
        for action in 0..num_actions {
            action_values[pos][action] = problem
                .transition_row(pos, action)
                .iter()
                .zip(solution.state_values.iter())
                .map(|(&p, &v)| p * v)
                .sum();
        }
    }
    let mut grad = vec![0.0; num_actions];
    for pos in 0..m {
        let dependant = problem.dependant_at(pos);
        let weight = solution.visit_counts[pos];
        if weight == 0.0 {
            continue;
        }
        for (action, g) in grad.iter_mut().enumerate() {
            let delta = &deltas[dependant][action];
            let response: f64 = delta
                .components()
                .iter()
                .zip(action_values[pos].iter())
                .map(|(d, v)| d * v)
                .sum();
            *g += weight * response;
        }
    }
    Ok(grad)
}

/// Finite-difference version of [`ex_ante_grad`]: central differences of
/// the ex ante utility along the vertex directions, one-sided at the
/// boundary of the simplex. An independent route for cross-checking the
/// composed gradient.
pub fn ex_ante_grad_fd(problem: &DecisionProblem, at: &Policy, step: f64) -> Result<Vec<f64>> {
    assert!(step > 0.0 && step < 1.0);
    let num_actions = problem.num_actions();
    let mut grad = vec![0.0; num_actions];
    let base = ex_ante_eu(problem, at)?;
    for (action, g) in grad.iter_mut().enumerate() {
        let forward = ex_ante_eu(problem, &at.toward_vertex(action, step))?;
        *g = if at.prob(action) >= step {
            let probs: Vec<f64> = at
                .probs()
                .iter()
                .enumerate()
                .map(|(a, &p)| p * (1.0 + step) - if a == action { step } else { 0.0 })
                .collect();
            let backward = ex_ante_eu(
                problem,
                &Policy::renormalized(probs).map_err(DepfunError::from)?,
            )?;
            (forward - backward) / (2.0 * step)
        } else {
            (forward - base) / step
        };
    }
    Ok(grad)
}

/// Chain quantities by exhaustive path enumeration, valid on acyclic
/// problems only: every trajectory is walked and weighted. The independent
/// route against the linear-algebra solution.
pub fn enumerate_paths(
    problem: &DecisionProblem,
    joint: &[Policy],
    depth_cap: usize,
) -> Result<ChainSolution> {
    problem.ensure_solvable().map_err(ChainError::Malformed)?;
    check_joint(problem, joint)?;
    let m = problem.non_terminals().len();
    let mut visit_counts = vec![0.0; m];
    let mut ex_ante_eu = 0.0;
    // Expected utility conditional on starting at each non-terminal, for
    // state values; reuse the walker per start state.
    let mut state_values = vec![0.0; problem.num_states()];
    for state in 0..problem.num_states() {
        if let Some(u) = problem.state(state).utility {
            state_values[state] = u;
        }
    }
    for pos in 0..m {
        let mut value = 0.0;
        walk(
            problem,
            joint,
            pos,
            1.0,
            0,
            depth_cap,
            &mut |_, _| {},
            &mut value,
        )?;
        state_values[problem.non_terminals()[pos]] = value;
    }
    for (start, &mass) in problem.initial_dist().iter().enumerate() {
        if mass == 0.0 {
            continue;
        }
        let mut utility = 0.0;
        walk(
            problem,
            joint,
            start,
            mass,
            0,
            depth_cap,
            &mut |pos, p| visit_counts[pos] += p,
            &mut utility,
        )?;
        ex_ante_eu += utility;
    }
    Ok(ChainSolution {
        visit_counts,
        state_values,
        ex_ante_eu,
    })
}

#[allow(clippy::too_many_arguments)]
fn walk(
    problem: &DecisionProblem,
    joint: &[Policy],
    pos: usize,
    mass: f64,
    depth: usize,
    depth_cap: usize,
    record: &mut impl FnMut(usize, f64),
    utility: &mut f64,
) -> Result<()> {
    if depth > depth_cap {
        return Err(ChainError::NotAcyclic { cap: depth_cap });
    }
    record(pos, mass);
    let weights = joint[problem.dependant_at(pos)].probs().to_vec();
    for (action, &w) in weights.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let row = problem.transition_row(pos, action).to_vec();
        for (target, &p) in row.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let branch = mass * w * p;
            match problem.nt_position(target) {
                Some(next) => walk(
                    problem,
                    joint,
                    next,
                    branch,
                    depth + 1,
                    depth_cap,
                    record,
                    utility,
                )?,
                None => {
                    *utility += branch * problem.state(target).utility.unwrap_or(0.0);
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::depfun::DependenceFunction;
    use crate::problem::ProblemBuilder;
    use crate::tolerances::EU_FD_STEP;

    /// A three-level acyclic chain with a linear dependence.
    fn layered_problem() -> DecisionProblem {
        let columns = vec![
            Policy::new(vec![0.9, 0.1]).unwrap(),
            Policy::new(vec![0.2, 0.8]).unwrap(),
        ];
        ProblemBuilder::new(["up", "down"])
            .state("top", 1)
            .state("mid_a", 1)
            .state("mid_b", 1)
            .terminal("win", 10.0)
            .terminal("lose", -2.0)
            .initial("top", 1.0)
            .transition("top", "up", [("mid_a", 0.7), ("mid_b", 0.3)])
            .transition("top", "down", [("mid_b", 1.0)])
            .transition("mid_a", "up", [("win", 1.0)])
            .transition("mid_a", "down", [("win", 0.5), ("lose", 0.5)])
            .transition("mid_b", "up", [("lose", 1.0)])
            .transition("mid_b", "down", [("win", 0.25), ("lose", 0.75)])
            .dependence(DependenceFunction::linear(columns).unwrap())
            .build()
            .unwrap()
    }

    #[test]
    fn solver_agrees_with_path_enumeration() {
        let problem = layered_problem();
        for at in [
            Policy::pure(0, 2),
            Policy::pure(1, 2),
            Policy::new(vec![0.4, 0.6]).unwrap(),
        ] {
            let joint = problem.joint_eval(&at).unwrap();
            let solved = solve_chain(&problem, &joint).unwrap();
            let walked = enumerate_paths(&problem, &joint, problem.num_states()).unwrap();
            assert!((solved.ex_ante_eu - walked.ex_ante_eu).abs() < 1e-12);
            for (a, b) in solved.visit_counts.iter().zip(walked.visit_counts.iter()) {
                assert!((a - b).abs() < 1e-12);
            }
            for (a, b) in solved.state_values.iter().zip(walked.state_values.iter()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn eu_stays_within_utility_bounds() {
        let problem = layered_problem();
        for i in 0..=20 {
            let p = i as f64 / 20.0;
            let at = Policy::renormalized(vec![p, 1.0 - p]).unwrap();
            let eu = ex_ante_eu(&problem, &at).unwrap();
            assert!((-2.0..=10.0).contains(&eu), "eu {eu} escaped the bounds");
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        // Agreement is stated on unit-rescaled utilities so the tolerance
        // means the same thing regardless of the payoff scale.
        let (problem, _, _) = layered_problem().with_unit_utilities();
        for at in [
            Policy::uniform(2),
            Policy::new(vec![0.15, 0.85]).unwrap(),
            Policy::pure(0, 2),
        ] {
            let grad = ex_ante_grad(&problem, &at).unwrap();
            let fd = ex_ante_grad_fd(&problem, &at, EU_FD_STEP).unwrap();
            for (g, f) in grad.iter().zip(fd.iter()) {
                assert!((g - f).abs() < 1e-5, "{g} vs {f}");
            }
        }
    }

    #[test]
    fn gradient_mixes_to_zero() {
        // The gradient is a directional derivative family whose policy
        // mixture vanishes: moving toward yourself changes nothing.
        let problem = layered_problem();
        let at = Policy::new(vec![0.35, 0.65]).unwrap();
        let grad = ex_ante_grad(&problem, &at).unwrap();
        let mixed: f64 = grad
            .iter()
            .zip(at.probs().iter())
            .map(|(g, p)| g * p)
            .sum();
        assert!(mixed.abs() < 1e-9, "{mixed}");
    }

    #[test]
    fn trapping_policy_reports_non_absorption() {
        let problem = ProblemBuilder::new(["stay", "leave"])
            .state("s", 1)
            .terminal("t", 1.0)
            .initial("s", 1.0)
            .transition("s", "stay", [("s", 1.0)])
            .transition("s", "leave", [("t", 1.0)])
            .dependence(DependenceFunction::identity(2))
            .build()
            .unwrap();
        let err = solve_chain(&problem, &[Policy::pure(0, 2)]).unwrap_err();
        assert!(matches!(err, ChainError::NotAbsorbing { .. }));
        // Any leave mass at all absorbs.
        let ok = solve_chain(
            &problem,
            &[Policy::new(vec![0.5, 0.5]).unwrap()],
        )
        .unwrap();
        assert!((ok.ex_ante_eu - 1.0).abs() < 1e-12);
        assert!((ok.visit_counts[0] - 2.0).abs() < 1e-12);
    }
}
