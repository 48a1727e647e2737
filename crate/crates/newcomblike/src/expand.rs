//! Expansion of sampler-grounded problems into plain self-copy problems.
//!
//! When every dependant is given by a simulation function, each visit to an
//! acting state can be unrolled: the dependant draws its samples one at a
//! time, and each draw is an ordinary action of the agent in a fresh copy
//! of the state. The expanded problem therefore has a single identity
//! dependant, and plain self-location there reproduces the generalized
//! self-location of the original: per-tree credences match, causal action
//! values match, and the aggregated exit law of each tree matches the
//! original one-step transition row.

use serde::Serialize;
use thiserror::Error;

use crate::beliefs::{gsgt_beliefs, gt_beliefs, BeliefError};
use crate::cdt::{cdt_action_values, CdtError};
use crate::chain::{ex_ante_eu, ChainError};
use crate::depfun::{DependenceFunction, DepfunError, SimulationFunction};
use crate::policy::{Policy, PolicyError};
use crate::problem::{DecisionProblem, ProblemBuilder};
use crate::tolerances::{
    EXPANSION_CREDENCE_TOL, EXPANSION_EU_TOL, EXPANSION_EXIT_TOL, EXPANSION_STATE_CAP,
    EXPANSION_VALUE_TOL,
};

pub type Result<T> = std::result::Result<T, ExpandError>;

#[derive(Debug, Error)]
pub enum ExpandError {
    #[error("problem is not solvable: {0}")]
    Malformed(String),
    #[error("expansion needs {needed} states, above the cap {cap}")]
    TooLarge { needed: u128, cap: usize },
    #[error("{found} samplers for {expected} dependants")]
    SamplerCount { expected: usize, found: usize },
    #[error("sampler {dependant} answers over {found} actions, expected {expected}")]
    SamplerArity {
        dependant: usize,
        expected: usize,
        found: usize,
    },
    #[error("expanded problem does not line up with the original: {0}")]
    Shape(String),
    #[error("could not assemble the expanded problem: {0}")]
    Build(String),
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error(transparent)]
    Belief(#[from] BeliefError),
    #[error(transparent)]
    Cdt(#[from] CdtError),
    #[error(transparent)]
    Depfun(#[from] DepfunError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
}

impl ExpandError {
    /// True when the error says the analysis is undefined for this input
    /// (as opposed to a malformed request).
    pub fn is_refusal(&self) -> bool {
        match self {
            ExpandError::Chain(e) => e.is_refusal(),
            ExpandError::Belief(e) => e.is_refusal(),
            ExpandError::Cdt(e) => e.is_refusal(),
            ExpandError::Depfun(e) => e.is_refusal(),
            _ => false,
        }
    }
}

/// Where an expanded state came from: the original state index and the
/// sample draws already made there. Terminals and tree roots carry an
/// empty prefix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BackRef {
    pub original_state: usize,
    pub prefix: Vec<u8>,
}

/// An expanded problem together with the bookkeeping needed to fold its
/// answers back onto the original.
#[derive(Debug, Clone)]
pub struct ExpandedProblem {
    /// The unrolled problem: one identity dependant, every acting state a
    /// node of some original state's sample tree.
    pub problem: DecisionProblem,
    /// One entry per expanded state, in state order.
    pub back_map: Vec<BackRef>,
    /// The samplers the expansion used, one per original dependant.
    pub samplers: Vec<SimulationFunction>,
}

impl ExpandedProblem {
    /// Expanded state indices of the sample tree grown from an original
    /// state (the state itself for terminals), in state order. The first
    /// entry is always the root.
    pub fn tree_indices(&self, original_state: usize) -> Vec<usize> {
        self.back_map
            .iter()
            .enumerate()
            .filter(|(_, b)| b.original_state == original_state)
            .map(|(i, _)| i)
            .collect()
    }
}

fn tree_node_count(num_actions: usize, sample_count: usize) -> Option<u128> {
    let mut total: u128 = 0;
    let mut level: u128 = 1;
    for _ in 0..sample_count {
        total = total.checked_add(level)?;
        level = level.checked_mul(num_actions as u128)?;
    }
    Some(total)
}

fn join_prefix(prefix: &[u8], labels: &[String], compact: bool) -> String {
    let parts: Vec<&str> = prefix.iter().map(|&a| labels[a as usize].as_str()).collect();
    if compact {
        parts.concat()
    } else {
        parts.join(",")
    }
}

fn node_id(original: &str, prefix: &[u8], labels: &[String], compact: bool) -> String {
    if prefix.is_empty() {
        original.to_string()
    } else {
        format!("{original}~{}", join_prefix(prefix, labels, compact))
    }
}

/// Unrolls every acting state into its sample tree. Node `(s, a_1..a_k)`
/// means the dependant at `s` has already drawn `a_1..a_k`; the next
/// action drawn extends the prefix, and the final draw completes the
/// tuple and hands the sampler's response to the original transition row.
/// The result keeps original state ids for roots and terminals and
/// appends `~` plus the drawn actions for inner nodes.
pub fn expand_problem(
    problem: &DecisionProblem,
    samplers: &[SimulationFunction],
    cap: Option<usize>,
) -> Result<ExpandedProblem> {
    problem.ensure_solvable().map_err(ExpandError::Malformed)?;
    if samplers.len() != problem.num_dependants() {
        return Err(ExpandError::SamplerCount {
            expected: problem.num_dependants(),
            found: samplers.len(),
        });
    }
    let a = problem.num_actions();
    for (j, sampler) in samplers.iter().enumerate() {
        if sampler.num_actions() != a {
            return Err(ExpandError::SamplerArity {
                dependant: j,
                expected: a,
                found: sampler.num_actions(),
            });
        }
    }
    let cap = cap.unwrap_or(EXPANSION_STATE_CAP);
    let mut needed: u128 = 0;
    for index in 0..problem.num_states() {
        let record = problem.state(index);
        let extra = if record.is_terminal {
            Some(1)
        } else {
            let j = record.dependant.expect("acting state has a dependant") - 1;
            tree_node_count(a, samplers[j].sample_count())
        };
        needed = extra
            .and_then(|e| needed.checked_add(e))
            .ok_or(ExpandError::TooLarge { needed: u128::MAX, cap })?;
    }
    if needed > cap as u128 {
        return Err(ExpandError::TooLarge { needed, cap });
    }

    let labels = problem.action_labels();
    let compact = labels.iter().all(|l| l.chars().count() == 1);
    let mut builder = ProblemBuilder::new(labels.iter().map(String::as_str));
    let mut back_map: Vec<BackRef> = Vec::new();
    // States first, in original order with each tree level by level, so
    // ids exist before any transition references them.
    let mut trees: Vec<Vec<Vec<u8>>> = Vec::with_capacity(problem.num_states());
    for index in 0..problem.num_states() {
        let record = problem.state(index);
        if record.is_terminal {
            let utility = record.utility.expect("terminal state has a utility");
            builder = builder.terminal(&record.id, utility);
            back_map.push(BackRef {
                original_state: index,
                prefix: Vec::new(),
            });
            trees.push(Vec::new());
            continue;
        }
        let j = record.dependant.expect("acting state has a dependant") - 1;
        let n = samplers[j].sample_count();
        let mut prefixes: Vec<Vec<u8>> = vec![Vec::new()];
        let mut level: Vec<Vec<u8>> = vec![Vec::new()];
        for _ in 1..n {
            let mut next = Vec::with_capacity(level.len() * a);
            for prefix in &level {
                for action in 0..a {
                    let mut child = prefix.clone();
                    child.push(action as u8);
                    next.push(child);
                }
            }
            prefixes.extend(next.iter().cloned());
            level = next;
        }
        for prefix in &prefixes {
            let id = node_id(&record.id, prefix, labels, compact);
            builder = builder.state(&id, 1);
            back_map.push(BackRef {
                original_state: index,
                prefix: prefix.clone(),
            });
        }
        trees.push(prefixes);
    }
    for (index, &mass) in problem.initial_dist().iter().enumerate() {
        if mass > 0.0 {
            builder = builder.initial(&problem.state(index).id, mass);
        }
    }
    for index in 0..problem.num_states() {
        let record = problem.state(index);
        if record.is_terminal {
            continue;
        }
        let pos = problem
            .nt_position(index)
            .expect("acting state has a non-terminal position");
        let j = record.dependant.expect("acting state has a dependant") - 1;
        let n = samplers[j].sample_count();
        for prefix in &trees[index] {
            let from = node_id(&record.id, prefix, labels, compact);
            for action in 0..a {
                let mut tuple = prefix.clone();
                tuple.push(action as u8);
                if tuple.len() < n {
                    let to = node_id(&record.id, &tuple, labels, compact);
                    builder = builder.transition(&from, &labels[action], [(to.as_str(), 1.0)]);
                } else {
                    let response = samplers[j].response(&tuple)?;
                    let row = problem.mixed_row(pos, response.probs());
                    let targets: Vec<(String, f64)> = row
                        .iter()
                        .enumerate()
                        .filter(|(_, &p)| p > 0.0)
                        .map(|(t, &p)| (problem.state(t).id.clone(), p))
                        .collect();
                    builder = builder.transition(
                        &from,
                        &labels[action],
                        targets.iter().map(|(id, p)| (id.as_str(), *p)),
                    );
                }
            }
        }
    }
    builder = builder.dependence(DependenceFunction::identity(a));
    let expanded = builder.build().map_err(|e| ExpandError::Build(e.to_string()))?;
    Ok(ExpandedProblem {
        problem: expanded,
        back_map,
        samplers: samplers.to_vec(),
    })
}

/// The four soundness gaps between an expansion and its original, at one
/// policy. All four are zero up to numerics for a correct expansion whose
/// samplers reproduce the original dependences.
#[derive(Debug, Clone, Serialize)]
pub struct ExpansionCheck {
    /// Ex ante expected utility, original vs expanded.
    pub eu_gap: f64,
    /// Generalized credence of each original state vs the summed plain
    /// credence of its tree.
    pub credence_gap: f64,
    /// Causal action values under generalized beliefs vs plain beliefs in
    /// the expansion.
    pub value_gap: f64,
    /// Original one-step transition rows vs each tree's aggregated exit
    /// law.
    pub exit_gap: f64,
}

impl ExpansionCheck {
    pub fn passes(&self) -> bool {
        self.eu_gap <= EXPANSION_EU_TOL
            && self.credence_gap <= EXPANSION_CREDENCE_TOL
            && self.value_gap <= EXPANSION_VALUE_TOL
            && self.exit_gap <= EXPANSION_EXIT_TOL
    }
}

/// Measures the four expansion soundness gaps at `at`. Errors if the
/// expansion does not structurally line up with the original, or if the
/// samplers fail to reproduce the original dependences.
pub fn verify_expansion(
    original: &DecisionProblem,
    expanded: &ExpandedProblem,
    at: &Policy,
) -> Result<ExpansionCheck> {
    original.ensure_solvable().map_err(ExpandError::Malformed)?;
    if expanded.back_map.len() != expanded.problem.num_states() {
        return Err(ExpandError::Shape(format!(
            "{} back references for {} expanded states",
            expanded.back_map.len(),
            expanded.problem.num_states()
        )));
    }
    if expanded.problem.action_labels() != original.action_labels() {
        return Err(ExpandError::Shape("action labels differ".into()));
    }
    if expanded
        .back_map
        .iter()
        .any(|b| b.original_state >= original.num_states())
    {
        return Err(ExpandError::Shape("back reference out of range".into()));
    }

    let eu_gap = (ex_ante_eu(original, at)? - ex_ante_eu(&expanded.problem, at)?).abs();

    let generalized = gsgt_beliefs(original, &expanded.samplers, at)?;
    let plain = gt_beliefs(&expanded.problem, at)?;
    let mut tree_credence = vec![0.0; original.num_states()];
    for (x_pos, &x_state) in expanded.problem.non_terminals().iter().enumerate() {
        tree_credence[expanded.back_map[x_state].original_state] += plain.credences[x_pos];
    }
    let mut credence_gap: f64 = 0.0;
    for (pos, &state) in original.non_terminals().iter().enumerate() {
        credence_gap = credence_gap.max((generalized.credences[pos] - tree_credence[state]).abs());
    }

    let original_values = cdt_action_values(original, &generalized)?;
    let expanded_values = cdt_action_values(&expanded.problem, &plain)?;
    let value_gap = original_values
        .iter()
        .zip(expanded_values.iter())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0f64, f64::max);

    let exit_gap = exit_law_gap(original, expanded, at)?;

    Ok(ExpansionCheck {
        eu_gap,
        credence_gap,
        value_gap,
        exit_gap,
    })
}

/// Pushes unit mass from each tree root through its own tree under `at`
/// and compares where it exits against the original mixed transition row.
fn exit_law_gap(
    original: &DecisionProblem,
    expanded: &ExpandedProblem,
    at: &Policy,
) -> Result<f64> {
    let mut gap: f64 = 0.0;
    for (pos, &state) in original.non_terminals().iter().enumerate() {
        let record = original.state(state);
        let j = record.dependant.expect("acting state has a dependant") - 1;
        let n = expanded.samplers[j].sample_count();
        let root = expanded
            .problem
            .state_index(&record.id)
            .ok_or_else(|| ExpandError::Shape(format!("no expanded root for `{}`", record.id)))?;
        let mut mass = vec![0.0; expanded.problem.num_states()];
        mass[root] = 1.0;
        // Every path from the root exits after exactly the sampler's draw
        // count, so mass never has to be held back mid-walk.
        for _ in 0..n {
            let mut next = vec![0.0; expanded.problem.num_states()];
            for (x_state, &m) in mass.iter().enumerate() {
                if m == 0.0 {
                    continue;
                }
                let x_pos = expanded.problem.nt_position(x_state).ok_or_else(|| {
                    ExpandError::Shape(format!(
                        "walk reached terminal `{}` before the tuple was complete",
                        expanded.problem.state(x_state).id
                    ))
                })?;
                let row = expanded.problem.mixed_row(x_pos, at.probs());
                for (target, &p) in row.iter().enumerate() {
                    if p > 0.0 {
                        next[target] += m * p;
                    }
                }
            }
            mass = next;
        }
        let mut exit_row = vec![0.0; original.num_states()];
        for (x_state, &m) in mass.iter().enumerate() {
            if m > 0.0 {
                exit_row[expanded.back_map[x_state].original_state] += m;
            }
        }
        let response = original.dependence()[j].eval(at)?;
        let want = original.mixed_row(pos, response.probs());
        for (have, want) in exit_row.iter().zip(want.iter()) {
            gap = gap.max((have - want).abs());
        }
    }
    Ok(gap)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    /// One acting state over actions `a`/`b` leading straight to two
    /// terminals, with an arbitrary dependence.
    fn hub(f: DependenceFunction) -> DecisionProblem {
        ProblemBuilder::new(["a", "b"])
            .state("hub", 1)
            .terminal("t0", 0.0)
            .terminal("t1", 1.0)
            .initial("hub", 1.0)
            .transition("hub", "a", [("t0", 1.0)])
            .transition("hub", "b", [("t1", 1.0)])
            .dependence(f)
            .build()
            .unwrap()
    }

    /// Two-draw sampler realizing `p -> (p^2, 1 - p^2)` on the first
    /// component: both draws must be the first action.
    fn square_sampler() -> SimulationFunction {
        let mut table = BTreeMap::new();
        table.insert(vec![2, 0], Policy::pure(0, 2));
        table.insert(vec![1, 1], Policy::pure(1, 2));
        table.insert(vec![0, 2], Policy::pure(1, 2));
        SimulationFunction::from_multisets(2, 2, table).unwrap()
    }

    fn square_polynomial() -> DependenceFunction {
        let poly = crate::depfun::PolynomialMap::new(
            2,
            vec![
                (vec![0, 0], vec![0.0, 1.0]),
                (vec![2, 0], vec![1.0, -1.0]),
            ],
        )
        .unwrap();
        DependenceFunction::polynomial(poly).unwrap()
    }

    #[test]
    fn identity_expansion_is_a_relabeling_free_noop() {
        let problem = hub(DependenceFunction::identity(2));
        let expanded =
            expand_problem(&problem, &[SimulationFunction::identity(2)], None).unwrap();
        assert_eq!(expanded.problem.num_states(), problem.num_states());
        let ids: Vec<&str> = (0..expanded.problem.num_states())
            .map(|i| expanded.problem.state(i).id.as_str())
            .collect();
        assert_eq!(ids, ["hub", "t0", "t1"]);
        let at = Policy::new(vec![0.3, 0.7]).unwrap();
        let check = verify_expansion(&problem, &expanded, &at).unwrap();
        assert!(check.passes(), "{check:?}");

        // Expanding the expansion changes nothing either.
        let twice =
            expand_problem(&expanded.problem, &[SimulationFunction::identity(2)], None).unwrap();
        assert_eq!(twice.problem.num_states(), expanded.problem.num_states());
        let twice_ids: Vec<&str> = (0..twice.problem.num_states())
            .map(|i| twice.problem.state(i).id.as_str())
            .collect();
        assert_eq!(twice_ids, ids);
    }

    #[test]
    fn two_draw_tree_has_expected_layout() {
        let problem = hub(square_polynomial());
        let expanded = expand_problem(&problem, &[square_sampler()], None).unwrap();
        let ids: Vec<&str> = (0..expanded.problem.num_states())
            .map(|i| expanded.problem.state(i).id.as_str())
            .collect();
        assert_eq!(ids, ["hub", "hub~a", "hub~b", "t0", "t1"]);
        assert_eq!(
            expanded.back_map[1],
            BackRef {
                original_state: 0,
                prefix: vec![0],
            }
        );
        assert_eq!(expanded.tree_indices(0), vec![0, 1, 2]);

        // Only the all-`a` tuple reaches t0, so its probability is p^2.
        let at = Policy::new(vec![0.6, 0.4]).unwrap();
        let eu = ex_ante_eu(&expanded.problem, &at).unwrap();
        assert!((eu - (1.0 - 0.36)).abs() < 1e-12, "{eu}");
    }

    #[test]
    fn soundness_checks_pass_on_a_matching_expansion() {
        let problem = hub(square_polynomial());
        let expanded = expand_problem(&problem, &[square_sampler()], None).unwrap();
        for at in [
            Policy::uniform(2),
            Policy::new(vec![0.6, 0.4]).unwrap(),
            Policy::pure(0, 2),
            Policy::pure(1, 2),
        ] {
            let check = verify_expansion(&problem, &expanded, &at).unwrap();
            assert!(check.passes(), "at {:?}: {check:?}", at.probs());
        }
    }

    #[test]
    fn self_loop_exits_are_attributed_to_the_root() {
        let problem = ProblemBuilder::new(["a", "b"])
            .state("hub", 1)
            .terminal("out", 2.0)
            .initial("hub", 1.0)
            .transition("hub", "a", [("hub", 1.0)])
            .transition("hub", "b", [("out", 1.0)])
            .dependence(square_polynomial())
            .build()
            .unwrap();
        let expanded = expand_problem(&problem, &[square_sampler()], None).unwrap();
        let at = Policy::new(vec![0.5, 0.5]).unwrap();
        let check = verify_expansion(&problem, &expanded, &at).unwrap();
        assert!(check.passes(), "{check:?}");
    }

    #[test]
    fn cap_is_enforced_before_building() {
        let problem = hub(square_polynomial());
        let err = expand_problem(&problem, &[square_sampler()], Some(4)).unwrap_err();
        match err {
            ExpandError::TooLarge { needed, cap } => {
                assert_eq!(needed, 5);
                assert_eq!(cap, 4);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn mismatched_sampler_is_rejected_by_verification() {
        let problem = hub(DependenceFunction::identity(2));
        // A sampler that answers the opposite action disagrees with the
        // identity dependence, which verification must notice.
        let mut table = BTreeMap::new();
        table.insert(vec![0u8], Policy::pure(1, 2));
        table.insert(vec![1u8], Policy::pure(0, 2));
        let flipped = SimulationFunction::from_tuples(2, 1, table).unwrap();
        let expanded = expand_problem(&problem, &[flipped], None).unwrap();
        let err = verify_expansion(&problem, &expanded, &Policy::uniform(2)).unwrap_err();
        assert!(matches!(
            err,
            ExpandError::Belief(BeliefError::SamplerPrecondition { .. })
        ));
    }

    #[test]
    fn sampler_count_must_match_dependants() {
        let problem = hub(DependenceFunction::identity(2));
        let err = expand_problem(&problem, &[], None).unwrap_err();
        assert!(matches!(
            err,
            ExpandError::SamplerCount {
                expected: 1,
                found: 0,
            }
        ));
    }
}
