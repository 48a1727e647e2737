//! Decision problems: finite absorbing processes whose non-terminal states
//! are controlled by dependants.
//!
//! Each non-terminal state names the dependant acting there; each dependant
//! has a dependence function describing how its mixed action responds to the
//! agent's policy. Terminal states carry utilities. Construction only
//! rejects shapes that cannot be represented at all; everything else is
//! reported by [`DecisionProblem::validate`], which never fails.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::depfun::{DependenceFunction, DepfunError};
use crate::policy::Policy;
use crate::tolerances::{POLICY_SUM_RENORM, TERMINATION_ENUM_CAP};

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("problem has no actions")]
    NoActions,
    #[error("problem has no states")]
    NoStates,
    #[error("duplicate state id `{id}`")]
    DuplicateState { id: String },
    #[error("duplicate action label `{label}`")]
    DuplicateAction { label: String },
    #[error("unknown state id `{id}`")]
    UnknownState { id: String },
    #[error("unknown action label `{label}`")]
    UnknownAction { label: String },
    #[error("initial mass on terminal state `{id}`")]
    InitialOnTerminal { id: String },
    #[error("expected {expected} dependence functions, found {found}")]
    DependenceCount { expected: usize, found: usize },
}

#[derive(Debug, Error)]
pub enum TerminationError {
    #[error(
        "termination check would enumerate {joint_policies} pure joint policies, above the cap {cap}"
    )]
    CapExceeded { joint_policies: u128, cap: u128 },
}

/// One state of a decision problem. Non-terminal states name the dependant
/// acting there (1-based); terminal states carry a utility.
#[derive(Debug, Clone, PartialEq)]
pub struct StateRecord {
    pub id: String,
    pub is_terminal: bool,
    pub utility: Option<f64>,
    pub dependant: Option<usize>,
}

impl StateRecord {
    pub fn terminal(id: impl Into<String>, utility: f64) -> Self {
        StateRecord {
            id: id.into(),
            is_terminal: true,
            utility: Some(utility),
            dependant: None,
        }
    }

    pub fn acting(id: impl Into<String>, dependant: usize) -> Self {
        StateRecord {
            id: id.into(),
            is_terminal: false,
            utility: None,
            dependant: Some(dependant),
        }
    }
}

/// One structural problem found by [`DecisionProblem::validate`].
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostic {
    pub code: &'static str,
    pub subject: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}: {}", self.code, self.subject, self.message)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TerminationVerdict {
    Terminates,
    Trapped(TrappingWitness),
}

/// A pure joint policy together with a closed class of non-terminal states
/// it never leaves.
#[derive(Debug, Clone, PartialEq)]
pub struct TrappingWitness {
    /// Chosen action per dependant.
    pub assignment: Vec<usize>,
    /// Ids of the trapped states, in problem order.
    pub closed_class: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct DecisionProblem {
    action_labels: Vec<String>,
    states: Vec<StateRecord>,
    /// State indices of the non-terminal states, in problem order.
    non_terminals: Vec<usize>,
    /// State index -> position in `non_terminals`.
    nt_position: Vec<Option<usize>>,
    /// Initial distribution over non-terminal positions.
    initial: Vec<f64>,
    /// Row per (non-terminal position, action) over all states.
    transitions: Vec<Vec<Vec<f64>>>,
    dependence: Vec<DependenceFunction>,
    /// First issue that would make the chain solvers misbehave, if any.
    solve_guard: Option<String>,
}

/// Declarative construction of a [`DecisionProblem`]. States keep their
/// declaration order; unspecified transition rows stay zero (and are then
/// reported by `validate`).
pub struct ProblemBuilder {
    action_labels: Vec<String>,
    states: Vec<StateRecord>,
    initial: Vec<(String, f64)>,
    transitions: Vec<(String, String, Vec<(String, f64)>)>,
    dependence: Vec<DependenceFunction>,
}

impl ProblemBuilder {
    pub fn new<S: Into<String>>(actions: impl IntoIterator<Item = S>) -> Self {
        ProblemBuilder {
            action_labels: actions.into_iter().map(Into::into).collect(),
            states: Vec::new(),
            initial: Vec::new(),
            transitions: Vec::new(),
            dependence: Vec::new(),
        }
    }

    /// Adds a non-terminal state acted on by the given dependant (1-based).
    pub fn state(mut self, id: &str, dependant: usize) -> Self {
        self.states.push(StateRecord::acting(id, dependant));
        self
    }

    pub fn terminal(mut self, id: &str, utility: f64) -> Self {
        self.states.push(StateRecord::terminal(id, utility));
        self
    }

    /// Adds a state record verbatim, including malformed ones; `validate`
    /// reports whatever is wrong with it.
    pub fn raw_state(mut self, record: StateRecord) -> Self {
        self.states.push(record);
        self
    }

    pub fn initial(mut self, id: &str, mass: f64) -> Self {
        self.initial.push((id.to_string(), mass));
        self
    }

    pub fn transition<'a>(
        mut self,
        from: &str,
        action: &str,
        to: impl IntoIterator<Item = (&'a str, f64)>,
    ) -> Self {
        self.transitions.push((
            from.to_string(),
            action.to_string(),
            to.into_iter().map(|(id, p)| (id.to_string(), p)).collect(),
        ));
        self
    }

    pub fn dependence(mut self, f: DependenceFunction) -> Self {
        self.dependence.push(f);
        self
    }

    pub fn build(self) -> Result<DecisionProblem, ProblemError> {
        DecisionProblem::assemble(
            self.action_labels,
            self.states,
            self.initial,
            self.transitions,
            self.dependence,
        )
    }
}

impl DecisionProblem {
    fn assemble(
        action_labels: Vec<String>,
        states: Vec<StateRecord>,
        initial: Vec<(String, f64)>,
        transition_rows: Vec<(String, String, Vec<(String, f64)>)>,
        dependence: Vec<DependenceFunction>,
    ) -> Result<Self, ProblemError> {
        if action_labels.is_empty() {
            return Err(ProblemError::NoActions);
        }
        if states.is_empty() {
            return Err(ProblemError::NoStates);
        }
        let mut action_index: BTreeMap<&str, usize> = BTreeMap::new();
        for (i, label) in action_labels.iter().enumerate() {
            if action_index.insert(label, i).is_some() {
                return Err(ProblemError::DuplicateAction {
                    label: label.clone(),
                });
            }
        }
        let mut state_index: BTreeMap<&str, usize> = BTreeMap::new();
        for (i, record) in states.iter().enumerate() {
            if state_index.insert(&record.id, i).is_some() {
                return Err(ProblemError::DuplicateState {
                    id: record.id.clone(),
                });
            }
        }
        let non_terminals: Vec<usize> = states
            .iter()
            .enumerate()
            .filter(|(_, r)| !r.is_terminal)
            .map(|(i, _)| i)
            .collect();
        let mut nt_position = vec![None; states.len()];
        for (pos, &idx) in non_terminals.iter().enumerate() {
            nt_position[idx] = Some(pos);
        }
        let mut initial_dense = vec![0.0; non_terminals.len()];
        for (id, mass) in initial {
            let &idx = state_index
                .get(id.as_str())
                .ok_or(ProblemError::UnknownState { id: id.clone() })?;
            match nt_position[idx] {
                Some(pos) => initial_dense[pos] += mass,
                None => return Err(ProblemError::InitialOnTerminal { id }),
            }
        }
        let num_actions = action_labels.len();
        let mut transitions =
            vec![vec![vec![0.0; states.len()]; num_actions]; non_terminals.len()];
        for (from, action, targets) in transition_rows {
            let &from_idx = state_index
                .get(from.as_str())
                .ok_or(ProblemError::UnknownState { id: from.clone() })?;
            let pos = nt_position[from_idx].ok_or(ProblemError::UnknownState {
                id: format!("{from} (terminal states have no transitions)"),
            })?;
            let &a = action_index
                .get(action.as_str())
                .ok_or(ProblemError::UnknownAction {
                    label: action.clone(),
                })?;
            for (to, p) in targets {
                let &to_idx = state_index
                    .get(to.as_str())
                    .ok_or(ProblemError::UnknownState { id: to })?;
                transitions[pos][a][to_idx] += p;
            }
        }
        let mut problem = DecisionProblem {
            action_labels,
            states,
            non_terminals,
            nt_position,
            initial: initial_dense,
            transitions,
            dependence,
            solve_guard: None,
        };
        problem.solve_guard = problem.compute_solve_guard();
        Ok(problem)
    }

    /// The first structural issue that would make the chain solvers
    /// misbehave, if any. Cheaper than a full `validate` scan and computed
    /// once at construction.
    fn compute_solve_guard(&self) -> Option<String> {
        let n = self.dependence.len();
        for &idx in &self.non_terminals {
            match self.states[idx].dependant {
                None => return Some(format!("state `{}` names no dependant", self.states[idx].id)),
                Some(d) if d == 0 || d > n => {
                    return Some(format!(
                        "state `{}` names dependant {d}, but there are {n}",
                        self.states[idx].id
                    ))
                }
                Some(_) => {}
            }
        }
        for record in &self.states {
            if record.is_terminal {
                match record.utility {
                    None => return Some(format!("terminal `{}` has no utility", record.id)),
                    Some(u) if !u.is_finite() => {
                        return Some(format!("terminal `{}` has a non-finite utility", record.id))
                    }
                    Some(_) => {}
                }
            }
        }
        for (j, f) in self.dependence.iter().enumerate() {
            if f.num_actions() != self.num_actions() {
                return Some(format!(
                    "dependant {} responds over {} actions, problem has {}",
                    j + 1,
                    f.num_actions(),
                    self.num_actions()
                ));
            }
        }
        None
    }

    pub(crate) fn ensure_solvable(&self) -> Result<(), String> {
        match &self.solve_guard {
            None => Ok(()),
            Some(issue) => Err(issue.clone()),
        }
    }

    pub fn num_actions(&self) -> usize {
        self.action_labels.len()
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn num_dependants(&self) -> usize {
        self.dependence.len()
    }

    pub fn action_labels(&self) -> &[String] {
        &self.action_labels
    }

    pub fn action_index(&self, label: &str) -> Option<usize> {
        self.action_labels.iter().position(|l| l == label)
    }

    pub fn states(&self) -> &[StateRecord] {
        &self.states
    }

    pub fn state(&self, index: usize) -> &StateRecord {
        &self.states[index]
    }

    pub fn state_index(&self, id: &str) -> Option<usize> {
        self.states.iter().position(|r| r.id == id)
    }

    /// State indices of non-terminal states, in problem order.
    pub fn non_terminals(&self) -> &[usize] {
        &self.non_terminals
    }

    /// Position of a state within the non-terminal ordering.
    pub fn nt_position(&self, state: usize) -> Option<usize> {
        self.nt_position[state]
    }

    /// Initial distribution over non-terminal positions.
    pub fn initial_dist(&self) -> &[f64] {
        &self.initial
    }

    /// Transition row over all states for a non-terminal position and a
    /// pure dependant action.
    pub fn transition_row(&self, nt_pos: usize, action: usize) -> &[f64] {
        &self.transitions[nt_pos][action]
    }

    /// Transition row under a mixed dependant action.
    pub fn mixed_row(&self, nt_pos: usize, weights: &[f64]) -> Vec<f64> {
        let mut row = vec![0.0; self.states.len()];
        for (a, &w) in weights.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            for (acc, &p) in row.iter_mut().zip(self.transitions[nt_pos][a].iter()) {
                *acc += w * p;
            }
        }
        row
    }

    pub fn dependence(&self) -> &[DependenceFunction] {
        &self.dependence
    }

    /// Zero-based dependant index acting at a non-terminal position. Only
    /// meaningful when `ensure_solvable` passes.
    pub(crate) fn dependant_at(&self, nt_pos: usize) -> usize {
        self.states[self.non_terminals[nt_pos]]
            .dependant
            .expect("guarded by ensure_solvable")
            - 1
    }

    /// Every dependant's mixed action when the agent commits to `at`.
    pub fn joint_eval(&self, at: &Policy) -> Result<Vec<Policy>, DepfunError> {
        self.dependence.iter().map(|f| f.eval(at)).collect()
    }

    /// Same problem, different dependence functions.
    pub fn with_dependence(
        &self,
        dependence: Vec<DependenceFunction>,
    ) -> Result<Self, ProblemError> {
        if dependence.len() != self.dependence.len() {
            return Err(ProblemError::DependenceCount {
                expected: self.dependence.len(),
                found: dependence.len(),
            });
        }
        let mut next = self.clone();
        next.dependence = dependence;
        next.solve_guard = next.compute_solve_guard();
        Ok(next)
    }

    /// Minimum and maximum terminal utility, when both exist.
    pub fn utility_bounds(&self) -> Option<(f64, f64)> {
        let mut bounds: Option<(f64, f64)> = None;
        for record in &self.states {
            if let (true, Some(u)) = (record.is_terminal, record.utility) {
                bounds = Some(match bounds {
                    None => (u, u),
                    Some((lo, hi)) => (lo.min(u), hi.max(u)),
                });
            }
        }
        bounds
    }

    /// Spread between the best and worst terminal utility; zero for
    /// constant-utility problems.
    pub fn utility_range(&self) -> f64 {
        match self.utility_bounds() {
            Some((lo, hi)) => hi - lo,
            None => 0.0,
        }
    }

    /// Affinely maps terminal utilities onto [0, 1]. Returns the rescaled
    /// problem with the offset and scale so results can be mapped back:
    /// `u_original = offset + scale * u_rescaled`.
    pub fn with_unit_utilities(&self) -> (Self, f64, f64) {
        let (lo, hi) = self.utility_bounds().unwrap_or((0.0, 0.0));
        let scale = if hi > lo { hi - lo } else { 1.0 };
        let mut next = self.clone();
        for record in next.states.iter_mut() {
            if record.is_terminal {
                if let Some(u) = record.utility {
                    record.utility = Some((u - lo) / scale);
                }
            }
        }
        (next, lo, scale)
    }

    /// Reports every structural violation. Never fails: an empty report
    /// means the problem is well-formed.
    pub fn validate(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        let n = self.dependence.len();
        for record in &self.states {
            if record.is_terminal {
                match record.utility {
                    None => out.push(Diagnostic {
                        code: "missing-utility",
                        subject: record.id.clone(),
                        message: "terminal state has no utility".into(),
                    }),
                    Some(u) if !u.is_finite() => out.push(Diagnostic {
                        code: "utility-not-finite",
                        subject: record.id.clone(),
                        message: format!("terminal utility is {u}"),
                    }),
                    Some(_) => {}
                }
                if record.dependant.is_some() {
                    out.push(Diagnostic {
                        code: "dependant-on-terminal",
                        subject: record.id.clone(),
                        message: "terminal state names a dependant".into(),
                    });
                }
            } else {
                match record.dependant {
                    None => out.push(Diagnostic {
                        code: "missing-dependant",
                        subject: record.id.clone(),
                        message: "non-terminal state names no dependant".into(),
                    }),
                    Some(d) if d == 0 || d > n => out.push(Diagnostic {
                        code: "dependant-range",
                        subject: record.id.clone(),
                        message: format!("dependant {d} is outside 1..={n}"),
                    }),
                    Some(_) => {}
                }
                if record.utility.is_some() {
                    out.push(Diagnostic {
                        code: "utility-on-non-terminal",
                        subject: record.id.clone(),
                        message: "non-terminal state carries a utility".into(),
                    });
                }
            }
        }
        let initial_sum: f64 = self.initial.iter().sum();
        if (initial_sum - 1.0).abs() > POLICY_SUM_RENORM {
            out.push(Diagnostic {
                code: "initial-sum",
                subject: "initial".into(),
                message: format!("initial distribution sums to {initial_sum}"),
            });
        }
        for (pos, &mass) in self.initial.iter().enumerate() {
            if mass < 0.0 {
                out.push(Diagnostic {
                    code: "initial-negative",
                    subject: self.states[self.non_terminals[pos]].id.clone(),
                    message: format!("initial mass {mass}"),
                });
            }
        }
        for (pos, rows) in self.transitions.iter().enumerate() {
            let id = &self.states[self.non_terminals[pos]].id;
            for (a, row) in rows.iter().enumerate() {
                let subject = format!("{id}/{}", self.action_labels[a]);
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > POLICY_SUM_RENORM {
                    out.push(Diagnostic {
                        code: "row-sum",
                        subject: subject.clone(),
                        message: format!("transition row sums to {sum}"),
                    });
                }
                if let Some(&worst) = row
                    .iter()
                    .filter(|p| **p < 0.0)
                    .min_by(|a, b| a.partial_cmp(b).unwrap())
                {
                    out.push(Diagnostic {
                        code: "row-negative",
                        subject,
                        message: format!("transition row has entry {worst}"),
                    });
                }
            }
        }
        for (j, f) in self.dependence.iter().enumerate() {
            if f.num_actions() != self.num_actions() {
                out.push(Diagnostic {
                    code: "dependence-arity",
                    subject: format!("dependant {}", j + 1),
                    message: format!(
                        "responds over {} actions, problem has {}",
                        f.num_actions(),
                        self.num_actions()
                    ),
                });
            }
        }
        out
    }

    /// Decides whether the process reaches a terminal state with probability
    /// one under every policy, by enumerating pure joint dependant policies:
    /// trapping is possible under some joint behavior iff it is possible
    /// under a pure one.
    pub fn check_termination(&self, cap: u128) -> Result<TerminationVerdict, TerminationError> {
        let num_nt = self.non_terminals.len();
        if num_nt == 0 {
            return Ok(TerminationVerdict::Terminates);
        }
        let n = self.num_dependants().max(1);
        let joint_policies = (self.num_actions() as u128)
            .checked_pow(n as u32)
            .unwrap_or(u128::MAX);
        if joint_policies > cap {
            return Err(TerminationError::CapExceeded { joint_policies, cap });
        }
        // Dependant index per non-terminal position; states with a bad index
        // fall back to dependant 0 so the scan stays total.
        let dependant_at: Vec<usize> = self
            .non_terminals
            .iter()
            .map(|&idx| match self.states[idx].dependant {
                Some(d) if d >= 1 && d <= self.dependence.len().max(1) => d - 1,
                _ => 0,
            })
            .collect();
        let mut assignment = vec![0usize; n];
        loop {
            if let Some(class) = self.trapped_class(&assignment, &dependant_at) {
                return Ok(TerminationVerdict::Trapped(TrappingWitness {
                    assignment: assignment.clone(),
                    closed_class: class
                        .into_iter()
                        .map(|pos| self.states[self.non_terminals[pos]].id.clone())
                        .collect(),
                }));
            }
            // Mixed-radix increment over dependant assignments.
            let mut done = true;
            for slot in assignment.iter_mut() {
                *slot += 1;
                if *slot < self.num_actions() {
                    done = false;
                    break;
                }
                *slot = 0;
            }
            if done {
                return Ok(TerminationVerdict::Terminates);
            }
        }
    }

    /// Termination check with the crate-wide enumeration cap.
    pub fn check_termination_default(&self) -> Result<TerminationVerdict, TerminationError> {
        self.check_termination(TERMINATION_ENUM_CAP)
    }

    /// Under one pure joint policy: the set of states that cannot reach a
    /// terminal, reduced to a closed class, or None if all states exit.
    fn trapped_class(&self, assignment: &[usize], dependant_at: &[usize]) -> Option<Vec<usize>> {
        let num_nt = self.non_terminals.len();
        let action_of = |pos: usize| assignment[dependant_at[pos]];
        // Forward edges between non-terminal positions with positive mass;
        // a position "exits" if it sends mass straight to a terminal. A row
        // with no mass at all keeps its state trapped.
        let mut exits = vec![false; num_nt];
        let mut forward: Vec<Vec<usize>> = vec![Vec::new(); num_nt];
        let mut reverse: Vec<Vec<usize>> = vec![Vec::new(); num_nt];
        for pos in 0..num_nt {
            let row = &self.transitions[pos][action_of(pos)];
            for (target, &p) in row.iter().enumerate() {
                if p <= 0.0 {
                    continue;
                }
                match self.nt_position[target] {
                    None => exits[pos] = true,
                    Some(tpos) => {
                        forward[pos].push(tpos);
                        reverse[tpos].push(pos);
                    }
                }
            }
        }
        // Backward reachability from the exiting states.
        let mut can_exit = vec![false; num_nt];
        let mut queue: Vec<usize> = (0..num_nt).filter(|&p| exits[p]).collect();
        for &p in &queue {
            can_exit[p] = true;
        }
        while let Some(pos) = queue.pop() {
            for &prev in &reverse[pos] {
                if !can_exit[prev] {
                    can_exit[prev] = true;
                    queue.push(prev);
                }
            }
        }
        let trapped: Vec<usize> = (0..num_nt).filter(|&p| !can_exit[p]).collect();
        if trapped.is_empty() {
            return None;
        }
        // Inside the trapped set every edge stays trapped, so a bottom
        // strongly connected class exists. Walk forward closures: when the
        // closure of a state equals its mutual-reachability class, that
        // class is closed.
        let in_trapped: Vec<bool> = (0..num_nt).map(|p| !can_exit[p]).collect();
        let closure = |start: usize| -> Vec<bool> {
            let mut seen = vec![false; num_nt];
            seen[start] = true;
            let mut queue = vec![start];
            while let Some(pos) = queue.pop() {
                for &next in &forward[pos] {
                    if in_trapped[next] && !seen[next] {
                        seen[next] = true;
                        queue.push(next);
                    }
                }
            }
            seen
        };
        let mut v = trapped[0];
        loop {
            let reach_v = closure(v);
            let class: Vec<usize> = (0..num_nt)
                .filter(|&x| reach_v[x] && closure(x)[v])
                .collect();
            if let Some(&outside) = (0..num_nt)
                .filter(|&x| reach_v[x] && !class.contains(&x))
                .collect::<Vec<_>>()
                .first()
            {
                // v escapes its own class; recurse into the rest of the
                // closure, which is strictly smaller.
                v = outside;
                continue;
            }
            return Some(class);
        }
    }
}
