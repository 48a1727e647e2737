//! Self-locating belief systems.
//!
//! A belief system answers two questions for an agent who knows the
//! problem and its own policy but not which state it currently occupies:
//! how much credence to place on each non-terminal state, and what the
//! dependant acting there would do if the agent chose each action. The
//! constructions here share one shape: credences proportional to a
//! per-dependant weight times expected visit counts at the anchor policy,
//! and one action-indexed transform per dependant.
//!
//! Four built-in families are provided. `gt_beliefs` treats every
//! dependant as the agent in person. `gsgt_beliefs` treats dependants as
//! samplers that draw from the agent's policy. `lsgt_from_simple_cases`
//! synthesizes such samplers locally around the anchor. `ggt_components`
//! and `ggt_beliefs` work directly from first-order data of the dependence
//! functions, with per-dependant weights bounded below by an admissibility
//! threshold.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::chain::{solve_at, ChainError, ChainSolution};
use crate::depfun::{compositions, sampler_matches, DepfunError, SimulationFunction};
use crate::policy::{Policy, PolicyDelta, PolicyError};
use crate::problem::DecisionProblem;
use crate::tolerances::{CREDENCE_POSITIVE, RHO_SLACK, VISIT_POSITIVE, WEIGHT_ZERO_COMPONENT};

pub type Result<T> = std::result::Result<T, BeliefError>;

#[derive(Debug, Error)]
pub enum BeliefError {
    #[error("problem is not solvable: {0}")]
    Malformed(String),
    #[error("expected {expected} samplers, found {found}")]
    SamplerCount { expected: usize, found: usize },
    #[error("sampler for dependant {dependant} does not reproduce its dependence function: {source}")]
    SamplerPrecondition {
        dependant: usize,
        source: DepfunError,
    },
    #[error("expected {expected} dependant weights, found {found}")]
    WeightCount { expected: usize, found: usize },
    #[error("weight for dependant {dependant} is negative: {rho}")]
    NegativeWeight { dependant: usize, rho: f64 },
    #[error("weight {rho} for dependant {dependant} is below the admissible minimum {gamma}")]
    WeightBelowMinimum {
        dependant: usize,
        rho: f64,
        gamma: f64,
    },
    #[error("no simple sampler construction for dependant {dependant}: minimum weight {gamma:.6} exceeds 1 at a mixed anchor")]
    NoSimpleConstruction { dependant: usize, gamma: f64 },
    #[error("bad custom beliefs: {0}")]
    BadCustom(String),
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error(transparent)]
    Depfun(#[from] DepfunError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
}

impl BeliefError {
    /// True when the error says the analysis itself is undefined for this
    /// input (as opposed to a malformed request).
    pub fn is_refusal(&self) -> bool {
        match self {
            BeliefError::NoSimpleConstruction { .. } => true,
            BeliefError::Depfun(e) => e.is_refusal(),
            BeliefError::Chain(e) => e.is_refusal(),
            _ => false,
        }
    }
}

/// Which construction produced a belief system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BeliefKind {
    Gt,
    Gsgt,
    Lsgt,
    Ggt,
    Custom,
}

impl fmt::Display for BeliefKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            BeliefKind::Gt => "gt",
            BeliefKind::Gsgt => "gsgt",
            BeliefKind::Lsgt => "lsgt",
            BeliefKind::Ggt => "ggt",
            BeliefKind::Custom => "custom",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Error)]
#[error("unknown belief kind `{0}` (expected gt, gsgt, lsgt, or ggt)")]
pub struct ParseBeliefKindError(String);

impl FromStr for BeliefKind {
    type Err = ParseBeliefKindError;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "gt" => Ok(BeliefKind::Gt),
            "gsgt" => Ok(BeliefKind::Gsgt),
            "lsgt" => Ok(BeliefKind::Lsgt),
            "ggt" => Ok(BeliefKind::Ggt),
            other => Err(ParseBeliefKindError(other.to_string())),
        }
    }
}

/// Credences over non-terminal states plus one transform per dependant
/// and agent action, all relative to an anchor policy.
#[derive(Debug, Clone, Serialize)]
pub struct BeliefSystem {
    pub kind: BeliefKind,
    pub anchor: Policy,
    /// Credence per non-terminal position; nonnegative, sums to one.
    pub credences: Vec<f64>,
    /// `transforms[j][a]` is what dependant `j` does when the agent picks
    /// action `a`.
    pub transforms: Vec<Vec<Policy>>,
    /// Set when every weighted visit count vanished and the credences fell
    /// back to a uniform mixture over visited states.
    pub degenerate_uniform: bool,
    /// The credence normalizer (sum of weighted visit counts) for the
    /// built-in constructions; absent on custom systems.
    pub weight_total: Option<f64>,
}

impl BeliefSystem {
    /// A hand-built belief system. Credences are renormalized, transforms
    /// are taken as given.
    pub fn custom(
        problem: &DecisionProblem,
        anchor: Policy,
        credences: Vec<f64>,
        transforms: Vec<Vec<Policy>>,
    ) -> Result<BeliefSystem> {
        problem.ensure_solvable().map_err(BeliefError::Malformed)?;
        let m = problem.non_terminals().len();
        if credences.len() != m {
            return Err(BeliefError::BadCustom(format!(
                "{} credences for {m} non-terminal states",
                credences.len()
            )));
        }
        if anchor.num_actions() != problem.num_actions() {
            return Err(BeliefError::BadCustom("anchor arity mismatch".into()));
        }
        let mut total = 0.0;
        let mut cleaned = Vec::with_capacity(m);
        for (pos, &c) in credences.iter().enumerate() {
            if !c.is_finite() || c < -CREDENCE_POSITIVE {
                return Err(BeliefError::BadCustom(format!(
                    "credence {c} at position {pos}"
                )));
            }
            let c = c.max(0.0);
            total += c;
            cleaned.push(c);
        }
        if (total - 1.0).abs() > 1e-9 {
            return Err(BeliefError::BadCustom(format!("credences sum to {total}")));
        }
        for c in cleaned.iter_mut() {
            *c /= total;
        }
        if transforms.len() != problem.num_dependants() {
            return Err(BeliefError::BadCustom(format!(
                "{} transform rows for {} dependants",
                transforms.len(),
                problem.num_dependants()
            )));
        }
        for row in &transforms {
            if row.len() != problem.num_actions()
                || row.iter().any(|p| p.num_actions() != problem.num_actions())
            {
                return Err(BeliefError::BadCustom("transform arity mismatch".into()));
            }
        }
        Ok(BeliefSystem {
            kind: BeliefKind::Custom,
            anchor,
            credences: cleaned,
            transforms,
            degenerate_uniform: false,
            weight_total: None,
        })
    }

    /// Credence on the non-terminal at position `pos`.
    pub fn credence(&self, pos: usize) -> f64 {
        self.credences[pos]
    }

    /// Transform of dependant `j` under agent action `a`.
    pub fn transform(&self, dependant: usize, action: usize) -> &Policy {
        &self.transforms[dependant][action]
    }
}

/// Credences derived from weighted visit counts, before any transform is
/// attached.
#[derive(Debug, Clone, Serialize)]
pub struct CredenceProfile {
    pub credences: Vec<f64>,
    pub degenerate_uniform: bool,
    pub weight_total: f64,
}

fn weighted_credences(
    problem: &DecisionProblem,
    solution: &ChainSolution,
    dependant_weights: &[f64],
) -> CredenceProfile {
    let visits = &solution.visit_counts;
    let mut raw: Vec<f64> = (0..visits.len())
        .map(|pos| dependant_weights[problem.dependant_at(pos)].max(0.0) * visits[pos].max(0.0))
        .collect();
    let weight_total: f64 = raw.iter().sum();
    let degenerate_uniform = weight_total <= CREDENCE_POSITIVE;
    if degenerate_uniform {
        let visited: Vec<usize> = (0..visits.len())
            .filter(|&pos| visits[pos] > VISIT_POSITIVE)
            .collect();
        raw = vec![0.0; visits.len()];
        for &pos in &visited {
            raw[pos] = 1.0 / visited.len() as f64;
        }
    } else {
        for c in raw.iter_mut() {
            *c /= weight_total;
        }
    }
    CredenceProfile {
        credences: raw,
        degenerate_uniform,
        weight_total,
    }
}

fn system_from_profile(
    kind: BeliefKind,
    anchor: &Policy,
    profile: CredenceProfile,
    transforms: Vec<Vec<Policy>>,
) -> BeliefSystem {
    BeliefSystem {
        kind,
        anchor: anchor.clone(),
        credences: profile.credences,
        transforms,
        degenerate_uniform: profile.degenerate_uniform,
        weight_total: Some(profile.weight_total),
    }
}

/// Beliefs that treat every dependant as the agent in person: transforms
/// are the pure actions, weights are all one.
pub fn gt_beliefs(problem: &DecisionProblem, anchor: &Policy) -> Result<BeliefSystem> {
    problem.ensure_solvable().map_err(BeliefError::Malformed)?;
    let solution = solve_at(problem, anchor)?;
    let num_actions = problem.num_actions();
    let transforms: Vec<Vec<Policy>> = (0..problem.num_dependants())
        .map(|_| {
            (0..num_actions)
                .map(|a| Policy::pure(a, num_actions))
                .collect()
        })
        .collect();
    let weights = vec![1.0; problem.num_dependants()];
    let profile = weighted_credences(problem, &solution, &weights);
    Ok(system_from_profile(BeliefKind::Gt, anchor, profile, transforms))
}

fn slot_transforms(
    problem: &DecisionProblem,
    samplers: &[SimulationFunction],
    anchor: &Policy,
) -> Result<Vec<Vec<Policy>>> {
    samplers
        .iter()
        .map(|sim| {
            (0..problem.num_actions())
                .map(|a| {
                    let row = sim.slot_conditional(a, anchor)?;
                    Ok(Policy::renormalized(row)?)
                })
                .collect()
        })
        .collect()
}

/// Beliefs that treat dependant `j` as `samplers[j]` run on draws from the
/// agent's policy. Each sampler must reproduce its dependence function;
/// weights are the sample counts and transforms are the mean single-slot
/// conditionals.
pub fn gsgt_beliefs(
    problem: &DecisionProblem,
    samplers: &[SimulationFunction],
    anchor: &Policy,
) -> Result<BeliefSystem> {
    problem.ensure_solvable().map_err(BeliefError::Malformed)?;
    if samplers.len() != problem.num_dependants() {
        return Err(BeliefError::SamplerCount {
            expected: problem.num_dependants(),
            found: samplers.len(),
        });
    }
    for (dependant, sim) in samplers.iter().enumerate() {
        sampler_matches(&problem.dependence()[dependant], sim)
            .map_err(|source| BeliefError::SamplerPrecondition { dependant, source })?;
    }
    let solution = solve_at(problem, anchor)?;
    let weights: Vec<f64> = samplers.iter().map(|s| s.sample_count() as f64).collect();
    let transforms = slot_transforms(problem, samplers, anchor)?;
    let profile = weighted_credences(problem, &solution, &weights);
    Ok(system_from_profile(BeliefKind::Gsgt, anchor, profile, transforms))
}

/// First-order data of one dependence function at the anchor.
#[derive(Debug, Clone, Serialize)]
pub struct GgtDependant {
    /// Admissible minimum for the weight at this anchor.
    pub gamma: f64,
    /// The chosen weight.
    pub rho: f64,
    /// Whether `rho` clears the minimum (up to slack).
    pub admissible: bool,
    /// The dependant's mixture at the anchor.
    pub base: Policy,
    /// Directional derivative toward each action vertex.
    pub deltas: Vec<PolicyDelta>,
    /// Raw transform rows `base + delta / rho`; entries can go negative
    /// when the weight is inadmissible.
    pub tau_rows: Vec<Vec<f64>>,
}

/// Per-dependant first-order components at one anchor.
#[derive(Debug, Clone, Serialize)]
pub struct GgtComponents {
    pub anchor: Policy,
    pub dependants: Vec<GgtDependant>,
}

impl GgtComponents {
    pub fn weights(&self) -> Vec<f64> {
        self.dependants.iter().map(|d| d.rho).collect()
    }

    pub fn all_admissible(&self) -> bool {
        self.dependants.iter().all(|d| d.admissible)
    }
}

/// Smallest weight that keeps every transform row a distribution: the
/// worst ratio of a negative delta component to the base mass under it.
/// Components with (numerically) zero base mass are excluded.
fn minimum_weight(base: &Policy, deltas: &[PolicyDelta]) -> f64 {
    let mut gamma: f64 = 0.0;
    for delta in deltas {
        for (component, &d) in delta.components().iter().enumerate() {
            let mass = base.prob(component);
            if mass >= WEIGHT_ZERO_COMPONENT && d < 0.0 {
                gamma = gamma.max(-d / mass);
            }
        }
    }
    gamma
}

fn ggt_core(
    problem: &DecisionProblem,
    anchor: &Policy,
    rho_override: Option<&[f64]>,
    strict: bool,
) -> Result<GgtComponents> {
    problem.ensure_solvable().map_err(BeliefError::Malformed)?;
    if let Some(rhos) = rho_override {
        if rhos.len() != problem.num_dependants() {
            return Err(BeliefError::WeightCount {
                expected: problem.num_dependants(),
                found: rhos.len(),
            });
        }
        for (dependant, &rho) in rhos.iter().enumerate() {
            if !rho.is_finite() || rho < 0.0 {
                return Err(BeliefError::NegativeWeight { dependant, rho });
            }
        }
    }
    let num_actions = problem.num_actions();
    let mut dependants = Vec::with_capacity(problem.num_dependants());
    for (index, f) in problem.dependence().iter().enumerate() {
        let base = f.eval(anchor)?;
        let deltas: Vec<PolicyDelta> = (0..num_actions)
            .map(|a| f.delta(a, anchor))
            .collect::<std::result::Result<_, _>>()?;
        let gamma = minimum_weight(&base, &deltas);
        let rho = rho_override.map_or(gamma, |rhos| rhos[index]);
        let admissible = rho + RHO_SLACK >= gamma;
        if strict && !admissible {
            return Err(BeliefError::WeightBelowMinimum {
                dependant: index,
                rho,
                gamma,
            });
        }
        let tau_rows: Vec<Vec<f64>> = if rho > WEIGHT_ZERO_COMPONENT {
            deltas
                .iter()
                .map(|delta| {
                    base.probs()
                        .iter()
                        .zip(delta.components().iter())
                        .map(|(&b, &d)| b + d / rho)
                        .collect()
                })
                .collect()
        } else {
            (0..num_actions).map(|_| base.probs().to_vec()).collect()
        };
        dependants.push(GgtDependant {
            gamma,
            rho,
            admissible,
            base,
            deltas,
            tau_rows,
        });
    }
    Ok(GgtComponents {
        anchor: anchor.clone(),
        dependants,
    })
}

/// First-order components with admissibility enforced: a weight override
/// below a dependant's minimum is an error. Without an override every
/// weight sits exactly at its minimum.
pub fn ggt_components(
    problem: &DecisionProblem,
    anchor: &Policy,
    rho_override: Option<&[f64]>,
) -> Result<GgtComponents> {
    ggt_core(problem, anchor, rho_override, true)
}

/// Like [`ggt_components`] but inadmissible weights are kept and flagged
/// instead of rejected. Their transform rows can leave the simplex.
pub fn ggt_components_lenient(
    problem: &DecisionProblem,
    anchor: &Policy,
    rho_override: Option<&[f64]>,
) -> Result<GgtComponents> {
    ggt_core(problem, anchor, rho_override, false)
}

/// Credences induced by components: weight `rho_j` on each visit of a
/// state of dependant `j`.
pub fn ggt_credences(
    problem: &DecisionProblem,
    components: &GgtComponents,
) -> Result<CredenceProfile> {
    let solution = solve_at(problem, &components.anchor)?;
    Ok(weighted_credences(problem, &solution, &components.weights()))
}

/// A full belief system from admissible components.
pub fn beliefs_from_components(
    problem: &DecisionProblem,
    components: &GgtComponents,
) -> Result<BeliefSystem> {
    let solution = solve_at(problem, &components.anchor)?;
    let transforms: Vec<Vec<Policy>> = components
        .dependants
        .iter()
        .map(|d| {
            d.tau_rows
                .iter()
                .map(|row| Ok(Policy::renormalized(row.clone())?))
                .collect::<Result<_>>()
        })
        .collect::<Result<_>>()?;
    let profile = weighted_credences(problem, &solution, &components.weights());
    Ok(system_from_profile(
        BeliefKind::Ggt,
        &components.anchor,
        profile,
        transforms,
    ))
}

/// Beliefs from first-order components with enforced admissibility.
pub fn ggt_beliefs(
    problem: &DecisionProblem,
    anchor: &Policy,
    rho_override: Option<&[f64]>,
) -> Result<BeliefSystem> {
    let components = ggt_components(problem, anchor, rho_override)?;
    beliefs_from_components(problem, &components)
}

/// Synthesizes one local sampler per dependant from the covered cases and
/// returns the induced sampler beliefs together with the samplers.
///
/// Covered cases: a minimum weight at most one (single-sample table
/// `base + delta`), and a vertex anchor with any finite minimum (the
/// one-deviation table on `ceil(gamma)` samples). A mixed anchor with a
/// minimum above one is refused.
pub fn lsgt_from_simple_cases(
    problem: &DecisionProblem,
    anchor: &Policy,
) -> Result<(BeliefSystem, Vec<SimulationFunction>)> {
    problem.ensure_solvable().map_err(BeliefError::Malformed)?;
    let components = ggt_components(problem, anchor, None)?;
    let num_actions = problem.num_actions();
    let mut samplers = Vec::with_capacity(components.dependants.len());
    for (index, dep) in components.dependants.iter().enumerate() {
        let sim = if dep.gamma <= 1.0 + RHO_SLACK {
            let mut table = BTreeMap::new();
            for a in 0..num_actions {
                let row: Vec<f64> = dep
                    .base
                    .probs()
                    .iter()
                    .zip(dep.deltas[a].components().iter())
                    .map(|(&b, &d)| b + d)
                    .collect();
                table.insert(vec![a as u8], Policy::renormalized(row)?);
            }
            SimulationFunction::from_tuples(num_actions, 1, table)?
        } else if let Some(vertex) = anchor.as_vertex() {
            // Snap a minimum that is an integer up to slack, otherwise
            // take the next integer above it.
            let n = if (dep.gamma - dep.gamma.round()).abs() <= RHO_SLACK {
                dep.gamma.round()
            } else {
                dep.gamma.ceil()
            } as u32;
            let scale = f64::from(n);
            let mut table = BTreeMap::new();
            for counts in compositions(n, num_actions) {
                let row = if counts[vertex] + 1 == n {
                    let deviant = counts
                        .iter()
                        .enumerate()
                        .position(|(a, &c)| a != vertex && c == 1)
                        .expect("one slot deviates");
                    dep.base
                        .probs()
                        .iter()
                        .zip(dep.deltas[deviant].components().iter())
                        .map(|(&b, &d)| b + d / scale)
                        .collect()
                } else {
                    dep.base.probs().to_vec()
                };
                table.insert(counts, Policy::renormalized(row)?);
            }
            SimulationFunction::from_multisets(num_actions, n as usize, table)?
        } else {
            return Err(BeliefError::NoSimpleConstruction {
                dependant: index,
                gamma: dep.gamma,
            });
        };
        samplers.push(sim);
    }
    let solution = solve_at(problem, anchor)?;
    let weights: Vec<f64> = samplers.iter().map(|s| s.sample_count() as f64).collect();
    let transforms = slot_transforms(problem, &samplers, anchor)?;
    let profile = weighted_credences(problem, &solution, &weights);
    Ok((
        system_from_profile(BeliefKind::Lsgt, anchor, profile, transforms),
        samplers,
    ))
}

/// Outcome of auditing a belief system against the chain at its anchor.
#[derive(Debug, Clone, Serialize)]
pub struct AuditReport {
    /// Every visited state of an identity dependant carries positive
    /// credence and its transforms favor the chosen action.
    pub faithful: bool,
    /// Some credence sits on a state the anchor policy never visits.
    pub fanciful: bool,
    pub notes: Vec<String>,
}

/// Audits credences and transforms against expected visit counts at the
/// anchor.
pub fn audit_beliefs(problem: &DecisionProblem, beliefs: &BeliefSystem) -> Result<AuditReport> {
    problem.ensure_solvable().map_err(BeliefError::Malformed)?;
    let m = problem.non_terminals().len();
    if beliefs.credences.len() != m || beliefs.transforms.len() != problem.num_dependants() {
        return Err(BeliefError::BadCustom(
            "belief system does not match the problem shape".into(),
        ));
    }
    let solution = solve_at(problem, &beliefs.anchor)?;
    let mut notes = Vec::new();
    let mut fanciful = false;
    for pos in 0..m {
        if beliefs.credences[pos] > CREDENCE_POSITIVE
            && solution.visit_counts[pos] <= VISIT_POSITIVE
        {
            fanciful = true;
            notes.push(format!(
                "state {}: credence {:.6} on zero expected visits",
                problem.state(problem.non_terminals()[pos]).id,
                beliefs.credences[pos]
            ));
        }
    }
    let mut faithful = true;
    for (dependant, f) in problem.dependence().iter().enumerate() {
        if !f.is_identity() {
            continue;
        }
        let visited: Vec<usize> = (0..m)
            .filter(|&pos| {
                problem.dependant_at(pos) == dependant
                    && solution.visit_counts[pos] > VISIT_POSITIVE
            })
            .collect();
        if visited.is_empty() {
            continue;
        }
        for &pos in &visited {
            if beliefs.credences[pos] <= CREDENCE_POSITIVE {
                faithful = false;
                notes.push(format!(
                    "identity dependant {}: visited state {} has zero credence",
                    dependant + 1,
                    problem.state(problem.non_terminals()[pos]).id
                ));
            }
        }
        for action in 0..problem.num_actions() {
            let own = beliefs.transforms[dependant][action].prob(action);
            for other in 0..problem.num_actions() {
                if other == action {
                    continue;
                }
                let cross = beliefs.transforms[dependant][other].prob(action);
                if own <= cross {
                    faithful = false;
                    notes.push(format!(
                        "identity dependant {}: transform for {} does not favor it ({:.6} vs {:.6})",
                        dependant + 1,
                        problem.action_labels()[action],
                        own,
                        cross
                    ));
                }
            }
        }
    }
    Ok(AuditReport {
        faithful,
        fanciful,
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::depfun::{DependenceFunction, PolynomialMap};
    use crate::problem::ProblemBuilder;

    /// Two exact copies of the agent in sequence; uneven visits.
    fn copies_problem() -> DecisionProblem {
        ProblemBuilder::new(["left", "right"])
            .state("first", 1)
            .state("second", 1)
            .terminal("out", 1.0)
            .terminal("skip", 0.0)
            .initial("first", 1.0)
            .transition("first", "left", [("second", 1.0)])
            .transition("first", "right", [("skip", 1.0)])
            .transition("second", "left", [("out", 1.0)])
            .transition("second", "right", [("skip", 1.0)])
            .dependence(DependenceFunction::identity(2))
            .build()
            .unwrap()
    }

    /// One acting state whose dependant is the given function.
    fn hub_problem(f: DependenceFunction) -> DecisionProblem {
        let labels: Vec<String> = (0..f.num_actions()).map(|a| format!("a{a}")).collect();
        let terminals: Vec<String> = (0..f.num_actions()).map(|i| format!("t{i}")).collect();
        let mut builder = ProblemBuilder::new(labels.clone()).state("hub", 1);
        for (i, (label, terminal)) in labels.iter().zip(terminals.iter()).enumerate() {
            builder = builder
                .terminal(terminal, i as f64)
                .transition("hub", label, [(terminal.as_str(), 1.0)]);
        }
        builder
            .initial("hub", 1.0)
            .dependence(f)
            .build()
            .unwrap()
    }

    fn v2_linear() -> DependenceFunction {
        DependenceFunction::linear(vec![
            Policy::new(vec![0.9, 0.1]).unwrap(),
            Policy::new(vec![0.1, 0.9]).unwrap(),
        ])
        .unwrap()
    }

    #[test]
    fn gt_credences_follow_visit_counts() {
        let problem = copies_problem();
        let anchor = Policy::new(vec![0.6, 0.4]).unwrap();
        let beliefs = gt_beliefs(&problem, &anchor).unwrap();
        assert!((beliefs.credences[0] - 1.0 / 1.6).abs() < 1e-12);
        assert!((beliefs.credences[1] - 0.6 / 1.6).abs() < 1e-12);
        assert_eq!(beliefs.transforms[0][0], Policy::pure(0, 2));
        assert!(!beliefs.degenerate_uniform);
        let audit = audit_beliefs(&problem, &beliefs).unwrap();
        assert!(audit.faithful, "{:?}", audit.notes);
        assert!(!audit.fanciful);
    }

    #[test]
    fn single_sample_identity_sampler_reproduces_gt() {
        let problem = copies_problem();
        let anchor = Policy::new(vec![0.3, 0.7]).unwrap();
        let gt = gt_beliefs(&problem, &anchor).unwrap();
        let gsgt =
            gsgt_beliefs(&problem, &[SimulationFunction::identity(2)], &anchor).unwrap();
        for (a, b) in gt.credences.iter().zip(gsgt.credences.iter()) {
            assert!((a - b).abs() < 1e-15);
        }
        for action in 0..2 {
            assert_eq!(gt.transforms[0][action], gsgt.transforms[0][action]);
        }
    }

    #[test]
    fn mismatched_sampler_is_rejected() {
        let problem = copies_problem();
        let wrong = SimulationFunction::constant(Policy::uniform(2), 1).unwrap();
        let err = gsgt_beliefs(&problem, &[wrong], &Policy::uniform(2)).unwrap_err();
        assert!(matches!(
            err,
            BeliefError::SamplerPrecondition { dependant: 0, .. }
        ));
    }

    #[test]
    fn identity_minimum_weight_is_one_everywhere() {
        let problem = copies_problem();
        for anchor in [
            Policy::uniform(2),
            Policy::new(vec![0.2, 0.8]).unwrap(),
            Policy::pure(0, 2),
            Policy::pure(1, 2),
        ] {
            let components = ggt_components(&problem, &anchor, None).unwrap();
            assert!((components.dependants[0].gamma - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn linear_minimum_weight_at_vertex() {
        let problem = hub_problem(v2_linear());
        let anchor = Policy::pure(0, 2);
        let components = ggt_components(&problem, &anchor, None).unwrap();
        let dep = &components.dependants[0];
        assert!((dep.gamma - 8.0 / 9.0).abs() < 1e-12);

        let err = ggt_components(&problem, &anchor, Some(&[0.8])).unwrap_err();
        assert!(matches!(err, BeliefError::WeightBelowMinimum { .. }));

        let lenient = ggt_components_lenient(&problem, &anchor, Some(&[0.8])).unwrap();
        let dep = &lenient.dependants[0];
        assert!(!dep.admissible);
        assert!((dep.tau_rows[1][0] - (-0.1)).abs() < 1e-12);
        assert!((dep.tau_rows[1][1] - 1.1).abs() < 1e-12);
    }

    #[test]
    fn transforms_mix_back_to_base() {
        let cubic = PolynomialMap::new(
            2,
            vec![
                (vec![0, 0], vec![1.0 / 6.0, 5.0 / 6.0]),
                (vec![2, 0], vec![2.0, -2.0]),
                (vec![3, 0], vec![-4.0 / 3.0, 4.0 / 3.0]),
            ],
        )
        .unwrap();
        let functions = vec![
            DependenceFunction::identity(2),
            v2_linear(),
            DependenceFunction::polynomial(cubic).unwrap(),
        ];
        for f in functions {
            let problem = hub_problem(f);
            for anchor in [
                Policy::uniform(2),
                Policy::new(vec![0.3, 0.7]).unwrap(),
                Policy::pure(0, 2),
            ] {
                let components = ggt_components(&problem, &anchor, None).unwrap();
                let dep = &components.dependants[0];
                for component in 0..2 {
                    let mixed: f64 = (0..2)
                        .map(|a| anchor.prob(a) * dep.tau_rows[a][component])
                        .sum();
                    assert!(
                        (mixed - dep.base.prob(component)).abs() < 1e-9,
                        "component {component} mixed {mixed} vs base {}",
                        dep.base.prob(component)
                    );
                }
            }
        }
    }

    #[test]
    fn constant_dependence_degenerates_to_uniform() {
        let problem = hub_problem(DependenceFunction::constant(Policy::uniform(2)));
        let beliefs = ggt_beliefs(&problem, &Policy::uniform(2), None).unwrap();
        assert!(beliefs.degenerate_uniform);
        assert!((beliefs.credences[0] - 1.0).abs() < 1e-12);
        // The transform of a constant dependant is the constant itself.
        assert!((beliefs.transforms[0][0].prob(0) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn lsgt_single_sample_route_recovers_linear_columns() {
        let problem = hub_problem(v2_linear());
        let anchor = Policy::uniform(2);
        let (beliefs, samplers) = lsgt_from_simple_cases(&problem, &anchor).unwrap();
        assert_eq!(beliefs.kind, BeliefKind::Lsgt);
        assert_eq!(samplers[0].sample_count(), 1);
        let g0 = samplers[0].response(&[0]).unwrap();
        assert!((g0.prob(0) - 0.9).abs() < 1e-12);
        let g1 = samplers[0].response(&[1]).unwrap();
        assert!((g1.prob(1) - 0.9).abs() < 1e-12);
    }

    #[test]
    fn lsgt_vertex_route_matches_first_order_data() {
        // First component p^2: minimum weight 2 at the first vertex.
        let square = PolynomialMap::new(
            2,
            vec![(vec![0, 0], vec![0.0, 1.0]), (vec![2, 0], vec![1.0, -1.0])],
        )
        .unwrap();
        let problem = hub_problem(DependenceFunction::polynomial(square).unwrap());
        let anchor = Policy::pure(0, 2);
        let components = ggt_components(&problem, &anchor, None).unwrap();
        assert!((components.dependants[0].gamma - 2.0).abs() < 1e-12);
        let (_, samplers) = lsgt_from_simple_cases(&problem, &anchor).unwrap();
        assert_eq!(samplers[0].sample_count(), 2);
        let delta = samplers[0].delta(1, &anchor).unwrap();
        assert!((delta.get(0) - (-2.0)).abs() < 1e-12);
        assert!((delta.get(1) - 2.0).abs() < 1e-12);

        // The same minimum weight at a mixed anchor has no covered
        // construction.
        let mixed = Policy::new(vec![0.9, 0.1]).unwrap();
        let err = lsgt_from_simple_cases(&problem, &mixed).unwrap_err();
        assert!(matches!(err, BeliefError::NoSimpleConstruction { .. }));
    }

    #[test]
    fn audit_flags_credence_on_unvisited_states() {
        let problem = copies_problem();
        let anchor = Policy::pure(1, 2);
        let transforms = vec![vec![Policy::pure(0, 2), Policy::pure(1, 2)]];
        let beliefs =
            BeliefSystem::custom(&problem, anchor, vec![0.5, 0.5], transforms).unwrap();
        let audit = audit_beliefs(&problem, &beliefs).unwrap();
        assert!(audit.fanciful);
    }

    #[test]
    fn audit_flags_unfavorable_transforms() {
        let problem = copies_problem();
        let anchor = Policy::uniform(2);
        let backwards = vec![vec![Policy::pure(1, 2), Policy::pure(0, 2)]];
        let beliefs =
            BeliefSystem::custom(&problem, anchor, vec![0.5, 0.5], backwards).unwrap();
        let audit = audit_beliefs(&problem, &beliefs).unwrap();
        assert!(!audit.faithful);
        assert!(!audit.fanciful);
    }

    #[test]
    fn custom_rejects_bad_shapes() {
        let problem = copies_problem();
        let anchor = Policy::uniform(2);
        let transforms = vec![vec![Policy::pure(0, 2), Policy::pure(1, 2)]];
        assert!(matches!(
            BeliefSystem::custom(&problem, anchor.clone(), vec![1.0], transforms.clone()),
            Err(BeliefError::BadCustom(_))
        ));
        assert!(matches!(
            BeliefSystem::custom(&problem, anchor.clone(), vec![0.4, 0.4], transforms.clone()),
            Err(BeliefError::BadCustom(_))
        ));
        assert!(matches!(
            BeliefSystem::custom(&problem, anchor, vec![0.5, 0.5], vec![]),
            Err(BeliefError::BadCustom(_))
        ));
    }
}
