//! Problem files: a structured JSON document describing a decision problem.
//!
//! Fields: `actions` (ordered labels), `states` (ordered records with `id`,
//! `terminal`, optional `utility` and `dependant`), `initial` (state to
//! probability), `transitions` (`state/action` to a sparse target row), and
//! `dependants` (one dependence spec per dependant, in index order).
//!
//! Saving is byte-deterministic, and numeric fields survive a load, save,
//! load cycle bit for bit. Sampler tables are keyed by comma-joined action
//! labels: slot order for positional tables, counts flattened in action
//! order for symmetric ones.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::depfun::{
    builtin, DependenceFunction, DepfunError, PolynomialMap, SimulationFunction, TableView,
};
use crate::policy::{Policy, PolicyError};
use crate::problem::{DecisionProblem, ProblemBuilder, ProblemError, StateRecord};

#[derive(Debug, Error)]
pub enum FileError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("problem: {0}")]
    Problem(#[from] ProblemError),
    #[error("policy: {0}")]
    Policy(#[from] PolicyError),
    #[error("dependence: {0}")]
    Depfun(#[from] DepfunError),
    #[error("cannot serialize: {detail}")]
    Unserializable { detail: String },
    #[error("bad transition key `{key}`: expected `state/action`")]
    BadTransitionKey { key: String },
    #[error("unknown action label `{label}`")]
    UnknownAction { label: String },
    #[error("bad sampler table key `{key}`: {detail}")]
    BadTableKey { key: String, detail: String },
}

#[derive(Serialize, Deserialize)]
struct ProblemFile {
    actions: Vec<String>,
    states: Vec<StateEntry>,
    initial: BTreeMap<String, f64>,
    transitions: BTreeMap<String, BTreeMap<String, f64>>,
    dependants: Vec<DepSpec>,
}

#[derive(Serialize, Deserialize)]
struct StateEntry {
    id: String,
    terminal: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    utility: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    dependant: Option<usize>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum DepSpec {
    Identity,
    Constant {
        policy: Vec<f64>,
    },
    Linear {
        columns: Vec<Vec<f64>>,
    },
    Poly {
        terms: Vec<PolyTerm>,
    },
    Sampler {
        n: usize,
        symmetric: bool,
        table: BTreeMap<String, Vec<f64>>,
    },
    Builtin {
        name: String,
    },
}

#[derive(Serialize, Deserialize)]
struct PolyTerm {
    exp: Vec<u32>,
    coef: Vec<f64>,
}

/// Renders a problem as its canonical file text.
pub fn save_string(problem: &DecisionProblem) -> Result<String, FileError> {
    let doc = to_document(problem)?;
    let mut text = serde_json::to_string_pretty(&doc)?;
    text.push('\n');
    Ok(text)
}

/// Parses a problem from file text.
pub fn parse_str(text: &str) -> Result<DecisionProblem, FileError> {
    let doc: ProblemFile = serde_json::from_str(text)?;
    from_document(&doc)
}

/// Writes a problem to a file at `path`.
pub fn save_path(problem: &DecisionProblem, path: &Path) -> Result<(), FileError> {
    let text = save_string(problem)?;
    fs::write(path, text)?;
    Ok(())
}

/// Reads a problem from the file at `path`.
pub fn load_path(path: &Path) -> Result<DecisionProblem, FileError> {
    let text = fs::read_to_string(path)?;
    parse_str(&text)
}

fn to_document(problem: &DecisionProblem) -> Result<ProblemFile, FileError> {
    let labels = problem.action_labels();
    for label in labels {
        if label.contains('/') || label.contains(',') {
            return Err(FileError::Unserializable {
                detail: format!("action label `{label}` contains a reserved separator"),
            });
        }
    }
    let states = problem
        .states()
        .iter()
        .map(|record| StateEntry {
            id: record.id.clone(),
            terminal: record.is_terminal,
            utility: record.utility,
            dependant: record.dependant,
        })
        .collect();
    let mut initial = BTreeMap::new();
    for (idx, &mass) in problem.initial_dist().iter().enumerate() {
        if mass != 0.0 {
            initial.insert(problem.states()[idx].id.clone(), mass);
        }
    }
    let mut transitions = BTreeMap::new();
    for (pos, &state_idx) in problem.non_terminals().iter().enumerate() {
        let state_id = &problem.states()[state_idx].id;
        for (action, label) in labels.iter().enumerate() {
            let mut row = BTreeMap::new();
            for (target, &mass) in problem.transition_row(pos, action).iter().enumerate() {
                if mass != 0.0 {
                    row.insert(problem.states()[target].id.clone(), mass);
                }
            }
            transitions.insert(format!("{state_id}/{label}"), row);
        }
    }
    let dependants = problem
        .dependence()
        .iter()
        .map(|f| dep_to_spec(f, labels))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ProblemFile {
        actions: labels.to_vec(),
        states,
        initial,
        transitions,
        dependants,
    })
}

fn dep_to_spec(f: &DependenceFunction, labels: &[String]) -> Result<DepSpec, FileError> {
    match f {
        DependenceFunction::Identity { .. } => Ok(DepSpec::Identity),
        DependenceFunction::Constant(policy) => Ok(DepSpec::Constant {
            policy: policy.probs().to_vec(),
        }),
        DependenceFunction::Linear(columns) => Ok(DepSpec::Linear {
            columns: columns.iter().map(|c| c.probs().to_vec()).collect(),
        }),
        DependenceFunction::Polynomial(map) => Ok(DepSpec::Poly {
            terms: map
                .terms()
                .map(|(exp, coef)| PolyTerm {
                    exp: exp.clone(),
                    coef: coef.clone(),
                })
                .collect(),
        }),
        DependenceFunction::Sampler(sim) => {
            let mut table = BTreeMap::new();
            match sim.table_view() {
                TableView::Tuples(map) => {
                    for (tuple, response) in map {
                        let key = tuple
                            .iter()
                            .map(|&a| labels[a as usize].as_str())
                            .collect::<Vec<_>>()
                            .join(",");
                        table.insert(key, response.probs().to_vec());
                    }
                    Ok(DepSpec::Sampler {
                        n: sim.sample_count(),
                        symmetric: false,
                        table,
                    })
                }
                TableView::Multisets(map) => {
                    for (counts, response) in map {
                        let mut parts = Vec::with_capacity(sim.sample_count());
                        for (action, &count) in counts.iter().enumerate() {
                            for _ in 0..count {
                                parts.push(labels[action].as_str());
                            }
                        }
                        table.insert(parts.join(","), response.probs().to_vec());
                    }
                    Ok(DepSpec::Sampler {
                        n: sim.sample_count(),
                        symmetric: true,
                        table,
                    })
                }
            }
        }
        DependenceFunction::BlackBox(b) => match b.name() {
            Some(name) => Ok(DepSpec::Builtin {
                name: name.to_string(),
            }),
            None => Err(FileError::Unserializable {
                detail: "opaque dependence carries no registry name".to_string(),
            }),
        },
    }
}

fn from_document(doc: &ProblemFile) -> Result<DecisionProblem, FileError> {
    let num_actions = doc.actions.len();
    let action_index: BTreeMap<&str, usize> = doc
        .actions
        .iter()
        .enumerate()
        .map(|(i, label)| (label.as_str(), i))
        .collect();
    let mut builder = ProblemBuilder::new(doc.actions.clone());
    for entry in &doc.states {
        builder = builder.raw_state(StateRecord {
            id: entry.id.clone(),
            is_terminal: entry.terminal,
            utility: entry.utility,
            dependant: entry.dependant,
        });
    }
    for (id, &mass) in &doc.initial {
        builder = builder.initial(id, mass);
    }
    for (key, row) in &doc.transitions {
        let (state, action) = key
            .rsplit_once('/')
            .ok_or_else(|| FileError::BadTransitionKey { key: key.clone() })?;
        if !action_index.contains_key(action) {
            return Err(FileError::UnknownAction {
                label: action.to_string(),
            });
        }
        let targets: Vec<(&str, f64)> = row.iter().map(|(id, &mass)| (id.as_str(), mass)).collect();
        builder = builder.transition(state, action, targets);
    }
    for spec in &doc.dependants {
        builder = builder.dependence(spec_to_dep(spec, num_actions, &action_index)?);
    }
    Ok(builder.build()?)
}

fn spec_to_dep(
    spec: &DepSpec,
    num_actions: usize,
    action_index: &BTreeMap<&str, usize>,
) -> Result<DependenceFunction, FileError> {
    match spec {
        DepSpec::Identity => Ok(DependenceFunction::identity(num_actions)),
        DepSpec::Constant { policy } => {
            Ok(DependenceFunction::constant(Policy::new(policy.clone())?))
        }
        DepSpec::Linear { columns } => {
            let columns = columns
                .iter()
                .map(|c| Policy::new(c.clone()))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(DependenceFunction::linear(columns)?)
        }
        DepSpec::Poly { terms } => {
            let map = PolynomialMap::new(
                num_actions,
                terms.iter().map(|t| (t.exp.clone(), t.coef.clone())),
            )?;
            Ok(DependenceFunction::polynomial(map)?)
        }
        DepSpec::Sampler {
            n,
            symmetric,
            table,
        } => {
            let sim = if *symmetric {
                let mut by_counts = BTreeMap::new();
                for (key, response) in table {
                    let mut counts = vec![0u32; num_actions];
                    for part in parse_table_key(key, *n, action_index)? {
                        counts[part] += 1;
                    }
                    by_counts.insert(counts, Policy::new(response.clone())?);
                }
                SimulationFunction::from_multisets(num_actions, *n, by_counts)?
            } else {
                let mut by_tuples = BTreeMap::new();
                for (key, response) in table {
                    let tuple = parse_table_key(key, *n, action_index)?
                        .into_iter()
                        .map(|a| a as u8)
                        .collect();
                    by_tuples.insert(tuple, Policy::new(response.clone())?);
                }
                SimulationFunction::from_tuples(num_actions, *n, by_tuples)?
            };
            Ok(DependenceFunction::sampler(sim)?)
        }
        DepSpec::Builtin { name } => Ok(builtin(name)?),
    }
}

fn parse_table_key(
    key: &str,
    n: usize,
    action_index: &BTreeMap<&str, usize>,
) -> Result<Vec<usize>, FileError> {
    let parts: Vec<&str> = key.split(',').collect();
    if parts.len() != n {
        return Err(FileError::BadTableKey {
            key: key.to_string(),
            detail: format!("{} labels, expected {n}", parts.len()),
        });
    }
    parts
        .into_iter()
        .map(|label| {
            action_index
                .get(label)
                .copied()
                .ok_or_else(|| FileError::BadTableKey {
                    key: key.to_string(),
                    detail: format!("unknown action label `{label}`"),
                })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;
    use std::sync::Arc;

    use super::*;
    use crate::fixtures;

    #[test]
    fn fixture_round_trips_are_byte_stable() {
        for name in fixtures::names() {
            let fixture = fixtures::load(name).unwrap();
            let first = save_string(&fixture.problem).unwrap();
            let reloaded = parse_str(&first).unwrap();
            let second = save_string(&reloaded).unwrap();
            assert_eq!(first, second, "{name}: save is not stable under reload");
            for (a, b) in fixture
                .problem
                .initial_dist()
                .iter()
                .zip(reloaded.initial_dist())
            {
                assert_eq!(a.to_bits(), b.to_bits(), "{name}: initial mass drifted");
            }
            for (sa, sb) in fixture.problem.states().iter().zip(reloaded.states()) {
                assert_eq!(sa.id, sb.id);
                assert_eq!(
                    sa.utility.map(f64::to_bits),
                    sb.utility.map(f64::to_bits),
                    "{name}: utility drifted"
                );
            }
            for pos in 0..fixture.problem.non_terminals().len() {
                for action in 0..fixture.problem.action_labels().len() {
                    let ra = fixture.problem.transition_row(pos, action);
                    let rb = reloaded.transition_row(pos, action);
                    for (a, b) in ra.iter().zip(rb) {
                        assert_eq!(a.to_bits(), b.to_bits(), "{name}: row drifted");
                    }
                }
            }
        }
    }

    #[test]
    fn builtin_dependence_survives_reload() {
        let wine = fixtures::load("wine").unwrap();
        let reloaded = parse_str(&save_string(&wine.problem).unwrap()).unwrap();
        let f = &reloaded.dependence()[1];
        assert!(!f.differentiable());
        let out = f.eval(&Policy::new(vec![0.5, 0.5]).unwrap()).unwrap();
        assert_eq!(out.probs(), &[0.0, 1.0]);
    }

    #[test]
    fn positional_sampler_round_trips() {
        let mut table = BTreeMap::new();
        for first in 0..2u8 {
            for second in 0..2u8 {
                table.insert(vec![first, second], Policy::pure(first as usize, 2));
            }
        }
        let sim = SimulationFunction::from_tuples(2, 2, table).unwrap();
        assert!(!sim.is_symmetric());
        let problem = crate::problem::ProblemBuilder::new(["x", "y"])
            .state("hub", 1)
            .terminal("t0", 0.0)
            .terminal("t1", 1.0)
            .initial("hub", 1.0)
            .transition("hub", "x", [("t0", 1.0)])
            .transition("hub", "y", [("t1", 1.0)])
            .dependence(DependenceFunction::sampler(sim).unwrap())
            .build()
            .unwrap();
        let text = save_string(&problem).unwrap();
        assert!(text.contains("\"x,y\""));
        let reloaded = parse_str(&text).unwrap();
        assert_eq!(save_string(&reloaded).unwrap(), text);
        match &reloaded.dependence()[0] {
            DependenceFunction::Sampler(sim) => {
                assert!(!sim.is_symmetric());
                assert_eq!(sim.response(&[1, 0]).unwrap().probs(), &[0.0, 1.0]);
            }
            other => panic!("expected a sampler, got {other:?}"),
        }
    }

    #[test]
    fn anonymous_black_box_is_unserializable() {
        let problem = crate::problem::ProblemBuilder::new(["x", "y"])
            .state("hub", 1)
            .terminal("t0", 0.0)
            .terminal("t1", 1.0)
            .initial("hub", 1.0)
            .transition("hub", "x", [("t0", 1.0)])
            .transition("hub", "y", [("t1", 1.0)])
            .dependence(
                DependenceFunction::black_box(
                    None,
                    2,
                    false,
                    Arc::new(|at: &Policy| vec![at.prob(1), at.prob(0)]),
                    None,
                )
                .unwrap(),
            )
            .build()
            .unwrap();
        assert!(matches!(
            save_string(&problem),
            Err(FileError::Unserializable { .. })
        ));
    }

    #[test]
    fn malformed_keys_are_rejected() {
        let fixture = fixtures::load("nrho").unwrap();
        let text = save_string(&fixture.problem).unwrap();
        let broken = text.replace("hub/a", "hub-a");
        assert!(matches!(
            parse_str(&broken),
            Err(FileError::BadTransitionKey { .. })
        ));
        let unknown = text.replace("hub/a", "hub/z");
        assert!(matches!(
            parse_str(&unknown),
            Err(FileError::UnknownAction { .. })
        ));
    }
}
