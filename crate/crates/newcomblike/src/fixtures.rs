//! Named example problems with documented expected values.
//!
//! Each fixture couples a decision problem with the numbers an analysis is
//! known to produce on it, so tests and the command line can exercise a
//! build end to end against pinned targets. Where the dependence admits an
//! exact simulation model, the fixture also carries one sampler per
//! dependant.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::depfun::{builtin, exact_sampler, DependenceFunction, PolynomialMap, SimulationFunction};
use crate::policy::Policy;
use crate::problem::{DecisionProblem, ProblemBuilder};

/// A pinned number a fixture is documented to reproduce, with the absolute
/// tolerance the reproduction is held to.
#[derive(Debug, Clone)]
pub struct ExpectedValue {
    pub key: &'static str,
    pub value: f64,
    pub tolerance: f64,
    pub note: &'static str,
}

/// A named example problem together with its documented numbers and, when
/// one exists, an exact simulation model per dependant.
pub struct Fixture {
    pub name: String,
    pub problem: DecisionProblem,
    pub samplers: Option<Vec<SimulationFunction>>,
    pub expected: Vec<ExpectedValue>,
}

#[derive(Debug, Error)]
pub enum FixtureError {
    #[error("unknown fixture `{name}`")]
    UnknownName { name: String },
}

/// The canonical registry listing. `load` additionally accepts any
/// `staircase_<n>` with `n >= 1` in canonical digits.
pub fn names() -> Vec<&'static str> {
    vec![
        "newcomb",
        "newcomb75",
        "sbpd_v1",
        "sbpd_v2",
        "adversarial_offer",
        "wine",
        "staircase_4",
        "nrho",
        "k3_nonsampleable",
    ]
}

/// Loads a fixture by name.
pub fn load(name: &str) -> Result<Fixture, FixtureError> {
    match name {
        "newcomb" => Ok(newcomb()),
        "newcomb75" => Ok(newcomb75()),
        "sbpd_v1" => Ok(sbpd_v1()),
        "sbpd_v2" => Ok(sbpd_v2()),
        "adversarial_offer" => Ok(adversarial_offer()),
        "wine" => Ok(wine()),
        "nrho" => Ok(nrho()),
        "k3_nonsampleable" => Ok(k3_nonsampleable()),
        other => {
            if let Some(treads) = other.strip_prefix("staircase_") {
                if let Ok(n) = treads.parse::<u32>() {
                    if n >= 1 && treads == n.to_string() {
                        return Ok(staircase(n));
                    }
                }
            }
            Err(FixtureError::UnknownName {
                name: other.to_string(),
            })
        }
    }
}

/// Two boxes, one predictor. The simulation state is an exact copy of the
/// agent; the live states play out against whatever the boxes hold.
fn boxes_problem(initial: &[(&str, f64)]) -> DecisionProblem {
    let mut builder = ProblemBuilder::new(["onebox", "twobox"])
        .state("sim", 1)
        .state("full", 1)
        .state("empty", 1)
        .terminal("full_onebox", 1_000_000.0)
        .terminal("full_twobox", 1_001_000.0)
        .terminal("empty_onebox", 0.0)
        .terminal("empty_twobox", 1_000.0)
        .transition("sim", "onebox", [("full", 1.0)])
        .transition("sim", "twobox", [("empty", 1.0)])
        .transition("full", "onebox", [("full_onebox", 1.0)])
        .transition("full", "twobox", [("full_twobox", 1.0)])
        .transition("empty", "onebox", [("empty_onebox", 1.0)])
        .transition("empty", "twobox", [("empty_twobox", 1.0)])
        .dependence(DependenceFunction::identity(2));
    for (state, mass) in initial {
        builder = builder.initial(state, *mass);
    }
    builder.build().expect("box fixture is well formed")
}

fn newcomb() -> Fixture {
    Fixture {
        name: "newcomb".to_string(),
        problem: boxes_problem(&[("sim", 1.0)]),
        samplers: Some(vec![SimulationFunction::identity(2)]),
        expected: vec![
            ExpectedValue {
                key: "gt_sim_credence",
                value: 0.5,
                tolerance: 1e-12,
                note: "an exact copy splits visit weight evenly between the \
                       simulation and the live round",
            },
            ExpectedValue {
                key: "exante_eu_onebox",
                value: 1_000_000.0,
                tolerance: 1e-3,
                note: "committing to one box fills the opaque box",
            },
            ExpectedValue {
                key: "exante_eu_twobox",
                value: 1_000.0,
                tolerance: 1e-6,
                note: "committing to two boxes leaves only the visible grand",
            },
        ],
    }
}

fn newcomb75() -> Fixture {
    Fixture {
        name: "newcomb75".to_string(),
        problem: boxes_problem(&[("sim", 0.5), ("full", 0.25), ("empty", 0.25)]),
        samplers: Some(vec![SimulationFunction::identity(2)]),
        expected: vec![
            ExpectedValue {
                key: "gt_sim_credence",
                value: 1.0 / 3.0,
                tolerance: 1e-10,
                note: "half the runs pass the simulation, and every run \
                       visits exactly one live state",
            },
            ExpectedValue {
                key: "exante_eu_onebox",
                value: 750_000.0,
                tolerance: 0.75,
                note: "the box is full on the simulated half plus half the \
                       coin flips",
            },
            ExpectedValue {
                key: "exante_eu_twobox",
                value: 251_000.0,
                tolerance: 0.251,
                note: "a quarter of runs find the box pre-filled anyway",
            },
        ],
    }
}

/// The cubic response of the version 1 predictor: first-action output
/// probability `1/6 + 2 p^2 - (4/3) p^3` in the agent's first-action mass.
fn v1_predictor_map() -> PolynomialMap {
    PolynomialMap::new(
        2,
        [
            (vec![0, 0], vec![1.0 / 6.0, 5.0 / 6.0]),
            (vec![2, 0], vec![2.0, -2.0]),
            (vec![3, 0], vec![-4.0 / 3.0, 4.0 / 3.0]),
        ],
    )
    .expect("cubic predictor response is a simplex map")
}

/// The sequential dilemma chain shared by both versions: the predictor
/// moves twice (opening, then a confirmation that collapses to the hostile
/// branch after an opening defection), then the agent moves once.
fn sequential_dilemma(agent: DependenceFunction, predictor: DependenceFunction) -> DecisionProblem {
    ProblemBuilder::new(["C", "D"])
        .state("pred_start", 2)
        .state("pred_c", 2)
        .state("pred_d", 2)
        .state("agent_c", 1)
        .state("agent_d", 1)
        .terminal("out_cc", 3.0)
        .terminal("out_dc", 5.0)
        .terminal("out_cd", 0.0)
        .terminal("out_dd", 2.0)
        .initial("pred_start", 1.0)
        .transition("pred_start", "C", [("pred_c", 1.0)])
        .transition("pred_start", "D", [("pred_d", 1.0)])
        .transition("pred_c", "C", [("agent_c", 1.0)])
        .transition("pred_c", "D", [("agent_d", 1.0)])
        .transition("pred_d", "C", [("agent_d", 1.0)])
        .transition("pred_d", "D", [("agent_d", 1.0)])
        .transition("agent_c", "C", [("out_cc", 1.0)])
        .transition("agent_c", "D", [("out_dc", 1.0)])
        .transition("agent_d", "C", [("out_cd", 1.0)])
        .transition("agent_d", "D", [("out_dd", 1.0)])
        .dependence(agent)
        .dependence(predictor)
        .build()
        .expect("sequential dilemma chain is well formed")
}

fn sbpd_v1() -> Fixture {
    let predictor =
        DependenceFunction::polynomial(v1_predictor_map()).expect("cubic map stays on the simplex");
    let predictor_sampler =
        exact_sampler(&predictor, None).expect("the cubic rewrites at its own degree");
    let problem = sequential_dilemma(DependenceFunction::identity(2), predictor);
    Fixture {
        name: "sbpd_v1".to_string(),
        problem,
        samplers: Some(vec![SimulationFunction::identity(2), predictor_sampler]),
        expected: vec![
            ExpectedValue {
                key: "exante_eu_pure_c",
                value: 25.0 / 12.0,
                tolerance: 1e-10,
                note: "both pure strategies cash out identically",
            },
            ExpectedValue {
                key: "exante_eu_pure_d",
                value: 25.0 / 12.0,
                tolerance: 1e-10,
                note: "both pure strategies cash out identically",
            },
            ExpectedValue {
                key: "exante_opt_c",
                value: 0.88,
                tolerance: 0.01,
                note: "the ex ante optimum puts about 0.88 on the first action",
            },
            ExpectedValue {
                key: "gsgt_pred_credence",
                value: 6.0 / 7.0,
                tolerance: 1e-10,
                note: "three samples per predictor visit against one live \
                       round: six sampled slots out of seven",
            },
            ExpectedValue {
                key: "gsgt_advantage_c_at_pure_c",
                value: -2.0 / 7.0,
                tolerance: 1e-9,
                note: "one seventh of the ex ante slope at the vertex",
            },
            ExpectedValue {
                key: "gsgt_advantage_c_at_pure_d",
                value: -2.0 / 7.0,
                tolerance: 1e-9,
                note: "the slope is the same at both vertices",
            },
            ExpectedValue {
                key: "stationary_count",
                value: 3.0,
                tolerance: 0.1,
                note: "two interior balance points plus the pure-defection vertex",
            },
            ExpectedValue {
                key: "stationary_interior_low",
                value: 0.36,
                tolerance: 0.01,
                note: "lower interior balance point",
            },
            ExpectedValue {
                key: "stationary_interior_high",
                value: 0.88,
                tolerance: 0.01,
                note: "upper interior balance point, also the ex ante optimum",
            },
        ],
    }
}

fn sbpd_v2() -> Fixture {
    let agent = DependenceFunction::linear(vec![
        Policy::new(vec![0.9, 0.1]).expect("column sums to one"),
        Policy::new(vec![0.1, 0.9]).expect("column sums to one"),
    ])
    .expect("linear mixture stays on the simplex");
    let predictor = builtin("sqrt_theodora").expect("registry name");
    let problem = sequential_dilemma(agent, predictor);
    Fixture {
        name: "sbpd_v2".to_string(),
        problem,
        samplers: None,
        expected: vec![
            ExpectedValue {
                key: "exante_eu_pure_c",
                value: 2.9,
                tolerance: 1e-10,
                note: "value is linear in first-action mass: 2.1 + 0.8 p",
            },
            ExpectedValue {
                key: "ggt_agent_credence",
                value: 1.0 / 6.0,
                tolerance: 1e-10,
                note: "weights (0.8, 2) at the uniform anchor: 0.8 of 4.8 \
                       sits on the live round",
            },
            ExpectedValue {
                key: "ggt_pred_credence",
                value: 5.0 / 6.0,
                tolerance: 1e-10,
                note: "weights (0.8, 2) at the uniform anchor: 4 of 4.8 sits \
                       on the predictor states",
            },
            ExpectedValue {
                key: "ggt_advantage_c",
                value: 1.0 / 6.0,
                tolerance: 1e-9,
                note: "slope 0.8 over total weight 4.8, at every anchor",
            },
            ExpectedValue {
                key: "lsgt_advantage_c_at_pure_c",
                value: 4.0 / 15.0,
                tolerance: 1e-9,
                note: "single-sample tables weight all visits equally: \
                       slope 0.8 over three visits",
            },
            ExpectedValue {
                key: "stationary_count",
                value: 1.0,
                tolerance: 0.1,
                note: "the slope never vanishes, so only one vertex balances",
            },
            ExpectedValue {
                key: "stationary_c_mass",
                value: 1.0,
                tolerance: 1e-9,
                note: "full first-action mass is the unique balance point",
            },
        ],
    }
}

/// The degree-4 response of the box-filling predictor: fill the first box
/// when all four samples take the second (or half the time when all four
/// pass), symmetrically for the second, and nothing otherwise.
fn offer_predictor_map() -> PolynomialMap {
    PolynomialMap::new(
        3,
        [
            (vec![0, 0, 0], vec![0.0, 0.0, 1.0]),
            (vec![4, 0, 0], vec![0.0, 1.0, -1.0]),
            (vec![0, 4, 0], vec![1.0, 0.0, -1.0]),
            (vec![0, 0, 4], vec![0.5, 0.5, -1.0]),
        ],
    )
    .expect("offer predictor response is a simplex map")
}

/// The same response written as a four-sample lookup table.
fn offer_predictor_sampler() -> SimulationFunction {
    let mut table = BTreeMap::new();
    for first in 0..=4u32 {
        for second in 0..=(4 - first) {
            let third = 4 - first - second;
            let response = if first == 4 {
                Policy::pure(1, 3)
            } else if second == 4 {
                Policy::pure(0, 3)
            } else if third == 4 {
                Policy::new(vec![0.5, 0.5, 0.0]).expect("coin over the two boxes")
            } else {
                Policy::pure(2, 3)
            };
            table.insert(vec![first, second, third], response);
        }
    }
    SimulationFunction::from_multisets(3, 4, table).expect("all fifteen multisets covered")
}

fn adversarial_offer() -> Fixture {
    let predictor = DependenceFunction::polynomial(offer_predictor_map())
        .expect("offer map stays on the simplex");
    let problem = ProblemBuilder::new(["box1", "box2", "pass"])
        .state("offer", 2)
        .state("box1_full", 1)
        .state("box2_full", 1)
        .state("no_box", 1)
        .terminal("prize", 2.0)
        .terminal("empty", -1.0)
        .terminal("none", 0.0)
        .initial("offer", 1.0)
        .transition("offer", "box1", [("box1_full", 1.0)])
        .transition("offer", "box2", [("box2_full", 1.0)])
        .transition("offer", "pass", [("no_box", 1.0)])
        .transition("box1_full", "box1", [("prize", 1.0)])
        .transition("box1_full", "box2", [("empty", 1.0)])
        .transition("box1_full", "pass", [("none", 1.0)])
        .transition("box2_full", "box1", [("empty", 1.0)])
        .transition("box2_full", "box2", [("prize", 1.0)])
        .transition("box2_full", "pass", [("none", 1.0)])
        .transition("no_box", "box1", [("empty", 1.0)])
        .transition("no_box", "box2", [("empty", 1.0)])
        .transition("no_box", "pass", [("none", 1.0)])
        .dependence(DependenceFunction::identity(3))
        .dependence(predictor)
        .build()
        .expect("offer chain is well formed");
    let theta_star = 0.5 + 0.5 / 3f64.sqrt();
    Fixture {
        name: "adversarial_offer".to_string(),
        problem,
        samplers: Some(vec![
            SimulationFunction::identity(3),
            offer_predictor_sampler(),
        ]),
        expected: vec![
            ExpectedValue {
                key: "opt_theta_product",
                value: 1.0 / 12.0,
                tolerance: 1e-8,
                note: "t(1-t)(t^3+(1-t)^3) at the optimal box split",
            },
            ExpectedValue {
                key: "opt_theta_major",
                value: theta_star,
                tolerance: 1e-4,
                note: "the larger share of box mass sits at 1/2 + 1/(2 sqrt 3)",
            },
            ExpectedValue {
                key: "opt_box_mass",
                value: 0.046,
                tolerance: 0.005,
                note: "taking a box is worth the fee only rarely",
            },
        ],
    }
}

fn wine() -> Fixture {
    let problem = ProblemBuilder::new(["keep", "drink"])
        .state("cellar", 2)
        .state("clean", 1)
        .state("poisoned", 1)
        .terminal("kept_clean", 0.0)
        .terminal("drank_clean", 1.0)
        .terminal("kept_poisoned", 0.0)
        .terminal("drank_poisoned", -100.0)
        .initial("cellar", 1.0)
        .transition("cellar", "keep", [("clean", 1.0)])
        .transition("cellar", "drink", [("poisoned", 1.0)])
        .transition("clean", "keep", [("kept_clean", 1.0)])
        .transition("clean", "drink", [("drank_clean", 1.0)])
        .transition("poisoned", "keep", [("kept_poisoned", 1.0)])
        .transition("poisoned", "drink", [("drank_poisoned", 1.0)])
        .dependence(DependenceFunction::identity(2))
        .dependence(builtin("step_predictor").expect("registry name"))
        .build()
        .expect("wine chain is well formed");
    Fixture {
        name: "wine".to_string(),
        problem,
        samplers: None,
        expected: vec![
            ExpectedValue {
                key: "exante_opt_value",
                value: 0.0,
                tolerance: 1e-12,
                note: "never drinking is the only policy that avoids poison",
            },
            ExpectedValue {
                key: "exante_opt_drink_mass",
                value: 0.0,
                tolerance: 1e-12,
                note: "any positive drinking mass triggers the poisoner",
            },
        ],
    }
}

/// One acting state routing straight to terminals, with the named response
/// standing between the policy and the row weights.
fn hub_problem(f: DependenceFunction, utilities: &[f64]) -> DecisionProblem {
    let num_actions = f.num_actions();
    debug_assert_eq!(num_actions, utilities.len());
    let labels: Vec<String> = (0..num_actions)
        .map(|a| {
            char::from(b'a' + a as u8).to_string()
        })
        .collect();
    let mut builder = ProblemBuilder::new(labels.clone())
        .state("hub", 1)
        .initial("hub", 1.0);
    for (a, (label, &utility)) in labels.iter().zip(utilities).enumerate() {
        let terminal = format!("t{a}");
        builder = builder
            .terminal(&terminal, utility)
            .transition("hub", label, [(terminal.as_str(), 1.0)]);
    }
    builder.dependence(f).build().expect("hub chain is well formed")
}

fn staircase(n: u32) -> Fixture {
    let name = format!("staircase_{n}");
    let f = builtin(&name).expect("tread count is positive");
    let problem = hub_problem(f, &[0.0, 1.0]);
    let uniform_level = f64::from(n / 2) / f64::from(n);
    Fixture {
        name,
        problem,
        samplers: None,
        expected: vec![
            ExpectedValue {
                key: "exante_eu_pure_b",
                value: 1.0,
                tolerance: 1e-12,
                note: "the top tread answers full second-action mass",
            },
            ExpectedValue {
                key: "exante_eu_uniform",
                value: uniform_level,
                tolerance: 1e-12,
                note: "the tread under one half of second-action mass",
            },
        ],
    }
}

fn nrho() -> Fixture {
    let f = builtin("quartic_ratio").expect("registry name");
    let problem = hub_problem(f, &[0.0, 1.0]);
    Fixture {
        name: "nrho".to_string(),
        problem,
        samplers: None,
        expected: vec![
            ExpectedValue {
                key: "ggt_growth_at_uniform",
                value: 2.0,
                tolerance: 1e-9,
                note: "the response moves twice as fast as the policy at the \
                       uniform anchor",
            },
            ExpectedValue {
                key: "exante_eu_uniform",
                value: 0.5,
                tolerance: 1e-12,
                note: "the ratio response fixes the uniform point",
            },
        ],
    }
}

/// A three-action polynomial response with nonnegative outputs that still
/// admits no exact sampler at any degree: the first output is
/// `p3 (p1 - 1/2)^2 + p3^3 / 4`, which vanishes to second order along an
/// edge of the simplex, and the rest splits evenly.
fn k3_map() -> PolynomialMap {
    PolynomialMap::new(
        3,
        [
            (vec![0, 0, 0], vec![0.0, 0.5, 0.5]),
            (vec![2, 0, 1], vec![1.0, -0.5, -0.5]),
            (vec![1, 0, 1], vec![-1.0, 0.5, 0.5]),
            (vec![0, 0, 1], vec![0.25, -0.125, -0.125]),
            (vec![0, 0, 3], vec![0.25, -0.125, -0.125]),
        ],
    )
    .expect("k3 response is a simplex map")
}

fn k3_nonsampleable() -> Fixture {
    let f = DependenceFunction::polynomial(k3_map()).expect("k3 map stays on the simplex");
    let problem = hub_problem(f, &[0.0, 1.0, 2.0]);
    Fixture {
        name: "k3_nonsampleable".to_string(),
        problem,
        samplers: None,
        expected: vec![ExpectedValue {
            key: "depfun_a_at_uniform",
            value: 1.0 / 54.0,
            tolerance: 1e-12,
            note: "first output component at the uniform policy",
        }],
    }
}
