//! End-to-end verification: ten numbered checks rerun the workbench's
//! headline numbers against independent oracles and pinned targets, each
//! reporting one pass or fail outcome with details.

use std::collections::BTreeMap;
use std::error::Error;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::beliefs::{audit_beliefs, ggt_components, ggt_components_lenient, ggt_credences, gsgt_beliefs, gt_beliefs};
use crate::cdt::{
    cdt_action_values, find_stationary, ggt_action_values, grad_identity_residual,
    impossibility_check, optimize_ex_ante, ratify, SolveConfig,
};
use crate::chain::{ex_ante_eu, ex_ante_grad};
use crate::depfun::SimulationFunction;
use crate::expand::{expand_problem, verify_expansion};
use crate::fixtures;
use crate::montecarlo::validate;
use crate::policy::Policy;
use crate::problem::DecisionProblem;

/// One numbered check's result.
#[derive(Debug, Clone, Serialize)]
pub struct CriterionOutcome {
    pub index: usize,
    pub label: &'static str,
    pub pass: bool,
    pub details: String,
    pub millis: u128,
}

pub const CRITERION_COUNT: usize = 10;

type CheckResult = Result<(bool, String), Box<dyn Error>>;

/// Runs one numbered check (1 through 10). Deterministic in `seed`.
pub fn criterion(index: usize, seed: u64) -> CriterionOutcome {
    let (label, body): (&'static str, fn(u64) -> CheckResult) = match index {
        1 => ("v1 stationary set against the closed-form slope", c1),
        2 => ("v1 value, sampler credence, and vertex advantage", c2),
        3 => ("v2 stationary vertex and weighted first-order beliefs", c3),
        4 => ("box problem credence and committed values", c4),
        5 => ("offer optimum split and box mass", c5),
        6 => ("gradient identity residual on four problems", c6),
        7 => ("simulation expansion soundness", c7),
        8 => ("sampler budget convergence on v2", c8),
        9 => ("Monte Carlo validation on every fixture", c9),
        10 => ("property suite: equivalence, audits, refusals", c10),
        other => panic!("criterion index {other} out of range"),
    };
    let rng_seed = seed
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(index as u64);
    let start = Instant::now();
    let result = body(rng_seed);
    let millis = start.elapsed().as_millis();
    match result {
        Ok((pass, details)) => CriterionOutcome {
            index,
            label,
            pass,
            details,
            millis,
        },
        Err(e) => CriterionOutcome {
            index,
            label,
            pass: false,
            details: format!("error: {e}"),
            millis,
        },
    }
}

/// Runs all ten checks.
pub fn run_all(seed: u64) -> Vec<CriterionOutcome> {
    (1..=CRITERION_COUNT).map(|i| criterion(i, seed)).collect()
}

/// Closed-form slope of the version 1 value curve in first-action mass,
/// kept separate from the solver's chain algebra so the two can disagree.
fn v1_slope(p: f64) -> f64 {
    ((((32.0 * p - 80.0) * p + 48.0) * p - 4.0) * p + 4.0) * p - 2.0
}

/// Interior roots of the closed-form slope, by sign scan plus bisection.
fn v1_slope_roots() -> Vec<f64> {
    let n = 4096;
    let mut roots = Vec::new();
    let mut prev_p = 0.0;
    let mut prev_v = v1_slope(0.0);
    for i in 1..=n {
        let p = i as f64 / n as f64;
        let v = v1_slope(p);
        if prev_v == 0.0 {
            roots.push(prev_p);
        } else if prev_v * v < 0.0 {
            let (mut lo, mut hi) = (prev_p, p);
            let flo = prev_v;
            for _ in 0..64 {
                let mid = 0.5 * (lo + hi);
                let fmid = v1_slope(mid);
                if flo * fmid <= 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            roots.push(0.5 * (lo + hi));
        }
        prev_p = p;
        prev_v = v;
    }
    roots
}

fn credence_on_dependant(problem: &DecisionProblem, credences: &[f64], dependant: usize) -> f64 {
    problem
        .non_terminals()
        .iter()
        .enumerate()
        .filter(|(_, &idx)| problem.state(idx).dependant == Some(dependant))
        .map(|(pos, _)| credences[pos])
        .sum()
}

fn fail(failures: &mut Vec<String>, message: String) {
    failures.push(message);
}

fn verdict(failures: Vec<String>, ok_details: String) -> (bool, String) {
    if failures.is_empty() {
        (true, ok_details)
    } else {
        (false, failures.join("; "))
    }
}

fn c1(_seed: u64) -> CheckResult {
    let started = Instant::now();
    let fixture = fixtures::load("sbpd_v1")?;
    let set = find_stationary(&fixture.problem, &SolveConfig::default())?;
    let mut failures = Vec::new();
    if set.policies.len() != 3 {
        fail(
            &mut failures,
            format!("expected exactly 3 stationary policies, found {}", set.policies.len()),
        );
    }
    let mut interior: Vec<f64> = set
        .policies
        .iter()
        .map(|c| c.policy.prob(0))
        .filter(|&p| p > 1e-6 && p < 1.0 - 1e-6)
        .collect();
    interior.sort_by(f64::total_cmp);
    let has_pure_d = set.policies.iter().any(|c| c.policy.prob(0) <= 1e-9);
    if !has_pure_d {
        fail(&mut failures, "pure second-action vertex missing".to_string());
    }
    let oracle = v1_slope_roots();
    if oracle.len() != 2 {
        fail(&mut failures, format!("oracle found {} roots", oracle.len()));
    }
    if interior.len() == 2 && oracle.len() == 2 {
        for (solver, (oracle_root, target)) in
            interior.iter().zip(oracle.iter().zip([0.36, 0.88]))
        {
            if (solver - target).abs() > 0.01 {
                fail(
                    &mut failures,
                    format!("root {solver:.6} not within 0.01 of {target}"),
                );
            }
            if (solver - oracle_root).abs() > 5e-10 {
                fail(
                    &mut failures,
                    format!(
                        "root {solver:.12} disagrees with bisection {oracle_root:.12}"
                    ),
                );
            }
        }
    } else {
        fail(
            &mut failures,
            format!("expected 2 interior roots, found {}", interior.len()),
        );
    }
    let millis = started.elapsed().as_millis();
    if millis >= 5_000 {
        fail(&mut failures, format!("took {millis} ms, budget 5000"));
    }
    let details = format!(
        "pure D plus interior roots {:?} matching bisection within 5e-10, {millis} ms",
        interior.iter().map(|p| (p * 1e6).round() / 1e6).collect::<Vec<_>>()
    );
    Ok(verdict(failures, details))
}

fn c2(_seed: u64) -> CheckResult {
    let fixture = fixtures::load("sbpd_v1")?;
    let problem = &fixture.problem;
    let samplers = fixture.samplers.as_ref().expect("v1 carries samplers");
    let mut failures = Vec::new();
    let eu = ex_ante_eu(problem, &Policy::pure(0, 2))?;
    if (eu - 25.0 / 12.0).abs() > 1e-10 {
        fail(&mut failures, format!("pure-C value {eu}, want 25/12"));
    }
    let mut credence = f64::NAN;
    for anchor in [Policy::pure(0, 2), Policy::pure(1, 2)] {
        let beliefs = gsgt_beliefs(problem, samplers, &anchor)?;
        let pred = credence_on_dependant(problem, &beliefs.credences, 2);
        if anchor.prob(0) == 1.0 {
            credence = pred;
            if (pred - 6.0 / 7.0).abs() > 1e-10 {
                fail(&mut failures, format!("sampler credence {pred}, want 6/7"));
            }
        }
        let values = cdt_action_values(problem, &beliefs)?;
        let advantage = values[0] - values[1];
        if (advantage + 2.0 / 7.0).abs() > 1e-9 {
            fail(
                &mut failures,
                format!(
                    "advantage {advantage} at anchor {:?}, want -2/7",
                    anchor.probs()
                ),
            );
        }
    }
    let details =
        format!("pure-C value {eu:.12}, sampler credence {credence:.12}, advantage -2/7 at both vertices");
    Ok(verdict(failures, details))
}

fn c3(seed: u64) -> CheckResult {
    let fixture = fixtures::load("sbpd_v2")?;
    let problem = &fixture.problem;
    let mut failures = Vec::new();
    let set = find_stationary(problem, &SolveConfig::default())?;
    if set.policies.len() != 1 || set.policies[0].policy.prob(0) < 1.0 - 1e-9 {
        fail(
            &mut failures,
            format!(
                "stationary set {:?}, want the pure first-action vertex alone",
                set.policies.iter().map(|c| c.policy.prob(0)).collect::<Vec<_>>()
            ),
        );
    }
    let rho = [0.8, 2.0];
    let uniform = Policy::uniform(2);
    let components = ggt_components(problem, &uniform, Some(&rho))?;
    let profile = ggt_credences(problem, &components)?;
    let agent = credence_on_dependant(problem, &profile.credences, 1);
    let pred = credence_on_dependant(problem, &profile.credences, 2);
    if (agent - 1.0 / 6.0).abs() > 1e-10 || (pred - 5.0 / 6.0).abs() > 1e-10 {
        fail(
            &mut failures,
            format!("credences ({agent}, {pred}), want (1/6, 5/6)"),
        );
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut anchors = vec![uniform, Policy::pure(0, 2), Policy::pure(1, 2)];
    for _ in 0..2 {
        anchors.push(Policy::sample_uniform(2, &mut rng));
    }
    let mut worst: f64 = 0.0;
    for anchor in &anchors {
        let components = ggt_components_lenient(problem, anchor, Some(&rho))?;
        let values = ggt_action_values(problem, &components)?;
        let advantage = values[0] - values[1];
        worst = worst.max((advantage - 1.0 / 6.0).abs());
    }
    if worst > 1e-9 {
        fail(
            &mut failures,
            format!("advantage drifts {worst:.3e} from 1/6 across anchors"),
        );
    }
    let eu = ex_ante_eu(problem, &Policy::pure(0, 2))?;
    if (eu - 2.9).abs() > 1e-10 {
        fail(&mut failures, format!("pure-C value {eu}, want 2.9"));
    }
    let details = format!(
        "unique vertex, credences (1/6, 5/6), advantage within {worst:.2e} of 1/6 at {} anchors, value 2.9",
        anchors.len()
    );
    Ok(verdict(failures, details))
}

fn c4(_seed: u64) -> CheckResult {
    let fixture = fixtures::load("newcomb75")?;
    let problem = &fixture.problem;
    let mut failures = Vec::new();
    let mut credence = f64::NAN;
    for anchor in [Policy::uniform(2), Policy::pure(0, 2)] {
        let beliefs = gt_beliefs(problem, &anchor)?;
        credence = beliefs.credence(0);
        if (credence - 1.0 / 3.0).abs() > 1e-10 {
            fail(
                &mut failures,
                format!("simulation credence {credence}, want 1/3"),
            );
        }
    }
    for (action, target) in [(0usize, 750_000.0), (1usize, 251_000.0)] {
        let eu = ex_ante_eu(problem, &Policy::pure(action, 2))?;
        if ((eu - target) / target).abs() > 1e-6 {
            fail(&mut failures, format!("value {eu}, want {target}"));
        }
    }
    let details = format!("simulation credence {credence:.12}, committed values 750000 and 251000");
    Ok(verdict(failures, details))
}

fn c5(_seed: u64) -> CheckResult {
    let fixture = fixtures::load("adversarial_offer")?;
    let optima = optimize_ex_ante(&fixture.problem, &SolveConfig::default())?;
    let mut failures = Vec::new();
    let best = &optima[0].policy;
    let box_mass = best.prob(0) + best.prob(1);
    let theta = best.prob(0) / box_mass;
    let theta_star = 0.5 + 0.5 / 3f64.sqrt();
    let theta_gap = (theta - theta_star).abs().min((1.0 - theta - theta_star).abs());
    if theta_gap > 1e-4 {
        fail(
            &mut failures,
            format!("split {theta:.8} misses {theta_star:.8} and its mirror by {theta_gap:.2e}"),
        );
    }
    if (box_mass - 0.046).abs() > 0.005 {
        fail(
            &mut failures,
            format!("box mass {box_mass:.6}, want within 0.005 of 0.046"),
        );
    }
    let product = theta * (1.0 - theta) * (theta.powi(3) + (1.0 - theta).powi(3));
    if (product - 1.0 / 12.0).abs() > 1e-8 {
        fail(
            &mut failures,
            format!("split product {product:.12}, want 1/12"),
        );
    }
    let details = format!(
        "optimum splits boxes {theta:.6} to {:.6} over mass {box_mass:.6}, product {product:.10}",
        1.0 - theta
    );
    Ok(verdict(failures, details))
}

fn c6(seed: u64) -> CheckResult {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut failures = Vec::new();
    let mut worst: f64 = 0.0;
    for name in ["sbpd_v1", "sbpd_v2", "newcomb75", "adversarial_offer"] {
        let fixture = fixtures::load(name)?;
        let a = fixture.problem.action_labels().len();
        for _ in 0..20 {
            let anchor = Policy::sample_uniform(a, &mut rng);
            let residual = grad_identity_residual(&fixture.problem, &anchor, None)?;
            worst = worst.max(residual);
            if residual >= 1e-6 {
                fail(
                    &mut failures,
                    format!("{name}: residual {residual:.3e} at {:?}", anchor.probs()),
                );
            }
        }
    }
    let millis = started.elapsed().as_millis();
    if millis >= 10_000 {
        fail(&mut failures, format!("took {millis} ms, budget 10000"));
    }
    let details = format!("worst residual {worst:.3e} over 4 problems x 20 anchors, {millis} ms");
    Ok(verdict(failures, details))
}

fn c7(seed: u64) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut failures = Vec::new();
    let mut worst: f64 = 0.0;
    for name in ["sbpd_v1", "adversarial_offer"] {
        let fixture = fixtures::load(name)?;
        let samplers = fixture.samplers.as_ref().expect("fixture carries samplers");
        let expanded = expand_problem(&fixture.problem, samplers, None)?;
        let a = fixture.problem.action_labels().len();
        for _ in 0..20 {
            let at = Policy::sample_uniform(a, &mut rng);
            let check = verify_expansion(&fixture.problem, &expanded, &at)?;
            let gap = check
                .eu_gap
                .max(check.credence_gap)
                .max(check.value_gap)
                .max(check.exit_gap);
            worst = worst.max(gap);
            if !check.passes() {
                fail(
                    &mut failures,
                    format!(
                        "{name}: gaps eu {:.2e} credence {:.2e} value {:.2e} exit {:.2e}",
                        check.eu_gap, check.credence_gap, check.value_gap, check.exit_gap
                    ),
                );
            }
        }
    }
    let details = format!("all four checks pass on 2 problems x 20 policies, worst gap {worst:.3e}");
    Ok(verdict(failures, details))
}

fn c8(_seed: u64) -> CheckResult {
    let fixture = fixtures::load("sbpd_v2")?;
    let budgets = [4usize, 8, 16, 32, 64];
    let steps = convergence_steps(&fixture.problem, &budgets)?;
    let mut failures = Vec::new();
    let errors: Vec<f64> = steps.iter().map(|s| s.sup_error).collect();
    if !errors.windows(2).all(|w| w[1] < w[0]) {
        fail(&mut failures, format!("sup errors not strictly decreasing: {errors:?}"));
    }
    let last = steps.last().expect("nonempty budget list");
    let pure_c = Policy::pure(0, 2);
    let distance = last
        .optima
        .iter()
        .map(|o| o.policy.linf_distance(&pure_c))
        .fold(0.0f64, f64::max);
    if distance > 0.02 {
        fail(
            &mut failures,
            format!("optimum sits {distance:.4} from the pure vertex at budget 64"),
        );
    }
    let beliefs = gsgt_beliefs(&last.modified, &last.samplers, &pure_c)?;
    let values = cdt_action_values(&last.modified, &beliefs)?;
    let advantage = values[0] - values[1];
    let target = 0.8 / (2.0 * 64.0 + 1.0);
    if ((advantage - target) / target).abs() > 0.3 {
        fail(
            &mut failures,
            format!("advantage {advantage:.6e}, want within 30% of {target:.6e}"),
        );
    }
    let details = format!(
        "sup errors {:?} strictly decreasing, optimum gap {distance:.2e}, advantage {advantage:.4e} vs {target:.4e}",
        errors.iter().map(|e| (e * 1e6).round() / 1e6).collect::<Vec<_>>()
    );
    Ok(verdict(failures, details))
}

fn convergence_steps(
    problem: &DecisionProblem,
    budgets: &[usize],
) -> Result<Vec<crate::cdt::ConvergenceStep>, Box<dyn Error>> {
    Ok(crate::cdt::convergence_sequence(
        problem,
        budgets,
        &SolveConfig::default(),
    )?)
}

fn c9(seed: u64) -> CheckResult {
    let started = Instant::now();
    const ROLLOUTS: usize = 100_000;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut failures = Vec::new();
    let mut worst_z: f64 = 0.0;
    for name in fixtures::names() {
        let fixture = fixtures::load(name)?;
        let a = fixture.problem.action_labels().len();
        for trial in 0..3u64 {
            let at = Policy::sample_uniform(a, &mut rng);
            let report = validate(&fixture.problem, &at, ROLLOUTS, seed ^ trial, None)?;
            let z = report
                .visits
                .iter()
                .map(|c| c.z.abs())
                .fold(report.eu.z.abs(), f64::max);
            worst_z = worst_z.max(z);
            if !report.pass {
                fail(&mut failures, format!("{name}: worst |z| {z:.2}"));
            }
        }
    }
    let probe = fixtures::load("sbpd_v1")?;
    let at = Policy::uniform(2);
    let first = validate(&probe.problem, &at, ROLLOUTS, seed, None)?;
    let second = validate(&probe.problem, &at, ROLLOUTS, seed, None)?;
    let deterministic = first.eu.z.to_bits() == second.eu.z.to_bits()
        && first
            .visits
            .iter()
            .zip(&second.visits)
            .all(|(a, b)| a.z.to_bits() == b.z.to_bits());
    if !deterministic {
        fail(&mut failures, "repeat run under one seed drifted".to_string());
    }
    let millis = started.elapsed().as_millis();
    if millis >= 60_000 {
        fail(&mut failures, format!("took {millis} ms, budget 60000"));
    }
    let details = format!(
        "9 fixtures x 3 policies x {ROLLOUTS} rollouts, worst |z| {worst_z:.2}, seed-stable, {millis} ms"
    );
    Ok(verdict(failures, details))
}

/// Fixture names whose dependences all expose derivatives.
fn differentiable_fixtures() -> Vec<&'static str> {
    fixtures::names()
        .into_iter()
        .filter(|name| {
            let fixture = fixtures::load(name).expect("registry name");
            fixture.problem.dependence().iter().all(|f| f.differentiable())
        })
        .collect()
}

fn c10(seed: u64) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut failures = Vec::new();
    let differentiable = differentiable_fixtures();

    // Ratifiability agrees with gradient stationarity, policy by policy.
    let mut checked = 0usize;
    for name in &differentiable {
        let fixture = fixtures::load(name)?;
        let problem = &fixture.problem;
        let a = problem.action_labels().len();
        for _ in 0..50 {
            let at = Policy::sample_uniform(a, &mut rng);
            let components = ggt_components(problem, &at, None)?;
            let beliefs = crate::beliefs::beliefs_from_components(problem, &components)?;
            let report = ratify(problem, &beliefs, &at, None)?;
            let z = ggt_credences(problem, &components)?.weight_total;
            let grad = ex_ante_grad(problem, &at)?;
            let grad_max = grad.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let by_gradient = report
                .supported
                .iter()
                .all(|&action| grad_max - grad[action] <= z * report.threshold);
            if report.ratifiable != by_gradient {
                fail(
                    &mut failures,
                    format!(
                        "{name}: ratifiable {} but gradient test {} at {:?}",
                        report.ratifiable,
                        by_gradient,
                        at.probs()
                    ),
                );
            }
            checked += 1;
        }
    }

    // First-order beliefs come out faithful and not fanciful.
    for name in &differentiable {
        let fixture = fixtures::load(name)?;
        let problem = &fixture.problem;
        let a = problem.action_labels().len();
        let mut anchors = vec![Policy::uniform(a)];
        for _ in 0..3 {
            anchors.push(Policy::sample_uniform(a, &mut rng));
        }
        for anchor in &anchors {
            let beliefs = crate::beliefs::ggt_beliefs(problem, anchor, None)?;
            let audit = audit_beliefs(problem, &beliefs)?;
            if !audit.faithful || audit.fanciful {
                fail(
                    &mut failures,
                    format!(
                        "{name}: faithful {} fanciful {} at {:?} ({:?})",
                        audit.faithful,
                        audit.fanciful,
                        anchor.probs(),
                        audit.notes
                    ),
                );
            }
        }
    }

    // The step-function problem defeats every faithful candidate.
    let wine = fixtures::load("wine")?;
    let report = impossibility_check(&wine.problem, &Policy::pure(0, 2))?;
    if !report.holds || report.refusal.is_none() {
        fail(
            &mut failures,
            format!(
                "step-function probe: refusal {:?}, {} of {} candidates ratifiable",
                report.refusal, report.ratifiable_candidates, report.candidates_checked
            ),
        );
    }

    // The ratio response needs weight 2 at the uniform anchor.
    let nrho = fixtures::load("nrho")?;
    let components = ggt_components(&nrho.problem, &Policy::uniform(2), None)?;
    let gamma = components.dependants[0].gamma;
    if (gamma - 2.0).abs() > 1e-9 {
        fail(&mut failures, format!("ratio growth {gamma}, want 2"));
    }

    // Padding a sampler with an ignored slot moves credences but not verdicts.
    let v1 = fixtures::load("sbpd_v1")?;
    let base_samplers = v1.samplers.as_ref().expect("v1 carries samplers");
    let padded = vec![base_samplers[0].clone(), pad_with_ignored_slot(&base_samplers[1])?];
    let roots = v1_slope_roots();
    let mut anchors = vec![Policy::pure(0, 2), Policy::pure(1, 2), Policy::uniform(2)];
    for root in roots {
        anchors.push(Policy::new(vec![root, 1.0 - root])?);
    }
    let mut credence_moved = false;
    for anchor in &anchors {
        let base = gsgt_beliefs(&v1.problem, base_samplers, anchor)?;
        let more = gsgt_beliefs(&v1.problem, &padded, anchor)?;
        if (credence_on_dependant(&v1.problem, &base.credences, 2)
            - credence_on_dependant(&v1.problem, &more.credences, 2))
        .abs()
            > 1e-6
        {
            credence_moved = true;
        }
        let base_verdict = ratify(&v1.problem, &base, anchor, None)?.ratifiable;
        let more_verdict = ratify(&v1.problem, &more, anchor, None)?.ratifiable;
        if base_verdict != more_verdict {
            fail(
                &mut failures,
                format!(
                    "verdict flipped under a padded sampler at {:?}: {} vs {}",
                    anchor.probs(),
                    base_verdict,
                    more_verdict
                ),
            );
        }
    }
    if !credence_moved {
        fail(
            &mut failures,
            "padding the sampler left every credence unchanged".to_string(),
        );
    }

    let details = format!(
        "equivalence on {checked} policies across {} problems, audits clean, refusal-backed impossibility, growth 2, padded-sampler verdicts stable",
        differentiable.len()
    );
    Ok(verdict(failures, details))
}

/// A copy of `sim` on one extra sample whose response ignores the new slot.
fn pad_with_ignored_slot(
    sim: &SimulationFunction,
) -> Result<SimulationFunction, Box<dyn Error>> {
    let num_actions = sim.num_actions();
    let n = sim.sample_count();
    let mut table = BTreeMap::new();
    let mut tuple = vec![0u8; n + 1];
    loop {
        let response = sim.response(&tuple[..n])?.clone();
        table.insert(tuple.clone(), response);
        let mut slot = 0;
        loop {
            if slot == tuple.len() {
                return Ok(SimulationFunction::from_tuples(
                    num_actions,
                    n + 1,
                    table,
                )?);
            }
            tuple[slot] += 1;
            if (tuple[slot] as usize) < num_actions {
                break;
            }
            tuple[slot] = 0;
            slot += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oracle_roots_bracket_the_known_pair() {
        let roots = v1_slope_roots();
        assert_eq!(roots.len(), 2);
        assert!((roots[0] - 0.36).abs() < 0.01, "{roots:?}");
        assert!((roots[1] - 0.88).abs() < 0.01, "{roots:?}");
        for root in roots {
            assert!(v1_slope(root).abs() < 1e-9);
        }
    }

    #[test]
    fn padded_sampler_ignores_its_new_slot() {
        let fixture = fixtures::load("sbpd_v1").unwrap();
        let base = &fixture.samplers.as_ref().unwrap()[1];
        let padded = pad_with_ignored_slot(base).unwrap();
        assert_eq!(padded.sample_count(), 4);
        assert!(!padded.is_symmetric());
        assert_eq!(
            padded.response(&[0, 1, 0, 1]).unwrap(),
            base.response(&[0, 1, 0]).unwrap()
        );
    }

    #[test]
    fn determinism_under_fixed_seed() {
        let a = criterion(5, 7);
        let b = criterion(5, 7);
        assert_eq!(a.pass, b.pass);
        assert_eq!(a.details, b.details);
    }
}
