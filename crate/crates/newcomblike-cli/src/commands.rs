//! Command implementations: load a problem, run the requested analysis,
//! render the report in the requested format, and map failures onto the
//! exit-code contract (1 analysis refusal, 2 input error).

use std::env;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use newcomblike::beliefs::{
    ggt_beliefs, ggt_components_lenient, ggt_credences, gsgt_beliefs, gt_beliefs,
    lsgt_from_simple_cases, BeliefError, BeliefSystem,
};
use newcomblike::cdt::{
    cdt_action_values, convergence_sequence, find_stationary, optimize_ex_ante, ratify,
    ratify_components, CdtError, PolicyClass, RatifiabilityReport, SolveConfig,
};
use newcomblike::chain::{ex_ante_grad, solve_at, ChainError};
use newcomblike::depfun::{exact_sampler, DepfunError, SimulationFunction};
use newcomblike::expand::{expand_problem, verify_expansion, ExpandError};
use newcomblike::fileio::{self, FileError};
use newcomblike::fixtures::{self, FixtureError};
use newcomblike::montecarlo::{validate as mc_validate, McError};
use newcomblike::policy::{Policy, PolicyError};
use newcomblike::problem::{DecisionProblem, TerminationVerdict};
use newcomblike::verify;

use crate::{
    AnalyzeArgs, ApproxArgs, BeliefsArgs, Command, CompileSimArgs, Format, Kind, RatifyArgs,
    SimulateArgs, SolveArgs, ValidateArgs, VerifyPaperArgs,
};

#[derive(Debug)]
pub enum CliError {
    /// Malformed input: unknown problem, bad flag value, unreadable file.
    Input(String),
    /// The requested analysis is undefined for this input.
    Refusal(String),
    /// The analysis ran and reported a failing result.
    Failure(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Refusal(_) | CliError::Failure(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(m) | CliError::Refusal(m) | CliError::Failure(m) => f.write_str(m),
        }
    }
}

macro_rules! classified {
    ($ty:ty) => {
        impl From<$ty> for CliError {
            fn from(e: $ty) -> Self {
                if e.is_refusal() {
                    CliError::Refusal(e.to_string())
                } else {
                    CliError::Input(e.to_string())
                }
            }
        }
    };
}

classified!(ChainError);
classified!(BeliefError);
classified!(CdtError);
classified!(DepfunError);
classified!(ExpandError);
classified!(McError);

impl From<FileError> for CliError {
    fn from(e: FileError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<FixtureError> for CliError {
    fn from(e: FixtureError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<PolicyError> for CliError {
    fn from(e: PolicyError) -> Self {
        CliError::Input(e.to_string())
    }
}

type Result<T> = std::result::Result<T, CliError>;

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Validate(args) => cmd_validate(args),
        Command::Analyze(args) => cmd_analyze(args),
        Command::Beliefs(args) => cmd_beliefs(args),
        Command::Ratify(args) => cmd_ratify(args),
        Command::Solve(args) => cmd_solve(args),
        Command::CompileSim(args) => cmd_compile_sim(args),
        Command::Approx(args) => cmd_approx(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::VerifyPaper(args) => cmd_verify_paper(args),
    }
}

struct Loaded {
    problem: DecisionProblem,
    /// Verified samplers shipped with a built-in fixture, when present.
    samplers: Option<Vec<SimulationFunction>>,
    origin: String,
}

/// Resolution order: an existing file path as given, then
/// `$ANTHROPIC_CDT_FIXTURES/<name>.json`, then the built-in registry.
fn load_problem(arg: &str) -> Result<Loaded> {
    let path = Path::new(arg);
    if path.is_file() {
        return Ok(Loaded {
            problem: fileio::load_path(path)?,
            samplers: None,
            origin: arg.to_string(),
        });
    }
    if let Ok(dir) = env::var("ANTHROPIC_CDT_FIXTURES") {
        let candidate = Path::new(&dir).join(format!("{arg}.json"));
        if candidate.is_file() {
            return Ok(Loaded {
                problem: fileio::load_path(&candidate)?,
                samplers: None,
                origin: candidate.display().to_string(),
            });
        }
    }
    match fixtures::load(arg) {
        Ok(fixture) => Ok(Loaded {
            problem: fixture.problem,
            samplers: fixture.samplers,
            origin: format!("fixture:{arg}"),
        }),
        Err(FixtureError::UnknownName { .. }) => Err(CliError::Input(format!(
            "unknown problem '{arg}': not a file, not under ANTHROPIC_CDT_FIXTURES, \
             and not a built-in fixture (try one of: {})",
            fixtures::names().join(", ")
        ))),
    }
}

/// Comma-separated probabilities, renormalized to sum 1.
fn parse_policy(text: &str, num_actions: usize) -> Result<Policy> {
    let values = parse_floats(text, "policy")?;
    if values.len() != num_actions {
        return Err(CliError::Input(format!(
            "policy has {} entries, the problem has {num_actions} actions",
            values.len()
        )));
    }
    if values.iter().any(|v| *v < 0.0) {
        return Err(CliError::Input(format!("policy entries must be nonnegative: {text}")));
    }
    let sum: f64 = values.iter().sum();
    if !(sum > 0.0) {
        return Err(CliError::Input(format!("policy mass must be positive: {text}")));
    }
    Ok(Policy::new(values.iter().map(|v| v / sum).collect())?)
}

fn parse_rho(text: &str, num_dependants: usize) -> Result<Vec<f64>> {
    let values = parse_floats(text, "rho")?;
    if values.len() != num_dependants {
        return Err(CliError::Input(format!(
            "rho has {} entries, the problem has {num_dependants} dependants",
            values.len()
        )));
    }
    if values.iter().any(|v| *v <= 0.0) {
        return Err(CliError::Input(format!("rho entries must be positive: {text}")));
    }
    Ok(values)
}

fn parse_floats(text: &str, what: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(str::trim)
        .map(|part| {
            f64::from_str(part)
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| CliError::Input(format!("bad {what} entry '{part}'")))
        })
        .collect()
}

fn parse_n_list(text: &str) -> Result<Vec<usize>> {
    let budgets: Vec<usize> = text
        .split(',')
        .map(str::trim)
        .map(|part| {
            usize::from_str(part)
                .ok()
                .filter(|n| *n >= 1)
                .ok_or_else(|| CliError::Input(format!("bad budget entry '{part}'")))
        })
        .collect::<Result<_>>()?;
    if budgets.is_empty() {
        return Err(CliError::Input("budget list is empty".to_string()));
    }
    Ok(budgets)
}

fn check_grid(grid: usize) -> Result<()> {
    if grid < 10 {
        return Err(CliError::Input(format!("grid must be at least 10, got {grid}")));
    }
    Ok(())
}

fn check_tol(tol: Option<f64>) -> Result<()> {
    if let Some(t) = tol {
        if !(t > 0.0 && t.is_finite()) {
            return Err(CliError::Input(format!("tol must be positive, got {t}")));
        }
    }
    Ok(())
}

fn solve_config(grid: usize, restarts: usize, tol: Option<f64>, seed: u64) -> Result<SolveConfig> {
    check_grid(grid)?;
    check_tol(tol)?;
    if restarts == 0 {
        return Err(CliError::Input("restarts must be at least 1".to_string()));
    }
    let mut config = SolveConfig::default();
    config.grid = grid;
    config.restarts = restarts;
    config.seed = seed;
    if let Some(t) = tol {
        config.ratify_tol = t;
    }
    Ok(config)
}

/// Samplers for sampler-based analyses: a fixture's verified tables when
/// available, otherwise synthesized from the dependence functions.
fn obtain_samplers(loaded: &Loaded) -> Result<Vec<SimulationFunction>> {
    if let Some(samplers) = &loaded.samplers {
        return Ok(samplers.clone());
    }
    loaded
        .problem
        .dependence()
        .iter()
        .map(|f| exact_sampler(f, None).map_err(CliError::from))
        .collect()
}

fn reject_stray_rho(kind: Kind, rho: Option<&[f64]>) -> Result<()> {
    if rho.is_some() && kind != Kind::Ggt {
        return Err(CliError::Input("--rho only applies to --kind ggt".to_string()));
    }
    Ok(())
}

/// Full belief system for the requested construction. The first-order kind
/// with explicit weights is handled separately by callers, because
/// inadmissible weights have no belief-system form.
fn build_beliefs(kind: Kind, loaded: &Loaded, anchor: &Policy) -> Result<BeliefSystem> {
    match kind {
        Kind::Gt => Ok(gt_beliefs(&loaded.problem, anchor)?),
        Kind::Gsgt => {
            let samplers = obtain_samplers(loaded)?;
            Ok(gsgt_beliefs(&loaded.problem, &samplers, anchor)?)
        }
        Kind::Lsgt => Ok(lsgt_from_simple_cases(&loaded.problem, anchor)?.0),
        Kind::Ggt => Ok(ggt_beliefs(&loaded.problem, anchor, None)?),
    }
}

/// Causal action values for the requested construction; explicit
/// first-order weights go through the algebraic route so they stay defined
/// when inadmissible at the anchor.
fn action_values_for(
    kind: Kind,
    loaded: &Loaded,
    anchor: &Policy,
    rho: Option<&[f64]>,
) -> Result<Vec<f64>> {
    reject_stray_rho(kind, rho)?;
    if let (Kind::Ggt, Some(weights)) = (kind, rho) {
        let components = ggt_components_lenient(&loaded.problem, anchor, Some(weights))?;
        return Ok(newcomblike::cdt::ggt_action_values(&loaded.problem, &components)?);
    }
    let beliefs = build_beliefs(kind, loaded, anchor)?;
    Ok(cdt_action_values(&loaded.problem, &beliefs)?)
}

fn kind_name(kind: Kind) -> &'static str {
    match kind {
        Kind::Gt => "gt",
        Kind::Gsgt => "gsgt",
        Kind::Lsgt => "lsgt",
        Kind::Ggt => "ggt",
    }
}

fn emit(payload: String, out: &Option<PathBuf>) -> Result<()> {
    match out {
        Some(path) => fs::write(path, payload)
            .map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{payload}");
            Ok(())
        }
    }
}

/// Canonical structured rendering: serialize through a generic JSON value
/// so key order is sorted and a parse-and-re-emit round trip is
/// byte-identical.
fn structured<T: Serialize>(report: &T) -> String {
    let value = serde_json::to_value(report).expect("reports hold only plain data");
    let mut text = serde_json::to_string_pretty(&value).expect("value prints");
    text.push('\n');
    text
}

fn no_csv(command: &str) -> CliError {
    CliError::Input(format!("{command} has no csv format; use text or structured"))
}

fn nt_ids(problem: &DecisionProblem) -> Vec<String> {
    problem
        .non_terminals()
        .iter()
        .map(|&idx| problem.state(idx).id.clone())
        .collect()
}

/// Credence mass per dependant, in dependant order.
fn dependant_totals(problem: &DecisionProblem, credences: &[f64]) -> Vec<f64> {
    let mut totals = vec![0.0; problem.num_dependants()];
    for (pos, &idx) in problem.non_terminals().iter().enumerate() {
        let dependant = problem.state(idx).dependant.expect("acting state") - 1;
        totals[dependant] += credences[pos];
    }
    totals
}

#[derive(Serialize)]
struct ValidateReport {
    origin: String,
    actions: Vec<String>,
    num_states: usize,
    num_dependants: usize,
    diagnostics: Vec<DiagnosticReport>,
    termination: String,
}

#[derive(Serialize)]
struct DiagnosticReport {
    code: String,
    subject: String,
    message: String,
}

fn cmd_validate(args: ValidateArgs) -> Result<()> {
    let loaded = load_problem(&args.problem)?;
    let problem = &loaded.problem;
    let diagnostics: Vec<DiagnosticReport> = problem
        .validate()
        .into_iter()
        .map(|d| DiagnosticReport {
            code: d.code.to_string(),
            subject: d.subject,
            message: d.message,
        })
        .collect();
    let termination = match problem.check_termination_default() {
        Ok(TerminationVerdict::Terminates) => "terminates".to_string(),
        Ok(TerminationVerdict::Trapped(witness)) => format!(
            "trapped in {{{}}} under assignment {:?}",
            witness.closed_class.join(", "),
            witness.assignment
        ),
        Err(e) => format!("undecided: {e}"),
    };
    let report = ValidateReport {
        origin: loaded.origin.clone(),
        actions: problem.action_labels().to_vec(),
        num_states: problem.num_states(),
        num_dependants: problem.num_dependants(),
        diagnostics,
        termination,
    };
    let payload = match args.output.format {
        Format::Structured => structured(&report),
        Format::Csv => return Err(no_csv("validate")),
        Format::Text => {
            let mut lines = vec![format!(
                "{}: {} states, {} actions [{}], {} dependants, {}",
                report.origin,
                report.num_states,
                report.actions.len(),
                report.actions.join(", "),
                report.num_dependants,
                report.termination
            )];
            if report.diagnostics.is_empty() {
                lines.push("no structural violations".to_string());
            } else {
                for d in &report.diagnostics {
                    lines.push(format!("violation {} at {}: {}", d.code, d.subject, d.message));
                }
            }
            lines.join("\n") + "\n"
        }
    };
    emit(payload, &args.output.out)?;
    if report.diagnostics.is_empty() {
        Ok(())
    } else {
        Err(CliError::Input(format!(
            "{} structural violation(s)",
            report.diagnostics.len()
        )))
    }
}

#[derive(Serialize)]
struct AnalyzeReport {
    origin: String,
    policy: Policy,
    ex_ante_eu: f64,
    visit_counts: Vec<StateValue>,
    state_values: Vec<StateValue>,
    gradient: Vec<ActionValue>,
    gradient_identity_residual: f64,
}

#[derive(Serialize)]
struct StateValue {
    state: String,
    value: f64,
}

#[derive(Serialize)]
struct ActionValue {
    action: String,
    value: f64,
}

fn cmd_analyze(args: AnalyzeArgs) -> Result<()> {
    let loaded = load_problem(&args.problem)?;
    let problem = &loaded.problem;
    let at = match &args.policy {
        Some(text) => parse_policy(text, problem.num_actions())?,
        None => Policy::uniform(problem.num_actions()),
    };
    if args.output.format == Format::Csv {
        return analyze_sweep(&args, &loaded);
    }
    let solution = solve_at(problem, &at)?;
    let grad = ex_ante_grad(problem, &at)?;
    let residual: f64 = at.probs().iter().zip(&grad).map(|(p, g)| p * g).sum();
    let ids = nt_ids(problem);
    let report = AnalyzeReport {
        origin: loaded.origin.clone(),
        policy: at.clone(),
        ex_ante_eu: solution.ex_ante_eu,
        visit_counts: ids
            .iter()
            .zip(&solution.visit_counts)
            .map(|(state, &value)| StateValue { state: state.clone(), value })
            .collect(),
        state_values: (0..problem.num_states())
            .map(|idx| StateValue {
                state: problem.state(idx).id.clone(),
                value: solution.state_values[idx],
            })
            .collect(),
        gradient: problem
            .action_labels()
            .iter()
            .zip(&grad)
            .map(|(action, &value)| ActionValue { action: action.clone(), value })
            .collect(),
        gradient_identity_residual: residual.abs(),
    };
    let payload = match args.output.format {
        Format::Structured => structured(&report),
        Format::Text => {
            let mut lines = vec![
                format!("{} at policy {:?}", report.origin, at.probs()),
                format!("ex ante expected utility: {:.12}", report.ex_ante_eu),
            ];
            for sv in &report.visit_counts {
                lines.push(format!("expected visits {}: {:.12}", sv.state, sv.value));
            }
            for av in &report.gradient {
                lines.push(format!("gradient toward {}: {:.12}", av.action, av.value));
            }
            lines.push(format!(
                "gradient identity residual: {:.3e}",
                report.gradient_identity_residual
            ));
            lines.join("\n") + "\n"
        }
        Format::Csv => unreachable!("handled above"),
    };
    emit(payload, &args.output.out)
}

/// Two-action sweep in first-action mass: `p,exante_eu,grad_C,cdt_adv_C`.
fn analyze_sweep(args: &AnalyzeArgs, loaded: &Loaded) -> Result<()> {
    let problem = &loaded.problem;
    if problem.num_actions() != 2 {
        return Err(CliError::Input(format!(
            "csv sweeps need a two-action problem, this one has {} actions",
            problem.num_actions()
        )));
    }
    check_grid(args.grid)?;
    let rho = match &args.rho {
        Some(text) => Some(parse_rho(text, problem.num_dependants())?),
        None => None,
    };
    let mut csv = String::from("p,exante_eu,grad_C,cdt_adv_C\n");
    for i in 0..=args.grid {
        let p = i as f64 / args.grid as f64;
        let at = Policy::new(vec![p, 1.0 - p]).expect("grid point is a policy");
        let solution = solve_at(problem, &at)?;
        let grad = ex_ante_grad(problem, &at)?;
        let values = action_values_for(args.kind, loaded, &at, rho.as_deref())?;
        let adv = values[0] - values[1];
        csv.push_str(&format!("{p},{},{},{adv}\n", solution.ex_ante_eu, grad[0]));
    }
    emit(csv, &args.output.out)
}

#[derive(Serialize)]
struct BeliefsReport {
    origin: String,
    kind: &'static str,
    anchor: Policy,
    credences: Vec<StateValue>,
    dependant_totals: Vec<f64>,
    weight_total: Option<f64>,
    degenerate_uniform: bool,
}

fn cmd_beliefs(args: BeliefsArgs) -> Result<()> {
    let loaded = load_problem(&args.problem)?;
    let problem = &loaded.problem;
    let at = parse_policy(&args.policy, problem.num_actions())?;
    let rho = match &args.rho {
        Some(text) => Some(parse_rho(text, problem.num_dependants())?),
        None => None,
    };
    reject_stray_rho(args.kind, rho.as_deref())?;
    let (credences, weight_total, degenerate_uniform) =
        if let (Kind::Ggt, Some(weights)) = (args.kind, rho.as_deref()) {
            let components = ggt_components_lenient(problem, &at, Some(weights))?;
            let profile = ggt_credences(problem, &components)?;
            (profile.credences, Some(profile.weight_total), profile.degenerate_uniform)
        } else {
            let beliefs = build_beliefs(args.kind, &loaded, &at)?;
            (beliefs.credences.clone(), beliefs.weight_total, beliefs.degenerate_uniform)
        };
    let report = BeliefsReport {
        origin: loaded.origin.clone(),
        kind: kind_name(args.kind),
        anchor: at.clone(),
        credences: nt_ids(problem)
            .into_iter()
            .zip(&credences)
            .map(|(state, &value)| StateValue { state, value })
            .collect(),
        dependant_totals: dependant_totals(problem, &credences),
        weight_total,
        degenerate_uniform,
    };
    let payload = match args.output.format {
        Format::Structured => structured(&report),
        Format::Csv => return Err(no_csv("beliefs")),
        Format::Text => {
            let mut lines = vec![format!(
                "{} {} beliefs at {:?}",
                report.origin,
                report.kind,
                at.probs()
            )];
            for sv in &report.credences {
                lines.push(format!("credence {}: {:.12}", sv.state, sv.value));
            }
            for (j, total) in report.dependant_totals.iter().enumerate() {
                lines.push(format!("dependant {} total credence: {:.12}", j + 1, total));
            }
            if let Some(z) = report.weight_total {
                lines.push(format!("weight total: {z:.12}"));
            }
            if report.degenerate_uniform {
                lines.push("credences fell back to uniform over visited states".to_string());
            }
            lines.join("\n") + "\n"
        }
    };
    emit(payload, &args.output.out)
}

#[derive(Serialize)]
struct RatifyReport {
    origin: String,
    kind: &'static str,
    policy: Policy,
    action_values: Vec<ActionValue>,
    advantages: Vec<ActionValue>,
    supported: Vec<String>,
    ratifiable: bool,
    tol: f64,
    threshold: f64,
}

fn cmd_ratify(args: RatifyArgs) -> Result<()> {
    let loaded = load_problem(&args.problem)?;
    let problem = &loaded.problem;
    check_tol(args.tol)?;
    let at = parse_policy(&args.policy, problem.num_actions())?;
    let rho = match &args.rho {
        Some(text) => Some(parse_rho(text, problem.num_dependants())?),
        None => None,
    };
    reject_stray_rho(args.kind, rho.as_deref())?;
    let verdict: RatifiabilityReport =
        if let (Kind::Ggt, Some(weights)) = (args.kind, rho.as_deref()) {
            let components = ggt_components_lenient(problem, &at, Some(weights))?;
            ratify_components(problem, &components, &at, args.tol)?
        } else {
            let beliefs = build_beliefs(args.kind, &loaded, &at)?;
            ratify(problem, &beliefs, &at, args.tol)?
        };
    let labels = problem.action_labels();
    let report = RatifyReport {
        origin: loaded.origin.clone(),
        kind: kind_name(args.kind),
        policy: at.clone(),
        action_values: labels
            .iter()
            .zip(&verdict.action_values)
            .map(|(action, &value)| ActionValue { action: action.clone(), value })
            .collect(),
        advantages: labels
            .iter()
            .zip(&verdict.advantages)
            .map(|(action, &value)| ActionValue { action: action.clone(), value })
            .collect(),
        supported: verdict.supported.iter().map(|&a| labels[a].clone()).collect(),
        ratifiable: verdict.ratifiable,
        tol: verdict.tol,
        threshold: verdict.threshold,
    };
    let payload = match args.output.format {
        Format::Structured => structured(&report),
        Format::Csv => return Err(no_csv("ratify")),
        Format::Text => {
            let mut lines = vec![format!(
                "{} {} ratifiability at {:?}",
                report.origin,
                report.kind,
                at.probs()
            )];
            for (av, adv) in report.action_values.iter().zip(&report.advantages) {
                lines.push(format!(
                    "action {}: value {:.12}, advantage {:.12}",
                    av.action, av.value, adv.value
                ));
            }
            lines.push(format!("supported: {}", report.supported.join(", ")));
            lines.push(format!(
                "ratifiable: {} (threshold {:.3e})",
                report.ratifiable, report.threshold
            ));
            lines.join("\n") + "\n"
        }
    };
    emit(payload, &args.output.out)
}

#[derive(Serialize)]
struct SolveReport {
    origin: String,
    stationary: Vec<SolvedPolicy>,
    everywhere_stationary: bool,
    optima: Vec<SolvedPolicy>,
}

#[derive(Serialize)]
struct SolvedPolicy {
    policy: Policy,
    value: f64,
    class: Option<PolicyClass>,
}

fn cmd_solve(args: SolveArgs) -> Result<()> {
    let loaded = load_problem(&args.problem)?;
    let problem = &loaded.problem;
    let config = solve_config(args.grid, args.restarts, args.tol, args.seed)?;
    let set = find_stationary(problem, &config)?;
    let optima = optimize_ex_ante(problem, &config)?;
    let report = SolveReport {
        origin: loaded.origin.clone(),
        stationary: set
            .policies
            .iter()
            .map(|c| SolvedPolicy {
                policy: c.policy.clone(),
                value: c.ex_ante_eu,
                class: Some(c.class),
            })
            .collect(),
        everywhere_stationary: set.everywhere_stationary,
        optima: optima
            .iter()
            .map(|o| SolvedPolicy {
                policy: o.policy.clone(),
                value: o.value,
                class: None,
            })
            .collect(),
    };
    let payload = match args.output.format {
        Format::Structured => structured(&report),
        Format::Csv => return Err(no_csv("solve")),
        Format::Text => {
            let mut lines = vec![format!(
                "{}: {} stationary polic{}",
                report.origin,
                report.stationary.len(),
                if report.stationary.len() == 1 { "y" } else { "ies" }
            )];
            if report.everywhere_stationary {
                lines.push("every policy is stationary; listing representatives".to_string());
            }
            for s in &report.stationary {
                let class = match s.class {
                    Some(PolicyClass::ExAnteMax) => "ex-ante-max",
                    Some(PolicyClass::StationaryOther) => "stationary",
                    None => "",
                };
                lines.push(format!(
                    "stationary {:?} value {:.12} [{class}]",
                    s.policy.probs(),
                    s.value
                ));
            }
            for o in &report.optima {
                lines.push(format!(
                    "ex ante optimum {:?} value {:.12}",
                    o.policy.probs(),
                    o.value
                ));
            }
            lines.join("\n") + "\n"
        }
    };
    emit(payload, &args.output.out)
}

#[derive(Serialize)]
struct CompileSimReport {
    origin: String,
    samplers: Vec<SamplerSummary>,
    expanded_states: usize,
    checked_at: Policy,
    eu_gap: f64,
    credence_gap: f64,
    value_gap: f64,
    exit_gap: f64,
    passes: bool,
}

#[derive(Serialize)]
struct SamplerSummary {
    dependant: usize,
    samples: usize,
    symmetric: bool,
}

fn cmd_compile_sim(args: CompileSimArgs) -> Result<()> {
    let loaded = load_problem(&args.problem)?;
    let problem = &loaded.problem;
    let at = match &args.policy {
        Some(text) => parse_policy(text, problem.num_actions())?,
        None => Policy::uniform(problem.num_actions()),
    };
    let samplers: Vec<SimulationFunction> = problem
        .dependence()
        .iter()
        .map(|f| exact_sampler(f, None).map_err(CliError::from))
        .collect::<Result<_>>()?;
    let expanded = expand_problem(problem, &samplers, None)?;
    let check = verify_expansion(problem, &expanded, &at)?;
    let report = CompileSimReport {
        origin: loaded.origin.clone(),
        samplers: samplers
            .iter()
            .enumerate()
            .map(|(i, s)| SamplerSummary {
                dependant: i + 1,
                samples: s.sample_count(),
                symmetric: s.is_symmetric(),
            })
            .collect(),
        expanded_states: expanded.problem.num_states(),
        checked_at: at.clone(),
        eu_gap: check.eu_gap,
        credence_gap: check.credence_gap,
        value_gap: check.value_gap,
        exit_gap: check.exit_gap,
        passes: check.passes(),
    };
    let payload = match args.output.format {
        Format::Structured => structured(&report),
        Format::Csv => return Err(no_csv("compile-sim")),
        Format::Text => {
            let mut lines = vec![format!("{}:", report.origin)];
            for s in &report.samplers {
                lines.push(format!(
                    "dependant {}: {} sample(s), {}",
                    s.dependant,
                    s.samples,
                    if s.symmetric { "order-insensitive table" } else { "positional table" }
                ));
            }
            lines.push(format!(
                "expansion: {} states; checks at {:?}: eu {:.3e}, credence {:.3e}, value {:.3e}, exit {:.3e} -> {}",
                report.expanded_states,
                at.probs(),
                report.eu_gap,
                report.credence_gap,
                report.value_gap,
                report.exit_gap,
                if report.passes { "pass" } else { "fail" }
            ));
            lines.join("\n") + "\n"
        }
    };
    emit(payload, &args.output.out)?;
    if report.passes {
        Ok(())
    } else {
        Err(CliError::Failure("expansion checks failed".to_string()))
    }
}

#[derive(Serialize)]
struct ApproxReport {
    origin: String,
    steps: Vec<ApproxStep>,
}

#[derive(Serialize)]
struct ApproxStep {
    n: usize,
    sup_error: f64,
    stationary_count: usize,
    optima: Vec<Policy>,
    distance_to_reference: f64,
}

fn cmd_approx(args: ApproxArgs) -> Result<()> {
    let loaded = load_problem(&args.problem)?;
    let budgets = parse_n_list(&args.n_list)?;
    let config = solve_config(args.grid, args.restarts, None, args.seed)?;
    let steps = convergence_sequence(&loaded.problem, &budgets, &config)?;
    let report = ApproxReport {
        origin: loaded.origin.clone(),
        steps: steps
            .iter()
            .map(|s| ApproxStep {
                n: s.n,
                sup_error: s.sup_error,
                stationary_count: s.stationary.policies.len(),
                optima: s.optima.iter().map(|o| o.policy.clone()).collect(),
                distance_to_reference: s.distance_to_reference,
            })
            .collect(),
    };
    let payload = match args.output.format {
        Format::Structured => structured(&report),
        Format::Csv => {
            let mut csv = String::from("n,sup_error,distance_to_reference\n");
            for s in &report.steps {
                csv.push_str(&format!("{},{},{}\n", s.n, s.sup_error, s.distance_to_reference));
            }
            csv
        }
        Format::Text => {
            let mut lines = vec![format!("{}:", report.origin)];
            for s in &report.steps {
                lines.push(format!(
                    "budget {}: sup error {:.6e}, {} stationary, optimum distance {:.6e}",
                    s.n, s.sup_error, s.stationary_count, s.distance_to_reference
                ));
            }
            lines.join("\n") + "\n"
        }
    };
    emit(payload, &args.output.out)
}

fn cmd_simulate(args: SimulateArgs) -> Result<()> {
    let loaded = load_problem(&args.problem)?;
    let problem = &loaded.problem;
    if args.rollouts == 0 {
        return Err(CliError::Input("rollouts must be at least 1".to_string()));
    }
    let at = parse_policy(&args.policy, problem.num_actions())?;
    let report = mc_validate(problem, &at, args.rollouts, args.seed, None)?;
    let payload = match args.output.format {
        Format::Structured => structured(&report),
        Format::Csv => return Err(no_csv("simulate")),
        Format::Text => {
            let mut lines = vec![format!(
                "{}: {} rollouts, seed {}",
                loaded.origin, report.rollouts, report.seed
            )];
            let fmt_check = |c: &newcomblike::montecarlo::StatCheck| {
                format!(
                    "{}: expected {:.6}, observed {:.6}, z {:+.3} -> {}",
                    c.label,
                    c.expected,
                    c.observed,
                    c.z,
                    if c.pass { "pass" } else { "fail" }
                )
            };
            lines.push(fmt_check(&report.eu));
            for check in &report.visits {
                lines.push(fmt_check(check));
            }
            lines.push(format!(
                "verdict: {} (|z| bound {})",
                if report.pass { "pass" } else { "fail" },
                report.z_bound
            ));
            lines.join("\n") + "\n"
        }
    };
    emit(payload, &args.output.out)?;
    if report.pass {
        Ok(())
    } else {
        Err(CliError::Failure(
            "Monte Carlo disagrees with the exact solver".to_string(),
        ))
    }
}

fn cmd_verify_paper(args: VerifyPaperArgs) -> Result<()> {
    let outcomes = verify::run_all(args.seed);
    let failed = outcomes.iter().filter(|o| !o.pass).count();
    let payload = match args.output.format {
        Format::Structured => structured(&outcomes),
        Format::Csv => return Err(no_csv("verify-paper")),
        Format::Text => {
            let mut lines: Vec<String> = outcomes
                .iter()
                .map(|o| {
                    format!(
                        "[{}] criterion {:02} ({}): {} [{} ms]",
                        if o.pass { "PASS" } else { "FAIL" },
                        o.index,
                        o.label,
                        o.details,
                        o.millis
                    )
                })
                .collect();
            lines.push(format!(
                "{} of {} criteria pass",
                outcomes.len() - failed,
                outcomes.len()
            ));
            lines.join("\n") + "\n"
        }
    };
    emit(payload, &args.output.out)?;
    if failed == 0 {
        Ok(())
    } else {
        Err(CliError::Failure(format!("{failed} criteria failed")))
    }
}
