//! Causal expected utility, ratifiability, and stationary-policy solving.
//!
//! Given a belief system anchored at a policy, the causal expected utility
//! of an action intervenes on the current (unknown) state: each possible
//! state keeps its credence, its dependant reacts through the belief
//! system's transform, and play continues at the anchor policy. A policy
//! is ratifiable when no action it supports falls short of the best
//! available action.
//!
//! For belief systems built from first-order components, ratifiability of
//! the anchor is equivalent to the ex ante gradient being nonpositive in
//! every vertex direction, which reduces stationary-policy search to root
//! finding on the gradient. The solvers here exploit that: scan-and-bisect
//! on edges of the simplex, damped Newton on interior faces, and explicit
//! vertex conditions.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::beliefs::{
    audit_beliefs, ggt_components, ggt_credences, BeliefError, BeliefKind, BeliefSystem,
    GgtComponents,
};
use crate::chain::{ex_ante_eu, ex_ante_grad, solve_at, ChainError};
use crate::depfun::{bernstein_approx, exact_sampler, DependenceFunction, DepfunError};
use crate::depfun::SimulationFunction;
use crate::linalg::factor_default;
use crate::policy::{simplex_grid, Policy, PolicyError};
use crate::problem::DecisionProblem;
use crate::tolerances::{
    BISECT_TOL, DEDUP_RADIUS, DEFAULT_EDGE_GRID, DEFAULT_RESTARTS, RATIFY_TOL, STATIONARY_BAND,
    VISIT_POSITIVE,
};

pub type Result<T> = std::result::Result<T, CdtError>;

#[derive(Debug, Error)]
pub enum CdtError {
    #[error("problem is not solvable: {0}")]
    Malformed(String),
    #[error("policy is {distance:.3e} away from the beliefs' anchor")]
    AnchorMismatch { distance: f64 },
    #[error("action {action} out of range for {num_actions} actions")]
    ActionRange { action: usize, num_actions: usize },
    #[error("belief system does not match the problem: {0}")]
    ShapeMismatch(String),
    #[error("bad solver configuration: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error(transparent)]
    Belief(#[from] BeliefError),
    #[error(transparent)]
    Depfun(#[from] DepfunError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
}

impl CdtError {
    /// True when the error says the analysis is undefined for this input
    /// (as opposed to a malformed request).
    pub fn is_refusal(&self) -> bool {
        match self {
            CdtError::Chain(e) => e.is_refusal(),
            CdtError::Belief(e) => e.is_refusal(),
            CdtError::Depfun(e) => e.is_refusal(),
            _ => false,
        }
    }
}

/// Knobs for the stationary-set and optimization solvers.
#[derive(Debug, Clone, Serialize)]
pub struct SolveConfig {
    /// Subdivisions when scanning an edge of the simplex for gradient
    /// sign changes.
    pub grid: usize,
    /// Multi-start count for interior searches.
    pub restarts: usize,
    /// Interval width at which bisection stops.
    pub bisect_tol: f64,
    /// Ratifiability tolerance on unit-scaled utilities.
    pub ratify_tol: f64,
    /// Seed for the multi-start sampler.
    pub seed: u64,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            grid: DEFAULT_EDGE_GRID,
            restarts: DEFAULT_RESTARTS,
            bisect_tol: BISECT_TOL,
            ratify_tol: RATIFY_TOL,
            seed: 0,
        }
    }
}

impl SolveConfig {
    fn check(&self) -> Result<()> {
        if self.grid < 2 {
            return Err(CdtError::BadConfig(format!("grid {} is too small", self.grid)));
        }
        if self.bisect_tol <= 0.0 || self.ratify_tol <= 0.0 {
            return Err(CdtError::BadConfig("tolerances must be positive".into()));
        }
        Ok(())
    }
}

/// Ratifiability of one policy under one belief system.
#[derive(Debug, Clone, Serialize)]
pub struct RatifiabilityReport {
    pub kind: BeliefKind,
    pub policy: Policy,
    /// Causal expected utility of each pure intervention.
    pub action_values: Vec<f64>,
    /// `action_values - max(action_values)`, entrywise; never positive.
    pub advantages: Vec<f64>,
    /// Actions the policy plays with positive probability.
    pub supported: Vec<usize>,
    pub ratifiable: bool,
    /// The tolerance on unit-scaled utilities this verdict used.
    pub tol: f64,
    /// The same tolerance in raw utility units.
    pub threshold: f64,
}

fn check_beliefs_shape(problem: &DecisionProblem, beliefs: &BeliefSystem) -> Result<()> {
    if beliefs.credences.len() != problem.non_terminals().len() {
        return Err(CdtError::ShapeMismatch(format!(
            "{} credences for {} non-terminal states",
            beliefs.credences.len(),
            problem.non_terminals().len()
        )));
    }
    if beliefs.transforms.len() != problem.num_dependants() {
        return Err(CdtError::ShapeMismatch(format!(
            "{} transform rows for {} dependants",
            beliefs.transforms.len(),
            problem.num_dependants()
        )));
    }
    if beliefs.anchor.num_actions() != problem.num_actions() {
        return Err(CdtError::ShapeMismatch("anchor arity mismatch".into()));
    }
    Ok(())
}

/// Causal expected utility of every pure intervention under `beliefs`.
pub fn cdt_action_values(problem: &DecisionProblem, beliefs: &BeliefSystem) -> Result<Vec<f64>> {
    problem.ensure_solvable().map_err(CdtError::Malformed)?;
    check_beliefs_shape(problem, beliefs)?;
    let solution = solve_at(problem, &beliefs.anchor)?;
    let m = problem.non_terminals().len();
    let mut values = vec![0.0; problem.num_actions()];
    for (action, value) in values.iter_mut().enumerate() {
        for pos in 0..m {
            let credence = beliefs.credences[pos];
            if credence == 0.0 {
                continue;
            }
            let transform = &beliefs.transforms[problem.dependant_at(pos)][action];
            let row = problem.mixed_row(pos, transform.probs());
            let continuation: f64 = row
                .iter()
                .zip(solution.state_values.iter())
                .map(|(&p, &v)| p * v)
                .sum();
            *value += credence * continuation;
        }
    }
    Ok(values)
}

/// Causal expected utility of one pure intervention.
pub fn cdt_eu(problem: &DecisionProblem, beliefs: &BeliefSystem, action: usize) -> Result<f64> {
    if action >= problem.num_actions() {
        return Err(CdtError::ActionRange {
            action,
            num_actions: problem.num_actions(),
        });
    }
    Ok(cdt_action_values(problem, beliefs)?[action])
}

/// Causal expected utility of a mixed intervention: the mixture of the
/// pure intervention values.
pub fn cdt_eu_mixed(
    problem: &DecisionProblem,
    beliefs: &BeliefSystem,
    intervention: &Policy,
) -> Result<f64> {
    if intervention.num_actions() != problem.num_actions() {
        return Err(CdtError::ShapeMismatch("intervention arity mismatch".into()));
    }
    let values = cdt_action_values(problem, beliefs)?;
    Ok(values
        .iter()
        .zip(intervention.probs().iter())
        .map(|(v, p)| v * p)
        .sum())
}

/// Pure-intervention values straight from first-order components, without
/// requiring the transform rows to be distributions. This is the route for
/// inadmissible (flagged) weights, whose rows extrapolate linearly off the
/// simplex.
pub fn ggt_action_values(
    problem: &DecisionProblem,
    components: &GgtComponents,
) -> Result<Vec<f64>> {
    problem.ensure_solvable().map_err(CdtError::Malformed)?;
    if components.dependants.len() != problem.num_dependants() {
        return Err(CdtError::ShapeMismatch(format!(
            "{} component rows for {} dependants",
            components.dependants.len(),
            problem.num_dependants()
        )));
    }
    let profile = ggt_credences(problem, components)?;
    let solution = solve_at(problem, &components.anchor)?;
    let m = problem.non_terminals().len();
    let mut values = vec![0.0; problem.num_actions()];
    for (action, value) in values.iter_mut().enumerate() {
        for pos in 0..m {
            let credence = profile.credences[pos];
            if credence == 0.0 {
                continue;
            }
            let row = &components.dependants[problem.dependant_at(pos)].tau_rows[action];
            let mixed = problem.mixed_row(pos, row);
            let continuation: f64 = mixed
                .iter()
                .zip(solution.state_values.iter())
                .map(|(&p, &v)| p * v)
                .sum();
            *value += credence * continuation;
        }
    }
    Ok(values)
}

/// Tests whether `at` is ratifiable under `beliefs`: every supported
/// action's causal expected utility reaches the best action's value up to
/// the tolerance. The beliefs must be anchored at `at`.
pub fn ratify(
    problem: &DecisionProblem,
    beliefs: &BeliefSystem,
    at: &Policy,
    tol: Option<f64>,
) -> Result<RatifiabilityReport> {
    let distance = at.linf_distance(&beliefs.anchor);
    if distance > 1e-9 {
        return Err(CdtError::AnchorMismatch { distance });
    }
    let tol = tol.unwrap_or(RATIFY_TOL);
    if tol <= 0.0 {
        return Err(CdtError::BadConfig("ratify tolerance must be positive".into()));
    }
    let action_values = cdt_action_values(problem, beliefs)?;
    Ok(report_from_values(problem, beliefs.kind, at, action_values, tol))
}

/// Ratifiability against first-order components directly. Unlike [`ratify`]
/// on a constructed belief system, this stays defined when a chosen weight
/// is inadmissible at the anchor: the off-simplex transform rows are folded
/// in algebraically rather than materialized as mixtures.
pub fn ratify_components(
    problem: &DecisionProblem,
    components: &GgtComponents,
    at: &Policy,
    tol: Option<f64>,
) -> Result<RatifiabilityReport> {
    let distance = at.linf_distance(&components.anchor);
    if distance > 1e-9 {
        return Err(CdtError::AnchorMismatch { distance });
    }
    let tol = tol.unwrap_or(RATIFY_TOL);
    if tol <= 0.0 {
        return Err(CdtError::BadConfig("ratify tolerance must be positive".into()));
    }
    let action_values = ggt_action_values(problem, components)?;
    Ok(report_from_values(problem, BeliefKind::Ggt, at, action_values, tol))
}

fn report_from_values(
    problem: &DecisionProblem,
    kind: BeliefKind,
    at: &Policy,
    action_values: Vec<f64>,
    tol: f64,
) -> RatifiabilityReport {
    let best = action_values.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let advantages: Vec<f64> = action_values.iter().map(|v| v - best).collect();
    let threshold = tol * problem.utility_range().max(1.0);
    let supported = at.support();
    let ratifiable = supported.iter().all(|&a| advantages[a] >= -threshold);
    RatifiabilityReport {
        kind,
        policy: at.clone(),
        action_values,
        advantages,
        supported,
        ratifiable,
        tol,
        threshold,
    }
}

/// Largest gap between the ex ante gradient and its first-order-component
/// reconstruction `Z * (EU(do a) - EU(do anchor))`, over actions. The two
/// agree up to numerics whenever the components are admissible.
pub fn grad_identity_residual(
    problem: &DecisionProblem,
    anchor: &Policy,
    rho_override: Option<&[f64]>,
) -> Result<f64> {
    let components = ggt_components(problem, anchor, rho_override)?;
    let values = ggt_action_values(problem, &components)?;
    let profile = ggt_credences(problem, &components)?;
    let z = profile.weight_total;
    let mixed: f64 = values
        .iter()
        .zip(anchor.probs().iter())
        .map(|(v, p)| v * p)
        .sum();
    let grad = ex_ante_grad(problem, anchor)?;
    let mut residual: f64 = 0.0;
    for (a, g) in grad.iter().enumerate() {
        residual = residual.max((g - z * (values[a] - mixed)).abs());
    }
    Ok(residual)
}

/// How a stationary policy relates to the ex ante optimum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyClass {
    ExAnteMax,
    StationaryOther,
}

#[derive(Debug, Clone, Serialize)]
pub struct ClassifiedPolicy {
    pub policy: Policy,
    pub ex_ante_eu: f64,
    pub class: PolicyClass,
}

/// The stationary policies of a problem, deduplicated and classified.
#[derive(Debug, Clone, Serialize)]
pub struct PolicySet {
    pub policies: Vec<ClassifiedPolicy>,
    /// Set when the expected utility is constant, making every policy
    /// stationary; the list then only holds representatives.
    pub everywhere_stationary: bool,
}

/// An ex ante maximizer and its value.
#[derive(Debug, Clone, Serialize)]
pub struct Optimum {
    pub policy: Policy,
    pub value: f64,
}

fn stationary_band(problem: &DecisionProblem) -> f64 {
    STATIONARY_BAND * problem.utility_range().max(1.0)
}

/// A policy with `p` on action `i` and the rest on action `j`.
fn edge_policy(num_actions: usize, i: usize, j: usize, p: f64) -> Result<Policy> {
    let mut probs = vec![0.0; num_actions];
    probs[i] = p;
    probs[j] += 1.0 - p;
    Ok(Policy::renormalized(probs)?)
}

fn golden_max(
    mut f: impl FnMut(f64) -> Result<f64>,
    mut lo: f64,
    mut hi: f64,
    tol: f64,
) -> Result<(f64, f64)> {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut c = hi - INV_PHI * (hi - lo);
    let mut d = lo + INV_PHI * (hi - lo);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    while hi - lo > tol {
        if fc > fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - INV_PHI * (hi - lo);
            fc = f(c)?;
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + INV_PHI * (hi - lo);
            fd = f(d)?;
        }
    }
    let mid = 0.5 * (lo + hi);
    Ok((mid, f(mid)?))
}

fn bisect_root(
    mut f: impl FnMut(f64) -> Result<f64>,
    mut lo: f64,
    mut hi: f64,
    f_lo: f64,
    tol: f64,
) -> Result<f64> {
    let negative_low = f_lo < 0.0;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid)?;
        if fm == 0.0 {
            return Ok(mid);
        }
        if (fm < 0.0) == negative_low {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Roots of `grad_i - grad_j` along the open `(i, j)` edge, by scanning
/// and bisecting. Sign-touching local minima are refined by golden
/// search so double roots are not silently skipped.
fn edge_roots(
    problem: &DecisionProblem,
    i: usize,
    j: usize,
    config: &SolveConfig,
    band: f64,
) -> Result<Vec<f64>> {
    let a = problem.num_actions();
    let mut h = |p: f64| -> Result<f64> {
        let grad = ex_ante_grad(problem, &edge_policy(a, i, j, p)?)?;
        Ok(grad[i] - grad[j])
    };
    let n = config.grid;
    let mut values = Vec::with_capacity(n + 1);
    for step in 0..=n {
        values.push(h(step as f64 / n as f64)?);
    }
    let mut roots = Vec::new();
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for step in 0..n {
        let (lo, hi) = (step as f64 / n as f64, (step + 1) as f64 / n as f64);
        let (f_lo, f_hi) = (values[step], values[step + 1]);
        if f_lo == 0.0 {
            if step > 0 {
                roots.push(lo);
            }
            continue;
        }
        if f_lo * f_hi < 0.0 {
            let root = bisect_root(&mut h, lo, hi, f_lo, config.bisect_tol)?;
            if root > 0.0 && root < 1.0 {
                roots.push(root);
            }
        }
    }
    // Interior dips that do not cross zero: refine when the dip is deep
    // relative to the scan's scale.
    let dip_threshold = band.max(scale * 1e-3);
    for step in 1..n {
        let here = values[step].abs();
        if here <= dip_threshold
            && here < values[step - 1].abs()
            && here <= values[step + 1].abs()
            && values[step - 1] * values[step + 1] > 0.0
        {
            let lo = (step - 1) as f64 / n as f64;
            let hi = (step + 1) as f64 / n as f64;
            let (p, neg_abs) = golden_max(|p| Ok(-h(p)?.abs()), lo, hi, config.bisect_tol)?;
            if -neg_abs <= band && p > 0.0 && p < 1.0 {
                roots.push(p);
            }
        }
    }
    Ok(roots)
}

fn dedup_policies(candidates: Vec<Policy>) -> Vec<Policy> {
    let mut kept: Vec<Policy> = Vec::new();
    for candidate in candidates {
        if kept
            .iter()
            .all(|k| k.linf_distance(&candidate) > DEDUP_RADIUS)
        {
            kept.push(candidate);
        }
    }
    kept
}

fn sort_policies(policies: &mut [Policy]) {
    policies.sort_by(|a, b| {
        a.probs()
            .iter()
            .zip(b.probs().iter())
            .map(|(x, y)| x.partial_cmp(y).expect("finite probabilities"))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
}

/// All stationary policies: policies whose ex ante gradient is nonpositive
/// toward every action vertex. Needs every dependence function to be
/// differentiable.
pub fn find_stationary(problem: &DecisionProblem, config: &SolveConfig) -> Result<PolicySet> {
    config.check()?;
    problem.ensure_solvable().map_err(CdtError::Malformed)?;
    let a = problem.num_actions();
    let band = stationary_band(problem);
    let optima = optimize_ex_ante(problem, config)?;
    let mut everywhere = false;
    let mut candidates: Vec<Policy> = Vec::new();
    if problem.utility_range() == 0.0 {
        everywhere = true;
        for v in 0..a {
            candidates.push(Policy::pure(v, a));
        }
    } else if a == 2 {
        // One edge; h(p) = grad_0 - grad_1 at (p, 1 - p). Interior
        // stationarity is h = 0; the vertices are one-directional.
        for p in edge_roots(problem, 0, 1, config, band)? {
            candidates.push(Policy::renormalized(vec![p, 1.0 - p])?);
        }
        let h_at = |p: f64| -> Result<f64> {
            let grad = ex_ante_grad(problem, &edge_policy(2, 0, 1, p)?)?;
            Ok(grad[0] - grad[1])
        };
        if h_at(0.0)? <= band {
            candidates.push(Policy::pure(1, 2));
        }
        if h_at(1.0)? >= -band {
            candidates.push(Policy::pure(0, 2));
        }
    } else {
        candidates.extend(multi_action_stationary(problem, config, band)?);
    }
    // Ex ante maximizers are always stationary; folding them in keeps the
    // output complete even when a scan missed them.
    candidates.extend(optima.iter().map(|o| o.policy.clone()));
    let mut unique = dedup_policies(candidates);
    sort_policies(&mut unique);
    let best = optima
        .iter()
        .map(|o| o.value)
        .fold(f64::NEG_INFINITY, f64::max);
    let classify_tol = config.ratify_tol * problem.utility_range().max(1.0);
    let mut policies = Vec::with_capacity(unique.len());
    for policy in unique {
        let eu = ex_ante_eu(problem, &policy)?;
        let class = if eu >= best - classify_tol {
            PolicyClass::ExAnteMax
        } else {
            PolicyClass::StationaryOther
        };
        policies.push(ClassifiedPolicy {
            policy,
            ex_ante_eu: eu,
            class,
        });
    }
    Ok(PolicySet {
        policies,
        everywhere_stationary: everywhere,
    })
}

fn multi_action_stationary(
    problem: &DecisionProblem,
    config: &SolveConfig,
    band: f64,
) -> Result<Vec<Policy>> {
    let a = problem.num_actions();
    let mut found = Vec::new();
    for v in 0..a {
        let at = Policy::pure(v, a);
        let grad = ex_ante_grad(problem, &at)?;
        if (0..a).all(|k| k == v || grad[k] <= band) {
            found.push(at);
        }
    }
    for i in 0..a {
        for j in (i + 1)..a {
            for p in edge_roots(problem, i, j, config, band)? {
                let at = edge_policy(a, i, j, p)?;
                let grad = ex_ante_grad(problem, &at)?;
                if (0..a)
                    .all(|k| k == i || k == j || grad[k] <= band)
                {
                    found.push(at);
                }
            }
        }
    }
    if a <= 16 {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        for mask in 0u32..(1u32 << a) {
            let k = mask.count_ones() as usize;
            if k < 3 {
                continue;
            }
            let support: Vec<usize> = (0..a).filter(|&x| mask >> x & 1 == 1).collect();
            let centroid = vec![1.0 / k as f64; k];
            let mut starts = vec![centroid];
            for _ in 0..config.restarts {
                starts.push(Policy::sample_uniform(k, &mut rng).into_probs());
            }
            for start in starts {
                if let Some(at) = newton_face(problem, &support, &start, band)? {
                    let grad = ex_ante_grad(problem, &at)?;
                    if (0..a).all(|x| support.contains(&x) || grad[x] <= band) {
                        found.push(at);
                    }
                }
            }
        }
    }
    Ok(found)
}

/// Damped Newton iteration for a point on the open face spanned by
/// `support` where the supported gradient components are all equal.
/// Returns `None` when the iteration leaves the face or stalls.
fn newton_face(
    problem: &DecisionProblem,
    support: &[usize],
    start: &[f64],
    band: f64,
) -> Result<Option<Policy>> {
    let a = problem.num_actions();
    let k = support.len();
    let floor = 1e-7;
    let to_policy = |coords: &[f64]| -> Result<Policy> {
        let mut probs = vec![0.0; a];
        for (idx, &act) in support.iter().enumerate() {
            probs[act] = coords[idx];
        }
        Ok(Policy::renormalized(probs)?)
    };
    let residual = |coords: &[f64]| -> Result<Vec<f64>> {
        let grad = ex_ante_grad(problem, &to_policy(coords)?)?;
        Ok((0..k - 1)
            .map(|m| grad[support[m]] - grad[support[k - 1]])
            .collect())
    };
    let mut coords = start.to_vec();
    for _ in 0..80 {
        if coords.iter().any(|&c| c < floor) {
            return Ok(None);
        }
        let r = residual(&coords)?;
        let r_max = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if r_max <= band {
            return Ok(Some(to_policy(&coords)?));
        }
        let dim = k - 1;
        let mut jacobian = vec![0.0; dim * dim];
        for col in 0..dim {
            let h = 1e-7f64.min(coords[col] * 0.5).min(coords[k - 1] * 0.5);
            if h < 1e-12 {
                return Ok(None);
            }
            let mut plus = coords.clone();
            plus[col] += h;
            plus[k - 1] -= h;
            let mut minus = coords.clone();
            minus[col] -= h;
            minus[k - 1] += h;
            let rp = residual(&plus)?;
            let rm = residual(&minus)?;
            for row in 0..dim {
                jacobian[row * dim + col] = (rp[row] - rm[row]) / (2.0 * h);
            }
        }
        let Ok(factors) = factor_default(jacobian, dim) else {
            return Ok(None);
        };
        let negated: Vec<f64> = r.iter().map(|v| -v).collect();
        let Ok(step) = factors.solve(&negated) else {
            return Ok(None);
        };
        let mut t = 1.0;
        loop {
            let mut next = coords.clone();
            for m in 0..dim {
                next[m] += t * step[m];
            }
            next[k - 1] = 1.0 - next[..dim].iter().sum::<f64>();
            if next.iter().all(|&c| c > floor && c < 1.0) {
                coords = next;
                break;
            }
            t *= 0.5;
            if t < 1e-6 {
                return Ok(None);
            }
        }
    }
    let r = residual(&coords)?;
    if r.iter().all(|v| v.abs() <= band) {
        Ok(Some(to_policy(&coords)?))
    } else {
        Ok(None)
    }
}

/// Global maximizers of the ex ante expected utility, derivative-free:
/// grid scan plus golden-section refinement on two actions, coarse grid
/// plus coordinate line search (and a Newton polish when derivatives
/// exist) otherwise. Vertices are always candidates. Returns every
/// maximizer found, best-equivalent within numeric tolerance, sorted.
pub fn optimize_ex_ante(problem: &DecisionProblem, config: &SolveConfig) -> Result<Vec<Optimum>> {
    config.check()?;
    problem.ensure_solvable().map_err(CdtError::Malformed)?;
    let a = problem.num_actions();
    let value_tol = 1e-9 * problem.utility_range().max(1.0);
    let mut candidates: Vec<(Policy, f64)> = Vec::new();
    for v in 0..a {
        let at = Policy::pure(v, a);
        let value = ex_ante_eu(problem, &at)?;
        candidates.push((at, value));
    }
    if a == 2 {
        let eu_at = |p: f64| -> Result<f64> {
            Ok(ex_ante_eu(problem, &Policy::renormalized(vec![p, 1.0 - p])?)?)
        };
        let n = config.grid;
        let mut values = Vec::with_capacity(n + 1);
        for step in 0..=n {
            values.push(eu_at(step as f64 / n as f64)?);
        }
        for step in 1..n {
            if values[step] >= values[step - 1] && values[step] >= values[step + 1] {
                let lo = (step - 1) as f64 / n as f64;
                let hi = (step + 1) as f64 / n as f64;
                let (p, value) = golden_max(eu_at, lo, hi, 1e-12)?;
                candidates.push((Policy::renormalized(vec![p, 1.0 - p])?, value));
            }
        }
    } else {
        let resolution = coarse_resolution(a, 4000);
        let mut scored: Vec<(Policy, f64)> = Vec::new();
        for at in simplex_grid(a, resolution) {
            let value = ex_ante_eu(problem, &at)?;
            scored.push((at, value));
        }
        scored.sort_by(|x, y| y.1.partial_cmp(&x.1).expect("finite utility"));
        let spacing = 2.0 / resolution as f64;
        let mut starts: Vec<Policy> = Vec::new();
        for (at, _) in &scored {
            if starts.len() >= config.restarts {
                break;
            }
            if starts.iter().all(|s| s.linf_distance(at) > spacing) {
                starts.push(at.clone());
            }
        }
        let differentiable = problem.dependence().iter().all(|f| f.differentiable());
        for start in starts {
            let (mut point, mut value) = coordinate_ascent(problem, start)?;
            if differentiable {
                if let Some(polished) = polish_optimum(problem, &point)? {
                    let polished_value = ex_ante_eu(problem, &polished)?;
                    if polished_value >= value - value_tol {
                        point = polished;
                        value = polished_value;
                    }
                }
            }
            candidates.push((point, value));
        }
    }
    let best = candidates
        .iter()
        .map(|(_, v)| *v)
        .fold(f64::NEG_INFINITY, f64::max);
    let near_best: Vec<Policy> = candidates
        .into_iter()
        .filter(|(_, v)| *v >= best - value_tol)
        .map(|(p, _)| p)
        .collect();
    let mut unique = dedup_policies(near_best);
    sort_policies(&mut unique);
    unique
        .into_iter()
        .map(|policy| {
            let value = ex_ante_eu(problem, &policy)?;
            Ok(Optimum { policy, value })
        })
        .collect()
}

/// Largest subdivision count whose simplex grid stays at or below
/// `max_points` points, floored at 8.
fn coarse_resolution(num_actions: usize, max_points: usize) -> u32 {
    let mut resolution: u32 = 8;
    loop {
        let next = resolution + 4;
        match crate::depfun::count_compositions(next, num_actions) {
            Ok(count) if count <= max_points as u128 => resolution = next,
            _ => return resolution,
        }
    }
}

/// Cyclic golden-section line searches toward each vertex until a full
/// cycle stops improving.
fn coordinate_ascent(problem: &DecisionProblem, start: Policy) -> Result<(Policy, f64)> {
    let a = problem.num_actions();
    let mut point = start;
    let mut value = ex_ante_eu(problem, &point)?;
    let improvement_floor = 1e-13 * problem.utility_range().max(1.0);
    for _ in 0..60 {
        let before = value;
        for action in 0..a {
            // The segment through the point from the face opposite
            // vertex `action` to the vertex itself, parametrized by the
            // action's own probability. This stays well conditioned even
            // when the point sits next to a vertex.
            let mut face = point.probs().to_vec();
            face[action] = 0.0;
            let rest: f64 = face.iter().sum();
            if rest <= 0.0 || !rest.is_finite() {
                continue;
            }
            for p in face.iter_mut() {
                *p /= rest;
            }
            let face = Policy::renormalized(face)?;
            let line_point = |s: f64| face.toward_vertex(action, s);
            let line = |s: f64| -> Result<f64> { Ok(ex_ante_eu(problem, &line_point(s))?) };
            let (s, line_value) = golden_max(line, 0.0, 1.0, 1e-12)?;
            if line_value > value {
                point = line_point(s);
                value = line_value;
            }
        }
        if value - before <= improvement_floor {
            break;
        }
    }
    Ok((point, value))
}

/// Newton polish on the support face of `point`, keeping the result only
/// if it stays a critical point of the restriction.
fn polish_optimum(problem: &DecisionProblem, point: &Policy) -> Result<Option<Policy>> {
    let support: Vec<usize> = point
        .probs()
        .iter()
        .enumerate()
        .filter(|(_, &p)| p > 1e-6)
        .map(|(i, _)| i)
        .collect();
    if support.len() < 2 {
        return Ok(None);
    }
    let total: f64 = support.iter().map(|&i| point.prob(i)).sum();
    let coords: Vec<f64> = support.iter().map(|&i| point.prob(i) / total).collect();
    let band = stationary_band(problem);
    newton_face(problem, &support, &coords, band)
}

/// One budget step of the sampler-approximation sequence.
#[derive(Debug, Clone)]
pub struct ConvergenceStep {
    pub n: usize,
    /// Largest pointwise gap between the original dependences and their
    /// budgeted samplers over a simplex grid.
    pub sup_error: f64,
    pub samplers: Vec<SimulationFunction>,
    /// The problem with every dependence replaced by its sampler.
    pub modified: DecisionProblem,
    pub stationary: PolicySet,
    pub optima: Vec<Optimum>,
    /// Worst distance from a modified-problem optimum to the closest
    /// original optimum.
    pub distance_to_reference: f64,
}

/// Replaces every dependence with a sampler on at most `n` draws (exactly
/// representable forms stay exact, everything else takes the empirical-
/// mean approximation) and re-solves, for each budget in `n_list`.
pub fn convergence_sequence(
    problem: &DecisionProblem,
    n_list: &[usize],
    config: &SolveConfig,
) -> Result<Vec<ConvergenceStep>> {
    config.check()?;
    problem.ensure_solvable().map_err(CdtError::Malformed)?;
    let reference = optimize_ex_ante(problem, config)?;
    let grid = simplex_grid(problem.num_actions(), 50);
    let mut steps = Vec::with_capacity(n_list.len());
    for &n in n_list {
        if n == 0 {
            return Err(CdtError::BadConfig("sample budget 0".into()));
        }
        let mut samplers = Vec::with_capacity(problem.num_dependants());
        for f in problem.dependence() {
            let sim = match exact_sampler(f, Some(n as u32)) {
                Ok(sim) => sim,
                Err(e)
                    if e.is_refusal()
                        || matches!(
                            e,
                            DepfunError::DegreeTooLow { .. } | DepfunError::NotHomogeneous
                        ) =>
                {
                    bernstein_approx(f, n)?
                }
                Err(e) => return Err(e.into()),
            };
            samplers.push(sim);
        }
        let mut sup_error: f64 = 0.0;
        for (f, sim) in problem.dependence().iter().zip(samplers.iter()) {
            for at in &grid {
                let want = f.eval(at)?;
                let got = sim.eval(at)?;
                sup_error = sup_error.max(want.linf_distance(&got));
            }
        }
        let dependence: Vec<DependenceFunction> = samplers
            .iter()
            .map(|sim| DependenceFunction::sampler(sim.clone()))
            .collect::<std::result::Result<_, _>>()?;
        let modified = problem
            .with_dependence(dependence)
            .map_err(|e| CdtError::Malformed(e.to_string()))?;
        let stationary = find_stationary(&modified, config)?;
        let optima = optimize_ex_ante(&modified, config)?;
        let distance_to_reference = optima
            .iter()
            .map(|o| {
                reference
                    .iter()
                    .map(|r| r.policy.linf_distance(&o.policy))
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0f64, f64::max);
        steps.push(ConvergenceStep {
            n,
            sup_error,
            samplers,
            modified,
            stationary,
            optima,
            distance_to_reference,
        });
    }
    Ok(steps)
}

/// Outcome of probing one policy against every hand-buildable belief
/// system from a representative faithful family.
#[derive(Debug, Clone, Serialize)]
pub struct ImpossibilityReport {
    pub anchor: Policy,
    /// The first-order constructor's refusal message, when it refused.
    pub refusal: Option<String>,
    pub candidates_checked: usize,
    pub ratifiable_candidates: usize,
    /// The constructor refused and no faithful, non-fanciful candidate
    /// ratified the anchor.
    pub holds: bool,
}

/// Checks whether `at` can be ratified by any belief system from a
/// representative family of faithful, non-fanciful candidates, and whether
/// the first-order constructor refuses the problem outright.
pub fn impossibility_check(problem: &DecisionProblem, at: &Policy) -> Result<ImpossibilityReport> {
    problem.ensure_solvable().map_err(CdtError::Malformed)?;
    let refusal = match ggt_components(problem, at, None) {
        Ok(_) => None,
        Err(e) if e.is_refusal() => Some(e.to_string()),
        Err(e) => return Err(e.into()),
    };
    let solution = solve_at(problem, at)?;
    let m = problem.non_terminals().len();
    let visited: Vec<usize> = (0..m)
        .filter(|&pos| solution.visit_counts[pos] > VISIT_POSITIVE)
        .collect();
    let a = problem.num_actions();
    // Credence splits over visited states only, so no candidate is
    // fanciful by construction.
    let splits = if visited.is_empty() {
        Vec::new()
    } else {
        simplex_grid(visited.len(), 4)
    };
    // Transform menus: diagonal-favoring rows for every dependant, plus
    // constant rows for non-identity dependants.
    let mut menus: Vec<Vec<Vec<Policy>>> = Vec::with_capacity(problem.num_dependants());
    for f in problem.dependence() {
        let mut menu: Vec<Vec<Policy>> = Vec::new();
        let mut biases = vec![Policy::uniform(a)];
        for v in 0..a {
            biases.push(Policy::pure(v, a));
        }
        menu.push((0..a).map(|x| Policy::pure(x, a)).collect());
        for epsilon in [0.25, 0.5] {
            for bias in &biases {
                menu.push(
                    (0..a)
                        .map(|x| Policy::pure(x, a).mix(bias, epsilon))
                        .collect(),
                );
            }
        }
        if !f.is_identity() {
            for bias in &biases {
                menu.push(vec![bias.clone(); a]);
            }
        }
        menus.push(menu);
    }
    let mut candidates_checked = 0usize;
    let mut ratifiable_candidates = 0usize;
    let menu_sizes: Vec<usize> = menus.iter().map(|m| m.len()).collect();
    let combos: usize = menu_sizes.iter().product();
    let cap = 4096usize;
    for split in &splits {
        for combo in 0..combos {
            if candidates_checked >= cap {
                break;
            }
            let mut credences = vec![0.0; m];
            for (slot, &pos) in visited.iter().enumerate() {
                credences[pos] = split.prob(slot);
            }
            let mut transforms = Vec::with_capacity(menus.len());
            let mut rest = combo;
            for (menu, &size) in menus.iter().zip(menu_sizes.iter()) {
                transforms.push(menu[rest % size].clone());
                rest /= size;
            }
            let Ok(beliefs) = BeliefSystem::custom(problem, at.clone(), credences, transforms)
            else {
                continue;
            };
            let audit = audit_beliefs(problem, &beliefs)?;
            if !audit.faithful || audit.fanciful {
                continue;
            }
            candidates_checked += 1;
            let report = ratify(problem, &beliefs, at, None)?;
            if report.ratifiable {
                ratifiable_candidates += 1;
            }
        }
    }
    let holds = refusal.is_some() && candidates_checked > 0 && ratifiable_candidates == 0;
    Ok(ImpossibilityReport {
        anchor: at.clone(),
        refusal,
        candidates_checked,
        ratifiable_candidates,
        holds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beliefs::gt_beliefs;
    use crate::depfun::PolynomialMap;
    use crate::problem::ProblemBuilder;

    /// One acting state, identity dependant, utilities 0 and 1.
    fn identity_hub() -> DecisionProblem {
        ProblemBuilder::new(["hold", "move"])
            .state("hub", 1)
            .terminal("t0", 0.0)
            .terminal("t1", 1.0)
            .initial("hub", 1.0)
            .transition("hub", "hold", [("t0", 1.0)])
            .transition("hub", "move", [("t1", 1.0)])
            .dependence(DependenceFunction::identity(2))
            .build()
            .unwrap()
    }

    /// One acting state whose dependant plays `4pq` into the good
    /// terminal: expected utility `4p(1-p)`, maximal at one half.
    fn bump_hub() -> DecisionProblem {
        let poly = PolynomialMap::new(
            2,
            vec![
                (vec![0, 0], vec![1.0, 0.0]),
                (vec![1, 1], vec![-4.0, 4.0]),
            ],
        )
        .unwrap();
        ProblemBuilder::new(["a", "b"])
            .state("hub", 1)
            .terminal("t0", 0.0)
            .terminal("t1", 1.0)
            .initial("hub", 1.0)
            .transition("hub", "a", [("t0", 1.0)])
            .transition("hub", "b", [("t1", 1.0)])
            .dependence(DependenceFunction::polynomial(poly).unwrap())
            .build()
            .unwrap()
    }

    #[test]
    fn gt_interventions_on_identity_hub() {
        let problem = identity_hub();
        let uniform = Policy::uniform(2);
        let beliefs = gt_beliefs(&problem, &uniform).unwrap();
        let values = cdt_action_values(&problem, &beliefs).unwrap();
        assert!((values[0] - 0.0).abs() < 1e-12);
        assert!((values[1] - 1.0).abs() < 1e-12);
        let report = ratify(&problem, &beliefs, &uniform, None).unwrap();
        assert!(!report.ratifiable);
        assert!((report.advantages[0] + 1.0).abs() < 1e-12);

        let best = Policy::pure(1, 2);
        let beliefs = gt_beliefs(&problem, &best).unwrap();
        let report = ratify(&problem, &beliefs, &best, None).unwrap();
        assert!(report.ratifiable);
        let mixed = cdt_eu_mixed(&problem, &beliefs, &Policy::uniform(2)).unwrap();
        assert!((mixed - 0.5).abs() < 1e-12);
    }

    #[test]
    fn ratify_requires_matching_anchor() {
        let problem = identity_hub();
        let beliefs = gt_beliefs(&problem, &Policy::uniform(2)).unwrap();
        let err = ratify(&problem, &beliefs, &Policy::pure(0, 2), None).unwrap_err();
        assert!(matches!(err, CdtError::AnchorMismatch { .. }));
    }

    #[test]
    fn gradient_identity_holds_exactly() {
        let columns = vec![
            Policy::new(vec![0.9, 0.1]).unwrap(),
            Policy::new(vec![0.1, 0.9]).unwrap(),
        ];
        let problem = ProblemBuilder::new(["a", "b"])
            .state("hub", 1)
            .terminal("t0", -1.0)
            .terminal("t1", 3.0)
            .initial("hub", 1.0)
            .transition("hub", "a", [("t0", 1.0)])
            .transition("hub", "b", [("t1", 1.0)])
            .dependence(DependenceFunction::linear(columns).unwrap())
            .build()
            .unwrap();
        for anchor in [
            Policy::uniform(2),
            Policy::new(vec![0.25, 0.75]).unwrap(),
            Policy::pure(0, 2),
        ] {
            let residual = grad_identity_residual(&problem, &anchor, None).unwrap();
            assert!(residual < 1e-12, "{residual}");
        }
    }

    #[test]
    fn stationary_set_of_linear_expected_utility() {
        let problem = identity_hub();
        let set = find_stationary(&problem, &SolveConfig::default()).unwrap();
        assert!(!set.everywhere_stationary);
        assert_eq!(set.policies.len(), 1);
        assert_eq!(set.policies[0].policy, Policy::pure(1, 2));
        assert_eq!(set.policies[0].class, PolicyClass::ExAnteMax);
    }

    #[test]
    fn stationary_set_with_interior_maximum() {
        let problem = bump_hub();
        let set = find_stationary(&problem, &SolveConfig::default()).unwrap();
        assert_eq!(set.policies.len(), 1);
        let p = set.policies[0].policy.prob(0);
        assert!((p - 0.5).abs() < 1e-8, "{p}");
        assert_eq!(set.policies[0].class, PolicyClass::ExAnteMax);
        assert!((set.policies[0].ex_ante_eu - 1.0).abs() < 1e-9);
    }

    #[test]
    fn optimizer_finds_interior_and_vertex_maxima() {
        let bump = bump_hub();
        let optima = optimize_ex_ante(&bump, &SolveConfig::default()).unwrap();
        assert_eq!(optima.len(), 1);
        assert!((optima[0].policy.prob(0) - 0.5).abs() < 1e-8);
        assert!((optima[0].value - 1.0).abs() < 1e-10);

        let linear = identity_hub();
        let optima = optimize_ex_ante(&linear, &SolveConfig::default()).unwrap();
        assert_eq!(optima.len(), 1);
        assert_eq!(optima[0].policy, Policy::pure(1, 2));
    }

    #[test]
    fn optimizer_handles_three_actions() {
        let problem = ProblemBuilder::new(["x", "y", "z"])
            .state("hub", 1)
            .terminal("t0", 0.0)
            .terminal("t1", 1.0)
            .terminal("t2", 2.0)
            .initial("hub", 1.0)
            .transition("hub", "x", [("t0", 1.0)])
            .transition("hub", "y", [("t1", 1.0)])
            .transition("hub", "z", [("t2", 1.0)])
            .dependence(DependenceFunction::identity(3))
            .build()
            .unwrap();
        let optima = optimize_ex_ante(&problem, &SolveConfig::default()).unwrap();
        assert_eq!(optima.len(), 1);
        assert_eq!(optima[0].policy, Policy::pure(2, 3));
        let set = find_stationary(&problem, &SolveConfig::default()).unwrap();
        assert_eq!(set.policies.len(), 1);
        assert_eq!(set.policies[0].policy, Policy::pure(2, 3));
    }

    #[test]
    fn convergence_steps_shrink_for_black_box_maps() {
        let problem = ProblemBuilder::new(["a", "b"])
            .state("hub", 1)
            .terminal("t0", 0.0)
            .terminal("t1", 1.0)
            .initial("hub", 1.0)
            .transition("hub", "a", [("t0", 1.0)])
            .transition("hub", "b", [("t1", 1.0)])
            .dependence(crate::depfun::builtin("sqrt_theodora").unwrap())
            .build()
            .unwrap();
        let steps =
            convergence_sequence(&problem, &[2, 4, 8], &SolveConfig::default()).unwrap();
        assert_eq!(steps.len(), 3);
        assert!(steps[0].sup_error > steps[1].sup_error);
        assert!(steps[1].sup_error > steps[2].sup_error);
        for step in &steps {
            assert_eq!(step.samplers[0].sample_count(), step.n);
            assert!(step.distance_to_reference.is_finite());
        }
    }

    #[test]
    fn impossibility_probe_on_ordinary_problem() {
        let problem = identity_hub();
        let report = impossibility_check(&problem, &Policy::pure(1, 2)).unwrap();
        assert!(report.refusal.is_none());
        assert!(!report.holds);
        assert!(report.candidates_checked > 0);
        // The plain self-knowledge candidate ratifies the optimum.
        assert!(report.ratifiable_candidates > 0);
    }

    #[test]
    fn component_ratify_agrees_with_belief_ratify_when_admissible() {
        let problem = identity_hub();
        let at = Policy::new(vec![0.3, 0.7]).unwrap();
        let components = crate::beliefs::ggt_components(&problem, &at, None).unwrap();
        let beliefs = crate::beliefs::beliefs_from_components(&problem, &components).unwrap();
        let via_beliefs = ratify(&problem, &beliefs, &at, None).unwrap();
        let via_components = ratify_components(&problem, &components, &at, None).unwrap();
        assert_eq!(via_beliefs.ratifiable, via_components.ratifiable);
        assert_eq!(via_beliefs.supported, via_components.supported);
        for (a, b) in via_beliefs
            .action_values
            .iter()
            .zip(&via_components.action_values)
        {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn component_ratify_survives_inadmissible_weights_at_vertices() {
        // Linear dependence with slope 0.8 in the first component: the
        // admissible minimum at a vertex exceeds 0.8, so belief
        // construction fails while the algebraic route still decides.
        let problem = ProblemBuilder::new(["a", "b"])
            .state("hub", 1)
            .terminal("t0", 0.0)
            .terminal("t1", 1.0)
            .initial("hub", 1.0)
            .transition("hub", "a", [("t1", 1.0)])
            .transition("hub", "b", [("t0", 1.0)])
            .dependence(DependenceFunction::Linear(vec![
                Policy::new(vec![0.9, 0.1]).unwrap(),
                Policy::new(vec![0.1, 0.9]).unwrap(),
            ]))
            .build()
            .unwrap();
        let at = Policy::pure(0, 2);
        let rho = [0.8];
        let components =
            crate::beliefs::ggt_components_lenient(&problem, &at, Some(&rho)).unwrap();
        assert!(!components.dependants[0].admissible);
        assert!(crate::beliefs::beliefs_from_components(&problem, &components).is_err());
        let report = ratify_components(&problem, &components, &at, None).unwrap();
        assert!(report.ratifiable);
        assert!(report.action_values[0] > report.action_values[1]);
    }
}
