//! Dependence functions: how each dependant's mixed action responds to the
//! agent's policy.
//!
//! Every variant maps the action simplex into itself; construction verifies
//! that claim on a deterministic grid. The interesting algebra lives in two
//! places: first-order responses (`delta`) along vertex directions, which
//! feed the ex ante gradient and the generalized belief transforms, and
//! sampler synthesis, which rewrites a polynomial dependence as a bounded
//! number of iid policy samples plus a lookup table.

mod builtin;
mod combin;
mod poly;
mod sampler;

pub use builtin::builtin;
pub use poly::PolynomialMap;
pub use sampler::{sampler_from_polynomial, SimulationFunction, TableView};

pub(crate) use combin::{compositions, count_compositions};

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::policy::{simplex_grid, Policy, PolicyDelta, PolicyError};
use crate::tolerances::{
    BLACKBOX_FD_STEP, COMPOSITION_CAP, RANGE_GRID_RESOLUTION, RANGE_GRID_TOL,
    SAMPLER_MATCH, SCALING_DEGREE_CAP, WEIGHT_ZERO_COMPONENT,
};

pub type Result<T> = std::result::Result<T, DepfunError>;

#[derive(Debug, Error)]
pub enum DepfunError {
    #[error("dependence output leaves the simplex: {detail}")]
    RangeViolation { detail: String },
    #[error("derivative unavailable: {reason}")]
    DerivativeUnavailable { reason: String },
    #[error("arity mismatch: expected {expected}, found {found}")]
    Arity { expected: usize, found: usize },
    #[error("degree {degree} exceeds the requested target {target}")]
    DegreeTooLow { degree: u32, target: u32 },
    #[error("no nonnegative rewriting up to degree {cap}")]
    RewriteCapExhausted { cap: u32 },
    #[error("polynomial is not homogeneous")]
    NotHomogeneous,
    #[error("coefficient {value} at exponents {exponents:?} is negative")]
    NegativeCoefficient { exponents: Vec<u32>, value: f64 },
    #[error("not a simplex map: row {exponents:?} sums to {sum}, expected {expected}")]
    NotSimplexMap {
        exponents: Vec<u32>,
        sum: f64,
        expected: f64,
    },
    #[error("coefficient at exponents {exponents:?} is not finite")]
    BadCoefficient { exponents: Vec<u32> },
    #[error("sampler table is incomplete: {detail}")]
    IncompleteTable { detail: String },
    #[error("bad sampler table key {key}")]
    BadTableKey { key: String },
    #[error("enumeration needs {needed} entries, above the cap {cap}")]
    EnumerationCap { needed: u128, cap: u128 },
    #[error("count overflowed 128 bits")]
    CountOverflow,
    #[error("degenerate shape for a sampler or polynomial")]
    BadShape,
    #[error("unknown builtin dependence `{name}`")]
    UnknownBuiltin { name: String },
    #[error("sampler disagrees with the dependence at {point}: off by {error:.3e}")]
    SamplerMismatch { point: String, error: f64 },
    #[error("dependence is not sampleable: {reason}")]
    NotSampleable { reason: String },
    #[error(transparent)]
    Policy(#[from] PolicyError),
}

impl DepfunError {
    /// True when the error says the requested analysis is undefined for
    /// this dependence (as opposed to a malformed request).
    pub fn is_refusal(&self) -> bool {
        matches!(
            self,
            DepfunError::DerivativeUnavailable { .. }
                | DepfunError::NotSampleable { .. }
                | DepfunError::RewriteCapExhausted { .. }
        )
    }
}

pub type EvalFn = Arc<dyn Fn(&Policy) -> Vec<f64> + Send + Sync>;
pub type DeltaFn = Arc<dyn Fn(usize, &Policy) -> Vec<f64> + Send + Sync>;

/// An opaque dependence given by an evaluator closure. Built-in named forms
/// carry a registry name so they can be written to disk; hand-made ones
/// cannot be serialized.
#[derive(Clone)]
pub struct BlackBoxFn {
    name: Option<String>,
    num_actions: usize,
    differentiable: bool,
    eval: EvalFn,
    delta: Option<DeltaFn>,
}

impl BlackBoxFn {
    pub fn name(&self) -> Option<&str> {
        self.name.as_deref()
    }

    pub fn differentiable(&self) -> bool {
        self.differentiable
    }
}

impl fmt::Debug for BlackBoxFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BlackBoxFn")
            .field("name", &self.name)
            .field("num_actions", &self.num_actions)
            .field("differentiable", &self.differentiable)
            .finish()
    }
}

#[derive(Debug, Clone)]
pub enum DependenceFunction {
    /// Plays exactly what the agent plays.
    Identity { num_actions: usize },
    /// Ignores the agent.
    Constant(Policy),
    /// Mixes fixed columns by the agent's probabilities.
    Linear(Vec<Policy>),
    /// A polynomial map of the agent's policy.
    Polynomial(PolynomialMap),
    /// Draws iid samples from the agent's policy and answers from a table.
    Sampler(SimulationFunction),
    /// An opaque evaluator.
    BlackBox(BlackBoxFn),
}

impl DependenceFunction {
    pub fn identity(num_actions: usize) -> Self {
        assert!(num_actions > 0);
        DependenceFunction::Identity { num_actions }
    }

    pub fn constant(value: Policy) -> Self {
        DependenceFunction::Constant(value)
    }

    /// One response column per agent action; the dependant plays the
    /// probability-weighted mixture of the columns.
    pub fn linear(columns: Vec<Policy>) -> Result<Self> {
        if columns.is_empty() {
            return Err(DepfunError::BadShape);
        }
        let k = columns.len();
        for c in &columns {
            if c.num_actions() != k {
                return Err(DepfunError::Arity {
                    expected: k,
                    found: c.num_actions(),
                });
            }
        }
        Ok(DependenceFunction::Linear(columns))
    }

    pub fn polynomial(map: PolynomialMap) -> Result<Self> {
        let f = DependenceFunction::Polynomial(map);
        f.check_range()?;
        Ok(f)
    }

    pub fn sampler(sim: SimulationFunction) -> Result<Self> {
        let f = DependenceFunction::Sampler(sim);
        f.check_range()?;
        Ok(f)
    }

    pub fn black_box(
        name: Option<String>,
        num_actions: usize,
        differentiable: bool,
        eval: EvalFn,
        delta: Option<DeltaFn>,
    ) -> Result<Self> {
        if num_actions == 0 {
            return Err(DepfunError::BadShape);
        }
        let f = DependenceFunction::BlackBox(BlackBoxFn {
            name,
            num_actions,
            differentiable,
            eval,
            delta,
        });
        f.check_range()?;
        Ok(f)
    }

    pub fn num_actions(&self) -> usize {
        match self {
            DependenceFunction::Identity { num_actions } => *num_actions,
            DependenceFunction::Constant(p) => p.num_actions(),
            DependenceFunction::Linear(columns) => columns.len(),
            DependenceFunction::Polynomial(map) => map.num_actions(),
            DependenceFunction::Sampler(sim) => sim.num_actions(),
            DependenceFunction::BlackBox(b) => b.num_actions,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            DependenceFunction::Identity { .. } => "identity",
            DependenceFunction::Constant(_) => "constant",
            DependenceFunction::Linear(_) => "linear",
            DependenceFunction::Polynomial(_) => "poly",
            DependenceFunction::Sampler(_) => "sampler",
            DependenceFunction::BlackBox(_) => "builtin",
        }
    }

    pub fn is_identity(&self) -> bool {
        matches!(self, DependenceFunction::Identity { .. })
    }

    /// Whether `delta` can be expected to succeed.
    pub fn differentiable(&self) -> bool {
        match self {
            DependenceFunction::BlackBox(b) => b.differentiable,
            _ => true,
        }
    }

    /// The dependant's mixed action when the agent commits to `at`.
    pub fn eval(&self, at: &Policy) -> Result<Policy> {
        if at.num_actions() != self.num_actions() {
            return Err(DepfunError::Arity {
                expected: self.num_actions(),
                found: at.num_actions(),
            });
        }
        match self {
            DependenceFunction::Identity { .. } => Ok(at.clone()),
            DependenceFunction::Constant(p) => Ok(p.clone()),
            DependenceFunction::Linear(columns) => {
                let mut acc = vec![0.0; columns.len()];
                for (a, column) in columns.iter().enumerate() {
                    let w = at.prob(a);
                    for (acc, &c) in acc.iter_mut().zip(column.probs().iter()) {
                        *acc += w * c;
                    }
                }
                Policy::renormalized(acc).map_err(|e| range_violation(at, e))
            }
            DependenceFunction::Polynomial(map) => {
                Policy::renormalized(map.eval_raw(at.probs())).map_err(|e| range_violation(at, e))
            }
            DependenceFunction::Sampler(sim) => sim.eval(at),
            DependenceFunction::BlackBox(b) => {
                Policy::renormalized((b.eval)(at)).map_err(|e| range_violation(at, e))
            }
        }
    }

    /// First-order response along the direction from `at` toward the vertex
    /// of `action`: the limit of `(F(at + eps * dir) - F(at)) / eps`.
    pub fn delta(&self, action: usize, at: &Policy) -> Result<PolicyDelta> {
        if action >= self.num_actions() {
            return Err(DepfunError::Arity {
                expected: self.num_actions(),
                found: action,
            });
        }
        match self {
            DependenceFunction::Identity { .. } => Ok(PolicyDelta::toward_vertex(at, action)),
            DependenceFunction::Constant(p) => Ok(PolicyDelta::zero(p.num_actions())),
            DependenceFunction::Linear(columns) => {
                let base = self.eval(at)?;
                let signed = columns[action]
                    .probs()
                    .iter()
                    .zip(base.probs().iter())
                    .map(|(c, b)| c - b)
                    .collect();
                Ok(PolicyDelta::recentered(signed)?)
            }
            DependenceFunction::Polynomial(map) => map.delta_along(action, at),
            DependenceFunction::Sampler(sim) => sim.delta(action, at),
            DependenceFunction::BlackBox(b) => {
                if let Some(delta) = &b.delta {
                    return Ok(PolicyDelta::recentered(delta(action, at))?);
                }
                if !b.differentiable {
                    let name = b.name.as_deref().unwrap_or("anonymous");
                    return Err(DepfunError::DerivativeUnavailable {
                        reason: format!(
                            "black-box dependence `{name}` is flagged non-differentiable"
                        ),
                    });
                }
                self.fd_delta(action, at)
            }
        }
    }

    /// Central finite differences along the vertex direction, falling back
    /// to a one-sided step at the boundary of the simplex.
    fn fd_delta(&self, action: usize, at: &Policy) -> Result<PolicyDelta> {
        let h = BLACKBOX_FD_STEP;
        let forward = self.eval(&at.toward_vertex(action, h))?;
        // The backward point at - h * (vertex - at) lies on the simplex only
        // when the moved coordinate has room.
        let backward_ok = at.prob(action) >= h;
        let signed: Vec<f64> = if backward_ok {
            let probs: Vec<f64> = at
                .probs()
                .iter()
                .enumerate()
                .map(|(a, &p)| p * (1.0 + h) - if a == action { h } else { 0.0 })
                .collect();
            let backward = self.eval(&Policy::renormalized(probs)?)?;
            forward
                .probs()
                .iter()
                .zip(backward.probs().iter())
                .map(|(f, b)| (f - b) / (2.0 * h))
                .collect()
        } else {
            let base = self.eval(at)?;
            forward
                .probs()
                .iter()
                .zip(base.probs().iter())
                .map(|(f, b)| (f - b) / h)
                .collect()
        };
        Ok(PolicyDelta::recentered(signed)?)
    }

    /// Verifies on the deterministic grid that the map stays on the simplex.
    fn check_range(&self) -> Result<()> {
        for point in simplex_grid(self.num_actions(), RANGE_GRID_RESOLUTION) {
            let raw = match self {
                DependenceFunction::Identity { .. } | DependenceFunction::Constant(_) => continue,
                DependenceFunction::Linear(columns) => {
                    let mut acc = vec![0.0; columns.len()];
                    for (a, column) in columns.iter().enumerate() {
                        for (acc, &c) in acc.iter_mut().zip(column.probs().iter()) {
                            *acc += point.prob(a) * c;
                        }
                    }
                    acc
                }
                DependenceFunction::Polynomial(map) => map.eval_raw(point.probs()),
                DependenceFunction::Sampler(sim) => sim.eval(&point)?.into_probs(),
                DependenceFunction::BlackBox(b) => (b.eval)(&point),
            };
            let sum: f64 = raw.iter().sum();
            let min = raw.iter().copied().fold(f64::INFINITY, f64::min);
            if (sum - 1.0).abs() > RANGE_GRID_TOL || min < -RANGE_GRID_TOL {
                return Err(DepfunError::RangeViolation {
                    detail: format!(
                        "at {:?}: value {:?} (sum {sum})",
                        point.probs(),
                        raw
                    ),
                });
            }
        }
        Ok(())
    }

    /// The map as an explicit polynomial, when it is one.
    pub fn as_polynomial(&self) -> Result<PolynomialMap> {
        let k = self.num_actions();
        match self {
            DependenceFunction::Identity { .. } => PolynomialMap::new(
                k,
                (0..k).map(|a| {
                    let mut e = vec![0u32; k];
                    e[a] = 1;
                    let mut c = vec![0.0; k];
                    c[a] = 1.0;
                    (e, c)
                }),
            ),
            DependenceFunction::Constant(p) => {
                PolynomialMap::new(k, vec![(vec![0u32; k], p.probs().to_vec())])
            }
            DependenceFunction::Linear(columns) => PolynomialMap::new(
                k,
                columns.iter().enumerate().map(|(a, column)| {
                    let mut e = vec![0u32; k];
                    e[a] = 1;
                    (e, column.probs().to_vec())
                }),
            ),
            DependenceFunction::Polynomial(map) => Ok(map.clone()),
            DependenceFunction::Sampler(sim) => sim.to_polynomial(),
            DependenceFunction::BlackBox(b) => {
                let name = b.name.as_deref().unwrap_or("anonymous");
                Err(DepfunError::NotSampleable {
                    reason: format!("`{name}` is not polynomial"),
                })
            }
        }
    }
}

fn range_violation(at: &Policy, err: PolicyError) -> DepfunError {
    DepfunError::RangeViolation {
        detail: format!("at {:?}: {err}", at.probs()),
    }
}

/// A sampler that realizes the dependence exactly, when one can be derived:
/// the identity, constants, linear mixtures, samplers themselves, and
/// polynomials admitting a nonnegative rewriting.
pub fn exact_sampler(
    f: &DependenceFunction,
    rewrite_cap: Option<u32>,
) -> Result<SimulationFunction> {
    match f {
        DependenceFunction::Identity { num_actions } => {
            Ok(SimulationFunction::identity(*num_actions))
        }
        DependenceFunction::Constant(p) => SimulationFunction::constant(p.clone(), 1),
        DependenceFunction::Linear(columns) => {
            let table = columns
                .iter()
                .enumerate()
                .map(|(a, column)| (vec![a as u8], column.clone()))
                .collect();
            SimulationFunction::from_tuples(columns.len(), 1, table)
        }
        DependenceFunction::Sampler(sim) => Ok(sim.clone()),
        DependenceFunction::Polynomial(map) => {
            let rewritten = map.nonneg_rewrite(rewrite_cap)?;
            sampler_from_polynomial(&rewritten)
        }
        DependenceFunction::BlackBox(b) => {
            let name = b.name.as_deref().unwrap_or("anonymous");
            Err(DepfunError::NotSampleable {
                reason: format!("`{name}` is not polynomial"),
            })
        }
    }
}

/// Checks on the deterministic grid that `sim` reproduces `f`.
pub fn sampler_matches(f: &DependenceFunction, sim: &SimulationFunction) -> Result<()> {
    if sim.num_actions() != f.num_actions() {
        return Err(DepfunError::Arity {
            expected: f.num_actions(),
            found: sim.num_actions(),
        });
    }
    for point in simplex_grid(f.num_actions(), RANGE_GRID_RESOLUTION) {
        let want = f.eval(&point)?;
        let got = sim.eval(&point)?;
        let error = want.linf_distance(&got);
        if error > SAMPLER_MATCH {
            return Err(DepfunError::SamplerMismatch {
                point: format!("{:?}", point.probs()),
                error,
            });
        }
    }
    Ok(())
}

/// Outcome of a sampleability query for a fixed sample budget.
#[derive(Debug, Clone)]
pub struct SampleabilityVerdict {
    pub sampleable: bool,
    pub reason: String,
    pub witness: Option<SimulationFunction>,
}

/// Decides whether `f` can be realized by a dependant drawing `n` iid
/// samples. Exact: a witness sampler is produced on success.
pub fn is_sampleable(f: &DependenceFunction, n: usize) -> Result<SampleabilityVerdict> {
    let poly = match f.as_polynomial() {
        Ok(poly) => poly,
        Err(DepfunError::NotSampleable { reason }) => {
            return Ok(SampleabilityVerdict {
                sampleable: false,
                reason,
                witness: None,
            })
        }
        Err(other) => return Err(other),
    };
    let degree = poly.degree();
    if degree as usize > n {
        return Ok(SampleabilityVerdict {
            sampleable: false,
            reason: format!("degree {degree} exceeds the sample budget {n}"),
            witness: None,
        });
    }
    // For two actions there is a clean split: a nonzero component must stay
    // strictly positive on the open edge once its boundary monomial is
    // factored out, otherwise no sample budget ever suffices.
    if f.num_actions() == 2 {
        for output in 0..2 {
            let hom = poly.homogenize(degree)?;
            if let Some((_, remainder)) = hom.factor_component(output) {
                let probes = 512;
                for i in 1..probes {
                    let p = i as f64 / probes as f64;
                    let value = remainder.eval_raw(&[p, 1.0 - p])[output];
                    if value <= WEIGHT_ZERO_COMPONENT {
                        return Ok(SampleabilityVerdict {
                            sampleable: false,
                            reason: format!(
                                "component {output} touches zero strictly inside the edge \
                                 (at {p:.4}); no sample count realizes it"
                            ),
                            witness: None,
                        });
                    }
                }
            }
        }
    }
    match poly.nonneg_rewrite(Some(n as u32)) {
        Ok(rewritten) => {
            let witness = sampler_from_polynomial(&rewritten)?;
            Ok(SampleabilityVerdict {
                sampleable: true,
                reason: format!(
                    "nonnegative homogeneous representation of degree {}",
                    rewritten.homogeneous_degree().unwrap_or(0)
                ),
                witness: Some(witness),
            })
        }
        Err(DepfunError::RewriteCapExhausted { .. }) => {
            let zeros = interior_zero_report(&poly, f.num_actions());
            Ok(SampleabilityVerdict {
                sampleable: false,
                reason: match zeros {
                    Some(detail) => format!(
                        "no nonnegative rewriting with {n} samples; {detail}"
                    ),
                    None => format!("no nonnegative rewriting with {n} samples"),
                },
                witness: None,
            })
        }
        Err(other) => Err(other),
    }
}

/// Reports grid points where some component of the map vanishes, which is
/// what usually blocks a nonnegative rewriting.
fn interior_zero_report(poly: &PolynomialMap, num_actions: usize) -> Option<String> {
    for point in simplex_grid(num_actions, 10) {
        let value = poly.eval_raw(point.probs());
        for (output, &v) in value.iter().enumerate() {
            let is_vertex_weight = point
                .probs()
                .iter()
                .all(|&p| p == 0.0 || (p - 1.0).abs() < 1e-12);
            if v.abs() <= WEIGHT_ZERO_COMPONENT && !is_vertex_weight {
                return Some(format!(
                    "component {output} vanishes at {:?}",
                    point.probs()
                ));
            }
        }
    }
    None
}

/// One sample-count row of a scaling scan: how many grid pairs violate the
/// bound `F(p) >= t^n F(q)` required of any `n`-sample realization.
#[derive(Debug, Clone)]
pub struct ScalingRow {
    pub sample_count: u32,
    pub violations: usize,
    pub example: Option<ScalingViolation>,
}

#[derive(Debug, Clone)]
pub struct ScalingViolation {
    pub stronger: Policy,
    pub weaker: Policy,
    pub component: usize,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone)]
pub struct ScalingScanReport {
    pub threshold: f64,
    pub grid_resolution: u32,
    pub pairs_checked: usize,
    pub rows: Vec<ScalingRow>,
}

impl ScalingScanReport {
    /// Sample counts up to the scan cap that survive the necessary
    /// condition.
    pub fn clean_sample_counts(&self) -> Vec<u32> {
        self.rows
            .iter()
            .filter(|r| r.violations == 0)
            .map(|r| r.sample_count)
            .collect()
    }
}

/// Scans grid pairs `p >= t * q` (componentwise) and checks the scaling
/// bound `F(p) >= t^n F(q)` that any `n`-sample realization must satisfy.
/// Violations at a sample count rule that count out.
pub fn necessary_condition_scan(
    f: &DependenceFunction,
    threshold: f64,
    grid_resolution: u32,
) -> Result<ScalingScanReport> {
    assert!(
        threshold > 0.0 && threshold <= 1.0,
        "threshold must lie in (0, 1]"
    );
    let grid = simplex_grid(f.num_actions(), grid_resolution);
    let values: Vec<Policy> = grid
        .iter()
        .map(|point| f.eval(point))
        .collect::<Result<_>>()?;
    let mut pairs = Vec::new();
    for (i, p) in grid.iter().enumerate() {
        for (j, q) in grid.iter().enumerate() {
            if i == j {
                continue;
            }
            let dominated = p
                .probs()
                .iter()
                .zip(q.probs().iter())
                .all(|(&pp, &qq)| pp >= threshold * qq - 1e-12);
            if dominated {
                pairs.push((i, j));
            }
        }
    }
    let mut rows = Vec::new();
    for sample_count in 1..=SCALING_DEGREE_CAP {
        let scale = threshold.powi(sample_count as i32);
        let mut violations = 0usize;
        let mut example = None;
        for &(i, j) in &pairs {
            for component in 0..f.num_actions() {
                let lhs = values[i].prob(component);
                let rhs = scale * values[j].prob(component);
                if lhs < rhs - 1e-12 {
                    violations += 1;
                    if example.is_none() {
                        example = Some(ScalingViolation {
                            stronger: grid[i].clone(),
                            weaker: grid[j].clone(),
                            component,
                            lhs,
                            rhs,
                        });
                    }
                    break;
                }
            }
        }
        rows.push(ScalingRow {
            sample_count,
            violations,
            example,
        });
    }
    Ok(ScalingScanReport {
        threshold,
        grid_resolution,
        pairs_checked: pairs.len(),
        rows,
    })
}

/// The `n`-sample smoothing of an arbitrary dependence: samples are drawn,
/// their empirical mean is formed, and the original map is evaluated there.
/// Converges uniformly to continuous maps as `n` grows.
pub fn bernstein_approx(f: &DependenceFunction, n: usize) -> Result<SimulationFunction> {
    if n == 0 {
        return Err(DepfunError::BadShape);
    }
    let k = f.num_actions();
    combin::check_composition_cap(n as u32, k)?;
    let mut table = std::collections::BTreeMap::new();
    for counts in combin::compositions(n as u32, k) {
        let mean = Policy::renormalized(
            counts.iter().map(|&c| c as f64 / n as f64).collect(),
        )?;
        table.insert(counts, f.eval(&mean)?);
    }
    SimulationFunction::from_multisets(k, n, table)
}

/// Keeps `COMPOSITION_CAP` referenced from one place for callers that need
/// to explain a refusal.
pub fn composition_cap() -> u128 {
    COMPOSITION_CAP
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tolerances::EU_FD_STEP;

    fn cubic_map() -> DependenceFunction {
        let poly = PolynomialMap::new(
            2,
            vec![
                (vec![0, 0], vec![1.0 / 6.0, 5.0 / 6.0]),
                (vec![2, 0], vec![2.0, -2.0]),
                (vec![3, 0], vec![-4.0 / 3.0, 4.0 / 3.0]),
            ],
        )
        .unwrap();
        DependenceFunction::polynomial(poly).unwrap()
    }

    fn sqrt_map() -> DependenceFunction {
        builtin("sqrt_theodora").unwrap()
    }

    #[test]
    fn range_check_rejects_off_simplex_maps() {
        let bad = PolynomialMap::new(2, vec![(vec![1, 0], vec![2.0, -1.0])]).unwrap();
        assert!(matches!(
            DependenceFunction::polynomial(bad),
            Err(DepfunError::RangeViolation { .. })
        ));
    }

    #[test]
    fn linear_delta_is_column_gap() {
        let columns = vec![
            Policy::new(vec![0.9, 0.1]).unwrap(),
            Policy::new(vec![0.1, 0.9]).unwrap(),
        ];
        let f = DependenceFunction::linear(columns).unwrap();
        let at = Policy::new(vec![0.25, 0.75]).unwrap();
        let base = f.eval(&at).unwrap();
        let d = f.delta(0, &at).unwrap();
        assert!((d.get(0) - (0.9 - base.prob(0))).abs() < 1e-12);
        assert!((d.get(1) - (0.1 - base.prob(1))).abs() < 1e-12);
    }

    #[test]
    fn polynomial_delta_matches_finite_differences() {
        let f = cubic_map();
        for at in [
            Policy::uniform(2),
            Policy::new(vec![0.85, 0.15]).unwrap(),
            Policy::pure(1, 2),
        ] {
            for action in 0..2 {
                let d = f.delta(action, &at).unwrap();
                let h = EU_FD_STEP;
                let fwd = f.eval(&at.toward_vertex(action, h)).unwrap();
                let base = f.eval(&at).unwrap();
                for (out, dv) in d.components().iter().enumerate() {
                    let fd = (fwd.prob(out) - base.prob(out)) / h;
                    assert!((dv - fd).abs() < 1e-4, "{dv} vs {fd}");
                }
            }
        }
    }

    #[test]
    fn sqrt_example_delta_value() {
        // First component of the response is sqrt(0.1 + 0.8 p); pushing
        // from pure first-action toward the second gives -0.4 / sqrt(0.9).
        let f = sqrt_map();
        let at = Policy::pure(0, 2);
        let d = f.delta(1, &at).unwrap();
        let expect = -0.4 / 0.9f64.sqrt();
        assert!((d.get(0) - expect).abs() < 1e-12, "{}", d.get(0));
    }

    #[test]
    fn quartic_ratio_delta_at_half() {
        // d/dp [16p^4 / (1 + 16p^4)] at p = 1/2 is 2; moving from the
        // uniform point toward the second vertex scales it by 1/2.
        let f = builtin("quartic_ratio").unwrap();
        let at = Policy::uniform(2);
        let d = f.delta(1, &at).unwrap();
        assert!((d.get(1) - 1.0).abs() < 1e-12, "{}", d.get(1));
    }

    #[test]
    fn black_box_fd_matches_known_delta() {
        // Same map as sqrt_theodora but with the analytic derivative
        // withheld, forcing the finite-difference path.
        let eval: EvalFn = Arc::new(|at: &Policy| {
            let m = (0.1 + 0.8 * at.prob(0)).sqrt();
            vec![m, 1.0 - m]
        });
        let fd_only =
            DependenceFunction::black_box(None, 2, true, eval, None).unwrap();
        let reference = sqrt_map();
        for at in [Policy::uniform(2), Policy::pure(0, 2), Policy::pure(1, 2)] {
            // One-sided steps at the boundary truncate at first order, so
            // the agreement there is an order looser than in the interior.
            let tol = if at.as_vertex().is_some() { 1e-5 } else { 1e-6 };
            for action in 0..2 {
                let a = fd_only.delta(action, &at).unwrap();
                let b = reference.delta(action, &at).unwrap();
                for (x, y) in a.components().iter().zip(b.components()) {
                    assert!((x - y).abs() < tol, "{x} vs {y}");
                }
            }
        }
    }

    #[test]
    fn non_differentiable_black_box_refuses_delta() {
        let f = builtin("step_predictor").unwrap();
        let err = f.delta(0, &Policy::uniform(2)).unwrap_err();
        assert!(matches!(err, DepfunError::DerivativeUnavailable { .. }));
    }

    #[test]
    fn cubic_is_sampleable_with_three() {
        let verdict = is_sampleable(&cubic_map(), 3).unwrap();
        assert!(verdict.sampleable, "{}", verdict.reason);
        let witness = verdict.witness.unwrap();
        assert_eq!(witness.sample_count(), 3);
        sampler_matches(&cubic_map(), &witness).unwrap();
    }

    #[test]
    fn sqrt_map_is_not_sampleable() {
        let verdict = is_sampleable(&sqrt_map(), 8).unwrap();
        assert!(!verdict.sampleable);
        assert!(verdict.reason.contains("not polynomial"), "{}", verdict.reason);
    }

    #[test]
    fn interior_zero_blocks_sampling_on_two_actions() {
        let poly = PolynomialMap::new(
            2,
            vec![(vec![0, 0], vec![0.0, 1.0]), (vec![1, 1], vec![4.0, -4.0])],
        )
        .unwrap();
        let f = DependenceFunction::polynomial(poly).unwrap();
        let verdict = is_sampleable(&f, 12).unwrap();
        assert!(!verdict.sampleable);
        assert!(
            verdict.reason.contains("touches zero"),
            "{}",
            verdict.reason
        );
    }

    #[test]
    fn bernstein_error_shrinks() {
        let f = sqrt_map();
        let grid = simplex_grid(2, 50);
        let mut last = f64::INFINITY;
        for n in [4usize, 8, 16] {
            let approx = bernstein_approx(&f, n).unwrap();
            let mut sup: f64 = 0.0;
            for point in &grid {
                let a = f.eval(point).unwrap();
                let b = approx.eval(point).unwrap();
                sup = sup.max(a.linf_distance(&b));
            }
            assert!(sup < last, "sup {sup} did not shrink from {last} at n={n}");
            last = sup;
        }
    }

    #[test]
    fn bernstein_is_exact_on_polynomials_of_low_degree() {
        // Degree-1 maps are reproduced exactly by any sample count.
        let columns = vec![
            Policy::new(vec![0.7, 0.3]).unwrap(),
            Policy::new(vec![0.2, 0.8]).unwrap(),
        ];
        let f = DependenceFunction::linear(columns).unwrap();
        let approx = bernstein_approx(&f, 5).unwrap();
        for point in simplex_grid(2, 20) {
            let a = f.eval(&point).unwrap();
            let b = approx.eval(&point).unwrap();
            assert!(a.linf_distance(&b) < 1e-12);
        }
    }
}
