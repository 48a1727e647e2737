//! Numeric tolerances and solver defaults shared across the crate.
//!
//! Everything that decides "equal enough" or "small enough to be zero" lives
//! here so that operations and their tests cannot drift apart.

/// A probability vector is accepted as-is when its entries sum to 1 within
/// this bound.
pub const POLICY_SUM_STRICT: f64 = 1e-12;

/// Looser bound under which an input probability vector is renormalized
/// instead of rejected. Inputs further off than this are malformed.
pub const POLICY_SUM_RENORM: f64 = 1e-9;

/// A signed direction tangent to the simplex must sum to zero within this.
pub const DELTA_SUM: f64 = 1e-10;

/// LU pivots with magnitude below this are treated as singular.
pub const LU_PIVOT_MIN: f64 = 1e-12;

/// Denominator of the deterministic simplex grid used for range and
/// equality checks on dependence functions.
pub const RANGE_GRID_RESOLUTION: u32 = 20;

/// How far a dependence function may stray off the simplex on the check grid
/// before construction is refused.
pub const RANGE_GRID_TOL: f64 = 1e-9;

/// Central finite-difference step for derivatives of the ex ante utility.
pub const EU_FD_STEP: f64 = 1e-5;

/// Finite-difference step for derivatives of black-box dependence functions.
pub const BLACKBOX_FD_STEP: f64 = 1e-6;

/// Polynomial coefficients at least this far below zero cannot be clamped
/// away during nonnegative rewriting.
pub const COEFF_CLAMP: f64 = 1e-12;

/// Grid-equality bound for polynomial identities (homogenization, rewrites,
/// sampler round trips).
pub const POLY_GRID_EQ: f64 = 1e-10;

/// A sampler offered as a realization of a dependence function must
/// reproduce it within this bound on the check grid.
pub const SAMPLER_MATCH: f64 = 1e-8;

/// Coefficient-row sums must match their multinomial weight within this
/// bound when a homogeneous polynomial is converted to a sampler.
pub const SAMPLER_ROW_SUM: f64 = 1e-9;

/// Entries of a dependence value below this count as exact zeros when
/// maximizing the weight lower bound.
pub const WEIGHT_ZERO_COMPONENT: f64 = 1e-12;

/// Default ratifiability tolerance, absolute after rescaling utilities to
/// a unit range.
pub const RATIFY_TOL: f64 = 1e-7;

/// Slack when comparing a chosen dependant weight against its admissible
/// minimum.
pub const RHO_SLACK: f64 = 1e-9;

/// Gradient magnitudes below this, scaled by the utility range, count as
/// zero when deciding stationarity.
pub const STATIONARY_BAND: f64 = 1e-9;

/// Expected visit counts below this are treated as unreachable.
pub const VISIT_POSITIVE: f64 = 1e-12;

/// Credences below this count as zero when auditing beliefs.
pub const CREDENCE_POSITIVE: f64 = 1e-12;

/// Two policies within this Euclidean distance are reported as the same
/// stationary point.
pub const DEDUP_RADIUS: f64 = 1e-6;

/// Width at which bisection on a two-action edge stops.
pub const BISECT_TOL: f64 = 1e-10;

/// Default number of cells in a one-dimensional stationary scan.
pub const DEFAULT_EDGE_GRID: usize = 2000;

/// Default number of interior restarts for simplex searches.
pub const DEFAULT_RESTARTS: usize = 24;

/// Default cap on enumerated pure joint policies in the termination check.
pub const TERMINATION_ENUM_CAP: u128 = 1_000_000;

/// Default cap on the number of states an expanded problem may have.
pub const EXPANSION_STATE_CAP: usize = 1_000_000;

/// Expansion soundness: allowed gap between original and expanded ex ante
/// expected utility.
pub const EXPANSION_EU_TOL: f64 = 1e-10;

/// Expansion soundness: allowed gap between per-tree credence sums in the
/// expanded problem and the matching credences in the original.
pub const EXPANSION_CREDENCE_TOL: f64 = 1e-10;

/// Expansion soundness: allowed gap between causal action values computed
/// in the expanded problem and in the original.
pub const EXPANSION_VALUE_TOL: f64 = 1e-9;

/// Expansion soundness: allowed gap between aggregated tree exit
/// probabilities and the original one-step transition row.
pub const EXPANSION_EXIT_TOL: f64 = 1e-10;

/// Cap on the number of sample multisets enumerated when building or
/// evaluating a sampler.
pub const COMPOSITION_CAP: u128 = 1_000_000;

/// Hard step cap for a single Monte Carlo rollout.
pub const ROLLOUT_STEP_CAP: usize = 10_000_000;

/// Default z-score bound for Monte Carlo validation.
pub const DEFAULT_Z: f64 = 4.0;

/// Largest exponent considered when scanning scaling candidates in the
/// sampleability necessary-condition check.
pub const SCALING_DEGREE_CAP: u32 = 20;

/// Default multiplier applied to the polynomial degree when searching for a
/// nonnegative rewriting.
pub const REWRITE_DEGREE_FACTOR: u32 = 3;

/// Floor on the nonnegative-rewriting search cap.
pub const REWRITE_DEGREE_MIN: u32 = 60;
