//! Named closed-form dependence functions. These are the black boxes that a
//! problem file can refer to by name: unlike hand-made closures they carry a
//! registry identity and so can round-trip through disk.

use std::sync::Arc;

use crate::policy::Policy;

use super::{DependenceFunction, DepfunError, Result};

/// Looks up a named dependence function.
///
/// - `sqrt_theodora`: two actions; the first output probability is
///   `sqrt(0.1 + 0.8 p)` where `p` is the agent's first-action probability.
///   Smooth but not polynomial.
/// - `step_predictor`: two actions; answers the second pure action exactly
///   when the agent puts any mass at all on the second action. A
///   discontinuous predictor with no derivative anywhere useful.
/// - `quartic_ratio`: two actions; the second output probability is
///   `16 p^4 / (1 + 16 p^4)` in the agent's second-action probability.
///   Smooth, with steep response near the uniform point.
/// - `staircase_<n>`: two actions; the second output probability is
///   `floor(n p) / n`, a step function with `n` treads.
pub fn builtin(name: &str) -> Result<DependenceFunction> {
    match name {
        "sqrt_theodora" => DependenceFunction::black_box(
            Some(name.to_string()),
            2,
            true,
            Arc::new(|at: &Policy| {
                let m = (0.1 + 0.8 * at.prob(0)).sqrt();
                vec![m, 1.0 - m]
            }),
            Some(Arc::new(|action: usize, at: &Policy| {
                let p = at.prob(0);
                let dp = if action == 0 { 1.0 - p } else { -p };
                let dm = 0.4 / (0.1 + 0.8 * p).sqrt() * dp;
                vec![dm, -dm]
            })),
        ),
        "step_predictor" => DependenceFunction::black_box(
            Some(name.to_string()),
            2,
            false,
            Arc::new(|at: &Policy| {
                if at.prob(1) > 0.0 {
                    vec![0.0, 1.0]
                } else {
                    vec![1.0, 0.0]
                }
            }),
            None,
        ),
        "quartic_ratio" => DependenceFunction::black_box(
            Some(name.to_string()),
            2,
            true,
            Arc::new(|at: &Policy| {
                let p = at.prob(1);
                let p4 = 16.0 * p.powi(4);
                let q = p4 / (1.0 + p4);
                vec![1.0 - q, q]
            }),
            Some(Arc::new(|action: usize, at: &Policy| {
                let p = at.prob(1);
                let denom = 1.0 + 16.0 * p.powi(4);
                let slope = 64.0 * p.powi(3) / (denom * denom);
                let dp = if action == 1 { 1.0 - p } else { -p };
                let dq = slope * dp;
                vec![-dq, dq]
            })),
        ),
        _ => {
            if let Some(treads) = name.strip_prefix("staircase_") {
                let n: u32 = treads.parse().map_err(|_| DepfunError::UnknownBuiltin {
                    name: name.to_string(),
                })?;
                if n == 0 {
                    return Err(DepfunError::UnknownBuiltin {
                        name: name.to_string(),
                    });
                }
                return DependenceFunction::black_box(
                    Some(name.to_string()),
                    2,
                    false,
                    Arc::new(move |at: &Policy| {
                        let t = n as f64 * at.prob(1);
                        // Snap values a hair under an integer up to it, so
                        // exact tread boundaries are not lost to roundoff.
                        let mut k = t.floor();
                        if t - k > 1.0 - 1e-9 {
                            k += 1.0;
                        }
                        let level = k / n as f64;
                        vec![1.0 - level, level]
                    }),
                    None,
                );
            }
            Err(DepfunError::UnknownBuiltin {
                name: name.to_string(),
            })
        }
    }
}
