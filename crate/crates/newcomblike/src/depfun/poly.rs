//! Polynomial maps from the action simplex to action distributions.
//!
//! A map is stored as a sparse sum of monomials: each term pairs an exponent
//! multi-index over actions with a coefficient vector over output actions.
//! Two representations that agree on the simplex are interchangeable here;
//! homogenization and nonnegative rewriting move between them.

use std::collections::BTreeMap;

use crate::policy::{Policy, PolicyDelta};
use crate::tolerances::{COEFF_CLAMP, REWRITE_DEGREE_FACTOR, REWRITE_DEGREE_MIN};

use super::combin::{compositions, multinomial};
use super::DepfunError;

#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialMap {
    num_actions: usize,
    /// exponent multi-index over input actions -> coefficient per output action
    terms: BTreeMap<Vec<u32>, Vec<f64>>,
}

impl PolynomialMap {
    pub fn new(
        num_actions: usize,
        terms: impl IntoIterator<Item = (Vec<u32>, Vec<f64>)>,
    ) -> Result<Self, DepfunError> {
        let mut merged: BTreeMap<Vec<u32>, Vec<f64>> = BTreeMap::new();
        for (exponents, coefficients) in terms {
            if exponents.len() != num_actions {
                return Err(DepfunError::Arity {
                    expected: num_actions,
                    found: exponents.len(),
                });
            }
            if coefficients.len() != num_actions {
                return Err(DepfunError::Arity {
                    expected: num_actions,
                    found: coefficients.len(),
                });
            }
            if coefficients.iter().any(|c| !c.is_finite()) {
                return Err(DepfunError::BadCoefficient {
                    exponents: exponents.clone(),
                });
            }
            let entry = merged
                .entry(exponents)
                .or_insert_with(|| vec![0.0; num_actions]);
            for (acc, c) in entry.iter_mut().zip(coefficients.iter()) {
                *acc += c;
            }
        }
        merged.retain(|_, coefficients| coefficients.iter().any(|&c| c != 0.0));
        Ok(PolynomialMap {
            num_actions,
            terms: merged,
        })
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<u32>, &Vec<f64>)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn degree(&self) -> u32 {
        self.terms
            .keys()
            .map(|e| e.iter().sum::<u32>())
            .max()
            .unwrap_or(0)
    }

    /// The common total degree of all terms, if there is one.
    pub fn homogeneous_degree(&self) -> Option<u32> {
        let mut degrees = self.terms.keys().map(|e| e.iter().sum::<u32>());
        let first = degrees.next()?;
        if degrees.all(|d| d == first) {
            Some(first)
        } else {
            None
        }
    }

    pub fn min_coefficient(&self) -> f64 {
        self.terms
            .values()
            .flat_map(|c| c.iter().copied())
            .fold(f64::INFINITY, f64::min)
    }

    pub fn eval_raw(&self, probs: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.num_actions];
        for (exponents, coefficients) in &self.terms {
            let mut monomial = 1.0;
            for (&e, &p) in exponents.iter().zip(probs.iter()) {
                if e > 0 {
                    monomial *= p.powi(e as i32);
                }
            }
            for (acc, &c) in out.iter_mut().zip(coefficients.iter()) {
                *acc += c * monomial;
            }
        }
        out
    }

    /// Partial derivatives at a point: `jac[output][variable]`.
    pub fn jacobian(&self, probs: &[f64]) -> Vec<Vec<f64>> {
        let k = self.num_actions;
        let mut jac = vec![vec![0.0; k]; k];
        for (exponents, coefficients) in &self.terms {
            for var in 0..k {
                let e = exponents[var];
                if e == 0 {
                    continue;
                }
                let mut monomial = e as f64 * probs[var].powi(e as i32 - 1);
                for (other, &eo) in exponents.iter().enumerate() {
                    if other != var && eo > 0 {
                        monomial *= probs[other].powi(eo as i32);
                    }
                }
                for (out, &c) in coefficients.iter().enumerate() {
                    jac[out][var] += c * monomial;
                }
            }
        }
        jac
    }

    /// First-order response along the direction from `at` toward the vertex
    /// of `action`.
    pub fn delta_along(&self, action: usize, at: &Policy) -> Result<PolicyDelta, DepfunError> {
        let jac = self.jacobian(at.probs());
        let direction = PolicyDelta::toward_vertex(at, action);
        let signed: Vec<f64> = jac
            .iter()
            .map(|row| {
                row.iter()
                    .zip(direction.components().iter())
                    .map(|(j, v)| j * v)
                    .sum()
            })
            .collect();
        // The output components sum to a constant on the simplex, so the
        // directional derivative sums to zero up to roundoff.
        Ok(PolicyDelta::recentered(signed)?)
    }

    /// Rewrites the map as a homogeneous polynomial of the given total
    /// degree by multiplying each term with the matching power of the sum of
    /// all variables. Equal to the original on the simplex.
    pub fn homogenize(&self, target: u32) -> Result<PolynomialMap, DepfunError> {
        let degree = self.degree();
        if target < degree {
            return Err(DepfunError::DegreeTooLow { degree, target });
        }
        let mut merged: BTreeMap<Vec<u32>, Vec<f64>> = BTreeMap::new();
        for (exponents, coefficients) in &self.terms {
            let extra = target - exponents.iter().sum::<u32>();
            for padding in compositions(extra, self.num_actions) {
                let weight = multinomial(&padding)?;
                let key: Vec<u32> = exponents
                    .iter()
                    .zip(padding.iter())
                    .map(|(&e, &m)| e + m)
                    .collect();
                let entry = merged
                    .entry(key)
                    .or_insert_with(|| vec![0.0; self.num_actions]);
                for (acc, &c) in entry.iter_mut().zip(coefficients.iter()) {
                    *acc += weight * c;
                }
            }
        }
        merged.retain(|_, coefficients| coefficients.iter().any(|&c| c != 0.0));
        Ok(PolynomialMap {
            num_actions: self.num_actions,
            terms: merged,
        })
    }

    /// Searches degrees from the map's own up to `cap` for a homogeneous
    /// representation with no negative coefficients. Coefficients no lower
    /// than the clamp tolerance are snapped to zero; anything below it keeps
    /// the search going.
    pub fn nonneg_rewrite(&self, cap: Option<u32>) -> Result<PolynomialMap, DepfunError> {
        let degree = self.degree();
        let cap = cap.unwrap_or_else(|| {
            (degree.saturating_mul(REWRITE_DEGREE_FACTOR)).max(REWRITE_DEGREE_MIN)
        });
        if cap < degree {
            return Err(DepfunError::DegreeTooLow {
                degree,
                target: cap,
            });
        }
        for target in degree..=cap {
            let candidate = self.homogenize(target)?;
            if candidate.min_coefficient() >= -COEFF_CLAMP {
                let clamped = candidate
                    .terms
                    .into_iter()
                    .map(|(e, c)| (e, c.into_iter().map(|x| x.max(0.0)).collect()));
                return PolynomialMap::new(self.num_actions, clamped);
            }
        }
        Err(DepfunError::RewriteCapExhausted { cap })
    }

    /// Factors out the largest monomial dividing every term of one output
    /// component: returns the exponent vector of the factor and the
    /// remainder polynomial for that component, or None when the component
    /// is identically zero.
    pub fn factor_component(&self, output: usize) -> Option<(Vec<u32>, PolynomialMap)> {
        let mut common: Option<Vec<u32>> = None;
        for (exponents, coefficients) in &self.terms {
            if coefficients[output] == 0.0 {
                continue;
            }
            common = Some(match common {
                None => exponents.clone(),
                Some(prev) => prev
                    .iter()
                    .zip(exponents.iter())
                    .map(|(&a, &b)| a.min(b))
                    .collect(),
            });
        }
        let common = common?;
        let mut remainder: BTreeMap<Vec<u32>, Vec<f64>> = BTreeMap::new();
        for (exponents, coefficients) in &self.terms {
            if coefficients[output] == 0.0 {
                continue;
            }
            let reduced: Vec<u32> = exponents
                .iter()
                .zip(common.iter())
                .map(|(&e, &c)| e - c)
                .collect();
            let mut coef = vec![0.0; self.num_actions];
            coef[output] = coefficients[output];
            let entry = remainder
                .entry(reduced)
                .or_insert_with(|| vec![0.0; self.num_actions]);
            for (acc, c) in entry.iter_mut().zip(coef.iter()) {
                *acc += c;
            }
        }
        Some((
            common,
            PolynomialMap {
                num_actions: self.num_actions,
                terms: remainder,
            },
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::simplex_grid;

    // First component 1/6 + 2 p^2 - (4/3) p^3 in p = probs[0], second the
    // complement; a running example across the crate.
    pub(crate) fn cubic_example() -> PolynomialMap {
        PolynomialMap::new(
            2,
            vec![
                (vec![0, 0], vec![1.0 / 6.0, 5.0 / 6.0]),
                (vec![2, 0], vec![2.0, -2.0]),
                (vec![3, 0], vec![-4.0 / 3.0, 4.0 / 3.0]),
            ],
        )
        .unwrap()
    }

    fn assert_same_on_grid(a: &PolynomialMap, b: &PolynomialMap, tol: f64) {
        for point in simplex_grid(a.num_actions(), 20) {
            let va = a.eval_raw(point.probs());
            let vb = b.eval_raw(point.probs());
            for (x, y) in va.iter().zip(vb.iter()) {
                assert!((x - y).abs() <= tol, "{x} vs {y} at {:?}", point.probs());
            }
        }
    }

    #[test]
    fn homogenization_preserves_values() {
        let poly = cubic_example();
        assert_eq!(poly.degree(), 3);
        let hom = poly.homogenize(3).unwrap();
        assert_eq!(hom.homogeneous_degree(), Some(3));
        assert_same_on_grid(&poly, &hom, 1e-12);
        let higher = poly.homogenize(6).unwrap();
        assert_same_on_grid(&poly, &higher, 1e-12);
    }

    #[test]
    fn cubic_homogenization_coefficients() {
        // In (p, q) with q = 1 - p the first component becomes
        // (5/6) p^3 + (5/2) p^2 q + (1/2) p q^2 + (1/6) q^3.
        let hom = cubic_example().homogenize(3).unwrap();
        let get = |e: &[u32]| hom.terms.get(e).unwrap().clone();
        let tol = 1e-12;
        assert!((get(&[3, 0])[0] - 5.0 / 6.0).abs() < tol);
        assert!((get(&[2, 1])[0] - 5.0 / 2.0).abs() < tol);
        assert!((get(&[1, 2])[0] - 1.0 / 2.0).abs() < tol);
        assert!((get(&[0, 3])[0] - 1.0 / 6.0).abs() < tol);
        assert!((get(&[3, 0])[1] - 1.0 / 6.0).abs() < tol);
        assert!((get(&[2, 1])[1] - 1.0 / 2.0).abs() < tol);
        assert!((get(&[1, 2])[1] - 5.0 / 2.0).abs() < tol);
        assert!((get(&[0, 3])[1] - 5.0 / 6.0).abs() < tol);
    }

    #[test]
    fn rewrite_returns_nonnegative_when_possible() {
        let rewritten = cubic_example().nonneg_rewrite(None).unwrap();
        assert!(rewritten.min_coefficient() >= 0.0);
        assert_same_on_grid(&cubic_example(), &rewritten, 1e-10);
    }

    #[test]
    fn rewrite_fails_for_interior_boundary_toucher() {
        // (4pq, 1 - 4pq): the second component vanishes at the interior
        // point p = q = 1/2, so no degree admits nonnegative coefficients.
        let poly = PolynomialMap::new(
            2,
            vec![
                (vec![0, 0], vec![0.0, 1.0]),
                (vec![1, 1], vec![4.0, -4.0]),
            ],
        )
        .unwrap();
        let err = poly.nonneg_rewrite(Some(40)).unwrap_err();
        assert!(matches!(err, DepfunError::RewriteCapExhausted { cap: 40 }));
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let poly = cubic_example();
        let at = [0.3, 0.7];
        let jac = poly.jacobian(&at);
        let h = 1e-6;
        for var in 0..2 {
            let mut up = at;
            let mut down = at;
            up[var] += h;
            down[var] -= h;
            let fu = poly.eval_raw(&up);
            let fd = poly.eval_raw(&down);
            for out in 0..2 {
                let fd_val = (fu[out] - fd[out]) / (2.0 * h);
                assert!((jac[out][var] - fd_val).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn factoring_strips_common_monomial() {
        // p^2 q + p^3 = p^2 (q + p)
        let poly = PolynomialMap::new(
            2,
            vec![
                (vec![2, 1], vec![1.0, 0.0]),
                (vec![3, 0], vec![1.0, 0.0]),
                (vec![0, 0], vec![0.0, 1.0]),
            ],
        )
        .unwrap();
        let (factor, remainder) = poly.factor_component(0).unwrap();
        assert_eq!(factor, vec![2, 0]);
        let keys: Vec<_> = remainder
            .terms()
            .filter(|(_, c)| c[0] != 0.0)
            .map(|(e, _)| e.clone())
            .collect();
        assert_eq!(keys, vec![vec![0, 1], vec![1, 0]]);
    }
}
