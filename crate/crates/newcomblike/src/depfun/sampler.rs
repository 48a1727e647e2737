//! Simulation functions: dependants that draw a fixed number of iid samples
//! from the agent's policy and answer with a distribution that depends only
//! on the drawn tuple.
//!
//! Evaluation is exact: the tuple (or multiset) space is enumerated and
//! weighted by the corresponding product (or multinomial) probabilities.

use std::collections::BTreeMap;

use crate::policy::{Policy, PolicyDelta};
use crate::tolerances::{COMPOSITION_CAP, POLY_GRID_EQ, SAMPLER_ROW_SUM};

use super::combin::{check_composition_cap, compositions, multinomial, multiset_weight};
use super::poly::PolynomialMap;
use super::DepfunError;

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationFunction {
    num_actions: usize,
    sample_count: usize,
    table: SimTable,
}

#[derive(Debug, Clone, PartialEq)]
enum SimTable {
    /// One entry per ordered sample tuple.
    Tuples(BTreeMap<Vec<u8>, Policy>),
    /// One entry per sample multiset (count vector over actions); the
    /// response provably ignores sample order.
    Multisets(BTreeMap<Vec<u32>, Policy>),
}

/// A borrowed view of a simulation table in its native representation:
/// ordered sample tuples, or count vectors over actions.
#[derive(Debug)]
pub enum TableView<'a> {
    Tuples(&'a BTreeMap<Vec<u8>, Policy>),
    Multisets(&'a BTreeMap<Vec<u32>, Policy>),
}

impl SimulationFunction {
    /// Builds from a complete table over ordered sample tuples. A table
    /// whose entries depend only on the sample multiset is canonicalized to
    /// the multiset representation.
    pub fn from_tuples(
        num_actions: usize,
        sample_count: usize,
        table: BTreeMap<Vec<u8>, Policy>,
    ) -> Result<Self, DepfunError> {
        if num_actions == 0 || num_actions > u8::MAX as usize || sample_count == 0 {
            return Err(DepfunError::BadShape);
        }
        let expected = (num_actions as u128)
            .checked_pow(sample_count as u32)
            .ok_or(DepfunError::CountOverflow)?;
        if expected > COMPOSITION_CAP {
            return Err(DepfunError::EnumerationCap {
                needed: expected,
                cap: COMPOSITION_CAP,
            });
        }
        if table.len() as u128 != expected {
            return Err(DepfunError::IncompleteTable {
                detail: format!("{} entries, expected {}", table.len(), expected),
            });
        }
        for (tuple, value) in &table {
            if tuple.len() != sample_count || tuple.iter().any(|&a| a as usize >= num_actions) {
                return Err(DepfunError::BadTableKey {
                    key: format!("{tuple:?}"),
                });
            }
            if value.num_actions() != num_actions {
                return Err(DepfunError::Arity {
                    expected: num_actions,
                    found: value.num_actions(),
                });
            }
        }
        // Canonicalize order-insensitive tables.
        let mut by_multiset: BTreeMap<Vec<u32>, Policy> = BTreeMap::new();
        let mut symmetric = true;
        'outer: for (tuple, value) in &table {
            let counts = tuple_counts(tuple, num_actions);
            match by_multiset.get(&counts) {
                Some(existing) if existing == value => {}
                Some(_) => {
                    symmetric = false;
                    break 'outer;
                }
                None => {
                    by_multiset.insert(counts, value.clone());
                }
            }
        }
        let table = if symmetric {
            SimTable::Multisets(by_multiset)
        } else {
            SimTable::Tuples(table)
        };
        Ok(SimulationFunction {
            num_actions,
            sample_count,
            table,
        })
    }

    /// Builds from a complete table over sample multisets (count vectors).
    pub fn from_multisets(
        num_actions: usize,
        sample_count: usize,
        table: BTreeMap<Vec<u32>, Policy>,
    ) -> Result<Self, DepfunError> {
        if num_actions == 0 || sample_count == 0 {
            return Err(DepfunError::BadShape);
        }
        check_composition_cap(sample_count as u32, num_actions)?;
        let expected = super::combin::count_compositions(sample_count as u32, num_actions)?;
        if table.len() as u128 != expected {
            return Err(DepfunError::IncompleteTable {
                detail: format!("{} entries, expected {}", table.len(), expected),
            });
        }
        for (counts, value) in &table {
            if counts.len() != num_actions
                || counts.iter().map(|&c| c as u64).sum::<u64>() != sample_count as u64
            {
                return Err(DepfunError::BadTableKey {
                    key: format!("{counts:?}"),
                });
            }
            if value.num_actions() != num_actions {
                return Err(DepfunError::Arity {
                    expected: num_actions,
                    found: value.num_actions(),
                });
            }
        }
        Ok(SimulationFunction {
            num_actions,
            sample_count,
            table: SimTable::Multisets(table),
        })
    }

    /// One sample, answered verbatim.
    pub fn identity(num_actions: usize) -> Self {
        let table = (0..num_actions)
            .map(|a| (vec![a as u8], Policy::pure(a, num_actions)))
            .collect();
        SimulationFunction::from_tuples(num_actions, 1, table)
            .expect("identity table is complete")
    }

    /// Ignores its samples and answers a fixed distribution.
    pub fn constant(value: Policy, sample_count: usize) -> Result<Self, DepfunError> {
        let num_actions = value.num_actions();
        check_composition_cap(sample_count as u32, num_actions)?;
        let table = compositions(sample_count as u32, num_actions)
            .into_iter()
            .map(|m| (m, value.clone()))
            .collect();
        SimulationFunction::from_multisets(num_actions, sample_count, table)
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn sample_count(&self) -> usize {
        self.sample_count
    }

    /// Whether the response provably ignores sample order.
    pub fn is_symmetric(&self) -> bool {
        matches!(self.table, SimTable::Multisets(_))
    }

    /// Read access to the table in its native representation.
    pub fn table_view(&self) -> TableView<'_> {
        match &self.table {
            SimTable::Tuples(map) => TableView::Tuples(map),
            SimTable::Multisets(map) => TableView::Multisets(map),
        }
    }

    /// The response to one concrete ordered sample tuple.
    pub fn response(&self, tuple: &[u8]) -> Result<&Policy, DepfunError> {
        if tuple.len() != self.sample_count
            || tuple.iter().any(|&a| a as usize >= self.num_actions)
        {
            return Err(DepfunError::BadTableKey {
                key: format!("{tuple:?}"),
            });
        }
        match &self.table {
            SimTable::Tuples(map) => map.get(tuple).ok_or_else(|| DepfunError::IncompleteTable {
                detail: format!("no entry for {tuple:?}"),
            }),
            SimTable::Multisets(map) => {
                let counts = tuple_counts(tuple, self.num_actions);
                map.get(&counts).ok_or_else(|| DepfunError::IncompleteTable {
                    detail: format!("no entry for {counts:?}"),
                })
            }
        }
    }

    /// Exact expected response under iid samples from `at`.
    pub fn eval(&self, at: &Policy) -> Result<Policy, DepfunError> {
        if at.num_actions() != self.num_actions {
            return Err(DepfunError::Arity {
                expected: self.num_actions,
                found: at.num_actions(),
            });
        }
        let mut acc = vec![0.0; self.num_actions];
        match &self.table {
            SimTable::Multisets(map) => {
                for (counts, value) in map {
                    let w = multiset_weight(counts, at.probs())?;
                    accumulate(&mut acc, value.probs(), w);
                }
            }
            SimTable::Tuples(map) => {
                for (tuple, value) in map {
                    let w: f64 = tuple.iter().map(|&a| at.prob(a as usize)).product();
                    accumulate(&mut acc, value.probs(), w);
                }
            }
        }
        Ok(Policy::renormalized(acc)?)
    }

    /// Expected response given that one distinguished sample slot drew
    /// `action` while the remaining slots are iid from `at`, averaged over
    /// which slot is distinguished.
    pub fn slot_conditional(&self, action: usize, at: &Policy) -> Result<Vec<f64>, DepfunError> {
        if action >= self.num_actions {
            return Err(DepfunError::Arity {
                expected: self.num_actions,
                found: action,
            });
        }
        let mut acc = vec![0.0; self.num_actions];
        match &self.table {
            SimTable::Multisets(map) => {
                for rest in compositions(self.sample_count as u32 - 1, self.num_actions) {
                    let w = multiset_weight(&rest, at.probs())?;
                    let mut full = rest.clone();
                    full[action] += 1;
                    let value = map.get(&full).ok_or_else(|| DepfunError::IncompleteTable {
                        detail: format!("no entry for {full:?}"),
                    })?;
                    accumulate(&mut acc, value.probs(), w);
                }
            }
            SimTable::Tuples(map) => {
                for (tuple, value) in map {
                    for slot in 0..self.sample_count {
                        if tuple[slot] as usize != action {
                            continue;
                        }
                        let mut w = 1.0;
                        for (i, &sample) in tuple.iter().enumerate() {
                            if i != slot {
                                w *= at.prob(sample as usize);
                            }
                        }
                        accumulate(&mut acc, value.probs(), w);
                    }
                }
                for v in acc.iter_mut() {
                    *v /= self.sample_count as f64;
                }
            }
        }
        Ok(acc)
    }

    /// First-order response along the direction from `at` toward the vertex
    /// of `action`: the sample count times the gap between the slot
    /// conditional and the unconditional mean.
    pub fn delta(&self, action: usize, at: &Policy) -> Result<PolicyDelta, DepfunError> {
        let conditional = self.slot_conditional(action, at)?;
        let mean = self.eval(at)?;
        let signed: Vec<f64> = conditional
            .iter()
            .zip(mean.probs().iter())
            .map(|(c, m)| self.sample_count as f64 * (c - m))
            .collect();
        Ok(PolicyDelta::recentered(signed)?)
    }

    /// The expected response as an explicit homogeneous polynomial of degree
    /// equal to the sample count, with nonnegative coefficients.
    pub fn to_polynomial(&self) -> Result<PolynomialMap, DepfunError> {
        let mut terms: BTreeMap<Vec<u32>, Vec<f64>> = BTreeMap::new();
        match &self.table {
            SimTable::Multisets(map) => {
                for (counts, value) in map {
                    let w = multinomial(counts)?;
                    let coef = value.probs().iter().map(|p| w * p).collect();
                    terms.insert(counts.clone(), coef);
                }
            }
            SimTable::Tuples(map) => {
                for (tuple, value) in map {
                    let counts = tuple_counts(tuple, self.num_actions);
                    let entry = terms
                        .entry(counts)
                        .or_insert_with(|| vec![0.0; self.num_actions]);
                    for (acc, &p) in entry.iter_mut().zip(value.probs().iter()) {
                        *acc += p;
                    }
                }
            }
        }
        PolynomialMap::new(self.num_actions, terms)
    }

    /// Adds one extra sample slot whose draw is ignored. The expected
    /// response is unchanged; the sample count is not.
    pub fn with_ignored_slot(&self) -> Result<SimulationFunction, DepfunError> {
        let n = self.sample_count + 1;
        let expected = (self.num_actions as u128)
            .checked_pow(n as u32)
            .ok_or(DepfunError::CountOverflow)?;
        if expected > COMPOSITION_CAP {
            return Err(DepfunError::EnumerationCap {
                needed: expected,
                cap: COMPOSITION_CAP,
            });
        }
        let mut table = BTreeMap::new();
        let mut tuple = vec![0u8; n];
        loop {
            let value = self.response(&tuple[1..])?.clone();
            table.insert(tuple.clone(), value);
            if !increment(&mut tuple, self.num_actions) {
                break;
            }
        }
        SimulationFunction::from_tuples(self.num_actions, n, table)
    }
}

fn accumulate(acc: &mut [f64], probs: &[f64], weight: f64) {
    for (a, &p) in acc.iter_mut().zip(probs.iter()) {
        *a += weight * p;
    }
}

fn tuple_counts(tuple: &[u8], num_actions: usize) -> Vec<u32> {
    let mut counts = vec![0u32; num_actions];
    for &a in tuple {
        counts[a as usize] += 1;
    }
    counts
}

fn increment(tuple: &mut [u8], base: usize) -> bool {
    for slot in (0..tuple.len()).rev() {
        if (tuple[slot] as usize) + 1 < base {
            tuple[slot] += 1;
            for later in tuple.iter_mut().skip(slot + 1) {
                *later = 0;
            }
            return true;
        }
        tuple[slot] = 0;
    }
    false
}

/// Converts a homogeneous polynomial with nonnegative coefficients into the
/// sampler that realizes it: each coefficient row must sum to its multinomial
/// weight, and the response to a multiset is the row divided by that weight.
pub fn sampler_from_polynomial(poly: &PolynomialMap) -> Result<SimulationFunction, DepfunError> {
    let degree = poly
        .homogeneous_degree()
        .ok_or(DepfunError::NotHomogeneous)?;
    if degree == 0 {
        return Err(DepfunError::BadShape);
    }
    let k = poly.num_actions();
    check_composition_cap(degree, k)?;
    let mut rows: BTreeMap<Vec<u32>, Vec<f64>> = BTreeMap::new();
    for (exponents, coefficients) in poly.terms() {
        if let Some(&worst) = coefficients
            .iter()
            .filter(|c| **c < -SAMPLER_ROW_SUM)
            .min_by(|a, b| a.partial_cmp(b).unwrap())
        {
            return Err(DepfunError::NegativeCoefficient {
                exponents: exponents.clone(),
                value: worst,
            });
        }
        rows.insert(exponents.clone(), coefficients.clone());
    }
    let mut table = BTreeMap::new();
    for counts in compositions(degree, k) {
        let weight = multinomial(&counts)?;
        let row = rows.get(&counts).cloned().unwrap_or_else(|| vec![0.0; k]);
        let sum: f64 = row.iter().sum();
        if (sum - weight).abs() > SAMPLER_ROW_SUM {
            return Err(DepfunError::NotSimplexMap {
                exponents: counts,
                sum,
                expected: weight,
            });
        }
        let response = Policy::renormalized(row.iter().map(|c| (c / weight).max(0.0)).collect())?;
        table.insert(counts, response);
    }
    let sampler = SimulationFunction::from_multisets(k, degree as usize, table)?;
    // The construction is exact in theory; guard against float surprises by
    // re-evaluating on the check grid.
    for point in crate::policy::simplex_grid(k, crate::tolerances::RANGE_GRID_RESOLUTION) {
        let direct = poly.eval_raw(point.probs());
        let via = sampler.eval(&point)?;
        for (d, v) in direct.iter().zip(via.probs().iter()) {
            if (d - v).abs() > POLY_GRID_EQ {
                return Err(DepfunError::NotSimplexMap {
                    exponents: vec![],
                    sum: *d,
                    expected: *v,
                });
            }
        }
    }
    Ok(sampler)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::simplex_grid;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Three samples; answer (5/6, 1/6) on a sample-majority of action 0,
    /// (1/6, 5/6) otherwise.
    pub(crate) fn majority_of_three() -> SimulationFunction {
        let lean0 = Policy::new(vec![5.0 / 6.0, 1.0 / 6.0]).unwrap();
        let lean1 = Policy::new(vec![1.0 / 6.0, 5.0 / 6.0]).unwrap();
        let table = [
            (vec![3, 0], lean0.clone()),
            (vec![2, 1], lean0),
            (vec![1, 2], lean1.clone()),
            (vec![0, 3], lean1),
        ]
        .into_iter()
        .collect();
        SimulationFunction::from_multisets(2, 3, table).unwrap()
    }

    #[test]
    fn identity_answers_its_sample() {
        let id = SimulationFunction::identity(3);
        assert_eq!(id.sample_count(), 1);
        let at = Policy::new(vec![0.5, 0.3, 0.2]).unwrap();
        let out = id.eval(&at).unwrap();
        assert!(at.linf_distance(&out) < 1e-15);
    }

    #[test]
    fn symmetric_tuple_table_is_canonicalized() {
        let mut table = BTreeMap::new();
        for t in [[0u8, 0], [0, 1], [1, 0], [1, 1]] {
            let ones = t.iter().filter(|&&a| a == 1).count();
            let p = ones as f64 / 2.0;
            table.insert(t.to_vec(), Policy::renormalized(vec![1.0 - p, p]).unwrap());
        }
        let sim = SimulationFunction::from_tuples(2, 2, table).unwrap();
        assert!(sim.is_symmetric());
    }

    #[test]
    fn order_sensitive_table_stays_tuple_based() {
        let mut table = BTreeMap::new();
        table.insert(vec![0u8, 0], Policy::pure(0, 2));
        table.insert(vec![0u8, 1], Policy::pure(0, 2));
        table.insert(vec![1u8, 0], Policy::pure(1, 2));
        table.insert(vec![1u8, 1], Policy::pure(1, 2));
        let sim = SimulationFunction::from_tuples(2, 2, table).unwrap();
        assert!(!sim.is_symmetric());
        // First slot decides; conditional on the first... averaged over
        // slots, conditioning on action 1 moves the answer halfway.
        let at = Policy::uniform(2);
        let cond = sim.slot_conditional(1, &at).unwrap();
        assert!((cond[1] - 0.75).abs() < 1e-12);
    }

    #[test]
    fn eval_matches_monte_carlo() {
        let sim = majority_of_three();
        let at = Policy::new(vec![0.3, 0.7]).unwrap();
        let exact = sim.eval(&at).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let draws = 100_000;
        let mut acc = vec![0.0; 2];
        for _ in 0..draws {
            let mut counts = vec![0u32; 2];
            for _ in 0..3 {
                let u: f64 = rng.gen();
                let a = if u < at.prob(0) { 0 } else { 1 };
                counts[a] += 1;
            }
            let tuple: Vec<u8> = (0..2)
                .flat_map(|a| std::iter::repeat(a as u8).take(counts[a] as usize))
                .collect();
            let response = sim.response(&tuple).unwrap();
            for (a, p) in acc.iter_mut().zip(response.probs()) {
                *a += p;
            }
        }
        // Per-component standard error is below 1e-3 at this sample size;
        // four standard errors is a comfortable bound.
        for (a, e) in acc.iter().zip(exact.probs()) {
            let empirical = a / draws as f64;
            assert!((empirical - e).abs() < 4e-3, "{empirical} vs {e}");
        }
    }

    #[test]
    fn polynomial_round_trip_is_identity() {
        let sim = majority_of_three();
        let poly = sim.to_polynomial().unwrap();
        assert_eq!(poly.homogeneous_degree(), Some(3));
        let back = sampler_from_polynomial(&poly).unwrap();
        for point in simplex_grid(2, 20) {
            let a = sim.eval(&point).unwrap();
            let b = back.eval(&point).unwrap();
            assert!(a.linf_distance(&b) <= 1e-10);
        }
    }

    #[test]
    fn delta_matches_polynomial_derivative() {
        let sim = majority_of_three();
        let poly = sim.to_polynomial().unwrap();
        for at in [
            Policy::uniform(2),
            Policy::new(vec![0.3, 0.7]).unwrap(),
            Policy::pure(0, 2),
        ] {
            for action in 0..2 {
                let d1 = sim.delta(action, &at).unwrap();
                let d2 = poly.delta_along(action, &at).unwrap();
                for (x, y) in d1.components().iter().zip(d2.components()) {
                    assert!((x - y).abs() < 1e-10, "{x} vs {y}");
                }
            }
        }
    }

    #[test]
    fn ignored_slot_keeps_expectations() {
        let sim = majority_of_three();
        let padded = sim.with_ignored_slot().unwrap();
        assert_eq!(padded.sample_count(), 4);
        for point in simplex_grid(2, 10) {
            let a = sim.eval(&point).unwrap();
            let b = padded.eval(&point).unwrap();
            assert!(a.linf_distance(&b) < 1e-12);
        }
    }

    #[test]
    fn row_sum_mismatch_is_rejected() {
        // Homogeneous degree-2 map whose cross-term row sums to 1.5 rather
        // than the multinomial weight 2.
        let poly = PolynomialMap::new(
            2,
            vec![
                (vec![2, 0], vec![1.0, 0.0]),
                (vec![1, 1], vec![0.75, 0.75]),
                (vec![0, 2], vec![0.25, 0.75]),
            ],
        )
        .unwrap();
        let err = sampler_from_polynomial(&poly).unwrap_err();
        assert!(matches!(err, DepfunError::NotSimplexMap { .. }));
    }
}
