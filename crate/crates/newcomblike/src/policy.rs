//! Points and directions on the action simplex.
//!
//! A [`Policy`] is a probability distribution over a fixed, ordered action
//! set. A [`PolicyDelta`] is a signed direction tangent to the simplex: its
//! entries sum to zero. Derivative code throughout the crate moves along
//! directions of the form `vertex(a) - policy`, so both types appear in
//! every module above this one.

use rand::Rng;
use serde::de::{self, Deserializer, SeqAccess, Visitor};
use serde::ser::{SerializeSeq, Serializer};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tolerances::{DELTA_SUM, POLICY_SUM_RENORM, POLICY_SUM_STRICT, VISIT_POSITIVE};

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("probability vector is empty")]
    Empty,
    #[error("entry {index} is {value}, which is not a probability")]
    BadEntry { index: usize, value: f64 },
    #[error("entries sum to {sum}, outside the accepted window around 1")]
    BadSum { sum: f64 },
    #[error("direction entries sum to {sum}, not 0")]
    BadDirectionSum { sum: f64 },
    #[error("direction entry {index} is not finite")]
    BadDirectionEntry { index: usize },
    #[error("action {action} out of range for {num_actions} actions")]
    ActionRange { action: usize, num_actions: usize },
}

/// A probability distribution over actions. Entries are nonnegative and sum
/// to 1 within [`POLICY_SUM_STRICT`].
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    probs: Vec<f64>,
}

impl Policy {
    /// Accepts a vector already on the simplex. The sum must be within
    /// [`POLICY_SUM_STRICT`] of 1; entries are kept bit-for-bit.
    pub fn new(probs: Vec<f64>) -> Result<Self, PolicyError> {
        Self::check_entries(&probs, 0.0)?;
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > POLICY_SUM_STRICT {
            return Err(PolicyError::BadSum { sum });
        }
        Ok(Policy { probs })
    }

    /// Accepts a vector close to the simplex: entries no more negative than
    /// [`POLICY_SUM_RENORM`] are clamped to zero, and a sum within
    /// [`POLICY_SUM_RENORM`] of 1 is rescaled to exactly 1. A vector already
    /// within the strict window is kept bit-for-bit.
    pub fn renormalized(probs: Vec<f64>) -> Result<Self, PolicyError> {
        Self::check_entries(&probs, POLICY_SUM_RENORM)?;
        let mut probs = probs;
        for p in probs.iter_mut() {
            if *p < 0.0 {
                *p = 0.0;
            }
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > POLICY_SUM_RENORM {
            return Err(PolicyError::BadSum { sum });
        }
        if (sum - 1.0).abs() > POLICY_SUM_STRICT {
            for p in probs.iter_mut() {
                *p /= sum;
            }
        }
        Ok(Policy { probs })
    }

    fn check_entries(probs: &[f64], slack: f64) -> Result<(), PolicyError> {
        if probs.is_empty() {
            return Err(PolicyError::Empty);
        }
        for (index, &value) in probs.iter().enumerate() {
            if !value.is_finite() || value < -slack || value > 1.0 + slack {
                return Err(PolicyError::BadEntry { index, value });
            }
        }
        Ok(())
    }

    /// The policy that plays `action` with certainty.
    pub fn pure(action: usize, num_actions: usize) -> Self {
        assert!(action < num_actions, "action index out of range");
        let mut probs = vec![0.0; num_actions];
        probs[action] = 1.0;
        Policy { probs }
    }

    pub fn uniform(num_actions: usize) -> Self {
        assert!(num_actions > 0);
        Policy {
            probs: vec![1.0 / num_actions as f64; num_actions],
        }
    }

    /// Draws a point uniformly from the simplex interior.
    pub fn sample_uniform<R: Rng>(num_actions: usize, rng: &mut R) -> Self {
        assert!(num_actions > 0);
        // Exponential spacings normalize to a flat Dirichlet.
        let mut probs: Vec<f64> = (0..num_actions)
            .map(|_| -f64::ln(1.0 - rng.gen::<f64>()))
            .collect();
        let sum: f64 = probs.iter().sum();
        for p in probs.iter_mut() {
            *p /= sum;
        }
        Policy { probs }
    }

    pub fn num_actions(&self) -> usize {
        self.probs.len()
    }

    pub fn prob(&self, action: usize) -> f64 {
        self.probs[action]
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn into_probs(self) -> Vec<f64> {
        self.probs
    }

    /// Actions with probability above the crate-wide positivity floor.
    pub fn support(&self) -> Vec<usize> {
        self.probs
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > VISIT_POSITIVE)
            .map(|(a, _)| a)
            .collect()
    }

    /// The single supported action, when there is exactly one.
    pub fn as_vertex(&self) -> Option<usize> {
        let support = self.support();
        if support.len() == 1 {
            Some(support[0])
        } else {
            None
        }
    }

    pub fn l2_distance(&self, other: &Policy) -> f64 {
        self.probs
            .iter()
            .zip(other.probs.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    pub fn linf_distance(&self, other: &Policy) -> f64 {
        self.probs
            .iter()
            .zip(other.probs.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// The convex combination `(1 - step) * self + step * vertex(action)`.
    /// This is the curve along which simplex directional derivatives are
    /// taken, so it must stay exactly on the simplex.
    pub fn toward_vertex(&self, action: usize, step: f64) -> Policy {
        debug_assert!((0.0..=1.0).contains(&step));
        let probs = self
            .probs
            .iter()
            .enumerate()
            .map(|(a, &p)| p * (1.0 - step) + if a == action { step } else { 0.0 })
            .collect();
        Policy { probs }
    }

    /// The convex combination `(1 - weight) * self + weight * other`.
    pub fn mix(&self, other: &Policy, weight: f64) -> Policy {
        debug_assert_eq!(self.num_actions(), other.num_actions());
        let probs = self
            .probs
            .iter()
            .zip(other.probs.iter())
            .map(|(&a, &b)| a * (1.0 - weight) + b * weight)
            .collect();
        Policy { probs }
    }
}

impl Serialize for Policy {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut seq = serializer.serialize_seq(Some(self.probs.len()))?;
        for p in &self.probs {
            seq.serialize_element(p)?;
        }
        seq.end()
    }
}

impl Serialize for PolicyDelta {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut seq = serializer.serialize_seq(Some(self.signed.len()))?;
        for d in &self.signed {
            seq.serialize_element(d)?;
        }
        seq.end()
    }
}

impl<'de> Deserialize<'de> for Policy {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct PolicyVisitor;
        impl<'de> Visitor<'de> for PolicyVisitor {
            type Value = Policy;
            fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                f.write_str("a probability vector")
            }
            fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> Result<Policy, A::Error> {
                let mut probs = Vec::new();
                while let Some(p) = seq.next_element::<f64>()? {
                    probs.push(p);
                }
                Policy::renormalized(probs).map_err(de::Error::custom)
            }
        }
        deserializer.deserialize_seq(PolicyVisitor)
    }
}

/// A signed direction tangent to the simplex: entries sum to zero within
/// [`DELTA_SUM`].
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyDelta {
    signed: Vec<f64>,
}

impl PolicyDelta {
    pub fn new(signed: Vec<f64>) -> Result<Self, PolicyError> {
        if signed.is_empty() {
            return Err(PolicyError::Empty);
        }
        for (index, v) in signed.iter().enumerate() {
            if !v.is_finite() {
                return Err(PolicyError::BadDirectionEntry { index });
            }
        }
        let sum: f64 = signed.iter().sum();
        if sum.abs() > DELTA_SUM {
            return Err(PolicyError::BadDirectionSum { sum });
        }
        Ok(PolicyDelta { signed })
    }

    /// Builds a direction from entries that carry numerical drift, removing
    /// the mean so the sum is exactly zero. Used for finite-difference
    /// results, where the drift is roundoff rather than signal.
    pub fn recentered(mut signed: Vec<f64>) -> Result<Self, PolicyError> {
        if signed.is_empty() {
            return Err(PolicyError::Empty);
        }
        for (index, v) in signed.iter().enumerate() {
            if !v.is_finite() {
                return Err(PolicyError::BadDirectionEntry { index });
            }
        }
        let mean: f64 = signed.iter().sum::<f64>() / signed.len() as f64;
        for v in signed.iter_mut() {
            *v -= mean;
        }
        Ok(PolicyDelta { signed })
    }

    pub fn zero(num_actions: usize) -> Self {
        PolicyDelta {
            signed: vec![0.0; num_actions],
        }
    }

    /// The direction from `from` toward the vertex of `action`.
    pub fn toward_vertex(from: &Policy, action: usize) -> Self {
        let signed = from
            .probs()
            .iter()
            .enumerate()
            .map(|(a, &p)| if a == action { 1.0 - p } else { -p })
            .collect();
        PolicyDelta { signed }
    }

    pub fn num_actions(&self) -> usize {
        self.signed.len()
    }

    pub fn components(&self) -> &[f64] {
        &self.signed
    }

    pub fn get(&self, action: usize) -> f64 {
        self.signed[action]
    }

    pub fn scaled(&self, factor: f64) -> PolicyDelta {
        PolicyDelta {
            signed: self.signed.iter().map(|v| v * factor).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.signed.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }
}

/// Deterministic grid over the simplex with the given denominator: all
/// points whose entries are integer multiples of `1 / resolution`.
pub fn simplex_grid(num_actions: usize, resolution: u32) -> Vec<Policy> {
    assert!(num_actions > 0 && resolution > 0);
    let mut out = Vec::new();
    let mut counts = vec![0u32; num_actions];
    fill_grid(&mut out, &mut counts, 0, resolution, resolution);
    out
}

fn fill_grid(out: &mut Vec<Policy>, counts: &mut Vec<u32>, pos: usize, left: u32, resolution: u32) {
    if pos + 1 == counts.len() {
        counts[pos] = left;
        let probs = counts
            .iter()
            .map(|&c| c as f64 / resolution as f64)
            .collect();
        out.push(Policy { probs });
        return;
    }
    for take in (0..=left).rev() {
        counts[pos] = take;
        fill_grid(out, counts, pos + 1, left - take, resolution);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn strict_keeps_bits() {
        let p = Policy::new(vec![0.25, 0.75]).unwrap();
        assert_eq!(p.probs(), &[0.25, 0.75]);
    }

    #[test]
    fn strict_rejects_loose_sum() {
        assert!(Policy::new(vec![0.25, 0.75 + 1e-10]).is_err());
    }

    #[test]
    fn renormalized_rescales_loose_sum() {
        let p = Policy::renormalized(vec![0.25, 0.75 + 1e-10]).unwrap();
        let sum: f64 = p.probs().iter().sum();
        assert!((sum - 1.0).abs() <= POLICY_SUM_STRICT);
    }

    #[test]
    fn renormalized_rejects_malformed() {
        assert!(Policy::renormalized(vec![0.3, 0.3]).is_err());
        assert!(Policy::renormalized(vec![0.5, 0.5, f64::NAN]).is_err());
        assert!(Policy::renormalized(vec![1.2, -0.2]).is_err());
    }

    #[test]
    fn renormalized_clamps_tiny_negatives() {
        let p = Policy::renormalized(vec![1.0 + 1e-10, -1e-10]).unwrap();
        assert!(p.prob(1) == 0.0);
        assert_eq!(p.as_vertex(), Some(0));
    }

    #[test]
    fn toward_vertex_stays_on_simplex() {
        let p = Policy::new(vec![0.2, 0.3, 0.5]).unwrap();
        let q = p.toward_vertex(1, 0.25);
        let sum: f64 = q.probs().iter().sum();
        assert!((sum - 1.0).abs() < 1e-15);
        assert!((q.prob(1) - (0.3 * 0.75 + 0.25)).abs() < 1e-15);
    }

    #[test]
    fn delta_requires_zero_sum() {
        assert!(PolicyDelta::new(vec![0.5, -0.5]).is_ok());
        assert!(PolicyDelta::new(vec![0.5, -0.4]).is_err());
        let d = PolicyDelta::recentered(vec![0.5, -0.4]).unwrap();
        assert!(d.components().iter().sum::<f64>().abs() < 1e-15);
    }

    #[test]
    fn grid_covers_simplex() {
        let grid = simplex_grid(3, 4);
        // Points with entries in multiples of 1/4 summing to 1: C(6, 2) = 15.
        assert_eq!(grid.len(), 15);
        for p in &grid {
            let sum: f64 = p.probs().iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn uniform_samples_are_policies() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let p = Policy::sample_uniform(4, &mut rng);
            let sum: f64 = p.probs().iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
            assert!(p.probs().iter().all(|&x| x >= 0.0));
        }
    }

    proptest! {
        #[test]
        fn mixing_stays_on_simplex(w in 0.0f64..1.0, a in 1e-6f64..1.0, b in 1e-6f64..1.0) {
            let p = Policy::renormalized(vec![a / (a + b), b / (a + b)]).unwrap();
            let q = Policy::uniform(2);
            let m = p.mix(&q, w);
            let sum: f64 = m.probs().iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-12);
        }
    }
}
