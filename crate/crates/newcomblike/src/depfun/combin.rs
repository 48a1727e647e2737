//! Multiset enumeration and multinomial weights used by the polynomial and
//! sampler code. Counts are exact in `u128`; overflow is surfaced rather
//! than silently rounded.

use crate::tolerances::COMPOSITION_CAP;

use super::DepfunError;

/// All vectors of `parts` nonnegative integers summing to `total`, in
/// lexicographically decreasing order of the first coordinate.
pub(crate) fn compositions(total: u32, parts: usize) -> Vec<Vec<u32>> {
    assert!(parts > 0);
    let mut out = Vec::new();
    let mut current = vec![0u32; parts];
    fill(&mut out, &mut current, 0, total);
    out
}

fn fill(out: &mut Vec<Vec<u32>>, current: &mut Vec<u32>, pos: usize, left: u32) {
    if pos + 1 == current.len() {
        current[pos] = left;
        out.push(current.clone());
        return;
    }
    for take in (0..=left).rev() {
        current[pos] = take;
        fill(out, current, pos + 1, left - take);
    }
}

/// Number of compositions of `total` into `parts` parts, `C(total + parts - 1, parts - 1)`.
pub(crate) fn count_compositions(total: u32, parts: usize) -> Result<u128, DepfunError> {
    binomial(total as u128 + parts as u128 - 1, parts as u128 - 1)
}

/// Guards an enumeration against the crate-wide composition cap.
pub(crate) fn check_composition_cap(total: u32, parts: usize) -> Result<(), DepfunError> {
    let needed = count_compositions(total, parts)?;
    if needed > COMPOSITION_CAP {
        return Err(DepfunError::EnumerationCap {
            needed,
            cap: COMPOSITION_CAP,
        });
    }
    Ok(())
}

fn binomial(n: u128, k: u128) -> Result<u128, DepfunError> {
    let k = k.min(n - k.min(n));
    let mut result: u128 = 1;
    for i in 0..k {
        result = result
            .checked_mul(n - i)
            .ok_or(DepfunError::CountOverflow)?;
        result /= i + 1;
    }
    Ok(result)
}

/// Exact multinomial coefficient `total! / (m_1! ... m_k!)` where
/// `total = sum(parts)`, as a float.
pub(crate) fn multinomial(parts: &[u32]) -> Result<f64, DepfunError> {
    let mut acc: u128 = 1;
    let mut running: u128 = 0;
    for &m in parts {
        running += m as u128;
        let choose = binomial(running, m as u128)?;
        acc = acc.checked_mul(choose).ok_or(DepfunError::CountOverflow)?;
    }
    Ok(acc as f64)
}

/// Probability of drawing the multiset `counts` in `sum(counts)` iid draws
/// from `probs`: multinomial weight times the product of powers.
pub(crate) fn multiset_weight(counts: &[u32], probs: &[f64]) -> Result<f64, DepfunError> {
    let mut w = multinomial(counts)?;
    for (&c, &p) in counts.iter().zip(probs.iter()) {
        if c > 0 {
            w *= p.powi(c as i32);
        }
    }
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn composition_counts_match_enumeration() {
        for (total, parts) in [(4u32, 2usize), (3, 3), (5, 4), (0, 3)] {
            let listed = compositions(total, parts);
            let counted = count_compositions(total, parts).unwrap();
            assert_eq!(listed.len() as u128, counted);
            for c in &listed {
                assert_eq!(c.iter().sum::<u32>(), total);
            }
        }
    }

    #[test]
    fn multinomial_values() {
        assert_eq!(multinomial(&[2, 1]).unwrap(), 3.0);
        assert_eq!(multinomial(&[2, 2]).unwrap(), 6.0);
        assert_eq!(multinomial(&[1, 1, 1]).unwrap(), 6.0);
        assert_eq!(multinomial(&[4, 0, 0]).unwrap(), 1.0);
        assert_eq!(multinomial(&[0]).unwrap(), 1.0);
    }

    #[test]
    fn multiset_weights_sum_to_one() {
        let probs = [0.2, 0.5, 0.3];
        let total: f64 = compositions(5, 3)
            .iter()
            .map(|m| multiset_weight(m, &probs).unwrap())
            .sum();
        assert!((total - 1.0).abs() < 1e-12);
    }
}
