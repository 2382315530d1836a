//! Strongly typical sets, enumerated type class by type class.

use crate::error::{Error, Result};

pub const DEFAULT_DELTA: f64 = 0.1;
/// Largest typical set enumerated.
pub const DEFAULT_TYPICAL_CAP: u128 = 1 << 22;

const EPS: f64 = 1e-9;

/// Allowed count range of every letter: `|N(a)/n - p(a)| <= delta`, and
/// letters of probability zero never occur.
pub fn count_bounds(dist: &[f64], len: usize, delta: f64) -> Vec<(usize, usize)> {
    let n = len as f64;
    dist.iter()
        .map(|&p| {
            if p <= 0.0 {
                return (0, 0);
            }
            let lo = (n * (p - delta) - EPS).ceil().max(0.0) as usize;
            let hi = ((n * (p + delta) + EPS).floor() as usize).min(len);
            (lo, hi)
        })
        .collect()
}

pub fn is_typical(seq: &[u32], dist: &[f64], delta: f64) -> bool {
    let mut counts = vec![0usize; dist.len()];
    for &a in seq {
        match counts.get_mut(a as usize) {
            Some(c) => *c += 1,
            None => return false,
        }
    }
    counts_typical(&counts, &count_bounds(dist, seq.len(), delta))
}

fn counts_typical(counts: &[usize], bounds: &[(usize, usize)]) -> bool {
    counts.iter().zip(bounds).all(|(&c, &(lo, hi))| lo <= c && c <= hi)
}

fn multinomial(counts: &[usize]) -> u128 {
    let mut total = 0u128;
    let mut acc = 1u128;
    for &c in counts {
        for i in 1..=c as u128 {
            total += 1;
            acc = acc.saturating_mul(total) / i;
        }
    }
    acc
}

/// Every count vector inside the bounds summing to `len`.
pub fn type_classes(bounds: &[(usize, usize)], len: usize) -> Vec<Vec<usize>> {
    fn rec(bounds: &[(usize, usize)], left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        let i = cur.len();
        if i == bounds.len() {
            if left == 0 {
                out.push(cur.clone());
            }
            return;
        }
        let rest_max: usize = bounds[i + 1..].iter().map(|b| b.1).sum();
        let (lo, hi) = bounds[i];
        for c in lo..=hi.min(left) {
            if left - c > rest_max {
                continue;
            }
            cur.push(c);
            rec(bounds, left - c, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(bounds, len, &mut Vec::new(), &mut out);
    out
}

/// Number of typical sequences, saturating.
pub fn typical_set_size(dist: &[f64], len: usize, delta: f64) -> u128 {
    type_classes(&count_bounds(dist, len, delta), len)
        .iter()
        .fold(0u128, |acc, t| acc.saturating_add(multinomial(t)))
}

/// All sequences of length `len` over `0..dist.len()` that are strongly
/// typical, in lexicographic order within each type class.
pub fn typical_set(dist: &[f64], len: usize, delta: f64, cap: u128) -> Result<Vec<Vec<u32>>> {
    let bounds = count_bounds(dist, len, delta);
    let types = type_classes(&bounds, len);
    let size = types.iter().fold(0u128, |acc, t| acc.saturating_add(multinomial(t)));
    if size > cap {
        return Err(Error::cap("typical set", size, cap, "shorten the block or widen the cap"));
    }
    let mut out = Vec::with_capacity(size as usize);
    let mut cur = Vec::with_capacity(len);
    for mut t in types {
        permutations(&mut t, len, &mut cur, &mut out);
    }
    Ok(out)
}

fn permutations(left: &mut [usize], len: usize, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
    if cur.len() == len {
        out.push(cur.clone());
        return;
    }
    for a in 0..left.len() {
        if left[a] > 0 {
            left[a] -= 1;
            cur.push(a as u32);
            permutations(left, len, cur, out);
            cur.pop();
            left[a] += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_mass_gives_constant_sequence() {
        let s = typical_set(&[0.0, 1.0, 0.0], 5, 0.1, DEFAULT_TYPICAL_CAP).unwrap();
        assert_eq!(s, vec![vec![1; 5]]);
    }

    #[test]
    fn wide_slack_keeps_everything() {
        let s = typical_set(&[0.5, 0.5], 6, 0.5, DEFAULT_TYPICAL_CAP).unwrap();
        assert_eq!(s.len(), 64);
    }

    #[test]
    fn bernoulli_quarter_matches_brute_force() {
        let dist = [0.75, 0.25];
        let brute = (0u32..256)
            .filter(|&m| {
                let ones = m.count_ones() as f64;
                ((ones / 8.0) - 0.25).abs() <= 0.125 && ((8.0 - ones) / 8.0 - 0.75).abs() <= 0.125
            })
            .count();
        let s = typical_set(&dist, 8, 0.125, DEFAULT_TYPICAL_CAP).unwrap();
        assert_eq!(s.len(), brute);
        assert_eq!(typical_set_size(&dist, 8, 0.125), brute as u128);
        assert!(s.iter().all(|x| is_typical(x, &dist, 0.125)));
        let mut sorted = s.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), s.len());
    }

    #[test]
    fn cap_is_enforced() {
        let err = typical_set(&[0.5, 0.5], 30, 0.5, 1000).unwrap_err();
        assert_eq!(err.kind(), crate::error::ErrorKind::CapExceeded);
    }
}
