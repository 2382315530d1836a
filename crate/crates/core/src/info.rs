//! Entropy helpers. All values are in bits.

/// Shannon entropy of a probability vector; zero entries contribute nothing.
pub fn entropy(probs: &[f64]) -> f64 {
    probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.log2())
        .sum()
}

/// Plug-in entropy of empirical counts.
pub fn plugin_entropy(counts: &[u64]) -> f64 {
    let n: u64 = counts.iter().sum();
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum()
}

/// Plug-in estimate with the Miller–Madow bias correction
/// `(K - 1) / (2 n ln 2)`, where `K` is the number of observed symbols.
pub fn miller_madow(counts: &[u64]) -> f64 {
    let n: u64 = counts.iter().sum();
    if n == 0 {
        return 0.0;
    }
    let k = counts.iter().filter(|&&c| c > 0).count() as f64;
    plugin_entropy(counts) + (k - 1.0) / (2.0 * n as f64 * std::f64::consts::LN_2)
}

/// Entropy of the distribution obtained by summing `weights` per key.
pub fn entropy_of_pushforward<K: Ord>(items: impl IntoIterator<Item = (K, f64)>) -> f64 {
    let mut acc: std::collections::BTreeMap<K, f64> = std::collections::BTreeMap::new();
    for (k, w) in items {
        *acc.entry(k).or_insert(0.0) += w;
    }
    let probs: Vec<f64> = acc.into_values().collect();
    entropy(&probs)
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Complementary error function (Chebyshev fit, relative error below
/// 1.2e-7).
pub fn erfc(x: f64) -> f64 {
    let z = x.abs();
    let t = 1.0 / (1.0 + 0.5 * z);
    let r = t * (-z * z - 1.265_512_23
        + t * (1.000_023_68
            + t * (0.374_091_96
                + t * (0.096_784_18
                    + t * (-0.186_288_06
                        + t * (0.278_868_07
                            + t * (-1.135_203_98 + t * (1.488_515_87 + t * (-0.822_152_23 + t * 0.170_872_77)))))))))
        .exp();
    if x >= 0.0 {
        r
    } else {
        2.0 - r
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basic_values() {
        assert_eq!(entropy(&[1.0]), 0.0);
        assert!((entropy(&[0.5, 0.5]) - 1.0).abs() < 1e-15);
        assert!((entropy(&[0.25; 4]) - 2.0).abs() < 1e-15);
        assert!((plugin_entropy(&[3, 3, 0]) - 1.0).abs() < 1e-15);
        assert!(miller_madow(&[3, 3]) > 1.0);
        let h = entropy_of_pushforward([(0, 0.25), (1, 0.25), (0, 0.5)]);
        assert!((h - entropy(&[0.75, 0.25])).abs() < 1e-15);
    }
}
