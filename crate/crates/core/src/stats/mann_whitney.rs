use std::f64::consts::SQRT_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest combined sample size for which the exact null distribution is used
/// automatically (tie-free data only).
pub const EXACT_MAX_TOTAL: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PValueMethod {
    /// Exact for small tie-free samples, normal approximation otherwise.
    Auto,
    Exact,
    Normal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MannWhitney {
    /// U statistic of the first sample: pairs with `a > b`, ties counting ½.
    pub u: f64,
    /// Two-sided p-value.
    pub p: f64,
    pub method: PValueMethod,
}

/// Midranks (1-based) of the pooled sample and the tie-group sizes.
fn midranks(pooled: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..pooled.len()).collect();
    order.sort_by(|&i, &j| pooled[i].partial_cmp(&pooled[j]).expect("finite samples"));
    let mut ranks = vec![0.0; pooled.len()];
    let mut ties = Vec::new();
    let mut s = 0;
    while s < order.len() {
        let mut e = s + 1;
        while e < order.len() && pooled[order[e]] == pooled[order[s]] {
            e += 1;
        }
        let mid = (s + e + 1) as f64 / 2.0;
        for &i in &order[s..e] {
            ranks[i] = mid;
        }
        if e - s > 1 {
            ties.push(e - s);
        }
        s = e;
    }
    (ranks, ties)
}

/// Null frequencies of U for sample sizes `(n, m)`: entry `u` counts the
/// rank assignments producing that U, out of C(n+m, n).
pub fn u_distribution(n: usize, m: usize) -> Vec<f64> {
    // f[i][j][u] = f[i-1][j][u-j] + f[i][j-1][u]: the largest pooled value
    // belongs either to the first sample (beating all j of the second) or not
    let max_u = n * m;
    let mut prev_row: Vec<Vec<f64>> = (0..=m).map(|_| {
        let mut v = vec![0.0; max_u + 1];
        v[0] = 1.0;
        v
    }).collect();
    for i in 1..=n {
        let mut row: Vec<Vec<f64>> = vec![vec![0.0; max_u + 1]; m + 1];
        row[0][0] = 1.0;
        for j in 1..=m {
            for u in 0..=i * j {
                let take = if u >= j { prev_row[j][u - j] } else { 0.0 };
                row[j][u] = take + row[j - 1][u];
            }
        }
        prev_row = row;
    }
    prev_row.swap_remove(m)
}

fn exact_p(u: f64, n: usize, m: usize) -> f64 {
    let freq = u_distribution(n, m);
    let total: f64 = freq.iter().sum();
    let u = u.round() as usize;
    let lower: f64 = freq[..=u].iter().sum();
    let upper: f64 = freq[u..].iter().sum();
    (2.0 * lower.min(upper) / total).min(1.0)
}

fn normal_p(u: f64, n: usize, m: usize, ties: &[usize]) -> f64 {
    let (nf, mf) = (n as f64, m as f64);
    let total = nf + mf;
    let tie_term: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / (total * (total - 1.0));
    let var = nf * mf / 12.0 * ((total + 1.0) - tie_term);
    if !(var > 0.0) {
        return 1.0;
    }
    let z = ((u - nf * mf / 2.0).abs() - 0.5).max(0.0) / var.sqrt();
    libm::erfc(z / SQRT_2).min(1.0)
}

/// Two-sided Mann-Whitney U test with automatic choice of p-value method.
pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> Result<MannWhitney> {
    mann_whitney_u_with(a, b, PValueMethod::Auto)
}

pub fn mann_whitney_u_with(a: &[f64], b: &[f64], method: PValueMethod) -> Result<MannWhitney> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::param("Mann-Whitney U needs two nonempty samples"));
    }
    if a.iter().chain(b).any(|v| v.is_nan()) {
        return Err(Error::param("Mann-Whitney U samples contain NaN"));
    }
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let (ranks, ties) = midranks(&pooled);
    let (n, m) = (a.len(), b.len());
    let rank_sum: f64 = ranks[..n].iter().sum();
    let u = rank_sum - (n * (n + 1)) as f64 / 2.0;
    let resolved = match method {
        PValueMethod::Auto if n + m <= EXACT_MAX_TOTAL && ties.is_empty() => PValueMethod::Exact,
        PValueMethod::Auto => PValueMethod::Normal,
        PValueMethod::Exact if !ties.is_empty() => {
            return Err(Error::param("exact Mann-Whitney p requires tie-free samples"));
        }
        other => other,
    };
    let p = match resolved {
        PValueMethod::Exact => exact_p(u, n, m),
        _ => normal_p(u, n, m, &ties),
    };
    Ok(MannWhitney { u, p, method: resolved })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Brute-force null distribution: every way of choosing which pooled
    /// ranks belong to the first sample.
    fn enumerate_u(n: usize, m: usize) -> Vec<f64> {
        let total = n + m;
        let mut freq = vec![0.0; n * m + 1];
        for subset in 0u32..(1 << total) {
            if subset.count_ones() as usize != n {
                continue;
            }
            let rank_sum: usize = (0..total).filter(|r| subset >> r & 1 == 1).map(|r| r + 1).sum();
            freq[rank_sum - n * (n + 1) / 2] += 1.0;
        }
        freq
    }

    #[test]
    fn recurrence_matches_enumeration() {
        for (n, m) in [(1, 1), (3, 3), (2, 5), (4, 6), (6, 6), (8, 8)] {
            assert_eq!(u_distribution(n, m), enumerate_u(n, m), "n={n} m={m}");
        }
    }

    #[test]
    fn separated_triplets() {
        let r = mann_whitney_u(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap();
        assert_eq!(r.u, 0.0);
        assert_eq!(r.method, PValueMethod::Exact);
        assert!((r.p - 0.1).abs() < 1e-15);
    }

    #[test]
    fn identical_samples_are_not_different() {
        let a = [0.2, 0.5, 0.7, 0.9, 1.3];
        let r = mann_whitney_u(&a, &a).unwrap();
        assert!(r.p >= 0.99, "{r:?}");
        let r = mann_whitney_u(&[3.0; 4], &[3.0; 6]).unwrap();
        assert_eq!(r.p, 1.0);
    }

    #[test]
    fn tie_handling() {
        let r = mann_whitney_u(&[1.0, 2.0, 2.0], &[2.0, 3.0]).unwrap();
        // the two 2-vs-2 ties count one half each
        assert_eq!(r.u, 1.0);
        assert_eq!(r.method, PValueMethod::Normal);
        assert!(mann_whitney_u_with(&[1.0, 2.0], &[2.0], PValueMethod::Exact).is_err());
        assert!(mann_whitney_u(&[], &[1.0]).is_err());
    }

    #[test]
    fn normal_approximation_tracks_exact_at_eight_by_eight() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for shift in [0.0, 0.3, 0.6, 1.0, 1.5] {
            let a: Vec<f64> = (0..8).map(|_| rng.random::<f64>()).collect();
            let b: Vec<f64> = (0..8).map(|_| rng.random::<f64>() + shift).collect();
            let e = mann_whitney_u_with(&a, &b, PValueMethod::Exact).unwrap();
            let z = mann_whitney_u_with(&a, &b, PValueMethod::Normal).unwrap();
            assert!((e.p - z.p).abs() < 0.02, "shift {shift}: exact {} normal {}", e.p, z.p);
        }
    }

    proptest! {
        #[test]
        fn swapping_samples_mirrors_u(
            a in proptest::collection::vec(-50i32..50, 1..10),
            b in proptest::collection::vec(-50i32..50, 1..10),
        ) {
            let a: Vec<f64> = a.into_iter().map(f64::from).collect();
            let b: Vec<f64> = b.into_iter().map(f64::from).collect();
            let ab = mann_whitney_u(&a, &b).unwrap();
            let ba = mann_whitney_u(&b, &a).unwrap();
            prop_assert_eq!(ab.u + ba.u, (a.len() * b.len()) as f64);
            prop_assert!((ab.p - ba.p).abs() < 1e-12);
            prop_assert!(ab.p > 0.0 && ab.p <= 1.0);
        }
    }
}
