#![allow(dead_code)]

use evoctrl_core::simulator::SimRng;
use evoctrl_core::{step, Bitstring, TransitionRow};
use statrs::distribution::{ChiSquared, ContinuousCDF};

pub struct ChiSquare {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
}

/// Pearson goodness of fit. Adjacent bins are pooled until each expected
/// count is at least 5.
pub fn chi_square(observed: &[u64], probs: &[f64]) -> ChiSquare {
    assert_eq!(observed.len(), probs.len());
    let total: u64 = observed.iter().sum();
    let mut bins: Vec<(f64, f64)> = Vec::new();
    let (mut obs, mut exp) = (0.0, 0.0);
    for (&o, &p) in observed.iter().zip(probs) {
        obs += o as f64;
        exp += p * total as f64;
        if exp >= 5.0 {
            bins.push((obs, exp));
            obs = 0.0;
            exp = 0.0;
        }
    }
    if exp > 0.0 || obs > 0.0 {
        match bins.last_mut() {
            Some(last) => {
                last.0 += obs;
                last.1 += exp;
            }
            None => bins.push((obs, exp)),
        }
    }
    let statistic: f64 = bins.iter().map(|(o, e)| (o - e) * (o - e) / e).sum();
    let df = bins.len().saturating_sub(1);
    let p_value = if df == 0 {
        1.0
    } else {
        ChiSquared::new(df as f64).unwrap().sf(statistic)
    };
    ChiSquare {
        statistic,
        df,
        p_value,
    }
}

/// Next-state histogram of `samples` bit-level steps from `s` leading ones.
pub fn step_histogram(n: usize, s: usize, theta: f64, samples: u64, rng: &mut SimRng) -> Vec<u64> {
    let x = Bitstring::with_leading_ones(n, s);
    let mut counts = vec![0u64; n + 1];
    for _ in 0..samples {
        counts[step(&x, theta, rng).ones()] += 1;
    }
    counts
}

pub fn row_probs(row: &TransitionRow, n: usize) -> Vec<f64> {
    (0..=n).map(|s| row.prob(s)).collect()
}

/// Two-sample Kolmogorov–Smirnov statistic.
pub fn ks_statistic(a: &[u64], b: &[u64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_unstable();
    b.sort_unstable();
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] == x {
            i += 1;
        }
        while j < b.len() && b[j] == x {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}

/// Asymptotic two-sample KS critical value at level `alpha`.
pub fn ks_critical(alpha: f64, n: usize, m: usize) -> f64 {
    let c = (-(alpha / 2.0).ln() / 2.0).sqrt();
    c * ((n + m) as f64 / (n * m) as f64).sqrt()
}
