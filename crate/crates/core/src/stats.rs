//! Goodness-of-fit helper for sampled photon-count histograms.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Pearson chi-square test of observed counts against a probability vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Bins with expected count below `min_expected` are pooled into their
/// neighbour towards the tail, so sparse tails do not inflate the statistic.
/// `observed` beyond the length of `probabilities` counts as expected-zero
/// mass and is pooled into the last bin.
pub fn chi_square(observed: &[u64], probabilities: &[f64], min_expected: f64) -> ChiSquareTest {
    let total: u64 = observed.iter().sum();
    let n = total as f64;
    let len = probabilities.len().max(observed.len());
    let obs = |i: usize| observed.get(i).copied().unwrap_or(0) as f64;
    let exp = |i: usize| probabilities.get(i).copied().unwrap_or(0.0) * n;

    let mut bins: Vec<(f64, f64)> = Vec::new();
    let (mut o_acc, mut e_acc) = (0.0, 0.0);
    for i in 0..len {
        o_acc += obs(i);
        e_acc += exp(i);
        if e_acc >= min_expected {
            bins.push((o_acc, e_acc));
            o_acc = 0.0;
            e_acc = 0.0;
        }
    }
    if o_acc > 0.0 || e_acc > 0.0 {
        match bins.last_mut() {
            Some(last) => {
                last.0 += o_acc;
                last.1 += e_acc;
            }
            None => bins.push((o_acc, e_acc)),
        }
    }
    let statistic: f64 = bins
        .iter()
        .filter(|(_, e)| *e > 0.0)
        .map(|(o, e)| (o - e).powi(2) / e)
        .sum();
    let dof = bins.len().saturating_sub(1);
    let p_value = if dof == 0 {
        1.0
    } else {
        let dist = ChiSquared::new(dof as f64).expect("positive degrees of freedom");
        1.0 - dist.cdf(statistic)
    };
    ChiSquareTest {
        statistic,
        dof,
        p_value,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_fit() {
        let t = chi_square(&[250, 500, 250], &[0.25, 0.5, 0.25], 5.0);
        assert_eq!(t.statistic, 0.0);
        assert_eq!(t.dof, 2);
        assert!((t.p_value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sparse_tail_is_pooled() {
        let t = chi_square(&[900, 98, 2, 0], &[0.9, 0.098, 0.0019, 0.0001], 5.0);
        assert_eq!(t.dof, 1);
    }

    #[test]
    fn bad_fit_has_small_p_value() {
        let t = chi_square(&[800, 200], &[0.5, 0.5], 5.0);
        assert!(t.p_value < 1e-10);
    }
}
