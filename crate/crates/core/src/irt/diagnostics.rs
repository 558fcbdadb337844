//! Convergence diagnostics: rank-normalized split R-hat and bulk/tail
//! effective sample size with Geyer's initial monotone sequence estimator.
//!
//! Every function takes one slice per chain. A quantity that is constant
//! across all draws yields `None` instead of NaN.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::stats::{mean, quantile, sample_variance};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub rhat: Option<f64>,
    pub ess_bulk: Option<f64>,
    pub ess_tail: Option<f64>,
}

fn is_constant(chains: &[&[f64]]) -> bool {
    let first = chains.iter().flat_map(|c| c.first()).next();
    match first {
        None => true,
        Some(&v) => chains.iter().all(|c| c.iter().all(|&x| x == v)),
    }
}

/// Splits each chain into halves, dropping the middle draw of odd lengths.
pub fn split_chains(chains: &[&[f64]]) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(2 * chains.len());
    for c in chains {
        let half = c.len() / 2;
        out.push(c[..half].to_vec());
        out.push(c[c.len() - half..].to_vec());
    }
    out
}

/// Average ranks (1-based) across all chains, mapped through the normal
/// quantile function with the Blom offset.
pub fn rank_normalize(chains: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let total: usize = chains.iter().map(|c| c.len()).sum();
    let mut indexed: Vec<(f64, usize, usize)> = Vec::with_capacity(total);
    for (ci, c) in chains.iter().enumerate() {
        for (t, &v) in c.iter().enumerate() {
            indexed.push((v, ci, t));
        }
    }
    indexed.sort_by(|a, b| a.0.total_cmp(&b.0));
    let normal = Normal::standard();
    let s = total as f64;
    let mut out: Vec<Vec<f64>> = chains.iter().map(|c| vec![0.0; c.len()]).collect();
    let mut k = 0;
    while k < indexed.len() {
        let mut end = k + 1;
        while end < indexed.len() && indexed[end].0 == indexed[k].0 {
            end += 1;
        }
        let avg_rank = (k + 1 + end) as f64 / 2.0;
        let z = normal.inverse_cdf((avg_rank - 0.375) / (s + 0.25));
        for &(_, ci, t) in &indexed[k..end] {
            out[ci][t] = z;
        }
        k = end;
    }
    out
}

/// Classic potential scale reduction on already-split chains.
pub fn split_rhat_raw(chains: &[Vec<f64>]) -> Option<f64> {
    let n = chains.first()?.len();
    if n < 2 || chains.len() < 2 {
        return None;
    }
    let means: Vec<f64> = chains.iter().map(|c| mean(c)).collect();
    let w = mean(&chains.iter().map(|c| sample_variance(c)).collect::<Vec<_>>());
    if !(w > 0.0) {
        return None;
    }
    let b = n as f64 * sample_variance(&means);
    let var_plus = (n as f64 - 1.0) / n as f64 * w + b / n as f64;
    Some((var_plus / w).sqrt())
}

/// Rank-normalized split R-hat: the maximum of the bulk and folded versions.
pub fn rhat(chains: &[&[f64]]) -> Option<f64> {
    if is_constant(chains) {
        return None;
    }
    let split = split_chains(chains);
    let bulk = split_rhat_raw(&rank_normalize(&split))?;
    let all: Vec<f64> = split.iter().flatten().copied().collect();
    let med = quantile(&all, 0.5);
    let folded: Vec<Vec<f64>> = split.iter().map(|c| c.iter().map(|x| (x - med).abs()).collect()).collect();
    let tail = split_rhat_raw(&rank_normalize(&folded)).unwrap_or(bulk);
    Some(bulk.max(tail))
}

fn autocovariance(x: &[f64], mean: f64, lag: usize) -> f64 {
    let n = x.len();
    (0..n - lag).map(|t| (x[t] - mean) * (x[t + lag] - mean)).sum::<f64>() / n as f64
}

/// Effective sample size of equal-length chains (no splitting or ranking).
pub fn ess_raw(chains: &[Vec<f64>]) -> Option<f64> {
    let m = chains.len();
    let n = chains.first()?.len();
    if n < 4 || chains.iter().any(|c| c.len() != n) {
        return None;
    }
    let means: Vec<f64> = chains.iter().map(|c| mean(c)).collect();
    let mean_acov = |lag: usize| -> f64 {
        chains
            .iter()
            .zip(&means)
            .map(|(c, &mu)| autocovariance(c, mu, lag))
            .sum::<f64>()
            / m as f64
    };
    let acov0: Vec<f64> = chains.iter().zip(&means).map(|(c, &mu)| autocovariance(c, mu, 0)).collect();
    let nf = n as f64;
    let mean_var = acov0.iter().map(|v| v * nf / (nf - 1.0)).sum::<f64>() / m as f64;
    let mut var_plus = mean_var * (nf - 1.0) / nf;
    if m > 1 {
        var_plus += sample_variance(&means);
    }
    if !(var_plus > 0.0) {
        return None;
    }

    let rho_at = |lag: usize| 1.0 - (mean_var - mean_acov(lag)) / var_plus;
    let mut rho = vec![0.0; n];
    rho[0] = 1.0;
    let mut rho_even = 1.0;
    let mut rho_odd = rho_at(1);
    rho[1] = rho_odd;
    let mut t = 2;
    while t + 5 < n && rho_even + rho_odd > 0.0 {
        rho_even = rho_at(t);
        rho_odd = rho_at(t + 1);
        if rho_even + rho_odd >= 0.0 {
            rho[t] = rho_even;
            rho[t + 1] = rho_odd;
        }
        t += 2;
    }
    let max_t = t;
    if rho_even > 0.0 && max_t < n {
        rho[max_t] = rho_even;
    }
    // Enforce a monotone sequence of pair sums.
    let mut k = 2;
    while k + 4 <= max_t {
        if rho[k] + rho[k + 1] > rho[k - 2] + rho[k - 1] {
            let avg = (rho[k - 2] + rho[k - 1]) / 2.0;
            rho[k] = avg;
            rho[k + 1] = avg;
        }
        k += 2;
    }
    let total = (m * n) as f64;
    let tail = if max_t < n { rho[max_t] } else { 0.0 };
    let tau = (-1.0 + 2.0 * rho[..max_t].iter().sum::<f64>() + tail).max(1.0 / total.log10());
    Some(total / tau)
}

/// Bulk effective sample size on split, rank-normalized chains.
pub fn ess_bulk(chains: &[&[f64]]) -> Option<f64> {
    if is_constant(chains) {
        return None;
    }
    ess_raw(&rank_normalize(&split_chains(chains)))
}

/// Tail effective sample size: the smaller of the 5% and 95% quantile
/// indicator ESS values.
pub fn ess_tail(chains: &[&[f64]]) -> Option<f64> {
    if is_constant(chains) {
        return None;
    }
    let split = split_chains(chains);
    let all: Vec<f64> = split.iter().flatten().copied().collect();
    let indicator = |q: f64| -> Vec<Vec<f64>> {
        split
            .iter()
            .map(|c| c.iter().map(|&x| if x <= q { 1.0 } else { 0.0 }).collect())
            .collect()
    };
    let lo = ess_raw(&indicator(quantile(&all, 0.05)));
    let hi = ess_raw(&indicator(quantile(&all, 0.95)));
    match (lo, hi) {
        (Some(a), Some(b)) => Some(a.min(b)),
        (a, b) => a.or(b),
    }
}

/// All three diagnostics. Fewer than four draws in any chain, or a constant
/// parameter, yields the not-applicable marker (`None`) throughout.
pub fn diagnose(chains: &[&[f64]]) -> Diagnostics {
    if chains.is_empty() || chains.iter().any(|c| c.len() < 4) {
        return Diagnostics {
            rhat: None,
            ess_bulk: None,
            ess_tail: None,
        };
    }
    Diagnostics {
        rhat: rhat(chains),
        ess_bulk: ess_bulk(chains),
        ess_tail: ess_tail(chains),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn iid(m: usize, n: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..m).map(|_| (0..n).map(|_| rng.sample(StandardNormal)).collect()).collect()
    }

    fn ar1(m: usize, n: usize, phi: f64, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..m)
            .map(|_| {
                let mut x = 0.0;
                (0..n)
                    .map(|_| {
                        let e: f64 = rng.sample(StandardNormal);
                        x = phi * x + (1.0 - phi * phi).sqrt() * e;
                        x
                    })
                    .collect()
            })
            .collect()
    }

    fn refs(v: &[Vec<f64>]) -> Vec<&[f64]> {
        v.iter().map(|c| c.as_slice()).collect()
    }

    #[test]
    fn iid_draws_have_rhat_near_one_and_full_ess() {
        let c = iid(4, 1000, 1);
        let d = diagnose(&refs(&c));
        assert!((d.rhat.unwrap() - 1.0).abs() < 0.01);
        let ess = d.ess_bulk.unwrap();
        assert!(ess > 3000.0 && ess < 5000.0, "{ess}");
        assert!(d.ess_tail.unwrap() > 2000.0);
    }

    #[test]
    fn ar1_ess_matches_theory() {
        // Integrated autocorrelation time of AR(1) is (1 + phi) / (1 - phi).
        let phi = 0.8;
        let c = ar1(4, 5000, phi, 2);
        let expected = 20000.0 * (1.0 - phi) / (1.0 + phi);
        let ess = ess_bulk(&refs(&c)).unwrap();
        assert!((ess / expected - 1.0).abs() < 0.2, "{ess} vs {expected}");
    }

    #[test]
    fn shifted_chain_inflates_rhat() {
        let mut c = iid(4, 500, 3);
        c[0].iter_mut().for_each(|x| *x += 3.0);
        assert!(rhat(&refs(&c)).unwrap() > 1.1);
    }

    #[test]
    fn scale_difference_detected_by_folding() {
        let mut c = iid(4, 1000, 4);
        c[1].iter_mut().for_each(|x| *x *= 4.0);
        assert!(rhat(&refs(&c)).unwrap() > 1.05);
    }

    #[test]
    fn constant_draws_are_not_applicable() {
        let c = vec![vec![2.0; 100]; 4];
        let d = diagnose(&refs(&c));
        assert_eq!(d.rhat, None);
        assert_eq!(d.ess_bulk, None);
        assert_eq!(d.ess_tail, None);
    }

    #[test]
    fn rank_normalization_is_symmetric_and_handles_ties() {
        let z = rank_normalize(&[vec![1.0, 2.0, 3.0], vec![2.0, 5.0, 0.0]]);
        // the two 2.0 entries share the average rank
        assert_eq!(z[0][1], z[1][0]);
        let all: Vec<f64> = z.iter().flatten().copied().collect();
        assert!(mean(&all).abs() < 1e-12);
    }

    #[test]
    fn split_rhat_matches_hand_computation() {
        // two chains, n = 2: means 1 and 3, within variances 2 and 2
        let c = vec![vec![0.0, 2.0], vec![2.0, 4.0]];
        let r = split_rhat_raw(&c).unwrap();
        // W = 2, B = 2 * 2 = 4, var+ = 0.5 * 2 + 4 / 2 = 3
        assert!((r - (1.5f64).sqrt()).abs() < 1e-12);
    }
}
