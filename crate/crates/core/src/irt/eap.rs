//! Expected a posteriori ability estimates by quadrature under a standard
//! normal prior.

use serde::{Deserialize, Serialize};

use super::curves::ItemParams;
use crate::error::{Error, Result};
use crate::responses::Outcome;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EapEstimate {
    pub theta: f64,
    pub posterior_sd: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quadrature {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl Default for Quadrature {
    fn default() -> Self {
        Quadrature {
            min: -4.0,
            max: 4.0,
            points: 81,
        }
    }
}

/// Skipped items carry no likelihood contribution.
pub fn eap_theta(items: &[ItemParams], responses: &[Outcome], quad: &Quadrature) -> Result<EapEstimate> {
    if items.len() != responses.len() {
        return Err(Error::ItemSetMismatch(format!(
            "{} item parameters but {} responses",
            items.len(),
            responses.len()
        )));
    }
    if quad.points < 2 || !(quad.max > quad.min) {
        return Err(Error::InvalidConfig(format!("invalid quadrature {quad:?}")));
    }
    let step = (quad.max - quad.min) / (quad.points - 1) as f64;
    let nodes: Vec<f64> = (0..quad.points).map(|k| quad.min + k as f64 * step).collect();
    let log_w: Vec<f64> = nodes
        .iter()
        .map(|&t| {
            let mut lw = -0.5 * t * t;
            for (it, &o) in items.iter().zip(responses) {
                let eta = it.a * (t + it.e);
                // log sigma(eta) and log(1 - sigma(eta)) without overflow
                let softplus_neg = (-eta).max(0.0) + (-eta.abs()).exp().ln_1p();
                match o {
                    Outcome::Correct => lw -= softplus_neg,
                    Outcome::Incorrect => lw -= softplus_neg + eta,
                    Outcome::Skip => {}
                }
            }
            lw
        })
        .collect();
    let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::NonFinite("EAP weights".into()));
    }
    let w: Vec<f64> = log_w.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = w.iter().sum();
    let theta = nodes.iter().zip(&w).map(|(t, w)| t * w).sum::<f64>() / total;
    let var = nodes.iter().zip(&w).map(|(t, w)| (t - theta).powi(2) * w).sum::<f64>() / total;
    Ok(EapEstimate {
        theta,
        posterior_sd: var.sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn no_information_returns_prior_mean() {
        let items = vec![ItemParams { item_id: "x".into(), a: 1.0, e: 0.0 }];
        let est = eap_theta(&items, &[Outcome::Skip], &Quadrature::default()).unwrap();
        assert!(est.theta.abs() < 1e-12);
        // truncated standard normal on [-4, 4] has sd just below 1
        assert!((est.posterior_sd - 1.0).abs() < 0.01);
    }

    #[test]
    fn correct_answers_raise_the_estimate() {
        let items: Vec<ItemParams> = (0..5)
            .map(|i| ItemParams { item_id: format!("i{i}"), a: 1.2, e: 0.0 })
            .collect();
        let all_right = eap_theta(&items, &[Outcome::Correct; 5], &Quadrature::default()).unwrap();
        let all_wrong = eap_theta(&items, &[Outcome::Incorrect; 5], &Quadrature::default()).unwrap();
        assert!(all_right.theta > 0.5);
        assert!((all_right.theta + all_wrong.theta).abs() < 1e-12);
    }

    #[test]
    fn length_mismatch_is_an_error() {
        let items = vec![ItemParams { item_id: "x".into(), a: 1.0, e: 0.0 }];
        assert!(eap_theta(&items, &[], &Quadrature::default()).is_err());
    }
}
