//! Secondary analyses on a posterior fit: technique-level aggregates,
//! ability correlates, and posterior predictive checks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::fit::{ParamSummary, PosteriorFit};
use super::model::logistic;
use crate::bank::{ItemBank, Technique};
use crate::error::{Error, Result};
use crate::responses::{Outcome, ResponseDataset};
use crate::stats::{pearson, pearson_p_value, quantile_sorted};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TechniqueSummary {
    pub technique: Technique,
    pub items: Vec<String>,
    /// Per-draw mean easiness over the technique's items.
    pub easiness: ParamSummary,
    /// Per-draw mean discrimination over the technique's items.
    pub discrimination: ParamSummary,
}

fn slices(v: &[Vec<f64>]) -> Vec<&[f64]> {
    v.iter().map(|c| c.as_slice()).collect()
}

fn technique_items(fit: &PosteriorFit, bank: &ItemBank, technique: Technique) -> Result<Vec<usize>> {
    let mut idx = Vec::new();
    for (i, id) in fit.items.iter().enumerate() {
        let item = bank.get(id).ok_or_else(|| Error::UnknownItem(id.clone()))?;
        if item.technique == technique {
            idx.push(i);
        }
    }
    Ok(idx)
}

/// Aggregate for one technique; an error when no fitted item uses it.
pub fn aggregate_technique(fit: &PosteriorFit, bank: &ItemBank, technique: Technique) -> Result<TechniqueSummary> {
    let idx = technique_items(fit, bank, technique)?;
    if idx.is_empty() {
        return Err(Error::InvalidConfig(format!("technique {} has no fitted items", technique.label())));
    }
    let n = idx.len() as f64;
    let mut e_chains = Vec::with_capacity(fit.chains.len());
    let mut a_chains = Vec::with_capacity(fit.chains.len());
    for c in 0..fit.chains.len() {
        let mut e = Vec::with_capacity(fit.draws_per_chain());
        let mut a = Vec::with_capacity(fit.draws_per_chain());
        for t in 0..fit.draws_per_chain() {
            let d = fit.draw(c, t);
            e.push(idx.iter().map(|&i| d[fit.easiness_index(i)]).sum::<f64>() / n);
            a.push(idx.iter().map(|&i| d[fit.discrimination_index(i)]).sum::<f64>() / n);
        }
        e_chains.push(e);
        a_chains.push(a);
    }
    Ok(TechniqueSummary {
        technique,
        items: idx.iter().map(|&i| fit.items[i].clone()).collect(),
        easiness: ParamSummary::from_draws(&slices(&e_chains)),
        discrimination: ParamSummary::from_draws(&slices(&a_chains)),
    })
}

/// Aggregates for every technique with at least one fitted item.
pub fn aggregate_by_technique(fit: &PosteriorFit, bank: &ItemBank) -> Result<Vec<TechniqueSummary>> {
    let mut out = Vec::new();
    for t in Technique::ALL {
        if !technique_items(fit, bank, t)?.is_empty() {
            out.push(aggregate_technique(fit, bank, t)?);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correlate {
    pub r: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AbilityCorrelates {
    pub participants: usize,
    pub raw_score: Correlate,
    pub skip_rate: Correlate,
}

/// Correlates posterior-median ability with raw score and skip rate.
pub fn ability_correlates(fit: &PosteriorFit, data: &ResponseDataset) -> Result<AbilityCorrelates> {
    let data_ids: Vec<&str> = data.participants.iter().map(|p| p.participant_id.as_str()).collect();
    if data_ids.len() != fit.participants.len() || data_ids.iter().zip(&fit.participants).any(|(a, b)| *a != b) {
        return Err(Error::ItemSetMismatch(
            "fit and dataset cover different participants".into(),
        ));
    }
    let theta: Vec<f64> = (0..fit.participants.len())
        .map(|j| {
            let mut d = fit.pooled(fit.theta_index(j));
            d.sort_by(f64::total_cmp);
            quantile_sorted(&d, 0.5)
        })
        .collect();
    let n = theta.len();
    let raw = data.raw_totals();
    let skips = data.skip_rates();
    let r_raw = pearson(&theta, &raw)?;
    let r_skip = pearson(&theta, &skips)?;
    Ok(AbilityCorrelates {
        participants: n,
        raw_score: Correlate {
            r: r_raw,
            p_value: pearson_p_value(r_raw, n),
        },
        skip_rate: Correlate {
            r: r_skip,
            p_value: pearson_p_value(r_skip, n),
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictiveItem {
    pub item_id: String,
    pub observed: f64,
    pub replicated_mean: f64,
    pub replicated_ci95: [f64; 2],
    /// Share of replications whose proportion correct is at least the observed one.
    pub ppp: f64,
}

/// Proportion correct among answered responses, observed versus replicated
/// from `replications` posterior draws spread evenly over all chains.
pub fn posterior_predictive(
    fit: &PosteriorFit,
    data: &ResponseDataset,
    replications: usize,
    seed: u64,
) -> Result<Vec<PredictiveItem>> {
    if data.item_ids != fit.items || data.participant_count() != fit.participants.len() {
        return Err(Error::ItemSetMismatch("fit and dataset differ".into()));
    }
    let total = fit.total_draws();
    if total == 0 || replications == 0 {
        return Err(Error::Empty("posterior draws"));
    }
    let per = fit.draws_per_chain();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_items = fit.items.len();
    let mut rep_props: Vec<Vec<f64>> = vec![Vec::with_capacity(replications); n_items];
    let answered: Vec<usize> = (0..n_items)
        .map(|i| data.outcomes.iter().filter(|row| row[i] != Outcome::Skip).count())
        .collect();
    for r in 0..replications {
        let flat = r * total / replications;
        let d = fit.draw(flat / per, flat % per);
        for i in 0..n_items {
            let (e, a) = (d[fit.easiness_index(i)], d[fit.discrimination_index(i)]);
            let mut correct = 0usize;
            for (j, row) in data.outcomes.iter().enumerate() {
                if row[i] != Outcome::Skip {
                    let p = logistic(a * (d[fit.theta_index(j)] + e));
                    correct += (rng.random::<f64>() < p) as usize;
                }
            }
            rep_props[i].push(correct as f64 / answered[i].max(1) as f64);
        }
    }
    Ok((0..n_items)
        .map(|i| {
            let observed = data.outcomes.iter().filter(|row| row[i] == Outcome::Correct).count() as f64
                / answered[i].max(1) as f64;
            let mut reps = rep_props[i].clone();
            reps.sort_by(f64::total_cmp);
            PredictiveItem {
                item_id: fit.items[i].clone(),
                observed,
                replicated_mean: reps.iter().sum::<f64>() / reps.len() as f64,
                replicated_ci95: [quantile_sorted(&reps, 0.025), quantile_sorted(&reps, 0.975)],
                ppp: reps.iter().filter(|&&x| x >= observed).count() as f64 / reps.len() as f64,
            }
        })
        .collect())
}
