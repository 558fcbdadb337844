//! Posterior draws on the constrained scale, their summaries, and the
//! serialized artifacts built from them.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::curves::ItemParams;
use super::diagnostics::{diagnose, Diagnostics};
use super::model::Irt2plModel;
use super::sampler::{sample_chains, ChainStats, LogDensity, SamplerConfig};
use crate::error::{Error, Result};
use crate::stats::{mean, quantile_sorted, sample_sd};

impl LogDensity for Irt2plModel {
    fn dim(&self) -> usize {
        Irt2plModel::dim(self)
    }
    fn log_density_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        self.log_posterior_into(x, grad)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerRecord {
    pub config: SamplerConfig,
    pub chains: Vec<ChainStats>,
}

impl SamplerRecord {
    pub fn divergences(&self) -> usize {
        self.chains.iter().map(|c| c.divergences).sum()
    }

    /// Divergent transitions per post-warmup iteration.
    pub fn divergence_rate(&self) -> f64 {
        let n = self.chains.len() * (self.config.iterations - self.config.warmup);
        self.divergences() as f64 / n.max(1) as f64
    }

    pub fn reliable(&self) -> bool {
        self.divergence_rate() <= self.config.max_divergence_rate
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorFit {
    pub parameter_names: Vec<String>,
    pub participants: Vec<String>,
    pub items: Vec<String>,
    /// One row-major block of constrained draws per chain.
    pub chains: Vec<Vec<f64>>,
    pub sampler: Option<SamplerRecord>,
}

/// Samples the model and maps every retained draw to the constrained scale.
pub fn fit_irt(model: &Irt2plModel, config: &SamplerConfig) -> Result<PosteriorFit> {
    if model.items.is_empty() || model.participants.is_empty() {
        return Err(Error::Empty("model"));
    }
    let outputs = sample_chains(model, config)?;
    let names = model.parameter_names();
    let mut chains = Vec::with_capacity(outputs.len());
    let mut stats = Vec::with_capacity(outputs.len());
    for out in outputs {
        let mut block = Vec::with_capacity(out.len() * names.len());
        for t in 0..out.len() {
            block.extend(model.constrain(out.draw(t)).flatten());
        }
        chains.push(block);
        stats.push(out.stats);
    }
    Ok(PosteriorFit {
        parameter_names: names,
        participants: model.participants.clone(),
        items: model.items.clone(),
        chains,
        sampler: Some(SamplerRecord {
            config: config.clone(),
            chains: stats,
        }),
    })
}

fn bracketed<'a>(name: &'a str, prefix: &str) -> Option<&'a str> {
    name.strip_prefix(prefix)?.strip_prefix('[')?.strip_suffix(']')
}

impl PosteriorFit {
    pub fn dim(&self) -> usize {
        self.parameter_names.len()
    }

    pub fn draws_per_chain(&self) -> usize {
        self.chains.first().map_or(0, |c| c.len() / self.dim().max(1))
    }

    pub fn total_draws(&self) -> usize {
        self.chains.len() * self.draws_per_chain()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.parameter_names.iter().position(|n| n == name)
    }

    pub fn theta_index(&self, j: usize) -> usize {
        j
    }
    pub fn easiness_index(&self, i: usize) -> usize {
        self.participants.len() + i
    }
    pub fn discrimination_index(&self, i: usize) -> usize {
        self.participants.len() + self.items.len() + i
    }

    /// Draws of one parameter, one vector per chain.
    pub fn parameter_chains(&self, k: usize) -> Vec<Vec<f64>> {
        let d = self.dim();
        self.chains.iter().map(|c| c.iter().skip(k).step_by(d).copied().collect()).collect()
    }

    pub fn pooled(&self, k: usize) -> Vec<f64> {
        self.parameter_chains(k).into_iter().flatten().collect()
    }

    /// Full constrained draw `t` of chain `c`.
    pub fn draw(&self, c: usize, t: usize) -> &[f64] {
        let d = self.dim();
        &self.chains[c][t * d..(t + 1) * d]
    }

    pub fn diagnostics(&self, k: usize) -> Diagnostics {
        let per_chain = self.parameter_chains(k);
        let refs: Vec<&[f64]> = per_chain.iter().map(|c| c.as_slice()).collect();
        diagnose(&refs)
    }

    pub fn summarize_parameter(&self, k: usize) -> ParamSummary {
        let per_chain = self.parameter_chains(k);
        let refs: Vec<&[f64]> = per_chain.iter().map(|c| c.as_slice()).collect();
        ParamSummary::from_draws(&refs)
    }

    pub fn summarize(&self) -> IrtSummary {
        let parameters = (0..self.dim())
            .map(|k| (self.parameter_names[k].clone(), self.summarize_parameter(k)))
            .collect();
        let mut summary = IrtSummary {
            participants: self.participants.len(),
            draws: self.total_draws(),
            divergences: self.sampler.as_ref().map(|s| s.divergences()),
            reliable: self.sampler.as_ref().map(|s| s.reliable()),
            convergence: None,
            item_ids: self.items.clone(),
            participant_ids: self.participants.clone(),
            parameters,
            sampler: self.sampler.clone(),
        };
        summary.convergence = Some(summary.convergence_check(&ConvergenceCriteria::default()));
        summary
    }

    /// Long-form draws: `chain,draw,<parameter names>`.
    pub fn draws_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["chain".to_string(), "draw".to_string()];
        header.extend(self.parameter_names.iter().cloned());
        w.write_record(&header)?;
        for c in 0..self.chains.len() {
            for t in 0..self.draws_per_chain() {
                let mut row = vec![c.to_string(), t.to_string()];
                row.extend(self.draw(c, t).iter().map(|v| v.to_string()));
                w.write_record(&row)?;
            }
        }
        let bytes = w.into_inner().map_err(|e| Error::NonFinite(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    /// Inverse of [`PosteriorFit::draws_csv`]; sampler metadata is not restored.
    pub fn from_draws_csv<R: std::io::Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let header = rdr.headers()?.clone();
        if header.len() < 3 || &header[0] != "chain" || &header[1] != "draw" {
            return Err(Error::Parse {
                row: 1,
                message: "expected header starting with chain,draw".into(),
            });
        }
        let names: Vec<String> = header.iter().skip(2).map(String::from).collect();
        let participants = names.iter().filter_map(|n| bracketed(n, "theta")).map(String::from).collect();
        let items = names.iter().filter_map(|n| bracketed(n, "e")).map(String::from).collect();
        let mut chains: Vec<Vec<f64>> = Vec::new();
        for (row_idx, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let row = row_idx + 2;
            let parse_err = |m: String| Error::Parse { row, message: m };
            let c: usize = rec[0].parse().map_err(|_| parse_err(format!("bad chain index {:?}", &rec[0])))?;
            if c > chains.len() {
                return Err(parse_err("chains must appear in order".into()));
            }
            if c == chains.len() {
                chains.push(Vec::new());
            }
            for v in rec.iter().skip(2) {
                chains[c].push(v.parse().map_err(|_| parse_err(format!("bad value {v:?}")))?);
            }
        }
        let fit = PosteriorFit {
            parameter_names: names,
            participants,
            items,
            chains,
            sampler: None,
        };
        if fit.chains.iter().any(|c| c.len() != fit.chains[0].len()) {
            return Err(Error::InvalidConfig("chains have unequal lengths".into()));
        }
        Ok(fit)
    }

    pub fn load_draws(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_draws_csv(f)
    }

    /// `parameter,rhat,ess_bulk,ess_tail`, with `NA` where not applicable.
    pub fn diagnostics_csv(&self) -> String {
        let fmt = |v: Option<f64>| v.map_or("NA".to_string(), |x| format!("{x:.4}"));
        let mut out = String::from("parameter,rhat,ess_bulk,ess_tail\n");
        for (k, name) in self.parameter_names.iter().enumerate() {
            let d = self.diagnostics(k);
            out.push_str(&format!("{name},{},{},{}\n", fmt(d.rhat), fmt(d.ess_bulk), fmt(d.ess_tail)));
        }
        out
    }
}

// ============================================================================
// Summaries
// ============================================================================

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSummary {
    pub median: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sd: Option<f64>,
    /// Central 66% interval (17th to 83rd percentile).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ci66: Option<[f64; 2]>,
    /// Central 95% interval.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ci95: Option<[f64; 2]>,
    #[serde(default)]
    pub rhat: Option<f64>,
    #[serde(default)]
    pub ess_bulk: Option<f64>,
    #[serde(default)]
    pub ess_tail: Option<f64>,
}

impl ParamSummary {
    pub fn from_draws(chains: &[&[f64]]) -> Self {
        let mut pooled: Vec<f64> = chains.iter().flat_map(|c| c.iter().copied()).collect();
        pooled.sort_by(f64::total_cmp);
        let q = |p| quantile_sorted(&pooled, p);
        let d = diagnose(chains);
        ParamSummary {
            median: q(0.5),
            mean: Some(mean(&pooled)),
            sd: Some(sample_sd(&pooled)),
            ci66: Some([q(0.17), q(0.83)]),
            ci95: Some([q(0.025), q(0.975)]),
            rhat: d.rhat,
            ess_bulk: d.ess_bulk,
            ess_tail: d.ess_tail,
        }
    }

    /// A summary that carries only a point value.
    pub fn point(median: f64) -> Self {
        ParamSummary {
            median,
            mean: None,
            sd: None,
            ci66: None,
            ci95: None,
            rhat: None,
            ess_bulk: None,
            ess_tail: None,
        }
    }
}

/// Easiness and discrimination summaries of one item.
#[derive(Debug, Clone, PartialEq)]
pub struct ItemSummary {
    pub item_id: String,
    /// Easiness; the difficulty is its negation.
    pub e: ParamSummary,
    pub a: ParamSummary,
}

pub fn easiness_name(item_id: &str) -> String {
    format!("e[{item_id}]")
}

pub fn discrimination_name(item_id: &str) -> String {
    format!("a[{item_id}]")
}

pub fn theta_name(participant_id: &str) -> String {
    format!("theta[{participant_id}]")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceCriteria {
    pub max_rhat: f64,
    pub min_ess_bulk: f64,
}

impl Default for ConvergenceCriteria {
    fn default() -> Self {
        ConvergenceCriteria {
            max_rhat: 1.01,
            min_ess_bulk: 400.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub criteria: ConvergenceCriteria,
    pub worst_rhat: Option<f64>,
    pub lowest_ess_bulk: Option<f64>,
    pub failing: Vec<String>,
    pub passed: bool,
}

/// Posterior summary keyed by parameter name (`e[item]`, `a[item]`,
/// `theta[participant]` and the hyperparameter names).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrtSummary {
    pub participants: usize,
    pub draws: usize,
    #[serde(default)]
    pub divergences: Option<usize>,
    #[serde(default)]
    pub reliable: Option<bool>,
    #[serde(default)]
    pub convergence: Option<ConvergenceReport>,
    /// Item order of the fitted model.
    pub item_ids: Vec<String>,
    #[serde(default)]
    pub participant_ids: Vec<String>,
    pub parameters: BTreeMap<String, ParamSummary>,
    #[serde(default)]
    pub sampler: Option<SamplerRecord>,
}

impl IrtSummary {
    /// Builds a summary holding item parameters only.
    pub fn from_items(participants: usize, draws: usize, items: Vec<ItemSummary>) -> Self {
        let mut parameters = BTreeMap::new();
        let mut item_ids = Vec::with_capacity(items.len());
        for it in items {
            parameters.insert(easiness_name(&it.item_id), it.e);
            parameters.insert(discrimination_name(&it.item_id), it.a);
            item_ids.push(it.item_id);
        }
        IrtSummary {
            participants,
            draws,
            divergences: None,
            reliable: None,
            convergence: None,
            item_ids,
            participant_ids: Vec::new(),
            parameters,
            sampler: None,
        }
    }

    pub fn parameter(&self, name: &str) -> Option<&ParamSummary> {
        self.parameters.get(name)
    }

    pub fn get(&self, item_id: &str) -> Option<ItemSummary> {
        Some(ItemSummary {
            item_id: item_id.to_string(),
            e: self.parameter(&easiness_name(item_id))?.clone(),
            a: self.parameter(&discrimination_name(item_id))?.clone(),
        })
    }

    /// Item summaries in model order; items lacking either parameter are skipped.
    pub fn items(&self) -> Vec<ItemSummary> {
        self.item_ids.iter().filter_map(|id| self.get(id)).collect()
    }

    pub fn theta(&self, participant_id: &str) -> Option<&ParamSummary> {
        self.parameter(&theta_name(participant_id))
    }

    /// Posterior median `(a, e)` per item.
    pub fn item_params(&self) -> Vec<ItemParams> {
        self.items()
            .into_iter()
            .map(|s| ItemParams {
                item_id: s.item_id,
                a: s.a.median,
                e: s.e.median,
            })
            .collect()
    }

    /// Drops items not in `keep`, along with their parameters.
    pub fn retain_items(&mut self, keep: impl Fn(&str) -> bool) {
        let dropped: Vec<String> = self.item_ids.iter().filter(|id| !keep(id)).cloned().collect();
        for id in &dropped {
            self.parameters.remove(&easiness_name(id));
            self.parameters.remove(&discrimination_name(id));
        }
        self.item_ids.retain(|id| keep(id));
        self.convergence = None;
    }

    /// Checks every item and ability parameter against the criteria. Hyper
    /// parameters are reported but not gated.
    pub fn convergence_check(&self, criteria: &ConvergenceCriteria) -> ConvergenceReport {
        let mut worst_rhat: Option<f64> = None;
        let mut lowest_ess: Option<f64> = None;
        let mut failing = Vec::new();
        let mut visit = |name: String, s: &ParamSummary| {
            if let Some(r) = s.rhat {
                worst_rhat = Some(worst_rhat.map_or(r, |w: f64| w.max(r)));
            }
            if let Some(e) = s.ess_bulk {
                lowest_ess = Some(lowest_ess.map_or(e, |w: f64| w.min(e)));
            }
            let bad_rhat = s.rhat.is_some_and(|r| !(r < criteria.max_rhat));
            let bad_ess = s.ess_bulk.is_some_and(|e| !(e > criteria.min_ess_bulk));
            if bad_rhat || bad_ess {
                failing.push(name);
            }
        };
        let names = self
            .item_ids
            .iter()
            .flat_map(|id| [easiness_name(id), discrimination_name(id)])
            .chain(self.participant_ids.iter().map(|id| theta_name(id)));
        for name in names {
            if let Some(s) = self.parameters.get(&name) {
                visit(name, s);
            }
        }
        let passed = failing.is_empty() && worst_rhat.is_some();
        ConvergenceReport {
            criteria: *criteria,
            worst_rhat,
            lowest_ess_bulk: lowest_ess,
            failing,
            passed,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}
