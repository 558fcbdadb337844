//! Synthetic item banks and response logs from a known 2PL generator, plus
//! cohorts engineered to exercise every participant exclusion rule.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal};
use serde::{Deserialize, Serialize};

use crate::bank::{Item, ItemBank, ItemFormat, Subtask, Technique};
use crate::error::{Error, Result};
use crate::irt::model::logistic;
use crate::responses::{Outcome, ParticipantMeta, ResponseDataset};
use crate::screening::ExclusionConfig;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SkipModel {
    None,
    /// Every cell is skipped independently with this probability.
    Mcar { rate: f64 },
    /// `P(skip) = logistic(intercept + slope * (-theta))`.
    AbilityLinked { intercept: f64, slope: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorConfig {
    pub items: usize,
    pub participants: usize,
    pub log_a_mean: f64,
    pub log_a_sd: f64,
    pub b_min: f64,
    pub b_max: f64,
    pub theta_mean: f64,
    pub theta_sd: f64,
    pub skip: SkipModel,
    pub median_rt_ms: f64,
    pub rt_log_sd: f64,
    pub seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            items: 49,
            participants: 485,
            log_a_mean: 0.0,
            log_a_sd: 0.3,
            b_min: -2.5,
            b_max: 2.5,
            theta_mean: 0.0,
            theta_sd: 1.0,
            skip: SkipModel::Mcar { rate: 0.05 },
            median_rt_ms: 30_000.0,
            rt_log_sd: 0.3,
            seed: 1,
        }
    }
}

impl GeneratorConfig {
    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.items == 0 || self.participants == 0 {
            return bad("generator needs at least one item and one participant");
        }
        if !(self.log_a_sd >= 0.0 && self.theta_sd >= 0.0 && self.rt_log_sd >= 0.0) {
            return bad("standard deviations must be non-negative");
        }
        if !(self.b_max >= self.b_min) || !(self.median_rt_ms > 0.0) {
            return bad("invalid difficulty range or response time");
        }
        if let SkipModel::Mcar { rate } = self.skip {
            if !(0.0..=1.0).contains(&rate) {
                return bad("skip rate must lie in [0, 1]");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrueItem {
    pub item_id: String,
    pub true_a: f64,
    pub true_b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrueAbility {
    pub participant_id: String,
    pub true_theta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulatedStudy {
    pub bank: ItemBank,
    pub data: ResponseDataset,
    pub true_items: Vec<TrueItem>,
    pub true_abilities: Vec<TrueAbility>,
}

impl SimulatedStudy {
    pub fn truth_items_csv(&self) -> String {
        let mut out = String::from("item_id,true_a,true_b\n");
        for t in &self.true_items {
            out.push_str(&format!("{},{},{}\n", t.item_id, t.true_a, t.true_b));
        }
        out
    }

    pub fn truth_participants_csv(&self) -> String {
        let mut out = String::from("participant_id,true_theta\n");
        for t in &self.true_abilities {
            out.push_str(&format!("{},{}\n", t.participant_id, t.true_theta));
        }
        out
    }
}

pub fn item_id(k: usize) -> String {
    format!("item_{}", k + 1)
}

pub fn participant_id(j: usize) -> String {
    format!("p{:04}", j + 1)
}

/// Items cycle through the techniques and subtasks so every blueprint row and
/// column is used once the bank has at least 11 items.
fn synthetic_bank(n: usize) -> Result<ItemBank> {
    let items = (0..n)
        .map(|k| {
            let subtask = Subtask::ALL[k % Subtask::ALL.len()];
            Item {
                item_id: item_id(k),
                visualization_id: format!("viz_{}", k / 4 + 1),
                technique: Technique::ALL[k % Technique::ALL.len()],
                task_family: subtask.family(),
                task_subtask: subtask,
                format: ItemFormat::Mcq,
                option_count: 4,
                correct_key: "A".into(),
                stem: None,
            }
        })
        .collect();
    ItemBank::new(items)
}

fn draw_outcome<R: Rng>(rng: &mut R, skip_p: f64, p_correct: f64) -> Outcome {
    if rng.random::<f64>() < skip_p {
        Outcome::Skip
    } else if rng.random::<f64>() < p_correct {
        Outcome::Correct
    } else {
        Outcome::Incorrect
    }
}

/// Draws a bank, true parameters, and a complete response log.
pub fn generate(config: &GeneratorConfig) -> Result<SimulatedStudy> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let bank = synthetic_bank(config.items)?;
    let log_a = Normal::new(config.log_a_mean, config.log_a_sd).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let theta_dist = Normal::new(config.theta_mean, config.theta_sd).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let rt_dist =
        LogNormal::new(config.median_rt_ms.ln(), config.rt_log_sd).map_err(|e| Error::InvalidConfig(e.to_string()))?;

    let true_items: Vec<TrueItem> = (0..config.items)
        .map(|k| TrueItem {
            item_id: item_id(k),
            true_a: log_a.sample(&mut rng).exp(),
            true_b: if config.b_max > config.b_min {
                rng.random_range(config.b_min..config.b_max)
            } else {
                config.b_min
            },
        })
        .collect();
    let true_abilities: Vec<TrueAbility> = (0..config.participants)
        .map(|j| TrueAbility {
            participant_id: participant_id(j),
            true_theta: theta_dist.sample(&mut rng),
        })
        .collect();

    let mut outcomes = Vec::with_capacity(config.participants);
    let mut rt_ms = Vec::with_capacity(config.participants);
    let mut participants = Vec::with_capacity(config.participants);
    for ability in &true_abilities {
        let theta = ability.true_theta;
        let skip_p = match config.skip {
            SkipModel::None => 0.0,
            SkipModel::Mcar { rate } => rate,
            SkipModel::AbilityLinked { intercept, slope } => logistic(intercept + slope * -theta),
        };
        let row: Vec<Outcome> = true_items
            .iter()
            .map(|it| draw_outcome(&mut rng, skip_p, logistic(it.true_a * (theta - it.true_b))))
            .collect();
        let times: Vec<f64> = (0..config.items).map(|_| rt_dist.sample(&mut rng).round()).collect();
        let overhead_s = rng.random_range(30.0..120.0);
        participants.push(ParticipantMeta {
            participant_id: ability.participant_id.clone(),
            total_time_s: (times.iter().sum::<f64>() / 1000.0 + overhead_s).round(),
            attention_correct: 3,
            device_ok: true,
        });
        outcomes.push(row);
        rt_ms.push(times);
    }
    Ok(SimulatedStudy {
        data: ResponseDataset {
            item_ids: bank.items.iter().map(|i| i.item_id.clone()).collect(),
            participants,
            outcomes,
            rt_ms,
        },
        bank,
        true_items,
        true_abilities,
    })
}

// ============================================================================
// Engineered exclusion cohorts
// ============================================================================

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EngineeredRole {
    Regular,
    DeviceFailure,
    RandomClicker,
    /// Among the fastest completers and skipping more than the skip limit.
    ShortAndSkippy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CohortCounts {
    pub device_failures: usize,
    pub random_clickers: usize,
    pub short_and_skippy: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineeredCohort {
    pub study: SimulatedStudy,
    pub roles: BTreeMap<String, EngineeredRole>,
}

impl EngineeredCohort {
    pub fn expected_retained(&self) -> usize {
        self.roles.values().filter(|&&r| r == EngineeredRole::Regular).count()
    }
}

/// Generates a cohort in which exactly the requested participants trip each
/// exclusion rule under `exclusion`; everyone else is retained.
pub fn engineer_exclusion_cohort(
    config: &GeneratorConfig,
    counts: &CohortCounts,
    exclusion: &ExclusionConfig,
) -> Result<EngineeredCohort> {
    let n = config.participants;
    let n_items = config.items;
    let flagged = counts.device_failures + counts.random_clickers + counts.short_and_skippy;
    if flagged > n {
        return Err(Error::InvalidConfig(format!(
            "{flagged} engineered participants requested but only {n} generated"
        )));
    }
    let pool = n - counts.device_failures - counts.random_clickers;
    let short_slots = if pool > 0 {
        ((pool - 1) as f64 * exclusion.short_time_quantile).floor() as usize
    } else {
        0
    };
    if counts.short_and_skippy > short_slots {
        return Err(Error::InvalidConfig(format!(
            "at most {short_slots} participants can fall below the completion-time cutoff"
        )));
    }
    let clicker_limit = exclusion.clicker_item_limit(n_items);
    let skip_limit = (exclusion.high_skip_fraction * n_items as f64).floor() as usize;
    if clicker_limit >= n_items || skip_limit >= n_items {
        return Err(Error::InvalidConfig("too few items to trip the clicker and skip rules".into()));
    }

    let mut study = generate(config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed_c0407);
    let fast_rt = exclusion.clicker_rt_ms;

    // Regular participants: never fast, never above the skip limit.
    for j in 0..n {
        for t in study.data.rt_ms[j].iter_mut() {
            *t = t.max(fast_rt + 500.0);
        }
        let skipped: Vec<usize> = (0..n_items).filter(|&i| study.data.outcomes[j][i] == Outcome::Skip).collect();
        for &i in skipped.iter().skip(skip_limit) {
            study.data.outcomes[j][i] = Outcome::Incorrect;
        }
        let total_ms: f64 = study.data.rt_ms[j].iter().sum();
        study.data.participants[j].total_time_s = (total_ms / 1000.0 + 60.0).round();
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut roles: BTreeMap<String, EngineeredRole> = study
        .data
        .participants
        .iter()
        .map(|p| (p.participant_id.clone(), EngineeredRole::Regular))
        .collect();
    let (dev, rest) = order.split_at(counts.device_failures);
    let (clk, rest) = rest.split_at(counts.random_clickers);
    let (dual, _) = rest.split_at(counts.short_and_skippy);

    for &j in dev {
        study.data.participants[j].device_ok = false;
        roles.insert(study.data.participants[j].participant_id.clone(), EngineeredRole::DeviceFailure);
    }
    for &j in clk {
        let mut cols: Vec<usize> = (0..n_items).collect();
        cols.shuffle(&mut rng);
        let fast = (clicker_limit + 1 + n_items / 4).min(n_items);
        for &i in &cols[..fast] {
            study.data.rt_ms[j][i] = rng.random_range(800.0..fast_rt * 0.6).round();
        }
        let total_ms: f64 = study.data.rt_ms[j].iter().sum();
        study.data.participants[j].total_time_s = (total_ms / 1000.0 + 30.0).round();
        roles.insert(study.data.participants[j].participant_id.clone(), EngineeredRole::RandomClicker);
    }
    for &j in dual {
        // Slow enough per item to avoid the clicker rule, fast enough overall,
        // with skips above the limit.
        for t in study.data.rt_ms[j].iter_mut() {
            *t = rng.random_range(fast_rt + 200.0..fast_rt + 1500.0).round();
        }
        let mut cols: Vec<usize> = (0..n_items).collect();
        cols.shuffle(&mut rng);
        let skips = (skip_limit + 1 + n_items / 10).min(n_items);
        for (k, &i) in cols.iter().enumerate() {
            if k < skips {
                study.data.outcomes[j][i] = Outcome::Skip;
            } else if study.data.outcomes[j][i] == Outcome::Skip {
                study.data.outcomes[j][i] = Outcome::Incorrect;
            }
        }
        let total_ms: f64 = study.data.rt_ms[j].iter().sum();
        study.data.participants[j].total_time_s = (total_ms / 1000.0).round();
        roles.insert(study.data.participants[j].participant_id.clone(), EngineeredRole::ShortAndSkippy);
    }
    Ok(EngineeredCohort { study, roles })
}
