//! Participant exclusion rules for the tryout sample.
//!
//! A participant is dropped for a device failure, for random clicking, for
//! failing the attention checks, or when both low-effort indicators (very
//! short completion time and heavy skipping) fire together.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::responses::{Outcome, ResponseDataset};
use crate::stats::quantile;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExclusionConfig {
    /// Responses faster than this count toward random clicking.
    pub clicker_rt_ms: f64,
    /// Clicker if fast responses exceed `ceil(fraction * item_count)`.
    pub clicker_item_fraction: f64,
    pub short_time_quantile: f64,
    pub high_skip_fraction: f64,
    pub min_attention_correct: u8,
}

impl Default for ExclusionConfig {
    fn default() -> Self {
        ExclusionConfig {
            clicker_rt_ms: 10_000.0,
            clicker_item_fraction: 0.33,
            short_time_quantile: 0.05,
            high_skip_fraction: 0.25,
            min_attention_correct: 2,
        }
    }
}

impl ExclusionConfig {
    pub fn clicker_item_limit(&self, item_count: usize) -> usize {
        // Guard against 0.33 * n landing a hair above an integer.
        let raw = self.clicker_item_fraction * item_count as f64;
        (raw - 1e-9).ceil().max(0.0) as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticipantFlags {
    pub participant_id: String,
    pub device_fail: bool,
    pub random_clicker: bool,
    pub short_time_5pct: bool,
    pub high_skip_25pct: bool,
    pub attention_fail: bool,
    pub retained: bool,
}

impl ParticipantFlags {
    fn decide(&mut self) {
        self.retained = !self.device_fail
            && !self.random_clicker
            && !self.attention_fail
            && !(self.short_time_5pct && self.high_skip_25pct);
    }
}

/// Tukey fence over total completion time; diagnostic only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FenceStats {
    pub q1: f64,
    pub q3: f64,
    pub iqr: f64,
    pub lower_fence: f64,
    pub below_fence: usize,
}

impl FenceStats {
    pub fn of(times: &[f64]) -> FenceStats {
        let q1 = quantile(times, 0.25);
        let q3 = quantile(times, 0.75);
        let iqr = q3 - q1;
        let lower_fence = q1 - 1.5 * iqr;
        FenceStats {
            q1,
            q3,
            iqr,
            lower_fence,
            below_fence: times.iter().filter(|&&t| t < lower_fence).count(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExclusionReport {
    pub config: ExclusionConfig,
    pub clicker_item_limit: usize,
    /// Completion-time cutoff (seconds) for the short-time flag.
    pub time_cutoff_s: f64,
    pub fence: FenceStats,
    pub participants: Vec<ParticipantFlags>,
}

impl ExclusionReport {
    pub fn retained_ids(&self) -> Vec<String> {
        self.participants
            .iter()
            .filter(|p| p.retained)
            .map(|p| p.participant_id.clone())
            .collect()
    }

    pub fn retained_count(&self) -> usize {
        self.participants.iter().filter(|p| p.retained).count()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "participant_id,device_fail,random_clicker,short_time_5pct,high_skip_25pct,attention_fail,retained\n",
        );
        for p in &self.participants {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                p.participant_id,
                p.device_fail,
                p.random_clicker,
                p.short_time_5pct,
                p.high_skip_25pct,
                p.attention_fail,
                p.retained
            ));
        }
        out
    }
}

/// The short-time cutoff is taken over participants that passed the device
/// and clicker checks; the fence is reported over the same pool.
pub fn apply_exclusions(data: &ResponseDataset, config: &ExclusionConfig) -> Result<ExclusionReport> {
    if data.participant_count() == 0 {
        return Err(Error::Empty("dataset"));
    }
    let items = data.item_count();
    let limit = config.clicker_item_limit(items);
    let mut flags: Vec<ParticipantFlags> = data
        .participants
        .iter()
        .enumerate()
        .map(|(j, p)| {
            let fast = data.rt_ms[j].iter().filter(|&&rt| rt < config.clicker_rt_ms).count();
            let skips = data.outcomes[j].iter().filter(|&&o| o == Outcome::Skip).count();
            ParticipantFlags {
                participant_id: p.participant_id.clone(),
                device_fail: !p.device_ok,
                random_clicker: fast > limit,
                short_time_5pct: false,
                high_skip_25pct: items > 0 && skips as f64 / items as f64 > config.high_skip_fraction,
                attention_fail: p.attention_correct < config.min_attention_correct,
                retained: false,
            }
        })
        .collect();

    let pool: Vec<f64> = flags
        .iter()
        .zip(&data.participants)
        .filter(|(f, _)| !f.device_fail && !f.random_clicker)
        .map(|(_, p)| p.total_time_s)
        .collect();
    let (time_cutoff_s, fence) = if pool.is_empty() {
        (f64::NEG_INFINITY, FenceStats::of(&[0.0]))
    } else {
        (quantile(&pool, config.short_time_quantile), FenceStats::of(&pool))
    };
    for (f, p) in flags.iter_mut().zip(&data.participants) {
        f.short_time_5pct = p.total_time_s < time_cutoff_s;
        f.decide();
    }
    Ok(ExclusionReport {
        config: config.clone(),
        clicker_item_limit: limit,
        time_cutoff_s,
        fence,
        participants: flags,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::responses::ParticipantMeta;

    fn dataset(times: &[f64], skips: &[usize], items: usize) -> ResponseDataset {
        let participants = times
            .iter()
            .enumerate()
            .map(|(j, &t)| ParticipantMeta {
                participant_id: format!("p{j}"),
                total_time_s: t,
                attention_correct: 3,
                device_ok: true,
            })
            .collect();
        let outcomes = skips
            .iter()
            .map(|&s| (0..items).map(|i| if i < s { Outcome::Skip } else { Outcome::Correct }).collect())
            .collect();
        ResponseDataset {
            item_ids: (0..items).map(|i| format!("i{i}")).collect(),
            participants,
            outcomes,
            rt_ms: vec![vec![20_000.0; items]; times.len()],
        }
    }

    #[test]
    fn clicker_limit_matches_seventeen_of_fifty_one() {
        assert_eq!(ExclusionConfig::default().clicker_item_limit(51), 17);
        assert_eq!(ExclusionConfig::default().clicker_item_limit(100), 33);
    }

    #[test]
    fn fence_from_hand_arithmetic() {
        let f = FenceStats::of(&[10.0, 20.0, 30.0, 40.0, 50.0]);
        assert_eq!((f.q1, f.q3, f.iqr), (20.0, 40.0, 20.0));
        assert_eq!(f.lower_fence, -10.0);
        assert_eq!(f.below_fence, 0);
    }

    #[test]
    fn unflagged_participant_is_retained() {
        let data = dataset(&[100.0, 200.0, 300.0, 400.0, 500.0], &[0; 5], 8);
        let report = apply_exclusions(&data, &ExclusionConfig::default()).unwrap();
        let mid = &report.participants[2];
        assert!(mid.retained && !mid.short_time_5pct && !mid.high_skip_25pct);
    }

    #[test]
    fn low_effort_requires_both_indicators() {
        // p0 fastest with heavy skipping; p1 heavy skipping only.
        let data = dataset(&[50.0, 400.0, 300.0, 350.0, 500.0], &[4, 4, 0, 0, 0], 8);
        let report = apply_exclusions(&data, &ExclusionConfig::default()).unwrap();
        assert!(report.participants[0].short_time_5pct && report.participants[0].high_skip_25pct);
        assert!(!report.participants[0].retained);
        assert!(report.participants[1].high_skip_25pct && report.participants[1].retained);
        assert_eq!(report.retained_count(), 4);
    }

    #[test]
    fn device_clicker_and_attention_flags() {
        let mut data = dataset(&[100.0, 200.0, 300.0], &[0; 3], 6);
        data.participants[0].device_ok = false;
        data.participants[1].attention_correct = 1;
        data.rt_ms[2] = vec![500.0; 6];
        let report = apply_exclusions(&data, &ExclusionConfig::default()).unwrap();
        assert!(report.participants[0].device_fail);
        assert!(report.participants[1].attention_fail);
        assert!(report.participants[2].random_clicker);
        assert_eq!(report.retained_count(), 0);
    }

    #[test]
    fn empty_dataset_is_an_error() {
        let data = dataset(&[], &[], 3);
        assert!(matches!(apply_exclusions(&data, &ExclusionConfig::default()), Err(Error::Empty(_))));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn adding_a_skip_never_clears_high_skip(skips in proptest::collection::vec(0usize..12, 1..20), who in 0usize..20) {
                let times: Vec<f64> = (0..skips.len()).map(|j| 100.0 + j as f64).collect();
                let data = dataset(&times, &skips, 12);
                let before = apply_exclusions(&data, &ExclusionConfig::default()).unwrap();
                let j = who % skips.len();
                let mut more = skips.clone();
                more[j] = (more[j] + 1).min(12);
                let after = apply_exclusions(&dataset(&times, &more, 12), &ExclusionConfig::default()).unwrap();
                prop_assert!(!before.participants[j].high_skip_25pct || after.participants[j].high_skip_25pct);
            }
        }
    }
}
