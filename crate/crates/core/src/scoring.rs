//! Raw and correction-for-guessing scores, plus sample descriptives.

use serde::{Deserialize, Serialize};

use crate::bank::ItemBank;
use crate::error::{Error, Result};
use crate::responses::{Outcome, ResponseDataset};
use crate::stats::{mean, Spread};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub participant_id: String,
    pub correct: usize,
    pub incorrect: usize,
    pub skipped: usize,
    pub raw_score: f64,
    pub corrected_score: f64,
}

/// Option counts aligned with the dataset's item columns.
pub fn option_counts(data: &ResponseDataset, bank: &ItemBank) -> Result<Vec<u32>> {
    data.item_ids
        .iter()
        .map(|id| {
            bank.get(id)
                .map(|it| it.option_count)
                .ok_or_else(|| Error::UnknownItem(id.clone()))
        })
        .collect()
}

/// Per-item contribution: +1 for correct, `-1/(k-1)` for incorrect, 0 for skip.
pub fn item_contribution(outcome: Outcome, option_count: u32) -> f64 {
    match outcome {
        Outcome::Correct => 1.0,
        Outcome::Incorrect => -1.0 / (option_count as f64 - 1.0),
        Outcome::Skip => 0.0,
    }
}

pub fn score_row(participant_id: &str, row: &[Outcome], options: &[u32]) -> ScoreRecord {
    let mut rec = ScoreRecord {
        participant_id: participant_id.to_owned(),
        correct: 0,
        incorrect: 0,
        skipped: 0,
        raw_score: 0.0,
        corrected_score: 0.0,
    };
    for (&o, &k) in row.iter().zip(options) {
        match o {
            Outcome::Correct => rec.correct += 1,
            Outcome::Incorrect => rec.incorrect += 1,
            Outcome::Skip => rec.skipped += 1,
        }
        rec.corrected_score += item_contribution(o, k);
    }
    rec.raw_score = rec.correct as f64;
    rec
}

pub fn score(data: &ResponseDataset, bank: &ItemBank, participant_id: &str) -> Result<ScoreRecord> {
    let j = data
        .participant_index(participant_id)
        .ok_or_else(|| Error::UnknownParticipant(participant_id.to_owned()))?;
    let options = option_counts(data, bank)?;
    Ok(score_row(participant_id, &data.outcomes[j], &options))
}

pub fn score_all(data: &ResponseDataset, bank: &ItemBank) -> Result<Vec<ScoreRecord>> {
    let options = option_counts(data, bank)?;
    Ok(data
        .participants
        .iter()
        .zip(&data.outcomes)
        .map(|(p, row)| score_row(&p.participant_id, row, &options))
        .collect())
}

pub fn scores_csv(records: &[ScoreRecord]) -> String {
    let mut out = String::from("participant_id,correct,incorrect,skipped,raw_score,corrected_score\n");
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{:.4}\n",
            r.participant_id, r.correct, r.incorrect, r.skipped, r.raw_score, r.corrected_score
        ));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemSkipRate {
    pub item_id: String,
    pub skip_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Descriptives {
    pub participants: usize,
    pub items: usize,
    pub raw: Spread,
    pub corrected: Spread,
    pub completion_time_s: Spread,
    pub response_time_ms: Spread,
    pub overall_skip_rate: f64,
    pub item_skip_rates: Vec<ItemSkipRate>,
    pub mean_raw_minus_corrected: f64,
}

pub fn descriptives(data: &ResponseDataset, bank: &ItemBank) -> Result<Descriptives> {
    if data.participant_count() == 0 {
        return Err(Error::Empty("retained participant set"));
    }
    let records = score_all(data, bank)?;
    let raw: Vec<f64> = records.iter().map(|r| r.raw_score).collect();
    let corrected: Vec<f64> = records.iter().map(|r| r.corrected_score).collect();
    let times: Vec<f64> = data.participants.iter().map(|p| p.total_time_s).collect();
    let rts: Vec<f64> = data.rt_ms.iter().flatten().copied().collect();
    let n = data.participant_count() as f64;
    let item_skip_rates = data
        .item_ids
        .iter()
        .enumerate()
        .map(|(i, id)| ItemSkipRate {
            item_id: id.clone(),
            skip_rate: data.outcomes.iter().filter(|row| row[i] == Outcome::Skip).count() as f64 / n,
        })
        .collect();
    let cells = (data.participant_count() * data.item_count()).max(1) as f64;
    let skips = data.outcomes.iter().flatten().filter(|&&o| o == Outcome::Skip).count() as f64;
    let gap: Vec<f64> = raw.iter().zip(&corrected).map(|(r, c)| r - c).collect();
    let empty = Spread { min: 0.0, max: 0.0, mean: 0.0, sd: 0.0 };
    Ok(Descriptives {
        participants: data.participant_count(),
        items: data.item_count(),
        raw: Spread::of(&raw).expect("nonempty"),
        corrected: Spread::of(&corrected).expect("nonempty"),
        completion_time_s: Spread::of(&times).expect("nonempty"),
        response_time_ms: Spread::of(&rts).unwrap_or(empty),
        overall_skip_rate: skips / cells,
        item_skip_rates,
        mean_raw_minus_corrected: mean(&gap),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::responses::ParticipantMeta;

    fn row(correct: usize, wrong: usize, skip: usize) -> Vec<Outcome> {
        let mut v = vec![Outcome::Correct; correct];
        v.extend(vec![Outcome::Incorrect; wrong]);
        v.extend(vec![Outcome::Skip; skip]);
        v
    }

    #[test]
    fn no_wrong_answers_means_no_penalty() {
        let r = score_row("p", &row(10, 0, 2), &[4; 12]);
        assert_eq!(r.corrected_score, 10.0);
        assert_eq!(r.raw_score, 10.0);
    }

    #[test]
    fn four_option_penalty() {
        let r = score_row("p", &row(10, 3, 0), &[4; 13]);
        assert!((r.corrected_score - 9.0).abs() < 1e-12);
    }

    #[test]
    fn mixed_formats_give_fractional_scores() {
        // one wrong 4-option (-1/3), one wrong TF (-1)
        let r = score_row("p", &row(3, 2, 0), &[4, 4, 4, 4, 2]);
        assert!((r.corrected_score - (3.0 - 1.0 / 3.0 - 1.0)).abs() < 1e-12);
    }

    fn data_of(rows: Vec<Vec<Outcome>>) -> ResponseDataset {
        let items = rows[0].len();
        ResponseDataset {
            item_ids: (0..items).map(|i| format!("i{i}")).collect(),
            participants: (0..rows.len())
                .map(|j| ParticipantMeta {
                    participant_id: format!("p{j}"),
                    total_time_s: 600.0,
                    attention_correct: 3,
                    device_ok: true,
                })
                .collect(),
            rt_ms: vec![vec![15_000.0; items]; rows.len()],
            outcomes: rows,
        }
    }

    fn bank_of(items: usize) -> ItemBank {
        use crate::bank::*;
        ItemBank::new(
            (0..items)
                .map(|i| Item {
                    item_id: format!("i{i}"),
                    visualization_id: "1".into(),
                    technique: Technique::ColorMapping,
                    task_family: TaskFamily::Search,
                    task_subtask: Subtask::Counting,
                    format: ItemFormat::Mcq,
                    option_count: 4,
                    correct_key: "A".into(),
                    stem: None,
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn identical_participants_have_zero_spread() {
        let data = data_of(vec![row(3, 1, 1); 4]);
        let d = descriptives(&data, &bank_of(5)).unwrap();
        assert_eq!(d.raw.sd, 0.0);
        assert_eq!(d.corrected.sd, 0.0);
        assert!((d.overall_skip_rate - 0.2).abs() < 1e-12);
    }

    #[test]
    fn single_perfect_participant() {
        let data = data_of(vec![row(49, 0, 0)]);
        let d = descriptives(&data, &bank_of(49)).unwrap();
        assert_eq!((d.raw.min, d.raw.max), (49.0, 49.0));
        assert_eq!(d.mean_raw_minus_corrected, 0.0);
    }

    #[test]
    fn unknown_participant_is_error() {
        let data = data_of(vec![row(1, 0, 0)]);
        assert!(matches!(score(&data, &bank_of(1), "nobody"), Err(Error::UnknownParticipant(_))));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn outcome() -> impl Strategy<Value = Outcome> {
            prop_oneof![Just(Outcome::Correct), Just(Outcome::Incorrect), Just(Outcome::Skip)]
        }

        proptest! {
            #[test]
            fn corrected_is_decomposable_and_bounded(
                cells in proptest::collection::vec((outcome(), 2u32..6), 1..60),
                seed in any::<u64>(),
            ) {
                let (row, opts): (Vec<_>, Vec<_>) = cells.iter().copied().unzip();
                let rec = score_row("p", &row, &opts);
                prop_assert_eq!(rec.correct + rec.incorrect + rec.skipped, row.len());
                prop_assert!(rec.corrected_score <= rec.raw_score + 1e-12);
                if rec.incorrect == 0 { prop_assert_eq!(rec.corrected_score, rec.raw_score); }
                let sum: f64 = cells.iter().map(|&(o, k)| item_contribution(o, k)).sum();
                prop_assert!((sum - rec.corrected_score).abs() < 1e-9);
                // item order does not matter
                let mut perm = cells.clone();
                let n = perm.len();
                perm.rotate_left((seed as usize) % n);
                perm.reverse();
                let (prow, popts): (Vec<_>, Vec<_>) = perm.into_iter().unzip();
                prop_assert!((score_row("p", &prow, &popts).corrected_score - rec.corrected_score).abs() < 1e-9);
            }
        }
    }
}
