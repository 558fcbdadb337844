//! Response logs: the participant by item outcome matrix plus timing and
//! screening metadata.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bank::{expect_header, ItemBank};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Correct,
    Incorrect,
    Skip,
}

impl Outcome {
    /// Dichotomous score used by classical statistics: skips score 0.
    pub fn score(self) -> f64 {
        match self {
            Outcome::Correct => 1.0,
            Outcome::Incorrect | Outcome::Skip => 0.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Correct => "correct",
            Outcome::Incorrect => "incorrect",
            Outcome::Skip => "skip",
        }
    }
}

impl std::str::FromStr for Outcome {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim() {
            "correct" => Ok(Outcome::Correct),
            "incorrect" => Ok(Outcome::Incorrect),
            "skip" => Ok(Outcome::Skip),
            other => Err(format!("malformed outcome `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticipantMeta {
    pub participant_id: String,
    pub total_time_s: f64,
    pub attention_correct: u8,
    pub device_ok: bool,
}

/// Participant-major outcome matrix. Row `j` belongs to `participants[j]`,
/// column `i` to `item_ids[i]`; every cell is populated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseDataset {
    pub item_ids: Vec<String>,
    pub participants: Vec<ParticipantMeta>,
    pub outcomes: Vec<Vec<Outcome>>,
    pub rt_ms: Vec<Vec<f64>>,
}

impl ResponseDataset {
    pub fn participant_count(&self) -> usize {
        self.participants.len()
    }

    pub fn item_count(&self) -> usize {
        self.item_ids.len()
    }

    pub fn item_index(&self, item_id: &str) -> Option<usize> {
        self.item_ids.iter().position(|id| id == item_id)
    }

    pub fn participant_index(&self, participant_id: &str) -> Option<usize> {
        self.participants
            .iter()
            .position(|p| p.participant_id == participant_id)
    }

    /// Column of 0/1 scores for an item (skip = 0).
    pub fn item_scores(&self, item: usize) -> Vec<f64> {
        self.outcomes.iter().map(|row| row[item].score()).collect()
    }

    /// Raw total (correct count) per participant.
    pub fn raw_totals(&self) -> Vec<f64> {
        self.outcomes
            .iter()
            .map(|row| row.iter().filter(|&&o| o == Outcome::Correct).count() as f64)
            .collect()
    }

    pub fn skip_rates(&self) -> Vec<f64> {
        let n = self.item_count().max(1) as f64;
        self.outcomes
            .iter()
            .map(|row| row.iter().filter(|&&o| o == Outcome::Skip).count() as f64 / n)
            .collect()
    }

    /// Rows restricted to the given participant indices, in the given order.
    pub fn select_participants(&self, rows: &[usize]) -> ResponseDataset {
        ResponseDataset {
            item_ids: self.item_ids.clone(),
            participants: rows.iter().map(|&j| self.participants[j].clone()).collect(),
            outcomes: rows.iter().map(|&j| self.outcomes[j].clone()).collect(),
            rt_ms: rows.iter().map(|&j| self.rt_ms[j].clone()).collect(),
        }
    }

    /// Rows whose ids appear in `ids`.
    pub fn retain_participants<S: AsRef<str>>(&self, ids: &[S]) -> ResponseDataset {
        let keep: std::collections::HashSet<&str> = ids.iter().map(|s| s.as_ref()).collect();
        let rows: Vec<usize> = (0..self.participant_count())
            .filter(|&j| keep.contains(self.participants[j].participant_id.as_str()))
            .collect();
        self.select_participants(&rows)
    }

    /// Columns restricted to the given item ids, preserving dataset order.
    pub fn retain_items<S: AsRef<str>>(&self, ids: &[S]) -> ResponseDataset {
        let keep: std::collections::HashSet<&str> = ids.iter().map(|s| s.as_ref()).collect();
        let cols: Vec<usize> = (0..self.item_count())
            .filter(|&i| keep.contains(self.item_ids[i].as_str()))
            .collect();
        ResponseDataset {
            item_ids: cols.iter().map(|&i| self.item_ids[i].clone()).collect(),
            participants: self.participants.clone(),
            outcomes: self
                .outcomes
                .iter()
                .map(|row| cols.iter().map(|&i| row[i]).collect())
                .collect(),
            rt_ms: self
                .rt_ms
                .iter()
                .map(|row| cols.iter().map(|&i| row[i]).collect())
                .collect(),
        }
    }

    pub fn responses_csv(&self) -> String {
        let mut out = String::from("participant_id,item_id,outcome,rt_ms\n");
        for (j, p) in self.participants.iter().enumerate() {
            for (i, item) in self.item_ids.iter().enumerate() {
                out.push_str(&format!(
                    "{},{},{},{}\n",
                    p.participant_id,
                    item,
                    self.outcomes[j][i].as_str(),
                    self.rt_ms[j][i]
                ));
            }
        }
        out
    }

    pub fn participants_csv(&self) -> String {
        let mut out = String::from("participant_id,total_time_s,attention_correct,device_ok\n");
        for p in &self.participants {
            out.push_str(&format!(
                "{},{},{},{}\n",
                p.participant_id, p.total_time_s, p.attention_correct, p.device_ok
            ));
        }
        out
    }
}

fn parse_field<T: std::str::FromStr>(row: usize, name: &str, value: &str) -> Result<T> {
    value.trim().parse().map_err(|_| Error::Parse {
        row,
        message: format!("invalid {name} `{value}`"),
    })
}

fn read_participants<R: std::io::Read>(reader: R) -> Result<Vec<ParticipantMeta>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    expect_header(
        &rdr.headers()?.clone(),
        &["participant_id", "total_time_s", "attention_correct", "device_ok"],
    )?;
    let mut out: Vec<ParticipantMeta> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (idx, record) in rdr.records().enumerate() {
        let row = idx + 2;
        let record = record?;
        let id = record[0].to_owned();
        if !seen.insert(id.clone()) {
            return Err(Error::Parse {
                row,
                message: format!("duplicate participant `{id}`"),
            });
        }
        let total_time_s: f64 = parse_field(row, "total_time_s", &record[1])?;
        let attention_correct: u8 = parse_field(row, "attention_correct", &record[2])?;
        if attention_correct > 3 || !(total_time_s >= 0.0) {
            return Err(Error::Parse {
                row,
                message: "attention_correct must be 0-3 and total_time_s >= 0".into(),
            });
        }
        out.push(ParticipantMeta {
            participant_id: id,
            total_time_s,
            attention_correct,
            device_ok: parse_field(row, "device_ok", &record[3])?,
        });
    }
    Ok(out)
}

/// Builds a complete dataset from `participant_id,item_id,outcome,rt_ms` rows
/// and `participant_id,total_time_s,attention_correct,device_ok` rows. Item
/// columns follow bank order.
pub fn ingest<R1: std::io::Read, R2: std::io::Read>(
    responses: R1,
    participants: R2,
    bank: &ItemBank,
) -> Result<ResponseDataset> {
    let participants = read_participants(participants)?;
    let item_ids: Vec<String> = bank.items.iter().map(|it| it.item_id.clone()).collect();
    let item_pos: HashMap<&str, usize> = item_ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
    let part_pos: HashMap<&str, usize> = participants
        .iter()
        .enumerate()
        .map(|(j, p)| (p.participant_id.as_str(), j))
        .collect();

    let mut cells: Vec<Vec<Option<(Outcome, f64)>>> = vec![vec![None; item_ids.len()]; participants.len()];
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(responses);
    expect_header(&rdr.headers()?.clone(), &["participant_id", "item_id", "outcome", "rt_ms"])?;
    for (idx, record) in rdr.records().enumerate() {
        let row = idx + 2;
        let record = record?;
        if record.len() != 4 {
            return Err(Error::Parse {
                row,
                message: format!("expected 4 fields, found {}", record.len()),
            });
        }
        let j = *part_pos
            .get(&record[0])
            .ok_or_else(|| Error::UnknownParticipant(record[0].to_owned()))?;
        let i = *item_pos
            .get(&record[1])
            .ok_or_else(|| Error::UnknownItem(record[1].to_owned()))?;
        let outcome: Outcome = record[2].parse().map_err(|message| Error::Parse { row, message })?;
        let rt: f64 = parse_field(row, "rt_ms", &record[3])?;
        if !(rt >= 0.0) {
            return Err(Error::Parse {
                row,
                message: format!("negative response time {rt}"),
            });
        }
        if cells[j][i].is_some() {
            return Err(Error::DuplicateResponse {
                participant: record[0].to_owned(),
                item: record[1].to_owned(),
                row,
            });
        }
        cells[j][i] = Some((outcome, rt));
    }

    let mut outcomes = Vec::with_capacity(participants.len());
    let mut rt_ms = Vec::with_capacity(participants.len());
    for (j, row) in cells.into_iter().enumerate() {
        let mut o_row = Vec::with_capacity(item_ids.len());
        let mut t_row = Vec::with_capacity(item_ids.len());
        for (i, cell) in row.into_iter().enumerate() {
            let (o, t) = cell.ok_or_else(|| Error::MissingResponse {
                participant: participants[j].participant_id.clone(),
                item: item_ids[i].clone(),
            })?;
            o_row.push(o);
            t_row.push(t);
        }
        outcomes.push(o_row);
        rt_ms.push(t_row);
    }
    Ok(ResponseDataset {
        item_ids,
        participants,
        outcomes,
        rt_ms,
    })
}

pub fn ingest_files(
    responses: impl AsRef<Path>,
    participants: impl AsRef<Path>,
    bank: &ItemBank,
) -> Result<ResponseDataset> {
    let open = |p: &Path| std::fs::File::open(p).map_err(|e| Error::io(p, e));
    ingest(open(responses.as_ref())?, open(participants.as_ref())?, bank)
}
