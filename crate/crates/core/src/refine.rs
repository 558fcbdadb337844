//! Evidence-based item selection. Each item receives named flags from its
//! classical statistics and its posterior medians; an item is removed when a
//! configurable conjunction of flags holds and the evidence converges, i.e.
//! at least one classical and one model-based flag are raised.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::ctt::CttReport;
use crate::error::{Error, Result};
use crate::irt::IrtSummary;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Flag {
    LowDiscrimination,
    NegativeDiscrimination,
    Hard,
    WeakSlope,
    ExtremeLocation,
}

impl Flag {
    pub const ALL: [Flag; 5] = [
        Flag::LowDiscrimination,
        Flag::NegativeDiscrimination,
        Flag::Hard,
        Flag::WeakSlope,
        Flag::ExtremeLocation,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Flag::LowDiscrimination => "low_discrimination",
            Flag::NegativeDiscrimination => "negative_discrimination",
            Flag::Hard => "hard",
            Flag::WeakSlope => "weak_slope",
            Flag::ExtremeLocation => "extreme_location",
        }
    }

    pub fn is_classical(self) -> bool {
        matches!(self, Flag::LowDiscrimination | Flag::NegativeDiscrimination | Flag::Hard)
    }
}

impl fmt::Display for Flag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Flag {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Flag::ALL
            .into_iter()
            .find(|f| f.as_str() == s.trim())
            .ok_or_else(|| Error::InvalidConfig(format!("unknown flag {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FlagThresholds {
    /// `low_discrimination` when r is below this.
    pub low_r: f64,
    /// `negative_discrimination` when r is below this.
    pub negative_r: f64,
    /// `hard` when P is below this.
    pub hard_p: f64,
    /// `weak_slope` when the median discrimination is below this.
    pub weak_a: f64,
    /// `extreme_location` when the absolute median easiness exceeds this.
    pub extreme_abs_e: f64,
}

impl Default for FlagThresholds {
    fn default() -> Self {
        FlagThresholds {
            low_r: 0.10,
            negative_r: 0.0,
            hard_p: 0.50,
            weak_a: 0.50,
            extreme_abs_e: 3.0,
        }
    }
}

impl FlagThresholds {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Conjunction of flags that triggers removal.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rule {
    pub all_of: BTreeSet<Flag>,
}

impl Default for Rule {
    fn default() -> Self {
        Rule {
            all_of: [Flag::LowDiscrimination, Flag::WeakSlope, Flag::ExtremeLocation].into(),
        }
    }
}

impl Rule {
    pub fn new(flags: impl IntoIterator<Item = Flag>) -> Result<Self> {
        let all_of: BTreeSet<Flag> = flags.into_iter().collect();
        if all_of.is_empty() {
            return Err(Error::InvalidConfig("removal rule needs at least one flag".into()));
        }
        Ok(Rule { all_of })
    }

    pub fn matches(&self, flags: &BTreeSet<Flag>) -> bool {
        self.all_of.is_subset(flags)
    }
}

impl FromStr for Rule {
    type Err = Error;
    /// Comma-separated flag names.
    fn from_str(s: &str) -> Result<Self> {
        Rule::new(
            s.split(',')
                .filter(|t| !t.trim().is_empty())
                .map(Flag::from_str)
                .collect::<Result<Vec<_>>>()?,
        )
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = self.all_of.iter().map(|f| f.as_str()).collect();
        f.write_str(&names.join(","))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemEvidence {
    pub item_id: String,
    pub p: f64,
    pub r: f64,
    pub e: f64,
    pub a: f64,
    pub flags: BTreeSet<Flag>,
}

impl ItemEvidence {
    pub fn classical_flags(&self) -> impl Iterator<Item = Flag> + '_ {
        self.flags.iter().copied().filter(|f| f.is_classical())
    }

    pub fn model_flags(&self) -> impl Iterator<Item = Flag> + '_ {
        self.flags.iter().copied().filter(|f| !f.is_classical())
    }

    pub fn converging(&self) -> bool {
        self.classical_flags().next().is_some() && self.model_flags().next().is_some()
    }
}

pub fn flags_for(p: f64, r: f64, e: f64, a: f64, t: &FlagThresholds) -> BTreeSet<Flag> {
    let mut flags = BTreeSet::new();
    if r < t.low_r {
        flags.insert(Flag::LowDiscrimination);
    }
    if r < t.negative_r {
        flags.insert(Flag::NegativeDiscrimination);
    }
    if p < t.hard_p {
        flags.insert(Flag::Hard);
    }
    if a < t.weak_a {
        flags.insert(Flag::WeakSlope);
    }
    if e.abs() > t.extreme_abs_e {
        flags.insert(Flag::ExtremeLocation);
    }
    flags
}

/// Joins the two reports by item id; both must cover the same item set.
pub fn flag_items(ctt: &CttReport, irt: &IrtSummary, thresholds: &FlagThresholds) -> Result<Vec<ItemEvidence>> {
    let ctt_ids: BTreeSet<&str> = ctt.items.iter().map(|s| s.item_id.as_str()).collect();
    let irt_items = irt.items();
    let irt_ids: BTreeSet<&str> = irt_items.iter().map(|s| s.item_id.as_str()).collect();
    if ctt_ids != irt_ids {
        let only_ctt: Vec<&&str> = ctt_ids.difference(&irt_ids).collect();
        let only_irt: Vec<&&str> = irt_ids.difference(&ctt_ids).collect();
        return Err(Error::ItemSetMismatch(format!(
            "only in classical report: {only_ctt:?}; only in model summary: {only_irt:?}"
        )));
    }
    ctt.items
        .iter()
        .map(|c| {
            let m = irt.get(&c.item_id).expect("item sets checked above");
            let (e, a) = (m.e.median, m.a.median);
            if ![c.p, c.r, e, a].iter().all(|v| v.is_finite()) {
                return Err(Error::NonFinite(format!("evidence for {}", c.item_id)));
            }
            Ok(ItemEvidence {
                item_id: c.item_id.clone(),
                p: c.p,
                r: c.r,
                e,
                a,
                flags: flags_for(c.p, c.r, e, a, thresholds),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemovedItem {
    pub item_id: String,
    pub classical_flags: Vec<Flag>,
    pub model_flags: Vec<Flag>,
    pub rationale: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub rule: Rule,
    pub thresholds: FlagThresholds,
    pub retained: Vec<String>,
    pub removed: Vec<RemovedItem>,
    pub evidence: Vec<ItemEvidence>,
}

fn describe(ev: &ItemEvidence, t: &FlagThresholds) -> String {
    let part = |f: Flag| match f {
        Flag::LowDiscrimination => format!("r = {:.2} < {:.2}", ev.r, t.low_r),
        Flag::NegativeDiscrimination => format!("r = {:.2} < {:.2}", ev.r, t.negative_r),
        Flag::Hard => format!("P = {:.2} < {:.2}", ev.p, t.hard_p),
        Flag::WeakSlope => format!("a = {:.2} < {:.2}", ev.a, t.weak_a),
        Flag::ExtremeLocation => format!("|e| = {:.2} > {:.2}", ev.e.abs(), t.extreme_abs_e),
    };
    ev.flags.iter().map(|&f| format!("{f} ({})", part(f))).collect::<Vec<_>>().join("; ")
}

pub fn select_items(
    ctt: &CttReport,
    irt: &IrtSummary,
    rule: &Rule,
    thresholds: &FlagThresholds,
) -> Result<SelectionReport> {
    if rule.all_of.is_empty() {
        return Err(Error::InvalidConfig("removal rule needs at least one flag".into()));
    }
    let evidence = flag_items(ctt, irt, thresholds)?;
    let mut retained = Vec::new();
    let mut removed = Vec::new();
    for ev in &evidence {
        if rule.matches(&ev.flags) && ev.converging() {
            removed.push(RemovedItem {
                item_id: ev.item_id.clone(),
                classical_flags: ev.classical_flags().collect(),
                model_flags: ev.model_flags().collect(),
                rationale: describe(ev, thresholds),
            });
        } else {
            retained.push(ev.item_id.clone());
        }
    }
    Ok(SelectionReport {
        rule: rule.clone(),
        thresholds: *thresholds,
        retained,
        removed,
        evidence,
    })
}

impl SelectionReport {
    pub fn removed_ids(&self) -> BTreeSet<&str> {
        self.removed.iter().map(|r| r.item_id.as_str()).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn text_summary(&self) -> String {
        let mut out = format!(
            "Rule: remove when all of [{}] hold with converging classical and model evidence\n",
            self.rule
        );
        out.push_str(&format!(
            "Retained {} of {} items; removed {}\n",
            self.retained.len(),
            self.evidence.len(),
            self.removed.len()
        ));
        for r in &self.removed {
            out.push_str(&format!("  {}: {}\n", r.item_id, r.rationale));
        }
        out
    }
}
