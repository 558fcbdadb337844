//! Item bank model, content-validity ratios, and blueprint coverage.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

// ============================================================================
// Taxonomy
// ============================================================================

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Technique {
    ColorMapping,
    VolumeRendering,
    SurfaceRendering,
    TextureBased,
    IntegrationBased,
    MixedRendering,
    GlyphMeshPlot,
    ScientificIllustration,
}

impl Technique {
    pub const ALL: [Technique; 8] = [
        Technique::ColorMapping,
        Technique::VolumeRendering,
        Technique::SurfaceRendering,
        Technique::TextureBased,
        Technique::IntegrationBased,
        Technique::MixedRendering,
        Technique::GlyphMeshPlot,
        Technique::ScientificIllustration,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn label(self) -> &'static str {
        match self {
            Technique::ColorMapping => "Color Mapping",
            Technique::VolumeRendering => "Volume Rendering",
            Technique::SurfaceRendering => "Surface Rendering",
            Technique::TextureBased => "Texture-Based Vis.",
            Technique::IntegrationBased => "Integration-Based Vis.",
            Technique::MixedRendering => "Mixed Rendering",
            Technique::GlyphMeshPlot => "Glyph, Mesh, Plot",
            Technique::ScientificIllustration => "Scientific Illustration",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskFamily {
    Search,
    PatternRecognition,
    SpatialUnderstanding,
    QuantitativeEstimation,
    ShapeDescription,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Subtask {
    PresenceAbsence,
    Counting,
    Trend,
    Repetition,
    SpatialAbsolute,
    SpatialRelative,
    Intersection,
    AbsoluteEstimation,
    RelativeEstimationBinary,
    RelativeEstimationQuantitative,
    ShapeDescription,
}

impl Subtask {
    pub const ALL: [Subtask; 11] = [
        Subtask::PresenceAbsence,
        Subtask::Counting,
        Subtask::Trend,
        Subtask::Repetition,
        Subtask::SpatialAbsolute,
        Subtask::SpatialRelative,
        Subtask::Intersection,
        Subtask::AbsoluteEstimation,
        Subtask::RelativeEstimationBinary,
        Subtask::RelativeEstimationQuantitative,
        Subtask::ShapeDescription,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn family(self) -> TaskFamily {
        use Subtask::*;
        match self {
            PresenceAbsence | Counting => TaskFamily::Search,
            Trend | Repetition => TaskFamily::PatternRecognition,
            SpatialAbsolute | SpatialRelative | Intersection => TaskFamily::SpatialUnderstanding,
            AbsoluteEstimation | RelativeEstimationBinary | RelativeEstimationQuantitative => {
                TaskFamily::QuantitativeEstimation
            }
            ShapeDescription => TaskFamily::ShapeDescription,
        }
    }

    /// Short task label in `Family - Abbr` form.
    pub fn label(self) -> &'static str {
        use Subtask::*;
        match self {
            PresenceAbsence => "Search - P/A",
            Counting => "Search - Cnt",
            Trend => "Pattern Rec - Trnd",
            Repetition => "Pattern Rec - Rep",
            SpatialAbsolute => "Spatial Und - Abs",
            SpatialRelative => "Spatial Und - Rel",
            Intersection => "Spatial Und - Int",
            AbsoluteEstimation => "Quant Est - Abs",
            RelativeEstimationBinary => "Quant Est - Rel (B)",
            RelativeEstimationQuantitative => "Quant Est - Rel (Q)",
            ShapeDescription => "Shape Description",
        }
    }
}

// ============================================================================
// Items
// ============================================================================

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ItemFormat {
    #[serde(rename = "MCQ")]
    Mcq,
    #[serde(rename = "TF")]
    TrueFalse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Item {
    pub item_id: String,
    pub visualization_id: String,
    pub technique: Technique,
    pub task_family: TaskFamily,
    pub task_subtask: Subtask,
    pub format: ItemFormat,
    /// Answer options excluding Skip.
    pub option_count: u32,
    pub correct_key: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stem: Option<String>,
}

impl Item {
    pub fn validate(&self) -> Result<()> {
        let invalid = |reason: String| Error::InvalidItem {
            item: self.item_id.clone(),
            reason,
        };
        if self.option_count < 2 {
            return Err(invalid(format!("option_count {} < 2", self.option_count)));
        }
        if self.format == ItemFormat::TrueFalse && self.option_count != 2 {
            return Err(invalid(format!(
                "TF item must have 2 options, found {}",
                self.option_count
            )));
        }
        if self.task_subtask.family() != self.task_family {
            return Err(invalid(format!(
                "subtask {:?} belongs to family {:?}, not {:?}",
                self.task_subtask,
                self.task_subtask.family(),
                self.task_family
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ItemBank {
    pub items: Vec<Item>,
}

impl ItemBank {
    pub fn new(items: Vec<Item>) -> Result<Self> {
        let bank = ItemBank { items };
        bank.validate()?;
        Ok(bank)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for item in &self.items {
            item.validate()?;
            if !seen.insert(item.item_id.as_str()) {
                return Err(Error::DuplicateItem(item.item_id.clone()));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let bank: ItemBank = serde_json::from_str(text)?;
        bank.validate()?;
        Ok(bank)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("item bank serializes")
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn get(&self, item_id: &str) -> Option<&Item> {
        self.items.iter().find(|it| it.item_id == item_id)
    }

    pub fn contains(&self, item_id: &str) -> bool {
        self.get(item_id).is_some()
    }

    /// Bank restricted to the given ids, preserving bank order.
    pub fn subset<S: AsRef<str>>(&self, keep: &[S]) -> ItemBank {
        let keep: HashSet<&str> = keep.iter().map(|s| s.as_ref()).collect();
        ItemBank {
            items: self
                .items
                .iter()
                .filter(|it| keep.contains(it.item_id.as_str()))
                .cloned()
                .collect(),
        }
    }
}

// ============================================================================
// Content validity
// ============================================================================

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rating {
    Essential,
    Useful,
    NotNecessary,
}

impl std::str::FromStr for Rating {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim() {
            "essential" => Ok(Rating::Essential),
            "useful" => Ok(Rating::Useful),
            "not_necessary" => Ok(Rating::NotNecessary),
            other => Err(format!("unknown rating `{other}`")),
        }
    }
}

/// Exact rational number with a positive denominator.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Ratio {
    pub num: i64,
    pub den: i64,
}

impl Ratio {
    pub fn new(num: i64, den: i64) -> Ratio {
        assert!(den != 0, "zero denominator");
        let g = gcd(num.unsigned_abs(), den.unsigned_abs()).max(1) as i64;
        let sign = if den < 0 { -1 } else { 1 };
        Ratio {
            num: sign * num / g,
            den: sign * den / g,
        }
    }

    /// Exact value of a finite decimal, via its shortest round-trip representation.
    pub fn from_f64(x: f64) -> Result<Ratio> {
        if !x.is_finite() {
            return Err(Error::NonFinite(format!("threshold {x}")));
        }
        let text = format!("{x}");
        let (int_part, frac_part) = text.split_once('.').unwrap_or((&text, ""));
        let scale = 10_i64
            .checked_pow(frac_part.len() as u32)
            .ok_or_else(|| Error::InvalidConfig(format!("threshold {x} has too many digits")))?;
        let negative = int_part.starts_with('-');
        let int_val: i64 = int_part
            .trim_start_matches('-')
            .parse()
            .map_err(|_| Error::InvalidConfig(format!("threshold {x} out of range")))?;
        let frac_val: i64 = if frac_part.is_empty() { 0 } else { frac_part.parse().unwrap_or(0) };
        let magnitude = int_val * scale + frac_val;
        Ok(Ratio::new(if negative { -magnitude } else { magnitude }, scale))
    }

    pub fn to_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

impl PartialEq for Ratio {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == std::cmp::Ordering::Equal
    }
}

impl Eq for Ratio {}

impl PartialOrd for Ratio {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Ratio {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.num as i128 * other.den as i128).cmp(&(other.num as i128 * self.den as i128))
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // Shortest decimal that round-trips, e.g. 1, 0.6, -0.2.
        write!(f, "{}", self.to_f64())
    }
}

/// Expert panel ratings. The panel size is the number of distinct experts.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExpertRatingSet {
    pub experts: BTreeSet<String>,
    pub ratings: BTreeMap<String, BTreeMap<String, Rating>>,
}

impl ExpertRatingSet {
    pub fn expert_count(&self) -> usize {
        self.experts.len()
    }

    pub fn insert(&mut self, expert: &str, item: &str, rating: Rating) {
        self.experts.insert(expert.to_owned());
        self.ratings
            .entry(item.to_owned())
            .or_default()
            .insert(expert.to_owned(), rating);
    }

    pub fn essential_count(&self, item_id: &str) -> Option<usize> {
        self.ratings
            .get(item_id)
            .map(|r| r.values().filter(|&&v| v == Rating::Essential).count())
    }

    /// Parses `expert_id,item_id,rating` rows.
    pub fn from_csv<R: std::io::Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        expect_header(&headers, &["expert_id", "item_id", "rating"])?;
        let mut set = ExpertRatingSet::default();
        for (idx, record) in rdr.records().enumerate() {
            let row = idx + 2;
            let record = record?;
            if record.len() != 3 {
                return Err(Error::Parse {
                    row,
                    message: format!("expected 3 fields, found {}", record.len()),
                });
            }
            let rating: Rating = record[2].parse().map_err(|message| Error::Parse { row, message })?;
            let (expert, item) = (&record[0], &record[1]);
            if set.ratings.get(item).is_some_and(|r| r.contains_key(expert)) {
                return Err(Error::Parse {
                    row,
                    message: format!("duplicate rating by `{expert}` for `{item}`"),
                });
            }
            set.insert(expert, item, rating);
        }
        Ok(set)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv(file)
    }

    /// Every rated item must exist in the bank.
    pub fn check_against(&self, bank: &ItemBank) -> Result<()> {
        match self.ratings.keys().find(|id| !bank.contains(id)) {
            Some(id) => Err(Error::UnknownItem(id.clone())),
            None => Ok(()),
        }
    }
}

pub(crate) fn expect_header(headers: &csv::StringRecord, expected: &[&str]) -> Result<()> {
    let found: Vec<&str> = headers.iter().collect();
    if found != expected {
        return Err(Error::Parse {
            row: 1,
            message: format!("expected header `{}`, found `{}`", expected.join(","), found.join(",")),
        });
    }
    Ok(())
}

/// Lawshe content validity ratio `(n_e - N/2) / (N/2)`, kept exact as `(2 n_e - N) / N`.
pub fn compute_cvr(ratings: &ExpertRatingSet, item_id: &str) -> Result<Ratio> {
    let item = ratings
        .ratings
        .get(item_id)
        .ok_or_else(|| Error::UnknownItem(item_id.to_owned()))?;
    let missing: Vec<String> = ratings
        .experts
        .iter()
        .filter(|e| !item.contains_key(*e))
        .cloned()
        .collect();
    if !missing.is_empty() {
        return Err(Error::IncompleteRatings {
            item: item_id.to_owned(),
            missing,
        });
    }
    let n = ratings.expert_count() as i64;
    let essential = item.values().filter(|&&r| r == Rating::Essential).count() as i64;
    Ok(Ratio::new(2 * essential - n, n))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvrEntry {
    pub item_id: String,
    pub essential: usize,
    pub experts: usize,
    pub cvr: Ratio,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvrScreen {
    pub threshold: Ratio,
    pub retained: Vec<CvrEntry>,
    pub removed: Vec<CvrEntry>,
}

impl CvrScreen {
    pub fn mean_retained_cvr(&self) -> Option<f64> {
        if self.retained.is_empty() {
            return None;
        }
        Some(self.retained.iter().map(|e| e.cvr.to_f64()).sum::<f64>() / self.retained.len() as f64)
    }
}

/// Removes items whose CVR is strictly below `threshold`; ties are retained.
pub fn screen_by_cvr(bank: &ItemBank, ratings: &ExpertRatingSet, threshold: Ratio) -> Result<CvrScreen> {
    ratings.check_against(bank)?;
    let mut screen = CvrScreen {
        threshold,
        retained: Vec::new(),
        removed: Vec::new(),
    };
    for item in &bank.items {
        let cvr = compute_cvr(ratings, &item.item_id)?;
        let entry = CvrEntry {
            item_id: item.item_id.clone(),
            essential: ratings.essential_count(&item.item_id).unwrap_or(0),
            experts: ratings.expert_count(),
            cvr,
        };
        if cvr < threshold {
            screen.removed.push(entry);
        } else {
            screen.retained.push(entry);
        }
    }
    Ok(screen)
}

// ============================================================================
// Blueprint
// ============================================================================

/// Technique by subtask item counts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlueprintMatrix {
    pub cells: [[usize; 11]; 8],
}

impl BlueprintMatrix {
    pub fn cell(&self, technique: Technique, subtask: Subtask) -> usize {
        self.cells[technique.index()][subtask.index()]
    }

    pub fn total(&self) -> usize {
        self.cells.iter().flatten().sum()
    }

    pub fn covered(&self) -> [[bool; 11]; 8] {
        self.cells.map(|row| row.map(|c| c > 0))
    }

    /// One row per technique, one column per subtask.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("technique");
        for s in Subtask::ALL {
            out.push(',');
            out.push_str(&format!("{s:?}"));
        }
        out.push('\n');
        for t in Technique::ALL {
            out.push_str(&format!("{t:?}"));
            for s in Subtask::ALL {
                out.push_str(&format!(",{}", self.cell(t, s)));
            }
            out.push('\n');
        }
        out
    }
}

pub fn blueprint_coverage(bank: &ItemBank) -> BlueprintMatrix {
    let mut cells = [[0usize; 11]; 8];
    for item in &bank.items {
        cells[item.technique.index()][item.task_subtask.index()] += 1;
    }
    BlueprintMatrix { cells }
}
