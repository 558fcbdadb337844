//! Classical test theory: item difficulty, corrected item-total correlation,
//! threshold classes, and internal-consistency reliability.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::responses::{Outcome, ResponseDataset};
use crate::stats::pearson;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DifficultyClass {
    Hard,
    Moderate,
    Easy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiscriminationClass {
    Low,
    Medium,
    High,
}

/// Cut points for the difficulty and discrimination classes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CttThresholds {
    pub hard_below: f64,
    pub easy_at_least: f64,
    pub low_below: f64,
    pub high_at_least: f64,
}

impl Default for CttThresholds {
    fn default() -> Self {
        CttThresholds {
            hard_below: 0.50,
            easy_at_least: 0.85,
            low_below: 0.10,
            high_at_least: 0.30,
        }
    }
}

pub fn classify_difficulty(p: f64, t: &CttThresholds) -> DifficultyClass {
    if p < t.hard_below {
        DifficultyClass::Hard
    } else if p >= t.easy_at_least {
        DifficultyClass::Easy
    } else {
        DifficultyClass::Moderate
    }
}

pub fn classify_discrimination(r: f64, t: &CttThresholds) -> DiscriminationClass {
    if r < t.low_below {
        DiscriminationClass::Low
    } else if r >= t.high_at_least {
        DiscriminationClass::High
    } else {
        DiscriminationClass::Medium
    }
}

pub fn classify(p: f64, r: f64) -> (DifficultyClass, DiscriminationClass) {
    let t = CttThresholds::default();
    (classify_difficulty(p, &t), classify_discrimination(r, &t))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CttItemStats {
    pub item_id: String,
    pub p: f64,
    pub r: f64,
    pub difficulty_class: DifficultyClass,
    pub discrimination_class: DiscriminationClass,
}

impl CttItemStats {
    pub fn new(item_id: impl Into<String>, p: f64, r: f64, t: &CttThresholds) -> Self {
        CttItemStats {
            item_id: item_id.into(),
            p,
            r,
            difficulty_class: classify_difficulty(p, t),
            discrimination_class: classify_discrimination(r, t),
        }
    }
}

fn column(data: &ResponseDataset, item_id: &str) -> Result<usize> {
    data.item_index(item_id)
        .ok_or_else(|| Error::UnknownItem(item_id.to_owned()))
}

/// Proportion correct; skips stay in the denominator.
pub fn item_difficulty(data: &ResponseDataset, item_id: &str) -> Result<f64> {
    let i = column(data, item_id)?;
    if data.participant_count() == 0 {
        return Err(Error::Empty("retained participant set"));
    }
    let correct = data.outcomes.iter().filter(|row| row[i] == Outcome::Correct).count();
    Ok(correct as f64 / data.participant_count() as f64)
}

/// Pearson correlation of the item score with the rest score (total minus item).
pub fn item_discrimination(data: &ResponseDataset, item_id: &str) -> Result<f64> {
    let i = column(data, item_id)?;
    let item = data.item_scores(i);
    let rest: Vec<f64> = data
        .raw_totals()
        .iter()
        .zip(&item)
        .map(|(t, x)| t - x)
        .collect();
    pearson(&item, &rest).map_err(|e| match e {
        Error::DegenerateVariance(why) => Error::DegenerateVariance(format!("item `{item_id}`: {why}")),
        other => other,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CttReport {
    pub participants: usize,
    pub thresholds: CttThresholds,
    pub items: Vec<CttItemStats>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reliability: Option<ReliabilityReport>,
}

impl CttReport {
    pub fn get(&self, item_id: &str) -> Option<&CttItemStats> {
        self.items.iter().find(|s| s.item_id == item_id)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("item_id,P,r,difficulty_class,discrimination_class\n");
        for s in &self.items {
            out.push_str(&format!(
                "{},{:.2},{:.2},{},{}\n",
                s.item_id,
                s.p,
                s.r,
                serde_plain(&s.difficulty_class),
                serde_plain(&s.discrimination_class)
            ));
        }
        if let Some(rel) = &self.reliability {
            out.push_str(&format!("# alpha,{:.4}\n# omega_t,{:.4}\n", rel.alpha, rel.omega_t));
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// Counts per difficulty class as `(hard, moderate, easy)`.
    pub fn difficulty_counts(&self) -> (usize, usize, usize) {
        let count = |c| self.items.iter().filter(|s| s.difficulty_class == c).count();
        (
            count(DifficultyClass::Hard),
            count(DifficultyClass::Moderate),
            count(DifficultyClass::Easy),
        )
    }

    /// Counts per discrimination class as `(low, medium, high)`.
    pub fn discrimination_counts(&self) -> (usize, usize, usize) {
        let count = |c| self.items.iter().filter(|s| s.discrimination_class == c).count();
        (
            count(DiscriminationClass::Low),
            count(DiscriminationClass::Medium),
            count(DiscriminationClass::High),
        )
    }
}

pub(crate) fn serde_plain<T: Serialize>(value: &T) -> String {
    serde_json::to_value(value)
        .ok()
        .and_then(|v| v.as_str().map(str::to_owned))
        .unwrap_or_default()
}

pub fn ctt_report(data: &ResponseDataset, thresholds: &CttThresholds) -> Result<CttReport> {
    let items = data
        .item_ids
        .iter()
        .map(|id| {
            Ok(CttItemStats::new(
                id.clone(),
                item_difficulty(data, id)?,
                item_discrimination(data, id)?,
                thresholds,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CttReport {
        participants: data.participant_count(),
        thresholds: *thresholds,
        items,
        reliability: None,
    })
}

// ============================================================================
// Reliability
// ============================================================================

/// How skipped responses enter the reliability coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkipTreatment {
    /// Skip scored 0.
    #[default]
    Zero,
    /// Skip treated as missing; each covariance uses the rows observed on both items.
    PairwiseDeletion,
}

fn cell(o: Outcome, treatment: SkipTreatment) -> Option<f64> {
    match (o, treatment) {
        (Outcome::Skip, SkipTreatment::PairwiseDeletion) => None,
        _ => Some(o.score()),
    }
}

/// Sample covariance matrix (denominator `n - 1`) over item scores.
pub fn covariance_matrix(data: &ResponseDataset, treatment: SkipTreatment) -> Vec<Vec<f64>> {
    let k = data.item_count();
    let cells: Vec<Vec<Option<f64>>> = data
        .outcomes
        .iter()
        .map(|row| row.iter().map(|&o| cell(o, treatment)).collect())
        .collect();
    let mut cov = vec![vec![0.0; k]; k];
    for a in 0..k {
        for b in a..k {
            let pairs: Vec<(f64, f64)> = cells
                .iter()
                .filter_map(|row| Some((row[a]?, row[b]?)))
                .collect();
            let n = pairs.len();
            let c = if n < 2 {
                0.0
            } else {
                let ma = pairs.iter().map(|p| p.0).sum::<f64>() / n as f64;
                let mb = pairs.iter().map(|p| p.1).sum::<f64>() / n as f64;
                pairs.iter().map(|p| (p.0 - ma) * (p.1 - mb)).sum::<f64>() / (n - 1) as f64
            };
            cov[a][b] = c;
            cov[b][a] = c;
        }
    }
    cov
}

pub fn correlation_from_covariance(cov: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let k = cov.len();
    for (i, row) in cov.iter().enumerate() {
        if row[i] <= 0.0 {
            return Err(Error::DegenerateVariance(format!("item column {i} has zero variance")));
        }
    }
    Ok((0..k)
        .map(|a| {
            (0..k)
                .map(|b| {
                    if a == b {
                        1.0
                    } else {
                        (cov[a][b] / (cov[a][a] * cov[b][b]).sqrt()).clamp(-1.0, 1.0)
                    }
                })
                .collect()
        })
        .collect())
}

/// `k/(k-1) (1 - sum of item variances / total variance)` from a covariance matrix.
pub fn alpha_from_covariance(cov: &[Vec<f64>]) -> Result<f64> {
    let k = cov.len();
    if k < 2 {
        return Err(Error::InvalidConfig("alpha needs at least two items".into()));
    }
    let trace: f64 = (0..k).map(|i| cov[i][i]).sum();
    let total: f64 = cov.iter().flatten().sum();
    if total <= 0.0 {
        return Err(Error::DegenerateVariance("total score variance is zero".into()));
    }
    Ok(k as f64 / (k as f64 - 1.0) * (1.0 - trace / total))
}

pub fn cronbach_alpha(data: &ResponseDataset, treatment: SkipTreatment) -> Result<f64> {
    alpha_from_covariance(&covariance_matrix(data, treatment))
}

/// Alpha of standardized items, i.e. alpha computed on the correlation matrix.
pub fn standardized_alpha(corr: &[Vec<f64>]) -> Result<f64> {
    alpha_from_covariance(corr)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinresConfig {
    pub max_iterations: usize,
    pub tolerance: f64,
}

impl Default for MinresConfig {
    fn default() -> Self {
        MinresConfig {
            max_iterations: 500,
            tolerance: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingleFactorFit {
    pub loadings: Vec<f64>,
    pub uniquenesses: Vec<f64>,
    pub iterations: usize,
    /// Indices whose squared loading exceeded 1 and were clamped.
    pub heywood: Vec<usize>,
}

impl SingleFactorFit {
    pub fn omega_t(&self) -> f64 {
        let s: f64 = self.loadings.iter().sum();
        let u: f64 = self.uniquenesses.iter().sum();
        s * s / (s * s + u)
    }
}

/// One-factor minimum-residual fit: minimizes the squared off-diagonal
/// residuals `r_ij - l_i l_j` by exact coordinate updates
/// `l_i = sum_j r_ij l_j / sum_j l_j^2` over `j != i`.
pub fn minres_single_factor(corr: &[Vec<f64>], config: &MinresConfig) -> Result<SingleFactorFit> {
    let k = corr.len();
    if k < 3 {
        return Err(Error::InvalidConfig("single-factor fit needs at least three items".into()));
    }
    if corr.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("correlation matrix".into()));
    }
    let mut lambda: Vec<f64> = (0..k)
        .map(|i| {
            let s: f64 = (0..k).filter(|&j| j != i).map(|j| corr[i][j].abs()).sum();
            (s / (k - 1) as f64).sqrt().max(1e-3)
        })
        .collect();
    let residual = |l: &[f64]| -> Vec<f64> {
        let mut out = Vec::with_capacity(k * (k - 1) / 2);
        for i in 0..k {
            for j in (i + 1)..k {
                out.push(corr[i][j] - l[i] * l[j]);
            }
        }
        out
    };
    let mut prev = residual(&lambda);
    for iter in 1..=config.max_iterations {
        for i in 0..k {
            let (mut num, mut den) = (0.0, 0.0);
            for j in 0..k {
                if j != i {
                    num += corr[i][j] * lambda[j];
                    den += lambda[j] * lambda[j];
                }
            }
            if den > 0.0 {
                lambda[i] = num / den;
            }
        }
        let cur = residual(&lambda);
        let change = cur
            .iter()
            .zip(&prev)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        prev = cur;
        if change < config.tolerance {
            return Ok(finish_factor(lambda, iter));
        }
    }
    Err(Error::NonConvergent(config.max_iterations))
}

fn finish_factor(mut lambda: Vec<f64>, iterations: usize) -> SingleFactorFit {
    // Orient the factor so the loadings sum to a nonnegative value.
    if lambda.iter().sum::<f64>() < 0.0 {
        lambda.iter_mut().for_each(|l| *l = -*l);
    }
    let mut heywood = Vec::new();
    for (i, l) in lambda.iter_mut().enumerate() {
        if *l * *l > 1.0 {
            heywood.push(i);
            *l = l.signum();
        }
    }
    let uniquenesses = lambda.iter().map(|l| (1.0 - l * l).clamp(0.0, 1.0)).collect();
    SingleFactorFit {
        loadings: lambda,
        uniquenesses,
        iterations,
        heywood,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityReport {
    pub items: Vec<String>,
    pub skip_treatment: SkipTreatment,
    pub alpha: f64,
    pub omega_t: f64,
    pub loadings: Vec<f64>,
    pub uniquenesses: Vec<f64>,
    pub heywood_items: Vec<String>,
    pub factor_iterations: usize,
}

/// Cronbach's alpha plus omega total from a one-factor minres fit of the
/// Pearson inter-item correlations.
pub fn mcdonald_omega_t(
    data: &ResponseDataset,
    treatment: SkipTreatment,
    config: &MinresConfig,
) -> Result<ReliabilityReport> {
    if data.item_count() < 3 {
        return Err(Error::InvalidConfig("omega needs at least three items".into()));
    }
    let cov = covariance_matrix(data, treatment);
    let alpha = alpha_from_covariance(&cov)?;
    let corr = correlation_from_covariance(&cov).map_err(|e| match e {
        Error::DegenerateVariance(_) => {
            let i = (0..cov.len()).find(|&i| cov[i][i] <= 0.0).unwrap_or(0);
            Error::DegenerateVariance(format!("item `{}` has zero variance", data.item_ids[i]))
        }
        other => other,
    })?;
    let fit = minres_single_factor(&corr, config)?;
    Ok(ReliabilityReport {
        items: data.item_ids.clone(),
        skip_treatment: treatment,
        alpha,
        omega_t: fit.omega_t(),
        heywood_items: fit.heywood.iter().map(|&i| data.item_ids[i].clone()).collect(),
        loadings: fit.loadings,
        uniquenesses: fit.uniquenesses,
        factor_iterations: fit.iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::responses::ParticipantMeta;

    pub(crate) fn data_from_scores(cols: &[&[u8]]) -> ResponseDataset {
        let n = cols[0].len();
        ResponseDataset {
            item_ids: (0..cols.len()).map(|i| format!("i{i}")).collect(),
            participants: (0..n)
                .map(|j| ParticipantMeta {
                    participant_id: format!("p{j}"),
                    total_time_s: 600.0,
                    attention_correct: 3,
                    device_ok: true,
                })
                .collect(),
            outcomes: (0..n)
                .map(|j| {
                    cols.iter()
                        .map(|c| match c[j] {
                            1 => Outcome::Correct,
                            2 => Outcome::Skip,
                            _ => Outcome::Incorrect,
                        })
                        .collect()
                })
                .collect(),
            rt_ms: vec![vec![15_000.0; cols.len()]; n],
        }
    }

    fn equicorrelated(k: usize, rho: f64) -> Vec<Vec<f64>> {
        (0..k)
            .map(|i| (0..k).map(|j| if i == j { 1.0 } else { rho }).collect())
            .collect()
    }

    #[test]
    fn difficulty_counts_skips_in_denominator() {
        let all = data_from_scores(&[&[1, 1, 1, 1]]);
        assert_eq!(item_difficulty(&all, "i0").unwrap(), 1.0);
        let half = data_from_scores(&[&[1, 2, 1, 2]]);
        assert_eq!(item_difficulty(&half, "i0").unwrap(), 0.5);
    }

    #[test]
    fn discrimination_against_single_rest_item() {
        let same = data_from_scores(&[&[1, 0, 1, 0], &[1, 0, 1, 0]]);
        assert!((item_discrimination(&same, "i0").unwrap() - 1.0).abs() < 1e-12);
        let ortho = data_from_scores(&[&[1, 1, 0, 0], &[1, 0, 1, 0]]);
        assert!(item_discrimination(&ortho, "i0").unwrap().abs() < 1e-12);
    }

    #[test]
    fn discrimination_errors_on_constant_item() {
        let d = data_from_scores(&[&[1, 1, 1, 1], &[1, 0, 1, 0]]);
        assert!(matches!(item_discrimination(&d, "i0"), Err(Error::DegenerateVariance(_))));
    }

    #[test]
    fn class_boundaries() {
        assert_eq!(classify(0.85, 0.2).0, DifficultyClass::Easy);
        assert_eq!(classify(0.8499, 0.2).0, DifficultyClass::Moderate);
        assert_eq!(classify(0.4999, 0.2).0, DifficultyClass::Hard);
        assert_eq!(classify(0.5, 0.30).1, DiscriminationClass::High);
        assert_eq!(classify(0.5, 0.0999).1, DiscriminationClass::Low);
        assert_eq!(classify(0.5, 0.10).1, DiscriminationClass::Medium);
    }

    #[test]
    fn alpha_of_identical_items_is_one() {
        let d = data_from_scores(&[&[1, 0, 1, 0, 1], &[1, 0, 1, 0, 1]]);
        assert!((cronbach_alpha(&d, SkipTreatment::Zero).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn alpha_of_uncorrelated_items_is_zero() {
        let d = data_from_scores(&[&[1, 1, 0, 0], &[1, 0, 1, 0]]);
        assert!(cronbach_alpha(&d, SkipTreatment::Zero).unwrap().abs() < 1e-12);
    }

    #[test]
    fn alpha_equals_variance_formula() {
        let cols: [&[u8]; 3] = [&[1, 0, 1, 1, 0, 1], &[1, 1, 0, 1, 0, 0], &[0, 0, 1, 1, 0, 1]];
        let d = data_from_scores(&cols);
        let totals = d.raw_totals();
        let sum_item: f64 = (0..3).map(|i| crate::stats::sample_variance(&d.item_scores(i))).sum();
        let expected = 1.5 * (1.0 - sum_item / crate::stats::sample_variance(&totals));
        assert!((cronbach_alpha(&d, SkipTreatment::Zero).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn spearman_brown_closed_form() {
        let a = standardized_alpha(&equicorrelated(10, 0.2)).unwrap();
        assert!((a - 2.0 / 2.8).abs() < 1e-12);
    }

    #[test]
    fn equicorrelated_minres_loads_sqrt_rho() {
        let corr = equicorrelated(10, 0.2);
        let fit = minres_single_factor(&corr, &MinresConfig::default()).unwrap();
        for l in &fit.loadings {
            assert!((l - 0.2f64.sqrt()).abs() < 1e-6);
        }
        assert!((fit.omega_t() - standardized_alpha(&corr).unwrap()).abs() < 1e-6);
    }

    #[test]
    fn duplicated_item_gives_omega_one() {
        let d = data_from_scores(&[&[1, 0, 1, 0, 1], &[1, 0, 1, 0, 1], &[1, 0, 1, 0, 1]]);
        let rep = mcdonald_omega_t(&d, SkipTreatment::Zero, &MinresConfig::default()).unwrap();
        assert!((rep.omega_t - 1.0).abs() < 1e-9);
        assert!(rep.uniquenesses.iter().all(|&u| (0.0..=1.0).contains(&u)));
    }

    #[test]
    fn heywood_case_is_clamped_and_flagged() {
        // r01 r02 / r12 = 0.9*0.9/0.5 > 1 forces a loading above one.
        let corr = vec![vec![1.0, 0.9, 0.9], vec![0.9, 1.0, 0.5], vec![0.9, 0.5, 1.0]];
        let fit = minres_single_factor(&corr, &MinresConfig::default()).unwrap();
        assert_eq!(fit.heywood, vec![0]);
        assert_eq!(fit.loadings[0], 1.0);
        assert_eq!(fit.uniquenesses[0], 0.0);
    }

    #[test]
    fn pairwise_deletion_ignores_skips() {
        let d = data_from_scores(&[&[1, 0, 1, 0, 2, 2], &[1, 0, 1, 0, 1, 0], &[1, 0, 1, 1, 0, 2]]);
        let zero = cronbach_alpha(&d, SkipTreatment::Zero).unwrap();
        let pairwise = cronbach_alpha(&d, SkipTreatment::PairwiseDeletion).unwrap();
        assert!(zero.is_finite() && pairwise.is_finite());
        assert!((zero - pairwise).abs() > 1e-6);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn alpha_invariant_to_item_order(
                cols in proptest::collection::vec(proptest::collection::vec(0u8..2, 12), 3..6),
                shift in 0usize..6,
            ) {
                let refs: Vec<&[u8]> = cols.iter().map(|c| c.as_slice()).collect();
                let d = data_from_scores(&refs);
                let mut rotated = refs.clone();
                let n = rotated.len();
                rotated.rotate_left(shift % n);
                let d2 = data_from_scores(&rotated);
                match (cronbach_alpha(&d, SkipTreatment::Zero), cronbach_alpha(&d2, SkipTreatment::Zero)) {
                    (Ok(a), Ok(b)) => prop_assert!((a - b).abs() < 1e-9 && a <= 1.0 + 1e-12),
                    (Err(_), Err(_)) => {}
                    _ => prop_assert!(false, "inconsistent results"),
                }
            }

            #[test]
            fn two_item_rest_score_is_plain_pearson(
                a in proptest::collection::vec(0u8..2, 10),
                b in proptest::collection::vec(0u8..2, 10),
            ) {
                let d = data_from_scores(&[&a, &b]);
                let plain = pearson(&d.item_scores(0), &d.item_scores(1));
                match (item_discrimination(&d, "i0"), plain) {
                    (Ok(x), Ok(y)) => prop_assert!((x - y).abs() < 1e-12),
                    (Err(_), Err(_)) => {}
                    _ => prop_assert!(false),
                }
            }
        }
    }
}
