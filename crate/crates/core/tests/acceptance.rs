//! Acceptance suite. Runs every criterion at its stated tolerance, prints one
//! PASS/FAIL line per criterion, and exits nonzero if any criterion fails.

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use itemcal::bank::{
    blueprint_coverage, compute_cvr, screen_by_cvr, ExpertRatingSet, Item, ItemBank, ItemFormat, Rating, Ratio,
    Subtask, Technique,
};
use itemcal::ctt::{
    classify, minres_single_factor, standardized_alpha, cronbach_alpha, CttReport, DifficultyClass,
    DiscriminationClass, MinresConfig, SkipTreatment,
};
use itemcal::irt::{
    compute_curves, eap_theta, fit_irt, ConvergenceCriteria, Grid, Irt2plModel, IrtSummary, ItemParams, Quadrature,
    SamplerConfig,
};
use itemcal::refine::{select_items, FlagThresholds, Rule};
use itemcal::responses::{Outcome, ParticipantMeta, ResponseDataset};
use itemcal::scoring::score_row;
use itemcal::screening::{apply_exclusions, ExclusionConfig};
use itemcal::simulate::{engineer_exclusion_cohort, generate, CohortCounts, GeneratorConfig};
use itemcal::stats::pearson;

type Outcome_ = Result<String, String>;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/tryout").join(name)
}

fn check(cond: bool, detail: String) -> Outcome_ {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// ============================================================================
// Criteria
// ============================================================================

fn c1_ctt_classification() -> Outcome_ {
    let report = CttReport::load(&fixture("ctt_report.json")).map_err(|e| e.to_string())?;
    let (mut hard, mut moderate, mut easy, mut low, mut medium, mut high) = (0, 0, 0, 0, 0, 0);
    for s in &report.items {
        let (d, r) = classify(s.p, s.r);
        match d {
            DifficultyClass::Hard => hard += 1,
            DifficultyClass::Moderate => moderate += 1,
            DifficultyClass::Easy => easy += 1,
        }
        match r {
            DiscriminationClass::Low => low += 1,
            DiscriminationClass::Medium => medium += 1,
            DiscriminationClass::High => high += 1,
        }
    }
    check(
        (hard, moderate, easy, high, medium, low) == (5, 30, 16, 15, 31, 5),
        format!("{hard} Hard / {moderate} Moderate / {easy} Easy, {high} High / {medium} Medium / {low} Low"),
    )
}

fn item_table_column(col: usize) -> Vec<(String, String)> {
    std::fs::read_to_string(fixture("item_table.csv"))
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].to_string(), f[col].to_string())
        })
        .collect()
}

fn c2_cvr_reproduction() -> Outcome_ {
    let ratings = ExpertRatingSet::load(fixture("ratings.csv")).map_err(|e| e.to_string())?;
    let mut mismatches = Vec::new();
    let column = item_table_column(2);
    for (item, printed) in &column {
        let expected = Ratio::from_f64(printed.parse().unwrap()).map_err(|e| e.to_string())?;
        let got = compute_cvr(&ratings, item).map_err(|e| e.to_string())?;
        if got != expected {
            mismatches.push(format!("{item}: {got} vs {printed}"));
        }
    }
    // An item with 2 of 5 essential ratings falls below the zero threshold.
    let bank = ItemBank::new(vec![Item {
        item_id: "two_of_five".into(),
        visualization_id: "v".into(),
        technique: Technique::ColorMapping,
        task_family: Subtask::Trend.family(),
        task_subtask: Subtask::Trend,
        format: ItemFormat::Mcq,
        option_count: 4,
        correct_key: "A".into(),
        stem: None,
    }])
    .unwrap();
    let mut panel = ExpertRatingSet::default();
    for e in 0..5 {
        let rating = if e < 2 { Rating::Essential } else { Rating::Useful };
        panel.insert(&format!("x{e}"), "two_of_five", rating);
    }
    let screen = screen_by_cvr(&bank, &panel, Ratio::new(0, 1)).map_err(|e| e.to_string())?;
    let removed = screen.removed.len() == 1 && screen.removed[0].cvr == Ratio::new(-1, 5);
    check(
        mismatches.is_empty() && removed,
        format!(
            "{}/{} CVR values exact; 2/5 item removed: {removed}{}",
            column.len() - mismatches.len(),
            column.len(),
            if mismatches.is_empty() { String::new() } else { format!("; mismatches {mismatches:?}") }
        ),
    )
}

fn c3_selection_fixed_point() -> Outcome_ {
    let ctt = CttReport::load(&fixture("ctt_report.json")).map_err(|e| e.to_string())?;
    let irt = IrtSummary::load(&fixture("irt_summary.json")).map_err(|e| e.to_string())?;
    let t = FlagThresholds::default();
    let first = select_items(&ctt, &irt, &Rule::default(), &t).map_err(|e| e.to_string())?;
    let removed: BTreeSet<&str> = first.removed_ids();
    let keep: BTreeSet<&str> = first.retained.iter().map(|s| s.as_str()).collect();
    let ctt2 = CttReport {
        items: ctt.items.iter().filter(|s| keep.contains(s.item_id.as_str())).cloned().collect(),
        ..ctt.clone()
    };
    let mut irt2 = irt.clone();
    irt2.retain_items(|id| keep.contains(id));
    let second = select_items(&ctt2, &irt2, &Rule::default(), &t).map_err(|e| e.to_string())?;
    check(
        removed == BTreeSet::from(["item_49", "item_69"]) && second.removed.is_empty() && second.retained.len() == 49,
        format!(
            "first pass removed {removed:?}; rerun on {} items removed {}",
            second.retained.len() + second.removed.len(),
            second.removed.len()
        ),
    )
}

fn c4_gradient() -> Outcome_ {
    let study = generate(&GeneratorConfig {
        items: 12,
        participants: 60,
        seed: 44,
        ..GeneratorConfig::default()
    })
    .map_err(|e| e.to_string())?;
    let model = Irt2plModel::from_dataset(&study.data);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let x: Vec<f64> = (0..model.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (_, grad) = model.log_posterior(&x).map_err(|e| e.to_string())?;
        let f = |k: usize, d: f64| {
            let mut y = x.clone();
            y[k] += d;
            model.log_posterior(&y).unwrap().0
        };
        for (k, g) in grad.iter().enumerate() {
            let h = 1e-5;
            let fd = (f(k, h) - f(k, -h)) / (2.0 * h);
            let rel = (fd - g).abs() / g.abs().max(1.0);
            worst = worst.max(rel);
        }
    }
    check(worst < 1e-6, format!("max relative error {worst:.2e} over 20 points"))
}

struct RecoveryOutcome {
    line: Outcome_,
    items: Vec<ItemParams>,
}

fn c5_recovery() -> RecoveryOutcome {
    let study = generate(&GeneratorConfig {
        items: 49,
        participants: 485,
        seed: 2024,
        ..GeneratorConfig::default()
    })
    .unwrap();
    let model = Irt2plModel::from_dataset(&study.data);
    let config = SamplerConfig {
        chains: 4,
        iterations: 2000,
        warmup: 1000,
        ..SamplerConfig::default()
    };
    let fit = match fit_irt(&model, &config) {
        Ok(f) => f,
        Err(e) => {
            return RecoveryOutcome {
                line: Err(e.to_string()),
                items: vec![],
            }
        }
    };
    let summary = fit.summarize();
    let mut worst_rhat: f64 = 0.0;
    let mut min_ess = f64::INFINITY;
    for k in 0..fit.dim() {
        let d = fit.diagnostics(k);
        worst_rhat = worst_rhat.max(d.rhat.unwrap_or(f64::INFINITY));
        min_ess = min_ess.min(d.ess_bulk.unwrap_or(0.0));
    }
    let true_a: Vec<f64> = study.true_items.iter().map(|t| t.true_a).collect();
    let true_b: Vec<f64> = study.true_items.iter().map(|t| t.true_b).collect();
    let med_a: Vec<f64> = summary.items().iter().map(|s| s.a.median).collect();
    let med_b: Vec<f64> = summary.items().iter().map(|s| -s.e.median).collect();
    let corr_a = pearson(&true_a, &med_a).unwrap();
    let corr_b = pearson(&true_b, &med_b).unwrap();
    let rmse_b = (true_b.iter().zip(&med_b).map(|(t, m)| (t - m).powi(2)).sum::<f64>() / true_b.len() as f64).sqrt();
    let covered = summary
        .items()
        .iter()
        .zip(&true_b)
        .filter(|(s, b)| {
            let ci = s.e.ci95.unwrap();
            ci[0] <= -**b && -**b <= ci[1]
        })
        .count();
    let coverage = covered as f64 / true_b.len() as f64;
    let gate = summary.convergence_check(&ConvergenceCriteria::default());
    let divergences = fit.sampler.as_ref().map_or(0, |s| s.divergences());
    let ok = worst_rhat < 1.01 && min_ess > 400.0 && corr_a > 0.8 && corr_b > 0.95 && rmse_b < 0.3 && coverage >= 0.9;
    RecoveryOutcome {
        line: check(
            ok,
            format!(
                "max R-hat {worst_rhat:.4}, min bulk ESS {min_ess:.0}, corr(a) {corr_a:.3}, corr(b) {corr_b:.3}, \
                 RMSE(b) {rmse_b:.3}, e coverage {:.1}%, divergences {divergences}, gate passed {}",
                100.0 * coverage,
                gate.passed
            ),
        ),
        items: summary.item_params(),
    }
}

fn c6_curve_identities(items: &[ItemParams]) -> Outcome_ {
    if items.is_empty() {
        return Err("no fitted items available".into());
    }
    let curves = compute_curves(items, &Grid::default()).map_err(|e| e.to_string())?;
    let mut worst_half: f64 = 0.0;
    for it in items {
        worst_half = worst_half.max((it.probability(-it.e) - 0.5).abs());
    }
    let mut worst_sum: f64 = 0.0;
    let mut worst_sem: f64 = 0.0;
    for g in 0..curves.theta.len() {
        let sum: f64 = curves.information.iter().map(|row| row[g]).sum();
        worst_sum = worst_sum.max((curves.test_information[g] - sum).abs());
        worst_sem = worst_sem.max((curves.sem[g] * curves.test_information[g].sqrt() - 1.0).abs());
    }
    check(
        worst_half < 1e-12 && worst_sum < 1e-12 && worst_sem < 1e-12,
        format!(
            "{} items, {} grid points: |ICC(-e) - 0.5| {worst_half:.1e}, |TIF - sum| {worst_sum:.1e}, |SEM*sqrt(TIF) - 1| {worst_sem:.1e}",
            items.len(),
            curves.theta.len()
        ),
    )
}

fn c7_reliability() -> Outcome_ {
    let k = 10;
    let corr: Vec<Vec<f64>> = (0..k).map(|i| (0..k).map(|j| if i == j { 1.0 } else { 0.2 }).collect()).collect();
    let alpha = standardized_alpha(&corr).map_err(|e| e.to_string())?;
    let fit = minres_single_factor(&corr, &MinresConfig::default()).map_err(|e| e.to_string())?;
    let omega = fit.omega_t();
    let expected = 10.0 * 0.2 / (1.0 + 9.0 * 0.2);
    // two identical item columns
    let pattern = [1, 0, 1, 1, 0, 0, 1, 0, 1, 1];
    let data = ResponseDataset {
        item_ids: vec!["x".into(), "y".into()],
        participants: (0..pattern.len())
            .map(|j| ParticipantMeta {
                participant_id: format!("p{j}"),
                total_time_s: 100.0,
                attention_correct: 3,
                device_ok: true,
            })
            .collect(),
        outcomes: pattern
            .iter()
            .map(|&v| vec![if v == 1 { Outcome::Correct } else { Outcome::Incorrect }; 2])
            .collect(),
        rt_ms: vec![vec![20_000.0; 2]; pattern.len()],
    };
    let alpha_pair = cronbach_alpha(&data, SkipTreatment::Zero).map_err(|e| e.to_string())?;
    check(
        (alpha - expected).abs() < 1e-9 && (omega - alpha).abs() < 1e-6 && (alpha_pair - 1.0).abs() < 1e-12,
        format!("standardized alpha {alpha:.10}, omega_t {omega:.10}, perfectly correlated pair alpha {alpha_pair}"),
    )
}

fn c8_guessing_null() -> Outcome_ {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let items = 20;
    let options = vec![4u32; items];
    let n = 10_000;
    let mut total = 0.0;
    for j in 0..n {
        let row: Vec<Outcome> = (0..items)
            .map(|_| if rng.random_range(0..4) == 0 { Outcome::Correct } else { Outcome::Incorrect })
            .collect();
        total += score_row(&format!("g{j}"), &row, &options).corrected_score;
    }
    let mean = total / n as f64;
    check(mean.abs() <= 0.1, format!("mean corrected score {mean:.4} over {n} guessers on {items} items"))
}

fn c9_exclusions() -> Outcome_ {
    let config = GeneratorConfig {
        items: 51,
        participants: 500,
        seed: 9,
        ..GeneratorConfig::default()
    };
    let counts = CohortCounts {
        device_failures: 8,
        random_clickers: 4,
        short_and_skippy: 3,
    };
    let cohort = engineer_exclusion_cohort(&config, &counts, &ExclusionConfig::default()).map_err(|e| e.to_string())?;
    let report = apply_exclusions(&cohort.study.data, &ExclusionConfig::default()).map_err(|e| e.to_string())?;
    let retained = report.retained_count();
    check(retained == 485, format!("retained {retained} of 500"))
}

fn c10_blueprint() -> Outcome_ {
    let bank = ItemBank::load(fixture("bank.json")).map_err(|e| e.to_string())?;
    let covered = blueprint_coverage(&bank).covered();
    let pattern = std::fs::read_to_string(fixture("blueprint_reference.csv")).unwrap();
    let mut diffs = Vec::new();
    for (t, line) in pattern.lines().skip(1).enumerate() {
        let marks: Vec<bool> = line.split(',').skip(1).map(|v| v == "1").collect();
        for (s, &mark) in marks.iter().enumerate() {
            if covered[t][s] != mark {
                diffs.push(format!(
                    "{} x {}: fixture {}, reference {}",
                    Technique::ALL[t].label(),
                    Subtask::ALL[s].label(),
                    if covered[t][s] { "covered" } else { "empty" },
                    if mark { "checked" } else { "blank" }
                ));
            }
        }
    }
    check(
        diffs.is_empty(),
        if diffs.is_empty() {
            "88/88 cells match".into()
        } else {
            format!("{}/88 cells match; differing: {}", 88 - diffs.len(), diffs.join("; "))
        },
    )
}

fn c11_eap_oracle() -> Outcome_ {
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for &a in &[0.4, 0.8, 1.2, 2.0, 3.0] {
        for &b in &[-1.5, -0.5, 0.0, 0.7, 1.5] {
            for &resp in &[Outcome::Correct, Outcome::Incorrect] {
                let item = ItemParams {
                    item_id: "x".into(),
                    a,
                    e: -b,
                };
                let est = eap_theta(&[item], &[resp], &Quadrature::default()).map_err(|e| e.to_string())?;
                // dense midpoint rule on a wide interval
                let (lo, hi, n) = (-10.0f64, 10.0f64, 1_000_000usize);
                let h = (hi - lo) / n as f64;
                let (mut num, mut den) = (0.0, 0.0);
                for k in 0..n {
                    let t = lo + (k as f64 + 0.5) * h;
                    let p = 1.0 / (1.0 + (-a * (t - b)).exp());
                    let lik = if resp == Outcome::Correct { p } else { 1.0 - p };
                    let w = (-0.5 * t * t).exp() * lik;
                    num += t * w;
                    den += w;
                }
                worst = worst.max((est.theta - num / den).abs());
                cases += 1;
            }
        }
    }
    check(worst < 1e-3, format!("max |EAP - oracle| {worst:.2e} over {cases} cases"))
}

// ============================================================================
// Runner
// ============================================================================

fn report(id: usize, title: &str, start: Instant, limit_s: f64, outcome: Outcome_, failures: &mut usize) {
    let secs = start.elapsed().as_secs_f64();
    let (tag, detail) = match outcome {
        Ok(d) if secs <= limit_s => ("PASS", d),
        Ok(d) => ("FAIL", format!("{d}; runtime {secs:.1}s exceeds {limit_s}s")),
        Err(d) => ("FAIL", d),
    };
    if tag == "FAIL" {
        *failures += 1;
    }
    println!("{tag} [{id:>2}] {title} ({secs:.2}s): {detail}");
}

fn main() {
    // `cargo test -- --list` and filters pass arguments; honor `--list` quietly.
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let mut failures = 0;
    macro_rules! run {
        ($id:expr, $title:expr, $limit:expr, $body:expr) => {{
            let start = Instant::now();
            let out = $body;
            report($id, $title, start, $limit, out, &mut failures);
        }};
    }
    run!(1, "CTT classification counts", 1.0, c1_ctt_classification());
    run!(2, "CVR reproduction", 1.0, c2_cvr_reproduction());
    run!(3, "Selection fixed point", 1.0, c3_selection_fixed_point());
    run!(4, "Gradient correctness", 10.0, c4_gradient());
    let start = Instant::now();
    let recovery = c5_recovery();
    report(5, "Parameter recovery", start, 600.0, recovery.line, &mut failures);
    run!(6, "Curve identities", 1.0, c6_curve_identities(&recovery.items));
    run!(7, "Reliability identities", 1.0, c7_reliability());
    run!(8, "Correction-for-guessing null", 5.0, c8_guessing_null());
    run!(9, "Exclusion pipeline", 1.0, c9_exclusions());
    run!(10, "Blueprint fidelity", 1.0, c10_blueprint());
    run!(11, "EAP oracle", 10.0, c11_eap_oracle());
    println!("acceptance: {} of 11 criteria passed", 11 - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
