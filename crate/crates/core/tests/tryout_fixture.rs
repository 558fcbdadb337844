use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use itemcal::ctt::CttReport;
use itemcal::irt::{compute_curves, Grid, IrtSummary};
use itemcal::refine::{flag_items, flags_for, select_items, Flag, FlagThresholds, Rule};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/tryout").join(name)
}

fn reports() -> (CttReport, IrtSummary) {
    (
        CttReport::load(&fixture("ctt_report.json")).unwrap(),
        IrtSummary::load(&fixture("irt_summary.json")).unwrap(),
    )
}

fn flags_of(id: &str) -> BTreeSet<Flag> {
    let (ctt, irt) = reports();
    let evidence = flag_items(&ctt, &irt, &FlagThresholds::default()).unwrap();
    evidence.into_iter().find(|e| e.item_id == id).unwrap().flags
}

#[test]
fn item_69_carries_every_flag() {
    assert_eq!(flags_of("item_69"), Flag::ALL.into_iter().collect());
}

#[test]
fn item_15_has_only_weak_discrimination_flags() {
    assert_eq!(
        flags_of("item_15"),
        [Flag::LowDiscrimination, Flag::WeakSlope].into_iter().collect()
    );
}

#[test]
fn unremarkable_item_has_no_flags() {
    assert!(flags_for(0.6, 0.3, 0.0, 1.0, &FlagThresholds::default()).is_empty());
}

#[test]
fn negative_discrimination_alone_removes_item_69() {
    let (ctt, irt) = reports();
    let rule: Rule = "negative_discrimination".parse().unwrap();
    let report = select_items(&ctt, &irt, &rule, &FlagThresholds::default()).unwrap();
    assert_eq!(report.removed_ids(), ["item_69"].into_iter().collect());
}

#[test]
fn default_rule_partitions_the_bank() {
    let (ctt, irt) = reports();
    let report = select_items(&ctt, &irt, &Rule::default(), &FlagThresholds::default()).unwrap();
    assert_eq!(report.removed_ids(), ["item_49", "item_69"].into_iter().collect());
    assert_eq!(report.retained.len() + report.removed.len(), 51);
    for r in &report.removed {
        assert!(!r.classical_flags.is_empty() && !r.model_flags.is_empty());
    }
    let text = report.text_summary();
    assert!(text.contains("item_49") && text.contains("weak_slope"));
}

#[test]
fn mismatched_item_sets_are_rejected() {
    let (ctt, mut irt) = reports();
    irt.retain_items(|id| id != "item_1");
    assert!(matches!(
        flag_items(&ctt, &irt, &FlagThresholds::default()),
        Err(itemcal::Error::ItemSetMismatch(_))
    ));
}

#[test]
fn fixture_curves_satisfy_identities() {
    let (_, irt) = reports();
    let set = compute_curves(&irt.item_params(), &Grid::default()).unwrap();
    assert_eq!(set.theta.len(), 161);
    for (g, &tif) in set.test_information.iter().enumerate() {
        let sum: f64 = set.information.iter().map(|row| row[g]).sum();
        assert!((sum - tif).abs() < 1e-12);
        assert!((set.sem[g] * tif.sqrt() - 1.0).abs() < 1e-12);
    }
}
