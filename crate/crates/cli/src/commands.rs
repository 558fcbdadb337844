//! One function per subcommand.

use std::path::Path;

use serde::Serialize;

use itemcal::bank::{blueprint_coverage, screen_by_cvr, ExpertRatingSet, ItemBank, Ratio};
use itemcal::ctt::{ctt_report, mcdonald_omega_t, CttReport, CttThresholds, MinresConfig, SkipTreatment};
use itemcal::irt::{
    ability_correlates, aggregate_by_technique, compute_curves, fit_irt, posterior_predictive, Grid, Irt2plModel,
    IrtSummary, PosteriorFit, SamplerConfig,
};
use itemcal::refine::{flag_items, select_items, FlagThresholds, Rule};
use itemcal::responses::{ingest_files, ResponseDataset};
use itemcal::scoring::{descriptives, score_all, scores_csv};
use itemcal::screening::{apply_exclusions, ExclusionConfig};
use itemcal::simulate::{engineer_exclusion_cohort, generate, CohortCounts, GeneratorConfig, SimulatedStudy, SkipModel};

use crate::error::{CliError, CliResult};
use crate::workspace::*;
use crate::{Common, Data, Flagging, Sampling};

const PREDICTIVE_REPLICATIONS: usize = 200;

fn json<T: Serialize>(value: &T) -> CliResult<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(itemcal::Error::from)?;
    s.push('\n');
    Ok(s)
}

fn read(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::MissingInput(format!("{}: {e}", path.display())))
}

fn load_bank(ws: &Workspace, common: &Common) -> CliResult<ItemBank> {
    let path = ws.input_or_artifact(common.bank.as_deref(), BANK_JSON, "simulate")?;
    Ok(ItemBank::load(path)?)
}

/// Loads a dataset from explicit flags, or from a pair of artifacts.
fn load_dataset(
    ws: &Workspace,
    bank: &ItemBank,
    data: &Data,
    default: (&str, &str),
    producer: &'static str,
) -> CliResult<ResponseDataset> {
    let (responses, participants) = match (&data.responses, &data.participants) {
        (Some(r), Some(p)) => (require(r)?, require(p)?),
        (None, None) => (ws.artifact(default.0, producer)?, ws.artifact(default.1, producer)?),
        _ => {
            return Err(CliError::Usage(
                "--responses and --participants must be given together".into(),
            ))
        }
    };
    Ok(ingest_files(responses, participants, bank)?)
}

/// The post-exclusion dataset used by every analysis stage.
fn analysis_dataset(ws: &Workspace, bank: &ItemBank, data: &Data) -> CliResult<ResponseDataset> {
    load_dataset(ws, bank, data, (RETAINED_RESPONSES_CSV, RETAINED_PARTICIPANTS_CSV), "exclude")
}

fn load_flagging(flagging: &Flagging) -> CliResult<(Rule, FlagThresholds)> {
    let rule = match &flagging.rule {
        Some(text) => text.parse()?,
        None => Rule::default(),
    };
    let thresholds = match &flagging.thresholds_file {
        Some(path) => FlagThresholds::from_json(&read(&require(path)?)?)?,
        None => FlagThresholds::default(),
    };
    Ok((rule, thresholds))
}

fn load_ctt(ws: &Workspace) -> CliResult<CttReport> {
    Ok(CttReport::load(&ws.artifact(CTT_JSON, "ctt")?)?)
}

fn load_irt(ws: &Workspace) -> CliResult<IrtSummary> {
    Ok(IrtSummary::load(&ws.artifact(IRT_SUMMARY_JSON, "fit")?)?)
}

// ============================================================================
// Bank stages
// ============================================================================

pub fn validate(common: &Common) -> CliResult<()> {
    let ws = Workspace::create(&common.out)?;
    let bank = load_bank(&ws, common)?;
    bank.validate()?;
    let matrix = blueprint_coverage(&bank);
    #[derive(Serialize)]
    struct Validation {
        valid: bool,
        items: usize,
        covered_cells: usize,
    }
    let covered_cells = matrix.covered().iter().flatten().filter(|&&c| c).count();
    ws.write(BLUEPRINT_CSV, &matrix.to_csv())?;
    ws.write(
        VALIDATION_JSON,
        &json(&Validation {
            valid: true,
            items: bank.len(),
            covered_cells,
        })?,
    )?;
    println!("bank valid: {} items, {covered_cells} blueprint cells covered", bank.len());
    Ok(())
}

pub fn cvr(common: &Common, ratings: &Path, threshold: f64) -> CliResult<()> {
    let ws = Workspace::create(&common.out)?;
    let bank = load_bank(&ws, common)?;
    let ratings = ExpertRatingSet::load(require(ratings)?)?;
    let screen = screen_by_cvr(&bank, &ratings, Ratio::from_f64(threshold)?)?;
    let mut csv = String::from("item_id,essential,experts,cvr,decision\n");
    let mut rows: Vec<(&str, _)> = screen.retained.iter().map(|e| ("retained", e)).collect();
    rows.extend(screen.removed.iter().map(|e| ("removed", e)));
    let order = |id: &str| bank.items.iter().position(|i| i.item_id == id);
    rows.sort_by_key(|(_, e)| order(&e.item_id));
    for (decision, e) in rows {
        csv.push_str(&format!("{},{},{},{},{decision}\n", e.item_id, e.essential, e.experts, e.cvr));
    }
    ws.write(CVR_CSV, &csv)?;
    ws.write(CVR_JSON, &json(&screen)?)?;
    println!("cvr: retained {}, removed {}", screen.retained.len(), screen.removed.len());
    Ok(())
}

// ============================================================================
// Response stages
// ============================================================================

pub fn ingest(common: &Common, data: &Data) -> CliResult<()> {
    let ws = Workspace::create(&common.out)?;
    let bank = load_bank(&ws, common)?;
    let dataset = load_dataset(&ws, &bank, data, (RESPONSES_CSV, PARTICIPANTS_CSV), "simulate")?;
    ws.write(DATASET_RESPONSES_CSV, &dataset.responses_csv())?;
    ws.write(DATASET_PARTICIPANTS_CSV, &dataset.participants_csv())?;
    println!(
        "ingested {} participants x {} items",
        dataset.participant_count(),
        dataset.item_count()
    );
    Ok(())
}

pub fn exclude(common: &Common, data: &Data) -> CliResult<()> {
    let ws = Workspace::create(&common.out)?;
    let bank = load_bank(&ws, common)?;
    let dataset = load_dataset(&ws, &bank, data, (DATASET_RESPONSES_CSV, DATASET_PARTICIPANTS_CSV), "ingest")?;
    let report = apply_exclusions(&dataset, &ExclusionConfig::default())?;
    let retained = dataset.retain_participants(&report.retained_ids());
    ws.write(EXCLUSIONS_CSV, &report.to_csv())?;
    ws.write(EXCLUSIONS_JSON, &json(&report)?)?;
    ws.write(RETAINED_RESPONSES_CSV, &retained.responses_csv())?;
    ws.write(RETAINED_PARTICIPANTS_CSV, &retained.participants_csv())?;
    println!(
        "retained {} of {} participants",
        report.retained_count(),
        dataset.participant_count()
    );
    Ok(())
}

pub fn score(common: &Common, data: &Data) -> CliResult<()> {
    let ws = Workspace::create(&common.out)?;
    let bank = load_bank(&ws, common)?;
    let dataset = analysis_dataset(&ws, &bank, data)?;
    let records = score_all(&dataset, &bank)?;
    let summary = descriptives(&dataset, &bank)?;
    ws.write(SCORES_CSV, &scores_csv(&records))?;
    ws.write(DESCRIPTIVES_JSON, &json(&summary)?)?;
    println!(
        "scored {} participants; overall skip rate {:.3}",
        records.len(),
        summary.overall_skip_rate
    );
    Ok(())
}

// ============================================================================
// Analysis stages
// ============================================================================

pub fn ctt(common: &Common, data: &Data) -> CliResult<()> {
    let ws = Workspace::create(&common.out)?;
    let bank = load_bank(&ws, common)?;
    let dataset = analysis_dataset(&ws, &bank, data)?;
    let mut report = ctt_report(&dataset, &CttThresholds::default())?;
    // The reliability summary is appended when it is defined for this data.
    report.reliability = mcdonald_omega_t(&dataset, SkipTreatment::default(), &MinresConfig::default()).ok();
    ws.write(CTT_JSON, &report.to_json()?)?;
    ws.write(CTT_CSV, &report.to_csv())?;
    let (hard, moderate, easy) = report.difficulty_counts();
    let (low, medium, high) = report.discrimination_counts();
    println!("difficulty hard/moderate/easy {hard}/{moderate}/{easy}; discrimination low/medium/high {low}/{medium}/{high}");
    Ok(())
}

pub fn reliability(common: &Common, data: &Data) -> CliResult<()> {
    let ws = Workspace::create(&common.out)?;
    let bank = load_bank(&ws, common)?;
    let dataset = analysis_dataset(&ws, &bank, data)?;
    let report = mcdonald_omega_t(&dataset, SkipTreatment::default(), &MinresConfig::default())?;
    ws.write(RELIABILITY_JSON, &json(&report)?)?;
    println!("alpha {:.3}, omega_t {:.3}", report.alpha, report.omega_t);
    Ok(())
}

pub fn sampler_config(common: &Common, sampling: &Sampling) -> SamplerConfig {
    SamplerConfig {
        chains: sampling.chains,
        iterations: sampling.iters,
        warmup: sampling.warmup,
        thin: sampling.thin,
        seed: stage_seed(common.seed, "fit"),
        ..SamplerConfig::default()
    }
}

pub fn fit(common: &Common, data: &Data, sampling: &Sampling) -> CliResult<()> {
    let ws = Workspace::create(&common.out)?;
    let bank = load_bank(&ws, common)?;
    let dataset = analysis_dataset(&ws, &bank, data)?;
    let model = Irt2plModel::from_dataset(&dataset);
    let posterior = fit_irt(&model, &sampler_config(common, sampling))?;
    let summary = posterior.summarize();
    ws.write(DRAWS_CSV, &posterior.draws_csv()?)?;
    ws.write(DIAGNOSTICS_CSV, &posterior.diagnostics_csv())?;
    ws.write(IRT_SUMMARY_JSON, &summary.to_json()?)?;
    ws.write(TECHNIQUES_JSON, &json(&aggregate_by_technique(&posterior, &bank)?)?)?;
    let predictive = posterior_predictive(
        &posterior,
        &dataset,
        PREDICTIVE_REPLICATIONS,
        stage_seed(common.seed, "predictive"),
    )?;
    let mut csv = String::from("item_id,observed,replicated_mean,replicated_lo95,replicated_hi95,ppp\n");
    for p in &predictive {
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            p.item_id, p.observed, p.replicated_mean, p.replicated_ci95[0], p.replicated_ci95[1], p.ppp
        ));
    }
    ws.write(PREDICTIVE_CSV, &csv)?;
    match ability_correlates(&posterior, &dataset) {
        Ok(c) => ws.write(ABILITY_CORRELATES_JSON, &json(&c)?)?,
        Err(e) => eprintln!("ability correlates skipped: {e}"),
    }
    let convergence = summary.convergence.as_ref();
    println!(
        "fit {} draws; divergences {}; convergence {}",
        summary.draws,
        summary.divergences.unwrap_or(0),
        if convergence.is_some_and(|c| c.passed) { "passed" } else { "FAILED" }
    );
    Ok(())
}

pub fn diagnose(common: &Common) -> CliResult<()> {
    let ws = Workspace::create(&common.out)?;
    let posterior = PosteriorFit::load_draws(&ws.artifact(DRAWS_CSV, "fit")?)?;
    let summary = posterior.summarize();
    ws.write(DIAGNOSTICS_CSV, &posterior.diagnostics_csv())?;
    ws.write(CONVERGENCE_JSON, &json(&summary.convergence)?)?;
    if let Some(c) = &summary.convergence {
        println!(
            "worst R-hat {}; lowest bulk ESS {}; {} failing parameters",
            c.worst_rhat.map_or("NA".into(), |v| format!("{v:.4}")),
            c.lowest_ess_bulk.map_or("NA".into(), |v| format!("{v:.0}")),
            c.failing.len()
        );
    }
    Ok(())
}

pub fn curves(common: &Common) -> CliResult<()> {
    let ws = Workspace::create(&common.out)?;
    let summary = load_irt(&ws)?;
    let set = compute_curves(&summary.item_params(), &Grid::default())?;
    ws.write(ICC_CSV, &set.icc_csv())?;
    ws.write(TIF_CSV, &set.tif_csv())?;
    let (theta, info) = set.peak_information();
    println!("test information peaks at theta {theta:.2} ({info:.3})");
    Ok(())
}

pub fn select(common: &Common, flagging: &Flagging) -> CliResult<()> {
    let ws = Workspace::create(&common.out)?;
    let (rule, thresholds) = load_flagging(flagging)?;
    let irt = load_irt(&ws)?;
    let ctt = load_ctt(&ws)?;
    let report = select_items(&ctt, &irt, &rule, &thresholds)?;
    ws.write(SELECTION_JSON, &report.to_json()?)?;
    ws.write(SELECTION_TXT, &report.text_summary())?;
    print!("{}", report.text_summary());
    Ok(())
}

// ============================================================================
// Simulation and reporting
// ============================================================================

fn parse_counts(text: &str) -> CliResult<CohortCounts> {
    let parts: Vec<usize> = text
        .split(',')
        .map(|t| t.trim().parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::Usage(format!("--engineer expects three counts D,C,S: {e}")))?;
    match parts.as_slice() {
        &[device_failures, random_clickers, short_and_skippy] => Ok(CohortCounts {
            device_failures,
            random_clickers,
            short_and_skippy,
        }),
        _ => Err(CliError::Usage("--engineer expects three counts D,C,S".into())),
    }
}

pub fn simulate(
    common: &Common,
    n_items: usize,
    n_participants: usize,
    skip_rate: f64,
    engineer: Option<&str>,
) -> CliResult<()> {
    let ws = Workspace::create(&common.out)?;
    let config = GeneratorConfig {
        items: n_items,
        participants: n_participants,
        skip: SkipModel::Mcar { rate: skip_rate },
        seed: stage_seed(common.seed, "simulate"),
        ..GeneratorConfig::default()
    };
    let study: SimulatedStudy = match engineer {
        Some(text) => engineer_exclusion_cohort(&config, &parse_counts(text)?, &ExclusionConfig::default())?.study,
        None => generate(&config)?,
    };
    ws.write(BANK_JSON, &study.bank.to_json())?;
    ws.write(RESPONSES_CSV, &study.data.responses_csv())?;
    ws.write(PARTICIPANTS_CSV, &study.data.participants_csv())?;
    ws.write(TRUTH_ITEMS_CSV, &study.truth_items_csv())?;
    ws.write(TRUTH_PARTICIPANTS_CSV, &study.truth_participants_csv())?;
    println!("simulated {n_participants} participants x {n_items} items");
    Ok(())
}

fn plain<T: Serialize>(value: &T) -> String {
    serde_json::to_value(value)
        .ok()
        .and_then(|v| v.as_str().map(str::to_owned))
        .unwrap_or_default()
}

fn cvr_table(ws: &Workspace, bank: &ItemBank, ratings: Option<&Path>) -> CliResult<Vec<(String, Ratio)>> {
    let screen = match ratings {
        Some(path) => screen_by_cvr(bank, &ExpertRatingSet::load(require(path)?)?, Ratio::new(0, 1))?,
        None => serde_json::from_str(&read(&ws.artifact(CVR_JSON, "cvr")?)?).map_err(itemcal::Error::from)?,
    };
    Ok(screen
        .retained
        .iter()
        .chain(&screen.removed)
        .map(|e| (e.item_id.clone(), e.cvr))
        .collect())
}

/// Columns: item_id, task, CVR, P, r, e, a (two decimals), then classes and flags.
pub fn report(common: &Common, ratings: Option<&Path>, flagging: &Flagging) -> CliResult<()> {
    let ws = Workspace::create(&common.out)?;
    let bank = load_bank(&ws, common)?;
    let (_, thresholds) = load_flagging(flagging)?;
    let ctt = load_ctt(&ws)?;
    let irt = load_irt(&ws)?;
    let cvrs = cvr_table(&ws, &bank, ratings)?;
    let evidence = flag_items(&ctt, &irt, &thresholds)?;
    let mut out = String::from("item_id,task,CVR,P,r,e,a,difficulty_class,discrimination_class,flags\n");
    for (stats, ev) in ctt.items.iter().zip(&evidence) {
        let id = &stats.item_id;
        let item = bank.get(id).ok_or_else(|| itemcal::Error::UnknownItem(id.clone()))?;
        let cvr = cvrs
            .iter()
            .find(|(i, _)| i == id)
            .map(|(_, c)| c.to_string())
            .ok_or_else(|| itemcal::Error::UnknownItem(id.clone()))?;
        let flags: Vec<&str> = ev.flags.iter().map(|f| f.as_str()).collect();
        out.push_str(&format!(
            "{id},{},{cvr},{:.2},{:.2},{:.2},{:.2},{},{},{}\n",
            plain(&item.task_subtask),
            stats.p,
            stats.r,
            ev.e,
            ev.a,
            plain(&stats.difficulty_class),
            plain(&stats.discrimination_class),
            flags.join(";")
        ));
    }
    ws.write(REPORT_CSV, &out)?;
    println!("report: {} items", ctt.items.len());
    Ok(())
}
