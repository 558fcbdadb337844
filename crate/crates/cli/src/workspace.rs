//! The output directory: artifact names, atomic writes, and input lookup.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use itemcal::irt::sampler::splitmix64;

use crate::error::{CliError, CliResult};

// ============================================================================
// Artifact names
// ============================================================================

pub const BLUEPRINT_CSV: &str = "blueprint.csv";
pub const VALIDATION_JSON: &str = "validation.json";
pub const CVR_JSON: &str = "cvr.json";
pub const CVR_CSV: &str = "cvr.csv";
pub const RESPONSES_CSV: &str = "responses.csv";
pub const PARTICIPANTS_CSV: &str = "participants.csv";
pub const DESCRIPTIVES_JSON: &str = "descriptives.json";
pub const EXCLUSIONS_CSV: &str = "exclusions.csv";
pub const EXCLUSIONS_JSON: &str = "exclusions.json";
pub const DATASET_RESPONSES_CSV: &str = "dataset_responses.csv";
pub const DATASET_PARTICIPANTS_CSV: &str = "dataset_participants.csv";
pub const RETAINED_RESPONSES_CSV: &str = "retained_responses.csv";
pub const RETAINED_PARTICIPANTS_CSV: &str = "retained_participants.csv";
pub const SCORES_CSV: &str = "scores.csv";
pub const CTT_JSON: &str = "ctt_report.json";
pub const CTT_CSV: &str = "ctt_report.csv";
pub const DRAWS_CSV: &str = "posterior_draws.csv";
pub const IRT_SUMMARY_JSON: &str = "irt_summary.json";
pub const DIAGNOSTICS_CSV: &str = "diagnostics.csv";
pub const CONVERGENCE_JSON: &str = "convergence.json";
pub const TECHNIQUES_JSON: &str = "techniques.json";
pub const ABILITY_CORRELATES_JSON: &str = "ability_correlates.json";
pub const PREDICTIVE_CSV: &str = "posterior_predictive.csv";
pub const ICC_CSV: &str = "icc.csv";
pub const TIF_CSV: &str = "tif.csv";
pub const RELIABILITY_JSON: &str = "reliability.json";
pub const SELECTION_JSON: &str = "selection.json";
pub const SELECTION_TXT: &str = "selection.txt";
pub const BANK_JSON: &str = "bank.json";
pub const TRUTH_ITEMS_CSV: &str = "truth_items.csv";
pub const TRUTH_PARTICIPANTS_CSV: &str = "truth_participants.csv";
pub const REPORT_CSV: &str = "report.csv";

// ============================================================================
// Seeds
// ============================================================================

/// 64-bit FNV-1a hash of a stage name.
pub fn fnv1a64(text: &str) -> u64 {
    text.bytes()
        .fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3))
}

/// Seed for one stage, derived from the single master seed.
pub fn stage_seed(master: u64, stage: &str) -> u64 {
    splitmix64(master ^ fnv1a64(stage))
}

// ============================================================================
// Output directory
// ============================================================================

pub struct Workspace {
    pub root: PathBuf,
}

impl Workspace {
    pub fn create(root: &Path) -> CliResult<Self> {
        fs::create_dir_all(root).map_err(|source| CliError::Write {
            path: root.display().to_string(),
            source,
        })?;
        Ok(Workspace { root: root.to_path_buf() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    /// Writes through a temporary file in the same directory, then renames.
    pub fn write(&self, name: &str, contents: &str) -> CliResult<()> {
        let target = self.path(name);
        let tmp = self.path(&format!(".{name}.tmp-{}", std::process::id()));
        let err = |source| CliError::Write {
            path: target.display().to_string(),
            source,
        };
        let mut file = fs::File::create(&tmp).map_err(err)?;
        file.write_all(contents.as_bytes()).map_err(err)?;
        file.sync_all().map_err(err)?;
        drop(file);
        fs::rename(&tmp, &target).map_err(|e| {
            let _ = fs::remove_file(&tmp);
            err(e)
        })
    }

    /// An artifact produced by an earlier stage.
    pub fn artifact(&self, name: &str, producer: &'static str) -> CliResult<PathBuf> {
        let p = self.path(name);
        if p.is_file() {
            Ok(p)
        } else {
            Err(CliError::MissingArtifact {
                artifact: p.display().to_string(),
                producer,
            })
        }
    }

    /// An explicit path when given, otherwise the named artifact.
    pub fn input_or_artifact(
        &self,
        explicit: Option<&Path>,
        name: &str,
        producer: &'static str,
    ) -> CliResult<PathBuf> {
        match explicit {
            Some(p) => require(p),
            None => self.artifact(name, producer),
        }
    }
}

/// A user-supplied input that must exist.
pub fn require(path: &Path) -> CliResult<PathBuf> {
    if path.is_file() {
        Ok(path.to_path_buf())
    } else {
        Err(CliError::MissingInput(path.display().to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fnv_matches_reference_vectors() {
        assert_eq!(fnv1a64(""), 0xcbf2_9ce4_8422_2325);
        assert_eq!(fnv1a64("a"), 0xaf63_dc4c_8601_ec8c);
        assert_ne!(stage_seed(1, "fit"), stage_seed(1, "simulate"));
    }

    #[test]
    fn writes_replace_atomically() {
        let dir = tempfile::tempdir().unwrap();
        let ws = Workspace::create(&dir.path().join("nested")).unwrap();
        ws.write("a.txt", "one").unwrap();
        ws.write("a.txt", "two").unwrap();
        assert_eq!(fs::read_to_string(ws.path("a.txt")).unwrap(), "two");
        let leftovers: Vec<_> = fs::read_dir(&ws.root).unwrap().collect();
        assert_eq!(leftovers.len(), 1);
        assert!(matches!(
            ws.artifact("missing.json", "fit"),
            Err(CliError::MissingArtifact { producer: "fit", .. })
        ));
    }
}
