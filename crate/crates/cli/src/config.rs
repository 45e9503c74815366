use std::path::{Path, PathBuf};

use disparity_core::audit::CiMode;
use disparity_core::decompose::DecompositionConfig;
use disparity_core::hetero_forest::ForestParams;
use disparity_core::learners::LearnerSpec;
use disparity_core::subgroup::BinningSpec;
use disparity_core::tabular::{bind_roles, load_csv, presets};
use disparity_core::{RoleSchema, RoledDataset};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

fn default_classifier() -> LearnerSpec {
    LearnerSpec::default_classifier()
}

fn default_test_fraction() -> f64 {
    0.2
}

fn default_audit_bootstrap() -> usize {
    100
}

fn default_reruns() -> usize {
    10
}

fn default_histogram_width() -> f64 {
    0.005
}

/// Everything a run needs. Relative paths are resolved against the
/// directory of the config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: PathBuf,
    /// Role schema JSON; exclusive with `preset`.
    #[serde(default)]
    pub schema: Option<PathBuf>,
    /// One of adult, hdma-white, hdma-asian.
    #[serde(default)]
    pub preset: Option<String>,
    /// Its `seed` is replaced by a substream of the run seed.
    #[serde(default)]
    pub decomposition: DecompositionConfig,
    #[serde(default)]
    pub forest: ForestParams,
    /// Defaults to the preset thresholds.
    #[serde(default)]
    pub binning: Option<BinningSpec>,
    #[serde(default = "default_classifier")]
    pub classifier: LearnerSpec,
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
    #[serde(default = "default_audit_bootstrap")]
    pub audit_bootstrap: usize,
    #[serde(default)]
    pub ci: CiMode,
    /// Retrain count when `ci` is reruns.
    #[serde(default = "default_reruns")]
    pub reruns: usize,
    #[serde(default = "default_histogram_width")]
    pub histogram_width: f64,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl RunConfig {
    pub fn from_file(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        let mut cfg: RunConfig =
            serde_json::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn dataset_path(&self) -> PathBuf {
        resolve(&self.base_dir, &self.dataset)
    }

    pub fn schema_path(&self) -> Option<PathBuf> {
        self.schema.as_deref().map(|p| resolve(&self.base_dir, p))
    }

    pub fn out_dir(&self) -> Option<PathBuf> {
        self.out.as_deref().map(|p| resolve(&self.base_dir, p))
    }

    /// SHA-256 of the effective settings. Paths enter as written and the
    /// output directory is left out, so moving a run does not change it.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.out = None;
        let text = serde_json::to_string(&canonical).expect("config serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    pub fn seed(&self) -> CliResult<u64> {
        self.seed
            .ok_or_else(|| CliError::config("a seed is required (config \"seed\" or --seed)"))
    }

    pub fn validate(&self) -> CliResult<()> {
        self.seed()?;
        match (&self.schema, &self.preset) {
            (Some(_), Some(_)) => return Err(CliError::config("give either \"schema\" or \"preset\", not both")),
            (None, None) => return Err(CliError::config("one of \"schema\" or \"preset\" is required")),
            (None, Some(p)) if presets::by_name(p).is_none() => {
                return Err(CliError::config(format!(
                    "unknown preset {p:?} (expected one of {})",
                    presets::NAMES.join(", ")
                )))
            }
            _ => {}
        }
        if let Some(s) = self.schema_path() {
            if !s.is_file() {
                return Err(CliError::config(format!("schema file not found: {}", s.display())));
            }
        }
        if !self.dataset_path().is_file() {
            return Err(CliError::config(format!("dataset not found: {}", self.dataset_path().display())));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(CliError::config("test_fraction must be in (0, 1)"));
        }
        if !(self.histogram_width > 0.0) {
            return Err(CliError::config("histogram_width must be positive"));
        }
        if self.ci == CiMode::Reruns && self.reruns < 2 {
            return Err(CliError::config("reruns must be at least 2"));
        }
        self.forest.validate().map_err(|e| CliError::config(e.to_string()))?;
        self.classifier.validate().map_err(|e| CliError::config(e.to_string()))?;
        if let Some(b) = &self.binning {
            b.clone().normalized().map_err(|e| CliError::config(e.to_string()))?;
        }
        Ok(())
    }

    pub fn role_schema(&self) -> CliResult<RoleSchema> {
        match (self.schema_path(), &self.preset) {
            (Some(path), _) => RoleSchema::from_json_file(path).map_err(|e| CliError::config(e.to_string())),
            (None, Some(name)) => presets::by_name(name)
                .map(|p| p.schema)
                .ok_or_else(|| CliError::config(format!("unknown preset {name:?}"))),
            (None, None) => Err(CliError::config("no schema")),
        }
    }

    pub fn binning(&self) -> CliResult<BinningSpec> {
        if let Some(b) = &self.binning {
            return b.clone().normalized().map_err(|e| CliError::config(e.to_string()));
        }
        let preset = self
            .preset
            .as_deref()
            .and_then(presets::by_name)
            .ok_or_else(|| CliError::config("\"binning\" is required without a preset"))?;
        BinningSpec::new(preset.thresholds).map_err(|e| CliError::config(e.to_string()))
    }

    pub fn load(&self) -> CliResult<RoledDataset> {
        let schema = self.role_schema()?;
        let data = load_csv(self.dataset_path(), schema.column_specs()).map_err(|e| CliError::config(e.to_string()))?;
        bind_roles(data, &schema).map_err(|e| CliError::config(e.to_string()))
    }
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}
