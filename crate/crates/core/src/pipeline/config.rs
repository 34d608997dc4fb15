use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::PipelineError;
use crate::corpus::{ParseMode, WindowSpec, DEFAULT_MAX_AUTHORS};
use crate::evaluate::DistributionMode;
use crate::glm::DEFAULT_BOOTSTRAP;
use crate::hyperopt::GaConfig;
use crate::predict::PmfForm;
use crate::synthetic::GenerativeSpec;
use crate::training::TrainOptions;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InputFormat {
    #[default]
    Jsonl,
    DblpXml,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InputConfig {
    /// Relative paths are resolved against the config file's directory.
    pub path: PathBuf,
    pub format: InputFormat,
    pub parse: ParseMode,
    pub max_authors: usize,
    /// Only researchers whose name starts with this are modelled.
    pub focal_prefix: Option<String>,
}

impl Default for InputConfig {
    fn default() -> Self {
        InputConfig {
            path: PathBuf::new(),
            format: InputFormat::Jsonl,
            parse: ParseMode::Lenient,
            max_authors: DEFAULT_MAX_AUTHORS,
            focal_prefix: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PredictConfig {
    pub replicates: usize,
    /// Also write every replicate path.
    pub keep_trajectories: bool,
    pub pmf_form: PmfForm,
}

impl Default for PredictConfig {
    fn default() -> Self {
        PredictConfig { replicates: 100, keep_trajectories: false, pmf_form: PmfForm::Standard }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluateConfig {
    pub distribution: DistributionMode,
    pub scan_bootstrap: usize,
    pub scan_min_size: usize,
    pub max_lag: usize,
}

impl Default for EvaluateConfig {
    fn default() -> Self {
        EvaluateConfig { distribution: DistributionMode::SingleReplicate, scan_bootstrap: DEFAULT_BOOTSTRAP, scan_min_size: 20, max_lag: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
}

/// Everything a run needs, read from one TOML file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    /// Master seed; stages derive their own from it.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub input: InputConfig,
    #[serde(default = "WindowSpec::set4")]
    pub window: WindowSpec,
    #[serde(default)]
    pub train: TrainOptions,
    #[serde(default)]
    pub tune: GaConfig,
    #[serde(default)]
    pub predict: PredictConfig,
    #[serde(default)]
    pub evaluate: EvaluateConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub synth: Option<GenerativeSpec>,
}

impl PipelineConfig {
    pub fn parse(text: &str) -> Result<Self, PipelineError> {
        let cfg: PipelineConfig = toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))?;
        cfg.window.validate().map_err(|e| PipelineError::Config(e.to_string()))?;
        cfg.tune.validate().map_err(|e| PipelineError::Config(e.to_string()))?;
        if cfg.predict.replicates == 0 {
            return Err(PipelineError::Config("predict.replicates must be at least 1".into()));
        }
        Ok(cfg)
    }

    /// Reads a config file and resolves the input path against its directory.
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|_| PipelineError::MissingFile(path.to_path_buf()))?;
        let mut cfg = Self::parse(&text)?;
        if !cfg.input.path.as_os_str().is_empty() && cfg.input.path.is_relative() {
            if let Some(dir) = path.parent() {
                cfg.input.path = dir.join(&cfg.input.path);
            }
        }
        Ok(cfg)
    }

    /// Short SHA-256 of the canonical config, ignoring where output goes.
    pub fn hash(&self) -> String {
        let mut canon = self.clone();
        canon.output.dir = None;
        canon.input.path = canon.input.path.file_name().map(PathBuf::from).unwrap_or_default();
        let text = toml::to_string(&canon).expect("config serializes");
        let digest = Sha256::digest(text.as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    pub fn require_seed(&self) -> Result<u64, PipelineError> {
        self.seed.ok_or_else(|| PipelineError::Config("a seed is required: set `seed` in the config or pass --seed".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_takes_set4_defaults() {
        let cfg = PipelineConfig::parse("seed = 3\n[input]\npath = \"x.jsonl\"\n").unwrap();
        assert_eq!(cfg.window, WindowSpec::set4());
        assert_eq!(cfg.tune.population, 400);
        assert_eq!(cfg.predict.replicates, 100);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(PipelineConfig::parse("sede = 3\n"), Err(PipelineError::Config(_))));
        assert!(matches!(PipelineConfig::parse("[tune]\npopulaton = 3\n"), Err(PipelineError::Config(_))));
    }

    #[test]
    fn hash_ignores_output_dir_and_tracks_seed() {
        let a = PipelineConfig::parse("seed = 3\n[output]\ndir = \"a\"\n").unwrap();
        let b = PipelineConfig::parse("seed = 3\n[output]\ndir = \"b\"\n").unwrap();
        let c = PipelineConfig::parse("seed = 4\n").unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
    }
}
