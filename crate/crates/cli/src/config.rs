use std::collections::BTreeMap;
use std::path::Path;

use rlvr_forge::dataset::PreprocessRules;
use rlvr_forge::gateway::{QualityModel, RemoteConfig, VariantDifficulty};
use rlvr_forge::{PipelineConfig, RatingConfig};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const MOCK_PROFILE: &str = "mock";

/// Settings for the built-in offline backends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MockConfig {
    /// Solve probability for samples without `mock_p_solve` in their meta.
    pub default_p_solve: f64,
    pub variant: VariantDifficulty,
    pub quality: QualityModel,
    pub marker_drop_rate: f64,
    pub tie_rate: f64,
}

impl Default for MockConfig {
    fn default() -> Self {
        Self {
            default_p_solve: 0.5,
            variant: VariantDifficulty::Fixed { p: 0.4 },
            quality: QualityModel::Fixed { score: 0.9 },
            marker_drop_rate: 0.0,
            tie_rate: 0.0,
        }
    }
}

/// One HTTP endpoint per role. The verifier falls back to the target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileConfig {
    pub target: RemoteConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verifier: Option<RemoteConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthesizer: Option<RemoteConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub judge: Option<RemoteConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub seed: u64,
    pub backend_profile: String,
    pub preprocess: PreprocessRules,
    pub pipeline: PipelineConfig,
    pub rating: RatingConfig,
    pub mock: MockConfig,
    pub backends: BTreeMap<String, ProfileConfig>,
}

impl Default for FileConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            backend_profile: MOCK_PROFILE.into(),
            preprocess: PreprocessRules::default(),
            pipeline: PipelineConfig::default(),
            rating: RatingConfig::default(),
            mock: MockConfig::default(),
            backends: BTreeMap::new(),
        }
    }
}

impl FileConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        toml::from_str(&text).map_err(|e| CliError::invalid(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> CliResult<()> {
        self.pipeline.validate()?;
        self.rating.validate()?;
        if self.backend_profile != MOCK_PROFILE && !self.backends.contains_key(&self.backend_profile) {
            return Err(CliError::invalid(format!(
                "unknown backend profile `{}` (known: {})",
                self.backend_profile,
                std::iter::once(MOCK_PROFILE).chain(self.backends.keys().map(String::as_str)).collect::<Vec<_>>().join(", ")
            )));
        }
        for p in [self.mock.marker_drop_rate, self.mock.tie_rate, self.mock.default_p_solve] {
            if !(0.0..=1.0).contains(&p) {
                return Err(CliError::invalid(format!("mock probabilities must lie in [0, 1], got {p}")));
            }
        }
        Ok(())
    }
}
