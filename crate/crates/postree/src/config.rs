//! Run configuration: a JSON file whose values command-line flags
//! override. Relative paths resolve against the file's directory.

use std::path::{Path, PathBuf};

use postree_core::generation::{GenParams, RankWeights};
use postree_core::intent::IntentVectorizeParams;
use postree_core::metrics::OveMode;
use postree_core::retrieval::{Distance, Strategy};
use postree_core::tree::NestParams;
use serde::{Deserialize, Serialize};

use crate::{fsio, Error};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    #[default]
    Mock,
    Http,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendConfig {
    pub kind: BackendKind,
    pub endpoint_url: Option<String>,
    /// Name of the environment variable holding the bearer token.
    pub api_token_env_var: Option<String>,
    pub model_name: Option<String>,
    /// Mock responses keyed by query record id.
    pub fixture_path: Option<PathBuf>,
    pub timeout_s: f64,
    pub max_attempts: u32,
}

impl Default for BackendConfig {
    fn default() -> Self {
        Self {
            kind: BackendKind::Mock,
            endpoint_url: None,
            api_token_env_var: None,
            model_name: None,
            fixture_path: None,
            timeout_s: 60.0,
            max_attempts: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: Option<PathBuf>,
    /// Example pool for generation; defaults to `dataset`.
    pub train_dataset: Option<PathBuf>,
    pub maps_dir: Option<PathBuf>,
    pub index: Option<PathBuf>,
    pub reference_stats: Option<PathBuf>,
    pub prompt_template: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub seed: u64,
    /// Worker threads; `None` uses every core.
    pub jobs: Option<usize>,
    pub backend: BackendConfig,
    pub generation: GenParams,
    pub strategy: Strategy,
    pub distance: Distance,
    pub rank: RankWeights,
    pub nest: NestParams,
    pub vectorize: IntentVectorizeParams,
    pub ove: OveMode,
    pub flat_trees: bool,
    pub no_intent: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dataset: None,
            train_dataset: None,
            maps_dir: None,
            index: None,
            reference_stats: None,
            prompt_template: None,
            out_dir: None,
            seed: 0,
            jobs: None,
            backend: BackendConfig::default(),
            generation: GenParams::default(),
            strategy: Strategy::FAligned,
            distance: Distance::default(),
            rank: RankWeights::default(),
            nest: NestParams::default(),
            vectorize: IntentVectorizeParams::default(),
            ove: OveMode::default(),
            flat_trees: false,
            no_intent: false,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, Error> {
        let mut cfg: RunConfig = fsio::read_json(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [
            &mut cfg.dataset,
            &mut cfg.train_dataset,
            &mut cfg.maps_dir,
            &mut cfg.index,
            &mut cfg.reference_stats,
            &mut cfg.prompt_template,
            &mut cfg.out_dir,
            &mut cfg.backend.fixture_path,
        ] {
            if let Some(v) = p.as_mut() {
                if v.is_relative() {
                    *v = base.join(&*v);
                }
            }
        }
        Ok(cfg)
    }

    /// Fails unless every path the config names exists.
    pub fn check_paths(&self) -> Result<(), Error> {
        let named = [
            ("dataset", &self.dataset),
            ("train_dataset", &self.train_dataset),
            ("maps_dir", &self.maps_dir),
            ("index", &self.index),
            ("reference_stats", &self.reference_stats),
            ("prompt_template", &self.prompt_template),
            ("backend.fixture_path", &self.backend.fixture_path),
        ];
        for (name, p) in named {
            if let Some(p) = p {
                if !p.exists() {
                    return Err(Error::Config(format!("{name}: {} does not exist", p.display())));
                }
            }
        }
        Ok(())
    }

    pub fn require<'a>(&self, name: &str, p: &'a Option<PathBuf>) -> Result<&'a Path, Error> {
        p.as_deref()
            .ok_or_else(|| Error::Usage(format!("`{name}` is required (flag or config)")))
    }
}
