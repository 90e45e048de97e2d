//! Pipeline configuration file.

use std::path::{Path, PathBuf};

use lowvis_core::aero::PhysicsConstants;
use lowvis_core::design::ComponentCatalog;
use lowvis_core::feasibility::ConstraintLimits;
use lowvis_core::perceptual::{load_corpus, procedural_corpus, BackgroundCorpus};
use lowvis_core::refine::RefineConfig;
use lowvis_core::render::RenderParams;
use lowvis_core::sampler::SampleConfig;
use lowvis_core::visibility::{VisibilityEvaluator, VisibilityParams};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Environment variable naming the config used when `--config` is absent.
pub const CONFIG_ENV: &str = "LOWVIS_CONFIG";

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

const DESK_MAX_ITERATIONS: usize = 40;

/// Where backgrounds come from; the count is `visibility.n_backgrounds`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CorpusSpec {
    Procedural { seed: u64 },
    Directory { path: PathBuf },
}

impl Default for CorpusSpec {
    fn default() -> Self {
        CorpusSpec::Procedural { seed: 0 }
    }
}

impl CorpusSpec {
    pub fn load(&self, visibility: &VisibilityParams, render: &RenderParams) -> CliResult<BackgroundCorpus> {
        Ok(match self {
            CorpusSpec::Procedural { seed } => {
                procedural_corpus(*seed, visibility.n_backgrounds, render)
            }
            CorpusSpec::Directory { path } => load_corpus(path, render, visibility.n_backgrounds)?,
        })
    }
}

/// The catalog defaults are representative parts, not measured ones; every
/// section may be overridden in part.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub schema_version: u32,
    pub catalog: ComponentCatalog,
    pub limits: ConstraintLimits,
    pub physics: PhysicsConstants,
    pub render: RenderParams,
    pub visibility: VisibilityParams,
    pub corpus: CorpusSpec,
    pub sample: SampleConfig,
    pub refine: RefineConfig,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            schema_version: CONFIG_SCHEMA_VERSION,
            catalog: ComponentCatalog::default(),
            limits: ConstraintLimits::default(),
            physics: PhysicsConstants::default(),
            render: RenderParams::default(),
            visibility: VisibilityParams::default(),
            corpus: CorpusSpec::default(),
            sample: SampleConfig::default(),
            refine: RefineConfig::default(),
        }
    }
}

impl Config {
    /// Reduced desk-scale settings: 128² renders, 60 yaw steps, 20
    /// procedural backgrounds, render-aware finite differences and at most
    /// 40 refinement iterations.
    pub fn desk() -> Self {
        let render = RenderParams {
            resolution: 128,
            n_yaw: 60,
            ..RenderParams::default()
        };
        Self {
            render,
            visibility: VisibilityParams {
                n_backgrounds: 20,
                n_yaw: 60,
                ..VisibilityParams::default()
            },
            refine: RefineConfig {
                max_iterations: DESK_MAX_ITERATIONS,
                ..RefineConfig::render_aware(&render)
            },
            ..Self::default()
        }
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let cfg: Config = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// `--config` if given, else the file named by the environment variable,
    /// else the defaults.
    pub fn resolve(path: Option<&Path>) -> CliResult<Self> {
        if let Some(p) = path {
            return Self::load(p);
        }
        match std::env::var_os(CONFIG_ENV) {
            Some(p) if !p.is_empty() => Self::load(Path::new(&p)),
            _ => Ok(Self::default()),
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.schema_version != CONFIG_SCHEMA_VERSION {
            return Err(CliError::Config(format!(
                "unsupported schema version {}",
                self.schema_version
            )));
        }
        self.catalog.validate()?;
        let r = &self.render;
        if r.resolution == 0 || r.n_yaw == 0 || r.supersample == 0 || !(r.window > 0.0) || !(r.gamma > 0.0) {
            return Err(CliError::Config("render parameters must be positive".into()));
        }
        Ok(())
    }

    pub fn evaluator(&self) -> CliResult<VisibilityEvaluator> {
        let corpus = self.corpus.load(&self.visibility, &self.render)?;
        Ok(VisibilityEvaluator::new(&corpus, &self.visibility, &self.render)?)
    }

    pub fn wake(&self) -> lowvis_core::aero::WakeRegion {
        self.catalog.wake_region()
    }
}
