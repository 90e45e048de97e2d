//! Design files: a design vector plus everything derived from it.

use std::path::Path;

use lowvis_core::aero::{self, PhysicsConstants};
use lowvis_core::design::{vector_to_assembly, ComponentCatalog, DesignVector};
use lowvis_core::feasibility::{evaluate_all, ConstraintLimits, FeasibilityReport};
use lowvis_core::geometry::{assembly_mass_properties, Assembly, InertiaSummary};
use lowvis_core::refine::{RefineConfig, RefineReason, RefineResult};
use lowvis_core::render::RenderParams;
use lowvis_core::sampler::SampleConfig;
use lowvis_core::visibility::{VisibilityEvaluator, VisibilityParams, VisibilityScore};
use serde::{Deserialize, Serialize};

use crate::config::{Config, CorpusSpec};
use crate::error::{CliError, CliResult};

pub const DESIGN_SCHEMA_VERSION: u32 = 1;

pub const CATALOG_NOTE: &str =
    "catalog dimensions and masses are representative, user-overridable defaults";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Units {
    pub mass: String,
    pub length: String,
    pub time: String,
    pub angle: String,
    pub inertia: String,
    pub c_m: String,
    pub spin_rate: String,
}

impl Default for Units {
    fn default() -> Self {
        Self {
            mass: "g".into(),
            length: "mm".into(),
            time: "s".into(),
            angle: "rad".into(),
            inertia: "g*mm^2".into(),
            c_m: "g*mm^2".into(),
            spin_rate: "rev/s".into(),
        }
    }
}

/// Score plus what is needed to recompute it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VisibilityRecord {
    pub score: VisibilityScore,
    pub metric: String,
    pub corpus: CorpusSpec,
    pub params: VisibilityParams,
    pub render: RenderParams,
}

impl VisibilityRecord {
    pub fn config(&self) -> Config {
        Config {
            render: self.render,
            visibility: self.params.clone(),
            corpus: self.corpus.clone(),
            ..Config::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefinementRecord {
    pub initial_visibility: f64,
    pub final_visibility: f64,
    pub reduction: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub reason: RefineReason,
    pub initial_vector: DesignVector,
    pub config: RefineConfig,
}

impl RefinementRecord {
    pub fn new(r: &RefineResult, cfg: &RefineConfig) -> Self {
        Self {
            initial_visibility: r.initial_visibility,
            final_visibility: r.final_visibility,
            reduction: r.reduction(),
            iterations: r.iterations,
            evaluations: r.evaluations,
            reason: r.reason,
            initial_vector: r.initial.clone(),
            config: *cfg,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: Option<u64>,
    pub draw_index: Option<u64>,
    /// sampling distributions used to draw the design
    pub sample: Option<SampleConfig>,
    pub refinements: Vec<RefinementRecord>,
    pub tool_version: String,
}

impl Provenance {
    pub fn sampled(cfg: &SampleConfig, draw_index: u64) -> Self {
        Self {
            seed: Some(cfg.seed),
            draw_index: Some(draw_index),
            sample: Some(cfg.clone()),
            refinements: Vec::new(),
            tool_version: env!("CARGO_PKG_VERSION").to_owned(),
        }
    }

    pub fn is_refined(&self) -> bool {
        !self.refinements.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignFile {
    pub schema_version: u32,
    pub units: Units,
    pub catalog_note: String,
    pub catalog: ComponentCatalog,
    pub limits: ConstraintLimits,
    pub physics: PhysicsConstants,
    pub vector: DesignVector,
    pub assembly: Assembly,
    pub inertia: InertiaSummary,
    pub c_m: f64,
    pub spin_rps: f64,
    pub report: FeasibilityReport,
    pub visibility: Option<VisibilityRecord>,
    pub provenance: Provenance,
}

/// Physical context a design is derived under.
#[derive(Clone, Copy)]
pub struct DeriveContext<'a> {
    pub catalog: &'a ComponentCatalog,
    pub limits: &'a ConstraintLimits,
    pub physics: &'a PhysicsConstants,
}

impl<'a> DeriveContext<'a> {
    pub fn from_config(cfg: &'a Config) -> Self {
        Self {
            catalog: &cfg.catalog,
            limits: &cfg.limits,
            physics: &cfg.physics,
        }
    }
}

/// How to score a derived design.
pub struct Scoring<'a> {
    pub evaluator: &'a VisibilityEvaluator,
    pub corpus: &'a CorpusSpec,
    pub render: &'a RenderParams,
}

impl<'a> Scoring<'a> {
    pub fn new(cfg: &'a Config, evaluator: &'a VisibilityEvaluator) -> Self {
        Self {
            evaluator,
            corpus: &cfg.corpus,
            render: &cfg.render,
        }
    }
}

impl DesignFile {
    /// Computes every derived field from the vector.
    pub fn derive(
        vector: DesignVector,
        ctx: DeriveContext,
        scoring: Option<&Scoring>,
        provenance: Provenance,
    ) -> CliResult<Self> {
        let assembly = vector_to_assembly(&vector, ctx.catalog)?;
        let inertia = assembly_mass_properties(&assembly)?;
        let c_m = aero::drag_coefficient_unchecked(&assembly, ctx.physics);
        let spin_rps = aero::rad_per_s_to_rps(aero::spin_rate(c_m, ctx.physics)?);
        let wake = ctx.catalog.wake_region();
        let report = evaluate_all(&assembly, ctx.limits, ctx.physics, &wake);
        let visibility = match scoring {
            Some(s) => Some(VisibilityRecord {
                score: s.evaluator.evaluate(&assembly)?,
                metric: s.evaluator.metric_name().to_owned(),
                corpus: s.corpus.clone(),
                params: s.evaluator.params().clone(),
                render: *s.render,
            }),
            None => None,
        };
        Ok(Self {
            schema_version: DESIGN_SCHEMA_VERSION,
            units: Units::default(),
            catalog_note: CATALOG_NOTE.to_owned(),
            catalog: ctx.catalog.clone(),
            limits: *ctx.limits,
            physics: *ctx.physics,
            vector,
            assembly,
            inertia,
            c_m,
            spin_rps,
            report,
            visibility,
            provenance,
        })
    }

    /// Recomputes the derived fields from the stored vector, catalog and
    /// visibility settings.
    pub fn rederive(&self) -> CliResult<Self> {
        let ctx = DeriveContext {
            catalog: &self.catalog,
            limits: &self.limits,
            physics: &self.physics,
        };
        match &self.visibility {
            Some(rec) => {
                let cfg = rec.config();
                let ev = cfg.evaluator()?;
                let scoring = Scoring::new(&cfg, &ev);
                Self::derive(self.vector.clone(), ctx, Some(&scoring), self.provenance.clone())
            }
            None => Self::derive(self.vector.clone(), ctx, None, self.provenance.clone()),
        }
    }

    pub fn visibility_total(&self) -> Option<f64> {
        self.visibility.as_ref().map(|v| v.score.total)
    }

    pub fn total_mass(&self) -> f64 {
        self.inertia.total_mass
    }

    pub fn counterweights(&self) -> usize {
        self.vector.counterweights().unwrap_or(0)
    }

    pub fn to_json(&self) -> CliResult<String> {
        let mut s = serde_json::to_string_pretty(self)
            .map_err(|e| CliError::Config(format!("serialize design: {e}")))?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> CliResult<Self> {
        let f: DesignFile =
            serde_json::from_str(text).map_err(|e| CliError::Config(format!("design file: {e}")))?;
        if f.schema_version != DESIGN_SCHEMA_VERSION {
            return Err(CliError::Config(format!(
                "unsupported design schema version {}",
                f.schema_version
            )));
        }
        Ok(f)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn save(&self, path: &Path) -> CliResult<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| CliError::io(path, e))
    }
}

/// Input accepted by the scoring and preview commands: a full design file or
/// a bare assembly.
pub enum DesignInput {
    File(Box<DesignFile>),
    Assembly(Assembly),
}

impl DesignInput {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let value: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        if value.get("schema_version").is_some() {
            return Ok(DesignInput::File(Box::new(DesignFile::from_json(&text)?)));
        }
        let assembly: Assembly = serde_json::from_value(value)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Ok(DesignInput::Assembly(assembly))
    }

    pub fn assembly(&self) -> &Assembly {
        match self {
            DesignInput::File(f) => &f.assembly,
            DesignInput::Assembly(a) => a,
        }
    }

    pub fn file(&self) -> Option<&DesignFile> {
        match self {
            DesignInput::File(f) => Some(f),
            DesignInput::Assembly(_) => None,
        }
    }
}

/// Loads a file, re-derives it, and reports whether the serialized forms
/// agree byte for byte.
pub fn round_trips(path: &Path) -> CliResult<bool> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let f = DesignFile::from_json(&text)?;
    Ok(f.rederive()?.to_json()? == text)
}
