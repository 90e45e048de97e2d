use std::fs;
use std::path::{Path, PathBuf};

use lowvis_core::feasibility::evaluate_all;
use lowvis_core::perceptual::MetricSpec;
use lowvis_core::refine::{refine, RefineContext};
use lowvis_core::render::{motion_blur, render_projection};
use lowvis_core::sampler::{run_stage1, Stage1Context};
use serde::Serialize;

use crate::config::{Config, CorpusSpec, CONFIG_ENV};
use crate::design_file::{
    DeriveContext, DesignFile, DesignInput, Provenance, RefinementRecord, Scoring,
    VisibilityRecord,
};
use crate::error::{CliError, CliResult};
use crate::report::{write_report, ReportSummary};

fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

pub fn design_file_name(index: usize) -> String {
    format!("design_{index:04}.json")
}

#[derive(Debug, Serialize)]
struct ManifestRow<'a> {
    index: usize,
    seed: u64,
    draw_index: u64,
    c_m: f64,
    spin_rps: f64,
    visibility: Option<f64>,
    total_mass: f64,
    n_counterweights: usize,
    file: &'a str,
}

/// Stage 1: writes one design file per feasible design and `manifest.csv`.
/// Returns the written paths in index order.
pub fn sample(cfg: &Config, count: usize, seed: Option<u64>, out: &Path) -> CliResult<Vec<PathBuf>> {
    let mut sample_cfg = cfg.sample.clone();
    if let Some(s) = seed {
        sample_cfg.seed = s;
    }
    create_dir(out)?;
    let evaluator = if count > 0 { Some(cfg.evaluator()?) } else { None };
    let wake = cfg.wake();
    let ctx = Stage1Context {
        catalog: &cfg.catalog,
        limits: &cfg.limits,
        physics: &cfg.physics,
        wake: &wake,
    };
    let output = run_stage1(count, &sample_cfg, ctx, None)?;

    let manifest_path = out.join("manifest.csv");
    let mut manifest = csv::Writer::from_path(&manifest_path).map_err(|e| CliError::io(&manifest_path, e))?;
    if output.designs.is_empty() {
        manifest.write_record([
            "index",
            "seed",
            "draw_index",
            "c_m",
            "spin_rps",
            "visibility",
            "total_mass",
            "n_counterweights",
            "file",
        ])?;
    }
    let mut paths = Vec::with_capacity(output.designs.len());
    for (index, design) in output.designs.into_iter().enumerate() {
        let scoring = evaluator.as_ref().map(|ev| Scoring::new(cfg, ev));
        let file = DesignFile::derive(
            design.vector,
            DeriveContext::from_config(cfg),
            scoring.as_ref(),
            Provenance::sampled(&sample_cfg, design.draw_index),
        )?;
        let name = design_file_name(index);
        let path = out.join(&name);
        file.save(&path)?;
        manifest.serialize(ManifestRow {
            index,
            seed: sample_cfg.seed,
            draw_index: design.draw_index,
            c_m: file.c_m,
            spin_rps: file.spin_rps,
            visibility: file.visibility_total(),
            total_mass: file.total_mass(),
            n_counterweights: file.counterweights(),
            file: &name,
        })?;
        paths.push(path);
    }
    manifest.flush().map_err(|e| CliError::io(&manifest_path, e))?;
    Ok(paths)
}

/// Config given on the command line or through the environment, if any.
fn explicit_config(path: Option<&Path>) -> CliResult<Option<Config>> {
    match path {
        Some(p) => Config::load(p).map(Some),
        None => match std::env::var_os(CONFIG_ENV) {
            Some(p) if !p.is_empty() => Config::load(Path::new(&p)).map(Some),
            _ => Ok(None),
        },
    }
}

/// The explicit config, else the visibility settings stored with the
/// design, else the defaults.
fn config_for(file: Option<&DesignFile>, path: Option<&Path>) -> CliResult<Config> {
    if let Some(cfg) = explicit_config(path)? {
        return Ok(cfg);
    }
    Ok(match file.and_then(|f| f.visibility.as_ref()) {
        Some(rec) => {
            let mut cfg = rec.config();
            cfg.refine = lowvis_core::refine::RefineConfig::render_aware(&cfg.render);
            cfg
        }
        None => Config::default(),
    })
}

/// Stage 2 on one design file. Fails with an infeasible-input error naming
/// the violated constraints when the start does not pass every check.
pub fn optimize(design: &Path, config: Option<&Path>, out: &Path) -> CliResult<DesignFile> {
    let file = DesignFile::load(design)?;
    let cfg = config_for(Some(&file), config)?;
    let wake = file.catalog.wake_region();
    let report = evaluate_all(&file.assembly, &file.limits, &file.physics, &wake);
    if !report.overall {
        let failed: Vec<String> = report
            .failed()
            .map(|r| format!("{} ({}): {}", r.id, r.name, r.detail))
            .collect();
        return Err(CliError::Infeasible(format!(
            "{} violates {}",
            design.display(),
            failed.join("; ")
        )));
    }
    let evaluator = cfg.evaluator()?;
    let ctx = RefineContext {
        catalog: &file.catalog,
        limits: &file.limits,
        physics: &file.physics,
        wake: &wake,
        evaluator: &evaluator,
    };
    let result = refine(&file.vector, &cfg.refine, &ctx)?;
    let mut provenance = file.provenance.clone();
    provenance.refinements.push(RefinementRecord::new(&result, &cfg.refine));
    let scoring = Scoring::new(&cfg, &evaluator);
    let refined = DesignFile::derive(
        result.final_vector,
        DeriveContext {
            catalog: &file.catalog,
            limits: &file.limits,
            physics: &file.physics,
        },
        Some(&scoring),
        provenance,
    )?;
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    refined.save(out)?;
    Ok(refined)
}

#[derive(Clone, Debug, Default)]
pub struct EvaluateOptions {
    pub config: Option<PathBuf>,
    pub backgrounds: Option<PathBuf>,
    pub procedural: Option<u64>,
    pub metric: Option<String>,
    pub model: Option<PathBuf>,
}

fn metric_spec(name: &str, model: Option<&Path>) -> CliResult<MetricSpec> {
    match name {
        "pyramid" => Ok(MetricSpec::Pyramid),
        "learned" => match model {
            Some(m) => Ok(MetricSpec::Learned {
                model: m.to_owned(),
                fallback: false,
            }),
            None => Err(CliError::Usage("--metric learned needs --model".into())),
        },
        other => Err(CliError::Usage(format!(
            "unknown metric {other:?} (expected pyramid or learned)"
        ))),
    }
}

/// Scores a design file or bare assembly.
pub fn evaluate(design: &Path, opts: &EvaluateOptions) -> CliResult<VisibilityRecord> {
    let input = DesignInput::load(design)?;
    let mut cfg = config_for(input.file(), opts.config.as_deref())?;
    match (&opts.backgrounds, opts.procedural) {
        (Some(_), Some(_)) => {
            return Err(CliError::Usage(
                "--backgrounds and --procedural are exclusive".into(),
            ))
        }
        (Some(dir), None) => cfg.corpus = CorpusSpec::Directory { path: dir.clone() },
        (None, Some(seed)) => cfg.corpus = CorpusSpec::Procedural { seed },
        (None, None) => {}
    }
    if let Some(name) = &opts.metric {
        cfg.visibility.metric = metric_spec(name, opts.model.as_deref())?;
    } else if opts.model.is_some() {
        return Err(CliError::Usage("--model needs --metric learned".into()));
    }
    let evaluator = cfg.evaluator()?;
    Ok(VisibilityRecord {
        score: evaluator.evaluate(input.assembly())?,
        metric: evaluator.metric_name().to_owned(),
        corpus: cfg.corpus.clone(),
        params: evaluator.params().clone(),
        render: cfg.render,
    })
}

/// Writes a yaw-0 projection, or with `blur` the yaw-averaged view, as PNG.
pub fn render(design: &Path, config: Option<&Path>, pitch_deg: f64, blur: bool, out: &Path) -> CliResult<()> {
    if !pitch_deg.is_finite() {
        return Err(CliError::Usage("pitch must be finite".into()));
    }
    let input = DesignInput::load(design)?;
    let cfg = config_for(input.file(), config)?;
    let pitch = pitch_deg.to_radians();
    let image = if blur {
        let render = lowvis_core::render::RenderParams {
            n_yaw: cfg.visibility.n_yaw,
            ..cfg.render
        };
        motion_blur(input.assembly(), pitch, &render).image
    } else {
        render_projection(input.assembly(), pitch, 0.0, &cfg.render).gamma_encode(cfg.render.gamma)
    };
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    image.save_png(out)?;
    Ok(())
}

/// Every `*.json` design file directly inside `dir`, sorted by name.
pub fn design_paths(dir: &Path) -> CliResult<Vec<PathBuf>> {
    let mut paths = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| CliError::io(dir, e))? {
        let path = entry.map_err(|e| CliError::io(dir, e))?.path();
        if path.is_file() && path.extension().is_some_and(|e| e == "json") {
            paths.push(path);
        }
    }
    paths.sort();
    Ok(paths)
}

fn scored(path: &Path) -> CliResult<(DesignFile, f64)> {
    let f = DesignFile::load(path)?;
    let v = f.visibility_total().ok_or_else(|| {
        CliError::Config(format!("{}: design has no visibility score", path.display()))
    })?;
    Ok((f, v))
}

pub fn report(dirs: &[PathBuf], out: &Path, bins: usize) -> CliResult<ReportSummary> {
    if bins == 0 {
        return Err(CliError::Usage("--bins must be positive".into()));
    }
    let mut sampled = Vec::new();
    let mut refined = Vec::new();
    for dir in dirs {
        for path in design_paths(dir)? {
            let (f, v) = scored(&path)?;
            if f.provenance.is_refined() {
                refined.push(v);
            } else {
                sampled.push(v);
            }
        }
    }
    create_dir(out)?;
    write_report(&sampled, &refined, bins, out)
}

/// Copies the `top` lowest-visibility designs of `dir` into `out`; ties are
/// broken by file name.
pub fn select(dir: &Path, top: usize, out: &Path) -> CliResult<Vec<PathBuf>> {
    let mut ranked = Vec::new();
    for path in design_paths(dir)? {
        let (_, v) = scored(&path)?;
        ranked.push((v, path));
    }
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
    create_dir(out)?;
    let mut written = Vec::new();
    for (_, src) in ranked.into_iter().take(top) {
        let dst = out.join(src.file_name().expect("listed files have names"));
        fs::copy(&src, &dst).map_err(|e| CliError::io(&dst, e))?;
        written.push(dst);
    }
    Ok(written)
}
