//! Solid-angle weighted visibility of a spinning assembly against a set of
//! backgrounds.

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Assembly;
use crate::perceptual::{BackgroundCorpus, MetricSpec, PerceptualMetric};
use crate::raster::Image;
use crate::render::{composite, motion_blur, BlurredView, RenderParams};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Placement {
    /// The view covers the whole background.
    #[default]
    FullFrame,
    /// The view is scaled to `scale` of the background side and centred.
    CenteredPatch { scale: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VisibilityParams {
    pub n_pitch: usize,
    pub n_backgrounds: usize,
    /// overrides `RenderParams::n_yaw`
    pub n_yaw: usize,
    pub metric: MetricSpec,
    pub placement: Placement,
}

impl Default for VisibilityParams {
    fn default() -> Self {
        Self {
            n_pitch: 10,
            n_backgrounds: 100,
            n_yaw: 120,
            metric: MetricSpec::Pyramid,
            placement: Placement::FullFrame,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PitchTerm {
    pub pitch: f64,
    pub weight: f64,
    pub mean: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VisibilityScore {
    pub total: f64,
    pub per_pitch: Vec<PitchTerm>,
}

/// Midpoint pitches `(2k+1)π/(4n)` with the solid angle of their band,
/// `cos(α − π/4n) − cos(α + π/4n)`.
pub fn pitch_samples(n: usize) -> Vec<(f64, f64)> {
    let half = PI / (4.0 * n as f64);
    (0..n)
        .map(|k| {
            let alpha = (2 * k + 1) as f64 * half;
            (alpha, (alpha - half).cos() - (alpha + half).cos())
        })
        .collect()
}

/// Compensated (Neumaier) sum in iteration order.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

fn place(view: &Image, background: &Image, placement: Placement) -> Image {
    match placement {
        Placement::FullFrame => view.resample_bilinear(background.width, background.height),
        Placement::CenteredPatch { scale } => {
            let pw = ((background.width as f64 * scale).round() as usize).clamp(1, background.width);
            let ph = ((background.height as f64 * scale).round() as usize).clamp(1, background.height);
            let patch = view.resample_bilinear(pw, ph);
            let (x0, y0) = ((background.width - pw) / 2, (background.height - ph) / 2);
            Image::from_fn(background.width, background.height, |x, y| {
                if x >= x0 && x < x0 + pw && y >= y0 && y < y0 + ph {
                    patch.get(x - x0, y - y0)
                } else {
                    1.0
                }
            })
        }
    }
}

/// Scores assemblies against a fixed background set and metric.
#[derive(Clone)]
pub struct VisibilityEvaluator {
    backgrounds: Vec<Image>,
    metric: Arc<dyn PerceptualMetric>,
    params: VisibilityParams,
    render: RenderParams,
    pitches: Vec<(f64, f64)>,
}

impl VisibilityEvaluator {
    pub fn new(
        corpus: &BackgroundCorpus,
        params: &VisibilityParams,
        render: &RenderParams,
    ) -> Result<Self> {
        let metric = params.metric.build()?;
        Self::with_metric(corpus, params, render, metric)
    }

    pub fn with_metric(
        corpus: &BackgroundCorpus,
        params: &VisibilityParams,
        render: &RenderParams,
        metric: Arc<dyn PerceptualMetric>,
    ) -> Result<Self> {
        if params.n_pitch == 0 || params.n_backgrounds == 0 || params.n_yaw == 0 {
            return Err(Error::Precondition(
                "visibility sample counts must be positive".into(),
            ));
        }
        let backgrounds = corpus.take(params.n_backgrounds)?.to_vec();
        let render = RenderParams {
            n_yaw: params.n_yaw,
            ..*render
        };
        Ok(Self {
            backgrounds,
            metric,
            pitches: pitch_samples(params.n_pitch),
            params: params.clone(),
            render,
        })
    }

    pub fn params(&self) -> &VisibilityParams {
        &self.params
    }

    pub fn render_params(&self) -> &RenderParams {
        &self.render
    }

    pub fn metric_name(&self) -> &str {
        self.metric.name()
    }

    /// Blurred views at every sample pitch.
    pub fn views(&self, a: &Assembly) -> Vec<BlurredView> {
        self.pitches
            .par_iter()
            .map(|&(pitch, _)| motion_blur(a, pitch, &self.render))
            .collect()
    }

    pub fn evaluate(&self, a: &Assembly) -> Result<VisibilityScore> {
        let views = self.views(a);
        let nb = self.backgrounds.len();
        let distances: Vec<f64> = (0..views.len() * nb)
            .into_par_iter()
            .map(|idx| {
                let (view, bg) = (&views[idx / nb], &self.backgrounds[idx % nb]);
                let placed = BlurredView {
                    pitch: view.pitch,
                    image: place(&view.image, bg, self.params.placement),
                };
                let c = composite(&placed, bg)?;
                self.metric.distance(bg, &c)
            })
            .collect::<Result<_>>()?;

        let per_pitch: Vec<PitchTerm> = self
            .pitches
            .iter()
            .zip(distances.chunks(nb))
            .map(|(&(pitch, weight), ds)| PitchTerm {
                pitch,
                weight,
                mean: compensated_sum(ds.iter().copied()) / nb as f64,
            })
            .collect();
        let total = compensated_sum(per_pitch.iter().map(|t| t.weight * t.mean));
        Ok(VisibilityScore { total, per_pitch })
    }
}

pub fn visibility(
    a: &Assembly,
    corpus: &BackgroundCorpus,
    p: &VisibilityParams,
    r: &RenderParams,
) -> Result<VisibilityScore> {
    VisibilityEvaluator::new(corpus, p, r)?.evaluate(a)
}
