//! Background scenes and image-distance backends.

mod learned;
mod pyramid;

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::Image;
use crate::render::RenderParams;

pub use learned::{learned_distance, FeatureNet, LearnedDistance};
pub use pyramid::{pyramid_distance, PyramidDistance, PYRAMID_LEVELS};

const IMAGE_EXTENSIONS: &[&str] = &["png", "jpg", "jpeg"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CorpusSource {
    Directory { path: PathBuf },
    Procedural { seed: u64 },
}

/// Grayscale backgrounds, all at the render resolution.
#[derive(Clone, Debug)]
pub struct BackgroundCorpus {
    pub images: Vec<Image>,
    pub source: CorpusSource,
}

impl BackgroundCorpus {
    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    /// The first `n` images, or an error if there are fewer.
    pub fn take(&self, n: usize) -> Result<&[Image]> {
        if n > self.images.len() {
            return Err(Error::CorpusTooSmall {
                needed: n,
                found: self.images.len(),
            });
        }
        Ok(&self.images[..n])
    }
}

fn has_image_extension(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
        .unwrap_or(false)
}

/// Luminance of a decoded image, centre-cropped to a square and resampled to
/// `resolution`.
pub fn prepare_background(img: &image::DynamicImage, resolution: usize) -> Image {
    let rgb = img.to_rgb32f();
    let (w, h) = (rgb.width() as usize, rgb.height() as usize);
    let side = w.min(h);
    let (x0, y0) = ((w - side) / 2, (h - side) / 2);
    let square = Image::from_fn(side, side, |x, y| {
        let p = rgb.get_pixel((x0 + x) as u32, (y0 + y) as u32).0;
        let l = 0.2126 * p[0] as f64 + 0.7152 * p[1] as f64 + 0.0722 * p[2] as f64;
        l.clamp(0.0, 1.0)
    });
    square.resample_bilinear(resolution, resolution)
}

/// Loads the first `limit` decodable PNG/JPEG files of `dir` in filename
/// order.
pub fn load_corpus(dir: &Path, p: &RenderParams, limit: usize) -> Result<BackgroundCorpus> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && has_image_extension(p))
        .collect();
    paths.sort();

    let mut images = Vec::with_capacity(limit);
    for path in &paths {
        if images.len() == limit {
            break;
        }
        match image::open(path) {
            Ok(img) => images.push(prepare_background(&img, p.resolution)),
            Err(_) => continue,
        }
    }
    if images.len() < limit || images.is_empty() {
        return Err(Error::InsufficientImages {
            dir: dir.to_path_buf(),
            needed: limit.max(1),
            found: images.len(),
        });
    }
    Ok(BackgroundCorpus {
        images,
        source: CorpusSource::Directory {
            path: dir.to_path_buf(),
        },
    })
}

const NOISE_OCTAVES: usize = 4;
const BASE_CELLS: usize = 4;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn lattice_value(seed: u64, image: u64, octave: u64, ix: u64, iy: u64) -> f64 {
    let mut h = splitmix(seed);
    for k in [image, octave, ix, iy] {
        h = splitmix(h ^ k);
    }
    (h >> 11) as f64 / (1u64 << 53) as f64
}

fn noise_image(seed: u64, index: u64, res: usize) -> Image {
    let mut acc = vec![0.0; res * res];
    let mut amplitude = 1.0;
    for octave in 0..NOISE_OCTAVES {
        let cells = BASE_CELLS << octave;
        let lattice: Vec<f64> = (0..=cells)
            .flat_map(|iy| {
                (0..=cells).map(move |ix| (ix as u64, iy as u64))
            })
            .map(|(ix, iy)| lattice_value(seed, index, octave as u64, ix, iy))
            .collect();
        let stride = cells + 1;
        for y in 0..res {
            let v = (y as f64 + 0.5) / res as f64 * cells as f64;
            let iy = (v.floor() as usize).min(cells - 1);
            let fy = v - iy as f64;
            for x in 0..res {
                let u = (x as f64 + 0.5) / res as f64 * cells as f64;
                let ix = (u.floor() as usize).min(cells - 1);
                let fx = u - ix as f64;
                let l00 = lattice[iy * stride + ix];
                let l10 = lattice[iy * stride + ix + 1];
                let l01 = lattice[(iy + 1) * stride + ix];
                let l11 = lattice[(iy + 1) * stride + ix + 1];
                let top = l00 + (l10 - l00) * fx;
                let bottom = l01 + (l11 - l01) * fx;
                acc[y * res + x] += amplitude * (top + (bottom - top) * fy);
            }
        }
        amplitude *= 0.5;
    }
    let (lo, hi) = acc
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let span = if hi > lo { hi - lo } else { 1.0 };
    Image {
        width: res,
        height: res,
        samples: acc.iter().map(|v| (v - lo) / span).collect(),
    }
}

/// Multi-octave value noise backgrounds, a dataset-free stand-in.
pub fn procedural_corpus(seed: u64, n: usize, p: &RenderParams) -> BackgroundCorpus {
    BackgroundCorpus {
        images: (0..n.max(1))
            .map(|i| noise_image(seed, i as u64, p.resolution))
            .collect(),
        source: CorpusSource::Procedural { seed },
    }
}

/// An image distance; implementations must be pure.
pub trait PerceptualMetric: Send + Sync {
    fn name(&self) -> &str;
    fn distance(&self, a: &Image, b: &Image) -> Result<f64>;
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MetricSpec {
    #[default]
    Pyramid,
    Learned {
        model: PathBuf,
        /// use the pyramid metric if the model cannot be loaded
        #[serde(default)]
        fallback: bool,
    },
}

impl MetricSpec {
    pub fn build(&self) -> Result<Arc<dyn PerceptualMetric>> {
        match self {
            MetricSpec::Pyramid => Ok(Arc::new(PyramidDistance)),
            MetricSpec::Learned { model, fallback } => match LearnedDistance::load(model) {
                Ok(m) => Ok(Arc::new(m)),
                Err(_) if *fallback => Ok(Arc::new(PyramidDistance)),
                Err(e) => Err(e),
            },
        }
    }
}
