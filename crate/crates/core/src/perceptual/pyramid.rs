//! Multi-scale intensity-plus-gradient distance.

use crate::error::{Error, Result};
use crate::raster::Image;

use super::PerceptualMetric;

pub const PYRAMID_LEVELS: usize = 4;
const MIN_SIDE: usize = 32;
const KERNEL: [f64; 5] = [1.0 / 16.0, 4.0 / 16.0, 6.0 / 16.0, 4.0 / 16.0, 1.0 / 16.0];

#[derive(Clone, Copy, Debug, Default)]
pub struct PyramidDistance;

impl PerceptualMetric for PyramidDistance {
    fn name(&self) -> &str {
        "pyramid"
    }

    fn distance(&self, a: &Image, b: &Image) -> Result<f64> {
        pyramid_distance(a, b)
    }
}

/// Mean over four Gaussian-pyramid levels of
/// `MSE + 2·(MSE of x-differences + MSE of y-differences)`.
///
/// Every term is quadratic in `a − b`, so the pyramid is built once on the
/// difference image.
pub fn pyramid_distance(a: &Image, b: &Image) -> Result<f64> {
    a.same_size(b)?;
    if a.width < MIN_SIDE || a.height < MIN_SIDE {
        return Err(Error::Precondition(format!(
            "pyramid distance needs images at least {MIN_SIDE}x{MIN_SIDE}, got {}x{}",
            a.width, a.height
        )));
    }
    let mut level = Image {
        width: a.width,
        height: a.height,
        samples: a.samples.iter().zip(&b.samples).map(|(x, y)| x - y).collect(),
    };
    let mut total = 0.0;
    for l in 0..PYRAMID_LEVELS {
        total += level_energy(&level);
        if l + 1 < PYRAMID_LEVELS {
            level = reduce(&level);
        }
    }
    Ok(total / PYRAMID_LEVELS as f64)
}

fn level_energy(d: &Image) -> f64 {
    let (w, h) = (d.width, d.height);
    let mut sq = 0.0;
    let mut gx = 0.0;
    let mut gy = 0.0;
    for y in 0..h {
        let row = &d.samples[y * w..(y + 1) * w];
        for x in 0..w {
            sq += row[x] * row[x];
        }
        for x in 0..w - 1 {
            let g = row[x + 1] - row[x];
            gx += g * g;
        }
        if y + 1 < h {
            let next = &d.samples[(y + 1) * w..(y + 2) * w];
            for x in 0..w {
                let g = next[x] - row[x];
                gy += g * g;
            }
        }
    }
    let mut e = sq / (w * h) as f64;
    if w > 1 {
        gx /= ((w - 1) * h) as f64;
    }
    if h > 1 {
        gy /= (w * (h - 1)) as f64;
    }
    e += 2.0 * (gx + gy);
    e
}

/// Separable [1,4,6,4,1]/16 blur with replicated borders, then keep every
/// other sample.
fn reduce(img: &Image) -> Image {
    let (w, h) = (img.width, img.height);
    let (nw, nh) = (w.div_ceil(2), h.div_ceil(2));
    let clamp = |i: isize, n: usize| i.clamp(0, n as isize - 1) as usize;

    // horizontal pass only at kept columns
    let mut horiz = vec![0.0; nw * h];
    for y in 0..h {
        let row = &img.samples[y * w..(y + 1) * w];
        for nx in 0..nw {
            let x = (2 * nx) as isize;
            let mut s = 0.0;
            for (k, wgt) in KERNEL.iter().enumerate() {
                s += wgt * row[clamp(x + k as isize - 2, w)];
            }
            horiz[y * nw + nx] = s;
        }
    }
    let mut out = vec![0.0; nw * nh];
    for ny in 0..nh {
        let y = (2 * ny) as isize;
        for (k, wgt) in KERNEL.iter().enumerate() {
            let src = clamp(y + k as isize - 2, h);
            let src_row = &horiz[src * nw..(src + 1) * nw];
            let dst = &mut out[ny * nw..(ny + 1) * nw];
            for (o, v) in dst.iter_mut().zip(src_row) {
                *o += wgt * v;
            }
        }
    }
    Image {
        width: nw,
        height: nh,
        samples: out,
    }
}
