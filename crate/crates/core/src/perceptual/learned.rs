//! Deep-feature distance evaluated with a small CPU convolution engine.
//!
//! A model is a JSON file describing a feed-forward stack:
//!
//! ```json
//! {
//!   "format": "lowvis-feature-net",
//!   "input": { "channels": 3, "shift": [-0.03, -0.088, -0.188], "scale": [0.458, 0.448, 0.45] },
//!   "layers": [
//!     { "op": "conv2d", "in_channels": 3, "out_channels": 8, "kernel": 3,
//!       "stride": 1, "padding": 1, "weight": [...], "bias": [...] },
//!     { "op": "relu" },
//!     { "op": "tap", "weights": [...] },
//!     { "op": "max_pool", "size": 2, "stride": 2 }
//!   ]
//! }
//! ```
//!
//! Gray input `v` becomes `2v − 1`, is copied to every input channel and
//! normalised by `(x − shift) / scale`. Each `tap` compares the current
//! activations of both images after unit-normalising across channels,
//! weights the squared differences per channel, and averages spatially; the
//! taps are summed. Convolution weights are laid out `[out][in][ky][kx]`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::Image;

use super::PerceptualMetric;

const FORMAT: &str = "lowvis-feature-net";
const NORM_EPS: f64 = 1e-10;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InputTransform {
    pub channels: usize,
    pub shift: Vec<f64>,
    pub scale: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Layer {
    Conv2d {
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        #[serde(default = "one")]
        stride: usize,
        #[serde(default)]
        padding: usize,
        weight: Vec<f64>,
        bias: Vec<f64>,
    },
    Relu,
    MaxPool {
        size: usize,
        stride: usize,
    },
    Tap {
        weights: Vec<f64>,
    },
}

fn one() -> usize {
    1
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FeatureNet {
    pub format: String,
    pub input: InputTransform,
    pub layers: Vec<Layer>,
}

fn unavailable(msg: impl Into<String>) -> Error {
    Error::BackendUnavailable(msg.into())
}

impl FeatureNet {
    pub fn from_json(text: &str) -> Result<Self> {
        let net: FeatureNet =
            serde_json::from_str(text).map_err(|e| unavailable(format!("model decode: {e}")))?;
        net.validate()?;
        Ok(net)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| unavailable(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    fn validate(&self) -> Result<()> {
        if self.format != FORMAT {
            return Err(unavailable(format!("unknown model format {:?}", self.format)));
        }
        let inp = &self.input;
        if inp.channels == 0 || inp.shift.len() != inp.channels || inp.scale.len() != inp.channels {
            return Err(unavailable("input transform does not match channel count"));
        }
        if inp.scale.iter().any(|s| *s == 0.0 || !s.is_finite()) {
            return Err(unavailable("input scale must be finite and non-zero"));
        }
        let mut channels = inp.channels;
        let mut taps = 0;
        for (i, layer) in self.layers.iter().enumerate() {
            match layer {
                Layer::Conv2d {
                    in_channels,
                    out_channels,
                    kernel,
                    stride,
                    weight,
                    bias,
                    ..
                } => {
                    if *in_channels != channels
                        || *kernel == 0
                        || *stride == 0
                        || weight.len() != out_channels * in_channels * kernel * kernel
                        || bias.len() != *out_channels
                    {
                        return Err(unavailable(format!("layer {i}: inconsistent conv2d shape")));
                    }
                    channels = *out_channels;
                }
                Layer::Relu => {}
                Layer::MaxPool { size, stride } => {
                    if *size == 0 || *stride == 0 {
                        return Err(unavailable(format!("layer {i}: empty pooling window")));
                    }
                }
                Layer::Tap { weights } => {
                    if weights.len() != channels {
                        return Err(unavailable(format!(
                            "layer {i}: {} tap weights for {channels} channels",
                            weights.len()
                        )));
                    }
                    taps += 1;
                }
            }
        }
        if taps == 0 {
            return Err(unavailable("model has no feature taps"));
        }
        Ok(())
    }

    fn input(&self, img: &Image) -> Tensor {
        let n = img.width * img.height;
        let mut data = Vec::with_capacity(self.input.channels * n);
        for c in 0..self.input.channels {
            let (shift, scale) = (self.input.shift[c], self.input.scale[c]);
            data.extend(img.samples.iter().map(|v| (2.0 * v - 1.0 - shift) / scale));
        }
        Tensor {
            c: self.input.channels,
            h: img.height,
            w: img.width,
            data,
        }
    }

    pub fn distance(&self, a: &Image, b: &Image) -> Result<f64> {
        a.same_size(b)?;
        let mut ta = self.input(a);
        let mut tb = self.input(b);
        let mut total = 0.0;
        for layer in &self.layers {
            match layer {
                Layer::Tap { weights } => total += tap_distance(&ta, &tb, weights),
                _ => {
                    ta = ta.apply(layer)?;
                    tb = tb.apply(layer)?;
                }
            }
        }
        Ok(total)
    }
}

struct Tensor {
    c: usize,
    h: usize,
    w: usize,
    data: Vec<f64>,
}

impl Tensor {
    fn apply(self, layer: &Layer) -> Result<Tensor> {
        match layer {
            Layer::Conv2d {
                out_channels,
                kernel,
                stride,
                padding,
                weight,
                bias,
                ..
            } => self.conv(*out_channels, *kernel, *stride, *padding, weight, bias),
            Layer::Relu => Ok(Tensor {
                data: self.data.into_iter().map(|v| v.max(0.0)).collect(),
                ..self
            }),
            Layer::MaxPool { size, stride } => self.max_pool(*size, *stride),
            Layer::Tap { .. } => Ok(self),
        }
    }

    fn conv(
        &self,
        out_c: usize,
        k: usize,
        stride: usize,
        pad: usize,
        weight: &[f64],
        bias: &[f64],
    ) -> Result<Tensor> {
        let (h, w) = (self.h + 2 * pad, self.w + 2 * pad);
        if h < k || w < k {
            return Err(unavailable("image too small for convolution kernel"));
        }
        let oh = (h - k) / stride + 1;
        let ow = (w - k) / stride + 1;
        let plane = self.h * self.w;
        let mut data = vec![0.0; out_c * oh * ow];
        for o in 0..out_c {
            let out = &mut data[o * oh * ow..(o + 1) * oh * ow];
            out.fill(bias[o]);
            for i in 0..self.c {
                let src = &self.data[i * plane..(i + 1) * plane];
                for ky in 0..k {
                    for kx in 0..k {
                        let wgt = weight[((o * self.c + i) * k + ky) * k + kx];
                        if wgt == 0.0 {
                            continue;
                        }
                        for oy in 0..oh {
                            let sy = (oy * stride + ky) as isize - pad as isize;
                            if sy < 0 || sy >= self.h as isize {
                                continue;
                            }
                            let row = &src[sy as usize * self.w..(sy as usize + 1) * self.w];
                            for ox in 0..ow {
                                let sx = (ox * stride + kx) as isize - pad as isize;
                                if sx >= 0 && sx < self.w as isize {
                                    out[oy * ow + ox] += wgt * row[sx as usize];
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(Tensor {
            c: out_c,
            h: oh,
            w: ow,
            data,
        })
    }

    fn max_pool(&self, size: usize, stride: usize) -> Result<Tensor> {
        if self.h < size || self.w < size {
            return Err(unavailable("image too small for pooling window"));
        }
        let oh = (self.h - size) / stride + 1;
        let ow = (self.w - size) / stride + 1;
        let plane = self.h * self.w;
        let mut data = Vec::with_capacity(self.c * oh * ow);
        for c in 0..self.c {
            let src = &self.data[c * plane..(c + 1) * plane];
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut m = f64::NEG_INFINITY;
                    for dy in 0..size {
                        for dx in 0..size {
                            m = m.max(src[(oy * stride + dy) * self.w + ox * stride + dx]);
                        }
                    }
                    data.push(m);
                }
            }
        }
        Ok(Tensor {
            c: self.c,
            h: oh,
            w: ow,
            data,
        })
    }
}

fn tap_distance(a: &Tensor, b: &Tensor, weights: &[f64]) -> f64 {
    let n = a.h * a.w;
    let mut total = 0.0;
    for p in 0..n {
        let norm = |t: &Tensor| {
            (0..t.c)
                .map(|c| t.data[c * n + p].powi(2))
                .sum::<f64>()
                .sqrt()
                + NORM_EPS
        };
        let (na, nb) = (norm(a), norm(b));
        for (c, wgt) in weights.iter().enumerate() {
            let d = a.data[c * n + p] / na - b.data[c * n + p] / nb;
            total += wgt * d * d;
        }
    }
    total / n as f64
}

/// A loaded feature network used as a [`PerceptualMetric`].
#[derive(Clone, Debug)]
pub struct LearnedDistance {
    net: FeatureNet,
}

impl LearnedDistance {
    pub fn new(net: FeatureNet) -> Self {
        Self { net }
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(Self::new(FeatureNet::load(path)?))
    }
}

impl PerceptualMetric for LearnedDistance {
    fn name(&self) -> &str {
        "learned"
    }

    fn distance(&self, a: &Image, b: &Image) -> Result<f64> {
        self.net.distance(a, b)
    }
}

pub fn learned_distance(model: &Path, a: &Image, b: &Image) -> Result<f64> {
    FeatureNet::load(model)?.distance(a, b)
}
