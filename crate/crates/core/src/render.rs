//! Orthographic ray casting of assemblies into linear transmission images and
//! yaw-averaged motion blur.
//!
//! The view direction at pitch α is `cos α·(+Z) + sin α·(+X)`; α = 0 looks
//! down the spin axis, α = π/2 looks at the side. The image plane is spanned
//! by `e1 = (cos α, 0, −sin α)` (columns, left to right) and `e2 = +Y` (rows,
//! bottom to top), centred on the spin axis. Pixels that see nothing are
//! white (1.0); opaque hits take the component albedo; a propeller disk in
//! front of whatever is behind it attenuates by `1 − solidity·(1 − albedo)`.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geometry::{yaw_rotation, Assembly, Mat3, Primitive, Vec3};
use crate::raster::Image;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RenderParams {
    /// pixels per side
    pub resolution: usize,
    /// mm per side
    pub window: f64,
    pub gamma: f64,
    pub n_yaw: usize,
    /// rays per pixel per side (1 = centre ray only)
    pub supersample: usize,
}

impl Default for RenderParams {
    fn default() -> Self {
        Self {
            resolution: 256,
            window: 160.0,
            gamma: 2.2,
            n_yaw: 120,
            supersample: 1,
        }
    }
}

impl RenderParams {
    pub fn pixel_size(&self) -> f64 {
        self.window / self.resolution as f64
    }
}

/// Gamma-encoded, yaw-averaged transmission map at one pitch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlurredView {
    pub pitch: f64,
    pub image: Image,
}

/// Yaw accumulation uses fixed-point integers so the average does not depend
/// on summation order.
const FIXED_SCALE: f64 = (1u64 << 40) as f64;

struct ViewBasis {
    dir: Vec3,
    e1: Vec3,
    e2: Vec3,
}

impl ViewBasis {
    fn at_pitch(pitch: f64) -> Self {
        let (s, c) = pitch.sin_cos();
        Self {
            dir: Vec3::new(s, 0.0, c),
            e1: Vec3::new(c, 0.0, -s),
            e2: Vec3::y(),
        }
    }
}

#[derive(Clone, Copy)]
enum Shape {
    Cuboid([f64; 3]),
    Cylinder { radius: f64, half_height: f64 },
    Sphere { radius: f64 },
    Disk { radius: f64 },
}

/// A component prepared for casting: ray origins in its local frame are
/// `s·a + t·b + c` for image-plane coordinates (s, t).
struct Caster {
    shape: Shape,
    dir: Vec3,
    a: Vec3,
    b: Vec3,
    c: Vec3,
    center_s: f64,
    center_t: f64,
    radius: f64,
    value: f64,
}

impl Caster {
    fn new(
        primitive: &Primitive,
        rotation: &Mat3,
        position: &Vec3,
        basis: &ViewBasis,
        albedo: f64,
    ) -> Option<Self> {
        let (shape, value) = match *primitive {
            Primitive::Cuboid {
                width,
                depth,
                height,
            } => (Shape::Cuboid([0.5 * width, 0.5 * depth, 0.5 * height]), albedo),
            Primitive::Cylinder { diameter, height } => (
                Shape::Cylinder {
                    radius: 0.5 * diameter,
                    half_height: 0.5 * height,
                },
                albedo,
            ),
            Primitive::Sphere { diameter } => {
                if diameter <= 0.0 {
                    return None;
                }
                (
                    Shape::Sphere {
                        radius: 0.5 * diameter,
                    },
                    albedo,
                )
            }
            Primitive::Disk { diameter, solidity } => (
                Shape::Disk {
                    radius: 0.5 * diameter,
                },
                1.0 - solidity * (1.0 - albedo),
            ),
        };
        let rt = rotation.transpose();
        Some(Self {
            shape,
            dir: rt * basis.dir,
            a: rt * basis.e1,
            b: rt * basis.e2,
            c: -(rt * position),
            center_s: position.dot(&basis.e1),
            center_t: position.dot(&basis.e2),
            radius: primitive.bounding_radius(),
            value,
        })
    }

    fn is_disk(&self) -> bool {
        matches!(self.shape, Shape::Disk { .. })
    }

    /// Entry parameter of the ray through (s, t), if it hits.
    #[inline]
    fn hit(&self, s: f64, t: f64) -> Option<f64> {
        let o = s * self.a + t * self.b + self.c;
        let d = &self.dir;
        match self.shape {
            Shape::Sphere { radius } => {
                let b = o.dot(d);
                let c = o.norm_squared() - radius * radius;
                let disc = b * b - c;
                (disc >= 0.0).then(|| -b - disc.sqrt())
            }
            Shape::Cuboid(half) => {
                let mut t0 = f64::NEG_INFINITY;
                let mut t1 = f64::INFINITY;
                for i in 0..3 {
                    if d[i].abs() < 1e-15 {
                        if o[i].abs() > half[i] {
                            return None;
                        }
                    } else {
                        let inv = 1.0 / d[i];
                        let ta = (-half[i] - o[i]) * inv;
                        let tb = (half[i] - o[i]) * inv;
                        t0 = t0.max(ta.min(tb));
                        t1 = t1.min(ta.max(tb));
                    }
                }
                (t0 <= t1).then_some(t0)
            }
            Shape::Cylinder {
                radius,
                half_height,
            } => {
                let (mut t0, mut t1);
                let a = d.x * d.x + d.y * d.y;
                let c = o.x * o.x + o.y * o.y - radius * radius;
                if a < 1e-15 {
                    if c > 0.0 {
                        return None;
                    }
                    t0 = f64::NEG_INFINITY;
                    t1 = f64::INFINITY;
                } else {
                    let b = o.x * d.x + o.y * d.y;
                    let disc = b * b - a * c;
                    if disc < 0.0 {
                        return None;
                    }
                    let sq = disc.sqrt();
                    t0 = (-b - sq) / a;
                    t1 = (-b + sq) / a;
                }
                if d.z.abs() < 1e-15 {
                    if o.z.abs() > half_height {
                        return None;
                    }
                } else {
                    let ta = (-half_height - o.z) / d.z;
                    let tb = (half_height - o.z) / d.z;
                    t0 = t0.max(ta.min(tb));
                    t1 = t1.min(ta.max(tb));
                }
                (t0 <= t1).then_some(t0)
            }
            Shape::Disk { radius } => {
                if d.z.abs() < 1e-12 {
                    return None;
                }
                let t = -o.z / d.z;
                let x = o.x + t * d.x;
                let y = o.y + t * d.y;
                (x * x + y * y <= radius * radius).then_some(t)
            }
        }
    }
}

/// Reusable per-thread buffers for one pitch.
struct Frame {
    res: usize,
    pixel: f64,
    half_window: f64,
    depth: Vec<f64>,
    value: Vec<f64>,
}

impl Frame {
    fn new(res: usize, window: f64) -> Self {
        Self {
            res,
            pixel: window / res as f64,
            half_window: 0.5 * window,
            depth: vec![f64::INFINITY; res * res],
            value: vec![1.0; res * res],
        }
    }

    /// Pixel index range covering [lo, hi] along an image axis.
    fn span(&self, lo: f64, hi: f64) -> Option<(usize, usize)> {
        let first = ((lo + self.half_window) / self.pixel - 0.5).ceil().max(0.0);
        let last = ((hi + self.half_window) / self.pixel - 0.5)
            .floor()
            .min(self.res as f64 - 1.0);
        (first <= last).then_some((first as usize, last as usize))
    }

    fn draw(&mut self, casters: &[Caster]) {
        self.depth.fill(f64::INFINITY);
        self.value.fill(1.0);
        let res = self.res;
        for pass_disks in [false, true] {
            for caster in casters.iter().filter(|c| c.is_disk() == pass_disks) {
                let Some((c0, c1)) =
                    self.span(caster.center_s - caster.radius, caster.center_s + caster.radius)
                else {
                    continue;
                };
                // rows run top to bottom, so t decreases with the row index
                let Some((r0, r1)) = self.span(
                    -(caster.center_t + caster.radius),
                    -(caster.center_t - caster.radius),
                ) else {
                    continue;
                };
                for row in r0..=r1 {
                    let t = self.half_window - (row as f64 + 0.5) * self.pixel;
                    for col in c0..=c1 {
                        let s = (col as f64 + 0.5) * self.pixel - self.half_window;
                        let Some(hit) = caster.hit(s, t) else {
                            continue;
                        };
                        let idx = row * res + col;
                        if pass_disks {
                            if hit < self.depth[idx] {
                                self.value[idx] *= caster.value;
                            }
                        } else if hit < self.depth[idx] {
                            self.depth[idx] = hit;
                            self.value[idx] = caster.value;
                        }
                    }
                }
            }
        }
    }
}

fn casters_at_yaw(a: &Assembly, yaw: f64, basis: &ViewBasis) -> Vec<Caster> {
    let rz = yaw_rotation(yaw);
    a.components
        .iter()
        .filter_map(|c| {
            let rotation = rz * c.pose.rotation();
            let position = rz * c.pose.position;
            Caster::new(&c.primitive, &rotation, &position, basis, c.albedo)
        })
        .collect()
}

/// One linear-luminance orthographic view with the assembly yawed by `yaw`.
pub fn render_projection(a: &Assembly, pitch: f64, yaw: f64, p: &RenderParams) -> Image {
    let ss = p.supersample.max(1);
    let res = p.resolution * ss;
    let basis = ViewBasis::at_pitch(pitch);
    let mut frame = Frame::new(res, p.window);
    frame.draw(&casters_at_yaw(a, yaw, &basis));
    let img = Image {
        width: res,
        height: res,
        samples: std::mem::take(&mut frame.value),
    };
    img.downsample_box(ss)
}

/// Yaw angles 0, 2π/N, …, in ascending order.
pub fn yaw_angles(n_yaw: usize) -> impl Iterator<Item = f64> {
    (0..n_yaw).map(move |j| std::f64::consts::TAU * j as f64 / n_yaw as f64)
}

/// Linear (not yet gamma-encoded) mean over the yaw revolution.
pub fn yaw_average(a: &Assembly, pitch: f64, p: &RenderParams) -> Image {
    let ss = p.supersample.max(1);
    let res = p.resolution * ss;
    let n = p.n_yaw.max(1);
    let basis = ViewBasis::at_pitch(pitch);
    let mut frame = Frame::new(res, p.window);
    let mut acc = vec![0u64; res * res];
    for yaw in yaw_angles(n) {
        frame.draw(&casters_at_yaw(a, yaw, &basis));
        for (sum, v) in acc.iter_mut().zip(&frame.value) {
            *sum += (v * FIXED_SCALE).round() as u64;
        }
    }
    let norm = 1.0 / (n as f64 * FIXED_SCALE);
    let img = Image {
        width: res,
        height: res,
        samples: acc.iter().map(|&s| (s as f64 * norm).min(1.0)).collect(),
    };
    img.downsample_box(ss)
}

/// Yaw-averaged view raised to 1/γ.
pub fn motion_blur(a: &Assembly, pitch: f64, p: &RenderParams) -> BlurredView {
    BlurredView {
        pitch,
        image: yaw_average(a, pitch, p).gamma_encode(p.gamma),
    }
}

/// Pixel-wise product of the transmission map and the background.
pub fn composite(view: &BlurredView, background: &Image) -> Result<Image> {
    view.image.same_size(background)?;
    Ok(Image {
        width: background.width,
        height: background.height,
        samples: view
            .image
            .samples
            .iter()
            .zip(&background.samples)
            .map(|(t, b)| t * b)
            .collect(),
    })
}
