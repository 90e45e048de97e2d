//! Support-mapped convex shapes, GJK distance, and volume containment.

use super::{Component, Mat3, Primitive, Vec3};

/// Surfaces closer than this (mm) count as touching, i.e. intersecting.
pub const TOUCH_TOLERANCE: f64 = 1e-6;

const GJK_MAX_ITERATIONS: usize = 128;

/// A primitive placed in the world frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConvexShape {
    pub primitive: Primitive,
    pub rotation: Mat3,
    pub center: Vec3,
}

fn sign(v: f64) -> f64 {
    if v < 0.0 {
        -1.0
    } else {
        1.0
    }
}

fn local_support(primitive: &Primitive, d: &Vec3) -> Vec3 {
    match *primitive {
        Primitive::Cuboid {
            width,
            depth,
            height,
        } => Vec3::new(
            sign(d.x) * 0.5 * width,
            sign(d.y) * 0.5 * depth,
            sign(d.z) * 0.5 * height,
        ),
        Primitive::Sphere { diameter } => {
            let n = d.norm();
            if n > 0.0 {
                d * (0.5 * diameter / n)
            } else {
                Vec3::zeros()
            }
        }
        Primitive::Cylinder { diameter, height } => disc_support(0.5 * diameter, 0.5 * height, d),
        Primitive::Disk { diameter, .. } => disc_support(0.5 * diameter, 0.0, d),
    }
}

fn disc_support(radius: f64, half_height: f64, d: &Vec3) -> Vec3 {
    let planar = d.x.hypot(d.y);
    let (x, y) = if planar > 0.0 {
        (radius * d.x / planar, radius * d.y / planar)
    } else {
        (0.0, 0.0)
    };
    Vec3::new(x, y, sign(d.z) * half_height)
}

impl ConvexShape {
    pub fn new(primitive: Primitive, rotation: Mat3, center: Vec3) -> Self {
        Self {
            primitive,
            rotation,
            center,
        }
    }

    /// Farthest point of the solid along `dir`.
    pub fn support(&self, dir: &Vec3) -> Vec3 {
        let local = self.rotation.transpose() * dir;
        self.rotation * local_support(&self.primitive, &local) + self.center
    }

    /// Support function h(d) = max over the solid of d·x.
    pub fn support_value(&self, dir: &Vec3) -> f64 {
        dir.dot(&self.support(dir))
    }

    /// Largest distance from the Z axis reached by any point of the solid.
    pub fn radial_extent(&self) -> f64 {
        match self.primitive {
            Primitive::Sphere { diameter } => self.center.xy().norm() + 0.5 * diameter,
            Primitive::Cuboid {
                width,
                depth,
                height,
            } => {
                let mut best: f64 = 0.0;
                for sx in [-0.5, 0.5] {
                    for sy in [-0.5, 0.5] {
                        for sz in [-0.5, 0.5] {
                            let local = Vec3::new(sx * width, sy * depth, sz * height);
                            let p = self.rotation * local + self.center;
                            best = best.max(p.xy().norm());
                        }
                    }
                }
                best
            }
            Primitive::Cylinder { diameter, height } => {
                let axis = self.rotation * Vec3::z();
                let top = self.center + 0.5 * height * axis;
                let bottom = self.center - 0.5 * height * axis;
                self.circle_radial_max(&top, 0.5 * diameter)
                    .max(self.circle_radial_max(&bottom, 0.5 * diameter))
            }
            Primitive::Disk { diameter, .. } => {
                self.circle_radial_max(&self.center, 0.5 * diameter)
            }
        }
    }

    /// Max of |p_xy| over the circle of given centre and radius lying in the
    /// shape's local XY plane.
    fn circle_radial_max(&self, center: &Vec3, radius: f64) -> f64 {
        let u = self.rotation * Vec3::x();
        let v = self.rotation * Vec3::y();
        let f = |t: f64| {
            let p = center + radius * (t.cos() * u + t.sin() * v);
            p.x * p.x + p.y * p.y
        };
        const SAMPLES: usize = 48;
        let step = std::f64::consts::TAU / SAMPLES as f64;
        let (mut t_best, mut f_best) = (0.0, f(0.0));
        for i in 1..SAMPLES {
            let t = i as f64 * step;
            let ft = f(t);
            if ft > f_best {
                t_best = t;
                f_best = ft;
            }
        }
        // golden-section refinement inside the bracketing cell
        let (mut lo, mut hi) = (t_best - step, t_best + step);
        let g = 0.5 * (5f64.sqrt() - 1.0);
        let mut x1 = hi - g * (hi - lo);
        let mut x2 = lo + g * (hi - lo);
        let (mut f1, mut f2) = (f(x1), f(x2));
        for _ in 0..80 {
            if f1 < f2 {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + g * (hi - lo);
                f2 = f(x2);
            } else {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - g * (hi - lo);
                f1 = f(x1);
            }
        }
        f_best.max(f1).max(f2).sqrt()
    }

    /// (min z, max z) over the solid.
    pub fn z_extent(&self) -> (f64, f64) {
        let zmax = self.support(&Vec3::z()).z;
        let zmin = self.support(&-Vec3::z()).z;
        (zmin, zmax)
    }
}

pub fn radial_extent(shape: &ConvexShape) -> f64 {
    shape.radial_extent()
}

pub fn extent_along_z(shape: &ConvexShape) -> (f64, f64) {
    shape.z_extent()
}

/// Smallest of the radial and axial clearances to the cylindrical bound;
/// negative when the solid pokes out.
pub fn volume_margin(shape: &ConvexShape, r_max: f64, z_range: [f64; 2]) -> f64 {
    let (zmin, zmax) = shape.z_extent();
    (r_max - shape.radial_extent())
        .min(z_range[1] - zmax)
        .min(zmin - z_range[0])
}

/// Whether every point of the component lies inside the cylinder
/// `√(x²+y²) ≤ r_max`, `z ∈ z_range`.
pub fn within_volume(component: &Component, r_max: f64, z_range: [f64; 2]) -> bool {
    volume_margin(&component.shape(), r_max, z_range) >= -1e-9
}

/// True iff two solid components overlap or touch. Disks never collide.
pub fn primitives_intersect(a: &Component, b: &Component) -> bool {
    if !a.is_solid() || !b.is_solid() {
        return false;
    }
    gjk_distance(&a.shape(), &b.shape()) <= TOUCH_TOLERANCE
}

/// Signed separation between two convex solids: the Euclidean gap when
/// disjoint, minus the penetration depth when overlapping.
pub fn signed_distance(a: &ConvexShape, b: &ConvexShape) -> f64 {
    let d = gjk_distance(a, b);
    if d > 0.0 {
        d
    } else {
        -penetration_depth(a, b)
    }
}

/// Support point of the Minkowski difference A − B.
fn minkowski_support(a: &ConvexShape, b: &ConvexShape, dir: &Vec3) -> Vec3 {
    a.support(dir) - b.support(&-dir)
}

/// Euclidean distance between two convex solids; zero when they overlap.
pub(crate) fn gjk_distance(a: &ConvexShape, b: &ConvexShape) -> f64 {
    let mut v = a.center - b.center;
    if v.norm_squared() < 1e-24 {
        v = Vec3::x();
    }
    // start from an actual point of A − B
    v = minkowski_support(a, b, &-v);
    let mut simplex: Vec<Vec3> = Vec::with_capacity(4);
    let mut best = f64::INFINITY;

    for _ in 0..GJK_MAX_ITERATIONS {
        let vv = v.norm_squared();
        if vv <= 1e-18 {
            return 0.0;
        }
        let w = minkowski_support(a, b, &-v);
        let gap = vv - v.dot(&w);
        if gap <= 1e-11 * vv || gap <= 1e-18 {
            return vv.sqrt();
        }
        if simplex.iter().any(|p| (p - w).norm_squared() <= 1e-24 * vv.max(1.0)) {
            return vv.sqrt();
        }
        simplex.push(w);
        let (closest, inside) = reduce_simplex(&mut simplex);
        if inside {
            return 0.0;
        }
        let cc = closest.norm_squared();
        if cc >= best {
            // no progress; numerical floor reached
            return best.min(vv).sqrt();
        }
        best = cc;
        v = closest;
    }
    v.norm()
}

/// Projects the origin onto the simplex, dropping vertices that do not
/// support the closest point. Returns the closest point and whether the
/// origin lies inside a full tetrahedron.
fn reduce_simplex(simplex: &mut Vec<Vec3>) -> (Vec3, bool) {
    match simplex.len() {
        1 => (simplex[0], false),
        2 => {
            let (p, keep) = closest_on_segment(simplex[0], simplex[1]);
            *simplex = keep;
            (p, false)
        }
        3 => {
            let (p, keep) = closest_on_triangle(simplex[0], simplex[1], simplex[2]);
            *simplex = keep;
            (p, false)
        }
        4 => closest_on_tetrahedron(simplex),
        _ => unreachable!("simplex never exceeds four vertices"),
    }
}

fn closest_on_segment(a: Vec3, b: Vec3) -> (Vec3, Vec<Vec3>) {
    let ab = b - a;
    let denom = ab.norm_squared();
    if denom <= 0.0 {
        return (a, vec![a]);
    }
    let t = -a.dot(&ab) / denom;
    if t <= 0.0 {
        (a, vec![a])
    } else if t >= 1.0 {
        (b, vec![b])
    } else {
        (a + t * ab, vec![a, b])
    }
}

fn closest_on_triangle(a: Vec3, b: Vec3, c: Vec3) -> (Vec3, Vec<Vec3>) {
    let ab = b - a;
    let ac = c - a;
    let ap = -a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return (a, vec![a]);
    }
    let bp = -b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return (b, vec![b]);
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return (a + v * ab, vec![a, b]);
    }
    let cp = -c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return (c, vec![c]);
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return (a + w * ac, vec![a, c]);
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return (b + w * (c - b), vec![b, c]);
    }
    let sum = va + vb + vc;
    if sum.abs() <= f64::MIN_POSITIVE {
        // degenerate (collinear) triangle: fall back to its edges
        let candidates = [
            closest_on_segment(a, b),
            closest_on_segment(a, c),
            closest_on_segment(b, c),
        ];
        return candidates
            .into_iter()
            .min_by(|x, y| x.0.norm_squared().total_cmp(&y.0.norm_squared()))
            .unwrap();
    }
    let denom = 1.0 / sum;
    let v = vb * denom;
    let w = vc * denom;
    (a + v * ab + w * ac, vec![a, b, c])
}

fn closest_on_tetrahedron(simplex: &mut Vec<Vec3>) -> (Vec3, bool) {
    let [a, b, c, d] = [simplex[0], simplex[1], simplex[2], simplex[3]];
    let faces = [(a, b, c, d), (a, c, d, b), (a, d, b, c), (b, d, c, a)];
    let edge = [b - a, c - a, d - a, c - b, d - b, d - c]
        .iter()
        .map(|e| e.norm())
        .fold(0.0, f64::max);
    // a flat tetrahedron has no interior; face orientation signs are noise
    let flat = (b - a).dot(&(c - a).cross(&(d - a))).abs() <= 1e-9 * edge.powi(3);
    let mut best: Option<(Vec3, Vec<Vec3>)> = None;
    let mut outside_any = false;
    for (p, q, r, opposite) in faces {
        let n = (q - p).cross(&(r - p));
        let sign_origin = (-p).dot(&n);
        let sign_opposite = (opposite - p).dot(&n);
        let outside = flat || sign_opposite == 0.0 || sign_origin * sign_opposite < 0.0;
        if outside {
            outside_any = true;
            let candidate = closest_on_triangle(p, q, r);
            let better = match &best {
                Some((bp, _)) => candidate.0.norm_squared() < bp.norm_squared(),
                None => true,
            };
            if better {
                best = Some(candidate);
            }
        }
    }
    if !outside_any {
        return (Vec3::zeros(), true);
    }
    let (p, keep) = best.expect("at least one face is outside");
    *simplex = keep;
    (p, false)
}

/// Depth of overlap, min over unit u of h_A(u) + h_B(−u), searched over a
/// fixed direction set then refined locally on the sphere.
fn penetration_depth(a: &ConvexShape, b: &ConvexShape) -> f64 {
    let h = |u: &Vec3| a.support_value(u) + b.support_value(&-u);

    let mut candidates: Vec<Vec3> = Vec::with_capacity(96);
    let diff = a.center - b.center;
    if diff.norm() > 1e-12 {
        candidates.push(-diff.normalize());
    }
    for shape in [a, b] {
        if matches!(
            shape.primitive,
            Primitive::Cuboid { .. } | Primitive::Cylinder { .. } | Primitive::Disk { .. }
        ) {
            for k in 0..3 {
                let axis = shape.rotation.column(k).into_owned();
                candidates.push(axis);
                candidates.push(-axis);
            }
        }
    }
    // edge-edge separating directions, exact for polytope pairs
    let axes = |s: &ConvexShape| -> Vec<Vec3> {
        match s.primitive {
            Primitive::Cuboid { .. } => (0..3).map(|k| s.rotation.column(k).into_owned()).collect(),
            Primitive::Cylinder { .. } | Primitive::Disk { .. } => {
                vec![s.rotation.column(2).into_owned()]
            }
            Primitive::Sphere { .. } => Vec::new(),
        }
    };
    for ea in axes(a) {
        for eb in axes(b) {
            let c = ea.cross(&eb);
            if c.norm() > 1e-9 {
                let c = c.normalize();
                candidates.push(c);
                candidates.push(-c);
            }
        }
    }
    for u in fibonacci_sphere(64) {
        candidates.push(u);
        candidates.push(-u);
    }

    let (mut u, mut best) = candidates
        .iter()
        .map(|u| (*u, h(u)))
        .min_by(|x, y| x.1.total_cmp(&y.1))
        .expect("non-empty direction set");

    let mut step = 0.25;
    while step > 1e-7 {
        let (t1, t2) = tangent_basis(&u);
        let mut improved = false;
        for (s1, s2) in [(1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0)] {
            let trial = (u + step * (s1 * t1 + s2 * t2)).normalize();
            let ht = h(&trial);
            if ht < best {
                best = ht;
                u = trial;
                improved = true;
                break;
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    best.max(0.0)
}

fn tangent_basis(u: &Vec3) -> (Vec3, Vec3) {
    let helper = if u.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    let t1 = u.cross(&helper).normalize();
    let t2 = u.cross(&t1);
    (t1, t2)
}

pub(crate) fn fibonacci_sphere(n: usize) -> Vec<Vec3> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
            let r = (1.0 - z * z).sqrt();
            let theta = golden * i as f64;
            Vec3::new(r * theta.cos(), r * theta.sin(), z)
        })
        .collect()
}
