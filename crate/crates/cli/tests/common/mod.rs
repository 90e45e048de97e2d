//! Independent reference implementations used as test oracles. Nothing here
//! calls into the library's geometry, inertia, drag or distance code.
#![allow(dead_code)]

use std::f64::consts::PI;

use lowvis_core::aero::PhysicsConstants;
use lowvis_core::feasibility::ConstraintLimits;
use lowvis_core::geometry::{Assembly, Component, Primitive, Role};

pub type V3 = [f64; 3];
pub type M3 = [[f64; 3]; 3];

pub fn add(a: V3, b: V3) -> V3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub fn sub(a: V3, b: V3) -> V3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn scale(a: V3, s: f64) -> V3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

pub fn dot(a: V3, b: V3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn cross(a: V3, b: V3) -> V3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub fn norm(a: V3) -> f64 {
    dot(a, a).sqrt()
}

/// Rodrigues rotation; a zero axis is the identity.
pub fn rotation(axis: V3, angle: f64) -> M3 {
    let n = norm(axis);
    if n < 1e-12 {
        return [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    }
    let [x, y, z] = scale(axis, 1.0 / n);
    let (s, c) = angle.sin_cos();
    let t = 1.0 - c;
    [
        [t * x * x + c, t * x * y - s * z, t * x * z + s * y],
        [t * x * y + s * z, t * y * y + c, t * y * z - s * x],
        [t * x * z - s * y, t * y * z + s * x, t * z * z + c],
    ]
}

pub fn mat_vec(m: &M3, v: V3) -> V3 {
    [dot(m[0], v), dot(m[1], v), dot(m[2], v)]
}

/// `mᵀ v`
pub fn mat_t_vec(m: &M3, v: V3) -> V3 {
    [
        m[0][0] * v[0] + m[1][0] * v[1] + m[2][0] * v[2],
        m[0][1] * v[0] + m[1][1] * v[1] + m[2][1] * v[2],
        m[0][2] * v[0] + m[1][2] * v[1] + m[2][2] * v[2],
    ]
}

pub fn column(m: &M3, j: usize) -> V3 {
    [m[0][j], m[1][j], m[2][j]]
}

pub struct Posed {
    pub role: Role,
    pub primitive: Primitive,
    pub rot: M3,
    pub pos: V3,
    pub mass: f64,
}

pub fn posed(c: &Component) -> Posed {
    let p = c.pose.position;
    let a = c.pose.axis;
    Posed {
        role: c.role,
        primitive: c.primitive,
        rot: rotation([a.x, a.y, a.z], c.pose.angle),
        pos: [p.x, p.y, p.z],
        mass: c.mass,
    }
}

impl Posed {
    pub fn to_local(&self, p: V3) -> V3 {
        mat_t_vec(&self.rot, sub(p, self.pos))
    }

    pub fn to_world(&self, q: V3) -> V3 {
        add(mat_vec(&self.rot, q), self.pos)
    }

    /// Euclidean distance from a world point to the solid (0 inside).
    pub fn distance(&self, p: V3) -> f64 {
        let q = self.to_local(p);
        match self.primitive {
            Primitive::Cuboid {
                width,
                depth,
                height,
            } => {
                let h = [0.5 * width, 0.5 * depth, 0.5 * height];
                let d: V3 = std::array::from_fn(|i| (q[i].abs() - h[i]).max(0.0));
                norm(d)
            }
            Primitive::Cylinder { diameter, height } => {
                let dr = ((q[0] * q[0] + q[1] * q[1]).sqrt() - 0.5 * diameter).max(0.0);
                let dz = (q[2].abs() - 0.5 * height).max(0.0);
                dr.hypot(dz)
            }
            Primitive::Disk { diameter, .. } => {
                let dr = ((q[0] * q[0] + q[1] * q[1]).sqrt() - 0.5 * diameter).max(0.0);
                dr.hypot(q[2])
            }
            Primitive::Sphere { diameter } => (norm(q) - 0.5 * diameter).max(0.0),
        }
    }

    /// Points on the surface, roughly `spacing` apart.
    pub fn surface_points(&self, spacing: f64) -> Vec<V3> {
        let mut local = Vec::new();
        let steps = |len: f64| ((len / spacing).ceil() as usize).max(1);
        let lin = |len: f64, n: usize, i: usize| -0.5 * len + len * i as f64 / n as f64;
        match self.primitive {
            Primitive::Cuboid {
                width,
                depth,
                height,
            } => {
                let dims = [width, depth, height];
                for axis in 0..3 {
                    let (u, v) = ((axis + 1) % 3, (axis + 2) % 3);
                    let (nu, nv) = (steps(dims[u]), steps(dims[v]));
                    for side in [-0.5, 0.5] {
                        for i in 0..=nu {
                            for j in 0..=nv {
                                let mut q = [0.0; 3];
                                q[axis] = side * dims[axis];
                                q[u] = lin(dims[u], nu, i);
                                q[v] = lin(dims[v], nv, j);
                                local.push(q);
                            }
                        }
                    }
                }
            }
            Primitive::Cylinder { diameter, height } => {
                let r = 0.5 * diameter;
                let na = steps(PI * diameter).max(8);
                let nz = steps(height);
                for k in 0..na {
                    let t = 2.0 * PI * k as f64 / na as f64;
                    for i in 0..=nz {
                        local.push([r * t.cos(), r * t.sin(), lin(height, nz, i)]);
                    }
                }
                let nr = steps(r);
                for side in [-0.5, 0.5] {
                    for i in 0..=nr {
                        let rr = r * i as f64 / nr as f64;
                        let na = steps(2.0 * PI * rr).max(1);
                        for k in 0..na {
                            let t = 2.0 * PI * k as f64 / na as f64;
                            local.push([rr * t.cos(), rr * t.sin(), side * height]);
                        }
                    }
                }
            }
            Primitive::Sphere { diameter } => {
                let r = 0.5 * diameter;
                let n = ((4.0 * PI * r * r / (spacing * spacing)).ceil() as usize).max(1);
                let golden = PI * (3.0 - 5f64.sqrt());
                for i in 0..n {
                    let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
                    let s = (1.0 - z * z).sqrt();
                    let t = golden * i as f64;
                    local.push([r * s * t.cos(), r * s * t.sin(), r * z]);
                }
            }
            Primitive::Disk { .. } => {}
        }
        local.into_iter().map(|q| self.to_world(q)).collect()
    }

    /// Closed-form centroidal inertia in the local frame (diagonal).
    pub fn local_moments(&self) -> V3 {
        let m = self.mass;
        match self.primitive {
            Primitive::Cuboid {
                width: w,
                depth: d,
                height: h,
            } => [
                m * (d * d + h * h) / 12.0,
                m * (w * w + h * h) / 12.0,
                m * (w * w + d * d) / 12.0,
            ],
            Primitive::Cylinder { diameter, height } => {
                let r = 0.5 * diameter;
                let t = m * (3.0 * r * r + height * height) / 12.0;
                [t, t, 0.5 * m * r * r]
            }
            Primitive::Sphere { diameter } => {
                let r = 0.5 * diameter;
                let t = 0.4 * m * r * r;
                [t, t, t]
            }
            Primitive::Disk { .. } => [0.0; 3],
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct MassProps {
    pub mass: f64,
    pub com: V3,
    /// about the centre of mass, off-diagonals as negated products
    pub tensor: M3,
}

pub fn point_mass_tensor(m: f64, p: V3) -> M3 {
    let r2 = dot(p, p);
    std::array::from_fn(|i| {
        std::array::from_fn(|j| m * (if i == j { r2 } else { 0.0 } - p[i] * p[j]))
    })
}

pub fn mat_add(a: &M3, b: &M3, s: f64) -> M3 {
    std::array::from_fn(|i| std::array::from_fn(|j| a[i][j] + s * b[i][j]))
}

pub fn frobenius(a: &M3) -> f64 {
    a.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn mass_properties(parts: &[Posed]) -> MassProps {
    let mut mass = 0.0;
    let mut first = [0.0; 3];
    let mut about_origin = [[0.0; 3]; 3];
    for p in parts.iter().filter(|p| !p.primitive.is_disk()) {
        mass += p.mass;
        first = add(first, scale(p.pos, p.mass));
        let d = p.local_moments();
        let local: M3 = std::array::from_fn(|i| {
            std::array::from_fn(|j| (0..3).map(|k| p.rot[i][k] * d[k] * p.rot[j][k]).sum())
        });
        about_origin = mat_add(&about_origin, &local, 1.0);
        about_origin = mat_add(&about_origin, &point_mass_tensor(p.mass, p.pos), 1.0);
    }
    let com = scale(first, 1.0 / mass);
    let tensor = mat_add(&about_origin, &point_mass_tensor(mass, com), -1.0);
    MassProps { mass, com, tensor }
}

/// Per-component drag-torque coefficient about the Z axis through the origin.
pub fn drag_contribution(p: &Posed, k: &PhysicsConstants) -> f64 {
    let r = p.pos[0].hypot(p.pos[1]);
    if r == 0.0 {
        return 0.0;
    }
    let r3 = r.powi(3);
    match p.primitive {
        Primitive::Sphere { diameter } => 0.5 * k.c_d_sph * k.rho_air * (PI * diameter * diameter / 4.0) * r3,
        Primitive::Cylinder { diameter, height } => 0.5 * k.c_d_sph * k.rho_air * diameter * height * r3,
        Primitive::Cuboid {
            width,
            depth,
            height,
        } => {
            let radial = [p.pos[0] / r, p.pos[1] / r, 0.0];
            let flow = cross([0.0, 0.0, 1.0], radial);
            let areas = [depth * height, width * height, width * depth];
            let sum: f64 = (0..3)
                .map(|i| areas[i] * dot(column(&p.rot, i), flow).powi(2))
                .sum();
            0.5 * k.rho_air * k.c1_cuboid * sum * r3
        }
        Primitive::Disk { .. } => 0.0,
    }
}

/// Wake keep-out of the validator: a cylinder of radius `0.6·D_prop` around
/// the motor axis from the propeller plane up to `z_top`.
pub struct Wake {
    pub centre_xy: [f64; 2],
    pub radius: f64,
    pub z0: f64,
    pub z1: f64,
}

impl Wake {
    pub fn distance(&self, p: V3) -> f64 {
        let dr = ((p[0] - self.centre_xy[0]).hypot(p[1] - self.centre_xy[1]) - self.radius).max(0.0);
        let dz = (self.z0 - p[2]).max(p[2] - self.z1).max(0.0);
        dr.hypot(dz)
    }
}

/// Verdicts of the ten constraints computed from first principles, with
/// surface sampling for the distance-based ones. Sampled points lie on the
/// true surfaces, so a design that truly satisfies a clearance constraint
/// never fails here.
pub fn validate(a: &Assembly, lim: &ConstraintLimits, k: &PhysicsConstants, clearance: f64) -> Vec<(u8, bool, String)> {
    let mut parts: Vec<Posed> = a.components.iter().map(posed).collect();
    let mut out = Vec::new();
    if parts.iter().filter(|p| !p.primitive.is_disk()).map(|p| p.mass).sum::<f64>() <= 0.0 {
        return (1..=10).map(|i| (i, false, "no mass".to_owned())).collect();
    }
    let mp0 = mass_properties(&parts);
    for p in &mut parts {
        p.pos[2] -= mp0.com[2];
    }
    let mp = mass_properties(&parts);
    let t = &mp.tensor;
    let (ixx, iyy, izz, ixy, ixz, iyz) = (t[0][0], t[1][1], t[2][2], t[0][1], t[0][2], t[1][2]);
    let tie = 1e-9;

    let off = mp.com[0].hypot(mp.com[1]);
    out.push((1, off <= lim.com_tol + tie, format!("com offset {off}")));
    let prod = ixz.hypot(iyz);
    out.push((2, prod <= lim.product_tol * izz * (1.0 + tie), format!("products {prod}")));
    // both eigenvalues of the in-plane block at most eta·I_zz
    let half_tr = 0.5 * (ixx + iyy);
    let rad = (0.25 * (ixx - iyy).powi(2) + ixy * ixy).sqrt();
    let lam = half_tr + rad;
    out.push((3, lam <= lim.eta * izz * (1.0 + tie), format!("in-plane max {lam} vs {}", lim.eta * izz)));
    out.push((4, mp.mass <= lim.m_max + tie, format!("mass {}", mp.mass)));
    let cw_ok = parts.iter().filter(|p| p.role == Role::Counterweight).all(|p| p.mass >= 0.0);
    out.push((5, cw_ok, String::new()));

    let motor = parts.iter().find(|p| p.role == Role::Motor).expect("motor");
    let arm = motor.pos[0].hypot(motor.pos[1]);
    out.push((6, arm >= lim.arm_min - tie, format!("arm {arm}")));
    let c_m: f64 = parts.iter().map(|p| drag_contribution(p, k)).sum();
    let in_window = c_m >= lim.c_m_range[0] * (1.0 - tie) && c_m <= lim.c_m_range[1] * (1.0 + tie);
    out.push((7, in_window, format!("C_M {c_m}")));

    let disk = parts.iter().find(|p| p.role == Role::PropellerDisk).expect("propeller");
    let prop_d = match disk.primitive {
        Primitive::Disk { diameter, .. } => diameter,
        _ => unreachable!(),
    };
    let wake = Wake {
        centre_xy: [motor.pos[0], motor.pos[1]],
        radius: 0.6 * prop_d,
        z0: disk.pos[2],
        z1: lim.z_range[1],
    };
    let spacing = 0.4;
    let surfaces: Vec<Vec<V3>> = parts.iter().map(|p| p.surface_points(spacing)).collect();
    let mut wake_min = f64::INFINITY;
    for (p, pts) in parts.iter().zip(&surfaces) {
        if p.primitive.is_disk() || p.role == Role::Motor {
            continue;
        }
        for &q in pts {
            let d = motor.distance(q).min(disk.distance(q));
            let d = if wake.z1 > wake.z0 { d.min(wake.distance(q)) } else { d };
            wake_min = wake_min.min(d);
        }
    }
    out.push((8, wake_min >= clearance - 1e-6, format!("wake clearance {wake_min}")));

    let mut vol_ok = true;
    for (p, pts) in parts.iter().zip(&surfaces) {
        if p.primitive.is_disk() {
            continue;
        }
        for q in pts {
            if q[0].hypot(q[1]) > lim.r_max + 1e-6 || q[2] < lim.z_range[0] - 1e-6 || q[2] > lim.z_range[1] + 1e-6 {
                vol_ok = false;
            }
        }
    }
    out.push((9, vol_ok, String::new()));

    let mut pair_min = f64::INFINITY;
    for i in 0..parts.len() {
        for j in 0..parts.len() {
            if i == j || parts[i].primitive.is_disk() || parts[j].primitive.is_disk() {
                continue;
            }
            for &q in &surfaces[i] {
                pair_min = pair_min.min(parts[j].distance(q));
            }
        }
    }
    out.push((10, pair_min > 0.0, format!("min pair distance {pair_min}")));
    out
}

/// Straight-line pyramid distance: binomial blur with replicated borders,
/// stride-2 decimation, MSE plus twice the forward-difference gradient MSEs
/// at each of four levels, averaged.
pub fn reference_pyramid(a: &[f64], b: &[f64], w: usize, h: usize) -> f64 {
    let k = [1.0, 4.0, 6.0, 4.0, 1.0];
    let blur_down = |img: &[f64], w: usize, h: usize| -> (Vec<f64>, usize, usize) {
        let at = |x: isize, y: isize| {
            let x = x.clamp(0, w as isize - 1) as usize;
            let y = y.clamp(0, h as isize - 1) as usize;
            img[y * w + x]
        };
        let mut tmp = vec![0.0; w * h];
        for y in 0..h {
            for x in 0..w {
                tmp[y * w + x] = (0..5).map(|i| k[i] * at(x as isize + i as isize - 2, y as isize)).sum::<f64>() / 16.0;
            }
        }
        let at2 = |x: usize, y: isize| tmp[y.clamp(0, h as isize - 1) as usize * w + x];
        let (nw, nh) = (w.div_ceil(2), h.div_ceil(2));
        let mut out = vec![0.0; nw * nh];
        for y in 0..nh {
            for x in 0..nw {
                out[y * nw + x] = (0..5)
                    .map(|i| k[i] * at2(2 * x, (2 * y) as isize + i as isize - 2))
                    .sum::<f64>()
                    / 16.0;
            }
        }
        (out, nw, nh)
    };
    let level = |a: &[f64], b: &[f64], w: usize, h: usize| {
        let n = (w * h) as f64;
        let mse: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / n;
        let mut gx = 0.0;
        let mut gy = 0.0;
        let (mut nx, mut ny) = (0usize, 0usize);
        for y in 0..h {
            for x in 0..w {
                if x + 1 < w {
                    let da = a[y * w + x + 1] - a[y * w + x];
                    let db = b[y * w + x + 1] - b[y * w + x];
                    gx += (da - db).powi(2);
                    nx += 1;
                }
                if y + 1 < h {
                    let da = a[(y + 1) * w + x] - a[y * w + x];
                    let db = b[(y + 1) * w + x] - b[y * w + x];
                    gy += (da - db).powi(2);
                    ny += 1;
                }
            }
        }
        let gx = if nx > 0 { gx / nx as f64 } else { 0.0 };
        let gy = if ny > 0 { gy / ny as f64 } else { 0.0 };
        mse + 2.0 * (gx + gy)
    };
    let (mut a, mut b) = (a.to_vec(), b.to_vec());
    let (mut w, mut h) = (w, h);
    let mut total = 0.0;
    for l in 0..4 {
        total += level(&a, &b, w, h);
        if l < 3 {
            let (na, nw, nh) = blur_down(&a, w, h);
            let (nb, _, _) = blur_down(&b, w, h);
            a = na;
            b = nb;
            w = nw;
            h = nh;
        }
    }
    total / 4.0
}
