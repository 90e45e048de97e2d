use lowvis_core::geometry::{
    assembly_mass_properties, primitive_inertia, primitives_intersect, signed_distance,
    within_volume, Assembly, Component, Mat3, Pose, Primitive, Role, Vec3,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_axis(r: &mut impl Rng) -> Vec3 {
    loop {
        let v = Vec3::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0), r.random_range(-1.0..1.0));
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            return v / n;
        }
    }
}

fn random_pose(r: &mut impl Rng, centre: Vec3) -> Pose {
    Pose::new(centre, random_axis(r), r.random_range(0.0..std::f64::consts::PI))
}

fn cuboid(w: f64, d: f64, h: f64, pose: Pose) -> Component {
    Component::new(
        Role::Battery,
        Primitive::Cuboid { width: w, depth: d, height: h },
        pose,
        5.0,
        0.2,
    )
}

/// Uniform point in a cylinder of the given size centred on the origin,
/// axis along z.
fn point_in_cylinder(r: &mut impl Rng, radius: f64, height: f64) -> Vec3 {
    loop {
        let x = r.random_range(-radius..radius);
        let y = r.random_range(-radius..radius);
        if x * x + y * y <= radius * radius {
            return Vec3::new(x, y, r.random_range(-0.5 * height..0.5 * height));
        }
    }
}

/// Second moment tensor with negated products from equal-mass samples.
fn sampled_tensor(points: &[Vec3], mass: f64) -> Mat3 {
    let m = mass / points.len() as f64;
    let mut t = Mat3::zeros();
    for p in points {
        let r2 = p.norm_squared();
        t += m * (Mat3::identity() * r2 - p * p.transpose());
    }
    t
}

#[test]
fn cylinder_inertia_matches_monte_carlo() {
    let mut r = rng(11);
    let points: Vec<Vec3> = (0..1_000_000).map(|_| point_in_cylinder(&mut r, 7.0, 15.0)).collect();
    let mc = sampled_tensor(&points, 5.0);
    let closed = primitive_inertia(&Primitive::Cylinder { diameter: 14.0, height: 15.0 }, 5.0).unwrap();
    let scale = closed.diagonal().max();
    for i in 0..3 {
        for j in 0..3 {
            let (a, b) = (closed[(i, j)], mc[(i, j)]);
            if i == j {
                assert!((a - b).abs() / b < 0.01, "({i},{j}) {a} vs {b}");
            } else {
                assert!((a - b).abs() < 0.01 * scale, "({i},{j}) {a} vs {b}");
            }
        }
    }
}

fn random_assembly(r: &mut impl Rng) -> Assembly {
    let mut parts = Vec::new();
    for i in 0..5 {
        let centre = Vec3::new(r.random_range(-40.0..40.0), r.random_range(-40.0..40.0), r.random_range(-20.0..20.0));
        let pose = random_pose(r, centre);
        let primitive = match i % 3 {
            0 => Primitive::Cuboid { width: r.random_range(5.0..40.0), depth: r.random_range(5.0..30.0), height: r.random_range(2.0..10.0) },
            1 => Primitive::Cylinder { diameter: r.random_range(5.0..20.0), height: r.random_range(5.0..20.0) },
            _ => Primitive::Sphere { diameter: r.random_range(4.0..15.0) },
        };
        parts.push(Component::new(Role::Battery, primitive, pose, r.random_range(1.0..10.0), 0.2));
    }
    parts.push(Component::new(
        Role::Counterweight,
        Primitive::Sphere { diameter: 8.0 },
        Pose::from_position(Vec3::new(10.0, -20.0, 5.0)),
        3.0,
        0.3,
    ));
    Assembly::new(parts)
}

#[test]
fn rotating_the_assembly_preserves_principal_moments() {
    let mut r = rng(5);
    for _ in 0..50 {
        let a = random_assembly(&mut r);
        let g = random_pose(&mut r, Vec3::new(3.0, -7.0, 11.0));
        let s0 = assembly_mass_properties(&a).unwrap();
        let s1 = assembly_mass_properties(&a.transformed(&g)).unwrap();
        let rot = g.rotation();
        assert!((rot * s0.com + g.position - s1.com).norm() < 1e-9 * (1.0 + s0.com.norm()));
        let mut e0: Vec<f64> = s0.tensor.symmetric_eigenvalues().iter().copied().collect();
        let mut e1: Vec<f64> = s1.tensor.symmetric_eigenvalues().iter().copied().collect();
        e0.sort_by(f64::total_cmp);
        e1.sort_by(f64::total_cmp);
        for (x, y) in e0.iter().zip(&e1) {
            assert!((x - y).abs() <= 1e-9 * x.abs().max(1.0), "{x} vs {y}");
        }
        let conj = rot * s0.tensor * rot.transpose();
        assert!((conj - s1.tensor).norm() <= 1e-9 * s0.tensor.norm());
    }
}

#[test]
fn translating_the_assembly_moves_only_the_centre() {
    let mut r = rng(6);
    for _ in 0..50 {
        let a = random_assembly(&mut r);
        let t = Vec3::new(r.random_range(-50.0..50.0), r.random_range(-50.0..50.0), r.random_range(-50.0..50.0));
        let s0 = assembly_mass_properties(&a).unwrap();
        let s1 = assembly_mass_properties(&a.translated(&t)).unwrap();
        assert!((s1.com - s0.com - t).norm() < 1e-9 * (1.0 + t.norm()));
        assert!((s1.tensor - s0.tensor).norm() <= 1e-9 * s0.tensor.norm());
    }
}

fn local(c: &Component, p: &Vec3) -> Vec3 {
    c.pose.rotation().transpose() * (p - c.pose.position)
}

fn inside_cuboid(c: &Component, p: &Vec3) -> bool {
    let Primitive::Cuboid { width, depth, height } = c.primitive else { unreachable!() };
    let q = local(c, p);
    q.x.abs() <= 0.5 * width && q.y.abs() <= 0.5 * depth && q.z.abs() <= 0.5 * height
}

fn corners(c: &Component) -> Vec<Vec3> {
    let Primitive::Cuboid { width, depth, height } = c.primitive else { unreachable!() };
    let mut out = Vec::with_capacity(8);
    for sx in [-0.5, 0.5] {
        for sy in [-0.5, 0.5] {
            for sz in [-0.5, 0.5] {
                out.push(c.pose.transform_point(&Vec3::new(sx * width, sy * depth, sz * height)));
            }
        }
    }
    out
}

/// Points on the twelve edges of a cuboid plus uniform interior points.
/// Any vertex of the intersection of two boxes lies on an edge of one of
/// them, so edge samples catch shallow overlaps that volume samples miss.
fn cuboid_samples(c: &Component, r: &mut impl Rng, n: usize) -> Vec<Vec3> {
    let Primitive::Cuboid { width, depth, height } = c.primitive else { unreachable!() };
    let k = corners(c);
    let mut pts = Vec::with_capacity(n);
    let per_edge = n / 24;
    for i in 0..8 {
        for bit in [1, 2, 4] {
            let j = i ^ bit;
            if j < i {
                continue;
            }
            for s in 0..=per_edge {
                let t = s as f64 / per_edge as f64;
                pts.push(k[i] + (k[j] - k[i]) * t);
            }
        }
    }
    while pts.len() < n {
        let q = Vec3::new(
            r.random_range(-0.5..0.5) * width,
            r.random_range(-0.5..0.5) * depth,
            r.random_range(-0.5..0.5) * height,
        );
        pts.push(c.pose.transform_point(&q));
    }
    pts
}

/// Slides `b` along `dir` until its signed distance to `a` is `gap`.
fn place_at_gap(a: &Component, b: &Component, dir: &Vec3, gap: f64) -> Component {
    let at = |t: f64| {
        let mut c = b.clone();
        c.pose.position = a.pose.position + dir * t;
        c
    };
    let d = |t: f64| signed_distance(&a.shape(), &at(t).shape()) - gap;
    let (mut lo, mut hi) = (0.0, 200.0);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if d(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    at(0.5 * (lo + hi))
}

#[test]
fn cuboid_intersection_matches_point_sampling() {
    let mut r = rng(21);
    let mut overlapping = 0;
    for case in 0..1000 {
        let a = cuboid(
            r.random_range(5.0..40.0),
            r.random_range(5.0..30.0),
            r.random_range(1.5..10.0),
            random_pose(&mut r, Vec3::zeros()),
        );
        let b0 = cuboid(
            r.random_range(5.0..40.0),
            r.random_range(5.0..30.0),
            r.random_range(1.5..10.0),
            random_pose(&mut r, Vec3::zeros()),
        );
        let gap = r.random_range(0.2..2.0) * if r.random_bool(0.5) { 1.0 } else { -1.0 };
        let b = place_at_gap(&a, &b0, &random_axis(&mut r), gap);
        let hit = cuboid_samples(&a, &mut r, 50_000).iter().any(|p| inside_cuboid(&b, p))
            || cuboid_samples(&b, &mut r, 50_000).iter().any(|p| inside_cuboid(&a, p));
        overlapping += hit as usize;
        assert_eq!(primitives_intersect(&a, &b), hit, "case {case}: gap {gap}");
        assert_eq!(primitives_intersect(&b, &a), hit, "case {case}: reversed");
    }
    assert!(overlapping > 300 && overlapping < 700, "{overlapping}");
}

/// Dense grid over each face, corners included.
fn surface_grid(c: &Component, n: usize) -> Vec<Vec3> {
    let Primitive::Cuboid { width, depth, height } = c.primitive else { unreachable!() };
    let half = [0.5 * width, 0.5 * depth, 0.5 * height];
    let mut pts = Vec::new();
    for axis in 0..3 {
        let (u, v) = ((axis + 1) % 3, (axis + 2) % 3);
        for side in [-1.0, 1.0] {
            for i in 0..=n {
                for j in 0..=n {
                    let mut q = [0.0; 3];
                    q[axis] = side * half[axis];
                    q[u] = (2.0 * i as f64 / n as f64 - 1.0) * half[u];
                    q[v] = (2.0 * j as f64 / n as f64 - 1.0) * half[v];
                    pts.push(c.pose.transform_point(&Vec3::new(q[0], q[1], q[2])));
                }
            }
        }
    }
    pts
}

#[test]
fn volume_check_matches_surface_sampling() {
    let mut r = rng(31);
    let (r_max, z_range) = (70.0, [-55.0, 55.0]);
    let mut inside = 0;
    let mut checked = 0;
    while checked < 1000 {
        let centre = Vec3::new(r.random_range(-60.0..60.0), r.random_range(-60.0..60.0), r.random_range(-50.0..50.0));
        let c = cuboid(
            r.random_range(2.0..40.0),
            r.random_range(2.0..30.0),
            r.random_range(1.0..10.0),
            random_pose(&mut r, centre),
        );
        let pts = surface_grid(&c, 20);
        let radial = pts.iter().map(|p| p.x.hypot(p.y)).fold(0.0, f64::max);
        let zmin = pts.iter().map(|p| p.z).fold(f64::INFINITY, f64::min);
        let zmax = pts.iter().map(|p| p.z).fold(f64::NEG_INFINITY, f64::max);
        let margin = (r_max - radial).min(z_range[1] - zmax).min(zmin - z_range[0]);
        if margin.abs() < 1e-6 {
            continue;
        }
        checked += 1;
        inside += (margin > 0.0) as usize;
        assert_eq!(within_volume(&c, r_max, z_range), margin > 0.0, "margin {margin}");
    }
    assert!(inside > 100 && inside < 900, "{inside}");
}
