//! Drag-torque coefficient, equilibrium spin rate, and the aerodynamic and
//! control constraints.
//!
//! Every solid is treated as an isolated body in a uniform stream whose
//! velocity is minus its centroid velocity about the spin axis (+Z). Each
//! contribution is then proportional to ω², and the sum of the factors is the
//! drag-torque coefficient `C_M` (g·mm²).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    assembly_mass_properties, signed_distance, Assembly, Component, ConvexShape, Mat3, Primitive,
    Role, Vec3,
};

/// Physical constants in the g / mm / s unit system.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PhysicsConstants {
    /// air density, g/mm³
    pub rho_air: f64,
    /// drag coefficient used for spheres and the motor cylinder
    pub c_d_sph: f64,
    /// face coefficient for cuboids
    pub c1_cuboid: f64,
    /// propeller drag torque, g·mm²/s²
    pub m_prop: f64,
}

impl Default for PhysicsConstants {
    fn default() -> Self {
        Self {
            rho_air: 1.225e-6,
            c_d_sph: 0.47,
            c1_cuboid: 1.3,
            // maps C_M = 20 to 25 rps and C_M = 60 to ~14.4 rps
            m_prop: 4.935e5,
        }
    }
}

pub const DEFAULT_C_M_RANGE: [f64; 2] = [20.0, 60.0];

/// Keep-out region downstream of the propeller.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WakeRegion {
    /// mm
    pub radius: f64,
    /// [start, end] offsets along +Z from the propeller plane, mm; the end
    /// is clipped to the top of the volume bound.
    pub axial_extent: [f64; 2],
    /// minimum gap to the wake cylinder and to the motor-propeller assembly, mm
    pub clearance_margin: f64,
}

impl WakeRegion {
    /// Wake of radius 1.2 × propeller radius reaching to the volume bound.
    pub fn for_propeller(diameter: f64) -> Self {
        Self {
            radius: 0.6 * diameter,
            axial_extent: [0.0, 1.0e3],
            clearance_margin: 5.0,
        }
    }
}

impl Default for WakeRegion {
    fn default() -> Self {
        Self::for_propeller(56.0)
    }
}

/// C_M contribution of one component about the Z axis through the origin.
pub fn component_drag_coefficient(c: &Component, k: &PhysicsConstants) -> f64 {
    let offset = Vec3::new(c.pose.position.x, c.pose.position.y, 0.0);
    let r = offset.norm();
    if r == 0.0 {
        return 0.0;
    }
    let r3 = r * r * r;
    match c.primitive {
        Primitive::Cylinder { diameter, height } => {
            0.5 * k.c_d_sph * k.rho_air * diameter * height * r3
        }
        Primitive::Sphere { diameter } => {
            let area = 0.25 * std::f64::consts::PI * diameter * diameter;
            0.5 * k.c_d_sph * k.rho_air * area * r3
        }
        Primitive::Cuboid {
            width,
            depth,
            height,
        } => {
            let rot = c.pose.rotation();
            let flow = Vec3::z().cross(&(offset / r));
            cuboid_face_sum(&rot, [depth * height, width * height, width * depth], &flow)
                * 0.5
                * k.rho_air
                * k.c1_cuboid
                * r3
        }
        Primitive::Disk { .. } => 0.0,
    }
}

/// Σ S_i (n̂_i · v̂)² over the three face pairs of a cuboid.
fn cuboid_face_sum(rotation: &Mat3, areas: [f64; 3], flow: &Vec3) -> f64 {
    (0..3)
        .map(|i| {
            let normal = rotation.column(i);
            let cos = normal.dot(flow);
            areas[i] * cos * cos
        })
        .sum()
}

/// C_M without checking that the frame is centred on the centre of mass.
pub fn drag_coefficient_unchecked(a: &Assembly, k: &PhysicsConstants) -> f64 {
    a.solids().map(|c| component_drag_coefficient(c, k)).sum()
}

/// C_M of an assembly whose centre of mass sits on the Z axis.
pub fn drag_coefficient(a: &Assembly, k: &PhysicsConstants) -> Result<f64> {
    let summary = assembly_mass_properties(a)?;
    let off = summary.com.norm();
    if off > 0.5 {
        return Err(Error::Precondition(format!(
            "centre of mass is {off:.3} mm from the origin (limit 0.5 mm)"
        )));
    }
    Ok(drag_coefficient_unchecked(a, k))
}

/// Equilibrium spin rate ω = √(M_prop / C_M), rad/s.
pub fn spin_rate(c_m: f64, k: &PhysicsConstants) -> Result<f64> {
    if c_m.is_nan() || c_m <= 0.0 {
        return Err(Error::Domain(format!(
            "drag coefficient must be positive, got {c_m}"
        )));
    }
    Ok((k.m_prop / c_m).sqrt())
}

pub fn rad_per_s_to_rps(omega: f64) -> f64 {
    omega / std::f64::consts::TAU
}

/// Signed margins (C_M − low, high − C_M); feasible iff both are ≥ 0.
pub fn check_spin_range(c_m: f64, range: [f64; 2]) -> (f64, f64) {
    (c_m - range[0], range[1] - c_m)
}

/// Thrust arm margin: motor distance from the Z axis minus `arm_min`.
pub fn check_control_arm(a: &Assembly, arm_min: f64) -> Result<f64> {
    let motor = a
        .motor()
        .ok_or_else(|| Error::InvalidAssembly("no motor".into()))?;
    Ok(motor.pose.position.xy().norm() - arm_min)
}

/// The wake cylinder for the assembly's motor, clipped at `z_top`.
pub fn wake_shape(a: &Assembly, w: &WakeRegion, z_top: f64) -> Option<ConvexShape> {
    let motor = a.motor()?;
    let plane = propeller_plane_z(a, motor);
    let z0 = plane + w.axial_extent[0];
    let z1 = (plane + w.axial_extent[1]).min(z_top);
    if z1 <= z0 {
        return None;
    }
    let p = motor.pose.position;
    Some(ConvexShape::new(
        Primitive::Cylinder {
            diameter: 2.0 * w.radius,
            height: z1 - z0,
        },
        Mat3::identity(),
        Vec3::new(p.x, p.y, 0.5 * (z0 + z1)),
    ))
}

fn propeller_plane_z(a: &Assembly, motor: &Component) -> f64 {
    if let Some(disk) = a.propeller() {
        return disk.pose.position.z;
    }
    let half = match motor.primitive {
        Primitive::Cylinder { height, .. } => 0.5 * height,
        _ => 0.0,
    };
    motor.pose.position.z - half
}

/// Smallest clearance of any non-motor solid to the wake cylinder, the motor
/// and the propeller disk, minus the required margin. `+inf` when there is
/// nothing to check.
pub fn wake_margin(a: &Assembly, w: &WakeRegion, z_top: f64) -> f64 {
    wake_margins(a, w, z_top)
        .into_iter()
        .fold(f64::INFINITY, f64::min)
}

/// The motor, propeller disk and wake cylinder: the solids other components
/// must keep clear of.
pub fn wake_keep_out(a: &Assembly, w: &WakeRegion, z_top: f64) -> Vec<ConvexShape> {
    let Some(motor) = a.motor() else {
        return Vec::new();
    };
    let mut keep_out: Vec<ConvexShape> = vec![motor.shape()];
    if let Some(disk) = a.propeller() {
        keep_out.push(disk.shape());
    }
    if let Some(wake) = wake_shape(a, w, z_top) {
        keep_out.push(wake);
    }
    keep_out
}

/// Clearance of one solid to the keep-out set, minus the required margin.
pub fn keep_out_clearance(shape: &ConvexShape, keep_out: &[ConvexShape], w: &WakeRegion) -> f64 {
    keep_out
        .iter()
        .map(|k| signed_distance(shape, k))
        .fold(f64::INFINITY, f64::min)
        - w.clearance_margin
}

/// Per-component wake clearances (same order as the non-motor solids).
pub fn wake_margins(a: &Assembly, w: &WakeRegion, z_top: f64) -> Vec<f64> {
    let keep_out = wake_keep_out(a, w, z_top);
    if keep_out.is_empty() {
        return Vec::new();
    }
    a.solids()
        .filter(|c| c.role != Role::Motor)
        .map(|c| keep_out_clearance(&c.shape(), &keep_out, w))
        .collect()
}

pub fn check_wake_clearance(a: &Assembly, w: &WakeRegion, z_top: f64) -> bool {
    wake_margin(a, w, z_top) >= 0.0
}
