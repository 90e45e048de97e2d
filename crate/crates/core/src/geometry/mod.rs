//! Convex primitives, rigid poses, and the components that make up a vehicle.
//!
//! Lengths are millimetres, masses grams, angles radians. Inertia tensors use
//! the standard convention where off-diagonal entries are the negated product
//! integrals (`I_xy = -Σ m·x·y`).

mod convex;
mod inertia;

use nalgebra::{Matrix3, Rotation3, Unit, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use convex::{
    extent_along_z, primitives_intersect, radial_extent, signed_distance, volume_margin,
    within_volume, ConvexShape, TOUCH_TOLERANCE,
};
pub use inertia::{assembly_mass_properties, primitive_inertia, InertiaSummary};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Convex solid in its local frame, centred on the local origin.
///
/// Cylinders and disks have their axis along local +Z; cuboid width, depth
/// and height run along local X, Y and Z.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Primitive {
    Cuboid { width: f64, depth: f64, height: f64 },
    Cylinder { diameter: f64, height: f64 },
    Sphere { diameter: f64 },
    /// Zero-thickness, massless disk used as a spinning propeller proxy.
    Disk { diameter: f64, solidity: f64 },
}

impl Primitive {
    /// Checks dimensions. Spheres may have zero diameter: a zero-mass
    /// counterweight degenerates to a point.
    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        let valid = match *self {
            Primitive::Cuboid {
                width,
                depth,
                height,
            } => ok(width) && ok(depth) && ok(height),
            Primitive::Cylinder { diameter, height } => ok(diameter) && ok(height),
            Primitive::Sphere { diameter } => diameter.is_finite() && diameter >= 0.0,
            Primitive::Disk { diameter, solidity } => {
                ok(diameter) && (0.0..=1.0).contains(&solidity)
            }
        };
        if valid {
            Ok(())
        } else {
            Err(Error::InvalidPrimitive(format!("{self:?}")))
        }
    }

    pub fn is_disk(&self) -> bool {
        matches!(self, Primitive::Disk { .. })
    }

    /// Radius of the smallest centred sphere enclosing the solid.
    pub fn bounding_radius(&self) -> f64 {
        match *self {
            Primitive::Cuboid {
                width,
                depth,
                height,
            } => 0.5 * (width * width + depth * depth + height * height).sqrt(),
            Primitive::Cylinder { diameter, height } => {
                0.5 * (diameter * diameter + height * height).sqrt()
            }
            Primitive::Sphere { diameter } | Primitive::Disk { diameter, .. } => 0.5 * diameter,
        }
    }
}

/// Rigid placement: a translation and an angle-axis rotation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub position: Vec3,
    pub axis: Vec3,
    pub angle: f64,
}

const AXIS_EPS: f64 = 1e-12;

impl Pose {
    pub fn identity() -> Self {
        Self::from_position(Vec3::zeros())
    }

    pub fn from_position(position: Vec3) -> Self {
        Self {
            position,
            axis: Vec3::z(),
            angle: 0.0,
        }
    }

    pub fn new(position: Vec3, axis: Vec3, angle: f64) -> Self {
        Self {
            position,
            axis,
            angle,
        }
    }

    /// Rotation matrix; a (near) zero axis means identity.
    pub fn rotation(&self) -> Mat3 {
        let norm = self.axis.norm();
        if norm < AXIS_EPS || !norm.is_finite() {
            return Mat3::identity();
        }
        Rotation3::from_axis_angle(&Unit::new_unchecked(self.axis / norm), self.angle).into_inner()
    }

    pub fn transform_point(&self, p: &Vec3) -> Vec3 {
        self.rotation() * p + self.position
    }

    /// `self ∘ other`: apply `other` first, then `self`.
    pub fn compose(&self, other: &Pose) -> Pose {
        let r1 = self.rotation();
        let position = r1 * other.position + self.position;
        pose_from_rotation(position, &(r1 * other.rotation()))
    }

    pub fn inverse(&self) -> Pose {
        let r = self.rotation();
        Pose {
            position: -(r.transpose() * self.position),
            axis: self.axis,
            angle: -self.angle,
        }
    }
}

/// Builds a pose whose orientation is the given rotation matrix.
pub fn pose_from_rotation(position: Vec3, rotation: &Mat3) -> Pose {
    let q = UnitQuaternion::from_matrix(rotation);
    match q.axis_angle() {
        Some((axis, angle)) => Pose::new(position, axis.into_inner(), angle),
        None => Pose::from_position(position),
    }
}

/// Rotation about +Z by `angle`.
pub fn yaw_rotation(angle: f64) -> Mat3 {
    Rotation3::from_axis_angle(&Vec3::z_axis(), angle).into_inner()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Battery,
    Pcb,
    Motor,
    Counterweight,
    PropellerDisk,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub role: Role,
    pub primitive: Primitive,
    pub pose: Pose,
    /// grams
    pub mass: f64,
    /// linear luminance in [0, 1]
    pub albedo: f64,
}

impl Component {
    pub fn new(role: Role, primitive: Primitive, pose: Pose, mass: f64, albedo: f64) -> Self {
        Self {
            role,
            primitive,
            pose,
            mass,
            albedo,
        }
    }

    /// Participates in mass, drag and collision (everything except the disk).
    pub fn is_solid(&self) -> bool {
        !self.primitive.is_disk()
    }

    pub fn shape(&self) -> ConvexShape {
        ConvexShape::new(self.primitive, self.pose.rotation(), self.pose.position)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Assembly {
    pub components: Vec<Component>,
}

impl Assembly {
    pub fn new(components: Vec<Component>) -> Self {
        Self { components }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn solids(&self) -> impl Iterator<Item = &Component> {
        self.components.iter().filter(|c| c.is_solid())
    }

    pub fn with_role(&self, role: Role) -> impl Iterator<Item = &Component> {
        self.components.iter().filter(move |c| c.role == role)
    }

    pub fn motor(&self) -> Option<&Component> {
        self.with_role(Role::Motor).next()
    }

    pub fn propeller(&self) -> Option<&Component> {
        self.with_role(Role::PropellerDisk).next()
    }

    pub fn counterweight_masses(&self) -> Vec<f64> {
        self.with_role(Role::Counterweight).map(|c| c.mass).collect()
    }

    pub fn translated(&self, offset: &Vec3) -> Assembly {
        let mut out = self.clone();
        for c in &mut out.components {
            c.pose.position += offset;
        }
        out
    }

    /// Applies a rigid transform to every component.
    pub fn transformed(&self, transform: &Pose) -> Assembly {
        let mut out = self.clone();
        for c in &mut out.components {
            c.pose = transform.compose(&c.pose);
        }
        out
    }

    /// Checks the vehicle layout: role counts, component data and the motor
    /// placement convention (x = 0, thrust axis along -Z).
    pub fn validate_vehicle(&self) -> Result<()> {
        let count = |role| self.with_role(role).count();
        let expect = [
            (Role::Battery, 2..=2),
            (Role::Pcb, 1..=1),
            (Role::Motor, 1..=1),
            (Role::PropellerDisk, 1..=1),
            (Role::Counterweight, 0..=2),
        ];
        for (role, range) in expect {
            let n = count(role);
            if !range.contains(&n) {
                return Err(Error::InvalidAssembly(format!(
                    "expected {range:?} {role:?} components, found {n}"
                )));
            }
        }
        for c in &self.components {
            c.primitive.validate()?;
            if !(0.0..=1.0).contains(&c.albedo) {
                return Err(Error::InvalidAssembly(format!(
                    "{:?} albedo {} outside [0, 1]",
                    c.role, c.albedo
                )));
            }
            if c.role != Role::Counterweight && c.mass < 0.0 {
                return Err(Error::InvalidAssembly(format!(
                    "{:?} has negative mass",
                    c.role
                )));
            }
        }
        let motor = self.motor().expect("counted above");
        if motor.pose.position.x.abs() > 1e-9 {
            return Err(Error::InvalidAssembly(format!(
                "motor x = {} (must be 0)",
                motor.pose.position.x
            )));
        }
        for c in [motor, self.propeller().expect("counted above")] {
            let axis = c.pose.rotation() * Vec3::z();
            if (axis + Vec3::z()).norm() > 1e-9 {
                return Err(Error::InvalidAssembly(format!(
                    "{:?} axis {axis:?} does not point along -Z",
                    c.role
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn zero_axis_is_identity() {
        let p = Pose::new(Vec3::new(1.0, 2.0, 3.0), Vec3::zeros(), 1.3);
        assert_eq!(p.rotation(), Mat3::identity());
    }

    #[test]
    fn axis_is_normalized() {
        let a = Pose::new(Vec3::zeros(), Vec3::new(0.0, 0.0, 5.0), 0.7);
        let b = Pose::new(Vec3::zeros(), Vec3::new(0.0, 0.0, 1.0), 0.7);
        assert_relative_eq!(a.rotation(), b.rotation(), epsilon = 1e-15);
    }

    #[test]
    fn primitive_validation() {
        assert!(Primitive::Sphere { diameter: 0.0 }.validate().is_ok());
        assert!(Primitive::Sphere { diameter: -1.0 }.validate().is_err());
        assert!(Primitive::Cuboid {
            width: 1.0,
            depth: 0.0,
            height: 1.0
        }
        .validate()
        .is_err());
        assert!(Primitive::Disk {
            diameter: 10.0,
            solidity: 1.5
        }
        .validate()
        .is_err());
    }

    proptest! {
        #[test]
        fn pose_composed_with_inverse_is_identity(
            px in -100.0..100.0f64, py in -100.0..100.0f64, pz in -100.0..100.0f64,
            ax in -1.0..1.0f64, ay in -1.0..1.0f64, az in -1.0..1.0f64,
            angle in 0.0..std::f64::consts::PI,
        ) {
            let pose = Pose::new(Vec3::new(px, py, pz), Vec3::new(ax, ay, az), angle);
            let id = pose.compose(&pose.inverse());
            prop_assert!(id.position.norm() < 1e-9);
            let r = id.rotation();
            prop_assert!((r - Mat3::identity()).norm() < 1e-9);
        }
    }
}
