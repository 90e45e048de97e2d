//! Component catalog and the flat design vector that places it.
//!
//! Vector layout, 23 + 4n entries:
//!
//! | entries | meaning                                          |
//! |---------|--------------------------------------------------|
//! | 0..7    | battery 1: position (3), rotation axis (3), angle |
//! | 7..14   | battery 2, same layout                           |
//! | 14..21  | PCB, same layout                                 |
//! | 21..23  | motor y, z (motor x is fixed at 0)               |
//! | 23+4i.. | counterweight i: mass, position (3)              |

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::aero::WakeRegion;
use crate::error::{Error, Result};
use crate::geometry::{Assembly, Component, Pose, Primitive, Role, Vec3};

pub const CORE_LEN: usize = 23;
pub const PER_COUNTERWEIGHT: usize = 4;
pub const MAX_COUNTERWEIGHTS: usize = 2;
const POSE_LEN: usize = 7;
const MOTOR_OFFSET: usize = 21;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartSpec {
    pub primitive: Primitive,
    /// g
    pub mass: f64,
    pub albedo: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropellerSpec {
    /// mm
    pub diameter: f64,
    pub solidity: f64,
    pub albedo: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CounterweightSpec {
    /// effective density used to size the sphere, g/mm³
    pub density: f64,
    pub albedo: f64,
}

/// Shapes, masses and albedos of the parts. The defaults are representative
/// values for a small brushless build, not measured data.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ComponentCatalog {
    pub battery: PartSpec,
    pub pcb: PartSpec,
    /// propeller mass folded in
    pub motor: PartSpec,
    pub propeller: PropellerSpec,
    pub counterweight: CounterweightSpec,
}

impl Default for ComponentCatalog {
    fn default() -> Self {
        Self {
            battery: PartSpec {
                primitive: Primitive::Cuboid {
                    width: 60.0,
                    depth: 20.0,
                    height: 7.0,
                },
                mass: 7.0,
                albedo: 0.2,
            },
            pcb: PartSpec {
                primitive: Primitive::Cuboid {
                    width: 36.0,
                    depth: 36.0,
                    height: 1.6,
                },
                mass: 4.0,
                albedo: 0.25,
            },
            motor: PartSpec {
                primitive: Primitive::Cylinder {
                    diameter: 14.0,
                    height: 15.0,
                },
                mass: 5.5,
                albedo: 0.1,
            },
            propeller: PropellerSpec {
                diameter: 56.0,
                solidity: 0.15,
                albedo: 0.1,
            },
            counterweight: CounterweightSpec {
                density: 7.0e-3,
                albedo: 0.3,
            },
        }
    }
}

impl ComponentCatalog {
    pub fn validate(&self) -> Result<()> {
        for part in [&self.battery, &self.pcb, &self.motor] {
            part.primitive.validate()?;
            if part.primitive.is_disk() || !(part.mass > 0.0) || !(0.0..=1.0).contains(&part.albedo)
            {
                return Err(Error::InvalidPrimitive(format!("catalog part {part:?}")));
            }
        }
        Primitive::Disk {
            diameter: self.propeller.diameter,
            solidity: self.propeller.solidity,
        }
        .validate()?;
        if !(self.counterweight.density > 0.0) || !(0.0..=1.0).contains(&self.counterweight.albedo)
        {
            return Err(Error::InvalidPrimitive("catalog counterweight".into()));
        }
        Ok(())
    }

    /// Mass of everything except counterweights.
    pub fn core_mass(&self) -> f64 {
        2.0 * self.battery.mass + self.pcb.mass + self.motor.mass
    }

    /// Sphere diameter for a counterweight of mass `m`, `(6m/(πρ))^(1/3)`.
    pub fn counterweight_diameter(&self, m: f64) -> f64 {
        (6.0 * m.max(0.0) / (PI * self.counterweight.density)).cbrt()
    }

    pub fn wake_region(&self) -> WakeRegion {
        WakeRegion::for_propeller(self.propeller.diameter)
    }

    fn half_height(p: &Primitive) -> f64 {
        match *p {
            Primitive::Cuboid { height, .. } | Primitive::Cylinder { height, .. } => 0.5 * height,
            Primitive::Sphere { diameter } => 0.5 * diameter,
            Primitive::Disk { .. } => 0.0,
        }
    }

    /// Motor at (0, y, z) pointing along −Z, with the propeller disk on its
    /// −Z face.
    pub fn motor_components(&self, y: f64, z: f64) -> [Component; 2] {
        let down = |p: Vec3| Pose::new(p, Vec3::x(), PI);
        let centre = Vec3::new(0.0, y, z);
        let face = Vec3::new(0.0, y, z - Self::half_height(&self.motor.primitive));
        [
            Component::new(
                Role::Motor,
                self.motor.primitive,
                down(centre),
                self.motor.mass,
                self.motor.albedo,
            ),
            Component::new(
                Role::PropellerDisk,
                Primitive::Disk {
                    diameter: self.propeller.diameter,
                    solidity: self.propeller.solidity,
                },
                down(face),
                0.0,
                self.propeller.albedo,
            ),
        ]
    }

    pub fn counterweight(&self, mass: f64, position: Vec3) -> Component {
        Component::new(
            Role::Counterweight,
            Primitive::Sphere {
                diameter: self.counterweight_diameter(mass),
            },
            Pose::from_position(position),
            mass,
            self.counterweight.albedo,
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DesignVector(pub Vec<f64>);

impl DesignVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        let v = Self(values);
        v.counterweights()?;
        Ok(v)
    }

    /// Number of counterweights encoded.
    pub fn counterweights(&self) -> Result<usize> {
        let len = self.0.len();
        if len < CORE_LEN || (len - CORE_LEN) % PER_COUNTERWEIGHT != 0 {
            return Err(Error::InvalidVector(format!(
                "length {len} is not 23 + 4n"
            )));
        }
        let n = (len - CORE_LEN) / PER_COUNTERWEIGHT;
        if n > MAX_COUNTERWEIGHTS {
            return Err(Error::InvalidVector(format!(
                "{n} counterweights (at most {MAX_COUNTERWEIGHTS})"
            )));
        }
        if self.0.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidVector("non-finite entry".into()));
        }
        Ok(n)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// What each vector entry means, used for bounds and step sizes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VariableKind {
    Position,
    Axis,
    Angle,
    Mass,
}

pub fn variable_kinds(n_counterweights: usize) -> Vec<VariableKind> {
    use VariableKind::*;
    let mut kinds = Vec::with_capacity(CORE_LEN + PER_COUNTERWEIGHT * n_counterweights);
    for _ in 0..3 {
        kinds.extend([Position, Position, Position, Axis, Axis, Axis, Angle]);
    }
    kinds.extend([Position, Position]);
    for _ in 0..n_counterweights {
        kinds.extend([Mass, Position, Position, Position]);
    }
    kinds
}

fn read_pose(v: &[f64]) -> Pose {
    Pose::new(
        Vec3::new(v[0], v[1], v[2]),
        Vec3::new(v[3], v[4], v[5]),
        v[6],
    )
}

fn write_pose(out: &mut Vec<f64>, p: &Pose) {
    out.extend([
        p.position.x,
        p.position.y,
        p.position.z,
        p.axis.x,
        p.axis.y,
        p.axis.z,
        p.angle,
    ]);
}

pub fn vector_to_assembly(x: &DesignVector, catalog: &ComponentCatalog) -> Result<Assembly> {
    let n = x.counterweights()?;
    let v = &x.0;
    let part = |spec: &PartSpec, role: Role, at: usize| {
        Component::new(
            role,
            spec.primitive,
            read_pose(&v[at..at + POSE_LEN]),
            spec.mass,
            spec.albedo,
        )
    };
    let mut components = vec![
        part(&catalog.battery, Role::Battery, 0),
        part(&catalog.battery, Role::Battery, POSE_LEN),
        part(&catalog.pcb, Role::Pcb, 2 * POSE_LEN),
    ];
    components.extend(catalog.motor_components(v[MOTOR_OFFSET], v[MOTOR_OFFSET + 1]));
    for i in 0..n {
        let at = CORE_LEN + PER_COUNTERWEIGHT * i;
        components.push(catalog.counterweight(v[at], Vec3::new(v[at + 1], v[at + 2], v[at + 3])));
    }
    Ok(Assembly::new(components))
}

/// Inverse of [`vector_to_assembly`] for assemblies it produced (or
/// translated copies of them).
pub fn assembly_to_vector(a: &Assembly) -> Result<DesignVector> {
    a.validate_vehicle()?;
    let mut out = Vec::with_capacity(CORE_LEN + PER_COUNTERWEIGHT * MAX_COUNTERWEIGHTS);
    for c in a.with_role(Role::Battery) {
        write_pose(&mut out, &c.pose);
    }
    for c in a.with_role(Role::Pcb) {
        write_pose(&mut out, &c.pose);
    }
    let motor = a.motor().expect("validated");
    out.extend([motor.pose.position.y, motor.pose.position.z]);
    for c in a.with_role(Role::Counterweight) {
        out.extend([c.mass, c.pose.position.x, c.pose.position.y, c.pose.position.z]);
    }
    DesignVector::new(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_vector(n: usize) -> DesignVector {
        let mut v: Vec<f64> = (0..CORE_LEN + 4 * n).map(|i| (i as f64 * 0.37).sin() * 20.0).collect();
        for at in [6, 13, 20] {
            v[at] = v[at].abs() % PI;
        }
        for i in 0..n {
            v[CORE_LEN + 4 * i] = 1.5 + i as f64;
        }
        DesignVector(v)
    }

    #[test]
    fn round_trip_is_exact() {
        let cat = ComponentCatalog::default();
        for n in 0..=2 {
            let x = sample_vector(n);
            let a = vector_to_assembly(&x, &cat).unwrap();
            assert_eq!(a.components.len(), 5 + n);
            assert_eq!(assembly_to_vector(&a).unwrap(), x);
        }
    }

    #[test]
    fn rejects_bad_lengths() {
        let cat = ComponentCatalog::default();
        for len in [0, 22, 24, 35] {
            assert!(vector_to_assembly(&DesignVector(vec![0.0; len]), &cat).is_err());
        }
        assert!(DesignVector::new(vec![0.0; 23 + 12]).is_err());
        let mut v = sample_vector(0);
        v.0[3] = f64::NAN;
        assert!(v.counterweights().is_err());
    }

    #[test]
    fn counterweight_sizing() {
        let cat = ComponentCatalog::default();
        let d = cat.counterweight_diameter(5.0);
        let expected = (6.0 * 5.0 / (PI * 7.0e-3)).powf(1.0 / 3.0);
        assert!((d - expected).abs() < 1e-12);
        assert!((d - 11.09).abs() < 0.01);
        assert_eq!(cat.counterweight_diameter(0.0), 0.0);
    }

    #[test]
    fn motor_points_down_with_disk_below() {
        let cat = ComponentCatalog::default();
        let a = vector_to_assembly(&sample_vector(1), &cat).unwrap();
        a.validate_vehicle().unwrap();
        let motor = a.motor().unwrap();
        let disk = a.propeller().unwrap();
        assert_eq!(motor.pose.position.x, 0.0);
        assert!((disk.pose.position.z - (motor.pose.position.z - 7.5)).abs() < 1e-12);
    }

    #[test]
    fn catalog_defaults() {
        let cat = ComponentCatalog::default();
        cat.validate().unwrap();
        assert!((cat.core_mass() - 23.5).abs() < 1e-12);
        assert_eq!(variable_kinds(2).len(), 31);
    }
}
