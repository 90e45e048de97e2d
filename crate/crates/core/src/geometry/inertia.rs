use nalgebra::SymmetricEigen;
use serde::{Deserialize, Serialize};

use super::{Assembly, Mat3, Primitive, Vec3};
use crate::error::{Error, Result};

/// Closed-form centroidal inertia (g·mm²) of a uniform solid in its local frame.
/// Disks are massless and return zero.
pub fn primitive_inertia(primitive: &Primitive, mass: f64) -> Result<Mat3> {
    primitive.validate()?;
    let tensor = match *primitive {
        Primitive::Cuboid {
            width,
            depth,
            height,
        } => {
            let k = mass / 12.0;
            Mat3::from_diagonal(&Vec3::new(
                k * (depth * depth + height * height),
                k * (width * width + height * height),
                k * (width * width + depth * depth),
            ))
        }
        Primitive::Cylinder { diameter, height } => {
            let r2 = 0.25 * diameter * diameter;
            let transverse = mass * (3.0 * r2 + height * height) / 12.0;
            Mat3::from_diagonal(&Vec3::new(transverse, transverse, 0.5 * mass * r2))
        }
        Primitive::Sphere { diameter } => {
            let r2 = 0.25 * diameter * diameter;
            Mat3::from_diagonal_element(0.4 * mass * r2)
        }
        Primitive::Disk { .. } => Mat3::zeros(),
    };
    Ok(tensor)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InertiaSummary {
    pub total_mass: f64,
    pub com: Vec3,
    /// About the centre of mass, world axes.
    pub tensor: Mat3,
    /// Eigenvalues of `tensor`, descending.
    pub principal_moments: [f64; 3],
}

impl InertiaSummary {
    pub fn ixx(&self) -> f64 {
        self.tensor[(0, 0)]
    }
    pub fn iyy(&self) -> f64 {
        self.tensor[(1, 1)]
    }
    pub fn izz(&self) -> f64 {
        self.tensor[(2, 2)]
    }
    pub fn ixy(&self) -> f64 {
        self.tensor[(0, 1)]
    }
    pub fn ixz(&self) -> f64 {
        self.tensor[(0, 2)]
    }
    pub fn iyz(&self) -> f64 {
        self.tensor[(1, 2)]
    }
}

pub(crate) fn principal_moments(tensor: &Mat3) -> [f64; 3] {
    let eig = SymmetricEigen::new(*tensor);
    let mut m = [eig.eigenvalues[0], eig.eigenvalues[1], eig.eigenvalues[2]];
    m.sort_by(|a, b| b.total_cmp(a));
    m
}

/// Mass, centre of mass, and inertia tensor about the centre of mass.
pub fn assembly_mass_properties(assembly: &Assembly) -> Result<InertiaSummary> {
    let mut total_mass = 0.0;
    let mut moment = Vec3::zeros();
    for c in assembly.solids() {
        total_mass += c.mass;
        moment += c.mass * c.pose.position;
    }
    if total_mass == 0.0 || !total_mass.is_finite() {
        return Err(Error::DegenerateAssembly);
    }
    let com = moment / total_mass;

    let mut tensor = Mat3::zeros();
    for c in assembly.solids() {
        let r = c.pose.rotation();
        let local = primitive_inertia(&c.primitive, c.mass)?;
        let d = c.pose.position - com;
        // parallel-axis shift: m (|d|² E - d dᵀ)
        let shift = c.mass * (Mat3::from_diagonal_element(d.norm_squared()) - d * d.transpose());
        tensor += r * local * r.transpose() + shift;
    }
    // symmetrize away rounding in the rotated terms
    tensor = 0.5 * (tensor + tensor.transpose());

    Ok(InertiaSummary {
        total_mass,
        com,
        principal_moments: principal_moments(&tensor),
        tensor,
    })
}
