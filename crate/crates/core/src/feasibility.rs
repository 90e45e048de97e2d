//! The ten flight constraints and the report that records them.
//!
//! | id | constraint                         | margin unit |
//! |----|------------------------------------|-------------|
//! | 1  | centre of mass on the spin axis    | mm          |
//! | 2  | spin axis is a principal axis      | g·mm²       |
//! | 3  | in-plane moments ≤ η·I_zz          | normalized  |
//! | 4  | total mass                         | g           |
//! | 5  | counterweight masses non-negative  | g           |
//! | 6  | thrust arm                         | mm          |
//! | 7  | drag-torque coefficient window     | g·mm²       |
//! | 8  | wake clearance                     | mm          |
//! | 9  | cylindrical volume bound           | mm          |
//! | 10 | no overlapping components          | mm          |

use serde::{Deserialize, Serialize};

use crate::aero::{self, PhysicsConstants, WakeRegion};
use crate::error::Result;
use crate::geometry::{
    assembly_mass_properties, signed_distance, volume_margin, Assembly, InertiaSummary, Role,
    Vec3, TOUCH_TOLERANCE,
};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConstraintLimits {
    /// bound on the in-plane to spin-axis moment ratio
    pub eta: f64,
    /// g
    pub m_max: f64,
    /// mm
    pub arm_min: f64,
    /// g·mm²
    pub c_m_range: [f64; 2],
    /// mm
    pub r_max: f64,
    /// mm
    pub z_range: [f64; 2],
    /// allowed distance of the centre of mass from the spin axis, mm
    pub com_tol: f64,
    /// allowed product of inertia, as a fraction of I_zz
    pub product_tol: f64,
}

impl Default for ConstraintLimits {
    fn default() -> Self {
        Self {
            eta: 0.75,
            m_max: 40.0,
            arm_min: 15.0,
            c_m_range: aero::DEFAULT_C_M_RANGE,
            r_max: 70.0,
            z_range: [-55.0, 55.0],
            com_tol: 0.5,
            product_tol: 0.005,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstraintRecord {
    pub id: u8,
    pub name: String,
    pub pass: bool,
    pub margin: f64,
    pub detail: String,
}

impl ConstraintRecord {
    fn new(id: u8, name: &str, margin: f64, pass: bool, detail: String) -> Self {
        Self {
            id,
            name: name.to_owned(),
            pass,
            margin,
            detail,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub records: Vec<ConstraintRecord>,
    pub overall: bool,
}

impl FeasibilityReport {
    fn from_records(records: Vec<ConstraintRecord>) -> Self {
        let overall = records.iter().all(|r| r.pass);
        Self { records, overall }
    }

    pub fn failed(&self) -> impl Iterator<Item = &ConstraintRecord> {
        self.records.iter().filter(|r| !r.pass)
    }

    pub fn failed_ids(&self) -> Vec<u8> {
        self.failed().map(|r| r.id).collect()
    }

    pub fn record(&self, id: u8) -> Option<&ConstraintRecord> {
        self.records.iter().find(|r| r.id == id)
    }
}

pub fn check_com(s: &InertiaSummary, lim: &ConstraintLimits) -> ConstraintRecord {
    let off = s.com.xy().norm();
    let margin = lim.com_tol - off;
    ConstraintRecord::new(
        1,
        "center_of_mass",
        margin,
        margin >= 0.0,
        format!("|com_xy| = {off:.6} mm"),
    )
}

/// Uses the rotation-invariant norm of (I_xz, I_yz).
pub fn check_principal_alignment(s: &InertiaSummary, lim: &ConstraintLimits) -> ConstraintRecord {
    let product = s.ixz().hypot(s.iyz());
    let margin = lim.product_tol * s.izz() - product;
    ConstraintRecord::new(
        2,
        "principal_axis",
        margin,
        margin >= 0.0,
        format!("I_xz = {:.6}, I_yz = {:.6}, I_zz = {:.6}", s.ixz(), s.iyz(), s.izz()),
    )
}

/// Left-hand sides of the two polynomial stability conditions:
/// `(I_xx − ηI_zz)(I_yy − ηI_zz) − I_xy²` and `2ηI_zz − I_xx − I_yy`.
pub fn stability_conditions(ixx: f64, iyy: f64, izz: f64, ixy: f64, eta: f64) -> (f64, f64) {
    let first = (ixx - eta * izz) * (iyy - eta * izz) - ixy * ixy;
    let second = 2.0 * eta * izz - ixx - iyy;
    (first, second)
}

pub fn check_stability_ratio(s: &InertiaSummary, lim: &ConstraintLimits) -> ConstraintRecord {
    let izz = s.izz();
    let (first, second) = stability_conditions(s.ixx(), s.iyy(), izz, s.ixy(), lim.eta);
    let (margin, pass) = if izz > 0.0 {
        let m = (first / (izz * izz)).min(second / izz);
        (m, first >= 0.0 && second >= 0.0)
    } else {
        (first.min(second), false)
    };
    ConstraintRecord::new(
        3,
        "stability_ratio",
        margin,
        pass,
        format!("det form {first:.6e}, trace form {second:.6e}"),
    )
}

pub fn check_total_mass(s: &InertiaSummary, lim: &ConstraintLimits) -> ConstraintRecord {
    let margin = lim.m_max - s.total_mass;
    ConstraintRecord::new(
        4,
        "total_mass",
        margin,
        margin >= 0.0,
        format!("m_tot = {:.6} g", s.total_mass),
    )
}

pub fn check_counterweight_mass(a: &Assembly) -> ConstraintRecord {
    let masses = a.counterweight_masses();
    let margin = masses.iter().copied().fold(f64::INFINITY, f64::min);
    let margin = if margin.is_finite() { margin } else { 0.0 };
    ConstraintRecord::new(
        5,
        "counterweight_mass",
        margin,
        masses.iter().all(|&m| m >= 0.0),
        format!("masses {masses:?} g"),
    )
}

/// Translates the assembly along Z so its centre of mass has z = 0. The
/// horizontal offset is left alone: it is a checked quantity.
pub fn recenter_z(a: &Assembly) -> Result<(Assembly, InertiaSummary)> {
    let s = assembly_mass_properties(a)?;
    let centred = a.translated(&Vec3::new(0.0, 0.0, -s.com.z));
    let s = assembly_mass_properties(&centred)?;
    Ok((centred, s))
}

/// Volume clearance of every solid (mm), in component order.
pub fn volume_margins(a: &Assembly, lim: &ConstraintLimits) -> Vec<f64> {
    a.solids()
        .map(|c| volume_margin(&c.shape(), lim.r_max, lim.z_range))
        .collect()
}

/// Signed distances of all solid pairs (i < j), in lexicographic pair order.
pub fn pairwise_distances(a: &Assembly) -> Vec<f64> {
    let shapes: Vec<_> = a.solids().map(|c| c.shape()).collect();
    let mut out = Vec::with_capacity(shapes.len() * shapes.len().saturating_sub(1) / 2);
    for i in 0..shapes.len() {
        for j in i + 1..shapes.len() {
            out.push(signed_distance(&shapes[i], &shapes[j]));
        }
    }
    out
}

fn min_or(values: &[f64], empty: f64) -> f64 {
    values.iter().copied().fold(empty, f64::min)
}

pub fn check_control_arm(a: &Assembly, lim: &ConstraintLimits) -> ConstraintRecord {
    match aero::check_control_arm(a, lim.arm_min) {
        Ok(m) => ConstraintRecord::new(
            6,
            "control_arm",
            m,
            m >= 0.0,
            format!("arm = {:.6} mm", m + lim.arm_min),
        ),
        Err(e) => ConstraintRecord::new(6, "control_arm", -lim.arm_min, false, e.to_string()),
    }
}

pub fn check_drag_window(a: &Assembly, lim: &ConstraintLimits, k: &PhysicsConstants) -> ConstraintRecord {
    let c_m = aero::drag_coefficient_unchecked(a, k);
    let (lo, hi) = aero::check_spin_range(c_m, lim.c_m_range);
    ConstraintRecord::new(
        7,
        "drag_coefficient",
        lo.min(hi),
        lo >= 0.0 && hi >= 0.0,
        format!("C_M = {c_m:.6} g*mm^2"),
    )
}

pub fn check_wake(a: &Assembly, lim: &ConstraintLimits, wake: &WakeRegion) -> ConstraintRecord {
    let m = aero::wake_margin(a, wake, lim.z_range[1]);
    let m = if m.is_finite() { m } else { f64::MAX };
    ConstraintRecord::new(
        8,
        "wake_clearance",
        m,
        m >= 0.0,
        format!("min clearance beyond margin {m:.6} mm"),
    )
}

pub fn check_volume(a: &Assembly, lim: &ConstraintLimits) -> ConstraintRecord {
    let margins = volume_margins(a, lim);
    let m = min_or(&margins, f64::MAX);
    let worst = margins
        .iter()
        .zip(a.solids())
        .min_by(|x, y| x.0.total_cmp(y.0))
        .map(|(_, c)| format!("{:?}", c.role))
        .unwrap_or_default();
    ConstraintRecord::new(
        9,
        "volume",
        m,
        m >= -1e-9,
        format!("min clearance {m:.6} mm ({worst})"),
    )
}

pub fn check_non_intersection(a: &Assembly) -> ConstraintRecord {
    let d = pairwise_distances(a);
    let m = min_or(&d, f64::MAX);
    ConstraintRecord::new(
        10,
        "non_intersection",
        m,
        m > TOUCH_TOLERANCE,
        format!("min pairwise distance {m:.6} mm"),
    )
}

/// Evaluates every constraint after moving the centre of mass to z = 0.
pub fn evaluate_all(
    a: &Assembly,
    lim: &ConstraintLimits,
    k: &PhysicsConstants,
    wake: &WakeRegion,
) -> FeasibilityReport {
    let (centred, s) = match recenter_z(a) {
        Ok(v) => v,
        Err(e) => {
            let names = [
                "center_of_mass",
                "principal_axis",
                "stability_ratio",
                "total_mass",
                "counterweight_mass",
                "control_arm",
                "drag_coefficient",
                "wake_clearance",
                "volume",
                "non_intersection",
            ];
            let records = names
                .iter()
                .enumerate()
                .map(|(i, n)| ConstraintRecord::new(i as u8 + 1, n, 0.0, false, e.to_string()))
                .collect();
            return FeasibilityReport::from_records(records);
        }
    };
    FeasibilityReport::from_records(vec![
        check_com(&s, lim),
        check_principal_alignment(&s, lim),
        check_stability_ratio(&s, lim),
        check_total_mass(&s, lim),
        check_counterweight_mass(&centred),
        check_control_arm(&centred, lim),
        check_drag_window(&centred, lim, k),
        check_wake(&centred, lim, wake),
        check_volume(&centred, lim),
        check_non_intersection(&centred),
    ])
}

/// Count of counterweights in the assembly.
pub fn counterweight_count(a: &Assembly) -> usize {
    a.with_role(Role::Counterweight).count()
}
