//! Stage 2: local constrained minimisation of visibility over the full
//! design vector.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::aero::{self, PhysicsConstants, WakeRegion};
use crate::design::{
    variable_kinds, vector_to_assembly, ComponentCatalog, DesignVector, VariableKind, CORE_LEN,
    PER_COUNTERWEIGHT,
};
use crate::error::Result;
use crate::feasibility::{
    evaluate_all, pairwise_distances, recenter_z, stability_conditions, volume_margins,
    ConstraintLimits, FeasibilityReport,
};
use crate::geometry::{assembly_mass_properties, Assembly};
use crate::optim::{minimize, Evaluation, NlpProblem, SqpSettings, Termination};
use crate::render::RenderParams;
use crate::visibility::VisibilityEvaluator;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RefineConfig {
    pub max_iterations: usize,
    /// absolute objective change between accepted iterates that ends the run
    pub ftol: f64,
    /// central-difference half-width relative to a variable's magnitude
    pub fd_relative: f64,
    /// mm
    pub fd_floor_position: f64,
    /// rad, also used for axis components
    pub fd_floor_angle: f64,
    /// g
    pub fd_floor_mass: f64,
    /// largest scaled step per iteration
    pub trust_radius: f64,
    /// margins below zero by at most this count as satisfied inside the solver
    pub feas_tol: f64,
    /// evaluate finite-difference stencils concurrently
    pub parallel: bool,
}

impl Default for RefineConfig {
    fn default() -> Self {
        Self {
            max_iterations: 1000,
            ftol: 4.0e-6,
            fd_relative: 1e-4,
            fd_floor_position: 0.01,
            fd_floor_angle: 1e-3,
            fd_floor_mass: 1e-3,
            trust_radius: 0.5,
            feas_tol: 1e-6,
            parallel: true,
        }
    }
}

impl RefineConfig {
    /// Steps wide enough that a perturbation moves silhouette edges across
    /// whole pixels: one pixel for positions, one pixel at a 30 mm lever arm
    /// for angles, and 0.1 g for masses.
    pub fn render_aware(render: &RenderParams) -> Self {
        let pixel = render.window / render.resolution as f64;
        Self {
            fd_floor_position: pixel,
            fd_floor_angle: pixel / 30.0,
            fd_floor_mass: 0.1,
            ..Self::default()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RefineReason {
    Ftol,
    MaxIter,
    /// the solver could not make further progress from its last iterate
    Stalled,
    /// the last iterate was rejected; the result is the best verified
    /// feasible point seen, or the start
    ConstraintFailureFallback,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RefineResult {
    pub initial: DesignVector,
    pub final_vector: DesignVector,
    pub initial_visibility: f64,
    pub final_visibility: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub reason: RefineReason,
    pub report: FeasibilityReport,
}

impl RefineResult {
    /// Relative visibility reduction, `1 − final / initial`.
    pub fn reduction(&self) -> f64 {
        if self.initial_visibility > 0.0 {
            1.0 - self.final_visibility / self.initial_visibility
        } else {
            0.0
        }
    }
}

#[derive(Clone, Copy)]
pub struct RefineContext<'a> {
    pub catalog: &'a ComponentCatalog,
    pub limits: &'a ConstraintLimits,
    pub physics: &'a PhysicsConstants,
    pub wake: &'a WakeRegion,
    pub evaluator: &'a VisibilityEvaluator,
}

pub fn objective(x: &DesignVector, ctx: &RefineContext) -> Result<f64> {
    let a = vector_to_assembly(x, ctx.catalog)?;
    Ok(ctx.evaluator.evaluate(&a)?.total)
}

/// Signed margins (≥ 0 when satisfied) on the z-recentred assembly, in
/// order: centre of mass `1 − |com_xy|²/tol²`; products
/// `1 − (I_xz² + I_yz²)/(tol·I_zz)²`; the two stability polynomials over
/// `I_zz²` and `I_zz`; mass headroom; each counterweight mass; thrust arm;
/// both drag-window sides; wake clearance of each non-motor solid; volume
/// clearance of each solid; signed distance of each solid pair.
pub fn constraint_vector(x: &DesignVector, ctx: &RefineContext) -> Result<Vec<f64>> {
    let a = vector_to_assembly(x, ctx.catalog)?;
    Ok(assembly_margins(&a, ctx)?.1)
}

/// Centre-of-mass height and the margins of [`constraint_vector`].
fn assembly_margins(a: &Assembly, ctx: &RefineContext) -> Result<(f64, Vec<f64>)> {
    let lim = ctx.limits;
    let com_z = assembly_mass_properties(a)?.com.z;
    let (c, s) = recenter_z(a)?;
    let izz = s.izz();
    let mut m = Vec::with_capacity(48);
    m.push(1.0 - s.com.xy().norm_squared() / (lim.com_tol * lim.com_tol));
    let ptol = lim.product_tol * izz;
    m.push(1.0 - (s.ixz().powi(2) + s.iyz().powi(2)) / (ptol * ptol));
    let (first, second) = stability_conditions(s.ixx(), s.iyy(), izz, s.ixy(), lim.eta);
    m.push(first / (izz * izz));
    m.push(second / izz);
    m.push(lim.m_max - s.total_mass);
    m.extend(c.counterweight_masses());
    let arm = c.motor().map_or(0.0, |mo| mo.pose.position.xy().norm());
    m.push(arm - lim.arm_min);
    let c_m = aero::drag_coefficient_unchecked(&c, ctx.physics);
    m.push(c_m - lim.c_m_range[0]);
    m.push(lim.c_m_range[1] - c_m);
    m.extend(aero::wake_margins(&c, ctx.wake, lim.z_range[1]));
    m.extend(volume_margins(&c, lim));
    m.extend(pairwise_distances(&c));
    Ok((com_z, m))
}

/// Kept between the solver's margins and zero so that points it accepts
/// also pass the strict checks.
const MARGIN_BUFFER: f64 = 1e-4;

struct RefineProblem<'a> {
    ctx: RefineContext<'a>,
    cfg: &'a RefineConfig,
    kinds: Vec<VariableKind>,
    n_margins: usize,
}

impl RefineProblem<'_> {
    fn typical(kind: VariableKind) -> f64 {
        match kind {
            VariableKind::Position => 10.0,
            VariableKind::Axis | VariableKind::Angle => 0.5,
            VariableKind::Mass => 1.0,
        }
    }
}

impl NlpProblem for RefineProblem<'_> {
    fn dim(&self) -> usize {
        self.kinds.len()
    }

    fn evaluate(&self, x: &[f64]) -> Evaluation {
        let failed = || Evaluation {
            f: f64::INFINITY,
            eq: vec![f64::INFINITY],
            ineq: vec![-f64::INFINITY; self.n_margins],
        };
        let v = DesignVector(x.to_vec());
        let Ok(a) = vector_to_assembly(&v, self.ctx.catalog) else {
            return failed();
        };
        let Ok((com_z, margins)) = assembly_margins(&a, &self.ctx) else {
            return failed();
        };
        let f = self
            .ctx
            .evaluator
            .evaluate(&a)
            .map_or(f64::INFINITY, |s| s.total);
        Evaluation {
            f,
            eq: vec![com_z],
            ineq: margins.into_iter().map(|m| m - MARGIN_BUFFER).collect(),
        }
    }

    fn lower(&self) -> Vec<f64> {
        self.bounds(self.ctx.limits, false)
    }

    fn upper(&self) -> Vec<f64> {
        self.bounds(self.ctx.limits, true)
    }

    fn scale(&self) -> Vec<f64> {
        self.kinds.iter().map(|&k| Self::typical(k)).collect()
    }

    fn fd_step(&self, x: &[f64]) -> Vec<f64> {
        self.kinds
            .iter()
            .zip(x)
            .map(|(&k, &v)| {
                let floor = match k {
                    VariableKind::Position => self.cfg.fd_floor_position,
                    VariableKind::Axis | VariableKind::Angle => self.cfg.fd_floor_angle,
                    VariableKind::Mass => self.cfg.fd_floor_mass,
                };
                (self.cfg.fd_relative * v.abs().max(Self::typical(k))).max(floor)
            })
            .collect()
    }
}

impl RefineProblem<'_> {
    fn bounds(&self, lim: &ConstraintLimits, upper: bool) -> Vec<f64> {
        let pick = |lo: f64, hi: f64| if upper { hi } else { lo };
        let radial = pick(-lim.r_max, lim.r_max);
        let axial = pick(2.0 * lim.z_range[0], 2.0 * lim.z_range[1]);
        (0..self.kinds.len())
            .map(|i| {
                if i < CORE_LEN - 2 {
                    match i % 7 {
                        0 | 1 => radial,
                        2 => axial,
                        3..=5 => pick(-1.0, 1.0),
                        _ => pick(0.0, PI),
                    }
                } else if i < CORE_LEN {
                    if i == CORE_LEN - 2 {
                        radial
                    } else {
                        axial
                    }
                } else {
                    match (i - CORE_LEN) % PER_COUNTERWEIGHT {
                        0 => pick(0.0, lim.m_max),
                        3 => axial,
                        _ => radial,
                    }
                }
            })
            .collect()
    }
}

fn verified(a: &Assembly, ctx: &RefineContext) -> FeasibilityReport {
    evaluate_all(a, ctx.limits, ctx.physics, ctx.wake)
}

/// Refines a feasible start. The result never has higher visibility than the
/// start and always passes every constraint when the start does.
pub fn refine(x0: &DesignVector, cfg: &RefineConfig, ctx: &RefineContext) -> Result<RefineResult> {
    let n = x0.counterweights()?;
    let a0 = vector_to_assembly(x0, ctx.catalog)?;
    let initial_visibility = ctx.evaluator.evaluate(&a0)?.total;
    let start_report = verified(&a0, ctx);
    let n_margins = assembly_margins(&a0, ctx)?.1.len();

    let problem = RefineProblem {
        ctx: *ctx,
        cfg,
        kinds: variable_kinds(n),
        n_margins,
    };
    let settings = SqpSettings {
        max_iter: cfg.max_iterations,
        ftol: cfg.ftol,
        feas_tol: cfg.feas_tol,
        trust_radius: cfg.trust_radius,
        parallel: cfg.parallel,
    };
    let run = minimize(&problem, x0.as_slice(), &settings);

    // candidates: the last iterate, then the best feasible one
    let mut candidates = vec![(run.x.clone(), run.eval.f, true)];
    if let Some((xb, eb)) = &run.best_feasible {
        if *xb != run.x {
            candidates.push((xb.clone(), eb.f, false));
        }
    }
    let mut chosen: Option<(Vec<f64>, f64, bool, FeasibilityReport)> = None;
    for (x, f, is_last) in candidates {
        if !f.is_finite() || (start_report.overall && f > initial_visibility) {
            continue;
        }
        if chosen.as_ref().is_some_and(|c| c.1 <= f) {
            continue;
        }
        let v = DesignVector(x.clone());
        let Ok(a) = vector_to_assembly(&v, ctx.catalog) else {
            continue;
        };
        let report = verified(&a, ctx);
        if report.overall {
            chosen = Some((x, f, is_last, report));
        }
    }

    let (final_vector, final_visibility, reason, report) = match chosen {
        Some((x, f, true, report)) if start_report.overall => {
            let reason = match run.termination {
                Termination::Ftol => RefineReason::Ftol,
                Termination::MaxIter => RefineReason::MaxIter,
                Termination::Stalled => RefineReason::Stalled,
            };
            (DesignVector(x), f, reason, report)
        }
        Some((x, f, _, report)) => (
            DesignVector(x),
            f,
            RefineReason::ConstraintFailureFallback,
            report,
        ),
        None => (
            x0.clone(),
            initial_visibility,
            RefineReason::ConstraintFailureFallback,
            start_report,
        ),
    };
    Ok(RefineResult {
        initial: x0.clone(),
        final_vector,
        initial_visibility,
        final_visibility,
        iterations: run.iterations,
        evaluations: run.evaluations,
        reason,
        report,
    })
}

/// Central-difference gradient of `f` with half-widths `h`.
pub fn fd_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], h: &[f64]) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let mut p = x.to_vec();
            p[i] = x[i] + h[i];
            let fp = f(&p);
            p[i] = x[i] - h[i];
            let fm = f(&p);
            (fp - fm) / (2.0 * h[i])
        })
        .collect()
}
