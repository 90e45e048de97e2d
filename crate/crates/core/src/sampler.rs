//! Stage 1: random placements, geometric prefiltering, minimum-mass
//! counterweights and full verification.

use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aero::{self, PhysicsConstants, WakeRegion};
use crate::design::{assembly_to_vector, vector_to_assembly, ComponentCatalog, DesignVector};
use crate::error::{Error, Result};
use crate::feasibility::{
    check_control_arm, check_non_intersection, check_volume, check_wake, evaluate_all, recenter_z,
    stability_conditions, ConstraintLimits, FeasibilityReport,
};
use crate::geometry::{
    assembly_mass_properties, signed_distance, volume_margin, Assembly, Component, Pose, Role,
    Vec3,
};
use crate::optim::{minimize, Evaluation, NlpProblem, SqpSettings};
use crate::visibility::{VisibilityEvaluator, VisibilityScore};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SampleConfig {
    pub seed: u64,
    /// motor distance from the spin axis, mm
    pub motor_y: [f64; 2],
    /// rotation angle range for batteries and PCB, rad
    pub angle_range: [f64; 2],
    /// local solves per counterweight count
    pub multistarts: usize,
    pub max_counterweights: usize,
    /// abort when accepted/tried drops below this after 1/floor candidates
    pub acceptance_floor: f64,
    /// candidates evaluated per parallel batch
    pub batch_size: usize,
    pub solver_max_iter: usize,
}

impl Default for SampleConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            motor_y: [15.0, 60.0],
            angle_range: [0.0, PI],
            multistarts: 8,
            max_counterweights: 2,
            acceptance_floor: 1e-5,
            batch_size: 64,
            solver_max_iter: 60,
        }
    }
}

/// Everything stage 1 needs besides the sampling config.
#[derive(Clone, Copy, Debug)]
pub struct Stage1Context<'a> {
    pub catalog: &'a ComponentCatalog,
    pub limits: &'a ConstraintLimits,
    pub physics: &'a PhysicsConstants,
    pub wake: &'a WakeRegion,
}

/// Candidate-specific random stream.
pub fn candidate_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Uniform point in the cylinder `r ≤ r_max`, `z ∈ z_range`.
pub fn uniform_in_cylinder<R: Rng>(rng: &mut R, r_max: f64, z_range: [f64; 2]) -> Vec3 {
    let r = r_max * rng.random::<f64>().sqrt();
    let theta = TAU * rng.random::<f64>();
    let z = z_range[0] + (z_range[1] - z_range[0]) * rng.random::<f64>();
    Vec3::new(r * theta.cos(), r * theta.sin(), z)
}

/// Direction uniform on the unit sphere (normalised Gaussian triple).
pub fn uniform_axis<R: Rng>(rng: &mut R) -> Vec3 {
    loop {
        let v = Vec3::new(
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
        );
        let n = v.norm();
        if n > 1e-12 {
            return v / n;
        }
    }
}

/// Batteries, PCB, motor and propeller at random poses; no counterweights.
pub fn sample_candidate<R: Rng>(
    rng: &mut R,
    cfg: &SampleConfig,
    catalog: &ComponentCatalog,
    lim: &ConstraintLimits,
) -> Assembly {
    let pose = |rng: &mut R| {
        let position = uniform_in_cylinder(rng, lim.r_max, lim.z_range);
        let axis = uniform_axis(rng);
        let angle = cfg.angle_range[0] + (cfg.angle_range[1] - cfg.angle_range[0]) * rng.random::<f64>();
        Pose::new(position, axis, angle)
    };
    let mut components = Vec::with_capacity(5 + cfg.max_counterweights);
    for (spec, role) in [
        (&catalog.battery, Role::Battery),
        (&catalog.battery, Role::Battery),
        (&catalog.pcb, Role::Pcb),
    ] {
        let p = pose(rng);
        components.push(Component::new(role, spec.primitive, p, spec.mass, spec.albedo));
    }
    let y = cfg.motor_y[0] + (cfg.motor_y[1] - cfg.motor_y[0]) * rng.random::<f64>();
    let z = lim.z_range[0] + (lim.z_range[1] - lim.z_range[0]) * rng.random::<f64>();
    components.extend(catalog.motor_components(y, z));
    Assembly::new(components)
}

/// The checks that do not depend on where the centre of mass ends up:
/// thrust arm, wake clearance, volume and non-intersection.
pub fn prefilter(a: &Assembly, lim: &ConstraintLimits, wake: &WakeRegion) -> bool {
    check_control_arm(a, lim).pass
        && check_volume(a, lim).pass
        && check_non_intersection(a).pass
        && check_wake(a, lim, wake).pass
}

const DISTANCE_BUFFER: f64 = 0.01;
const MARGIN_BUFFER: f64 = 1e-9;

/// Minimum-mass placement of `n` counterweights on a fixed core assembly.
struct CounterweightProblem<'a> {
    core: &'a Assembly,
    n: usize,
    ctx: Stage1Context<'a>,
    mass_cap: f64,
    /// include stability, drag window and wake clearance; without them only
    /// the balance equalities, mass, volume and overlap remain
    full: bool,
}

impl CounterweightProblem<'_> {
    fn assemble(&self, x: &[f64]) -> Assembly {
        let mut components = self.core.components.clone();
        for i in 0..self.n {
            let v = &x[4 * i..4 * i + 4];
            components.push(self.ctx.catalog.counterweight(v[0], Vec3::new(v[1], v[2], v[3])));
        }
        Assembly::new(components)
    }
}

impl NlpProblem for CounterweightProblem<'_> {
    fn dim(&self) -> usize {
        4 * self.n
    }

    fn evaluate(&self, x: &[f64]) -> Evaluation {
        let lim = self.ctx.limits;
        let a = self.assemble(x);
        let f: f64 = (0..self.n).map(|i| x[4 * i]).sum();
        let s = match assembly_mass_properties(&a) {
            Ok(s) => s,
            Err(_) => {
                return Evaluation {
                    f,
                    eq: vec![1e6; 4],
                    ineq: vec![-1e6],
                }
            }
        };
        let izz = s.izz();
        let ptol = lim.product_tol * izz;
        let eq = vec![s.com.x, s.com.y, s.ixz() / ptol, s.iyz() / ptol];

        let mut ineq = vec![lim.m_max - s.total_mass - MARGIN_BUFFER];
        if self.full {
            let (first, second) = stability_conditions(s.ixx(), s.iyy(), izz, s.ixy(), lim.eta);
            let c_m = aero::drag_coefficient_unchecked(&a, self.ctx.physics);
            ineq.extend([
                first / (izz * izz) - MARGIN_BUFFER,
                second / izz - MARGIN_BUFFER,
                c_m - lim.c_m_range[0] - MARGIN_BUFFER,
                lim.c_m_range[1] - c_m - MARGIN_BUFFER,
            ]);
        }

        let shift = Vec3::new(0.0, 0.0, -s.com.z);
        let solids: Vec<_> = a.solids().map(|c| c.shape()).collect();
        let first_cw = solids.len() - self.n;
        let keep_out = if self.full {
            aero::wake_keep_out(&a, self.ctx.wake, lim.z_range[1] + s.com.z)
        } else {
            Vec::new()
        };
        for i in 0..self.n {
            let k = first_cw + i;
            let mut shape = solids[k].clone();
            shape.center += shift;
            ineq.push(volume_margin(&shape, lim.r_max, lim.z_range) - MARGIN_BUFFER);
            if !keep_out.is_empty() {
                ineq.push(aero::keep_out_clearance(&solids[k], &keep_out, self.ctx.wake) - MARGIN_BUFFER);
            }
            for (j, other) in solids.iter().enumerate() {
                if j < k {
                    ineq.push(signed_distance(&solids[k], other) - DISTANCE_BUFFER);
                }
            }
        }
        Evaluation { f, eq, ineq }
    }

    fn lower(&self) -> Vec<f64> {
        let lim = self.ctx.limits;
        (0..self.n)
            .flat_map(|_| [0.0, -lim.r_max, -lim.r_max, 2.0 * lim.z_range[0]])
            .collect()
    }

    fn upper(&self) -> Vec<f64> {
        let lim = self.ctx.limits;
        (0..self.n)
            .flat_map(|_| [self.mass_cap, lim.r_max, lim.r_max, 2.0 * lim.z_range[1]])
            .collect()
    }

    fn scale(&self) -> Vec<f64> {
        (0..self.n).flat_map(|_| [1.0, 10.0, 10.0, 10.0]).collect()
    }

    fn fd_step(&self, _x: &[f64]) -> Vec<f64> {
        (0..self.n).flat_map(|_| [1e-6, 1e-5, 1e-5, 1e-5]).collect()
    }
}

#[derive(Clone, Debug)]
pub struct CounterweightSolution {
    /// re-centred so the centre of mass has z = 0
    pub assembly: Assembly,
    pub count: usize,
    pub added_mass: f64,
    pub report: FeasibilityReport,
}

fn start_point<R: Rng>(
    rng: &mut R,
    core: &Assembly,
    n: usize,
    start: usize,
    lim: &ConstraintLimits,
    mass_cap: f64,
) -> Vec<f64> {
    let mut x = Vec::with_capacity(4 * n);
    // first start: mirror the core's centre-of-mass offset across the axis
    if start == 0 {
        if let Ok(s) = assembly_mass_properties(core) {
            let off = s.com.xy();
            let r = 0.6 * lim.r_max;
            let dir = if off.norm() > 1e-9 { -off / off.norm() } else { nalgebra::Vector2::x() };
            let m = (s.total_mass * off.norm() / r / n as f64).max(0.05).min(mass_cap);
            for i in 0..n {
                let z = s.com.z + if n == 2 { [-10.0, 10.0][i] } else { 0.0 };
                x.extend([m, r * dir.x, r * dir.y, z]);
            }
            return x;
        }
    }
    let inner = [0.8 * lim.z_range[0], 0.8 * lim.z_range[1]];
    for _ in 0..n {
        let m = 0.2 + (mass_cap.min(5.0) - 0.2).max(0.0) * rng.random::<f64>();
        let p = uniform_in_cylinder(rng, 0.85 * lim.r_max, inner);
        x.extend([m, p.x, p.y, p.z]);
    }
    x
}

/// Tries 0, 1, … counterweights and returns the first count with a fully
/// feasible solution, choosing the lightest over the multistarts.
pub fn solve_counterweights<R: Rng>(
    rng: &mut R,
    core: &Assembly,
    cfg: &SampleConfig,
    ctx: Stage1Context,
) -> Option<CounterweightSolution> {
    let lim = ctx.limits;
    let accept = |a: &Assembly| -> Option<(Assembly, FeasibilityReport)> {
        let (centred, _) = recenter_z(a).ok()?;
        let report = evaluate_all(&centred, lim, ctx.physics, ctx.wake);
        report.overall.then_some((centred, report))
    };
    if let Some((assembly, report)) = accept(core) {
        return Some(CounterweightSolution {
            assembly,
            count: 0,
            added_mass: 0.0,
            report,
        });
    }
    let core_mass: f64 = core.solids().map(|c| c.mass).sum();
    let mass_cap = lim.m_max - core_mass;
    // counterweights can only add drag
    if mass_cap <= 0.0 || aero::drag_coefficient_unchecked(core, ctx.physics) > lim.c_m_range[1] {
        return None;
    }
    let settings = SqpSettings {
        max_iter: cfg.solver_max_iter,
        ftol: 1e-7,
        feas_tol: 1e-7,
        trust_radius: 2.0,
        ..SqpSettings::default()
    };
    for n in 1..=cfg.max_counterweights {
        let problem = CounterweightProblem {
            core,
            n,
            ctx,
            mass_cap,
            full: true,
        };
        let mut best: Option<CounterweightSolution> = None;
        for start in 0..cfg.multistarts {
            let x0 = start_point(rng, core, n, start, lim, mass_cap);
            let r = minimize(&problem, &x0, &settings);
            let mut tries = vec![r.x.clone()];
            if let Some((xb, _)) = r.best_feasible {
                tries.push(xb);
            }
            for x in tries {
                let added: f64 = (0..n).map(|i| x[4 * i]).sum();
                if best.as_ref().is_some_and(|b| b.added_mass <= added) {
                    continue;
                }
                if let Some((assembly, report)) = accept(&problem.assemble(&x)) {
                    best = Some(CounterweightSolution {
                        assembly,
                        count: n,
                        added_mass: added,
                        report,
                    });
                }
            }
        }
        if best.is_some() {
            return best;
        }
    }
    None
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Stage1Design {
    /// candidate index within the seeded stream
    pub draw_index: u64,
    pub vector: DesignVector,
    pub assembly: Assembly,
    pub report: FeasibilityReport,
    pub c_m: f64,
    pub spin_rps: f64,
    pub visibility: Option<VisibilityScore>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stage1Stats {
    pub tried: u64,
    pub prefiltered: u64,
    pub accepted: u64,
}

#[derive(Clone, Debug)]
pub struct Stage1Output {
    pub designs: Vec<Stage1Design>,
    pub stats: Stage1Stats,
}

enum Outcome {
    Rejected,
    Prefiltered,
    Accepted(CounterweightSolution),
}

fn process_candidate(index: u64, cfg: &SampleConfig, ctx: Stage1Context) -> Outcome {
    let mut rng = candidate_rng(cfg.seed, index);
    let core = sample_candidate(&mut rng, cfg, ctx.catalog, ctx.limits);
    if !prefilter(&core, ctx.limits, ctx.wake) {
        return Outcome::Rejected;
    }
    match solve_counterweights(&mut rng, &core, cfg, ctx) {
        Some(s) => Outcome::Accepted(s),
        None => Outcome::Prefiltered,
    }
}

/// Draws candidates in index order until `count` feasible designs exist,
/// then scores each one. Parallel and serial runs produce the same designs.
pub fn run_stage1(
    count: usize,
    cfg: &SampleConfig,
    ctx: Stage1Context,
    evaluator: Option<&VisibilityEvaluator>,
) -> Result<Stage1Output> {
    let mut stats = Stage1Stats::default();
    let mut accepted: Vec<(u64, CounterweightSolution)> = Vec::with_capacity(count);
    let batch = cfg.batch_size.max(1) as u64;
    let min_trials = (1.0 / cfg.acceptance_floor).ceil() as u64;
    let mut next = 0u64;
    while accepted.len() < count {
        let outcomes: Vec<Outcome> = (next..next + batch)
            .into_par_iter()
            .map(|i| process_candidate(i, cfg, ctx))
            .collect();
        for (offset, outcome) in outcomes.into_iter().enumerate() {
            if accepted.len() == count {
                break;
            }
            stats.tried += 1;
            match outcome {
                Outcome::Rejected => {}
                Outcome::Prefiltered => stats.prefiltered += 1,
                Outcome::Accepted(s) => {
                    stats.prefiltered += 1;
                    stats.accepted += 1;
                    accepted.push((next + offset as u64, s));
                }
            }
        }
        next += batch;
        if accepted.len() < count
            && stats.tried >= min_trials
            && (stats.accepted as f64) < cfg.acceptance_floor * stats.tried as f64
        {
            return Err(Error::AcceptanceFloor {
                tried: stats.tried,
                accepted: stats.accepted,
                floor: cfg.acceptance_floor,
            });
        }
    }

    let mut designs = Vec::with_capacity(count);
    for (draw_index, s) in accepted {
        // everything downstream is derived from the vector, so a design file
        // can be re-derived exactly
        let vector = assembly_to_vector(&s.assembly)?;
        let assembly = vector_to_assembly(&vector, ctx.catalog)?;
        let c_m = aero::drag_coefficient_unchecked(&assembly, ctx.physics);
        let spin_rps = aero::rad_per_s_to_rps(aero::spin_rate(c_m, ctx.physics)?);
        let visibility = match evaluator {
            Some(ev) => Some(ev.evaluate(&assembly)?),
            None => None,
        };
        designs.push(Stage1Design {
            draw_index,
            report: evaluate_all(&assembly, ctx.limits, ctx.physics, ctx.wake),
            vector,
            assembly,
            c_m,
            spin_rps,
            visibility,
        });
    }
    Ok(Stage1Output { designs, stats })
}
