//! Sequential quadratic programming with finite-difference derivatives.
//!
//! Each iteration linearises the constraints, solves a relaxed quadratic
//! subproblem (the linearised constraints only need to cut the current
//! violation, so the subproblem is always feasible) and backtracks on the L1
//! merit function. The Hessian of
//! the Lagrangian is approximated by damped BFGS. Variables are handled in
//! scaled units `x / scale`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::dual::{DualQp, DualStatus};

/// Objective and constraint values at a point; feasibility means
/// `eq == 0` and `ineq >= 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub f: f64,
    pub eq: Vec<f64>,
    pub ineq: Vec<f64>,
}

impl Evaluation {
    /// L1 norm of the constraint violation.
    pub fn violation(&self) -> f64 {
        self.eq.iter().map(|c| c.abs()).sum::<f64>()
            + self.ineq.iter().map(|c| (-c).max(0.0)).sum::<f64>()
    }

    pub fn max_violation(&self) -> f64 {
        self.eq
            .iter()
            .map(|c| c.abs())
            .chain(self.ineq.iter().map(|c| (-c).max(0.0)))
            .fold(0.0, f64::max)
    }

    pub fn is_feasible(&self, tol: f64) -> bool {
        self.max_violation() <= tol
    }
}

pub trait NlpProblem: Sync {
    fn dim(&self) -> usize;
    fn evaluate(&self, x: &[f64]) -> Evaluation;
    fn lower(&self) -> Vec<f64>;
    fn upper(&self) -> Vec<f64>;
    /// Typical magnitude of each variable.
    fn scale(&self) -> Vec<f64>;
    /// Central-difference half-width for each variable at `x`.
    fn fd_step(&self, x: &[f64]) -> Vec<f64>;
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SqpSettings {
    pub max_iter: usize,
    /// stop when an accepted step changes the objective by less than this
    pub ftol: f64,
    pub feas_tol: f64,
    /// initial bound on each scaled step component
    pub trust_radius: f64,
    pub parallel: bool,
}

impl Default for SqpSettings {
    fn default() -> Self {
        Self {
            max_iter: 100,
            ftol: 1e-6,
            feas_tol: 1e-6,
            trust_radius: 1.0,
            parallel: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    Ftol,
    MaxIter,
    Stalled,
}

#[derive(Clone, Debug)]
pub struct SqpResult {
    pub x: Vec<f64>,
    pub eval: Evaluation,
    pub iterations: usize,
    pub termination: Termination,
    /// lowest-objective accepted iterate within `feas_tol`, if any
    pub best_feasible: Option<(Vec<f64>, Evaluation)>,
    pub evaluations: usize,
}

const ARMIJO: f64 = 1e-4;
const MIN_STEP: f64 = 1.0 / 1024.0;
const MIN_TRUST: f64 = 1e-7;

struct Derivatives {
    g: DVector<f64>,
    j_eq: DMatrix<f64>,
    j_in: DMatrix<f64>,
}

fn derivatives<P: NlpProblem + ?Sized>(
    problem: &P,
    x: &[f64],
    scale: &[f64],
    base: &Evaluation,
    parallel: bool,
) -> Derivatives {
    let n = x.len();
    let h = problem.fd_step(x);
    let (lo, hi) = (problem.lower(), problem.upper());
    // stay inside the bounds; one-sided next to them
    let at = |k: usize| {
        let i = k / 2;
        if k % 2 == 0 {
            (x[i] + h[i]).min(hi[i])
        } else {
            (x[i] - h[i]).max(lo[i])
        }
    };
    let probe = |k: usize| {
        let mut xp = x.to_vec();
        xp[k / 2] = at(k);
        problem.evaluate(&xp)
    };
    let evals: Vec<Evaluation> = if parallel {
        (0..2 * n).into_par_iter().map(probe).collect()
    } else {
        (0..2 * n).map(probe).collect()
    };
    let (ne, ni) = (base.eq.len(), base.ineq.len());
    let mut g = DVector::zeros(n);
    let mut j_eq = DMatrix::zeros(ne, n);
    let mut j_in = DMatrix::zeros(ni, n);
    for i in 0..n {
        let (plus, minus) = (&evals[2 * i], &evals[2 * i + 1]);
        // derivative with respect to the scaled variable
        let span = at(2 * i) - at(2 * i + 1);
        let c = if span > 0.0 { scale[i] / span } else { 0.0 };
        g[i] = (plus.f - minus.f) * c;
        for r in 0..ne {
            j_eq[(r, i)] = (plus.eq[r] - minus.eq[r]) * c;
        }
        for r in 0..ni {
            j_in[(r, i)] = (plus.ineq[r] - minus.ineq[r]) * c;
        }
    }
    Derivatives { g, j_eq, j_in }
}

struct Step {
    d: DVector<f64>,
    y_eq: DVector<f64>,
    y_in: DVector<f64>,
    /// fraction of the violated linearised constraints left unsatisfied
    relax: f64,
    valid: bool,
}

/// Quadratic subproblem over (d, ξ). Equalities and violated inequalities
/// are only required to shrink to a fraction ξ of their current residual,
/// with ξ ∈ [0, 1] priced quadratically, so d = 0, ξ = 1 is always feasible.
fn subproblem(
    b: &DMatrix<f64>,
    der: &Derivatives,
    e: &Evaluation,
    d_lo: &DVector<f64>,
    d_hi: &DVector<f64>,
    price: f64,
) -> Step {
    let n = b.nrows();
    let ne = e.eq.len();
    let ni = e.ineq.len();
    let nv = n + 1;
    let rows = ne + ni + 2 * nv;

    let mut g = DMatrix::zeros(nv, nv);
    g.view_mut((0, 0), (n, n)).copy_from(b);
    g[(n, n)] = price;
    let mut a = DVector::zeros(nv);
    a.rows_mut(0, n).copy_from(&der.g);

    let mut c = DMatrix::zeros(rows, nv);
    let mut rhs = DVector::zeros(rows);
    for r in 0..ne {
        c.view_mut((r, 0), (1, n)).copy_from(&der.j_eq.row(r));
        c[(r, n)] = -e.eq[r];
        rhs[r] = -e.eq[r];
    }
    for r in 0..ni {
        let row = ne + r;
        c.view_mut((row, 0), (1, n)).copy_from(&der.j_in.row(r));
        if e.ineq[r] < 0.0 {
            c[(row, n)] = -e.ineq[r];
        }
        rhs[row] = -e.ineq[r];
    }
    for v in 0..nv {
        let (lo, hi) = if v < n { (d_lo[v], d_hi[v]) } else { (0.0, 1.0) };
        let row = ne + ni + 2 * v;
        c[(row, v)] = 1.0;
        rhs[row] = lo;
        c[(row + 1, v)] = -1.0;
        rhs[row + 1] = -hi;
    }
    let sol = DualQp {
        g: &g,
        a: &a,
        c: &c,
        b: &rhs,
        n_eq: ne,
    }
    .solve();
    Step {
        d: sol.x.rows(0, n).into_owned(),
        // Lagrangian sign convention ∇f + Jᵀy
        y_eq: -sol.u.rows(0, ne),
        y_in: -sol.u.rows(ne, ni),
        relax: sol.x[n],
        valid: sol.status == DualStatus::Solved,
    }
}

fn linearised_violation(der: &Derivatives, e: &Evaluation, d: &DVector<f64>) -> f64 {
    let eq = &der.j_eq * d;
    let ineq = &der.j_in * d;
    e.eq.iter().zip(eq.iter()).map(|(c, j)| (c + j).abs()).sum::<f64>()
        + e.ineq
            .iter()
            .zip(ineq.iter())
            .map(|(c, j)| (-(c + j)).max(0.0))
            .sum::<f64>()
}

fn lagrangian_gradient(der: &Derivatives, s: &Step) -> DVector<f64> {
    &der.g + der.j_eq.transpose() * &s.y_eq + der.j_in.transpose() * &s.y_in
}

fn damped_bfgs(b: &mut DMatrix<f64>, s: &DVector<f64>, y: &DVector<f64>) {
    let bs = &*b * s;
    let sbs = s.dot(&bs);
    if sbs <= 1e-300 {
        return;
    }
    let sy = s.dot(y);
    let y = if sy < 0.2 * sbs {
        let theta = 0.8 * sbs / (sbs - sy);
        y * theta + &bs * (1.0 - theta)
    } else {
        y.clone()
    };
    let sy = s.dot(&y);
    let update = &y * y.transpose() / sy - &bs * bs.transpose() / sbs;
    if update.iter().any(|v| !v.is_finite()) {
        return;
    }
    *b += update;
    // keep symmetric against round-off
    let bt = b.transpose();
    *b = (&*b + bt) * 0.5;
}

pub fn minimize<P: NlpProblem + ?Sized>(problem: &P, x0: &[f64], s: &SqpSettings) -> SqpResult {
    let n = problem.dim();
    let scale = problem.scale();
    let lo = problem.lower();
    let hi = problem.upper();
    let mut x: Vec<f64> = (0..n).map(|i| x0[i].clamp(lo[i], hi[i])).collect();
    let mut e = problem.evaluate(&x);
    let mut evaluations = 1;

    let mut best: Option<(Vec<f64>, Evaluation)> = None;
    let track = |x: &[f64], e: &Evaluation, best: &mut Option<(Vec<f64>, Evaluation)>| {
        if e.is_feasible(s.feas_tol) && best.as_ref().is_none_or(|(_, b)| e.f < b.f) {
            *best = Some((x.to_vec(), e.clone()));
        }
    };
    track(&x, &e, &mut best);

    let mut b: Option<DMatrix<f64>> = None;
    let mut first_update = true;
    let mut penalty: f64 = 1.0;
    let mut trust = s.trust_radius;
    let mut der = derivatives(problem, &x, &scale, &e, s.parallel);
    evaluations += 2 * n;
    let mut termination = Termination::MaxIter;
    let mut iterations = 0;

    while iterations < s.max_iter {
        iterations += 1;
        let bm = b.get_or_insert_with(|| {
            let g = der.g.norm();
            let beta = if g > 0.0 { g / (0.1 * (n as f64).sqrt()) } else { 1.0 };
            DMatrix::identity(n, n) * beta
        });
        let d_lo = DVector::from_fn(n, |i, _| ((lo[i] - x[i]) / scale[i]).max(-trust));
        let d_hi = DVector::from_fn(n, |i, _| ((hi[i] - x[i]) / scale[i]).min(trust));
        let price = 1e3 * penalty.max(der.g.amax()).max(1.0);
        let step = subproblem(bm, &der, &e, &d_lo, &d_hi, price);
        if !step.valid {
            termination = Termination::Stalled;
            break;
        }
        let multiplier = step.y_eq.amax().max(step.y_in.amax());
        let decrease = e.violation() - linearised_violation(&der, &e, &step.d);
        let curvature = der.g.dot(&step.d) + 0.5 * step.d.dot(&(&*bm * &step.d));
        if step.relax <= 1e-9 {
            penalty = penalty.max(1.5 * multiplier);
        }
        if decrease > 1e-12 && curvature > 0.0 {
            penalty = penalty.max(2.0 * curvature / decrease);
        }
        penalty = penalty.max(1e-8);

        let merit = |ev: &Evaluation| ev.f + penalty * ev.violation();
        let phi0 = merit(&e);
        let dphi = der.g.dot(&step.d)
            + penalty * (linearised_violation(&der, &e, &step.d) - e.violation());
        let sufficient = |ev: &Evaluation, alpha: f64| {
            let m = merit(ev);
            m < phi0 && m <= phi0 + ARMIJO * alpha * dphi.min(0.0)
        };
        let point = |d: &DVector<f64>, alpha: f64| -> Vec<f64> {
            (0..n)
                .map(|i| (x[i] + alpha * d[i] * scale[i]).clamp(lo[i], hi[i]))
                .collect()
        };

        let mut alpha = 1.0;
        let mut accepted: Option<(Vec<f64>, Evaluation, DVector<f64>)> = None;
        if step.d.amax() > 0.0 {
            let xt = point(&step.d, 1.0);
            let et = problem.evaluate(&xt);
            evaluations += 1;
            if sufficient(&et, 1.0) {
                accepted = Some((xt, et, step.d.clone()));
            } else {
                // second-order correction: re-linearise around the trial point
                let shifted = Evaluation {
                    f: e.f,
                    eq: (0..et.eq.len())
                        .map(|r| et.eq[r] - der.j_eq.row(r).dot(&step.d.transpose()))
                        .collect(),
                    ineq: (0..et.ineq.len())
                        .map(|r| et.ineq[r] - der.j_in.row(r).dot(&step.d.transpose()))
                        .collect(),
                };
                let corr = subproblem(bm, &der, &shifted, &d_lo, &d_hi, price);
                let xc = point(&corr.d, 1.0);
                let ec = problem.evaluate(&xc);
                evaluations += 1;
                if sufficient(&ec, 1.0) {
                    accepted = Some((xc, ec, corr.d));
                }
            }
            while accepted.is_none() {
                alpha *= 0.5;
                if alpha < MIN_STEP {
                    break;
                }
                let xt = point(&step.d, alpha);
                let et = problem.evaluate(&xt);
                evaluations += 1;
                if sufficient(&et, alpha) {
                    accepted = Some((xt, et, step.d.clone() * alpha));
                }
            }
        }

        let Some((xn, en, taken)) = accepted else {
            if (step.d.amax() <= 1e-12 || -dphi < s.ftol) && e.is_feasible(s.feas_tol) {
                termination = Termination::Ftol;
                break;
            }
            // no progress along this direction: restart curvature, shrink box
            b = None;
            first_update = true;
            trust *= 0.25;
            if trust < MIN_TRUST {
                termination = Termination::Stalled;
                break;
            }
            continue;
        };

        let grad_l_old = lagrangian_gradient(&der, &step);
        let f_old = e.f;
        let sv = taken;
        x = xn;
        e = en;
        track(&x, &e, &mut best);
        der = derivatives(problem, &x, &scale, &e, s.parallel);
        evaluations += 2 * n;
        let grad_l_new = lagrangian_gradient(&der, &step);
        let yv = grad_l_new - grad_l_old;
        if let Some(bm) = b.as_mut() {
            if first_update {
                let sy = sv.dot(&yv);
                if sy > 0.0 {
                    *bm = DMatrix::identity(n, n) * (yv.dot(&yv) / sy);
                }
                first_update = false;
            }
            damped_bfgs(bm, &sv, &yv);
        }
        trust = (trust * 2.0).min(s.trust_radius);

        if (e.f - f_old).abs() < s.ftol && e.is_feasible(s.feas_tol) {
            termination = Termination::Ftol;
            break;
        }
    }

    SqpResult {
        x,
        eval: e,
        iterations,
        termination,
        best_feasible: best,
        evaluations,
    }
}
