//! Dense convex quadratic programs
//!
//! ```text
//! minimize ½ xᵀP x + qᵀx   subject to   l ≤ A x ≤ u
//! ```
//!
//! solved by operator splitting (alternating direction method of
//! multipliers) followed by an active-set polishing solve. Equality rows have
//! `l = u`; infinite bounds are allowed.

use nalgebra::{DMatrix, DVector};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QpSettings {
    pub max_iter: usize,
    pub eps_abs: f64,
    pub eps_rel: f64,
    pub rho: f64,
    pub sigma: f64,
    pub alpha: f64,
    pub polish: bool,
}

impl Default for QpSettings {
    fn default() -> Self {
        Self {
            max_iter: 4000,
            eps_abs: 1e-8,
            eps_rel: 1e-8,
            rho: 0.1,
            sigma: 1e-6,
            alpha: 1.6,
            polish: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QpStatus {
    Solved,
    MaxIterations,
    Infeasible,
    /// non-finite data; the returned point is zero
    Invalid,
}

#[derive(Clone, Debug)]
pub struct QpSolution {
    pub x: DVector<f64>,
    /// multipliers of `A x`; positive on active upper bounds, negative on
    /// active lower bounds
    pub y: DVector<f64>,
    pub status: QpStatus,
    pub iterations: usize,
    pub polished: bool,
}

pub struct QpProblem<'a> {
    pub p: &'a DMatrix<f64>,
    pub q: &'a DVector<f64>,
    pub a: &'a DMatrix<f64>,
    pub l: &'a DVector<f64>,
    pub u: &'a DVector<f64>,
}

const EQ_RHO_SCALE: f64 = 1e3;
const INF_BOUND: f64 = 1e20;
const RHO_MIN: f64 = 1e-6;
const RHO_MAX: f64 = 1e6;

fn inf_norm(v: &DVector<f64>) -> f64 {
    v.amax()
}

fn factor(p: &DMatrix<f64>, a: &DMatrix<f64>, rho: &DVector<f64>, sigma: f64) -> nalgebra::Cholesky<f64, nalgebra::Dyn> {
    let n = p.nrows();
    let mut k = p + DMatrix::identity(n, n) * sigma;
    for (i, row) in a.row_iter().enumerate() {
        let r = rho[i];
        for j in 0..n {
            let aj = row[j];
            if aj == 0.0 {
                continue;
            }
            for m in 0..n {
                k[(j, m)] += r * aj * row[m];
            }
        }
    }
    let shift = 1e-10 * (1.0 + k.diagonal().amax());
    let mut extra = 0.0;
    for _ in 0..8 {
        if let Some(c) = (&k + DMatrix::identity(n, n) * extra).cholesky() {
            return c;
        }
        extra = if extra == 0.0 { shift } else { extra * 100.0 };
    }
    // only reachable when P is far from positive semidefinite
    (&k + DMatrix::identity(n, n) * (k.diagonal().amax().abs() + 1.0))
        .cholesky()
        .expect("shifted KKT matrix is positive definite")
}

impl QpProblem<'_> {
    pub fn solve(&self, s: &QpSettings) -> QpSolution {
        let n = self.p.nrows();
        let m = self.a.nrows();
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        if !finite(self.p.as_slice())
            || !finite(self.q.as_slice())
            || !finite(self.a.as_slice())
            || self.l.iter().chain(self.u.iter()).any(|x| x.is_nan())
        {
            return QpSolution {
                x: DVector::zeros(n),
                y: DVector::zeros(m),
                status: QpStatus::Invalid,
                iterations: 0,
                polished: false,
            };
        }

        // row equilibration keeps ρ meaningful across rows of different scale
        let mut row_scale = DVector::from_element(m, 1.0);
        let mut a = self.a.clone();
        let mut l = self.l.clone();
        let mut u = self.u.clone();
        for i in 0..m {
            let norm = a.row(i).amax();
            if norm > 0.0 {
                let d = 1.0 / norm;
                row_scale[i] = d;
                a.row_mut(i).scale_mut(d);
                l[i] *= d;
                u[i] *= d;
            }
            l[i] = l[i].clamp(-INF_BOUND, INF_BOUND);
            u[i] = u[i].clamp(-INF_BOUND, INF_BOUND);
        }
        let is_eq: Vec<bool> = (0..m).map(|i| (u[i] - l[i]).abs() < 1e-12).collect();
        let rho_vec = |rho: f64| {
            DVector::from_fn(m, |i, _| {
                if is_eq[i] {
                    rho * EQ_RHO_SCALE
                } else if l[i] <= -INF_BOUND && u[i] >= INF_BOUND {
                    RHO_MIN
                } else {
                    rho
                }
            })
        };

        let mut rho = s.rho;
        let mut rv = rho_vec(rho);
        let mut chol = factor(self.p, &a, &rv, s.sigma);
        let at = a.transpose();

        let mut x = DVector::zeros(n);
        let mut z = DVector::zeros(m);
        let mut y = DVector::zeros(m);
        let mut status = QpStatus::MaxIterations;
        let mut iterations = s.max_iter;

        for k in 1..=s.max_iter {
            let rhs = &x * s.sigma - self.q + &at * (rv.component_mul(&z) - &y);
            let xt = chol.solve(&rhs);
            let zt = &a * &xt;
            let x_new = &xt * s.alpha + &x * (1.0 - s.alpha);
            let z_relax = &zt * s.alpha + &z * (1.0 - s.alpha);
            let mut z_new = &z_relax + y.component_div(&rv);
            for i in 0..m {
                z_new[i] = z_new[i].clamp(l[i], u[i]);
            }
            let dy = rv.component_mul(&(&z_relax - &z_new));
            y += &dy;
            x = x_new;
            z = z_new;

            if k % 10 == 0 || k == s.max_iter {
                let ax = &a * &x;
                let px = self.p * &x;
                let aty = &at * &y;
                let r_prim = inf_norm(&(&ax - &z));
                let r_dual = inf_norm(&(&px + self.q + &aty));
                let eps_prim = s.eps_abs + s.eps_rel * inf_norm(&ax).max(inf_norm(&z));
                let eps_dual = s.eps_abs
                    + s.eps_rel * inf_norm(&px).max(inf_norm(&aty)).max(inf_norm(self.q));
                if r_prim <= eps_prim && r_dual <= eps_dual {
                    status = QpStatus::Solved;
                    iterations = k;
                    break;
                }
                // certificate of primal infeasibility
                let aty_d = &at * &dy;
                let dnorm = inf_norm(&dy);
                if dnorm > 1e-12 {
                    let support: f64 = (0..m)
                        .map(|i| {
                            if dy[i] > 0.0 {
                                u[i] * dy[i]
                            } else {
                                l[i] * dy[i]
                            }
                        })
                        .sum();
                    if inf_norm(&aty_d) <= 1e-9 * dnorm && support < -1e-9 * dnorm {
                        status = QpStatus::Infeasible;
                        iterations = k;
                        break;
                    }
                }
                if k % 50 == 0 {
                    let prim = r_prim / inf_norm(&ax).max(inf_norm(&z)).max(1e-30);
                    let dual = r_dual
                        / inf_norm(&px)
                            .max(inf_norm(&aty))
                            .max(inf_norm(self.q))
                            .max(1e-30);
                    let ratio = (prim / dual.max(1e-30)).sqrt();
                    let new_rho = (rho * ratio).clamp(RHO_MIN, RHO_MAX);
                    if new_rho > 5.0 * rho || new_rho < 0.2 * rho {
                        rho = new_rho;
                        rv = rho_vec(rho);
                        chol = factor(self.p, &a, &rv, s.sigma);
                    }
                }
            }
        }

        let mut polished = false;
        if s.polish && status != QpStatus::Infeasible {
            if let Some((xp, yp)) = polish(self.p, self.q, &a, &l, &u, &x, &z, &y) {
                x = xp;
                y = yp;
                polished = true;
                status = QpStatus::Solved;
            }
        }
        QpSolution {
            x,
            y: y.component_mul(&row_scale),
            status,
            iterations,
            polished,
        }
    }
}

/// Solves the equality-constrained problem on the guessed active set and
/// keeps the result only if it is primal and dual feasible.
#[allow(clippy::too_many_arguments)]
fn polish(
    p: &DMatrix<f64>,
    q: &DVector<f64>,
    a: &DMatrix<f64>,
    l: &DVector<f64>,
    u: &DVector<f64>,
    x: &DVector<f64>,
    z: &DVector<f64>,
    y: &DVector<f64>,
) -> Option<(DVector<f64>, DVector<f64>)> {
    let n = p.nrows();
    let m = a.nrows();
    let tol = 1e-9;
    // (row, bound value)
    let mut active: Vec<(usize, f64)> = Vec::new();
    for i in 0..m {
        let at_lower = z[i] - l[i] < -y[i] || (u[i] - l[i]).abs() < 1e-12;
        let at_upper = u[i] - z[i] < y[i];
        if (u[i] - l[i]).abs() < 1e-12 {
            active.push((i, l[i]));
        } else if at_upper && u[i] < INF_BOUND {
            active.push((i, u[i]));
        } else if at_lower && l[i] > -INF_BOUND {
            active.push((i, l[i]));
        }
    }
    let na = active.len();
    let delta = 1e-9;
    let size = n + na;
    let mut kkt = DMatrix::zeros(size, size);
    kkt.view_mut((0, 0), (n, n)).copy_from(p);
    for j in 0..n {
        kkt[(j, j)] += delta;
    }
    for (r, &(i, _)) in active.iter().enumerate() {
        for j in 0..n {
            kkt[(n + r, j)] = a[(i, j)];
            kkt[(j, n + r)] = a[(i, j)];
        }
        kkt[(n + r, n + r)] = -delta;
    }
    let mut rhs = DVector::zeros(size);
    rhs.rows_mut(0, n).copy_from(&(-q));
    for (r, &(_, b)) in active.iter().enumerate() {
        rhs[n + r] = b;
    }
    let lu = kkt.clone().lu();
    let mut sol = lu.solve(&rhs)?;
    // undo the regularisation
    let mut exact = kkt.clone();
    for j in 0..n {
        exact[(j, j)] -= delta;
    }
    for r in 0..na {
        exact[(n + r, n + r)] += delta;
    }
    for _ in 0..3 {
        let resid = &rhs - &exact * &sol;
        sol += lu.solve(&resid)?;
    }
    let xp = sol.rows(0, n).into_owned();
    let mut yp = DVector::zeros(m);
    for (r, &(i, _)) in active.iter().enumerate() {
        yp[i] = sol[n + r];
    }
    let ax = a * &xp;
    for i in 0..m {
        if ax[i] < l[i] - tol * (1.0 + l[i].abs()) || ax[i] > u[i] + tol * (1.0 + u[i].abs()) {
            return None;
        }
        if (u[i] - l[i]).abs() >= 1e-12 {
            // multipliers must have the sign of their bound
            let on_upper = (ax[i] - u[i]).abs() <= tol * (1.0 + u[i].abs());
            let on_lower = (ax[i] - l[i]).abs() <= tol * (1.0 + l[i].abs());
            if (yp[i] > tol && !on_upper) || (yp[i] < -tol && !on_lower) {
                return None;
            }
        }
    }
    let grad = p * &xp + q + a.transpose() * &yp;
    if grad.amax() > 1e-7 * (1.0 + q.amax()) {
        return None;
    }
    // not worse than the splitting iterate
    let obj = |v: &DVector<f64>| 0.5 * v.dot(&(p * v)) + q.dot(v);
    if obj(&xp) > obj(x) + 1e-9 * (1.0 + obj(x).abs()) {
        let ax0 = a * x;
        let x_feasible = (0..m).all(|i| ax0[i] >= l[i] - tol && ax0[i] <= u[i] + tol);
        if x_feasible {
            return None;
        }
    }
    Some((xp, yp))
}
