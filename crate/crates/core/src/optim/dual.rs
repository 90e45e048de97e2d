//! Dual active-set method for strictly convex dense quadratic programs
//!
//! ```text
//! minimize ½ xᵀG x + aᵀx   subject to   cᵢᵀx = bᵢ (i < n_eq),   cᵢᵀx ≥ bᵢ (i ≥ n_eq)
//! ```
//!
//! after Goldfarb and Idnani. Starts from the unconstrained minimum and adds
//! violated constraints one at a time, keeping the iterate dual feasible, so
//! no feasible starting point is needed and infeasibility is detected.

use nalgebra::{DMatrix, DVector};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DualStatus {
    Solved,
    Infeasible,
    /// `G` is not positive definite or the data is not finite
    Invalid,
    MaxIterations,
}

#[derive(Clone, Debug)]
pub struct DualSolution {
    pub x: DVector<f64>,
    /// one multiplier per constraint: `G x + a = Σ uᵢ cᵢ`, `uᵢ ≥ 0` on
    /// inequalities, zero on inactive rows
    pub u: DVector<f64>,
    pub status: DualStatus,
    pub iterations: usize,
}

pub struct DualQp<'a> {
    pub g: &'a DMatrix<f64>,
    pub a: &'a DVector<f64>,
    /// one constraint per row
    pub c: &'a DMatrix<f64>,
    pub b: &'a DVector<f64>,
    pub n_eq: usize,
}

struct Factor {
    /// `J = L⁻ᵀ Q`; the first `q` columns span the active normals
    j: DMatrix<f64>,
    /// upper triangular, top-left `q × q` in use
    r: DMatrix<f64>,
    q: usize,
}

impl Factor {
    fn add(&mut self, d: &mut DVector<f64>) -> bool {
        let n = self.j.nrows();
        let q = self.q;
        for k in (q + 1..n).rev() {
            let (x, y) = (d[k - 1], d[k]);
            if y == 0.0 {
                continue;
            }
            let h = x.hypot(y);
            let (c, s) = (x / h, y / h);
            d[k - 1] = h;
            d[k] = 0.0;
            for row in 0..n {
                let (u, v) = (self.j[(row, k - 1)], self.j[(row, k)]);
                self.j[(row, k - 1)] = c * u + s * v;
                self.j[(row, k)] = -s * u + c * v;
            }
        }
        if d[q].abs() <= f64::EPSILON * d.amax().max(1.0) {
            return false;
        }
        for row in 0..=q {
            self.r[(row, q)] = d[row];
        }
        self.q += 1;
        true
    }

    fn drop(&mut self, k: usize) {
        let n = self.j.nrows();
        let q = self.q;
        for col in k..q - 1 {
            for row in 0..q {
                self.r[(row, col)] = self.r[(row, col + 1)];
            }
        }
        for row in 0..q {
            self.r[(row, q - 1)] = 0.0;
        }
        for col in k..q - 1 {
            let (x, y) = (self.r[(col, col)], self.r[(col + 1, col)]);
            if y == 0.0 {
                continue;
            }
            let h = x.hypot(y);
            let (c, s) = (x / h, y / h);
            for cc in col..q - 1 {
                let (u, v) = (self.r[(col, cc)], self.r[(col + 1, cc)]);
                self.r[(col, cc)] = c * u + s * v;
                self.r[(col + 1, cc)] = -s * u + c * v;
            }
            for row in 0..n {
                let (u, v) = (self.j[(row, col)], self.j[(row, col + 1)]);
                self.j[(row, col)] = c * u + s * v;
                self.j[(row, col + 1)] = -s * u + c * v;
            }
        }
        self.q -= 1;
    }

    /// Back substitution with the active block of `R`.
    fn solve_r(&self, d: &DVector<f64>) -> DVector<f64> {
        let q = self.q;
        let mut r = DVector::zeros(q);
        for i in (0..q).rev() {
            let mut s = d[i];
            for k in i + 1..q {
                s -= self.r[(i, k)] * r[k];
            }
            r[i] = s / self.r[(i, i)];
        }
        r
    }
}

impl DualQp<'_> {
    pub fn solve(&self) -> DualSolution {
        let n = self.g.nrows();
        let m = self.c.nrows();
        let invalid = |status| DualSolution {
            x: DVector::zeros(n),
            u: DVector::zeros(m),
            status,
            iterations: 0,
        };
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        if !finite(self.g.as_slice())
            || !finite(self.a.as_slice())
            || !finite(self.c.as_slice())
            || !finite(self.b.as_slice())
        {
            return invalid(DualStatus::Invalid);
        }
        let Some(chol) = self.g.clone().cholesky() else {
            return invalid(DualStatus::Invalid);
        };
        let mut x = -chol.solve(self.a);
        let l_inv = match chol.l().solve_lower_triangular(&DMatrix::identity(n, n)) {
            Some(v) => v,
            None => return invalid(DualStatus::Invalid),
        };
        let mut f = Factor {
            j: l_inv.transpose(),
            r: DMatrix::zeros(n, n),
            q: 0,
        };
        // active constraint indices, their sign (equalities may be flipped)
        // and multipliers, in factor order
        let mut active: Vec<(usize, f64)> = Vec::new();
        let mut u: Vec<f64> = Vec::new();
        let norms: Vec<f64> = (0..m).map(|i| self.c.row(i).norm().max(1e-300)).collect();
        let tol = 1e-12;
        let slack = |x: &DVector<f64>, i: usize| self.c.row(i).transpose().dot(x) - self.b[i];

        let max_iter = 50 * (n + m) + 100;
        let mut iterations = 0;
        let mut is_active = vec![false; m];
        let mut next_eq = 0;
        loop {
            // pick the constraint to add: equalities first, then the most
            // violated inequality relative to its normal
            let pick = if next_eq < self.n_eq {
                let i = next_eq;
                next_eq += 1;
                let s = slack(&x, i);
                Some((i, if s > 0.0 { -1.0 } else { 1.0 }))
            } else {
                (self.n_eq..m)
                    .filter(|&i| !is_active[i])
                    .map(|i| (i, slack(&x, i) / norms[i]))
                    .filter(|&(_, s)| s < -tol * (1.0 + self.b.amax()))
                    .min_by(|a, b| a.1.total_cmp(&b.1))
                    .map(|(i, _)| (i, 1.0))
            };
            let Some((p, sign)) = pick else {
                break;
            };
            let is_eq = p < self.n_eq;
            let np: DVector<f64> = self.c.row(p).transpose() * sign;
            let bp = self.b[p] * sign;
            let mut up = 0.0;
            loop {
                iterations += 1;
                if iterations > max_iter {
                    return self.finish(x, &active, &u, DualStatus::MaxIterations, iterations);
                }
                let mut d = f.j.transpose() * &np;
                let q = f.q;
                let z = f.j.columns(q, n - q) * d.rows(q, n - q);
                let r = f.solve_r(&d.rows(0, q).into_owned());
                let sp = np.dot(&x) - bp;
                if is_eq && sp.abs() <= tol * (1.0 + bp.abs()) && z.amax() <= tol {
                    // dependent but consistent equality
                    break;
                }
                let mut t1 = f64::INFINITY;
                let mut k_drop = None;
                for (k, &(ci, _)) in active.iter().enumerate() {
                    if ci >= self.n_eq && r[k] > 0.0 {
                        let t = u[k] / r[k];
                        if t < t1 {
                            t1 = t;
                            k_drop = Some(k);
                        }
                    }
                }
                let zn = z.dot(&np);
                let t2 = if zn > 1e-14 * np.norm_squared() {
                    (-sp / zn).max(0.0)
                } else {
                    f64::INFINITY
                };
                let t = t1.min(t2);
                if !t.is_finite() {
                    return self.finish(x, &active, &u, DualStatus::Infeasible, iterations);
                }
                for k in 0..q {
                    u[k] -= t * r[k];
                }
                up += t;
                if t2.is_finite() {
                    x += &z * t;
                }
                if t2 <= t1 {
                    if !f.add(&mut d) {
                        return self.finish(x, &active, &u, DualStatus::Infeasible, iterations);
                    }
                    active.push((p, sign));
                    u.push(up);
                    is_active[p] = true;
                    break;
                }
                let k = k_drop.expect("finite partial step has a blocking constraint");
                f.drop(k);
                is_active[active[k].0] = false;
                active.remove(k);
                u.remove(k);
            }
        }
        self.finish(x, &active, &u, DualStatus::Solved, iterations)
    }

    fn finish(
        &self,
        x: DVector<f64>,
        active: &[(usize, f64)],
        u: &[f64],
        status: DualStatus,
        iterations: usize,
    ) -> DualSolution {
        let mut full = DVector::zeros(self.c.nrows());
        for (&(i, sign), &ui) in active.iter().zip(u) {
            full[i] = sign * ui;
        }
        DualSolution {
            x,
            u: full,
            status,
            iterations,
        }
    }
}
