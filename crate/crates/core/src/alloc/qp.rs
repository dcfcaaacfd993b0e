//! Dense strictly convex QP by the dual active-set method of Goldfarb and
//! Idnani:
//!
//! ```text
//! minimize   ½ xᵀ G x + aᵀ x
//! subject to c_jᵀ x ≥ d_j
//! ```
//!
//! Iterates stay dual feasible and the method adds violated constraints one at
//! a time, so no feasible starting point is needed and an empty feasible set
//! is reported instead of searched for. Problems here have at most a dozen
//! variables, so the projections are recomputed densely each step instead of
//! maintaining factorization updates.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpStatus {
    Optimal,
    Infeasible,
    IterationLimit,
}

#[derive(Debug, Clone)]
pub struct QpSolution {
    pub x: DVector<f64>,
    /// Indices of the constraints in the final active set.
    pub active: Vec<usize>,
    /// Multipliers of `active`, same order, all non-negative.
    pub multipliers: Vec<f64>,
    pub iterations: usize,
    pub status: QpStatus,
}

/// Constraint violation below this is treated as satisfied.
const FEAS_TOL: f64 = 1e-12;

struct Problem<'a> {
    g_inv: DMatrix<f64>,
    a: &'a DVector<f64>,
    c: &'a DMatrix<f64>,
    d: &'a DVector<f64>,
}

impl Problem<'_> {
    fn normal(&self, j: usize) -> DVector<f64> {
        self.c.row(j).transpose()
    }

    fn slack(&self, x: &DVector<f64>, j: usize) -> f64 {
        self.c.row(j).dot(&x.transpose()) - self.d[j]
    }

    fn active_normals(&self, active: &[usize]) -> DMatrix<f64> {
        let k = self.c.ncols();
        DMatrix::from_fn(k, active.len(), |r, col| self.c[(active[col], r)])
    }

    /// Minimizer with `active` held as equalities, and its multipliers.
    fn equality_solution(&self, active: &[usize]) -> Option<(DVector<f64>, DVector<f64>)> {
        let x0 = -(&self.g_inv * self.a);
        if active.is_empty() {
            return Some((x0, DVector::zeros(0)));
        }
        let n = self.active_normals(active);
        let gn = &self.g_inv * &n;
        let m = n.transpose() * &gn;
        let rhs = DVector::from_fn(active.len(), |i, _| self.d[active[i]] - n.column(i).dot(&x0));
        let mult = m.lu().solve(&rhs)?;
        let x = x0 + gn * &mult;
        Some((x, mult))
    }

    /// Primal step direction `z` and dual step `r` for adding constraint `p`.
    fn directions(&self, active: &[usize], p: usize) -> Option<(DVector<f64>, DVector<f64>)> {
        let np = self.normal(p);
        let g_np = &self.g_inv * &np;
        if active.is_empty() {
            return Some((g_np, DVector::zeros(0)));
        }
        let n = self.active_normals(active);
        let gn = &self.g_inv * &n;
        let m = n.transpose() * &gn;
        let r = m.lu().solve(&(gn.transpose() * &np))?;
        let z = g_np - gn * &r;
        Some((z, r))
    }
}

/// Solve the QP, optionally starting from a guessed active set.
///
/// `g` must be symmetric positive definite. Rows of `c` are constraint
/// normals. `warm_active` is pruned until its multipliers are non-negative
/// and its normals independent, then used as the initial active set.
pub fn solve_qp(
    g: &DMatrix<f64>,
    a: &DVector<f64>,
    c: &DMatrix<f64>,
    d: &DVector<f64>,
    warm_active: &[usize],
    max_iter: usize,
) -> QpSolution {
    let chol = Cholesky::<f64, Dyn>::new(g.clone()).expect("QP Hessian must be positive definite");
    let prob = Problem { g_inv: chol.inverse(), a, c, d };

    let (mut x, mut active, mut mult) = warm_start(&prob, warm_active);
    let mut iterations = 0;

    loop {
        iterations += 1;
        if iterations > max_iter {
            return finish(x, active, mult, iterations - 1, QpStatus::IterationLimit);
        }
        // most violated constraint, scaled by normal length
        let mut p = None;
        let mut worst = -FEAS_TOL;
        for j in 0..c.nrows() {
            if active.contains(&j) {
                continue;
            }
            let norm = c.row(j).norm().max(1e-300);
            let s = prob.slack(&x, j) / norm;
            if s < worst {
                worst = s;
                p = Some(j);
            }
        }
        let Some(p) = p else {
            return finish(x, active, mult, iterations, QpStatus::Optimal);
        };

        let mut mult_p = 0.0;
        loop {
            let Some((z, r)) = prob.directions(&active, p) else {
                return finish(x, active, mult, iterations, QpStatus::Infeasible);
            };
            let np = prob.normal(p);
            let curvature = z.dot(&np);
            let scale = np.dot(&(&prob.g_inv * &np)).max(1e-300);

            let mut partial = f64::INFINITY;
            let mut drop = None;
            for (i, &rj) in r.iter().enumerate() {
                if rj > 1e-14 {
                    let t = mult[i] / rj;
                    if t < partial {
                        partial = t;
                        drop = Some(i);
                    }
                }
            }
            let dependent = curvature <= 1e-12 * scale;
            let full = if dependent { f64::INFINITY } else { -prob.slack(&x, p) / curvature };

            if partial.is_infinite() && full.is_infinite() {
                return finish(x, active, mult, iterations, QpStatus::Infeasible);
            }
            let t = partial.min(full);
            if !dependent {
                x.axpy(t, &z, 1.0);
            }
            for (m, rj) in mult.iter_mut().zip(r.iter()) {
                *m -= t * rj;
            }
            mult_p += t;

            if full <= partial {
                active.push(p);
                mult.push(mult_p);
                break;
            }
            let i = drop.expect("finite partial step has a blocking multiplier");
            active.remove(i);
            mult.remove(i);
            iterations += 1;
            if iterations > max_iter {
                return finish(x, active, mult, iterations - 1, QpStatus::IterationLimit);
            }
        }
    }
}

fn warm_start(prob: &Problem<'_>, warm_active: &[usize]) -> (DVector<f64>, Vec<usize>, Vec<f64>) {
    let mut active: Vec<usize> = Vec::new();
    // keep independent normals only
    for &j in warm_active {
        if j >= prob.c.nrows() || active.contains(&j) || active.len() == prob.c.ncols() {
            continue;
        }
        let mut trial = active.clone();
        trial.push(j);
        let n = prob.active_normals(&trial);
        let gram = n.transpose() * &n;
        let min_eig = gram.symmetric_eigenvalues().min();
        if min_eig > 1e-10 * n.norm_squared().max(1.0) {
            active = trial;
        }
    }
    loop {
        match prob.equality_solution(&active) {
            Some((x, mult)) => {
                let (worst, val) = mult.iter().enumerate().fold((None, 0.0), |(wi, wv), (i, &m)| {
                    if m < wv {
                        (Some(i), m)
                    } else {
                        (wi, wv)
                    }
                });
                match worst {
                    Some(i) if val < 0.0 => {
                        active.remove(i);
                    }
                    _ => return (x, active, mult.iter().copied().collect()),
                }
            }
            None => {
                let (x, _) = prob.equality_solution(&[]).expect("unconstrained solve");
                return (x, Vec::new(), Vec::new());
            }
        }
    }
}

fn finish(x: DVector<f64>, active: Vec<usize>, multipliers: Vec<f64>, iterations: usize, status: QpStatus) -> QpSolution {
    QpSolution { x, active, multipliers, iterations, status }
}

/// Largest violation of the KKT conditions: stationarity, primal and dual
/// feasibility, complementarity.
pub fn kkt_residual(
    g: &DMatrix<f64>,
    a: &DVector<f64>,
    c: &DMatrix<f64>,
    d: &DVector<f64>,
    sol: &QpSolution,
) -> f64 {
    let mut grad = g * &sol.x + a;
    for (&j, &m) in sol.active.iter().zip(&sol.multipliers) {
        grad.axpy(-m, &c.row(j).transpose(), 1.0);
    }
    let mut worst = grad.amax();
    for j in 0..c.nrows() {
        let s = c.row(j).dot(&sol.x.transpose()) - d[j];
        worst = worst.max(-s);
    }
    for (&j, &m) in sol.active.iter().zip(&sol.multipliers) {
        let s = c.row(j).dot(&sol.x.transpose()) - d[j];
        worst = worst.max(-m).max((m * s).abs());
    }
    worst.max(0.0)
}
