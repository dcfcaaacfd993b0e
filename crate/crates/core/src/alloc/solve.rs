use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::qp::{kkt_residual, solve_qp, QpStatus};
use super::{reconfigure_for_failure, ActuatorLayout, AllocError, Decomposition, EffectivenessMatrix, FailureSet, Wrench};

/// Slack allowed on box constraints before the final clamp.
const BOX_TOL: f64 = 1e-12;
/// Relative trim pull in the fallback: a tie-breaker only.
pub const DEFAULT_FALLBACK_REGULARIZATION: f64 = 1e-6;
/// Distance to a bound reported as saturated.
const SATURATION_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Bound {
    Lower,
    Upper,
}

/// Solver state carried from one allocation to the next.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct WarmStart {
    /// Actuator bounds that were active, by actuator index.
    pub active: Vec<(usize, Bound)>,
}

/// Previous setpoint and control period for slew limiting.
#[derive(Debug, Clone, PartialEq)]
pub struct RateLimit {
    pub previous: DVector<f64>,
    pub dt: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationResult {
    pub u_sp: Vec<f64>,
    /// Null-space coordinates of the healthy actuators.
    pub lambda: Vec<f64>,
    pub desired: Wrench,
    /// `B · (u_sp − u_lin)` over all actuators, failed ones included.
    pub achieved: Wrench,
    pub wrench_residual: f64,
    /// `(u_sp − u_trim)ᵀ R (u_sp − u_trim)` over all actuators.
    pub cost: f64,
    pub kkt_residual: f64,
    pub iterations: usize,
    pub saturated: Vec<usize>,
    /// The box admitted no wrench-preserving solution; `u_sp` is the
    /// in-box setpoint closest to the desired wrench instead. A wrench outside
    /// the range of `B` is met in the least-squares sense without fallback.
    pub fallback: bool,
    pub active: Vec<(usize, Bound)>,
}

impl AllocationResult {
    pub fn warm_start(&self) -> WarmStart {
        WarmStart { active: self.active.clone() }
    }
}

fn check_weights(weights: &DVector<f64>, n: usize) -> Result<(), AllocError> {
    if weights.len() != n {
        return Err(AllocError::Dimension { what: "weights", expected: n, got: weights.len() });
    }
    if let Some((index, &value)) = weights.iter().enumerate().find(|(_, w)| !(**w > 0.0 && w.is_finite())) {
        return Err(AllocError::NonPositiveWeight { index, value });
    }
    Ok(())
}

/// Least-norm plus null-space allocation over the box `[u_min, u_max]` of
/// `layout`.
///
/// The trim in `layout` only enters the cost; it need not lie inside the box.
pub fn solve_allocation(
    matrix: &EffectivenessMatrix,
    desired: &DVector<f64>,
    layout: &ActuatorLayout,
    weights: &DVector<f64>,
    warm: Option<&WarmStart>,
) -> Result<AllocationResult, AllocError> {
    solve_allocation_weighted(matrix, desired, layout, weights, warm, &Fallback::default())
}

/// Shape of the least-squares problem solved when the box admits no exact
/// solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fallback {
    /// Weights on the wrench rows `[f; τ]`.
    pub row_weights: [f64; 6],
    /// Pull toward trim relative to the largest diagonal entry of the
    /// weighted normal matrix.
    pub regularization: f64,
}

impl Default for Fallback {
    fn default() -> Self {
        Self { row_weights: [1.0; 6], regularization: DEFAULT_FALLBACK_REGULARIZATION }
    }
}

/// [`solve_allocation`] with per-row weights on the wrench error minimized
/// when the box admits no exact solution.
pub fn solve_allocation_weighted(
    matrix: &EffectivenessMatrix,
    desired: &DVector<f64>,
    layout: &ActuatorLayout,
    weights: &DVector<f64>,
    warm: Option<&WarmStart>,
    fallback: &Fallback,
) -> Result<AllocationResult, AllocError> {
    if fallback.row_weights.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
        return Err(AllocError::InvalidLayout("fallback row weights must be positive".into()));
    }
    if !(fallback.regularization > 0.0 && fallback.regularization.is_finite()) {
        return Err(AllocError::InvalidLayout("fallback regularization must be positive".into()));
    }
    let n = layout.len();
    if matrix.ncols() != n {
        return Err(AllocError::Dimension { what: "effectiveness columns", expected: n, got: matrix.ncols() });
    }
    if desired.len() != 6 {
        return Err(AllocError::Dimension { what: "desired wrench", expected: 6, got: desired.len() });
    }
    if desired.iter().any(|v| !v.is_finite()) {
        return Err(AllocError::NonFinite("desired wrench"));
    }
    check_weights(weights, n)?;
    for what in [&layout.u_min, &layout.u_max, &layout.u_trim] {
        if what.len() != n {
            return Err(AllocError::Dimension { what: "layout", expected: n, got: what.len() });
        }
    }

    let lo = DVector::from_column_slice(&layout.u_min);
    let hi = DVector::from_column_slice(&layout.u_max);
    let trim = DVector::from_column_slice(&layout.u_trim);
    let b = &matrix.matrix;
    let lin = &matrix.linearization_point;

    let dec = Decomposition::new(b);
    let u_ln = dec.solve_least_norm(desired);
    let null = dec.null_basis();
    let k = null.ncols();
    let base = lin + &u_ln;
    let offset = &base - &trim;

    let mut outcome = None;
    let mut iterations = 0;
    let mut kkt = 0.0;
    let mut active = Vec::new();
    let mut fixed_ok = true;

    if k == 0 {
        let inside = (0..n).all(|i| base[i] >= lo[i] - BOX_TOL && base[i] <= hi[i] + BOX_TOL);
        if inside {
            outcome = Some((DVector::zeros(0), base.clone()));
        }
    } else {
        // λ problem: min ½ λᵀHλ + gᵀλ with H = NᵀRN, g = NᵀR(base − trim)
        let rn = DMatrix::from_fn(n, k, |i, j| weights[i] * null[(i, j)]);
        let h = null.transpose() * &rn;
        let g = rn.transpose() * &offset;

        let mut rows: Vec<(usize, Bound)> = Vec::with_capacity(2 * n);
        let mut c_rows: Vec<f64> = Vec::with_capacity(2 * n * k);
        let mut d: Vec<f64> = Vec::with_capacity(2 * n);
        for i in 0..n {
            let row = null.row(i);
            if row.norm() <= 1e-12 {
                // actuator fixed by the wrench; nothing λ can do about it
                if base[i] < lo[i] - BOX_TOL || base[i] > hi[i] + BOX_TOL {
                    fixed_ok = false;
                }
                continue;
            }
            rows.push((i, Bound::Lower));
            c_rows.extend(row.iter());
            d.push(lo[i] - base[i]);
            rows.push((i, Bound::Upper));
            c_rows.extend(row.iter().map(|v| -v));
            d.push(base[i] - hi[i]);
        }
        if fixed_ok {
            let c = DMatrix::from_row_slice(rows.len(), k, &c_rows);
            let d = DVector::from_vec(d);
            let warm_idx: Vec<usize> = warm
                .map(|w| {
                    w.active.iter().filter_map(|a| rows.iter().position(|r| r == a)).collect()
                })
                .unwrap_or_default();
            let sol = solve_qp(&h, &g, &c, &d, &warm_idx, 100 * k);
            iterations = sol.iterations;
            if sol.status == QpStatus::Optimal {
                kkt = kkt_residual(&h, &g, &c, &d, &sol);
                active = sol.active.iter().map(|&j| rows[j]).collect();
                let u = &base + &null * &sol.x;
                outcome = Some((sol.x, u));
            }
        }
    }

    let used_fallback = outcome.is_none();
    let (lambda, mut u) = match outcome {
        Some(v) => v,
        None => {
            let (u, iters) = closest_in_box(b, lin, desired, &trim, weights, fallback, &lo, &hi);
            iterations += iters;
            let lambda = null.transpose() * (&u - &base);
            (lambda, u)
        }
    };
    for i in 0..n {
        u[i] = u[i].clamp(lo[i], hi[i]);
    }

    let achieved = Wrench::from_slice((b * (&u - lin)).as_slice());
    let desired_w = Wrench::from_slice(desired.as_slice());
    let dev = &u - &trim;
    let cost = dev.iter().zip(weights.iter()).map(|(d, w)| w * d * d).sum();
    let saturated = (0..n)
        .filter(|&i| (u[i] - lo[i]).abs() <= SATURATION_TOL || (u[i] - hi[i]).abs() <= SATURATION_TOL)
        .collect();
    Ok(AllocationResult {
        u_sp: u.iter().copied().collect(),
        lambda: lambda.iter().copied().collect(),
        desired: desired_w,
        achieved,
        wrench_residual: (achieved - desired_w).norm(),
        cost,
        kkt_residual: kkt,
        iterations,
        saturated,
        fallback: used_fallback,
        active,
    })
}

/// In-box setpoint minimizing the row-weighted wrench error, tie-broken
/// toward trim.
#[allow(clippy::too_many_arguments)]
fn closest_in_box(
    b: &DMatrix<f64>,
    lin: &DVector<f64>,
    desired: &DVector<f64>,
    trim: &DVector<f64>,
    weights: &DVector<f64>,
    fallback: &Fallback,
    lo: &DVector<f64>,
    hi: &DVector<f64>,
) -> (DVector<f64>, usize) {
    let n = b.ncols();
    let scale = DVector::from_fn(b.nrows(), |r, _| fallback.row_weights.get(r).copied().unwrap_or(1.0).sqrt());
    let b = &DMatrix::from_fn(b.nrows(), n, |r, c| b[(r, c)] * scale[r]);
    let desired = &desired.component_mul(&scale);
    let btb = b.transpose() * b;
    let mu = fallback.regularization * btb.diagonal().max().max(1.0);
    let mut g = btb;
    for i in 0..n {
        g[(i, i)] += mu * weights[i];
    }
    let target = desired + b * lin;
    let rt = DVector::from_fn(n, |i, _| weights[i] * trim[i]);
    let a = -(b.transpose() * target + rt * mu);
    let mut c = DMatrix::zeros(2 * n, n);
    let mut d = DVector::zeros(2 * n);
    for i in 0..n {
        c[(2 * i, i)] = 1.0;
        d[2 * i] = lo[i];
        c[(2 * i + 1, i)] = -1.0;
        d[2 * i + 1] = -hi[i];
    }
    let sol = solve_qp(&g, &a, &c, &d, &[], 100 * n.max(1));
    (sol.x, sol.iterations)
}

/// A full allocation request.
#[derive(Debug, Clone, PartialEq)]
pub struct AllocationProblem {
    pub matrix: EffectivenessMatrix,
    /// Desired wrench deviation from the linearization point, `[f; τ]`.
    pub desired: DVector<f64>,
    pub layout: ActuatorLayout,
    /// Diagonal of the cost weight matrix R.
    pub weights: DVector<f64>,
    pub failures: FailureSet,
    pub rate: Option<RateLimit>,
    pub warm_start: Option<WarmStart>,
    /// Wrench rows to enforce; masked-out rows are left free.
    pub row_mask: Option<[bool; 6]>,
    /// Weights on the wrench rows when no exact solution fits the box.
    pub fallback_row_weights: [f64; 6],
    /// Weight of the pull toward trim in the fallback, relative to the
    /// largest diagonal entry of the weighted normal matrix.
    pub fallback_regularization: f64,
}

impl AllocationProblem {
    pub fn new(matrix: EffectivenessMatrix, desired: DVector<f64>, layout: ActuatorLayout, weights: DVector<f64>) -> Self {
        Self {
            matrix,
            desired,
            layout,
            weights,
            failures: FailureSet::none(),
            rate: None,
            warm_start: None,
            row_mask: None,
            fallback_row_weights: [1.0; 6],
            fallback_regularization: DEFAULT_FALLBACK_REGULARIZATION,
        }
    }
}

/// Reconfigure for failures, shrink the box by the slew limits, solve the
/// reduced problem and expand back to every actuator.
pub fn allocate(problem: &AllocationProblem) -> Result<AllocationResult, AllocError> {
    let layout = &problem.layout;
    layout.validate()?;
    let n = layout.len();
    check_weights(&problem.weights, n)?;

    let mut matrix = problem.matrix.clone();
    let mut desired = problem.desired.clone();
    if let Some(mask) = problem.row_mask {
        for (r, keep) in mask.iter().enumerate() {
            if !keep {
                matrix.matrix.row_mut(r).fill(0.0);
                if r < desired.len() {
                    desired[r] = 0.0;
                }
            }
        }
    }

    let reduced = reconfigure_for_failure(&matrix, &desired, layout, &problem.failures)?;
    let mut box_layout = reduced.layout.clone();
    if let Some(rate) = &problem.rate {
        if rate.previous.len() != n {
            return Err(AllocError::Dimension { what: "previous setpoint", expected: n, got: rate.previous.len() });
        }
        if !(rate.dt > 0.0) {
            return Err(AllocError::InvalidLayout("rate-limit dt must be positive".into()));
        }
        if let Some(limits) = &layout.rate_limit {
            for (k, &i) in reduced.healthy.iter().enumerate() {
                let step = limits[i] * rate.dt;
                let prev = rate.previous[i];
                let lo = layout.u_min[i].max(prev - step);
                let hi = layout.u_max[i].min(prev + step);
                if lo <= hi {
                    box_layout.u_min[k] = lo;
                    box_layout.u_max[k] = hi;
                } else {
                    let pinned = prev.clamp(layout.u_min[i], layout.u_max[i]);
                    box_layout.u_min[k] = pinned;
                    box_layout.u_max[k] = pinned;
                }
            }
        }
    }

    let weights_red = DVector::from_iterator(reduced.healthy.len(), reduced.healthy.iter().map(|&i| problem.weights[i]));
    let warm_red = problem.warm_start.as_ref().map(|w| WarmStart {
        active: w
            .active
            .iter()
            .filter_map(|&(i, b)| reduced.healthy.iter().position(|&h| h == i).map(|k| (k, b)))
            .collect(),
    });
    let part = solve_allocation_weighted(
        &reduced.matrix,
        &reduced.desired,
        &box_layout,
        &weights_red,
        warm_red.as_ref(),
        &Fallback { row_weights: problem.fallback_row_weights, regularization: problem.fallback_regularization },
    )?;

    let u_full = reduced.reinflate(&DVector::from_column_slice(&part.u_sp));
    let achieved = matrix.apply(&u_full);
    let desired_w = Wrench::from_slice(desired.as_slice());
    let dev = &u_full - layout.trim();
    let cost = dev.iter().zip(problem.weights.iter()).map(|(d, w)| w * d * d).sum();
    Ok(AllocationResult {
        u_sp: u_full.iter().copied().collect(),
        lambda: part.lambda,
        desired: desired_w,
        achieved,
        wrench_residual: (achieved - desired_w).norm(),
        cost,
        kkt_residual: part.kkt_residual,
        iterations: part.iterations,
        saturated: part.saturated.iter().map(|&k| reduced.healthy[k]).collect(),
        fallback: part.fallback,
        active: part.active.iter().map(|&(k, b)| (reduced.healthy[k], b)).collect(),
    })
}
