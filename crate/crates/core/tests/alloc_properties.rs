use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use vtol_ftc::alloc::{
    allocate, null_basis, ActuatorLayout, AllocationProblem, Decomposition, EffectivenessMatrix, FailureMode,
    FailureSet, RateLimit,
};

struct Instance {
    b: DMatrix<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    trim: Vec<f64>,
    weights: Vec<f64>,
    /// In-box point whose wrench is requested, so the request is feasible.
    target: Vec<f64>,
}

impl Instance {
    fn random(seed: u64, n: usize, rank: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let left = DMatrix::<f64>::from_fn(6, rank, |_, _| rng.sample(StandardNormal));
        let right = DMatrix::<f64>::from_fn(rank, n, |_, _| rng.sample(StandardNormal));
        let lo: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..-0.1)).collect();
        let hi: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
        let trim = (0..n).map(|i| rng.random_range(lo[i]..hi[i])).collect();
        let target = (0..n).map(|i| rng.random_range(lo[i]..hi[i])).collect();
        let weights = (0..n).map(|_| rng.random_range(0.5..2.0)).collect();
        Self { b: left * right, lo, hi, trim, weights, target }
    }

    fn layout(&self) -> ActuatorLayout {
        let names = (0..self.trim.len()).map(|i| format!("a{i}")).collect();
        ActuatorLayout::new(names, self.lo.clone(), self.hi.clone(), self.trim.clone()).unwrap()
    }

    fn feasible_wrench(&self) -> DVector<f64> {
        &self.b * DVector::from_fn(self.trim.len(), |i, _| self.target[i] - self.trim[i])
    }

    fn problem(&self, desired: DVector<f64>) -> AllocationProblem {
        let matrix = EffectivenessMatrix::new(self.b.clone(), DVector::from_column_slice(&self.trim)).unwrap();
        AllocationProblem::new(matrix, desired, self.layout(), DVector::from_column_slice(&self.weights))
    }
}

fn wrench_error(inst: &Instance, u: &[f64], desired: &DVector<f64>) -> f64 {
    let du = DVector::from_fn(u.len(), |i, _| u[i] - inst.trim[i]);
    (&inst.b * du - desired).norm()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn setpoints_stay_in_the_box(seed in 0u64..100_000, n in 2usize..12, rank in 1usize..=6, scale in 0.0f64..5.0) {
        let inst = Instance::random(seed, n, rank);
        // Scaling past 1 usually leaves the box and exercises the fallback.
        let desired = inst.feasible_wrench() * scale;
        let r = allocate(&inst.problem(desired)).unwrap();
        for i in 0..n {
            prop_assert!(r.u_sp[i] >= inst.lo[i] - 1e-12 && r.u_sp[i] <= inst.hi[i] + 1e-12, "u[{}] = {}", i, r.u_sp[i]);
        }
    }

    #[test]
    fn slew_limits_shrink_the_box(seed in 0u64..100_000, n in 2usize..12, dt in 0.001f64..0.05) {
        let inst = Instance::random(seed, n, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let rates: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..20.0)).collect();
        let previous: Vec<f64> = (0..n).map(|i| rng.random_range(inst.lo[i]..inst.hi[i])).collect();
        let mut problem = inst.problem(inst.feasible_wrench());
        problem.layout = problem.layout.with_rate_limit(rates.clone()).unwrap();
        problem.rate = Some(RateLimit { previous: DVector::from_column_slice(&previous), dt });
        let r = allocate(&problem).unwrap();
        for i in 0..n {
            let lo = inst.lo[i].max(previous[i] - rates[i] * dt);
            let hi = inst.hi[i].min(previous[i] + rates[i] * dt);
            prop_assert!(r.u_sp[i] >= lo - 1e-12 && r.u_sp[i] <= hi + 1e-12, "u[{}] = {} outside [{}, {}]", i, r.u_sp[i], lo, hi);
        }
    }

    #[test]
    fn failed_actuators_hold_their_value(seed in 0u64..100_000, n in 3usize..12, which in 0usize..12, lock in 0.0f64..1.0) {
        let inst = Instance::random(seed, n, 6);
        let j = which % n;
        let v = inst.lo[j] + lock * (inst.hi[j] - inst.lo[j]);
        for mode in [FailureMode::Cutoff, FailureMode::Locked(v)] {
            let mut problem = inst.problem(inst.feasible_wrench());
            problem.failures = FailureSet::new(vec![(j, mode)]);
            let r = allocate(&problem).unwrap();
            prop_assert_eq!(r.u_sp[j], mode.forced_value());
        }
    }

    #[test]
    fn null_basis_is_annihilated(seed in 0u64..100_000, n in 1usize..12, rank in 1usize..=6) {
        let inst = Instance::random(seed, n, rank);
        let basis = null_basis(&inst.b);
        let sigma_max = Decomposition::new(&inst.b).sigma_max();
        prop_assert_eq!(basis.ncols(), n - rank.min(n));
        prop_assert!((basis.transpose() * &basis - DMatrix::identity(basis.ncols(), basis.ncols())).amax() <= 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 1);
        let lambda = DVector::from_fn(basis.ncols(), |_, _| rng.sample::<f64, _>(StandardNormal));
        let image = &inst.b * (&basis * &lambda);
        prop_assert!(image.norm() <= 1e-9 * lambda.norm() * sigma_max, "{:e}", image.norm());
    }

    #[test]
    fn feasible_requests_are_met(seed in 0u64..100_000, n in 6usize..12) {
        let inst = Instance::random(seed, n, 6);
        let desired = inst.feasible_wrench();
        let r = allocate(&inst.problem(desired.clone())).unwrap();
        prop_assert!(!r.fallback);
        prop_assert!(wrench_error(&inst, &r.u_sp, &desired) <= 1e-9 * (1.0 + desired.norm()));
        prop_assert!(r.wrench_residual <= 1e-9 * (1.0 + desired.norm()));
    }

    #[test]
    fn locking_never_lowers_the_cost(seed in 0u64..100_000, n in 3usize..12, rank in 1usize..=6, which in 0usize..12, lock in 0.0f64..1.0) {
        let inst = Instance::random(seed, n, rank);
        let desired = inst.feasible_wrench();
        let healthy = allocate(&inst.problem(desired.clone())).unwrap();
        prop_assert!(!healthy.fallback);
        let j = which % n;
        let v = inst.lo[j] + lock * (inst.hi[j] - inst.lo[j]);
        let mut problem = inst.problem(desired);
        problem.failures = FailureSet::new(vec![(j, FailureMode::Locked(v))]);
        let failed = allocate(&problem).unwrap();
        // Where the locked request is still met exactly, its feasible set is a
        // subset of the healthy one.
        if !failed.fallback && failed.wrench_residual <= 1e-9 * (1.0 + problem.desired.norm()) {
            prop_assert!(failed.cost >= healthy.cost - 1e-9 * (1.0 + healthy.cost), "{} < {}", failed.cost, healthy.cost);
        }
    }
}
