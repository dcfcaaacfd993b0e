//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails or exceeds its time budget.

use std::collections::BTreeSet;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use vtol_ftc::alloc::{
    allocate, linearize_effectiveness, AllocationProblem, EffectivenessMatrix, FailureMode, FailureSet,
};
use vtol_ftc::detector::{run_offline, DetectorConfig, RlsEstimator};
use vtol_ftc::exec::{self, Execution};
use vtol_ftc::harness::{
    battery_scenarios, convergence_time, detect_stream, report_output, battery_cases, ReportOptions, SyntheticPlant,
    DEFAULT_BAND, FAILURE_TIME,
};
use vtol_ftc::sim::{level_flight_requirement, run_scenario, wrench_from_actuators, VehicleParams};
use vtol_ftc::telemetry::Telemetry;

type Check = Result<String, String>;
type Criterion = (&'static str, Duration, fn() -> Check);

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

fn rls_matches_batch() -> Check {
    let (a, b) = ([1.5, -0.7], [1.0, 0.5]);
    let n = 500;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let u: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let mut y = vec![0.0; n];
    for t in 2..n {
        y[t] = a[0] * y[t - 1] + a[1] * y[t - 2] + b[0] * u[t - 1] + b[1] * u[t - 2];
    }
    let phi = |t: usize| DVector::from_vec(vec![y[t - 1], y[t - 2], u[t - 1], u[t - 2]]);

    let config = DetectorConfig::default();
    let mut rls = RlsEstimator::new(config.arx, 1.0, config.cov_init).map_err(|e| e.to_string())?;
    for (t, &yt) in y.iter().enumerate().skip(2) {
        rls.update(&phi(t), yt).map_err(|e| e.to_string())?;
    }

    let rows = n - 2;
    let x = DMatrix::from_fn(rows, 4, |r, c| phi(r + 2)[c]);
    let target = DVector::from_fn(rows, |r, _| y[r + 2]);
    let batch = x.clone().svd(true, true).solve(&target, 1e-14).map_err(|e| e.to_string())?;
    let truth = DVector::from_vec(vec![a[0], a[1], b[0], b[1]]);

    let vs_truth = (rls.theta() - &truth).amax();
    let vs_batch = (rls.theta() - &batch).amax();
    ensure(vs_truth <= 1e-6, || format!("error vs truth {vs_truth:.2e}"))?;
    ensure(vs_batch <= 1e-8, || format!("error vs batch {vs_batch:.2e}"))?;
    Ok(format!("max error vs truth {vs_truth:.1e}, vs batch {vs_batch:.1e}"))
}

fn detection_latency() -> Check {
    let config = DetectorConfig::default();
    ensure(config.monitor.z_threshold == 5.0 && config.monitor.debounce == 3, || "unexpected tuning".into())?;
    let seeds = 100u64;
    let fault_at = 500usize;
    let per_seed = exec::map_range(Execution::Parallel, seeds as usize, |i| {
        let seed = 1000 + i as u64;
        let faulty = SyntheticPlant { fault_at: Some(fault_at), ..Default::default() }.generate(seed);
        let events = detect_stream(&faulty, &config).map_err(|e| e.to_string())?;
        let early = events.iter().filter(|e| e.time <= fault_at as f64).count();
        let on_time = events.iter().any(|e| e.time > fault_at as f64 && e.time <= (fault_at + 20) as f64);
        let healthy = SyntheticPlant { samples: 10_000, ..Default::default() }.generate(seed + 1_000_000);
        let false_alarms = detect_stream(&healthy, &config).map_err(|e| e.to_string())?.len();
        Ok::<_, String>((on_time, early + false_alarms))
    });
    let per_seed: Vec<(bool, usize)> = per_seed.into_iter().collect::<Result<_, _>>()?;
    let hits = per_seed.iter().filter(|(hit, _)| *hit).count();
    let false_alarms: usize = per_seed.iter().map(|(_, f)| f).sum();
    ensure(hits * 100 >= 95 * seeds as usize, || format!("only {hits}/{seeds} detected within 20 samples"))?;
    ensure(false_alarms == 0, || format!("{false_alarms} false alarms"))?;
    Ok(format!("{hits}/{seeds} detected within 20 samples, 0 false alarms"))
}

/// Minimum of `(u − t)ᵀ R (u − t)` subject to `A (u − t) = rhs` and the
/// box, by enumerating every free/lower/upper pattern. `A` must have full
/// row rank; on each pattern the weighted least-norm step comes from the
/// normal equations of the free columns.
fn brute_force_cost(a: &DMatrix<f64>, rhs: &DVector<f64>, t: &[f64], r: &[f64], lo: &[f64], hi: &[f64]) -> Option<f64> {
    let n = t.len();
    let mut best: Option<f64> = None;
    for pattern in 0..3usize.pow(n as u32) {
        let mut code = pattern;
        let mut u = vec![0.0; n];
        let mut free = Vec::new();
        for i in 0..n {
            match code % 3 {
                0 => free.push(i),
                1 => u[i] = lo[i],
                _ => u[i] = hi[i],
            }
            code /= 3;
        }
        let mut rest = rhs.clone();
        for i in (0..n).filter(|i| !free.contains(i)) {
            rest -= a.column(i) * (u[i] - t[i]);
        }
        if !free.is_empty() {
            // z = R^{1/2} du on the free set; M z = rest.
            let m = DMatrix::from_fn(a.nrows(), free.len(), |row, k| a[(row, free[k])] / r[free[k]].sqrt());
            let z = if free.len() >= a.nrows() {
                m.transpose() * (&m * m.transpose()).lu().solve(&rest)?
            } else {
                (m.transpose() * &m).lu().solve(&(m.transpose() * &rest))?
            };
            for (k, &i) in free.iter().enumerate() {
                u[i] = t[i] + z[k] / r[i].sqrt();
            }
        }
        let du = DVector::from_fn(n, |i, _| u[i] - t[i]);
        let feasible = (a * &du - rhs).norm() <= 1e-10 * (1.0 + rhs.norm())
            && (0..n).all(|i| u[i] >= lo[i] - 1e-12 && u[i] <= hi[i] + 1e-12);
        if feasible {
            let cost: f64 = (0..n).map(|i| r[i] * du[i] * du[i]).sum();
            best = Some(best.map_or(cost, |c: f64| c.min(cost)));
        }
    }
    best
}

fn allocation_optimality() -> Check {
    let outcomes = exec::map_range(Execution::Parallel, 1000, |i| {
        let mut rng = ChaCha8Rng::seed_from_u64(20_000 + i as u64);
        let n = rng.random_range(2..=4);
        // B = L·A with L of full column rank, so B·du = dw iff A·du = A·(target − trim).
        let factor = gaussian_matrix(&mut rng, 2, n);
        let b = gaussian_matrix(&mut rng, 6, 2) * &factor;
        let lo: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..-0.1)).collect();
        let hi: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
        let trim: Vec<f64> = (0..n).map(|i| rng.random_range(lo[i]..hi[i])).collect();
        let target: Vec<f64> = (0..n).map(|i| rng.random_range(lo[i]..hi[i])).collect();
        let r: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..2.0)).collect();
        let step = DVector::from_fn(n, |k, _| target[k] - trim[k]);
        let dw = &b * &step;

        let names = (0..n).map(|k| format!("a{k}")).collect();
        let layout = vtol_ftc::alloc::ActuatorLayout::new(names, lo.clone(), hi.clone(), trim.clone())
            .map_err(|e| e.to_string())?;
        let matrix = EffectivenessMatrix::new(b.clone(), DVector::from_column_slice(&trim)).map_err(|e| e.to_string())?;
        let problem = AllocationProblem::new(matrix, dw.clone(), layout, DVector::from_column_slice(&r));
        let result = allocate(&problem).map_err(|e| e.to_string())?;
        let oracle = brute_force_cost(&factor, &(&factor * &step), &trim, &r, &lo, &hi).ok_or_else(|| format!("instance {i}: oracle found nothing"))?;
        Ok::<_, String>(((result.cost - oracle).abs(), result.kkt_residual, result.fallback))
    });
    let outcomes: Vec<(f64, f64, bool)> = outcomes.into_iter().collect::<Result<_, _>>()?;
    let cost_gap = outcomes.iter().map(|o| o.0).fold(0.0, f64::max);
    let kkt = outcomes.iter().map(|o| o.1).fold(0.0, f64::max);
    let fallbacks = outcomes.iter().filter(|o| o.2).count();
    ensure(fallbacks == 0, || format!("{fallbacks} feasible instances fell back"))?;
    ensure(cost_gap <= 1e-6, || format!("cost gap {cost_gap:.2e}"))?;
    ensure(kkt <= 1e-9, || format!("KKT residual {kkt:.2e}"))?;
    Ok(format!("max cost gap {cost_gap:.1e}, max KKT residual {kkt:.1e}"))
}

fn wrench_preservation() -> Check {
    let outcomes = exec::map_range(Execution::Parallel, 1000, |i| {
        let mut rng = ChaCha8Rng::seed_from_u64(40_000 + i as u64);
        let n = 11;
        let b = gaussian_matrix(&mut rng, 6, n);
        let lo = vec![-1.0; n];
        let hi = vec![1.0; n];
        let trim: Vec<f64> = (0..n).map(|_| rng.random_range(-0.3..0.3)).collect();
        let target: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let dw = &b * DVector::from_fn(n, |k, _| target[k] - trim[k]);
        let layout = vtol_ftc::alloc::ActuatorLayout::new((0..n).map(|k| format!("a{k}")).collect(), lo, hi, trim.clone())
            .map_err(|e| e.to_string())?;
        let matrix = EffectivenessMatrix::new(b.clone(), DVector::from_column_slice(&trim)).map_err(|e| e.to_string())?;
        let result = allocate(&AllocationProblem::new(matrix, dw.clone(), layout, DVector::from_element(n, 1.0)))
            .map_err(|e| e.to_string())?;
        let du = DVector::from_fn(n, |k, _| result.u_sp[k] - trim[k]);
        Ok::<_, String>(((b * du - dw).norm(), result.fallback))
    });
    let outcomes: Vec<(f64, bool)> = outcomes.into_iter().collect::<Result<_, _>>()?;
    let checked: Vec<f64> = outcomes.iter().filter(|o| !o.1).map(|o| o.0).collect();
    let worst = checked.iter().copied().fold(0.0, f64::max);
    ensure(worst <= 1e-6, || format!("wrench error {worst:.2e}"))?;
    Ok(format!("{} instances without fallback, max wrench error {worst:.1e}", checked.len()))
}

fn elevator_lock_identity() -> Check {
    let params = VehicleParams::default();
    let speed = 18.0;
    let (_, q) = level_flight_requirement(&params, speed);
    let mut trim = params.cruise_trim(speed);
    let elevator = params.actuator_names().iter().position(|n| n == "elevator").ok_or("no elevator")?;
    trim[elevator] = 0.0;
    let matrix = linearize_effectiveness(|u| wrench_from_actuators(&params, u, q), &trim, &params.linearization_steps())
        .map_err(|e| e.to_string())?;
    let b = matrix.matrix.clone();
    let layout = params.layout(&trim).map_err(|e| e.to_string())?;
    let lock = 6f64.to_radians();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        // Reachable wrench with the elevator at its locked value.
        let target = DVector::from_fn(trim.len(), |k, _| {
            if k == elevator {
                lock
            } else {
                let span = layout.u_max[k] - layout.u_min[k];
                (trim[k] + rng.random_range(-0.05..0.05) * span).clamp(layout.u_min[k], layout.u_max[k])
            }
        });
        let dw = &b * (&target - DVector::from_column_slice(&trim));
        let mut problem =
            AllocationProblem::new(matrix.clone(), dw.clone(), layout.clone(), DVector::from_vec(params.default_weights()));
        problem.failures = FailureSet::new(vec![(elevator, FailureMode::Locked(lock))]);
        let result = allocate(&problem).map_err(|e| e.to_string())?;
        ensure(!result.fallback, || "fell back on a reachable wrench".into())?;
        ensure(result.u_sp[elevator] == lock, || format!("elevator at {}", result.u_sp[elevator]))?;
        let du = DVector::from_fn(trim.len(), |k, _| result.u_sp[k] - trim[k]);
        worst = worst.max((&b * du - dw).norm());
    }
    ensure(worst <= 1e-9, || format!("wrench error {worst:.2e}"))?;
    Ok(format!("100 wrenches, max error {worst:.1e}"))
}

fn max_abs(log: &Telemetry, column: &str) -> Result<f64, String> {
    let v = log.column(column).ok_or_else(|| format!("no {column} column"))?;
    Ok(v.iter().map(|x| x.abs()).fold(0.0, f64::max))
}

fn hover_motor_cutoff() -> Check {
    let case = battery_cases().into_iter().find(|c| c.name == "hover_motor_cut").ok_or("case missing")?;
    let runs = exec::map(Execution::Parallel, &[true, false], |&informed| run_scenario(&case.scenario(informed)));
    let mut runs = runs.into_iter();
    let informed = runs.next().ok_or("no run")?.map_err(|e| e.to_string())?;
    let unaware = runs.next().ok_or("no run")?.map_err(|e| e.to_string())?;

    ensure(!informed.summary.crashed, || "informed run crashed".into())?;
    let roll = max_abs(&informed.telemetry, "roll_deg")?;
    let pitch = max_abs(&informed.telemetry, "pitch_deg")?;
    ensure(roll <= 30.0 && pitch <= 30.0, || format!("max |roll| {roll:.1}, |pitch| {pitch:.1}"))?;
    let settle = convergence_time(&informed.telemetry, FAILURE_TIME, DEFAULT_BAND).ok_or("no convergence time")?;
    ensure(settle > 0.0 && settle <= 20.0, || format!("convergence time {settle:.2} s"))?;
    ensure(unaware.summary.crashed, || "unaware run did not crash".into())?;
    Ok(format!(
        "informed max |roll| {roll:.1} deg, |pitch| {pitch:.1} deg, settles in {settle:.2} s; unaware crashes at {:.2} s",
        unaware.summary.crash_time.unwrap_or(f64::NAN)
    ))
}

fn failure_battery() -> Check {
    let scenarios = battery_scenarios();
    let runs = exec::map(Execution::Parallel, &scenarios, run_scenario);
    let mut lines = Vec::new();
    for (pair, case) in runs.chunks(2).zip(battery_cases()) {
        let informed = pair[0].as_ref().map_err(|e| e.to_string())?;
        let unaware = pair[1].as_ref().map_err(|e| e.to_string())?;
        ensure(!informed.summary.crashed, || format!("{} crashed", case.name))?;
        let (a, b) = (informed.summary.max_attitude_error_deg, unaware.summary.max_attitude_error_deg);
        ensure(a < b, || format!("{}: informed {a:.2} deg not below unaware {b:.2} deg", case.name))?;
        lines.push(format!("{} {a:.2}<{b:.2}", case.name));
    }
    Ok(lines.join(", "))
}

fn end_to_end() -> Check {
    let case = battery_cases().into_iter().find(|c| c.name == "hover_motor_cut").ok_or("case missing")?;
    let scenario = case.scenario(true);
    let out = run_scenario(&scenario).map_err(|e| e.to_string())?;

    // Channels whose torque axis the cut motor drives.
    let params = &scenario.vehicle;
    let trim = params.hover_trim();
    let motor = params.actuator_names().iter().position(|n| *n == case.actuator).ok_or("motor missing")?;
    let b = linearize_effectiveness(|u| wrench_from_actuators(params, u, 0.0), &trim, &params.linearization_steps())
        .map_err(|e| e.to_string())?;
    let affected: BTreeSet<&str> = ["roll", "pitch", "yaw"]
        .into_iter()
        .enumerate()
        .filter(|(axis, _)| b.matrix[(3 + axis, motor)].abs() > 1e-9)
        .map(|(_, c)| c)
        .collect();

    let hit = out
        .summary
        .detections
        .iter()
        .find(|e| e.time > 10.0 && e.time <= 12.0 && affected.contains(e.channel.as_str()))
        .ok_or_else(|| format!("no detection in (10, 12] s on {affected:?}"))?
        .clone();

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let report = report_output(&scenario, &out, &ReportOptions::new(dir.path())).map_err(|e| e.to_string())?;
    let log = Telemetry::load(&report.artifacts[0]).map_err(|e| e.to_string())?;
    let offline = run_offline(&log, &scenario.detector.channels, &scenario.detector.config, Execution::Parallel)
        .map_err(|e| e.to_string())?;
    let same = offline.events.len() == out.summary.detections.len()
        && offline.events.iter().zip(&out.summary.detections).all(|(a, b)| {
            a.channel == b.channel
                && a.time.to_bits() == b.time.to_bits()
                && a.z_score.to_bits() == b.z_score.to_bits()
                && a.residual.to_bits() == b.residual.to_bits()
        });
    ensure(same, || format!("offline replay gave {:?}, online {:?}", offline.events, out.summary.detections))?;
    Ok(format!(
        "first detection {} at {:.2} s, {} events reproduced bit for bit",
        hit.channel,
        hit.time,
        offline.events.len()
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("recursive estimate matches batch least squares", Duration::from_secs(1), rls_matches_batch),
        ("gain loss detected within 20 samples", Duration::from_secs(10), detection_latency),
        ("allocation cost matches enumeration", Duration::from_secs(30), allocation_optimality),
        ("wrench preserved on feasible 6x11 instances", Duration::from_secs(10), wrench_preservation),
        ("locked elevator reconfiguration is exact", Duration::from_secs(10), elevator_lock_identity),
        ("hover motor cutoff recovered only when informed", Duration::from_secs(60), hover_motor_cutoff),
        ("failure battery informed beats unaware", Duration::from_secs(300), failure_battery),
        ("closed-loop detection reproduced offline", Duration::from_secs(60), end_to_end),
    ];
    let mut failed = 0;
    for (k, (name, budget, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = check();
        let elapsed = start.elapsed();
        let (ok, detail) = match outcome {
            Ok(d) if elapsed <= *budget => (true, d),
            Ok(d) => (false, format!("{d}; over budget of {budget:?}")),
            Err(d) => (false, d),
        };
        if !ok {
            failed += 1;
        }
        println!("{} [{}] {name}: {detail} ({:.2?})", if ok { "PASS" } else { "FAIL" }, k + 1, elapsed);
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
