//! One line per acceptance criterion; exits non-zero when any criterion fails.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use arp_core::driver::{audit_run, solve, theoretical_eval_bound, SolverConfig, SolverReport, SolverStatus};
use arp_core::hermite::{embed_instance, hermite_interpolate, EmbeddingKind, SlowInstance};
use arp_core::optimality::{phi_order2, phi_univariate};
use arp_core::oracle::DifferentiableOracle;
use arp_core::problems::{hancock_peano, registry};
use arp_core::region::FeasibleRegion;
use arp_core::sweep::sweep_slow;
use arp_core::{regpower_derivative_norm, SymmetricTensor, TaylorModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{brute_norm, fd_power_derivative, line_grid_min, polar_grid_min};

const PAIRS: [(usize, usize); 6] = [(1, 1), (2, 1), (2, 2), (3, 1), (3, 2), (3, 3)];
const SUITE_EPS: [f64; 4] = [1e-1, 1e-2, 1e-3, 1e-4];
const SUITE_MAX_ITERATIONS: usize = 10_000;

type Outcome = Result<String, String>;
type Check = (&'static str, fn() -> Outcome);

fn prescribed_run(inst: &SlowInstance) -> Result<(SolverReport, SolverConfig), String> {
    let mut c = SolverConfig::prescribed(inst.p(), inst.q(), inst.epsilon()).map_err(|e| e.to_string())?;
    c.max_iterations = inst.k_eps() + 10;
    let region = FeasibleRegion::whole_space(1).map_err(|e| e.to_string())?;
    let rep = solve(inst.interpolant(), &region, &[0.0], &c).map_err(|e| e.to_string())?;
    Ok((rep, c))
}

fn exact_lower_bound() -> Outcome {
    let mut cases = 0;
    for (p, q) in PAIRS {
        for eps in [0.5, 0.25, 0.1] {
            let inst = SlowInstance::build(p, q, eps).map_err(|e| e.to_string())?;
            let (rep, _) = prescribed_run(&inst)?;
            let k = inst.k_eps();
            let step1_at_k = rep.status == SolverStatus::ConvergedStep1 && rep.trace.len() == k;
            if rep.successful != k || rep.unsuccessful != 0 || !step1_at_k {
                return Err(format!(
                    "p={p} q={q} eps={eps}: {} successful, {} unsuccessful, status {}, k_eps = {k}",
                    rep.successful,
                    rep.unsuccessful,
                    rep.status.as_str()
                ));
            }
            cases += 1;
        }
    }
    Ok(format!("{cases} cases with exactly k_eps successful iterations"))
}

fn lower_bound_slope() -> Outcome {
    let start = Instant::now();
    let grid: Vec<f64> = (2..=7).map(|e| 2f64.powi(-e)).collect();
    let mut slopes = Vec::new();
    let mut bad = Vec::new();
    for (p, q) in PAIRS {
        let res = sweep_slow(p, q, &grid).map_err(|e| e.to_string())?;
        let fit = res.fits.first().ok_or(format!("no fit for p={p} q={q}"))?.fit;
        let target = (p + 1) as f64 / (p - q + 1) as f64;
        slopes.push(format!("({p},{q}) {:.3}/{target:.3}", fit.slope));
        if (fit.slope - target).abs() > 0.15 {
            bad.push(format!("p={p} q={q}: slope {:.4}, target {target:.4}", fit.slope));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    if secs >= 60.0 {
        bad.push(format!("took {secs:.1} s"));
    }
    if bad.is_empty() {
        Ok(format!("{} in {secs:.1} s", slopes.join(", ")))
    } else {
        Err(bad.join("; "))
    }
}

fn upper_bound_compliance() -> Outcome {
    let mut runs = 0;
    let mut worst: f64 = 0.0;
    for spec in registry() {
        let Some(f_low) = spec.f_low else { continue };
        for &(p, q) in &spec.pairs {
            let Some(l) = spec.lipschitz(p) else { continue };
            for eps in SUITE_EPS {
                let mut c = SolverConfig::new(p, q, eps).map_err(|e| e.to_string())?;
                c.max_iterations = SUITE_MAX_ITERATIONS;
                let rep = solve(&spec.oracle(), &spec.region, &spec.x0, &c).map_err(|e| format!("{}: {e}", spec.name))?;
                let bound = theoretical_eval_bound(&c, rep.f0, f_low, l).map_err(|e| e.to_string())?;
                let most = rep.counts.derivs.iter().copied().chain([rep.counts.f]).max().unwrap_or(0);
                if rep.status == SolverStatus::IterationCap || most as f64 > bound {
                    return Err(format!(
                        "{} p={p} q={q} eps={eps}: {} evaluations, bound {bound:e}, status {}",
                        spec.name,
                        most,
                        rep.status.as_str()
                    ));
                }
                worst = worst.max(most as f64 / bound);
                runs += 1;
            }
        }
    }
    Ok(format!("{runs} runs, largest count/bound ratio {worst:.2e}"))
}

fn coordinate(x: &[f64], dir: &[f64]) -> f64 {
    x.iter().zip(dir).map(|(a, b)| a * b).sum()
}

fn compare_traces(base: &SolverReport, lifted: &SolverReport, dir: &[f64]) -> Result<f64, String> {
    if base.trace.len() != lifted.trace.len() || base.status != lifted.status {
        return Err(format!(
            "{} iterations ({}) against {} ({})",
            lifted.trace.len(),
            lifted.status.as_str(),
            base.trace.len(),
            base.status.as_str()
        ));
    }
    let mut worst: f64 = 0.0;
    for (a, b) in base.trace.iter().zip(&lifted.trace) {
        if a.successful != b.successful {
            return Err(format!("iteration {}: acceptance differs", a.k));
        }
        worst = worst.max((coordinate(&b.x, dir) - a.x[0]).abs());
    }
    worst = worst.max((coordinate(&lifted.x, dir) - base.x[0]).abs());
    if worst > 1e-12 {
        return Err(format!("coordinate deviation {worst:e}"));
    }
    Ok(worst)
}

fn embedding_equivalence() -> Outcome {
    let ray_dir = [0.6, 0.8];
    let space_dir = [0.48, 0.6, 0.64];
    let mut worst: f64 = 0.0;
    let mut runs = 0;
    for (p, q) in PAIRS {
        for eps in [0.5, 0.25] {
            let inst = SlowInstance::build(p, q, eps).map_err(|e| e.to_string())?;
            let (base, c) = prescribed_run(&inst)?;
            let mut targets = vec![(EmbeddingKind::Ray, &ray_dir[..])];
            // n-dimensional steps and measures exist for p ≤ 2, q ≤ 2 only
            if p <= 2 && q <= 2 {
                targets.push((EmbeddingKind::WholeSpace, &space_dir[..]));
            }
            for (kind, dir) in targets {
                let (oracle, region) = embed_instance(&inst, dir.len(), dir, kind).map_err(|e| e.to_string())?;
                let rep = solve(&oracle, &region, &vec![0.0; dir.len()], &c).map_err(|e| e.to_string())?;
                let dev = compare_traces(&base, &rep, dir).map_err(|e| format!("p={p} q={q} eps={eps} {kind:?}: {e}"))?;
                worst = worst.max(dev);
                runs += 1;
            }
        }
    }
    Ok(format!("{runs} lifted runs, largest coordinate deviation {worst:e}"))
}

fn hermite_suite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for p in 1..=4 {
        for _ in 0..100 {
            let f0: Vec<f64> = (0..=p).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let f1: Vec<f64> = (0..=p).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let s = rng.gen_range(0.25..2.0);
            let seg = hermite_interpolate(&f0, &f1, s).map_err(|e| e.to_string())?;
            let res = seg.end_residual(&f0, &f1);
            if res.is_nan() || res > 1e-7 {
                return Err(format!("p={p}: end residual {res:e}"));
            }
            worst = worst.max(res);
        }
    }
    let mut segments = 0;
    for (p, q) in PAIRS {
        for eps in [0.5, 0.25, 0.1] {
            let inst = SlowInstance::build(p, q, eps).map_err(|e| e.to_string())?;
            let certs = inst.certify_segments().map_err(|e| format!("p={p} q={q} eps={eps}: {e}"))?;
            segments += certs.len();
        }
    }
    Ok(format!("400 random problems, largest residual {worst:.1e}; {segments} slow-instance segments certified"))
}

fn regpower_formula() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut checked = 0;
    let mut groups = 0;
    let mut failing: Vec<String> = Vec::new();
    for n in 1..=3 {
        for p in 1..=3 {
            for beta in [0.5, 1.0] {
                for j in 0..=2 {
                    let mut worst: f64 = 0.0;
                    for _ in 0..50 {
                        let s: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.5..1.5)).collect();
                        let r = s.iter().map(|x| x * x).sum::<f64>().sqrt();
                        if r < 0.2 {
                            continue;
                        }
                        let formula = regpower_derivative_norm(p, beta, j, r).map_err(|e| e.to_string())?;
                        let brute = brute_norm(j, n, &fd_power_derivative(p as f64 + beta, j, &s));
                        worst = worst.max((formula - brute).abs() / brute);
                        checked += 1;
                    }
                    groups += 1;
                    if worst > 1e-4 {
                        failing.push(format!("p={p} beta={beta} j={j} n={n} (rel. error {worst:.2})"));
                    }
                }
            }
        }
    }
    if failing.is_empty() {
        Ok(format!("{checked} points within 1e-4"))
    } else {
        Err(format!(
            "{} of {groups} (p, beta, j, n) groups disagree over {checked} points: {}",
            failing.len(),
            failing.join(", ")
        ))
    }
}

fn phi_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let region2 = FeasibleRegion::whole_space(2).map_err(|e| e.to_string())?;
    let mut worst2: f64 = 0.0;
    for case in 0..50 {
        let (g, h, delta) = match case {
            // hard case: gradient orthogonal to the leftmost eigenvector
            0 => ([0.0, 0.5], [[-1.0, 0.0], [0.0, 2.0]], 1.0),
            1 => ([0.0, 0.0], [[-2.0, 0.0], [0.0, 1.0]], 0.7),
            _ => {
                let off = rng.gen_range(-2.0..2.0);
                (
                    [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)],
                    [[rng.gen_range(-2.0..2.0), off], [off, rng.gen_range(-2.0..2.0)]],
                    rng.gen_range(0.2..=1.0),
                )
            }
        };
        let hess = SymmetricTensor::from_entries(2, 2, vec![h[0][0], h[0][1], h[1][1]]).map_err(|e| e.to_string())?;
        let (phi, _) = phi_order2(&g, &hess, delta, &region2, &[0.0, 0.0]).map_err(|e| e.to_string())?;
        let grid = -polar_grid_min(&g, &h, delta);
        let err = (phi - grid).abs();
        if err > 1e-4 {
            return Err(format!("second-order case {case}: phi {phi:e}, grid {grid:e}"));
        }
        worst2 = worst2.max(err);
    }
    let region1 = FeasibleRegion::whole_space(1).map_err(|e| e.to_string())?;
    let mut worst1: f64 = 0.0;
    for case in 0..100 {
        let deg = rng.gen_range(1..=4);
        let derivs: Vec<f64> = (0..deg).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let delta = rng.gen_range(0.1..=1.0);
        let t = TaylorModel::univariate(0.0, 0.0, &derivs);
        let (phi, _) = phi_univariate(&t, deg, delta, &region1).map_err(|e| e.to_string())?;
        let grid = -line_grid_min(&derivs, delta, 100_000);
        let err = (phi - grid).abs();
        if err > 1e-8 || phi < grid - 1e-12 {
            return Err(format!("univariate case {case}: phi {phi:e}, grid {grid:e}"));
        }
        worst1 = worst1.max(err);
    }
    Ok(format!("50 trust-region cases within {worst2:.1e}, 100 polynomials within {worst1:.1e}"))
}

fn run_audits() -> Outcome {
    let mut runs = 0;
    let mut iterations = 0;
    for spec in registry() {
        let oracle = spec.oracle();
        for &(p, q) in &spec.pairs {
            for eps in SUITE_EPS {
                let mut c = SolverConfig::new(p, q, eps).map_err(|e| e.to_string())?;
                c.max_iterations = SUITE_MAX_ITERATIONS;
                let rep = solve(&oracle, &spec.region, &spec.x0, &c).map_err(|e| format!("{}: {e}", spec.name))?;
                let audit = audit_run(&rep, spec.lipschitz(p), &c).map_err(|e| e.to_string())?;
                if let Some(fail) = audit.failures().next() {
                    return Err(format!("{} p={p} q={q} eps={eps}: {} ({})", spec.name, fail.name, fail.detail));
                }
                runs += 1;
                iterations += rep.total_iterations();
            }
        }
    }
    Ok(format!("{runs} adaptive runs, {iterations} iterations audited"))
}

fn hancock_peano_property() -> Outcome {
    let f = hancock_peano();
    let value = |x: f64, y: f64| f.value(&[x, y]).expect("two-dimensional point");
    if value(0.0, 0.0) != 0.0 {
        return Err("f(0) is not zero".into());
    }
    let arc_negative = (1..=500).all(|i| {
        let t = 0.5 * i as f64 / 500.0;
        value(t, 0.75 * t * t) < 0.0
    });
    let mut not_global = Vec::new();
    let mut not_local = 0;
    for deg in 0..360 {
        let th = (deg as f64).to_radians();
        let (c, s) = (th.cos(), th.sin());
        let line: Vec<(f64, f64)> = (0..=2000)
            .map(|i| {
                let t = -1.0 + i as f64 / 1000.0;
                (t, value(t * c, t * s))
            })
            .collect();
        let (t_min, v_min) = line.iter().copied().fold((0.0, 0.0), |a, b| if b.1 < a.1 { b } else { a });
        if v_min < 0.0 {
            not_global.push((deg, t_min, v_min));
        }
        if line.iter().any(|&(t, v)| t.abs() <= 1e-2 && v < 0.0) {
            not_local += 1;
        }
    }
    let arc = if arc_negative { "f(t, 3t^2/4) < 0 on (0, 0.5]" } else { "arc check failed" };
    match not_global.first() {
        None if arc_negative => Ok(format!("{arc}; origin minimizes all 360 lines")),
        None => Err(arc.into()),
        Some(&(deg, t, v)) => Err(format!(
            "{arc}; origin is a local line minimizer in {} of 360 directions but the global minimizer on [-1,1] in only {} \
             (e.g. {deg} degrees: f = {v:.2e} at t = {t})",
            360 - not_local,
            360 - not_global.len()
        )),
    }
}

fn main() -> ExitCode {
    let criteria: [Check; 9] = [
        ("exact lower-bound iteration counts", exact_lower_bound),
        ("lower-bound slopes", lower_bound_slope),
        ("upper-bound compliance", upper_bound_compliance),
        ("ray and whole-space embedding equivalence", embedding_equivalence),
        ("Hermite interpolation suite", hermite_suite),
        ("regularization-power derivative norms", regpower_formula),
        ("optimality-measure grid oracles", phi_oracles),
        ("run audits", run_audits),
        ("Hancock-Peano line property", hancock_peano_property),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = check();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {} {name}: PASS [{secs:.1} s] {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {} {name}: FAIL [{secs:.1} s] {detail}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
