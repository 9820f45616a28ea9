use arp_core::config::load_config;
use arp_core::driver::{audit_run, solve, solve_second_order, Mode, SolverConfig, SolverStatus};
use arp_core::hermite::SlowInstance;
use arp_core::optimality::chi;
use arp_core::oracle::Counted;
use arp_core::problems::{find, registry, ProblemSpec};
use arp_core::sweep::{export, run_sweep, SweepJob, SweepProblem, SweepResult, CSV_HEADER};
use arp_core::FeasibleRegion;

fn config(p: usize, q: usize, eps: f64) -> SolverConfig {
    let mut c = SolverConfig::new(p, q, eps).unwrap();
    c.max_iterations = 10_000;
    c
}

#[test]
fn evaluation_counts_match_the_oracle_side() {
    for spec in registry().into_iter().filter(|s| s.name != "hancock-peano") {
        for &(p, q) in &spec.pairs {
            let c = config(p, q, 1e-3);
            let counted = Counted::new(spec.oracle());
            let rep = solve(&counted, &spec.region, &spec.x0, &c).unwrap();
            let seen = counted.counts();
            assert_eq!(rep.counts.f, seen.f, "{} p={p} q={q}", spec.name);
            assert_eq!(rep.counts.derivs[..p], seen.derivs[..p], "{} p={p} q={q}", spec.name);
            assert!(seen.derivs[p..].iter().all(|&n| n == 0));
            // one value at x0 plus one per trial point
            assert_eq!(seen.f, 1 + rep.total_iterations());
            if rep.status == SolverStatus::ConvergedStep1 {
                // Step 1 ran at x0 and after every success; orders above q skip the final, terminating visit
                for j in 1..=p {
                    let expect = if j <= q { rep.successful + 1 } else { rep.successful };
                    assert_eq!(seen.derivs[j - 1], expect, "{} p={p} q={q} order {j}", spec.name);
                }
            }
        }
    }
}

#[test]
fn second_order_variant_reproduces_the_general_driver() {
    let mut problems: Vec<ProblemSpec> = registry()
        .into_iter()
        .filter(|s| s.pairs.contains(&(2, 2)) && matches!(s.region, FeasibleRegion::WholeSpace(_)))
        .collect();
    problems.push(ProblemSpec::slow(2, 2, 0.25).unwrap());
    for spec in problems {
        for eps in [1e-1, 1e-3] {
            let c = config(2, 2, eps);
            let general = solve(&spec.oracle(), &spec.region, &spec.x0, &c).unwrap();
            let special = solve_second_order(&spec.oracle(), &spec.region, &spec.x0, &c).unwrap();
            assert_eq!(general.trace.len(), special.trace.len(), "{} eps={eps}", spec.name);
            for (a, b) in general.trace.iter().zip(&special.trace) {
                assert_eq!(a.x, b.x, "{} eps={eps} iteration {}", spec.name, a.k);
                assert_eq!(a.successful, b.successful);
            }
            assert_eq!(general.x, special.x);
        }
    }
}

#[test]
fn second_order_variant_rejects_other_settings() {
    let spec = find("rosenbrock").unwrap();
    assert!(solve_second_order(&spec.oracle(), &spec.region, &spec.x0, &config(2, 1, 0.1)).is_err());
}

#[test]
fn runs_are_reproducible() {
    for name in ["rosenbrock", "convex-quadratic", "slow-p3-q2"] {
        let spec = find(name).unwrap();
        let &(p, q) = spec.pairs.last().unwrap();
        let c = config(p, q, 1e-3);
        let a = solve(&spec.oracle(), &spec.region, &spec.x0, &c).unwrap();
        let b = solve(&spec.oracle(), &spec.region, &spec.x0, &c).unwrap();
        assert_eq!(a, b, "{name}");
    }
}

#[test]
fn hancock_peano_is_unbounded_below() {
    let spec = find("hancock-peano").unwrap();
    let mut c = config(2, 2, 1e-4);
    c.max_iterations = 2_000;
    let rep = solve(&spec.oracle(), &spec.region, &spec.x0, &c).unwrap();
    assert_eq!(rep.status, SolverStatus::IterationCap);
    assert!(rep.f < -1e6);
    let accepted: Vec<f64> = rep.trace.iter().filter(|t| t.successful).map(|t| t.f_trial).collect();
    assert!(accepted.windows(2).all(|w| w[1] < w[0]));
    assert!(audit_run(&rep, None, &c).unwrap().passed());
}

#[test]
fn prescribed_sigma_sequence_is_followed() {
    let spec = find("double-well").unwrap();
    let mut c = config(2, 1, 1e-3);
    c.mode = Mode::Prescribed(vec![4.0, 8.0, 16.0]);
    let rep = solve(&spec.oracle(), &spec.region, &spec.x0, &c).unwrap();
    let sigmas: Vec<f64> = rep.trace.iter().map(|t| t.sigma).collect();
    for (k, s) in sigmas.iter().enumerate() {
        assert_eq!(*s, [4.0, 8.0, 16.0][k.min(2)]);
    }
}

#[test]
fn slow_instance_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("slow.txt");
    let inst = SlowInstance::build(3, 1, 0.25).unwrap();
    inst.save(&path).unwrap();
    let back = SlowInstance::load(&path).unwrap();
    assert_eq!(back, inst);
    let c = SolverConfig::prescribed(3, 1, 0.25).unwrap();
    let region = FeasibleRegion::whole_space(1).unwrap();
    let a = solve(inst.interpolant(), &region, &[0.0], &c).unwrap();
    let b = solve(back.interpolant(), &region, &[0.0], &c).unwrap();
    assert_eq!(a, b);
    let spec = find(path.to_str().unwrap()).unwrap();
    assert_eq!(spec.slow_instance().unwrap().k_eps(), inst.k_eps());
    std::fs::write(&path, "not an instance").unwrap();
    assert!(SlowInstance::load(&path).is_err());
}

#[test]
fn config_file_overrides_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("solver.cfg");
    std::fs::write(&path, "# tighter acceptance\neta1 = 0.2\neta2 = 0.95\nmax_iterations = 50\n").unwrap();
    let c = load_config(&path, SolverConfig::new(2, 2, 0.01).unwrap()).unwrap();
    assert_eq!((c.eta1, c.eta2, c.max_iterations), (0.2, 0.95, 50));
    assert!(load_config(&dir.path().join("missing.cfg"), c).is_err());
}

#[test]
fn export_of_an_empty_sweep_is_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("empty.csv");
    export(&SweepResult::default(), &path).unwrap();
    assert_eq!(std::fs::read_to_string(&path).unwrap(), format!("{}\n", CSV_HEADER.join(",")));
}

#[test]
fn export_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let jobs: Vec<SweepJob> = [0.5, 0.25, 0.125]
        .iter()
        .map(|&eps| SweepJob { problem: SweepProblem::Slow, p: 2, q: 1, eps, max_iterations: 100, base: None })
        .collect();
    let res = run_sweep(&jobs).unwrap();
    assert_eq!(res.rows.len(), 3);
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    let gp = export(&res, &a).unwrap();
    let mut shuffled = res.clone();
    shuffled.rows.reverse();
    export(&shuffled, &b).unwrap();
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text, std::fs::read_to_string(&b).unwrap());
    assert_eq!(text.lines().count(), 4);
    let succ: Vec<usize> = text.lines().skip(1).map(|l| l.split(',').nth(7).unwrap().parse().unwrap()).collect();
    assert_eq!(succ, vec![3, 8, 23]);
    assert!(std::fs::read_to_string(gp).unwrap().lines().count() >= 4);
}

#[test]
fn convex_quadratic_converges_quickly() {
    let spec = find("convex-quadratic").unwrap();
    for q in [1, 2] {
        let rep = solve(&spec.oracle(), &spec.region, &spec.x0, &config(2, q, 1e-6)).unwrap();
        assert!(rep.status != SolverStatus::IterationCap && rep.total_iterations() <= 5, "q={q}");
        // the quadratic is its own Taylor model, so the measure bounds the gap to the minimum
        assert!(rep.f - spec.f_low.unwrap() <= 1e-6 * chi(q, 1.0) * (1.0 + 1e-9));
    }
}

#[test]
fn quartic_has_two_global_minimizers() {
    // s²(s − 1)² = s² − 2s³ + s⁴
    let coeffs = [0.0, 0.0, 1.0, -2.0, 1.0];
    let minima: Vec<f64> = arp_core::poly::candidates_on_interval(&coeffs, -1.0, 2.0)
        .into_iter()
        .filter(|(_, v)| v.abs() <= 1e-14)
        .map(|(x, _)| x)
        .collect();
    assert!(minima.iter().any(|x| x.abs() < 1e-9) && minima.iter().any(|x| (x - 1.0).abs() < 1e-9));
    let spec = find("quartic-two-minima").unwrap();
    for x0 in [-0.7, 2.0] {
        let rep = solve(&spec.oracle(), &spec.region, &[x0], &config(4, 4, 1e-4)).unwrap();
        assert!(rep.f <= 1e-4 * chi(4, 1.0) * (1.0 + 1e-9), "x0 = {x0}: f = {}", rep.f);
    }
}
