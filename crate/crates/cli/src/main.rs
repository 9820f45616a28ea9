use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context};
use arp_core::config::load_config;
use arp_core::driver::{audit_run, solve, solve_second_order, theoretical_eval_bound, Mode, SolverConfig, SolverReport, SolverStatus};
use arp_core::hermite::{hermite_interpolate, SlowInstance};
use arp_core::problems::{find, registry, ProblemSpec};
use arp_core::sweep::{cap_grid, default_output_dir, export, parse_eps_grid, run_sweep, SweepJob, SweepProblem, SweepResult, K_EPS_CAP};
use arp_core::{factorial, ArpError, FeasibleRegion};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SLOW_PAIRS: [(usize, usize); 6] = [(1, 1), (2, 1), (2, 2), (3, 1), (3, 2), (3, 3)];

#[derive(Parser)]
#[command(name = "arp", version, about = "Adaptive regularization with high-order models")]
struct Cli {
    /// Seed for randomized subcommands; output is a function of the flags.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// `key = value` file overriding solver settings.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the solver on one problem.
    Solve(SolveArgs),
    /// Reproduce the exact iteration counts on slow-convergence instances.
    LowerBound(LowerBoundArgs),
    /// Solve over a grid of accuracies, fit the complexity slope and export CSV.
    Sweep(SweepArgs),
    /// Random Hermite interpolation round trips.
    HermiteCheck(HermiteArgs),
    /// Print the problem registry.
    ListProblems,
}

#[derive(Clone, Copy, ValueEnum)]
enum Variant {
    General,
    SecondOrder,
}

#[derive(Args)]
struct SolveArgs {
    /// Registry name, `slow-p{p}-q{q}-eps{e}`, or a saved instance file.
    #[arg(long)]
    problem: String,
    #[arg(long)]
    p: usize,
    #[arg(long)]
    q: usize,
    #[arg(long)]
    eps: f64,
    #[arg(long)]
    beta: Option<f64>,
    /// Starting point as comma-separated coordinates.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    x0: Option<Vec<f64>>,
    #[arg(long)]
    max_iterations: Option<usize>,
    /// Use the fixed weight p! instead of the adaptive update.
    #[arg(long)]
    prescribed: bool,
    #[arg(long, value_enum, default_value = "general")]
    variant: Variant,
    /// Print one line per iteration.
    #[arg(long)]
    trace: bool,
}

#[derive(Args)]
struct LowerBoundArgs {
    /// Without --p/--q/--eps, every standard case is run.
    #[arg(long, requires_all = ["q", "eps"])]
    p: Option<usize>,
    #[arg(long, requires_all = ["p", "eps"])]
    q: Option<usize>,
    #[arg(long, requires_all = ["p", "q"])]
    eps: Option<f64>,
    /// Write the instance to this file (single case only).
    #[arg(long, requires = "p")]
    save: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// `slow`, or any name accepted by `solve`.
    #[arg(long)]
    problem: String,
    /// Without --p/--q, every pair of the problem is swept.
    #[arg(long, requires = "q")]
    p: Option<usize>,
    #[arg(long, requires = "p")]
    q: Option<usize>,
    /// `2^-a..2^-b` or a comma-separated list.
    #[arg(long, default_value = "2^-2..2^-7")]
    eps_grid: String,
    #[arg(long, default_value_t = 10_000)]
    max_iterations: usize,
    /// CSV path; defaults to `sweep-<problem>.csv` in the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct HermiteArgs {
    #[arg(long)]
    p: usize,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    /// Smallest random segment width.
    #[arg(long, default_value_t = 0.25)]
    min_width: f64,
}

fn base_config(cli: &Cli, p: usize, q: usize, eps: f64) -> anyhow::Result<SolverConfig> {
    let base = SolverConfig::new(p, q, eps)?;
    Ok(match &cli.config {
        Some(path) => load_config(path, base)?,
        None => base,
    })
}

fn print_report(rep: &SolverReport) {
    println!("status: {}", rep.status.as_str());
    println!("iterations: {} successful, {} unsuccessful", rep.successful, rep.unsuccessful);
    let derivs: Vec<String> = rep.counts.derivs.iter().map(|n| n.to_string()).collect();
    println!("evaluations: f {}, derivatives by order [{}]", rep.counts.f, derivs.join(", "));
    println!("f: {:e} (initial {:e})", rep.f, rep.f0);
    let x: Vec<String> = rep.x.iter().map(|v| format!("{v:e}")).collect();
    println!("x: [{}]", x.join(", "));
    let c = &rep.certificate;
    println!(
        "certificate: phi {:e} at delta {:e} (order {}), satisfied {}",
        c.phi, c.delta, c.order, c.satisfied
    );
}

fn cmd_solve(cli: &Cli, a: &SolveArgs) -> anyhow::Result<()> {
    let spec = find(&a.problem)?;
    let mut c = base_config(cli, a.p, a.q, a.eps)?;
    if let Some(b) = a.beta {
        c.beta = b;
    }
    if let Some(m) = a.max_iterations {
        c.max_iterations = m;
    }
    if a.prescribed {
        c.mode = Mode::Prescribed(vec![factorial(a.p)]);
    }
    let c = c.validated()?;
    let x0 = a.x0.clone().unwrap_or_else(|| spec.x0.clone());
    let oracle = spec.oracle();
    let rep = match a.variant {
        Variant::General => solve(&oracle, &spec.region, &x0, &c)?,
        Variant::SecondOrder => solve_second_order(&oracle, &spec.region, &x0, &c)?,
    };
    if a.trace {
        println!("k f sigma step_norm rho successful");
        for t in &rep.trace {
            println!("{} {:e} {:e} {:e} {:e} {}", t.k, t.f, t.sigma, t.step_norm, t.rho, t.successful);
        }
    }
    println!("problem: {}", spec.name);
    print_report(&rep);
    if let (Some(l), Some(f_low)) = (spec.lipschitz(a.p), spec.f_low) {
        println!("evaluation bound: {:e}", theoretical_eval_bound(&c, rep.f0, f_low, l)?);
    }
    let audit = audit_run(&rep, spec.lipschitz(a.p), &c)?;
    for check in &audit.checks {
        println!("audit {}: {}", check.name, if check.passed { "ok" } else { "FAILED" });
    }
    audit.into_result()?;
    if rep.status == SolverStatus::IterationCap {
        bail!("no approximate minimizer within {} iterations", c.max_iterations);
    }
    Ok(())
}

fn lower_bound_case(p: usize, q: usize, eps: f64, save: Option<&Path>) -> anyhow::Result<bool> {
    let inst = SlowInstance::build(p, q, eps)?;
    if let Some(path) = save {
        inst.save(path)?;
    }
    let mut c = SolverConfig::prescribed(p, q, eps)?;
    c.max_iterations = inst.k_eps() + 10;
    let rep = solve(inst.interpolant(), &FeasibleRegion::whole_space(1)?, &[0.0], &c)?;
    audit_run(&rep, None, &c)?.into_result()?;
    let ok = rep.successful == inst.k_eps() && rep.unsuccessful == 0;
    println!(
        "p={p} q={q} eps={eps} k_eps={} successful={} unsuccessful={} status={} {}",
        inst.k_eps(),
        rep.successful,
        rep.unsuccessful,
        rep.status.as_str(),
        if ok { "ok" } else { "MISMATCH" }
    );
    Ok(ok)
}

fn cmd_lower_bound(a: &LowerBoundArgs) -> anyhow::Result<()> {
    let cases: Vec<(usize, usize, f64)> = match (a.p, a.q, a.eps) {
        (Some(p), Some(q), Some(e)) => vec![(p, q, e)],
        _ => SLOW_PAIRS.iter().flat_map(|&(p, q)| [0.5, 0.25, 0.1].map(|e| (p, q, e))).collect(),
    };
    let mut mismatches = 0;
    for (p, q, eps) in cases {
        if !lower_bound_case(p, q, eps, a.save.as_deref())? {
            mismatches += 1;
        }
    }
    if mismatches > 0 {
        bail!(ArpError::Audit { name: "lower-bound iteration count", detail: format!("{mismatches} case(s) differ from k_eps") });
    }
    Ok(())
}

fn print_sweep(res: &SweepResult) {
    for n in &res.notes {
        println!("note: {n}");
    }
    println!("problem p q eps f_evals succ_iters status bound");
    for r in &res.rows {
        let bound = r.bound.map_or_else(|| "-".to_string(), |b| format!("{b:e}"));
        println!("{} {} {} {} {} {} {} {bound}", r.problem, r.p, r.q, r.eps, r.f_evals, r.succ_iters, r.status);
    }
    for g in &res.fits {
        let target = (g.p + 1) as f64 / (g.p - g.q + 1) as f64;
        println!(
            "slope {} p={} q={}: {:.4} (stderr {:.2e}, {} points; lower-bound exponent {:.4})",
            g.problem, g.p, g.q, g.fit.slope, g.fit.stderr, g.fit.points, target
        );
    }
}

fn cmd_sweep(cli: &Cli, a: &SweepArgs) -> anyhow::Result<()> {
    let grid = parse_eps_grid(&a.eps_grid)?;
    let mut jobs = Vec::new();
    let mut notes = Vec::new();
    if a.problem == "slow" {
        let pairs = match (a.p, a.q) {
            (Some(p), Some(q)) => vec![(p, q)],
            _ => SLOW_PAIRS.to_vec(),
        };
        for (p, q) in pairs {
            let (eps, n) = cap_grid(p, q, &grid)?;
            notes.extend(n);
            jobs.extend(eps.into_iter().map(|eps| SweepJob {
                problem: SweepProblem::Slow,
                p,
                q,
                eps,
                max_iterations: K_EPS_CAP + 1,
                base: None,
            }));
        }
    } else {
        let spec: Arc<ProblemSpec> = Arc::new(find(&a.problem)?);
        let pairs = match (a.p, a.q) {
            (Some(p), Some(q)) => vec![(p, q)],
            _ => spec.pairs.clone(),
        };
        for (p, q) in pairs {
            let base = match &cli.config {
                Some(_) => Some(base_config(cli, p, q, grid.first().copied().unwrap_or(0.5))?),
                None => None,
            };
            for &eps in &grid {
                jobs.push(SweepJob {
                    problem: SweepProblem::Fixed(spec.clone()),
                    p,
                    q,
                    eps,
                    max_iterations: a.max_iterations,
                    base: base.clone(),
                });
            }
        }
    }
    let mut res = run_sweep(&jobs)?;
    res.notes = notes;
    print_sweep(&res);
    let out = a.out.clone().unwrap_or_else(|| {
        let stem: String = a.problem.chars().map(|ch| if ch.is_ascii_alphanumeric() || ch == '-' { ch } else { '_' }).collect();
        default_output_dir().join(format!("sweep-{stem}.csv"))
    });
    let gp = export(&res, &out)?;
    println!("wrote {} and {}", out.display(), gp.display());
    Ok(())
}

fn cmd_hermite(seed: u64, a: &HermiteArgs) -> anyhow::Result<()> {
    if !(a.min_width > 0.0 && a.min_width < 2.0) {
        return Err(ArpError::Domain(format!("--min-width {} outside (0, 2)", a.min_width)).into());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for trial in 0..a.trials {
        let f0: Vec<f64> = (0..=a.p).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let f1: Vec<f64> = (0..=a.p).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let s = rng.gen_range(a.min_width..2.0);
        let seg = hermite_interpolate(&f0, &f1, s).with_context(|| format!("trial {trial}"))?;
        worst = worst.max(seg.end_residual(&f0, &f1));
    }
    println!("p={} trials={} largest relative end residual {worst:e}", a.p, a.trials);
    Ok(())
}

fn cmd_list() {
    for spec in registry() {
        let pairs: Vec<String> = spec.pairs.iter().map(|(p, q)| format!("({p},{q})")).collect();
        let lips: Vec<String> = spec.lipschitz.iter().map(|(p, l)| format!("L{p}={l}")).collect();
        let f_low = spec.f_low.map_or_else(|| "-".to_string(), |v| format!("{v}"));
        println!(
            "{}\tdim {}\tpairs {}\t{}\tf_low {}\t{}",
            spec.name,
            spec.region.dim(),
            pairs.join(" "),
            if lips.is_empty() { "L unknown".to_string() } else { lips.join(" ") },
            f_low,
            spec.description
        );
    }
}

/// Bad parameter values count as usage errors; everything else is a run failure.
fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<ArpError>() {
        Some(ArpError::InvalidConfig(_) | ArpError::Parse(_)) => 2,
        Some(ArpError::Domain(m)) if m.starts_with("unknown problem") => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Solve(a) => cmd_solve(&cli, a),
        Command::LowerBound(a) => cmd_lower_bound(a),
        Command::Sweep(a) => cmd_sweep(&cli, a),
        Command::HermiteCheck(a) => cmd_hermite(cli.seed, a),
        Command::ListProblems => {
            cmd_list();
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

