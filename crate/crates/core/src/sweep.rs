//! Experiment sweeps over (problem, p, q, ε), complexity-slope fits and
//! CSV / plot-data export.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;

use crate::driver::{audit_run, solve, theoretical_eval_bound, SolverConfig};
use crate::error::{ArpError, Result};
use crate::hermite::{slow_iteration_count, SlowInstance};
use crate::problems::ProblemSpec;
use crate::region::FeasibleRegion;

/// Largest slow-instance iteration count a sweep will build.
pub const K_EPS_CAP: usize = 100_000;
/// Minimum number of distinct accuracies for a slope fit.
pub const MIN_FIT_POINTS: usize = 4;
pub const CSV_HEADER: [&str; 11] =
    ["problem", "p", "q", "beta", "eps", "f_evals", "deriv_evals", "succ_iters", "total_iters", "status", "bound"];
/// Environment variable naming the default output directory.
pub const OUTPUT_DIR_ENV: &str = "ARP_OUTPUT_DIR";

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub problem: String,
    pub p: usize,
    pub q: usize,
    pub beta: f64,
    pub eps: f64,
    pub f_evals: usize,
    pub deriv_evals: usize,
    pub succ_iters: usize,
    pub total_iters: usize,
    pub status: String,
    pub bound: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeFit {
    pub slope: f64,
    /// Infinite when the counts do not vary.
    pub stderr: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupFit {
    pub problem: String,
    pub p: usize,
    pub q: usize,
    pub fit: SlopeFit,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub fits: Vec<GroupFit>,
    /// Accuracies dropped or added by the iteration-count cap.
    pub notes: Vec<String>,
}

/// Least-squares slope of `log(f_evals)` against `log(1/ε)`.
pub fn fit_slope(rows: &[SweepRow]) -> Result<SlopeFit> {
    let mut eps: Vec<f64> = rows.iter().map(|r| r.eps).collect();
    eps.sort_by(f64::total_cmp);
    eps.dedup();
    if eps.len() < MIN_FIT_POINTS {
        return Err(ArpError::Domain(format!(
            "slope fit needs at least {MIN_FIT_POINTS} distinct accuracies, got {}",
            eps.len()
        )));
    }
    let pts: Vec<(f64, f64)> = rows.iter().map(|r| ((1.0 / r.eps).ln(), (r.f_evals.max(1) as f64).ln())).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if pts.iter().all(|p| p.1 == pts[0].1) {
        return Ok(SlopeFit { slope: 0.0, stderr: f64::INFINITY, points: pts.len() });
    }
    let slope = sxy / sxx;
    let rss: f64 = pts.iter().map(|p| (p.1 - my - slope * (p.0 - mx)).powi(2)).sum();
    let stderr = if pts.len() > 2 { (rss / (n - 2.0) / sxx).sqrt() } else { f64::INFINITY };
    Ok(SlopeFit { slope, stderr, points: pts.len() })
}

/// Powers of two `2^{-a}, 2^{-a-1/2}, …` are produced by [`parse_eps_grid`];
/// this keeps the accuracies whose slow instance stays within
/// [`K_EPS_CAP`] iterations, refining to half powers when fewer than
/// [`MIN_FIT_POINTS`] survive.
pub fn cap_grid(p: usize, q: usize, grid: &[f64]) -> Result<(Vec<f64>, Vec<String>)> {
    let within = |e: f64| slow_iteration_count(p, q, e).map(|k| k <= K_EPS_CAP).unwrap_or(false);
    let mut kept: Vec<f64> = grid.iter().copied().filter(|&e| within(e)).collect();
    let mut notes = Vec::new();
    let dropped: Vec<String> = grid.iter().filter(|&&e| !within(e)).map(|e| format!("{e}")).collect();
    if !dropped.is_empty() {
        notes.push(format!("p={p} q={q}: dropped eps {} (k_eps > {K_EPS_CAP})", dropped.join(" ")));
    }
    if kept.len() < MIN_FIT_POINTS && !grid.is_empty() {
        let hi = grid.iter().copied().fold(f64::NEG_INFINITY, f64::max).log2();
        let mut e = hi;
        let mut refined = Vec::new();
        while within(2f64.powf(e)) && refined.len() < 64 {
            refined.push(2f64.powf(e));
            e -= 0.5;
        }
        notes.push(format!("p={p} q={q}: refined to half powers of two, {} points", refined.len()));
        kept = refined;
    }
    Ok((kept, notes))
}

/// Parses `2^-a..2^-b` (integer exponents) or a comma-separated list.
pub fn parse_eps_grid(spec: &str) -> Result<Vec<f64>> {
    let bad = || ArpError::Parse(format!("bad accuracy grid {spec:?}"));
    if let Some((a, b)) = spec.split_once("..") {
        let exp = |s: &str| -> Result<i32> { s.trim().strip_prefix("2^").ok_or_else(bad)?.parse().map_err(|_| bad()) };
        let (a, b) = (exp(a)?, exp(b)?);
        let (hi, lo) = (a.max(b), a.min(b));
        return Ok((lo..=hi).rev().map(|e| 2f64.powi(e)).collect());
    }
    let v = spec
        .split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<Result<Vec<f64>>>()?;
    if v.is_empty() || v.iter().any(|e| !(*e > 0.0 && *e < 1.0)) {
        return Err(bad());
    }
    Ok(v)
}

#[derive(Debug, Clone)]
pub enum SweepProblem {
    /// A fresh slow instance per accuracy, solved in prescribed mode.
    Slow,
    /// A fixed problem solved adaptively at every accuracy.
    Fixed(Arc<ProblemSpec>),
}

#[derive(Debug, Clone)]
pub struct SweepJob {
    pub problem: SweepProblem,
    pub p: usize,
    pub q: usize,
    pub eps: f64,
    pub max_iterations: usize,
    /// Settings for fixed problems; `p`, `q`, `ε` and the iteration cap are
    /// taken from the job.
    pub base: Option<SolverConfig>,
}

fn run_job(job: &SweepJob) -> Result<SweepRow> {
    let (p, q, eps) = (job.p, job.q, job.eps);
    let (name, rep, config, lipschitz, f_low) = match &job.problem {
        SweepProblem::Slow => {
            let inst = SlowInstance::build(p, q, eps)?;
            let mut c = SolverConfig::prescribed(p, q, eps)?;
            c.max_iterations = job.max_iterations.max(inst.k_eps());
            let region = FeasibleRegion::whole_space(1)?;
            let rep = solve(inst.interpolant(), &region, &[0.0], &c)?;
            if rep.successful != inst.k_eps() || rep.unsuccessful != 0 {
                return Err(ArpError::Audit {
                    name: "lower-bound iteration count",
                    detail: format!("p={p} q={q} eps={eps}: {} successful, k_eps = {}", rep.successful, inst.k_eps()),
                });
            }
            (format!("slow-p{p}-q{q}"), rep, c, None, None)
        }
        SweepProblem::Fixed(spec) => {
            let mut c = match &job.base {
                Some(b) => SolverConfig { p, q, epsilon: eps, ..b.clone() }.validated()?,
                None => SolverConfig::new(p, q, eps)?,
            };
            c.max_iterations = job.max_iterations;
            let rep = solve(&spec.oracle(), &spec.region, &spec.x0, &c)?;
            (spec.name.clone(), rep, c, spec.lipschitz(p), spec.f_low)
        }
    };
    audit_run(&rep, lipschitz, &config)?.into_result()?;
    let bound = match (lipschitz, f_low) {
        (Some(l), Some(fl)) => Some(theoretical_eval_bound(&config, rep.f0, fl, l)?),
        _ => None,
    };
    Ok(SweepRow {
        problem: name,
        p,
        q,
        beta: config.beta,
        eps,
        f_evals: rep.counts.f,
        deriv_evals: rep.counts.total_derivs(),
        succ_iters: rep.successful,
        total_iters: rep.total_iterations(),
        status: rep.status.as_str().to_string(),
        bound,
    })
}

/// Runs every job (in parallel), audits each run and fits a slope for every
/// (problem, p, q) group with enough accuracies.
pub fn run_sweep(jobs: &[SweepJob]) -> Result<SweepResult> {
    let mut rows = jobs.par_iter().map(run_job).collect::<Result<Vec<_>>>()?;
    sort_rows(&mut rows);
    let mut groups: BTreeMap<(String, usize, usize), Vec<SweepRow>> = BTreeMap::new();
    for r in &rows {
        groups.entry((r.problem.clone(), r.p, r.q)).or_default().push(r.clone());
    }
    let fits = groups
        .into_iter()
        .filter_map(|((problem, p, q), g)| fit_slope(&g).ok().map(|fit| GroupFit { problem, p, q, fit }))
        .collect();
    Ok(SweepResult { rows, fits, notes: Vec::new() })
}

/// Prescribed-mode sweep over slow instances for one `(p, q)`, with the
/// grid capped by [`cap_grid`].
pub fn sweep_slow(p: usize, q: usize, grid: &[f64]) -> Result<SweepResult> {
    let (eps, notes) = cap_grid(p, q, grid)?;
    let jobs: Vec<SweepJob> = eps
        .iter()
        .map(|&eps| SweepJob { problem: SweepProblem::Slow, p, q, eps, max_iterations: K_EPS_CAP + 1, base: None })
        .collect();
    let mut out = run_sweep(&jobs)?;
    out.notes = notes;
    Ok(out)
}

/// Orders rows by problem, p, q and then accuracy, largest first.
pub fn sort_rows(rows: &mut [SweepRow]) {
    rows.sort_by(|a, b| {
        (a.problem.as_str(), a.p, a.q)
            .cmp(&(b.problem.as_str(), b.p, b.q))
            .then(b.eps.total_cmp(&a.eps))
    });
}

fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

/// Writes the CSV to `path` and the plot data beside it with a `.gp` extension.
/// Rows are written in [`sort_rows`] order.
pub fn export(result: &SweepResult, path: &Path) -> Result<PathBuf> {
    let mut rows = result.rows.clone();
    sort_rows(&mut rows);
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(CSV_HEADER).map_err(|e| csv_error(path, e))?;
    for r in &rows {
        w.write_record([
            r.problem.clone(),
            r.p.to_string(),
            r.q.to_string(),
            fmt_f64(r.beta),
            fmt_f64(r.eps),
            r.f_evals.to_string(),
            r.deriv_evals.to_string(),
            r.succ_iters.to_string(),
            r.total_iters.to_string(),
            r.status.clone(),
            r.bound.map(|b| format!("{b:e}")).unwrap_or_default(),
        ])
        .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| ArpError::io(path, e))?;

    let gp_path = path.with_extension("gp");
    std::fs::write(&gp_path, plot_data(&rows)).map_err(|e| ArpError::io(&gp_path, e))?;
    Ok(gp_path)
}

/// `log(1/ε) log(f_evals)` pairs, one blank-line-separated block per
/// (problem, p, q).
pub fn plot_data(rows: &[SweepRow]) -> String {
    let mut s = String::from("# log(1/eps) log(f_evals)\n");
    let mut last: Option<(&str, usize, usize)> = None;
    for r in rows {
        let key = (r.problem.as_str(), r.p, r.q);
        if last != Some(key) {
            if last.is_some() {
                s.push_str("\n\n");
            }
            writeln!(s, "# {} p={} q={}", r.problem, r.p, r.q).expect("string write");
            last = Some(key);
        }
        writeln!(s, "{} {}", (1.0 / r.eps).ln(), (r.f_evals.max(1) as f64).ln()).expect("string write");
    }
    s
}

fn csv_error(path: &Path, e: csv::Error) -> ArpError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => ArpError::io(path, io),
        other => ArpError::Io { path: path.into(), source: std::io::Error::other(format!("{other:?}")) },
    }
}

/// Directory from [`OUTPUT_DIR_ENV`], or the current directory.
pub fn default_output_dir() -> PathBuf {
    std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("."))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn row(eps: f64, f_evals: usize) -> SweepRow {
        SweepRow {
            problem: "t".into(),
            p: 1,
            q: 1,
            beta: 1.0,
            eps,
            f_evals,
            deriv_evals: 0,
            succ_iters: 0,
            total_iters: 0,
            status: "converged-step1".into(),
            bound: None,
        }
    }

    #[test]
    fn exact_power_law() {
        let rows: Vec<SweepRow> = (2..8).map(|e| row(2f64.powi(-e), 1 << (2 * e))).collect();
        let fit = fit_slope(&rows).unwrap();
        assert_relative_eq!(fit.slope, 2.0, epsilon = 1e-12);
        assert!(fit.stderr < 1e-10);
    }

    #[test]
    fn degenerate_and_short() {
        let rows: Vec<SweepRow> = (2..8).map(|e| row(2f64.powi(-e), 5)).collect();
        let fit = fit_slope(&rows).unwrap();
        assert_eq!(fit.slope, 0.0);
        assert!(fit.stderr.is_infinite());
        assert!(fit_slope(&rows[..3]).is_err());
    }

    #[test]
    fn grids() {
        assert_eq!(parse_eps_grid("2^-2..2^-4").unwrap(), vec![0.25, 0.125, 0.0625]);
        assert_eq!(parse_eps_grid("0.5,0.1").unwrap(), vec![0.5, 0.1]);
        assert!(parse_eps_grid("2^-2..x").is_err());
        let (g, notes) = cap_grid(3, 3, &parse_eps_grid("2^-2..2^-7").unwrap()).unwrap();
        assert!(g.len() >= MIN_FIT_POINTS);
        assert!(g.iter().all(|&e| slow_iteration_count(3, 3, e).unwrap() <= K_EPS_CAP));
        assert_eq!(notes.len(), 2);
    }

    #[test]
    fn slow_sweep_slope() {
        let r = sweep_slow(2, 1, &parse_eps_grid("2^-2..2^-5").unwrap()).unwrap();
        assert_eq!(r.rows.len(), 4);
        assert!((r.fits[0].fit.slope - 1.5).abs() < 0.15);
    }
}
