//! The adaptive regularization outer loop, its instrumentation, the
//! post-hoc complexity audits and the theoretical evaluation bound.

use crate::error::{ArpError, Result};
use crate::optimality::{chi, phi_measure, OptimalityCertificate};
use crate::oracle::{Counted, DifferentiableOracle, EvalCounts};
use crate::region::FeasibleRegion;
use crate::subproblem::{
    check_inner_tr_condition, check_step_conditions, minimize_model, step_capability, RegularizedModel, StepResult,
    StoppingReason,
};
use crate::taylor::TaylorModel;
use crate::tensor::{factorial, generalized_factorial, norm2, SymmetricTensor};

/// Relative slack on the termination test, absorbing rounding in iterates
/// that land on a point where the test holds with equality.
pub const TERMINATION_RTOL: f64 = 1e-9;
/// Smallest radius tried when certifying a Step-2 termination, as a power of two.
const CERTIFICATE_FLOOR_EXP: i32 = 40;
const AUDIT_RTOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum Mode {
    Adaptive,
    /// Fixed regularization weights (the last one repeats).
    Prescribed(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub p: usize,
    pub q: usize,
    pub beta: f64,
    pub epsilon: f64,
    pub delta_init: f64,
    pub varpi: f64,
    pub theta: f64,
    pub eta1: f64,
    pub eta2: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma3: f64,
    pub sigma0: f64,
    pub sigma_min: f64,
    pub max_iterations: usize,
    pub mode: Mode,
}

impl SolverConfig {
    pub fn new(p: usize, q: usize, epsilon: f64) -> Result<Self> {
        SolverConfig {
            p,
            q,
            beta: 1.0,
            epsilon,
            delta_init: 1.0,
            varpi: 1.0,
            theta: 100.0,
            eta1: 0.05,
            eta2: 0.9,
            gamma1: 0.5,
            gamma2: 2.0,
            gamma3: 3.0,
            sigma0: 1.0,
            sigma_min: 1e-8,
            max_iterations: 100_000,
            mode: Mode::Adaptive,
        }
        .validated()
    }

    /// Fixed `σ = p!`, `δ₋₁ = ϖ = 1` and `η₁` small enough that the
    /// slow-instance ratio `(p−q+1)/(p+1)` counts as a success.
    pub fn prescribed(p: usize, q: usize, epsilon: f64) -> Result<Self> {
        let mut c = SolverConfig::new(p, q, epsilon)?;
        if q <= p {
            c.eta1 = c.eta1.min((p - q + 1) as f64 / (2.0 * (p + 1) as f64));
            c.sigma0 = factorial(p);
        }
        c.mode = Mode::Prescribed(vec![factorial(p)]);
        c.validated()
    }

    pub fn validated(self) -> Result<Self> {
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(ArpError::InvalidConfig(m));
        if !(self.q >= 1 && self.q <= self.p) {
            return bad(format!("need 1 ≤ q ≤ p, got p = {}, q = {}", self.p, self.q));
        }
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return bad(format!("β = {} outside (0, 1]", self.beta));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return bad(format!("ε = {} outside (0, 1)", self.epsilon));
        }
        if !(self.delta_init > 0.0 && self.delta_init <= 1.0) {
            return bad(format!("δ₋₁ = {} outside (0, 1]", self.delta_init));
        }
        if !(self.varpi > 0.0 && self.varpi <= 1.0) {
            return bad(format!("ϖ = {} outside (0, 1]", self.varpi));
        }
        if !(self.theta > 0.0) {
            return bad(format!("θ = {} must be positive", self.theta));
        }
        if !(0.0 < self.eta1 && self.eta1 <= self.eta2 && self.eta2 < 1.0) {
            return bad(format!("need 0 < η₁ ≤ η₂ < 1, got η₁ = {}, η₂ = {}", self.eta1, self.eta2));
        }
        if !(0.0 < self.gamma1 && self.gamma1 < 1.0 && 1.0 < self.gamma2 && self.gamma2 < self.gamma3) {
            return bad(format!(
                "need 0 < γ₁ < 1 < γ₂ < γ₃, got {}, {}, {}",
                self.gamma1, self.gamma2, self.gamma3
            ));
        }
        if !(self.sigma0 > 0.0 && self.sigma_min > 0.0 && self.sigma_min <= self.sigma0) {
            return bad(format!("need 0 < σ_min ≤ σ₀, got σ_min = {}, σ₀ = {}", self.sigma_min, self.sigma0));
        }
        if let Mode::Prescribed(s) = &self.mode {
            if s.is_empty() || s.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
                return bad("prescribed regularization weights must be positive".into());
            }
        }
        Ok(())
    }

    /// `p − q + β`.
    pub fn gap(&self) -> f64 {
        (self.p - self.q) as f64 + self.beta
    }

    fn sigma_at(&self, k: usize, adaptive: f64) -> f64 {
        match &self.mode {
            Mode::Adaptive => adaptive,
            Mode::Prescribed(s) => s[k.min(s.len() - 1)],
        }
    }
}

/// `ρ = (f_k − f_trial)/(T(0) − T(s))`.
pub fn rho(f_k: f64, f_trial: f64, taylor_decrease: f64) -> f64 {
    assert!(taylor_decrease > 0.0, "Taylor decrease {taylor_decrease} must be positive");
    (f_k - f_trial) / taylor_decrease
}

/// Very successful: shrink by `γ₁` (not below `σ_min`); successful: keep;
/// otherwise grow by `γ₂`.
pub fn sigma_update(sigma: f64, rho: f64, config: &SolverConfig) -> f64 {
    if rho >= config.eta2 {
        config.sigma_min.max(config.gamma1 * sigma)
    } else if rho >= config.eta1 {
        sigma
    } else {
        config.gamma2 * sigma
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverStatus {
    ConvergedStep1,
    ConvergedStep2,
    IterationCap,
}

impl SolverStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolverStatus::ConvergedStep1 => "converged-step1",
            SolverStatus::ConvergedStep2 => "converged-step2",
            SolverStatus::IterationCap => "iteration-cap",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub k: usize,
    pub x: Vec<f64>,
    pub f: f64,
    pub sigma: f64,
    pub s: Vec<f64>,
    pub step_norm: f64,
    pub delta: f64,
    pub rho: f64,
    pub successful: bool,
    /// Measure computed in Step 1 of this iteration, if Step 1 ran.
    pub phi: Option<f64>,
    /// `T_p(x_k,0) − T_p(x_k,s_k)`.
    pub taylor_decrease: f64,
    pub f_trial: f64,
    pub stopping_reason: StoppingReason,
    /// Cumulative evaluations once this iteration is complete.
    pub counts: EvalCounts,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverReport {
    pub status: SolverStatus,
    pub certificate: OptimalityCertificate,
    pub trace: Vec<IterationRecord>,
    pub x: Vec<f64>,
    pub f: f64,
    pub f0: f64,
    pub successful: usize,
    pub unsuccessful: usize,
    pub counts: EvalCounts,
}

impl SolverReport {
    pub fn total_iterations(&self) -> usize {
        self.trace.len()
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Variant {
    General,
    SecondOrder,
}

/// Runs the adaptive regularization method from `x0`.
pub fn solve<O: DifferentiableOracle>(
    oracle: &O,
    region: &FeasibleRegion,
    x0: &[f64],
    config: &SolverConfig,
) -> Result<SolverReport> {
    run(oracle, region, x0, config, Variant::General)
}

/// The second-order specialization: the measure is always computed with
/// unit radius and steps are validated by a single trust-region test.
pub fn solve_second_order<O: DifferentiableOracle>(
    oracle: &O,
    region: &FeasibleRegion,
    x0: &[f64],
    config: &SolverConfig,
) -> Result<SolverReport> {
    if config.q != 2 || config.beta != 1.0 || !matches!(region, FeasibleRegion::WholeSpace(_)) {
        return Err(ArpError::Capability(
            "second-order variant needs q = 2, β = 1 and an unconstrained problem".into(),
        ));
    }
    run(oracle, region, x0, config, Variant::SecondOrder)
}

fn terminates(phi: f64, config: &SolverConfig, delta: f64) -> bool {
    phi <= config.epsilon * chi(config.q, delta) * (1.0 + TERMINATION_RTOL)
}

fn run<O: DifferentiableOracle>(
    oracle: &O,
    region: &FeasibleRegion,
    x0: &[f64],
    config: &SolverConfig,
    variant: Variant,
) -> Result<SolverReport> {
    config.validate()?;
    let (p, q) = (config.p, config.q);
    if oracle.dim() != region.dim() || x0.len() != region.dim() {
        return Err(ArpError::Shape(format!(
            "objective dimension {}, region dimension {}, start of length {}",
            oracle.dim(),
            region.dim(),
            x0.len()
        )));
    }
    if oracle.max_order() < p {
        return Err(ArpError::Capability(format!(
            "objective supplies derivatives up to order {}, method needs {p}",
            oracle.max_order()
        )));
    }
    if !region.supports_order(q) {
        return Err(ArpError::Capability(format!(
            "order-{q} measure unavailable on a {}-dimensional {}",
            region.dim(),
            region.kind()
        )));
    }
    step_capability(region, p, config.beta)?;
    if !region.contains(x0) {
        return Err(ArpError::Domain("starting point is infeasible".into()));
    }

    let counted = Counted::new(oracle);
    let mut x = x0.to_vec();
    let mut f = counted.value(&x)?;
    let f0 = f;
    let mut sigma = config.sigma_at(0, config.sigma0);
    let mut delta_prev = if variant == Variant::SecondOrder { 1.0 } else { config.delta_init };
    let mut derivs: Vec<SymmetricTensor> = Vec::new();
    let mut need_step1 = true;
    let mut last_phi = f64::INFINITY;
    let mut trace: Vec<IterationRecord> = Vec::new();
    let mut successful = 0;

    let finish = |status, certificate, trace: Vec<IterationRecord>, x, f, successful, counted: &Counted<&O>| {
        let unsuccessful = trace.len() - successful;
        Ok(SolverReport { status, certificate, trace, x, f, f0, successful, unsuccessful, counts: counted.counts() })
    };

    for k in 0.. {
        let mut phi_k = None;
        if need_step1 {
            derivs = (1..=q).map(|j| counted.derivative(&x, j)).collect::<Result<_>>()?;
            let tq = TaylorModel::new(x.clone(), f, derivs.clone())?;
            let (phi, d) = phi_measure(&tq, q, delta_prev, region)?;
            if terminates(phi, config, delta_prev) {
                let cert = OptimalityCertificate::new(phi, delta_prev, config.epsilon, q, Some(d));
                let cert = OptimalityCertificate { satisfied: true, ..cert };
                return finish(SolverStatus::ConvergedStep1, cert, trace, x, f, successful, &counted);
            }
            for j in q + 1..=p {
                derivs.push(counted.derivative(&x, j)?);
            }
            phi_k = Some(phi);
            last_phi = phi;
            need_step1 = false;
        }
        if k >= config.max_iterations {
            let cert = OptimalityCertificate::new(last_phi, delta_prev, config.epsilon, q, None);
            return finish(SolverStatus::IterationCap, cert, trace, x, f, successful, &counted);
        }

        let model = RegularizedModel::new(TaylorModel::new(x.clone(), f, derivs.clone())?, sigma, config.beta)?;
        let step = compute_step(&model, region, config, variant)?;
        if step.stopping_reason == StoppingReason::NoDescentExists {
            let cert = step2_certificate(&model, region, config)?;
            return finish(SolverStatus::ConvergedStep2, cert, trace, x, f, successful, &counted);
        }

        let trial: Vec<f64> = x.iter().zip(&step.s).map(|(a, b)| a + b).collect();
        let f_trial = counted.value(&trial)?;
        let taylor_decrease = -model.taylor().increment(&step.s)?;
        if !(taylor_decrease > 0.0) {
            return Err(ArpError::Numerical {
                context: "acceptance ratio",
                diagnostics: format!("Taylor decrease {taylor_decrease:e} is not positive at iteration {k}"),
            });
        }
        let r = rho(f, f_trial, taylor_decrease);
        let ok = r >= config.eta1;
        trace.push(IterationRecord {
            k,
            x: x.clone(),
            f,
            sigma,
            step_norm: norm2(&step.s),
            s: step.s,
            delta: step.delta_k,
            rho: r,
            successful: ok,
            phi: phi_k,
            taylor_decrease,
            f_trial,
            stopping_reason: step.stopping_reason,
            counts: counted.counts(),
        });
        sigma = config.sigma_at(k + 1, sigma_update(sigma, r, config));
        if ok {
            successful += 1;
            x = trial;
            f = f_trial;
            if variant == Variant::General {
                delta_prev = step.delta_k;
            }
            need_step1 = true;
        }
    }
    unreachable!("the iteration loop only exits by returning")
}

fn compute_step(
    model: &RegularizedModel,
    region: &FeasibleRegion,
    config: &SolverConfig,
    variant: Variant,
) -> Result<StepResult> {
    let step = minimize_model(model, region)?;
    match variant {
        Variant::General => {
            check_step_conditions(step, model, config.q, config.epsilon, config.varpi, config.theta, region)
        }
        Variant::SecondOrder => {
            if step.stopping_reason == StoppingReason::NoDescentExists {
                return Ok(step);
            }
            let sn = norm2(&step.s);
            if sn >= config.varpi * config.epsilon.powf(1.0 / config.gap()) {
                return Ok(StepResult { delta_k: 1.0, stopping_reason: StoppingReason::LongStep, ..step });
            }
            if check_inner_tr_condition(model, &step.s, config.theta, config.p)? {
                return Ok(StepResult { delta_k: 1.0, stopping_reason: StoppingReason::InnerOptimality, ..step });
            }
            Err(ArpError::Numerical {
                context: "second-order inner test",
                diagnostics: format!("model minimizer of norm {sn:e} fails the unit trust-region test"),
            })
        }
    }
}

/// When the model admits no descent, finds the largest radius on which the
/// measure certifies approximate optimality.
fn step2_certificate(model: &RegularizedModel, region: &FeasibleRegion, config: &SolverConfig) -> Result<OptimalityCertificate> {
    let tq = model.taylor().truncated(config.q);
    let mut last = None;
    for e in 0..=CERTIFICATE_FLOOR_EXP {
        let delta = 0.5f64.powi(e);
        let (phi, d) = phi_measure(&tq, config.q, delta, region)?;
        if terminates(phi, config, delta) {
            let cert = OptimalityCertificate::new(phi, delta, config.epsilon, config.q, Some(d));
            return Ok(OptimalityCertificate { satisfied: true, ..cert });
        }
        last = Some((phi, delta, d));
    }
    let (phi, delta, d) = last.expect("at least one radius tried");
    Ok(OptimalityCertificate::new(phi, delta, config.epsilon, config.q, Some(d)))
}

/// `σ_max = max[σ₀, γ₃L/(1−η₂)]`.
pub fn sigma_max_bound(config: &SolverConfig, lipschitz: f64) -> f64 {
    config.sigma0.max(config.gamma3 * lipschitz / (1.0 - config.eta2))
}

/// `κ_s = min[ϖ, ((p−q+β)!/(L+σ_max+θ))^{1/(p−q+β)}]`.
pub fn kappa_s(config: &SolverConfig, lipschitz: f64) -> Result<f64> {
    let gap = config.gap();
    let gf = generalized_factorial(config.p - config.q, config.beta)?;
    let denom = lipschitz + sigma_max_bound(config, lipschitz) + config.theta;
    Ok(config.varpi.min((gf / denom).powf(1.0 / gap)))
}

/// `κ_p = (p+β)!/(η₁σ_min)·max{ϖ^{−(p+β)}, [(L+σ_max+θ)/(p−q+β)!]^{(p+β)/(p−q+β)}}`.
pub fn kappa_p(config: &SolverConfig, lipschitz: f64) -> Result<f64> {
    let r = config.p as f64 + config.beta;
    let gap = config.gap();
    let gf = generalized_factorial(config.p - config.q, config.beta)?;
    let inner = (lipschitz + sigma_max_bound(config, lipschitz) + config.theta) / gf;
    let m = config.varpi.powf(-r).max(inner.powf(r / gap));
    Ok(generalized_factorial(config.p, config.beta)? / (config.eta1 * config.sigma_min) * m)
}

/// `⌊κ_p(f₀ − f_low)ε^{−(p+β)/(p−q+β)}⌋ + 1`.
pub fn successful_iteration_bound(config: &SolverConfig, f0: f64, f_low: f64, lipschitz: f64) -> Result<f64> {
    check_bound_args(f0, f_low, lipschitz)?;
    let r = config.p as f64 + config.beta;
    let e = config.epsilon.powf(-r / config.gap());
    Ok((kappa_p(config, lipschitz)? * (f0 - f_low) * e).floor() + 1.0)
}

fn check_bound_args(f0: f64, f_low: f64, lipschitz: f64) -> Result<()> {
    if !(f0 >= f_low) || !(lipschitz >= 0.0) {
        return Err(ArpError::Domain(format!("need f₀ ≥ f_low and L ≥ 0, got {f0}, {f_low}, {lipschitz}")));
    }
    Ok(())
}

/// Worst-case number of evaluations of `f`: the total-iteration bound
/// (successful count inflated by the unsuccessful ones) plus the evaluation
/// at `x₀`. Derivative evaluations never exceed it.
pub fn theoretical_eval_bound(config: &SolverConfig, f0: f64, f_low: f64, lipschitz: f64) -> Result<f64> {
    let succ = successful_iteration_bound(config, f0, f_low, lipschitz)?;
    let lg2 = config.gamma2.ln();
    let total = succ * (1.0 + config.gamma1.ln().abs() / lg2)
        + (sigma_max_bound(config, lipschitz) / config.sigma0).ln() / lg2;
    Ok(total.floor() + 1.0)
}

/// Right-hand side of the successful/unsuccessful iteration inequality.
pub fn iteration_count_bound(successful: usize, gamma1: f64, gamma2: f64, sigma_max: f64, sigma0: f64) -> f64 {
    let lg2 = gamma2.ln();
    successful as f64 * (1.0 + gamma1.ln().abs() / lg2) + (sigma_max / sigma0).ln() / lg2
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditCheck {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AuditResult {
    pub checks: Vec<AuditCheck>,
}

impl AuditResult {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &AuditCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }

    /// The first failed check as an error.
    pub fn into_result(self) -> Result<()> {
        match self.checks.into_iter().find(|c| !c.passed) {
            None => Ok(()),
            Some(c) => Err(ArpError::Audit { name: c.name, detail: c.detail }),
        }
    }

    fn push(&mut self, name: &'static str, failure: Option<String>) {
        self.checks.push(AuditCheck { name, passed: failure.is_none(), detail: failure.unwrap_or_default() });
    }
}

fn at_least(lhs: f64, rhs: f64) -> bool {
    lhs >= rhs - AUDIT_RTOL * rhs.abs().max(lhs.abs()) - 1e-300
}

/// Checks a finished run against the iteration-count, regularization,
/// model-decrease, step-length and monotonicity inequalities.
pub fn audit_run(report: &SolverReport, lipschitz: Option<f64>, config: &SolverConfig) -> Result<AuditResult> {
    config.validate()?;
    let mut out = AuditResult::default();
    let trace = &report.trace;
    let r = config.p as f64 + config.beta;
    let wr = generalized_factorial(config.p, config.beta)?;
    let sigma0 = trace.first().map_or(config.sigma0, |t| t.sigma);

    // iteration count
    let n = trace.len();
    let fail = if n == 0 {
        None
    } else {
        let smax = trace.iter().map(|t| t.sigma).fold(sigma0, f64::max);
        let bound = iteration_count_bound(report.successful, config.gamma1, config.gamma2, smax, sigma0);
        (!at_least(bound, n as f64)).then(|| format!("{n} iterations exceed the bound {bound}"))
    };
    out.push("successful-vs-unsuccessful iterations", fail);

    // regularization upper bound
    if let Some(l) = lipschitz {
        let smax = sigma_max_bound(config, l).max(sigma0);
        let fail = trace
            .iter()
            .find(|t| !at_least(smax, t.sigma))
            .map(|t| format!("σ_{} = {:e} exceeds {smax:e}", t.k, t.sigma));
        out.push("regularization upper bound", fail);
    }

    // model decrease
    let fail = trace
        .iter()
        .find(|t| !at_least(t.taylor_decrease, t.sigma / wr * t.step_norm.powf(r)))
        .map(|t| format!("iteration {}: Taylor decrease {:e} below σ‖s‖^r/r! = {:e}", t.k, t.taylor_decrease, t.sigma / wr * t.step_norm.powf(r)));
    out.push("model decrease", fail);

    // step lower bound, for successful steps not followed by termination
    if let Some(l) = lipschitz {
        let floor = kappa_s(config, l)? * config.epsilon.powf(1.0 / config.gap());
        let succ: Vec<&IterationRecord> = trace.iter().filter(|t| t.successful).collect();
        let last_terminates = report.status != SolverStatus::IterationCap;
        let checked = if last_terminates { succ.len().saturating_sub(1) } else { succ.len() };
        let fail = succ[..checked]
            .iter()
            .find(|t| !at_least(t.step_norm, floor))
            .map(|t| format!("iteration {}: ‖s‖ = {:e} below {floor:e}", t.k, t.step_norm));
        out.push("step lower bound", fail);
    }

    // monotone objective along successful iterations
    let fail = trace
        .iter()
        .filter(|t| t.successful)
        .find(|t| t.f_trial > t.f)
        .map(|t| format!("iteration {}: f rose from {:e} to {:e}", t.k, t.f, t.f_trial));
    out.push("monotone objective", fail);

    // guaranteed decrease on successful iterations
    let fail = trace
        .iter()
        .filter(|t| t.successful)
        .find(|t| !at_least(t.f - t.f_trial, config.eta1 * config.sigma_min / wr * t.step_norm.powf(r)))
        .map(|t| format!("iteration {}: decrease {:e} below the guaranteed amount", t.k, t.f - t.f_trial));
    out.push("guaranteed decrease", fail);

    Ok(out)
}
