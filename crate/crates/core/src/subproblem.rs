//! The regularized model `m(s) = T_p(x,s) + σ/(p+β)!·‖s‖^{p+β}`, its global
//! minimization where that is tractable, and the step acceptance tests.

use nalgebra::DMatrix;

use crate::error::{ArpError, Result};
use crate::optimality::{chi, min_increment_on_interval, phi_measure};
use crate::poly;
use crate::region::{FeasibleRegion, LineView};
use crate::taylor::TaylorModel;
use crate::tensor::{factorial, generalized_factorial, norm2, SymmetricTensor};
use crate::trust_region::{solve_cubic, solve_trust_region};

/// Relative size below which a model decrease is treated as a tie with `m(0)`.
const DESCENT_RTOL: f64 = 1e-12;
/// Smallest inner-optimality radius tried, as a power of two.
pub const DELTA_FLOOR_EXP: i32 = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct RegularizedModel {
    taylor: TaylorModel,
    sigma: f64,
    p: usize,
    beta: f64,
    weight: f64,
}

impl RegularizedModel {
    pub fn new(taylor: TaylorModel, sigma: f64, beta: f64) -> Result<Self> {
        if !(sigma > 0.0) {
            return Err(ArpError::Domain(format!("regularization weight {sigma} must be positive")));
        }
        let p = taylor.degree();
        if p == 0 {
            return Err(ArpError::Domain("model needs at least one derivative".into()));
        }
        let weight = sigma / generalized_factorial(p, beta)?;
        Ok(RegularizedModel { taylor, sigma, p, beta, weight })
    }

    pub fn taylor(&self) -> &TaylorModel {
        &self.taylor
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// `σ/(p+β)!`.
    pub fn weight(&self) -> f64 {
        self.weight
    }

    /// `p + β`.
    pub fn power(&self) -> f64 {
        self.p as f64 + self.beta
    }

    /// `m(s) − m(0)`.
    pub fn increment(&self, s: &[f64]) -> Result<f64> {
        Ok(self.taylor.increment(s)? + self.weight * norm2(s).powf(self.power()))
    }

    pub fn value(&self, s: &[f64]) -> Result<f64> {
        if s.iter().all(|&v| v == 0.0) {
            return self.taylor.eval(s);
        }
        Ok(self.taylor.f0() + self.increment(s)?)
    }

    /// Order-`j` derivative tensor of `m` at `s` (only `j ≤ 2` away from a line).
    pub fn derivative(&self, s: &[f64], j: usize) -> Result<SymmetricTensor> {
        let mut d = self.taylor.derivative(s, j)?;
        let r = self.power();
        let n = norm2(s);
        let c = self.weight;
        match j {
            1 => {
                if n > 0.0 {
                    let scale = c * r * n.powf(r - 2.0);
                    d.add_scaled(&SymmetricTensor::from_vector(s), scale)?;
                }
            }
            2 => {
                if n > 0.0 {
                    let dim = s.len();
                    let scale = c * r * n.powf(r - 2.0);
                    let mut h = DMatrix::<f64>::identity(dim, dim) * scale;
                    for a in 0..dim {
                        for b in 0..dim {
                            h[(a, b)] += scale * (r - 2.0) * s[a] * s[b] / (n * n);
                        }
                    }
                    d.add_scaled(&SymmetricTensor::from_matrix(&h)?, 1.0)?;
                } else if self.p == 1 && self.beta == 1.0 {
                    d.add_scaled(&SymmetricTensor::from_matrix(&DMatrix::identity(s.len(), s.len()))?, 2.0 * c)?;
                } else if self.p == 1 {
                    return Err(ArpError::InfiniteNorm("Hessian of ‖s‖^{1+β} at s = 0".into()));
                }
            }
            _ => {
                return Err(ArpError::Capability(format!(
                    "order-{j} derivative of the regularizer in dimension {}",
                    s.len()
                )))
            }
        }
        Ok(d)
    }

    /// Degree-`q` expansion of `m` about `x + s` (needs `q ≤ 2`).
    pub fn expansion_at(&self, s: &[f64], q: usize) -> Result<TaylorModel> {
        let derivs = (1..=q).map(|j| self.derivative(s, j)).collect::<Result<Vec<_>>>()?;
        let base = self.taylor.base_point().iter().zip(s).map(|(a, b)| a + b).collect();
        TaylorModel::new(base, self.value(s)?, derivs)
    }

    /// Coefficients of `τ ↦ T(τu) − f0` (index 0 is zero).
    fn line_increment(&self, u: &[f64]) -> Result<Vec<f64>> {
        let mut a = self.taylor.line_coefficients(u)?;
        a[0] = 0.0;
        Ok(a)
    }
}

pub fn model_value(m: &RegularizedModel, s: &[f64]) -> Result<f64> {
    m.value(s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StoppingReason {
    /// `‖s‖ ≥ ϖ ε^{1/(p−q+β)}`.
    LongStep,
    /// The model's own optimality measure at `s` is small enough.
    InnerOptimality,
    /// No feasible step decreases the model.
    NoDescentExists,
    /// A minimizer has been computed but not yet validated.
    Pending,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub s: Vec<f64>,
    pub delta_k: f64,
    /// `m(0) − m(s)`.
    pub model_decrease: f64,
    pub stopping_reason: StoppingReason,
}

impl StepResult {
    fn none(n: usize) -> Self {
        StepResult {
            s: vec![0.0; n],
            delta_k: 1.0,
            model_decrease: 0.0,
            stopping_reason: StoppingReason::NoDescentExists,
        }
    }

    fn pending(s: Vec<f64>, increment: f64, scale: f64) -> Self {
        if !(increment < -DESCENT_RTOL * scale) {
            return StepResult::none(s.len());
        }
        StepResult {
            s,
            delta_k: 1.0,
            model_decrease: -increment,
            stopping_reason: StoppingReason::Pending,
        }
    }
}

/// Magnitude of the terms making up `m(τu) − m(0)`, used to judge ties with 0.
fn line_scale(a: &[f64], c: f64, r: f64, tau: f64) -> f64 {
    let t = tau.abs();
    a.iter().enumerate().skip(1).map(|(l, v)| v.abs() * t.powi(l as i32)).sum::<f64>() + c * t.powf(r)
}

fn line_value(a: &[f64], c: f64, r: f64, tau: f64) -> f64 {
    poly::eval(a, tau) + c * tau.abs().powf(r)
}

/// Local minimizers of `Σ bℓ τ^ℓ + c τ^r` on `(0, limit]` for non-integer `r`,
/// located from derivative sign changes on a mixed logarithmic/linear grid.
fn half_line_minimizers(b: &[f64], c: f64, r: f64, limit: f64) -> Vec<f64> {
    let deriv = |t: f64| poly::eval_derivative(b, 1, t) + c * r * t.powf(r - 1.0);
    let mut grid: Vec<f64> = (0..=4000)
        .map(|i| limit * 10f64.powf(-16.0 + 16.0 * i as f64 / 4000.0))
        .chain((1..=4000).map(|i| limit * i as f64 / 4000.0))
        .collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let mut out = Vec::new();
    for w in grid.windows(2) {
        let (mut lo, mut hi) = (w[0], w[1]);
        if deriv(lo) < 0.0 && deriv(hi) >= 0.0 {
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if deriv(mid) < 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            out.push(0.5 * (lo + hi));
        }
    }
    out
}

/// Global minimizer of `Σ aℓ τ^ℓ + c|τ|^r` over `[lo, hi]`, or `None` when no
/// candidate beats `τ = 0`.
fn minimize_on_line(a: &[f64], c: f64, p: usize, beta: f64, lo: f64, hi: f64) -> Option<(f64, f64)> {
    let r = p as f64 + beta;
    let mut cands: Vec<f64> = Vec::new();
    if beta == 1.0 {
        let mut right = a.to_vec();
        right.push(c);
        let mut left = a.to_vec();
        left.push(if (p + 1).is_multiple_of(2) { c } else { -c });
        cands.extend(poly::candidates_on_interval(&right, 0.0, hi).into_iter().map(|(t, _)| t));
        cands.extend(poly::candidates_on_interval(&left, lo, 0.0).into_iter().map(|(t, _)| t));
    } else {
        let reach = 2.0 * (a.iter().map(|v| v.abs()).sum::<f64>() / c).powf(1.0 / beta).max(1.0);
        for sign in [1.0_f64, -1.0] {
            let limit = if sign > 0.0 { hi.min(reach) } else { (-lo).min(reach) };
            if limit <= 0.0 {
                continue;
            }
            let b: Vec<f64> = a.iter().enumerate().map(|(l, v)| v * sign.powi(l as i32)).collect();
            cands.extend(half_line_minimizers(&b, c, r, limit).into_iter().map(|t| sign * t));
            cands.push(sign * limit);
        }
    }
    let mut best: Option<(f64, f64, f64)> = None;
    for t in cands.into_iter().filter(|t| *t != 0.0 && t.is_finite() && *t >= lo && *t <= hi) {
        let v = line_value(a, c, r, t);
        let sc = line_scale(a, c, r, t);
        best = match best {
            None => Some((t, v, sc)),
            Some((bt, bv, bs)) => {
                let tie = 1e-14 * sc.max(bs);
                let prefer = (t > 0.0 && bt < 0.0) || (t.signum() == bt.signum() && t.abs() < bt.abs());
                if v < bv - tie || ((v - bv).abs() <= tie && prefer) {
                    Some((t, v, sc))
                } else {
                    Some((bt, bv, bs))
                }
            }
        };
    }
    best.and_then(|(t, v, sc)| (v < -DESCENT_RTOL * sc).then_some((t, v)))
}

fn line_step(m: &RegularizedModel, view: &LineView) -> Result<StepResult> {
    let a = m.line_increment(&view.direction)?;
    let n = view.direction.len();
    match minimize_on_line(&a, m.weight(), m.p(), m.beta(), view.lo, view.hi) {
        None => Ok(StepResult::none(n)),
        Some((tau, v)) => Ok(StepResult {
            s: view.direction.iter().map(|u| tau * u).collect(),
            delta_k: 1.0,
            model_decrease: -v,
            stopping_reason: StoppingReason::Pending,
        }),
    }
}

/// Exact global minimizer of the model along a line-shaped feasible set.
pub fn minimize_model_univariate(m: &RegularizedModel, region: &FeasibleRegion) -> Result<StepResult> {
    let view = region.line_view(m.taylor().base_point()).ok_or_else(|| {
        ArpError::Capability(format!("univariate minimization on a {}-dimensional {}", region.dim(), region.kind()))
    })?;
    line_step(m, &view)
}

/// Global minimizer of `gᵀs + ½sᵀHs + (σ/6)‖s‖³` on the whole space.
pub fn minimize_model_cubic(m: &RegularizedModel, region: &FeasibleRegion) -> Result<StepResult> {
    if m.p() != 2 || m.beta() != 1.0 || !matches!(region, FeasibleRegion::WholeSpace(_)) {
        return Err(ArpError::Capability("cubic solver needs p = 2, β = 1 on the whole space".into()));
    }
    let t = m.taylor();
    let g = t.deriv(1).entries().to_vec();
    let h = t.deriv(2).to_matrix();
    let sol = solve_cubic(&g, &h, m.sigma())?;
    let inc = m.increment(&sol.step)?;
    let scale = m.taylor().line_coefficients(&sol.step).map(|c| c[1..].iter().map(|v| v.abs()).sum::<f64>())?
        + m.weight() * norm2(&sol.step).powi(3);
    Ok(StepResult::pending(sol.step, inc, scale))
}

/// Global minimizer for `p = 1` on the whole space or a box (box needs `β = 1`).
fn minimize_model_linear(m: &RegularizedModel, region: &FeasibleRegion) -> Result<StepResult> {
    let g = m.taylor().deriv(1).entries().to_vec();
    let gn = norm2(&g);
    let x = m.taylor().base_point();
    let s: Vec<f64> = match region {
        FeasibleRegion::WholeSpace(_) => {
            if gn == 0.0 {
                return Ok(StepResult::none(g.len()));
            }
            let t = (gn / (m.weight() * m.power())).powf(1.0 / m.beta());
            g.iter().map(|v| -t * v / gn).collect()
        }
        FeasibleRegion::Box { lower, upper } if m.beta() == 1.0 => g
            .iter()
            .enumerate()
            .map(|(i, v)| (-v / m.sigma()).clamp((lower[i] - x[i]).min(0.0), (upper[i] - x[i]).max(0.0)))
            .collect(),
        _ => return Err(ArpError::Capability(format!("linear model on a {}", region.kind()))),
    };
    let inc = m.increment(&s)?;
    let scale = g.iter().zip(&s).map(|(a, b)| (a * b).abs()).sum::<f64>() + m.weight() * norm2(&s).powf(m.power());
    Ok(StepResult::pending(s, inc, scale))
}

/// Whether a global model minimizer is available for this region and degree.
pub fn step_capability(region: &FeasibleRegion, p: usize, beta: f64) -> Result<()> {
    let ok = region.dim() == 1
        || matches!(region, FeasibleRegion::Ray { .. })
        || match region {
            FeasibleRegion::WholeSpace(_) => p == 1 || (p == 2 && beta == 1.0),
            FeasibleRegion::Box { .. } => p == 1 && beta == 1.0,
            _ => false,
        };
    if ok {
        Ok(())
    } else {
        Err(ArpError::Capability(format!(
            "no global model minimizer for p = {p}, β = {beta} on a {}-dimensional {}",
            region.dim(),
            region.kind()
        )))
    }
}

/// Global model minimizer, dispatched on the region; the result is `Pending`
/// (or `NoDescentExists`) until validated by [`check_step_conditions`].
pub fn minimize_model(m: &RegularizedModel, region: &FeasibleRegion) -> Result<StepResult> {
    step_capability(region, m.p(), m.beta())?;
    if let Some(view) = region.line_view(m.taylor().base_point()) {
        return line_step(m, &view);
    }
    if m.p() == 1 {
        minimize_model_linear(m, region)
    } else {
        minimize_model_cubic(m, region)
    }
}

/// `φ^δ_{m,q}` at the trial point `x + s`.
pub fn model_measure(m: &RegularizedModel, s: &[f64], q: usize, delta: f64, region: &FeasibleRegion) -> Result<f64> {
    let x = m.taylor().base_point();
    let trial: Vec<f64> = x.iter().zip(s).map(|(a, b)| a + b).collect();
    if let (Some(view), Some(here)) = (region.line_view(x), region.line_view(&trial)) {
        // exact derivatives of the model along the line at τ₀
        let a = m.line_increment(&view.direction)?;
        let tau0: f64 = s.iter().zip(&view.direction).map(|(a, b)| a * b).sum();
        let r = m.power();
        let sign: f64 = if tau0 < 0.0 { -1.0 } else { 1.0 };
        let mut b = vec![0.0; q + 1];
        for (j, bj) in b.iter_mut().enumerate().skip(1) {
            let falling: f64 = (0..j).map(|i| r - i as f64).product();
            let reg = m.weight() * falling * tau0.abs().powf(r - j as f64) * sign.powi(j as i32);
            *bj = (poly::eval_derivative(&a, j, tau0) + reg) / factorial(j);
        }
        let (lo, hi) = here.clipped(delta);
        let (_, v) = min_increment_on_interval(&b, lo, hi);
        return Ok((-v).max(0.0));
    }
    let t = m.expansion_at(s, q)?;
    Ok(phi_measure(&t, q, delta, region)?.0)
}

/// Validates a computed step: long steps are accepted with `δ = 1`,
/// otherwise the largest `δ ∈ {1, ½, …, 2⁻²⁰}` meeting the inner
/// optimality test is recorded.
#[allow(clippy::too_many_arguments)]
pub fn check_step_conditions(
    step: StepResult,
    m: &RegularizedModel,
    q: usize,
    epsilon: f64,
    varpi: f64,
    theta: f64,
    region: &FeasibleRegion,
) -> Result<StepResult> {
    if step.stopping_reason == StoppingReason::NoDescentExists {
        return Ok(step);
    }
    if !(step.model_decrease > 0.0) {
        return Err(ArpError::Domain("step does not decrease the model".into()));
    }
    let p = m.p();
    if q > p {
        return Err(ArpError::Domain(format!("order {q} exceeds degree {p}")));
    }
    let gap = (p - q) as f64 + m.beta();
    let sn = norm2(&step.s);
    if sn >= varpi * epsilon.powf(1.0 / gap) {
        return Ok(StepResult { delta_k: 1.0, stopping_reason: StoppingReason::LongStep, ..step });
    }
    let scale = theta * sn.powf(gap) / generalized_factorial(p - q, m.beta())?;
    for e in 0..=DELTA_FLOOR_EXP {
        let delta = 0.5f64.powi(e);
        if model_measure(m, &step.s, q, delta, region)? <= scale * chi(q, delta) {
            return Ok(StepResult { delta_k: delta, stopping_reason: StoppingReason::InnerOptimality, ..step });
        }
    }
    Err(ArpError::Numerical {
        context: "inner optimality radius search",
        diagnostics: format!("no radius down to 2^-{DELTA_FLOOR_EXP} satisfies the inner test at |s| = {sn:e}"),
    })
}

/// `min_{‖d‖≤1} ∇m(s)ᵀd + ½dᵀ∇²m(s)d`.
pub fn inner_tr_minimum(m: &RegularizedModel, s: &[f64]) -> Result<f64> {
    let g = m.derivative(s, 1)?;
    let h = m.derivative(s, 2)?;
    Ok(solve_trust_region(g.entries(), &h.to_matrix(), 1.0)?.value)
}

/// Relaxed second-order inner test: the unit trust-region minimum of the
/// model's quadratic expansion at `s` is at least `−(3θ/2)‖s‖^{p−1}/(p−1)!`.
pub fn check_inner_tr_condition(m: &RegularizedModel, s: &[f64], theta: f64, p: usize) -> Result<bool> {
    if p < 2 {
        return Err(ArpError::Domain("second-order inner test needs p ≥ 2".into()));
    }
    let bound = -1.5 * theta * norm2(s).powi(p as i32 - 1) / factorial(p - 1);
    Ok(inner_tr_minimum(m, s)? >= bound)
}
