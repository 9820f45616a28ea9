//! Degree-(2p+1) Hermite interpolation, piecewise interpolants with
//! certified Lipschitz p-th derivatives, and the slow-convergence instance
//! built from them.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, Dyn, LU};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{ArpError, Result};
use crate::optimality::chi;
use crate::oracle::{check_call, DifferentiableOracle, Embedded};
use crate::poly;
use crate::region::FeasibleRegion;
use crate::tensor::{factorial, parse_field, SymmetricTensor};

/// Largest interpolation order handled; beyond it the factorials in `A_p`
/// lose too much precision.
pub const MAX_HERMITE_ORDER: usize = 10;
/// Relative end-condition residual above which an interpolant is rejected.
pub const END_CONDITION_RTOL: f64 = 1e-7;
/// Difference quotients sampled per segment by the Lipschitz certificate.
pub const LIPSCHITZ_PAIRS: usize = 10_000;
const LIPSCHITZ_SEED: u64 = 0x5eed_11b5;
/// Relative slack on the data bound, which holds with equality for some orders.
const DATA_BOUND_RTOL: f64 = 1e-9;
/// Points closer than this (relative) to a breakpoint are evaluated at the
/// breakpoint, on the segment that starts there.
pub const BREAKPOINT_SNAP: f64 = 1e-12;
/// Breakpoint window used by slow instances. Their iterate orbit amplifies
/// offsets from the nodes by up to ~40x per iteration, so rounding-level
/// drift must not reach the derivative data.
pub const NODE_SNAP: f64 = 1e-9;

fn falling(n: usize, k: usize) -> f64 {
    ((n - k + 1)..=n).map(|v| v as f64).product()
}

/// `A_p` with entries `(p+j+1)!/(p+j+1−i)!`, `i, j = 0..p`.
pub fn build_ap(p: usize) -> Result<DMatrix<f64>> {
    if p == 0 || p > MAX_HERMITE_ORDER {
        return Err(ArpError::Domain(format!("interpolation order {p} outside 1..={MAX_HERMITE_ORDER}")));
    }
    Ok(DMatrix::from_fn(p + 1, p + 1, |i, j| falling(p + j + 1, i)))
}

/// `‖M‖_∞`, the largest absolute row sum.
fn inf_norm(m: &DMatrix<f64>) -> f64 {
    m.row_iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

/// `Σ_{i=j}^{p} f⁽ⁱ⁾ s^{i−j}/(i−j)!`, the j-th derivative of the Taylor
/// polynomial of the data, minus its leading term `f⁽ʲ⁾`.
fn taylor_tail(f0: &[f64], j: usize, s: f64) -> f64 {
    (j + 1..f0.len()).map(|i| f0[i] * s.powi((i - j) as i32) / factorial(i - j)).sum()
}

/// `f₁⁽ʲ⁾ − T_p⁽ʲ⁾(0, s)`, computed with the leading terms cancelled first.
fn data_gap(f0: &[f64], f1: &[f64], j: usize, s: f64) -> f64 {
    (f1[j] - f0[j]) - taylor_tail(f0, j, s)
}

/// First order `j` at which `|f₁⁽ʲ⁾ − T_p⁽ʲ⁾(0,s)| ≤ κ_f s^{p−j+1}` fails,
/// with both sides.
pub fn data_bound_violation(f0: &[f64], f1: &[f64], s: f64, kappa_f: f64) -> Option<(usize, f64, f64)> {
    let p = f0.len() - 1;
    (0..=p).find_map(|j| {
        let lhs = data_gap(f0, f1, j, s).abs();
        let rhs = kappa_f * s.powi((p - j + 1) as i32);
        let scale = f1[j].abs().max(f0[j].abs()).max(taylor_tail(f0, j, s).abs());
        (lhs > rhs * (1.0 + DATA_BOUND_RTOL) + 1e-14 * scale).then_some((j, lhs, rhs))
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct HermiteSegment {
    pub left: f64,
    pub width: f64,
    /// `π(τ) = Σ cᵢ τⁱ` on `τ ∈ [0, width]`.
    pub coeffs: Vec<f64>,
}

impl HermiteSegment {
    pub fn order(&self) -> usize {
        (self.coeffs.len() - 2) / 2
    }

    pub fn right(&self) -> f64 {
        self.left + self.width
    }

    /// `π⁽ʲ⁾(τ)`.
    pub fn derivative(&self, tau: f64, j: usize) -> f64 {
        poly::eval_derivative(&self.coeffs, j, tau)
    }

    /// `π⁽ʲ⁾` for `j = 0..=p` at the left (`τ = 0`) or right end.
    pub fn end_data(&self, right: bool) -> Vec<f64> {
        let tau = if right { self.width } else { 0.0 };
        (0..=self.order()).map(|j| self.derivative(tau, j)).collect()
    }

    /// Largest relative mismatch with the prescribed end data.
    pub fn end_residual(&self, f0: &[f64], f1: &[f64]) -> f64 {
        let p = self.order();
        (0..=p)
            .map(|j| {
                let a = (self.derivative(0.0, j) - f0[j]).abs() / f0[j].abs().max(1.0);
                let scale = f1[j].abs().max(f0[j].abs()).max(taylor_tail(f0, j, self.width).abs()).max(1.0);
                let b = (self.derivative(self.width, j) - f1[j]).abs() / scale;
                a.max(b)
            })
            .fold(0.0, f64::max)
    }
}

/// Interpolation with a factorized `A_p`, reused across segments.
pub struct HermiteSolver {
    p: usize,
    lu: LU<f64, Dyn, Dyn>,
    inv_norm: f64,
}

impl HermiteSolver {
    pub fn new(p: usize) -> Result<Self> {
        let a = build_ap(p)?;
        let lu = a.clone().lu();
        let inv = lu
            .try_inverse()
            .ok_or_else(|| ArpError::Conditioning(format!("A_{p} is numerically singular")))?;
        Ok(HermiteSolver { p, lu, inv_norm: inf_norm(&inv) })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// `‖A_p⁻¹‖_∞`.
    pub fn inverse_norm(&self) -> f64 {
        self.inv_norm
    }

    /// `L_p = (p+1)(2p+1)!/p!·‖A_p⁻¹‖_∞·κ_f`.
    pub fn lipschitz_constant(&self, kappa_f: f64) -> f64 {
        let p = self.p;
        (p + 1) as f64 * factorial(2 * p + 1) / factorial(p) * self.inv_norm * kappa_f
    }

    pub fn interpolate(&self, left: f64, f0: &[f64], f1: &[f64], s: f64) -> Result<HermiteSegment> {
        let p = self.p;
        if f0.len() != p + 1 || f1.len() != p + 1 {
            return Err(ArpError::Shape(format!("interpolation data must have {} entries per end", p + 1)));
        }
        if !(s > 0.0) || !s.is_finite() {
            return Err(ArpError::Domain(format!("segment width {s} must be positive")));
        }
        let mut coeffs: Vec<f64> = f0.iter().enumerate().map(|(i, v)| v / factorial(i)).collect();
        // unknowns y_m = c_{p+1+m} s^{m+1}, right-hand sides scaled by s^{-(p-j)}
        let rhs = DVector::from_fn(p + 1, |j, _| data_gap(f0, f1, j, s) / s.powi((p - j) as i32));
        let y = self
            .lu
            .solve(&rhs)
            .ok_or_else(|| ArpError::Conditioning("A_p solve failed".into()))?;
        coeffs.extend(y.iter().enumerate().map(|(m, v)| v / s.powi(m as i32 + 1)));
        let seg = HermiteSegment { left, width: s, coeffs };
        let res = seg.end_residual(f0, f1);
        if !(res <= END_CONDITION_RTOL) {
            return Err(ArpError::Conditioning(format!(
                "end-condition residual {res:e} on [{left}, {}] (p = {p}, width {s:e})",
                left + s
            )));
        }
        Ok(seg)
    }
}

/// Interpolant of degree `2p+1` on `[0, s]` matching `f₀⁽ⁱ⁾` at 0 and `f₁⁽ⁱ⁾` at `s`.
pub fn hermite_interpolate(f0: &[f64], f1: &[f64], s: f64) -> Result<HermiteSegment> {
    if f0.is_empty() {
        return Err(ArpError::Shape("empty interpolation data".into()));
    }
    HermiteSolver::new(f0.len() - 1)?.interpolate(0.0, f0, f1, s)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LipschitzCertificate {
    /// Certified Lipschitz constant of `π⁽ᵖ⁾`.
    pub bound: f64,
    /// Largest sampled difference quotient of `π⁽ᵖ⁾`.
    pub sampled_max: f64,
}

/// Certifies the Lipschitz constant of a segment's p-th derivative from its
/// end data and checks it against sampled difference quotients.
pub fn lipschitz_certificate(seg: &HermiteSegment, kappa_f: f64) -> Result<LipschitzCertificate> {
    lipschitz_certificate_sampled(seg, kappa_f, LIPSCHITZ_PAIRS)
}

pub fn lipschitz_certificate_sampled(seg: &HermiteSegment, kappa_f: f64, pairs: usize) -> Result<LipschitzCertificate> {
    let p = seg.order();
    let f0 = seg.end_data(false);
    let f1 = seg.end_data(true);
    if let Some((j, lhs, rhs)) = data_bound_violation(&f0, &f1, seg.width, kappa_f) {
        return Err(ArpError::Domain(format!(
            "data bound fails at order {j}: {lhs:e} > {rhs:e} on [{}, {}]",
            seg.left,
            seg.right()
        )));
    }
    let bound = HermiteSolver::new(p)?.lipschitz_constant(kappa_f);
    let mut rng = ChaCha8Rng::seed_from_u64(LIPSCHITZ_SEED);
    let mut sampled_max = 0.0_f64;
    let min_gap = 1e-6 * seg.width;
    for _ in 0..pairs {
        let a = rng.gen_range(0.0..=seg.width);
        let b = rng.gen_range(0.0..=seg.width);
        if (a - b).abs() < min_gap {
            continue;
        }
        let q = (seg.derivative(a, p) - seg.derivative(b, p)).abs() / (a - b).abs();
        sampled_max = sampled_max.max(q);
    }
    if sampled_max > bound * (1.0 + 1e-9) {
        return Err(ArpError::Construction {
            relation: "Lipschitz certificate",
            detail: format!("sampled quotient {sampled_max:e} exceeds certified {bound:e}"),
        });
    }
    Ok(LipschitzCertificate { bound, sampled_max })
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

/// Piecewise Hermite interpolant with constant tails.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewisePolynomial {
    p: usize,
    segments: Vec<HermiteSegment>,
    left_tail: f64,
    right_tail: f64,
    snap: f64,
}

impl PiecewisePolynomial {
    pub fn new(p: usize, segments: Vec<HermiteSegment>, left_tail: f64, right_tail: f64) -> Result<Self> {
        if segments.is_empty() {
            return Err(ArpError::Domain("piecewise polynomial needs a segment".into()));
        }
        for (i, s) in segments.iter().enumerate() {
            if s.coeffs.len() != 2 * p + 2 || !(s.width > 0.0) {
                return Err(ArpError::Shape(format!("segment {i} is not a degree-{} piece", 2 * p + 1)));
            }
        }
        Ok(PiecewisePolynomial { p, segments, left_tail, right_tail, snap: BREAKPOINT_SNAP })
    }

    /// Sets the relative breakpoint window (see [`BREAKPOINT_SNAP`]).
    pub fn with_snap(mut self, snap: f64) -> Self {
        self.snap = snap;
        self
    }

    pub fn snap(&self) -> f64 {
        self.snap
    }

    pub fn order(&self) -> usize {
        self.p
    }

    pub fn segments(&self) -> &[HermiteSegment] {
        &self.segments
    }

    pub fn tails(&self) -> (f64, f64) {
        (self.left_tail, self.right_tail)
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        let mut b: Vec<f64> = self.segments.iter().map(|s| s.left).collect();
        b.push(self.segments.last().expect("non-empty").right());
        b
    }

    /// Largest derivative jump (orders `0..=p`) at the interior breakpoints and
    /// where the tails join, relative to `max(1, |value|)`.
    pub fn continuity_defect(&self) -> f64 {
        let mut worst = 0.0_f64;
        let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(1.0);
        for w in self.segments.windows(2) {
            for j in 0..=self.p {
                worst = worst.max(rel(w[0].derivative(w[0].width, j), w[1].derivative(0.0, j)));
            }
        }
        let first = &self.segments[0];
        let last = self.segments.last().expect("non-empty");
        for j in 0..=self.p {
            let (lt, rt) = if j == 0 { (self.left_tail, self.right_tail) } else { (0.0, 0.0) };
            worst = worst.max(rel(first.derivative(0.0, j), lt));
            worst = worst.max(rel(last.derivative(last.width, j), rt));
        }
        worst
    }

    /// `f⁽ʲ⁾(x)`.
    pub fn eval(&self, x: f64, j: usize) -> f64 {
        let first = &self.segments[0];
        let last = self.segments.last().expect("non-empty");
        let snap = self.snap * (1.0 + x.abs());
        if x < first.left - snap {
            return if j == 0 { self.left_tail } else { 0.0 };
        }
        if x > last.right() + snap {
            return if j == 0 { self.right_tail } else { 0.0 };
        }
        let idx = self.segments.partition_point(|s| s.left <= x + snap).saturating_sub(1);
        let seg = &self.segments[idx];
        let tau = x - seg.left;
        if tau.abs() <= snap {
            seg.derivative(0.0, j)
        } else if (tau - seg.width).abs() <= snap {
            seg.derivative(seg.width, j)
        } else {
            seg.derivative(tau, j)
        }
    }

    /// Exact global minimum of the interpolant.
    pub fn global_min(&self) -> f64 {
        let mut best = self.left_tail.min(self.right_tail);
        for s in &self.segments {
            for (_, v) in poly::candidates_on_interval(&s.coeffs, 0.0, s.width) {
                best = best.min(v);
            }
        }
        best
    }
}

impl DifferentiableOracle for PiecewisePolynomial {
    fn dim(&self) -> usize {
        1
    }
    fn max_order(&self) -> usize {
        self.p
    }
    fn value(&self, x: &[f64]) -> Result<f64> {
        if x.len() != 1 {
            return Err(ArpError::Shape("univariate interpolant evaluated at a vector".into()));
        }
        Ok(self.eval(x[0], 0))
    }
    fn derivative(&self, x: &[f64], order: usize) -> Result<SymmetricTensor> {
        check_call(1, self.p, x, order)?;
        SymmetricTensor::from_entries(order, 1, vec![self.eval(x[0], order)])
    }
}

/// `k_ε = ⌈ε^{−(p+1)/(p−q+1)}⌉`, with powers that are integers up to
/// rounding taken as exact.
pub fn slow_iteration_count(p: usize, q: usize, epsilon: f64) -> Result<usize> {
    if q == 0 || q > p {
        return Err(ArpError::Domain(format!("need 1 ≤ q ≤ p, got p = {p}, q = {q}")));
    }
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(ArpError::Domain(format!("accuracy {epsilon} outside (0, 1]")));
    }
    let v = epsilon.powf(-((p + 1) as f64) / ((p - q + 1) as f64));
    let r = v.round();
    let k = if (v - r).abs() <= 1e-9 * v { r } else { v.ceil() };
    if k > 1e9 {
        return Err(ArpError::Domain(format!("iteration count {k:e} too large to build")));
    }
    Ok(k as usize)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmbeddingKind {
    WholeSpace,
    Ray,
}

/// The slow-convergence objective: nodes `x_k`, prescribed derivative data
/// and its Hermite interpolant.
#[derive(Debug, Clone, PartialEq)]
pub struct SlowInstance {
    p: usize,
    q: usize,
    epsilon: f64,
    k_eps: usize,
    nodes: Vec<f64>,
    /// `data[k][j] = f_k⁽ʲ⁾`.
    data: Vec<Vec<f64>>,
    interpolant: Arc<PiecewisePolynomial>,
}

impl SlowInstance {
    pub fn build(p: usize, q: usize, epsilon: f64) -> Result<Self> {
        if p > MAX_HERMITE_ORDER {
            return Err(ArpError::Domain(format!("order {p} exceeds {MAX_HERMITE_ORDER}")));
        }
        let k_eps = slow_iteration_count(p, q, epsilon)?;
        let chi_q = chi(q, 1.0);
        let gap = (p - q + 1) as f64;
        let expo = (p + 1) as f64 / gap;
        let zeta = gap / (q as f64 * (p + 1) as f64);
        let omega = |k: usize| epsilon * (k_eps - k) as f64 / k_eps as f64;

        let mut nodes = Vec::with_capacity(k_eps + 1);
        let mut data = Vec::with_capacity(k_eps + 1);
        let mut x = 0.0;
        let mut f = 2.0 * (2.0 * q as f64 * chi_q).powf(expo);
        for k in 0..=k_eps {
            let w = omega(k);
            let mut d = vec![0.0; p + 1];
            d[0] = f;
            d[q] = -(epsilon + w) * factorial(q) * chi_q;
            nodes.push(x);
            data.push(d);
            let base = q as f64 * (epsilon + w) * chi_q;
            x += base.powf(1.0 / gap);
            f -= zeta * base.powf(expo);
        }

        let solver = HermiteSolver::new(p)?;
        let kappa_f = factorial(q - 1);
        let mut segments = Vec::with_capacity(k_eps + 2);
        let flat = |v: f64| {
            let mut d = vec![0.0; p + 1];
            d[0] = v;
            d
        };
        let left_data = flat(data[0][0]);
        let w_left = prolongation_width(&left_data, &data[0], kappa_f)?;
        segments.push(solver.interpolate(-w_left, &left_data, &data[0], w_left)?);
        for k in 0..k_eps {
            segments.push(solver.interpolate(nodes[k], &data[k], &data[k + 1], nodes[k + 1] - nodes[k])?);
        }
        let right_data = flat(data[k_eps][0]);
        let w_right = prolongation_width(&data[k_eps], &right_data, kappa_f)?;
        segments.push(solver.interpolate(nodes[k_eps], &data[k_eps], &right_data, w_right)?);

        let interpolant = PiecewisePolynomial::new(p, segments, data[0][0], data[k_eps][0])?.with_snap(NODE_SNAP);
        let inst = SlowInstance { p, q, epsilon, k_eps, nodes, data, interpolant: Arc::new(interpolant) };
        inst.verify()?;
        Ok(inst)
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn k_eps(&self) -> usize {
        self.k_eps
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn data(&self) -> &[Vec<f64>] {
        &self.data
    }

    /// `ω_k = ε(k_ε − k)/k_ε`.
    pub fn omega(&self, k: usize) -> f64 {
        self.epsilon * (self.k_eps - k) as f64 / self.k_eps as f64
    }

    /// `s_k = x_{k+1} − x_k` for `k < k_ε`.
    pub fn step(&self, k: usize) -> f64 {
        self.nodes[k + 1] - self.nodes[k]
    }

    /// The regularization weight the construction assumes, `p!`.
    pub fn sigma(&self) -> f64 {
        factorial(self.p)
    }

    pub fn interpolant(&self) -> &Arc<PiecewisePolynomial> {
        &self.interpolant
    }

    /// `κ_f = (q−1)!`.
    pub fn kappa_f(&self) -> f64 {
        factorial(self.q - 1)
    }

    /// Lipschitz constant of the p-th derivative certified on every segment.
    pub fn lipschitz(&self) -> Result<f64> {
        Ok(HermiteSolver::new(self.p)?.lipschitz_constant(self.kappa_f()))
    }

    /// Exact lower bound on the objective.
    pub fn f_low(&self) -> f64 {
        self.interpolant.global_min()
    }

    /// Checks every defining relation of the instance.
    pub fn verify(&self) -> Result<()> {
        let (p, q, eps) = (self.p, self.q, self.epsilon);
        let chi_q = chi(q, 1.0);
        let gap = (p - q + 1) as f64;
        let fail = |relation: &'static str, detail: String| Err(ArpError::Construction { relation, detail });
        let top = 2.0 * (2.0 * q as f64 * chi_q).powf((p + 1) as f64 / gap);
        if self.omega(self.k_eps) != 0.0 {
            return fail("relaxation sequence", "final relaxation is not zero".into());
        }
        for (k, d) in self.data.iter().enumerate() {
            for (j, v) in d.iter().enumerate().skip(1) {
                let expect = if j == q { -(eps + self.omega(k)) * factorial(q) * chi_q } else { 0.0 };
                if !rel_close(*v, expect, 1e-12) {
                    return fail("derivative data", format!("f_{k}^({j}) = {v:e}, expected {expect:e}"));
                }
            }
            if !(d[0] >= -1e-12 * top && d[0] <= top * (1.0 + 1e-12)) {
                return fail("value range", format!("f_{k} = {:e} outside [0, {top:e}]", d[0]));
            }
        }
        let floor = eps.powf(1.0 / gap);
        for k in 0..self.k_eps {
            let s = self.step(k);
            if !(s > floor) {
                return fail("step length", format!("s_{k} = {s:e} not above {floor:e}"));
            }
            if let Some((j, lhs, rhs)) = data_bound_violation(&self.data[k], &self.data[k + 1], s, self.kappa_f()) {
                return fail("data bound", format!("k = {k}, order {j}: {lhs:e} > {rhs:e}"));
            }
            let t = self.data[k][0] + taylor_tail(&self.data[k], 0, s);
            let expect = s.powi(p as i32 + 1) / (p + 1) as f64;
            if !rel_close(self.data[k + 1][0] - t, expect, 1e-9) {
                return fail("value decrease", format!("k = {k}: gap {:e}, expected {expect:e}", self.data[k + 1][0] - t));
            }
        }
        let segs = self.interpolant.segments();
        if segs.len() != self.k_eps + 2 {
            return fail("segment count", format!("{} segments for {} nodes", segs.len(), self.nodes.len()));
        }
        for (k, seg) in segs[1..=self.k_eps].iter().enumerate() {
            let res = seg.end_residual(&self.data[k], &self.data[k + 1]);
            if !(res <= 1e-9) {
                return fail("interpolation end conditions", format!("segment {k}: residual {res:e}"));
            }
        }
        for seg in [&segs[0], &segs[self.k_eps + 1]] {
            let (f0, f1) = (seg.end_data(false), seg.end_data(true));
            if let Some((j, lhs, rhs)) = data_bound_violation(&f0, &f1, seg.width, self.kappa_f()) {
                return fail("data bound", format!("prolongation segment, order {j}: {lhs:e} > {rhs:e}"));
            }
        }
        let defect = self.interpolant.continuity_defect();
        if !(defect <= 1e-9) {
            return fail("continuity", format!("derivative jump {defect:e} at a breakpoint"));
        }
        Ok(())
    }

    /// Runs the data-bound check and the sampled Lipschitz certificate on
    /// every segment, including the two prolongations.
    pub fn certify_segments(&self) -> Result<Vec<LipschitzCertificate>> {
        let kappa = self.kappa_f();
        self.interpolant.segments().par_iter().map(|seg| lipschitz_certificate(seg, kappa)).collect()
    }

    /// Plain-text serialization; floats use the shortest round-trip form.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let w = |s: &mut String, vals: &mut dyn Iterator<Item = f64>| {
            let row: Vec<String> = vals.map(|v| format!("{v:e}")).collect();
            writeln!(s, "{}", row.join(" ")).expect("writing to a String cannot fail");
        };
        writeln!(s, "slow-instance {} {} {:e} {}", self.p, self.q, self.epsilon, self.k_eps).expect("string write");
        writeln!(s, "nodes {}", self.nodes.len()).expect("string write");
        for (x, d) in self.nodes.iter().zip(&self.data) {
            w(&mut s, &mut std::iter::once(*x).chain(d.iter().copied()));
        }
        let segs = self.interpolant.segments();
        writeln!(s, "segments {}", segs.len()).expect("string write");
        for seg in segs {
            w(&mut s, &mut [seg.left, seg.width].into_iter().chain(seg.coeffs.iter().copied()));
        }
        let (l, r) = self.interpolant.tails();
        writeln!(s, "tails {l:e} {r:e}").expect("string write");
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let mut next = |what: &str| lines.next().ok_or_else(|| ArpError::Parse(format!("missing {what}")));
        let header = next("header")?;
        let mut h = header.split_whitespace();
        if h.next() != Some("slow-instance") {
            return Err(ArpError::Parse(format!("bad header {header:?}")));
        }
        let p: usize = parse_field(h.next(), "p")?;
        let q: usize = parse_field(h.next(), "q")?;
        let epsilon: f64 = parse_field(h.next(), "epsilon")?;
        let k_eps: usize = parse_field(h.next(), "k_eps")?;
        let count = |line: &str, key: &str| -> Result<usize> {
            let mut it = line.split_whitespace();
            if it.next() != Some(key) {
                return Err(ArpError::Parse(format!("expected {key:?} section, got {line:?}")));
            }
            parse_field(it.next(), key)
        };
        let row = |line: &str, len: usize, what: &str| -> Result<Vec<f64>> {
            let v = line
                .split_whitespace()
                .map(|f| parse_field(Some(f), what))
                .collect::<Result<Vec<f64>>>()?;
            if v.len() != len {
                return Err(ArpError::Parse(format!("{what} row has {} fields, expected {len}", v.len())));
            }
            Ok(v)
        };
        let n_nodes = count(next("nodes")?, "nodes")?;
        let mut nodes = Vec::with_capacity(n_nodes);
        let mut data = Vec::with_capacity(n_nodes);
        for _ in 0..n_nodes {
            let v = row(next("node row")?, p + 2, "node")?;
            nodes.push(v[0]);
            data.push(v[1..].to_vec());
        }
        let n_segs = count(next("segments")?, "segments")?;
        let mut segments = Vec::with_capacity(n_segs);
        for _ in 0..n_segs {
            let v = row(next("segment row")?, 2 * p + 4, "segment")?;
            segments.push(HermiteSegment { left: v[0], width: v[1], coeffs: v[2..].to_vec() });
        }
        let tails = next("tails")?;
        let mut t = tails.split_whitespace();
        if t.next() != Some("tails") {
            return Err(ArpError::Parse(format!("expected tails, got {tails:?}")));
        }
        let lt: f64 = parse_field(t.next(), "left tail")?;
        let rt: f64 = parse_field(t.next(), "right tail")?;
        if q == 0 || q > p || n_nodes != k_eps + 1 {
            return Err(ArpError::Parse("inconsistent instance header".into()));
        }
        let interpolant = Arc::new(PiecewisePolynomial::new(p, segments, lt, rt)?.with_snap(NODE_SNAP));
        let inst = SlowInstance { p, q, epsilon, k_eps, nodes, data, interpolant };
        inst.verify()?;
        Ok(inst)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| ArpError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| ArpError::io(path, e))?;
        Self::from_text(&text)
    }
}

/// Width for a prolongation segment: start at 1 and double until the data
/// bound holds.
fn prolongation_width(f0: &[f64], f1: &[f64], kappa_f: f64) -> Result<f64> {
    let mut w = 1.0;
    for _ in 0..200 {
        if data_bound_violation(f0, f1, w, kappa_f).is_none() {
            return Ok(w);
        }
        w *= 2.0;
    }
    Err(ArpError::Construction {
        relation: "data bound",
        detail: "no prolongation width up to 2^200 satisfies the data bound".into(),
    })
}

/// Lifts the univariate instance to ℝⁿ along `direction` (origin at 0),
/// returning the objective and its feasible region.
pub fn embed_instance(
    inst: &SlowInstance,
    n: usize,
    direction: &[f64],
    kind: EmbeddingKind,
) -> Result<(Embedded<Arc<PiecewisePolynomial>>, FeasibleRegion)> {
    if direction.len() != n {
        return Err(ArpError::Shape(format!("direction of length {} for dimension {n}", direction.len())));
    }
    let origin = vec![0.0; n];
    let oracle = Embedded::new(inst.interpolant().clone(), origin.clone(), direction.to_vec())?;
    let region = match kind {
        EmbeddingKind::WholeSpace => FeasibleRegion::whole_space(n)?,
        EmbeddingKind::Ray => FeasibleRegion::ray(origin, direction.to_vec())?,
    };
    Ok((oracle, region))
}
