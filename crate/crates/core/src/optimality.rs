//! The optimality measure `φ^δ_{f,j}(x) = f(x) − min_{x+d ∈ 𝓕, ‖d‖ ≤ δ} T_j(x, d)`
//! and the termination test built on it.

use crate::error::{ArpError, Result};
use crate::poly;
use crate::region::FeasibleRegion;
use crate::taylor::TaylorModel;
use crate::tensor::{factorial, norm2, SymmetricTensor};
use crate::trust_region::solve_trust_region;

/// `χ_q(δ) = Σ_{ℓ=1}^{q} δ^ℓ / ℓ!`.
pub fn chi(q: usize, delta: f64) -> f64 {
    (1..=q).map(|l| delta.powi(l as i32) / factorial(l)).sum()
}

pub fn check_termination(phi: f64, epsilon: f64, q: usize, delta: f64) -> bool {
    phi <= epsilon * chi(q, delta)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimalityCertificate {
    pub phi: f64,
    pub delta: f64,
    pub epsilon: f64,
    pub order: usize,
    pub satisfied: bool,
    /// Step achieving the largest Taylor decrease, when it was computed.
    pub argmin_d: Option<Vec<f64>>,
}

impl OptimalityCertificate {
    pub fn new(phi: f64, delta: f64, epsilon: f64, order: usize, argmin_d: Option<Vec<f64>>) -> Self {
        OptimalityCertificate {
            phi,
            delta,
            epsilon,
            order,
            satisfied: check_termination(phi, epsilon, order, delta),
            argmin_d,
        }
    }
}

/// Global minimum of the polynomial increment `Σ_{ℓ≥1} aℓ τ^ℓ` over
/// `[lo, hi]` (which must contain 0). Returns `(τ, value)`; ties keep the
/// earliest candidate, and 0 is always a candidate.
pub(crate) fn min_increment_on_interval(coeffs: &[f64], lo: f64, hi: f64) -> (f64, f64) {
    let mut c = coeffs.to_vec();
    if let Some(c0) = c.first_mut() {
        *c0 = 0.0;
    }
    let mut best = (0.0, 0.0);
    for (t, v) in poly::candidates_on_interval(&c, lo, hi) {
        if v < best.1 {
            best = (t, v);
        }
    }
    best
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(ArpError::Domain(format!("radius {delta} outside (0, 1]")));
    }
    Ok(())
}

/// `φ` of the degree-`j` truncation of `t` along the one-dimensional view
/// of `region` from the model's base point.
fn phi_on_line(t: &TaylorModel, j: usize, delta: f64, region: &FeasibleRegion) -> Result<Option<(f64, Vec<f64>)>> {
    let Some(view) = region.line_view(t.base_point()) else {
        return Ok(None);
    };
    let coeffs = t.truncated(j).line_coefficients(&view.direction)?;
    let (lo, hi) = view.clipped(delta);
    let (tau, value) = min_increment_on_interval(&coeffs, lo, hi);
    let d = view.direction.iter().map(|u| tau * u).collect();
    Ok(Some(((-value).max(0.0), d)))
}

/// Exact first-order measure; also returns the minimizing direction.
pub fn phi_order1_with_argmin(grad: &[f64], delta: f64, region: &FeasibleRegion, x: &[f64]) -> Result<(f64, Vec<f64>)> {
    check_delta(delta)?;
    if grad.len() != region.dim() || x.len() != region.dim() {
        return Err(ArpError::Shape("gradient, point and region dimensions differ".into()));
    }
    if let Some(view) = region.line_view(x) {
        let slope: f64 = grad.iter().zip(&view.direction).map(|(g, u)| g * u).sum();
        let (lo, hi) = view.clipped(delta);
        let tau = if slope > 0.0 { lo } else if slope < 0.0 { hi } else { 0.0 };
        let d = view.direction.iter().map(|u| tau * u).collect();
        return Ok(((-slope * tau).max(0.0), d));
    }
    match region {
        FeasibleRegion::WholeSpace(_) => {
            let g = norm2(grad);
            let d = if g > 0.0 { grad.iter().map(|v| -delta * v / g).collect() } else { vec![0.0; grad.len()] };
            Ok((g * delta, d))
        }
        FeasibleRegion::Box { lower, upper } => {
            let l: Vec<f64> = lower.iter().zip(x).map(|(a, b)| (a - b).min(0.0)).collect();
            let u: Vec<f64> = upper.iter().zip(x).map(|(a, b)| (a - b).max(0.0)).collect();
            let step = |mu: f64| -> Vec<f64> {
                grad.iter()
                    .zip(l.iter().zip(&u))
                    .map(|(g, (lo, hi))| {
                        if *g == 0.0 {
                            0.0
                        } else if mu == 0.0 {
                            if *g > 0.0 { *lo } else { *hi }
                        } else {
                            (-g / mu).clamp(*lo, *hi)
                        }
                    })
                    .collect()
            };
            let mut d = step(0.0);
            if norm2(&d) > delta {
                // ‖d(μ)‖ decreases in μ; bracket and bisect in log μ
                let mut mu_lo = 1e-300_f64;
                let mut mu_hi = norm2(grad) / delta;
                for _ in 0..200 {
                    let mid = (mu_lo * mu_hi).sqrt();
                    if norm2(&step(mid)) > delta {
                        mu_lo = mid;
                    } else {
                        mu_hi = mid;
                    }
                    if mu_hi / mu_lo < 1.0 + 1e-15 {
                        break;
                    }
                }
                d = step(mu_hi);
            }
            let value: f64 = grad.iter().zip(&d).map(|(g, di)| g * di).sum();
            Ok(((-value).max(0.0), d))
        }
        FeasibleRegion::Ray { .. } | FeasibleRegion::Interval { .. } => unreachable!("line views handled above"),
    }
}

/// `φ^δ_{f,1}(x)`: `‖g‖δ` on the whole space, and the exact linear
/// minimization over the feasible ball otherwise.
pub fn phi_order1(grad: &[f64], delta: f64, region: &FeasibleRegion, x: &[f64]) -> Result<f64> {
    Ok(phi_order1_with_argmin(grad, delta, region, x)?.0)
}

/// `φ^δ_{f,2}(x)` through a trust-region subproblem of radius `δ`.
pub fn phi_order2(
    grad: &[f64],
    hess: &SymmetricTensor,
    delta: f64,
    region: &FeasibleRegion,
    x: &[f64],
) -> Result<(f64, Vec<f64>)> {
    check_delta(delta)?;
    if hess.order() != 2 || hess.dim() != grad.len() || grad.len() != region.dim() {
        return Err(ArpError::Shape("second-order data does not match the region".into()));
    }
    if let Some(view) = region.line_view(x) {
        let t = TaylorModel::new(x.to_vec(), 0.0, vec![SymmetricTensor::from_vector(grad), hess.clone()])?;
        let coeffs = t.line_coefficients(&view.direction)?;
        let (lo, hi) = view.clipped(delta);
        let (tau, value) = min_increment_on_interval(&coeffs, lo, hi);
        return Ok(((-value).max(0.0), view.direction.iter().map(|u| tau * u).collect()));
    }
    let usable = match region {
        FeasibleRegion::WholeSpace(_) => true,
        FeasibleRegion::Box { .. } => region.interior_margin(x) >= delta,
        _ => false,
    };
    if !usable {
        return Err(ArpError::Capability(format!(
            "second-order measure on a {} closer than the radius to its boundary",
            region.kind()
        )));
    }
    let sol = solve_trust_region(grad, &hess.to_matrix(), delta)?;
    Ok(((-sol.value).max(0.0), sol.step))
}

/// `φ^δ_{f,j}` for a univariate (or line-restricted) Taylor model, computed
/// exactly from the stationary points of the degree-`j` polynomial.
pub fn phi_univariate(t: &TaylorModel, j: usize, delta: f64, region: &FeasibleRegion) -> Result<(f64, f64)> {
    check_delta(delta)?;
    if j > t.degree() {
        return Err(ArpError::Domain(format!("order {j} exceeds model degree {}", t.degree())));
    }
    match phi_on_line(t, j, delta, region)? {
        Some((phi, d)) => {
            let u = region.line_view(t.base_point()).expect("line view").direction;
            Ok((phi, d.iter().zip(&u).map(|(a, b)| a * b).sum()))
        }
        None => Err(ArpError::Capability(format!(
            "univariate measure requested on a {} in dimension {}",
            region.kind(),
            region.dim()
        ))),
    }
}

/// `φ^δ_{t,q}` at the model's base point, dispatched on the region.
pub fn phi_measure(t: &TaylorModel, q: usize, delta: f64, region: &FeasibleRegion) -> Result<(f64, Vec<f64>)> {
    check_delta(delta)?;
    if q == 0 || q > t.degree() {
        return Err(ArpError::Domain(format!("order {q} outside 1..={}", t.degree())));
    }
    if let Some(out) = phi_on_line(t, q, delta, region)? {
        return Ok(out);
    }
    let x = t.base_point();
    match q {
        1 => phi_order1_with_argmin(t.deriv(1).entries(), delta, region, x),
        2 => phi_order2(t.deriv(1).entries(), t.deriv(2), delta, region, x),
        _ => Err(ArpError::Capability(format!(
            "order-{q} measure on a {}-dimensional {}",
            region.dim(),
            region.kind()
        ))),
    }
}

/// Neighbourhood on which an approximate minimizer is certified:
/// `f(x+d) ≥ f(x) − 2εχ_q(δ)` for feasible `‖d‖ ≤ radius`.
pub fn near_minimizer_certificate(epsilon: f64, delta: f64, q: usize, beta: f64, lipschitz: f64, f_x: f64) -> Result<(f64, f64)> {
    check_delta(delta)?;
    if !(lipschitz > 0.0) {
        return Err(ArpError::Domain("Lipschitz constant must be positive".into()));
    }
    if q == 0 || !(beta > 0.0 && beta <= 1.0) {
        return Err(ArpError::Domain(format!("order {q} and exponent {beta} must satisfy q ≥ 1, 0 < β ≤ 1")));
    }
    let exponent = 1.0 / (q as f64 + beta - 1.0);
    let radius = delta.min((factorial(q + 1) * epsilon / lipschitz).powf(exponent));
    Ok((radius, f_x - 2.0 * epsilon * chi(q, delta)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::{DMatrix, DVector};

    fn diag(v: &[f64]) -> SymmetricTensor {
        SymmetricTensor::from_matrix(&DMatrix::from_diagonal(&DVector::from_column_slice(v))).unwrap()
    }

    #[test]
    fn chi_values() {
        assert_eq!(chi(1, 0.5), 0.5);
        assert_eq!(chi(2, 1.0), 1.5);
        assert_relative_eq!(chi(3, 0.5), 0.5 + 0.125 + 0.5f64.powi(3) / 6.0, epsilon = 1e-15);
        for q in 1..5 {
            for d in [0.01, 0.3, 1.0] {
                assert!(d <= chi(q, d));
            }
        }
    }

    #[test]
    fn termination_test() {
        assert!(check_termination(0.0, 0.1, 2, 0.5));
        let (eps, omega) = (0.1, 0.05);
        assert!(!check_termination((eps + omega) * chi(2, 1.0), eps, 2, 1.0));
        assert!(check_termination(eps * chi(3, 0.7), eps, 3, 0.7));
    }

    #[test]
    fn first_order_examples() {
        let ws = FeasibleRegion::WholeSpace(2);
        assert_eq!(phi_order1(&[3.0, 4.0], 0.5, &ws, &[0.0, 0.0]).unwrap(), 2.5);
        let ray = FeasibleRegion::ray(vec![0.0, 0.0], vec![1.0, 0.0]).unwrap();
        assert_eq!(phi_order1(&[1.0, 0.0], 1.0, &ray, &[0.0, 0.0]).unwrap(), 0.0);
        let iv = FeasibleRegion::interval(-1.0, 1.0).unwrap();
        assert_eq!(phi_order1(&[-2.0], 0.25, &iv, &[0.0]).unwrap(), 0.5);
    }

    #[test]
    fn first_order_box_is_clamped() {
        // g = (−1, −1), box allows at most 0.1 in the first coordinate
        let b = FeasibleRegion::boxed(vec![-1.0, -1.0], vec![0.1, 5.0]).unwrap();
        let (phi, d) = phi_order1_with_argmin(&[-1.0, -1.0], 1.0, &b, &[0.0, 0.0]).unwrap();
        assert_relative_eq!(d[0], 0.1, epsilon = 1e-12);
        assert_relative_eq!(d[1], (1.0f64 - 0.01).sqrt(), epsilon = 1e-12);
        assert_relative_eq!(phi, 0.1 + 0.99f64.sqrt(), epsilon = 1e-12);
        // far from the walls the box agrees with the whole space
        let (phi, _) = phi_order1_with_argmin(&[0.3, -0.4], 0.5, &b, &[-0.2, 1.0]).unwrap();
        assert_relative_eq!(phi, 0.25, epsilon = 1e-12);
    }

    #[test]
    fn second_order_examples() {
        let ws = FeasibleRegion::WholeSpace(2);
        let (phi, d) = phi_order2(&[0.0, 0.0], &diag(&[-1.0, 2.0]), 1.0, &ws, &[0.0, 0.0]).unwrap();
        assert_relative_eq!(phi, 0.5, epsilon = 1e-14);
        assert_relative_eq!(d[0].abs(), 1.0, epsilon = 1e-14);
        let (phi, d) = phi_order2(&[-0.5, 0.0], &diag(&[1.0, 1.0]), 1.0, &ws, &[0.0, 0.0]).unwrap();
        assert_relative_eq!(phi, 0.125, epsilon = 1e-14);
        assert_relative_eq!(d[0], 0.5, epsilon = 1e-14);
        let b = FeasibleRegion::boxed(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap();
        assert!(matches!(
            phi_order2(&[0.0, 0.0], &diag(&[1.0, 1.0]), 0.5, &b, &[0.8, 0.0]),
            Err(ArpError::Capability(_))
        ));
    }

    #[test]
    fn univariate_examples() {
        let ws = FeasibleRegion::WholeSpace(1);
        // T = s² − 2s³: φ = 1 at d = 1
        let t = TaylorModel::univariate(0.0, 0.0, &[0.0, 2.0, -12.0]);
        let (phi, d) = phi_univariate(&t, 3, 1.0, &ws).unwrap();
        assert_relative_eq!(phi, 1.0, epsilon = 1e-14);
        assert_relative_eq!(d, 1.0, epsilon = 1e-14);
        let eps = 0.2;
        let t = TaylorModel::univariate(0.0, 1.0, &[-eps]);
        assert_eq!(phi_univariate(&t, 1, 1.0, &ws).unwrap(), (eps, 1.0));
        // slow-instance data: only the q-th derivative, −(ε+ω)q!χ_q(1)
        for q in 1..=3 {
            let (eps, omega) = (0.25, 0.1);
            let mut derivs = vec![0.0; 3];
            derivs[q - 1] = -(eps + omega) * factorial(q) * chi(q, 1.0);
            let t = TaylorModel::univariate(0.0, 3.0, &derivs);
            let (phi, _) = phi_univariate(&t, q, 1.0, &ws).unwrap();
            assert_relative_eq!(phi, (eps + omega) * chi(q, 1.0), max_relative = 1e-14);
        }
    }

    #[test]
    fn certificate_arithmetic() {
        let (r, b) = near_minimizer_certificate(0.01, 1.0, 1, 1.0, 1.0, 3.0).unwrap();
        assert_relative_eq!(r, 0.02, epsilon = 1e-15);
        assert_relative_eq!(b, 2.98, epsilon = 1e-14);
        let (_, b) = near_minimizer_certificate(1e-12, 1.0, 2, 1.0, 1.0, 3.0).unwrap();
        assert_relative_eq!(b, 3.0, epsilon = 1e-10);
    }
}
