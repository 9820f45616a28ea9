//! Small dense quadratic subproblems solved in the eigenbasis of the Hessian:
//! the trust-region problem `min gᵀd + ½dᵀHd, ‖d‖ ≤ Δ` and the cubic
//! regularization problem `min gᵀs + ½sᵀHs + (σ/6)‖s‖³`.
//!
//! Both reduce to a scalar secular equation in the shift of the Hessian,
//! solved by Newton's method started on the side of the root where it
//! converges monotonically, with halving as the safeguard. When the gradient
//! has no component on the leftmost eigenspace the secular equation can lose
//! its root (the hard case) and the solution is completed along an
//! eigenvector.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{ArpError, Result};

const MAX_SECULAR_ITERS: usize = 200;

/// Residual accepted on the secular equation, relative to the target norm.
pub const SECULAR_RTOL: f64 = 1e-10;

/// Eigen-decomposition with eigenvalues sorted in increasing order.
#[derive(Debug, Clone)]
pub(crate) struct EigenBasis {
    pub values: Vec<f64>,
    /// Columns are unit eigenvectors, in the order of `values`.
    pub vectors: DMatrix<f64>,
}

impl EigenBasis {
    pub fn new(h: &DMatrix<f64>) -> Self {
        let eig = SymmetricEigen::new(h.clone());
        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let vectors = DMatrix::from_fn(h.nrows(), h.ncols(), |r, c| eig.eigenvectors[(r, order[c])]);
        EigenBasis { values, vectors }
    }

    pub fn to_eigen(&self, v: &[f64]) -> Vec<f64> {
        (self.vectors.transpose() * DVector::from_column_slice(v)).as_slice().to_vec()
    }

    pub fn eigen_to_original(&self, w: &[f64]) -> Vec<f64> {
        (&self.vectors * DVector::from_column_slice(w)).as_slice().to_vec()
    }

    pub fn spectral_scale(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Index set of eigenvalues numerically equal to the leftmost one.
    fn leftmost_block(&self) -> usize {
        let tol = 1e-12 * (1.0 + self.spectral_scale());
        self.values.iter().take_while(|&&v| v - self.values[0] <= tol).count()
    }

    /// Leftmost eigenvector with its largest-magnitude component made positive.
    fn oriented_leftmost(&self) -> Vec<f64> {
        let mut w = vec![0.0; self.values.len()];
        w[0] = 1.0;
        let mut v = self.eigen_to_original(&w);
        let lead = v.iter().cloned().fold(0.0_f64, |m, x| if x.abs() > m.abs() { x } else { m });
        if lead < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        v
    }
}

#[derive(Debug, Clone)]
pub struct TrustRegionSolution {
    pub step: Vec<f64>,
    /// `gᵀd + ½dᵀHd` at the returned step.
    pub value: f64,
    /// Shift `μ ≥ 0` with `(H + μI)d = −g`.
    pub multiplier: f64,
    pub hard_case: bool,
}

fn quad_value(gt: &[f64], values: &[f64], dt: &[f64]) -> f64 {
    gt.iter()
        .zip(values)
        .zip(dt)
        .map(|((g, l), d)| g * d + 0.5 * l * d * d)
        .sum()
}

/// Shifted eigenvalues `λᵢ + μ_lo`, computed without cancellation when the
/// shift is `−λ₁`.
fn shifted(values: &[f64], mu_lo: f64) -> Vec<f64> {
    if mu_lo > 0.0 {
        values.iter().map(|v| (v - values[0]).max(0.0)).collect()
    } else {
        values.to_vec()
    }
}

fn scaled_norm(gt: &[f64], e: &[f64], t: f64) -> f64 {
    gt.iter()
        .zip(e)
        .map(|(g, ei)| {
            let den = ei + t;
            if *g == 0.0 {
                0.0
            } else {
                (g / den).powi(2)
            }
        })
        .sum::<f64>()
        .sqrt()
}

/// Global minimizer of `gᵀd + ½dᵀHd` over `‖d‖ ≤ radius`.
pub fn solve_trust_region(g: &[f64], h: &DMatrix<f64>, radius: f64) -> Result<TrustRegionSolution> {
    if h.nrows() != g.len() || h.ncols() != g.len() {
        return Err(ArpError::Shape(format!(
            "gradient of length {} with {}x{} Hessian",
            g.len(),
            h.nrows(),
            h.ncols()
        )));
    }
    if !(radius > 0.0) {
        return Err(ArpError::Domain(format!("trust-region radius {radius} must be positive")));
    }
    let basis = EigenBasis::new(h);
    let gt = basis.to_eigen(g);
    let gnorm = gt.iter().map(|v| v * v).sum::<f64>().sqrt();
    let lam1 = basis.values[0];
    let mu_lo = (-lam1).max(0.0);
    let e = shifted(&basis.values, mu_lo);
    let block = if lam1 <= 1e-12 * (1.0 + basis.spectral_scale()) { basis.leftmost_block() } else { 0 };
    let hard_tol = 1e-12 * (gnorm + basis.spectral_scale() * radius);

    let finish = |dt: Vec<f64>, mu: f64, hard: bool| TrustRegionSolution {
        value: quad_value(&gt, &basis.values, &dt),
        step: basis.eigen_to_original(&dt),
        multiplier: mu,
        hard_case: hard,
    };

    if gt[..block].iter().all(|g| g.abs() <= hard_tol) {
        let mut dt: Vec<f64> = gt
            .iter()
            .zip(&e)
            .enumerate()
            .map(|(i, (g, ei))| if i < block { 0.0 } else { -g / ei })
            .collect();
        let d0 = dt.iter().map(|v| v * v).sum::<f64>().sqrt();
        if d0 <= radius {
            if mu_lo == 0.0 {
                return Ok(finish(dt, 0.0, false));
            }
            // hard case: complete along the oriented leftmost eigenvector
            let alpha = (radius * radius - d0 * d0).max(0.0).sqrt();
            let v = basis.to_eigen(&basis.oriented_leftmost());
            for (d, vi) in dt.iter_mut().zip(&v) {
                *d += alpha * vi;
            }
            return Ok(finish(dt, mu_lo, true));
        }
    }

    // boundary solution: find t > 0 with ‖d(t)‖ = radius
    let mut hi = gnorm / radius;
    let mut t = hi;
    let mut found_left = false;
    for _ in 0..2000 {
        t *= 0.5;
        if scaled_norm(&gt, &e, t) > radius {
            found_left = true;
            break;
        }
        hi = t;
    }
    if !found_left {
        return Err(ArpError::Numerical {
            context: "trust-region secular equation",
            diagnostics: format!("no bracket found; |g| = {gnorm:e}, lambda_min = {lam1:e}"),
        });
    }
    let mut lo = t;
    for _ in 0..MAX_SECULAR_ITERS {
        let nrm = scaled_norm(&gt, &e, t);
        let dn: f64 = gt.iter().zip(&e).map(|(g, ei)| g * g / (ei + t).powi(3)).sum();
        // Newton on 1/‖d(t)‖ − 1/Δ, monotone from the left
        let f = 1.0 / nrm - 1.0 / radius;
        let fp = dn / nrm.powi(3);
        if f < 0.0 {
            lo = t;
        } else {
            hi = t;
        }
        if f == 0.0 {
            break;
        }
        let mut next = t - f / fp;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - t).abs() <= 4.0 * f64::EPSILON * t.max(1e-300) {
            t = next;
            break;
        }
        t = next;
    }
    let dt: Vec<f64> = gt.iter().zip(&e).map(|(g, ei)| -g / (ei + t)).collect();
    let nrm = dt.iter().map(|v| v * v).sum::<f64>().sqrt();
    if (nrm - radius).abs() > SECULAR_RTOL * radius {
        return Err(ArpError::Numerical {
            context: "trust-region secular equation",
            diagnostics: format!("|d| = {nrm:e} vs radius {radius:e} after {MAX_SECULAR_ITERS} iterations"),
        });
    }
    Ok(finish(dt, mu_lo + t, false))
}

#[derive(Debug, Clone)]
pub struct CubicSolution {
    pub step: Vec<f64>,
    /// `gᵀs + ½sᵀHs + (σ/6)‖s‖³` at the returned step.
    pub value: f64,
    /// `λ = σ‖s‖/2`.
    pub multiplier: f64,
    pub hard_case: bool,
}

/// Global minimizer of `gᵀs + ½sᵀHs + (σ/6)‖s‖³`.
pub fn solve_cubic(g: &[f64], h: &DMatrix<f64>, sigma: f64) -> Result<CubicSolution> {
    if h.nrows() != g.len() || h.ncols() != g.len() {
        return Err(ArpError::Shape("gradient and Hessian sizes differ".into()));
    }
    if !(sigma > 0.0) {
        return Err(ArpError::Domain(format!("regularization weight {sigma} must be positive")));
    }
    let basis = EigenBasis::new(h);
    let gt = basis.to_eigen(g);
    let gnorm = gt.iter().map(|v| v * v).sum::<f64>().sqrt();
    let lam1 = basis.values[0];
    let lam_lo = (-lam1).max(0.0);
    let e = shifted(&basis.values, lam_lo);
    let block = if lam1 <= 1e-12 * (1.0 + basis.spectral_scale()) { basis.leftmost_block() } else { 0 };
    let hard_tol = 1e-12 * (gnorm + basis.spectral_scale() * (1.0 + basis.spectral_scale() / sigma));

    let finish = |dt: Vec<f64>, lam: f64, hard: bool| {
        let n = dt.iter().map(|v| v * v).sum::<f64>().sqrt();
        CubicSolution {
            value: quad_value(&gt, &basis.values, &dt) + sigma / 6.0 * n * n * n,
            step: basis.eigen_to_original(&dt),
            multiplier: lam,
            hard_case: hard,
        }
    };

    if gt[..block].iter().all(|g| g.abs() <= hard_tol) {
        let mut dt: Vec<f64> = gt
            .iter()
            .zip(&e)
            .enumerate()
            .map(|(i, (g, ei))| if i < block { 0.0 } else { -g / ei })
            .collect();
        let s0 = dt.iter().map(|v| v * v).sum::<f64>().sqrt();
        let target = 2.0 * lam_lo / sigma;
        if s0 <= target || (lam_lo == 0.0 && gnorm == 0.0) {
            if lam_lo == 0.0 {
                return Ok(finish(dt, 0.0, false));
            }
            let alpha = (target * target - s0 * s0).max(0.0).sqrt();
            let v = basis.to_eigen(&basis.oriented_leftmost());
            for (d, vi) in dt.iter_mut().zip(&v) {
                *d += alpha * vi;
            }
            return Ok(finish(dt, lam_lo, true));
        }
    }

    // ψ(t) = ‖s(t)‖ − 2(λ_lo + t)/σ is convex and decreasing
    let psi = |t: f64| scaled_norm(&gt, &e, t) - 2.0 * (lam_lo + t) / sigma;
    let mut hi = (0.5 * sigma * gnorm).sqrt() + 1e-300;
    while psi(hi) > 0.0 {
        hi *= 2.0;
    }
    let mut t = hi;
    let mut found_left = false;
    for _ in 0..2000 {
        t *= 0.5;
        if psi(t) > 0.0 {
            found_left = true;
            break;
        }
        hi = t;
    }
    if !found_left {
        return Err(ArpError::Numerical {
            context: "cubic secular equation",
            diagnostics: format!("no bracket found; |g| = {gnorm:e}, lambda_min = {lam1:e}"),
        });
    }
    let mut lo = t;
    for _ in 0..MAX_SECULAR_ITERS {
        let nrm = scaled_norm(&gt, &e, t);
        let f = nrm - 2.0 * (lam_lo + t) / sigma;
        let dn: f64 = gt.iter().zip(&e).map(|(g, ei)| g * g / (ei + t).powi(3)).sum();
        let fp = -dn / nrm - 2.0 / sigma;
        let mut next = t - f / fp;
        if f > 0.0 {
            lo = t;
        } else {
            hi = t;
        }
        if f == 0.0 {
            break;
        }
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - t).abs() <= 4.0 * f64::EPSILON * t.max(1e-300) {
            t = next;
            break;
        }
        t = next;
    }
    let dt: Vec<f64> = gt.iter().zip(&e).map(|(g, ei)| -g / (ei + t)).collect();
    let nrm = dt.iter().map(|v| v * v).sum::<f64>().sqrt();
    let target = 2.0 * (lam_lo + t) / sigma;
    if (nrm - target).abs() > SECULAR_RTOL * target.max(f64::MIN_POSITIVE) {
        return Err(ArpError::Numerical {
            context: "cubic secular equation",
            diagnostics: format!("|s| = {nrm:e} vs 2*lambda/sigma = {target:e}"),
        });
    }
    Ok(finish(dt, lam_lo + t, false))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn diag(v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_column_slice(v))
    }

    #[test]
    fn pure_eigen_step() {
        let sol = solve_trust_region(&[0.0, 0.0], &diag(&[-1.0, 2.0]), 1.0).unwrap();
        assert!(sol.hard_case);
        assert_relative_eq!(sol.value, -0.5, epsilon = 1e-14);
        assert_relative_eq!(sol.step[0].abs(), 1.0, epsilon = 1e-14);
        assert_relative_eq!(sol.step[1], 0.0, epsilon = 1e-14);
    }

    #[test]
    fn interior_newton_step() {
        let sol = solve_trust_region(&[-0.5, 0.0], &diag(&[1.0, 1.0]), 1.0).unwrap();
        assert_relative_eq!(sol.value, -0.125, epsilon = 1e-14);
        assert_relative_eq!(sol.step[0], 0.5, epsilon = 1e-14);
        assert_eq!(sol.multiplier, 0.0);
    }

    #[test]
    fn boundary_solution_satisfies_optimality() {
        let h = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 0.0, 2.0, -1.0, 0.5, 0.0, 0.5, 3.0]);
        let g = [0.3, -1.0, 0.2];
        let sol = solve_trust_region(&g, &h, 0.7).unwrap();
        let d = DVector::from_column_slice(&sol.step);
        assert_relative_eq!(d.norm(), 0.7, max_relative = 1e-12);
        let r = (&h + DMatrix::identity(3, 3) * sol.multiplier) * &d + DVector::from_column_slice(&g);
        assert!(r.norm() < 1e-10);
    }

    #[test]
    fn cubic_closed_forms() {
        // ∇m = −e₁ + (σ/2)‖s‖s: σ = 2 gives s = e₁, σ = 6 gives s = e₁/√3
        let z = DMatrix::zeros(2, 2);
        let sol = solve_cubic(&[-1.0, 0.0], &z, 2.0).unwrap();
        assert_relative_eq!(sol.step[0], 1.0, epsilon = 1e-13);
        let sol = solve_cubic(&[-1.0, 0.0], &z, 6.0).unwrap();
        assert_relative_eq!(sol.step[0], 1.0 / 3f64.sqrt(), epsilon = 1e-13);
        let sol = solve_cubic(&[0.0, 0.0], &diag(&[1.0, 0.0]), 3.0).unwrap();
        assert_eq!(sol.step, vec![0.0, 0.0]);
    }

    #[test]
    fn cubic_hard_case() {
        // g = 0, λ_min = −2: s = ±(2·2/σ) v
        let sol = solve_cubic(&[0.0, 0.0], &diag(&[3.0, -2.0]), 4.0).unwrap();
        assert!(sol.hard_case);
        assert_relative_eq!(sol.step[1], 1.0, epsilon = 1e-13);
        assert_relative_eq!(sol.value, -1.0 + 4.0 / 6.0, epsilon = 1e-13);
    }
}
