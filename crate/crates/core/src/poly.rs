//! Dense univariate polynomials (ascending coefficients) and their real
//! stationary points via companion-matrix eigenvalues.

use nalgebra::DMatrix;

/// Horner evaluation of `Σ cᵢ xⁱ`.
pub fn eval(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

/// Coefficients of the derivative.
pub fn derivative(coeffs: &[f64]) -> Vec<f64> {
    coeffs
        .iter()
        .enumerate()
        .skip(1)
        .map(|(i, &c)| c * i as f64)
        .collect()
}

/// `k`-th derivative evaluated at `x`.
pub fn eval_derivative(coeffs: &[f64], k: usize, x: f64) -> f64 {
    let mut acc = 0.0;
    for i in (k..coeffs.len()).rev() {
        let falling: f64 = ((i - k + 1)..=i).map(|v| v as f64).product();
        acc = acc * x + coeffs[i] * falling;
    }
    acc
}

/// Drops leading coefficients that are negligible relative to the largest one.
fn trimmed(coeffs: &[f64]) -> &[f64] {
    let scale = coeffs.iter().fold(0.0_f64, |m, c| m.max(c.abs()));
    let mut end = coeffs.len();
    while end > 0 && coeffs[end - 1].abs() <= 1e-14 * scale {
        end -= 1;
    }
    &coeffs[..end]
}

/// Real roots of a polynomial, from the eigenvalues of its companion matrix,
/// each refined by a few Newton steps. Roots of near-multiple clusters may be
/// reported more than once; callers use them as candidate points.
pub fn real_roots(coeffs: &[f64]) -> Vec<f64> {
    let c = trimmed(coeffs);
    let degree = c.len().saturating_sub(1);
    match degree {
        0 => return Vec::new(),
        1 => return vec![-c[0] / c[1]],
        _ => {}
    }
    // zero roots deflate exactly
    let zeros = c.iter().take_while(|&&v| v == 0.0).count();
    let mut roots = Vec::new();
    if zeros > 0 {
        roots.push(0.0);
        let mut rest = real_roots(&c[zeros..]);
        roots.append(&mut rest);
        return roots;
    }
    let lead = c[degree];
    let mut companion = DMatrix::<f64>::zeros(degree, degree);
    for i in 1..degree {
        companion[(i, i - 1)] = 1.0;
    }
    for i in 0..degree {
        companion[(i, degree - 1)] = -c[i] / lead;
    }
    let dc = derivative(c);
    for z in companion.complex_eigenvalues().iter() {
        if z.im.abs() <= 1e-6 * (1.0 + z.re.abs()) {
            roots.push(polish(c, &dc, z.re));
        }
    }
    roots
}

fn polish(c: &[f64], dc: &[f64], mut x: f64) -> f64 {
    let mut fx = eval(c, x).abs();
    for _ in 0..8 {
        let d = eval(dc, x);
        if d == 0.0 {
            break;
        }
        let next = x - eval(c, x) / d;
        let fn_ = eval(c, next).abs();
        if !next.is_finite() || fn_ >= fx {
            break;
        }
        x = next;
        fx = fn_;
    }
    x
}

/// Candidate minimizers of `coeffs` over `[lo, hi]` (either end may be
/// infinite): the finite endpoints and every real stationary point inside.
/// Returns `(x, value)` pairs.
pub fn candidates_on_interval(coeffs: &[f64], lo: f64, hi: f64) -> Vec<(f64, f64)> {
    let mut xs = Vec::new();
    if lo.is_finite() {
        xs.push(lo);
    }
    if hi.is_finite() {
        xs.push(hi);
    }
    for r in real_roots(&derivative(coeffs)) {
        if r >= lo && r <= hi {
            xs.push(r);
        }
    }
    xs.into_iter().map(|x| (x, eval(coeffs, x))).collect()
}
