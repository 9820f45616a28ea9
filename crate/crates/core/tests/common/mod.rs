//! Brute-force reference computations shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, SymmetricEigen};

/// Value, gradient or Hessian of `s ↦ ‖s‖^a` by central differences, as a
/// flat row-major array.
pub fn fd_power_derivative(a: f64, j: usize, s: &[f64]) -> Vec<f64> {
    let h = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt().powf(a);
    let n = s.len();
    let step = 1e-4;
    let shifted = |i: usize, di: f64, k: usize, dk: f64| {
        let mut v = s.to_vec();
        v[i] += di;
        v[k] += dk;
        h(&v)
    };
    match j {
        0 => vec![h(s)],
        1 => (0..n).map(|i| (shifted(i, step, i, 0.0) - shifted(i, -step, i, 0.0)) / (2.0 * step)).collect(),
        2 => {
            let mut out = vec![0.0; n * n];
            for i in 0..n {
                for k in 0..n {
                    out[i * n + k] = (shifted(i, step, k, step) - shifted(i, step, k, -step) - shifted(i, -step, k, step)
                        + shifted(i, -step, k, -step))
                        / (4.0 * step * step);
                }
            }
            out
        }
        _ => panic!("order {j} not supported"),
    }
}

/// Tensor norm of a flat order-`j ≤ 2` tensor: absolute value, Euclidean
/// norm or largest absolute eigenvalue.
pub fn brute_norm(j: usize, n: usize, t: &[f64]) -> f64 {
    match j {
        0 => t[0].abs(),
        1 => t.iter().map(|x| x * x).sum::<f64>().sqrt(),
        2 => {
            let m = DMatrix::from_row_slice(n, n, t);
            let m = (&m + m.transpose()) * 0.5;
            SymmetricEigen::new(m).eigenvalues.iter().fold(0.0, |acc: f64, v| acc.max(v.abs()))
        }
        _ => panic!("order {j} not supported"),
    }
}

fn quad2(g: &[f64; 2], h: &[[f64; 2]; 2], r: f64, th: f64) -> f64 {
    let (x, y) = (r * th.cos(), r * th.sin());
    g[0] * x + g[1] * y + 0.5 * (h[0][0] * x * x + 2.0 * h[0][1] * x * y + h[1][1] * y * y)
}

/// Minimum of `gᵀd + ½dᵀHd` over `‖d‖ ≤ δ` by a dense polar grid followed by
/// a local refinement around the best cell.
pub fn polar_grid_min(g: &[f64; 2], h: &[[f64; 2]; 2], delta: f64) -> f64 {
    let (nr, nt) = (400, 3600);
    let dth = std::f64::consts::TAU / nt as f64;
    let dr = delta / nr as f64;
    let mut best = (0.0, 0.0, 0.0);
    for i in 0..=nr {
        let r = dr * i as f64;
        for k in 0..nt {
            let th = dth * k as f64;
            let v = quad2(g, h, r, th);
            if v < best.0 {
                best = (v, r, th);
            }
        }
    }
    let (mut v, r0, t0) = best;
    let fine = 400;
    for i in 0..=fine {
        let r = (r0 - dr + 2.0 * dr * i as f64 / fine as f64).clamp(0.0, delta);
        for k in 0..=fine {
            let th = t0 - dth + 2.0 * dth * k as f64 / fine as f64;
            v = v.min(quad2(g, h, r, th));
        }
    }
    v
}

/// Minimum over `|τ| ≤ δ` of `Σ cᵢτⁱ/i!` (`c₀` excluded) on an equispaced grid.
pub fn line_grid_min(derivs: &[f64], delta: f64, points: usize) -> f64 {
    let mut fact = vec![1.0; derivs.len() + 1];
    for i in 1..fact.len() {
        fact[i] = fact[i - 1] * i as f64;
    }
    (0..points)
        .map(|i| {
            let t = -delta + 2.0 * delta * i as f64 / (points - 1) as f64;
            derivs.iter().enumerate().map(|(i, c)| c * t.powi(i as i32 + 1) / fact[i + 1]).sum::<f64>()
        })
        .fold(0.0, f64::min)
}
