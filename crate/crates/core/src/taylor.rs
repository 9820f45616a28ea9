//! Taylor expansions `T_p(x, s) = f(x) + Σ_{ℓ=1}^{p} ∇ˡf(x)[s]^ℓ / ℓ!`.

use crate::error::{ArpError, Result};
use crate::tensor::{factorial, SymmetricTensor};

#[derive(Debug, Clone, PartialEq)]
pub struct TaylorModel {
    base_point: Vec<f64>,
    f0: f64,
    /// `derivs[ℓ-1]` is the order-ℓ derivative tensor.
    derivs: Vec<SymmetricTensor>,
}

impl TaylorModel {
    pub fn new(base_point: Vec<f64>, f0: f64, derivs: Vec<SymmetricTensor>) -> Result<Self> {
        let n = base_point.len();
        if n == 0 {
            return Err(ArpError::Shape("empty base point".into()));
        }
        for (i, d) in derivs.iter().enumerate() {
            if d.order() != i + 1 || d.dim() != n {
                return Err(ArpError::Shape(format!(
                    "derivative {} has order {} and dim {}, expected order {} and dim {n}",
                    i + 1,
                    d.order(),
                    d.dim(),
                    i + 1
                )));
            }
        }
        Ok(TaylorModel { base_point, f0, derivs })
    }

    /// Univariate model at `x` from the derivative values `f'(x), f''(x), …`.
    pub fn univariate(x: f64, f0: f64, derivs: &[f64]) -> Self {
        TaylorModel {
            base_point: vec![x],
            f0,
            derivs: derivs
                .iter()
                .enumerate()
                .map(|(i, &d)| SymmetricTensor::from_entries(i + 1, 1, vec![d]).expect("1-d tensor"))
                .collect(),
        }
    }

    pub fn base_point(&self) -> &[f64] {
        &self.base_point
    }

    pub fn f0(&self) -> f64 {
        self.f0
    }

    pub fn dim(&self) -> usize {
        self.base_point.len()
    }

    pub fn degree(&self) -> usize {
        self.derivs.len()
    }

    pub fn derivs(&self) -> &[SymmetricTensor] {
        &self.derivs
    }

    /// The order-ℓ derivative, `1 ≤ ℓ ≤ degree`.
    pub fn deriv(&self, order: usize) -> &SymmetricTensor {
        &self.derivs[order - 1]
    }

    fn check(&self, s: &[f64]) -> Result<()> {
        if s.len() != self.dim() {
            return Err(ArpError::Shape(format!(
                "increment of length {} for a model in dimension {}",
                s.len(),
                self.dim()
            )));
        }
        Ok(())
    }

    /// `T(s) − f0`, summed without the constant term.
    pub fn increment(&self, s: &[f64]) -> Result<f64> {
        self.check(s)?;
        let mut total = 0.0;
        for (i, d) in self.derivs.iter().enumerate() {
            let l = i + 1;
            total += d.apply_power(s)? / factorial(l);
        }
        Ok(total)
    }

    pub fn eval(&self, s: &[f64]) -> Result<f64> {
        if s.iter().all(|&v| v == 0.0) {
            self.check(s)?;
            return Ok(self.f0);
        }
        Ok(self.f0 + self.increment(s)?)
    }

    /// `∇ʲ_s T_p(x, s) = Σ_{ℓ=j}^{p} ∇ˡf(x)[s]^{ℓ−j} / (ℓ−j)!`.
    pub fn derivative(&self, s: &[f64], j: usize) -> Result<SymmetricTensor> {
        self.check(s)?;
        if j == 0 || j > self.degree() {
            return Err(ArpError::Domain(format!(
                "derivative order {j} outside 1..={}",
                self.degree()
            )));
        }
        let mut out = SymmetricTensor::zeros(j, self.dim());
        for l in j..=self.degree() {
            let c = self.derivs[l - 1].contract(s, l - j)?;
            out.add_scaled(&c, 1.0 / factorial(l - j))?;
        }
        Ok(out)
    }

    /// The same expansion truncated to degree `j`.
    pub fn truncated(&self, j: usize) -> TaylorModel {
        TaylorModel {
            base_point: self.base_point.clone(),
            f0: self.f0,
            derivs: self.derivs[..j.min(self.degree())].to_vec(),
        }
    }

    /// Coefficients `a_ℓ` of the univariate polynomial `τ ↦ T(τu)`, with `a_0 = f0`.
    pub fn line_coefficients(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.check(u)?;
        let mut out = Vec::with_capacity(self.degree() + 1);
        out.push(self.f0);
        for (i, d) in self.derivs.iter().enumerate() {
            out.push(d.apply_power(u)? / factorial(i + 1));
        }
        Ok(out)
    }

    /// Re-expansion of the model about `base + s` (exact for a polynomial).
    pub fn shifted(&self, s: &[f64]) -> Result<TaylorModel> {
        let f0 = self.eval(s)?;
        let derivs = (1..=self.degree())
            .map(|j| self.derivative(s, j))
            .collect::<Result<Vec<_>>>()?;
        let base = self.base_point.iter().zip(s).map(|(x, d)| x + d).collect();
        TaylorModel::new(base, f0, derivs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_model(rng: &mut ChaCha8Rng, n: usize, p: usize) -> TaylorModel {
        let derivs = (1..=p)
            .map(|l| SymmetricTensor::from_fn(l, n, |_| rng.gen_range(-1.0..1.0)))
            .collect();
        let base = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        TaylorModel::new(base, rng.gen_range(-1.0..1.0), derivs).unwrap()
    }

    #[test]
    fn eval_at_zero_is_f0() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = random_model(&mut rng, 3, 3);
        assert_eq!(m.eval(&[0.0; 3]).unwrap(), m.f0());
    }

    #[test]
    fn linear_model() {
        let eps = 0.3;
        let m = TaylorModel::univariate(0.0, 0.0, &[-eps]);
        assert_relative_eq!(m.eval(&[2.0]).unwrap(), -0.6);
    }

    #[test]
    fn slow_instance_model_value() {
        // f0 − (ε+ω)χ₁(1) s with ε = ω = 0.5
        let m = TaylorModel::univariate(0.0, 5.657, &[-1.0, 0.0]);
        assert_relative_eq!(m.eval(&[1.0]).unwrap(), 4.657, epsilon = 1e-12);
    }

    #[test]
    fn derivative_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let m = random_model(&mut rng, 2, 3);
        assert_eq!(m.derivative(&[0.0, 0.0], 1).unwrap(), m.derivs()[0]);
        let h = SymmetricTensor::from_matrix(&DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, -3.0])).unwrap();
        let q = TaylorModel::new(vec![0.0, 0.0], 1.0, vec![SymmetricTensor::from_vector(&[1.0, 2.0]), h.clone()]).unwrap();
        assert_eq!(q.derivative(&[0.7, -1.3], 2).unwrap(), h);
        assert!(q.derivative(&[0.0, 0.0], 3).is_err());
        assert!(q.derivative(&[0.0, 0.0], 0).is_err());
    }

    #[test]
    fn derivative_matches_finite_differences() {
        // 100 random cases, n ≤ 4, p ≤ 3; the oracle differentiates taylor_eval numerically
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for case in 0..100 {
            let n = 1 + case % 4;
            let p = 1 + case % 3;
            let m = random_model(&mut rng, n, p);
            let s: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let h = 1e-4;
            let grad = m.derivative(&s, 1).unwrap().to_vec();
            for i in 0..n {
                let mut sp = s.clone();
                let mut sm = s.clone();
                sp[i] += h;
                sm[i] -= h;
                let fd = (m.eval(&sp).unwrap() - m.eval(&sm).unwrap()) / (2.0 * h);
                assert!((fd - grad[i]).abs() <= 1e-5 * (1.0 + grad[i].abs()), "case {case}");
            }
            if p >= 2 {
                let hess = m.derivative(&s, 2).unwrap();
                for i in 0..n {
                    let mut sp = s.clone();
                    let mut sm = s.clone();
                    sp[i] += h;
                    sm[i] -= h;
                    let gp = m.derivative(&sp, 1).unwrap().to_vec();
                    let gm = m.derivative(&sm, 1).unwrap().to_vec();
                    for k in 0..n {
                        let fd = (gp[k] - gm[k]) / (2.0 * h);
                        let exact = hess.get(&[i, k]);
                        assert!((fd - exact).abs() <= 1e-5 * (1.0 + exact.abs()));
                    }
                }
            }
        }
    }

    #[test]
    fn shifted_model_agrees() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let m = random_model(&mut rng, 2, 3);
        let s = [0.3, -0.2];
        let sh = m.shifted(&s).unwrap();
        let d = [0.1, 0.25];
        let total: Vec<f64> = s.iter().zip(&d).map(|(a, b)| a + b).collect();
        assert_relative_eq!(sh.eval(&d).unwrap(), m.eval(&total).unwrap(), epsilon = 1e-13);
    }

    #[test]
    fn shape_errors() {
        let m = TaylorModel::univariate(0.0, 1.0, &[1.0]);
        assert!(m.eval(&[1.0, 2.0]).is_err());
        assert!(TaylorModel::new(vec![0.0], 0.0, vec![SymmetricTensor::zeros(2, 1)]).is_err());
    }
}
