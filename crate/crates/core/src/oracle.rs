//! Objective functions supplying values and derivative tensors.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use crate::error::{ArpError, Result};
use crate::tensor::SymmetricTensor;

pub trait DifferentiableOracle: Send + Sync {
    fn dim(&self) -> usize;

    /// Highest derivative order available.
    fn max_order(&self) -> usize;

    fn value(&self, x: &[f64]) -> Result<f64>;

    /// The order-`order` derivative tensor at `x`, `1 ≤ order ≤ max_order`.
    fn derivative(&self, x: &[f64], order: usize) -> Result<SymmetricTensor>;
}

impl<O: DifferentiableOracle + ?Sized> DifferentiableOracle for Arc<O> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn max_order(&self) -> usize {
        (**self).max_order()
    }
    fn value(&self, x: &[f64]) -> Result<f64> {
        (**self).value(x)
    }
    fn derivative(&self, x: &[f64], order: usize) -> Result<SymmetricTensor> {
        (**self).derivative(x, order)
    }
}

impl<O: DifferentiableOracle + ?Sized> DifferentiableOracle for &O {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn max_order(&self) -> usize {
        (**self).max_order()
    }
    fn value(&self, x: &[f64]) -> Result<f64> {
        (**self).value(x)
    }
    fn derivative(&self, x: &[f64], order: usize) -> Result<SymmetricTensor> {
        (**self).derivative(x, order)
    }
}

pub(crate) fn check_call(dim: usize, max_order: usize, x: &[f64], order: usize) -> Result<()> {
    if x.len() != dim {
        return Err(ArpError::Shape(format!("point of length {} for a {dim}-dimensional objective", x.len())));
    }
    if order == 0 || order > max_order {
        return Err(ArpError::Oracle(format!("derivative order {order} outside 1..={max_order}")));
    }
    Ok(())
}

/// Evaluation tallies: `derivs[j-1]` counts order-`j` tensors.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EvalCounts {
    pub f: usize,
    pub derivs: Vec<usize>,
}

impl EvalCounts {
    pub fn new(max_order: usize) -> Self {
        EvalCounts { f: 0, derivs: vec![0; max_order] }
    }

    pub fn total_derivs(&self) -> usize {
        self.derivs.iter().sum()
    }
}

/// Wraps an oracle and counts every call it serves.
pub struct Counted<O> {
    inner: O,
    f: AtomicUsize,
    derivs: Vec<AtomicUsize>,
}

impl<O: DifferentiableOracle> Counted<O> {
    pub fn new(inner: O) -> Self {
        let derivs = (0..inner.max_order()).map(|_| AtomicUsize::new(0)).collect();
        Counted { inner, f: AtomicUsize::new(0), derivs }
    }

    pub fn counts(&self) -> EvalCounts {
        EvalCounts {
            f: self.f.load(Ordering::Relaxed),
            derivs: self.derivs.iter().map(|c| c.load(Ordering::Relaxed)).collect(),
        }
    }

    pub fn inner(&self) -> &O {
        &self.inner
    }
}

impl<O: DifferentiableOracle> DifferentiableOracle for Counted<O> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn max_order(&self) -> usize {
        self.inner.max_order()
    }
    fn value(&self, x: &[f64]) -> Result<f64> {
        self.f.fetch_add(1, Ordering::Relaxed);
        self.inner.value(x)
    }
    fn derivative(&self, x: &[f64], order: usize) -> Result<SymmetricTensor> {
        if let Some(c) = self.derivs.get(order.wrapping_sub(1)) {
            c.fetch_add(1, Ordering::Relaxed);
        }
        self.inner.derivative(x, order)
    }
}

/// Polynomial in ℝⁿ given as a sum of monomials `c·Π xᵢ^{eᵢ}`, with exact
/// derivative tensors of every order.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiPoly {
    dim: usize,
    max_order: usize,
    terms: Vec<(f64, Vec<u32>)>,
}

impl MultiPoly {
    pub fn new(dim: usize, max_order: usize, terms: Vec<(f64, Vec<u32>)>) -> Result<Self> {
        if dim == 0 {
            return Err(ArpError::Shape("dimension must be positive".into()));
        }
        if let Some((_, e)) = terms.iter().find(|(_, e)| e.len() != dim) {
            return Err(ArpError::Shape(format!("exponent vector {e:?} in dimension {dim}")));
        }
        Ok(MultiPoly { dim, max_order, terms })
    }

    /// `Σ_i a_i x^i` in one variable.
    pub fn univariate(coeffs: &[f64], max_order: usize) -> Self {
        let terms = coeffs.iter().enumerate().filter(|(_, c)| **c != 0.0).map(|(i, &c)| (c, vec![i as u32])).collect();
        MultiPoly { dim: 1, max_order, terms }
    }

    /// `½xᵀAx + bᵀx`.
    pub fn quadratic(a: &[Vec<f64>], b: &[f64], max_order: usize) -> Result<Self> {
        let n = b.len();
        let mut terms = Vec::new();
        for i in 0..n {
            if a[i].len() != n {
                return Err(ArpError::Shape("quadratic matrix must be square".into()));
            }
            for j in i..n {
                let c = if i == j { 0.5 * a[i][i] } else { 0.5 * (a[i][j] + a[j][i]) };
                if c != 0.0 {
                    let mut e = vec![0; n];
                    e[i] += 1;
                    e[j] += 1;
                    terms.push((c, e));
                }
            }
            if b[i] != 0.0 {
                let mut e = vec![0; n];
                e[i] = 1;
                terms.push((b[i], e));
            }
        }
        MultiPoly::new(n, max_order, terms)
    }

    pub fn degree(&self) -> u32 {
        self.terms.iter().map(|(_, e)| e.iter().sum()).max().unwrap_or(0)
    }

    fn partial(&self, x: &[f64], idx: &[usize]) -> f64 {
        let mut counts = vec![0u32; self.dim];
        for &i in idx {
            counts[i] += 1;
        }
        self.terms
            .iter()
            .map(|(c, e)| {
                let mut v = *c;
                for i in 0..self.dim {
                    let (ei, ki) = (e[i], counts[i]);
                    if ki > ei {
                        return 0.0;
                    }
                    v *= ((ei - ki + 1)..=ei).map(f64::from).product::<f64>();
                    v *= x[i].powi((ei - ki) as i32);
                }
                v
            })
            .sum()
    }
}

impl DifferentiableOracle for MultiPoly {
    fn dim(&self) -> usize {
        self.dim
    }
    fn max_order(&self) -> usize {
        self.max_order
    }
    fn value(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(ArpError::Shape(format!("point of length {} for a {}-dimensional objective", x.len(), self.dim)));
        }
        Ok(self.partial(x, &[]))
    }
    fn derivative(&self, x: &[f64], order: usize) -> Result<SymmetricTensor> {
        check_call(self.dim, self.max_order, x, order)?;
        Ok(SymmetricTensor::from_fn(order, self.dim, |idx| self.partial(x, idx)))
    }
}

/// A univariate profile `g` lifted to ℝⁿ as `f(x) = g((x − origin)·u)`.
#[derive(Clone)]
pub struct Embedded<O> {
    profile: O,
    origin: Vec<f64>,
    direction: Vec<f64>,
}

impl<O: DifferentiableOracle> Embedded<O> {
    pub fn new(profile: O, origin: Vec<f64>, direction: Vec<f64>) -> Result<Self> {
        if profile.dim() != 1 {
            return Err(ArpError::Shape("embedded profile must be univariate".into()));
        }
        if origin.len() != direction.len() {
            return Err(ArpError::Shape("origin and direction lengths differ".into()));
        }
        let len = direction.iter().map(|v| v * v).sum::<f64>().sqrt();
        if (len - 1.0).abs() > 1e-12 {
            return Err(ArpError::Domain(format!("embedding direction has norm {len}, expected 1")));
        }
        Ok(Embedded { profile, origin, direction })
    }

    pub fn coordinate(&self, x: &[f64]) -> f64 {
        x.iter().zip(&self.origin).zip(&self.direction).map(|((a, o), u)| (a - o) * u).sum()
    }
}

impl<O: DifferentiableOracle> DifferentiableOracle for Embedded<O> {
    fn dim(&self) -> usize {
        self.direction.len()
    }
    fn max_order(&self) -> usize {
        self.profile.max_order()
    }
    fn value(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(ArpError::Shape("point and embedding dimensions differ".into()));
        }
        self.profile.value(&[self.coordinate(x)])
    }
    fn derivative(&self, x: &[f64], order: usize) -> Result<SymmetricTensor> {
        check_call(self.dim(), self.max_order(), x, order)?;
        let d = self.profile.derivative(&[self.coordinate(x)], order)?.entries()[0];
        Ok(SymmetricTensor::rank_one(&self.direction, order, d))
    }
}
