//! Dense symmetric tensors over ℝⁿ.
//!
//! A symmetric tensor of order ℓ is stored once per multiset of indices: the
//! canonical layout lists the non-decreasing index sequences
//! `i₁ ≤ i₂ ≤ … ≤ i_ℓ` in lexicographic order. For the sizes this crate is
//! aimed at (n ≤ 10, ℓ ≤ 5) that is at most a few thousand entries.

use std::fmt::Write as _;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{ArpError, Result};

/// Number of random restarts used by [`SymmetricTensor::norm`] for order ≥ 3.
pub const NORM_RESTARTS: usize = 32;
const NORM_SEED: u64 = 0x6172_7020_6e6f_726d;

/// `(k+β)! = ∏_{ℓ=1}^{k} (β+ℓ)`, computed as a direct product.
pub fn generalized_factorial(k: usize, beta: f64) -> Result<f64> {
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(ArpError::Domain(format!("beta = {beta} not in (0, 1]")));
    }
    Ok((1..=k).map(|l| beta + l as f64).product())
}

/// Plain factorial as a float.
pub fn factorial(k: usize) -> f64 {
    (1..=k).map(|l| l as f64).product()
}

/// Norm of the `j`-th derivative tensor of `s ↦ ‖s‖^{p+β}` at a point of norm `s_norm`.
///
/// For `j ≤ p` this is `(p+β)!/(p−j+β)! ‖s‖^{p−j+β}`; for `j = p+1` it is
/// `β (p+β)! ‖s‖^{β−1}`, which is unbounded at the origin when `β < 1`.
pub fn regpower_derivative_norm(p: usize, beta: f64, j: usize, s_norm: f64) -> Result<f64> {
    if j > p + 1 {
        return Err(ArpError::Domain(format!("derivative order {j} exceeds p+1 = {}", p + 1)));
    }
    if s_norm < 0.0 || !s_norm.is_finite() {
        return Err(ArpError::Domain(format!("invalid norm {s_norm}")));
    }
    let top = generalized_factorial(p, beta)?;
    if j <= p {
        let bottom = generalized_factorial(p - j, beta)?;
        Ok(top / bottom * s_norm.powf((p - j) as f64 + beta))
    } else {
        if s_norm == 0.0 && beta < 1.0 {
            return Err(ArpError::InfiniteNorm(format!(
                "order {j} derivative of |s|^{} at s = 0",
                p as f64 + beta
            )));
        }
        let scale = if beta == 1.0 { 1.0 } else { s_norm.powf(beta - 1.0) };
        Ok(beta * top * scale)
    }
}

/// Binomial coefficient as an exact integer for small arguments.
pub(crate) fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: usize = 1;
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

/// Iterator over non-decreasing index sequences of a given length, in
/// lexicographic order.
#[derive(Debug, Clone)]
pub struct Multisets {
    current: Vec<usize>,
    dim: usize,
    done: bool,
}

impl Multisets {
    pub fn new(len: usize, dim: usize) -> Self {
        Multisets {
            current: vec![0; len],
            dim,
            done: dim == 0 && len > 0,
        }
    }
}

impl Iterator for Multisets {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        let out = self.current.clone();
        // advance: find rightmost position that can grow
        let len = self.current.len();
        let mut pos = len;
        while pos > 0 {
            if self.current[pos - 1] + 1 < self.dim {
                break;
            }
            pos -= 1;
        }
        if pos == 0 {
            self.done = true;
        } else {
            let v = self.current[pos - 1] + 1;
            for slot in &mut self.current[pos - 1..] {
                *slot = v;
            }
        }
        Some(out)
    }
}

/// Number of distinct orderings of a sorted multi-index.
fn multinomial(sorted: &[usize]) -> f64 {
    let mut acc = factorial(sorted.len());
    let mut run = 1usize;
    for w in sorted.windows(2) {
        if w[0] == w[1] {
            run += 1;
        } else {
            acc /= factorial(run);
            run = 1;
        }
    }
    if !sorted.is_empty() {
        acc /= factorial(run);
    }
    acc
}

#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricTensor {
    order: usize,
    dim: usize,
    entries: Vec<f64>,
}

impl SymmetricTensor {
    /// Number of stored entries for a given order and dimension.
    pub fn storage_len(order: usize, dim: usize) -> usize {
        binomial(dim + order - 1, order)
    }

    pub fn zeros(order: usize, dim: usize) -> Self {
        assert!(dim > 0, "tensor dimension must be positive");
        SymmetricTensor {
            order,
            dim,
            entries: vec![0.0; Self::storage_len(order, dim)],
        }
    }

    pub fn scalar(value: f64, dim: usize) -> Self {
        let mut t = Self::zeros(0, dim);
        t.entries[0] = value;
        t
    }

    pub fn from_vector(v: &[f64]) -> Self {
        SymmetricTensor {
            order: 1,
            dim: v.len(),
            entries: v.to_vec(),
        }
    }

    /// Builds an order-2 tensor from a square matrix, averaging the two
    /// off-diagonal triangles.
    pub fn from_matrix(m: &DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(ArpError::Shape(format!("{}x{} matrix is not square", m.nrows(), m.ncols())));
        }
        Ok(Self::from_fn(2, m.nrows(), |idx| 0.5 * (m[(idx[0], idx[1])] + m[(idx[1], idx[0])])))
    }

    /// Builds a tensor by evaluating `f` at every canonical (sorted) multi-index.
    pub fn from_fn(order: usize, dim: usize, mut f: impl FnMut(&[usize]) -> f64) -> Self {
        let entries = Multisets::new(order, dim).map(|idx| f(&idx)).collect();
        SymmetricTensor { order, dim, entries }
    }

    /// Takes ownership of canonical-layout entries.
    pub fn from_entries(order: usize, dim: usize, entries: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(ArpError::Shape("dimension must be positive".into()));
        }
        let want = Self::storage_len(order, dim);
        if entries.len() != want {
            return Err(ArpError::Shape(format!(
                "order {order}, dim {dim} needs {want} entries, got {}",
                entries.len()
            )));
        }
        Ok(SymmetricTensor { order, dim, entries })
    }

    /// `coef · u ⊗ u ⊗ … ⊗ u` (ℓ copies).
    pub fn rank_one(u: &[f64], order: usize, coef: f64) -> Self {
        Self::from_fn(order, u.len(), |idx| coef * idx.iter().map(|&i| u[i]).product::<f64>())
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    /// Position of a sorted multi-index in the canonical layout.
    fn rank(&self, sorted: &[usize]) -> usize {
        let n = self.dim;
        let len = sorted.len();
        let mut r = 0;
        let mut lo = 0;
        for (t, &i) in sorted.iter().enumerate() {
            let rest = len - t - 1;
            for v in lo..i {
                // sequences starting with v then `rest` values in [v, n)
                r += binomial(n - v + rest - 1, rest);
            }
            lo = i;
        }
        r
    }

    /// Entry at an arbitrary (not necessarily sorted) multi-index.
    pub fn get(&self, idx: &[usize]) -> f64 {
        debug_assert_eq!(idx.len(), self.order);
        let mut sorted = idx.to_vec();
        sorted.sort_unstable();
        self.entries[self.rank(&sorted)]
    }

    pub fn set(&mut self, idx: &[usize], value: f64) {
        let mut sorted = idx.to_vec();
        sorted.sort_unstable();
        let r = self.rank(&sorted);
        self.entries[r] = value;
    }

    pub fn value(&self) -> f64 {
        debug_assert_eq!(self.order, 0);
        self.entries[0]
    }

    fn check_vec(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.dim {
            return Err(ArpError::Shape(format!(
                "vector of length {} applied to tensor of dim {}",
                v.len(),
                self.dim
            )));
        }
        Ok(())
    }

    /// Multilinear form `S[v₁, …, v_ℓ]`.
    pub fn apply(&self, vectors: &[&[f64]]) -> Result<f64> {
        if vectors.len() != self.order {
            return Err(ArpError::Shape(format!(
                "{} vectors applied to order-{} tensor",
                vectors.len(),
                self.order
            )));
        }
        for v in vectors {
            self.check_vec(v)?;
        }
        if self.order == 0 {
            return Ok(self.entries[0]);
        }
        // full expansion over n^ℓ index tuples
        let n = self.dim;
        let mut idx = vec![0usize; self.order];
        let mut total = 0.0;
        loop {
            let w: f64 = idx.iter().zip(vectors).map(|(&i, v)| v[i]).product();
            if w != 0.0 {
                total += w * self.get(&idx);
            }
            let mut pos = self.order;
            loop {
                if pos == 0 {
                    return Ok(total);
                }
                pos -= 1;
                idx[pos] += 1;
                if idx[pos] < n {
                    break;
                }
                idx[pos] = 0;
            }
        }
    }

    /// `S[v]^ℓ`.
    pub fn apply_power(&self, v: &[f64]) -> Result<f64> {
        self.check_vec(v)?;
        Ok(Multisets::new(self.order, self.dim)
            .zip(&self.entries)
            .map(|(idx, &e)| e * multinomial(&idx) * idx.iter().map(|&i| v[i]).product::<f64>())
            .sum())
    }

    /// Contracts `m` slots with `v`, returning the order `ℓ−m` tensor `S[v]^m`.
    pub fn contract(&self, v: &[f64], m: usize) -> Result<SymmetricTensor> {
        self.check_vec(v)?;
        if m > self.order {
            return Err(ArpError::Domain(format!(
                "cannot contract {m} slots of an order-{} tensor",
                self.order
            )));
        }
        if m == 0 {
            return Ok(self.clone());
        }
        let ks: Vec<(Vec<usize>, f64)> = Multisets::new(m, self.dim)
            .map(|k| {
                let w = multinomial(&k) * k.iter().map(|&i| v[i]).product::<f64>();
                (k, w)
            })
            .filter(|(_, w)| *w != 0.0)
            .collect();
        let mut buf = Vec::with_capacity(self.order);
        Ok(Self::from_fn(self.order - m, self.dim, |j| {
            let mut acc = 0.0;
            for (k, w) in &ks {
                buf.clear();
                buf.extend_from_slice(j);
                buf.extend_from_slice(k);
                buf.sort_unstable();
                acc += w * self.entries[self.rank(&buf)];
            }
            acc
        }))
    }

    /// Order-2 tensor as a dense symmetric matrix.
    pub fn to_matrix(&self) -> DMatrix<f64> {
        assert_eq!(self.order, 2, "to_matrix needs an order-2 tensor");
        DMatrix::from_fn(self.dim, self.dim, |i, j| self.get(&[i, j]))
    }

    /// Order-1 tensor as a vector.
    pub fn to_vec(&self) -> Vec<f64> {
        assert_eq!(self.order, 1, "to_vec needs an order-1 tensor");
        self.entries.clone()
    }

    pub fn scaled(&self, c: f64) -> Self {
        SymmetricTensor {
            order: self.order,
            dim: self.dim,
            entries: self.entries.iter().map(|e| e * c).collect(),
        }
    }

    /// `self += c · other`.
    pub fn add_scaled(&mut self, other: &SymmetricTensor, c: f64) -> Result<()> {
        if other.order != self.order || other.dim != self.dim {
            return Err(ArpError::Shape(format!(
                "cannot add order-{}/dim-{} tensor to order-{}/dim-{}",
                other.order, other.dim, self.order, self.dim
            )));
        }
        for (a, b) in self.entries.iter_mut().zip(&other.entries) {
            *a += c * b;
        }
        Ok(())
    }

    /// Frobenius norm of the full (unfolded) tensor.
    pub fn frobenius(&self) -> f64 {
        Multisets::new(self.order, self.dim)
            .zip(&self.entries)
            .map(|(idx, e)| multinomial(&idx) * e * e)
            .sum::<f64>()
            .sqrt()
    }

    /// Induced norm `max_{‖v‖=1} |S[v]^ℓ|`.
    ///
    /// Exact for orders 1 and 2. For higher orders this runs a shifted
    /// symmetric power iteration from the coordinate axes and
    /// [`NORM_RESTARTS`] seeded random starts, for both signs of the form;
    /// `tolerance` bounds the relative change used as the stopping rule.
    pub fn norm(&self, tolerance: f64) -> Result<f64> {
        match self.order {
            0 => Err(ArpError::Domain("norm of an order-0 tensor".into())),
            1 => Ok(self.entries.iter().map(|e| e * e).sum::<f64>().sqrt()),
            2 => {
                let eig = SymmetricEigen::new(self.to_matrix());
                Ok(eig.eigenvalues.iter().fold(0.0_f64, |m, l| m.max(l.abs())))
            }
            _ => Ok(self.power_norm(tolerance).0),
        }
    }

    /// Power-iteration norm together with a maximizing unit vector.
    pub fn power_norm(&self, tolerance: f64) -> (f64, Vec<f64>) {
        let n = self.dim;
        let frob = self.frobenius();
        if frob == 0.0 {
            let mut e = vec![0.0; n];
            e[0] = 1.0;
            return (0.0, e);
        }
        let shift = (self.order as f64 - 1.0) * frob;
        let tol = tolerance.max(1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(NORM_SEED);
        let mut starts: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let mut e = vec![0.0; n];
                e[i] = 1.0;
                e
            })
            .collect();
        for _ in 0..NORM_RESTARTS {
            let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            normalize(&mut v);
            starts.push(v);
        }
        let mut best = (f64::NEG_INFINITY, starts[0].clone());
        for start in &starts {
            for sign in [1.0, -1.0] {
                let mut v = start.clone();
                let mut val = sign * self.apply_power(&v).unwrap_or(0.0);
                for _ in 0..5000 {
                    let g = self.contract(&v, self.order - 1).expect("dim checked").to_vec();
                    let mut w: Vec<f64> = g.iter().zip(&v).map(|(gi, vi)| sign * gi + shift * vi).collect();
                    if normalize(&mut w) == 0.0 {
                        break;
                    }
                    let new_val = sign * self.apply_power(&w).unwrap_or(0.0);
                    let moved = w.iter().zip(&v).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                    v = w;
                    let change = (new_val - val).abs();
                    val = new_val;
                    if moved < tol.sqrt() * 1e-3 || change <= tol * 1e-3 * frob {
                        break;
                    }
                }
                if val > best.0 {
                    best = (val, v);
                }
            }
        }
        (best.0.abs(), best.1)
    }

    /// Plain-text serialization: a header line `order n` followed by one
    /// canonical-layout entry per line in shortest round-trip notation.
    pub fn to_text(&self) -> String {
        let mut s = format!("{} {}\n", self.order, self.dim);
        for e in &self.entries {
            writeln!(s, "{e:e}").expect("writing to a String cannot fail");
        }
        s
    }

    /// Parses the format written by [`SymmetricTensor::to_text`] from a line iterator.
    pub fn read_text<'a, I: Iterator<Item = &'a str>>(lines: &mut I) -> Result<Self> {
        let header = lines
            .next()
            .ok_or_else(|| ArpError::Parse("missing tensor header".into()))?;
        let mut parts = header.split_whitespace();
        let order: usize = parse_field(parts.next(), "tensor order")?;
        let dim: usize = parse_field(parts.next(), "tensor dimension")?;
        let len = Self::storage_len(order, dim);
        let mut entries = Vec::with_capacity(len);
        for _ in 0..len {
            let line = lines
                .next()
                .ok_or_else(|| ArpError::Parse("truncated tensor entries".into()))?;
            entries.push(parse_field(Some(line.trim()), "tensor entry")?);
        }
        Self::from_entries(order, dim, entries)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        Self::read_text(&mut text.lines())
    }
}

pub(crate) fn parse_field<T: std::str::FromStr>(field: Option<&str>, what: &str) -> Result<T> {
    let raw = field.ok_or_else(|| ArpError::Parse(format!("missing {what}")))?;
    raw.parse()
        .map_err(|_| ArpError::Parse(format!("bad {what}: {raw:?}")))
}

pub(crate) fn normalize(v: &mut [f64]) -> f64 {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        for x in v.iter_mut() {
            *x /= n;
        }
    }
    n
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
