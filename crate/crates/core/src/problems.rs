//! Named test problems with closed-form derivatives, plus hooks for
//! slow-convergence instances.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{ArpError, Result};
use crate::hermite::SlowInstance;
use crate::oracle::{DifferentiableOracle, MultiPoly};
use crate::region::FeasibleRegion;

/// `(p, q)` pairs with a univariate or line-restricted feasible set.
const SLOW_PAIRS: [(usize, usize); 6] = [(1, 1), (2, 1), (2, 2), (3, 1), (3, 2), (3, 3)];
/// Instance accuracy used for the registry's slow-instance entries.
pub const REGISTRY_SLOW_EPS: f64 = 0.5;

#[derive(Debug, Clone)]
pub enum ProblemSource {
    Polynomial(MultiPoly),
    Slow(Arc<SlowInstance>),
}

#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub name: String,
    pub description: String,
    pub source: ProblemSource,
    pub region: FeasibleRegion,
    pub x0: Vec<f64>,
    /// Known Lipschitz constants of `∇ᵖf`, by `p`.
    pub lipschitz: Vec<(usize, f64)>,
    pub f_low: Option<f64>,
    /// `(p, q)` pairs the problem is run with in suites.
    pub pairs: Vec<(usize, usize)>,
}

impl ProblemSpec {
    pub fn oracle(&self) -> Arc<dyn DifferentiableOracle> {
        match &self.source {
            ProblemSource::Polynomial(f) => Arc::new(f.clone()),
            ProblemSource::Slow(inst) => inst.interpolant().clone(),
        }
    }

    pub fn lipschitz(&self, p: usize) -> Option<f64> {
        self.lipschitz.iter().find(|(o, _)| *o == p).map(|(_, l)| *l)
    }

    pub fn max_order(&self) -> usize {
        match &self.source {
            ProblemSource::Polynomial(f) => f.max_order(),
            ProblemSource::Slow(inst) => inst.p(),
        }
    }

    pub fn slow_instance(&self) -> Option<&Arc<SlowInstance>> {
        match &self.source {
            ProblemSource::Slow(inst) => Some(inst),
            ProblemSource::Polynomial(_) => None,
        }
    }

    /// A slow-convergence instance started at its first node.
    pub fn slow(p: usize, q: usize, epsilon: f64) -> Result<Self> {
        Ok(Self::from_instance(SlowInstance::build(p, q, epsilon)?, format!("slow-p{p}-q{q}")))
    }

    pub fn from_instance_file(path: &Path) -> Result<Self> {
        let inst = SlowInstance::load(path)?;
        let name = path.file_stem().map_or_else(|| "instance".to_string(), |s| s.to_string_lossy().into_owned());
        Ok(Self::from_instance(inst, name))
    }

    fn from_instance(inst: SlowInstance, name: String) -> Self {
        let (p, q, eps) = (inst.p(), inst.q(), inst.epsilon());
        let lipschitz = inst.lipschitz().ok().map(|l| vec![(p, l)]).unwrap_or_default();
        let f_low = Some(inst.f_low());
        ProblemSpec {
            name,
            description: format!("slow-convergence instance, p = {p}, q = {q}, instance accuracy {eps}"),
            region: FeasibleRegion::WholeSpace(1),
            x0: vec![0.0],
            lipschitz,
            f_low,
            pairs: vec![(p, q)],
            source: ProblemSource::Slow(Arc::new(inst)),
        }
    }
}

fn univariate(name: &str, description: &str, coeffs: &[f64], x0: f64, f_low: f64) -> ProblemSpec {
    let lead = coeffs.last().copied().unwrap_or(0.0);
    ProblemSpec {
        name: name.into(),
        description: description.into(),
        source: ProblemSource::Polynomial(MultiPoly::univariate(coeffs, 4)),
        region: FeasibleRegion::WholeSpace(1),
        x0: vec![x0],
        // quartic: the third derivative is 24·lead·x + c, the fourth is constant
        lipschitz: vec![(3, 24.0 * lead.abs()), (4, 0.0)],
        f_low: Some(f_low),
        pairs: vec![(2, 1), (2, 2), (3, 1), (3, 2), (3, 3), (4, 2), (4, 4)],
    }
}

fn convex_quadratic() -> ProblemSpec {
    let a = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 2.0]);
    let b = DVector::from_vec(vec![1.0, -2.0, 0.5]);
    let rows: Vec<Vec<f64>> = a.row_iter().map(|r| r.iter().copied().collect()).collect();
    let f = MultiPoly::quadratic(&rows, b.as_slice(), 2).expect("square 3x3 data");
    let sol = a.clone().cholesky().expect("positive definite").solve(&b);
    let f_low = -0.5 * b.dot(&sol);
    let lmax = a.symmetric_eigenvalues().max();
    ProblemSpec {
        name: "convex-quadratic".into(),
        description: "½xᵀAx + bᵀx in ℝ³ with A positive definite".into(),
        source: ProblemSource::Polynomial(f),
        region: FeasibleRegion::WholeSpace(3),
        x0: vec![1.0, 1.0, 1.0],
        lipschitz: vec![(1, lmax), (2, 0.0)],
        f_low: Some(f_low),
        pairs: vec![(1, 1), (2, 1), (2, 2)],
    }
}

/// `100(x₂ − x₁²)² + (1 − x₁)²`.
pub fn rosenbrock() -> MultiPoly {
    MultiPoly::new(
        2,
        4,
        vec![
            (100.0, vec![4, 0]),
            (-200.0, vec![2, 1]),
            (100.0, vec![0, 2]),
            (1.0, vec![2, 0]),
            (-2.0, vec![1, 0]),
            (1.0, vec![0, 0]),
        ],
    )
    .expect("two-variable exponents")
}

/// `(½x₁² − x₂)(x₁² − x₂) = ½x₁⁴ − (3/2)x₁²x₂ + x₂²`.
pub fn hancock_peano() -> MultiPoly {
    MultiPoly::new(2, 4, vec![(0.5, vec![4, 0]), (-1.5, vec![2, 1]), (1.0, vec![0, 2])]).expect("two-variable exponents")
}

/// All named problems, in a fixed order with unique names.
pub fn registry() -> Vec<ProblemSpec> {
    let mut out = vec![
        univariate("double-well", "(s² − 1)², minimizers ±1", &[1.0, 0.0, -2.0, 0.0, 1.0], 0.3, 0.0),
        univariate("quartic-two-minima", "s²(s − 1)², minimizers 0 and 1", &[0.0, 0.0, 1.0, -2.0, 1.0], 2.0, 0.0),
        convex_quadratic(),
        ProblemSpec {
            name: "rosenbrock".into(),
            description: "100(x₂ − x₁²)² + (1 − x₁)², minimizer (1, 1)".into(),
            source: ProblemSource::Polynomial(rosenbrock()),
            region: FeasibleRegion::WholeSpace(2),
            x0: vec![-1.2, 1.0],
            lipschitz: vec![],
            f_low: Some(0.0),
            pairs: vec![(2, 1), (2, 2)],
        },
        ProblemSpec {
            name: "hancock-peano".into(),
            description: "(½x₁² − x₂)(x₁² − x₂): the origin is a local minimizer along every line but not a local minimizer".into(),
            source: ProblemSource::Polynomial(hancock_peano()),
            region: FeasibleRegion::WholeSpace(2),
            x0: vec![0.5, 0.5],
            lipschitz: vec![],
            f_low: None,
            pairs: vec![(2, 2)],
        },
    ];
    for (p, q) in SLOW_PAIRS {
        out.push(ProblemSpec::slow(p, q, REGISTRY_SLOW_EPS).expect("registry slow instances build"));
    }
    out
}

/// Looks a problem up by name. Besides the registry names, accepts
/// `slow-p{p}-q{q}-eps{ε}` and a path to a serialized instance.
pub fn find(name: &str) -> Result<ProblemSpec> {
    if let Some(spec) = registry().into_iter().find(|s| s.name == name) {
        return Ok(spec);
    }
    if let Some(rest) = name.strip_prefix("slow-p") {
        let parse = || -> Option<(usize, usize, f64)> {
            let (p, rest) = rest.split_once("-q")?;
            let (q, eps) = rest.split_once("-eps")?;
            Some((p.parse().ok()?, q.parse().ok()?, eps.parse().ok()?))
        };
        if let Some((p, q, eps)) = parse() {
            return ProblemSpec::slow(p, q, eps).map(|s| ProblemSpec { name: name.into(), ..s });
        }
    }
    let path = PathBuf::from(name);
    if path.is_file() {
        return ProblemSpec::from_instance_file(&path);
    }
    Err(ArpError::Domain(format!("unknown problem {name:?}")))
}
