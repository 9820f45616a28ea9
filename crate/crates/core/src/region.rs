//! Feasible sets with inexpensive membership and geometry.

use crate::error::{ArpError, Result};
use crate::tensor::{dot, norm2};

/// Slack used when testing that a point lies on a ray.
const RAY_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum FeasibleRegion {
    WholeSpace(usize),
    /// `{origin + t·direction : t ≥ 0}` with a unit direction.
    Ray { origin: Vec<f64>, direction: Vec<f64> },
    /// `[lower, upper] ⊂ ℝ`.
    Interval { lower: f64, upper: f64 },
    /// Axis-aligned box.
    Box { lower: Vec<f64>, upper: Vec<f64> },
}

/// A region seen from a point `x` as the segment `{x + τ·direction : lo ≤ τ ≤ hi}`.
#[derive(Debug, Clone, PartialEq)]
pub struct LineView {
    pub direction: Vec<f64>,
    pub lo: f64,
    pub hi: f64,
}

impl LineView {
    /// The feasible τ-range intersected with `|τ| ≤ radius`.
    pub fn clipped(&self, radius: f64) -> (f64, f64) {
        (self.lo.max(-radius), self.hi.min(radius))
    }
}

impl FeasibleRegion {
    pub fn whole_space(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(ArpError::Domain("dimension must be positive".into()));
        }
        Ok(FeasibleRegion::WholeSpace(n))
    }

    pub fn ray(origin: Vec<f64>, direction: Vec<f64>) -> Result<Self> {
        if origin.len() != direction.len() || origin.is_empty() {
            return Err(ArpError::Shape("ray origin and direction must share a positive dimension".into()));
        }
        let len = norm2(&direction);
        if (len - 1.0).abs() > 1e-12 {
            return Err(ArpError::Domain(format!("ray direction has norm {len}, expected 1")));
        }
        Ok(FeasibleRegion::Ray { origin, direction })
    }

    pub fn interval(lower: f64, upper: f64) -> Result<Self> {
        if !(lower < upper) {
            return Err(ArpError::Domain(format!("interval [{lower}, {upper}] is empty or degenerate")));
        }
        Ok(FeasibleRegion::Interval { lower, upper })
    }

    pub fn boxed(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(ArpError::Shape("box bounds must share a positive dimension".into()));
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l <= u)) {
            return Err(ArpError::Domain("box lower bound exceeds upper bound".into()));
        }
        Ok(FeasibleRegion::Box { lower, upper })
    }

    pub fn dim(&self) -> usize {
        match self {
            FeasibleRegion::WholeSpace(n) => *n,
            FeasibleRegion::Ray { origin, .. } => origin.len(),
            FeasibleRegion::Interval { .. } => 1,
            FeasibleRegion::Box { lower, .. } => lower.len(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            FeasibleRegion::WholeSpace(_) => "whole-space",
            FeasibleRegion::Ray { .. } => "ray",
            FeasibleRegion::Interval { .. } => "interval",
            FeasibleRegion::Box { .. } => "box",
        }
    }

    /// Membership; exact for whole space, intervals and boxes, and up to a
    /// `1e-12` relative slack off the supporting line for rays.
    pub fn contains(&self, x: &[f64]) -> bool {
        if x.len() != self.dim() {
            return false;
        }
        match self {
            FeasibleRegion::WholeSpace(_) => true,
            FeasibleRegion::Interval { lower, upper } => *lower <= x[0] && x[0] <= *upper,
            FeasibleRegion::Box { lower, upper } => {
                x.iter().zip(lower.iter().zip(upper)).all(|(v, (l, u))| l <= v && v <= u)
            }
            FeasibleRegion::Ray { origin, direction } => {
                let rel: Vec<f64> = x.iter().zip(origin).map(|(a, b)| a - b).collect();
                let t = dot(&rel, direction);
                let off = rel
                    .iter()
                    .zip(direction)
                    .map(|(r, u)| (r - t * u).powi(2))
                    .sum::<f64>()
                    .sqrt();
                t >= -RAY_SLACK * (1.0 + norm2(x)) && off <= RAY_SLACK * (1.0 + norm2(x))
            }
        }
    }

    /// One-dimensional view of the region from `x`, available whenever the
    /// feasible moves from `x` lie on a single line (any region in ℝ¹, or a ray).
    pub fn line_view(&self, x: &[f64]) -> Option<LineView> {
        match self {
            FeasibleRegion::Ray { origin, direction } => {
                let rel: Vec<f64> = x.iter().zip(origin).map(|(a, b)| a - b).collect();
                let t0 = dot(&rel, direction).max(0.0);
                Some(LineView {
                    direction: direction.clone(),
                    lo: -t0,
                    hi: f64::INFINITY,
                })
            }
            FeasibleRegion::WholeSpace(1) => Some(LineView {
                direction: vec![1.0],
                lo: f64::NEG_INFINITY,
                hi: f64::INFINITY,
            }),
            FeasibleRegion::Interval { lower, upper } => Some(LineView {
                direction: vec![1.0],
                lo: (lower - x[0]).min(0.0),
                hi: (upper - x[0]).max(0.0),
            }),
            FeasibleRegion::Box { lower, upper } if lower.len() == 1 => Some(LineView {
                direction: vec![1.0],
                lo: (lower[0] - x[0]).min(0.0),
                hi: (upper[0] - x[0]).max(0.0),
            }),
            _ => None,
        }
    }

    /// Distance from `x` to the boundary of a box (infinite for whole space).
    pub fn interior_margin(&self, x: &[f64]) -> f64 {
        match self {
            FeasibleRegion::WholeSpace(_) => f64::INFINITY,
            FeasibleRegion::Box { lower, upper } => x
                .iter()
                .zip(lower.iter().zip(upper))
                .map(|(v, (l, u))| (v - l).min(u - v))
                .fold(f64::INFINITY, f64::min),
            FeasibleRegion::Interval { lower, upper } => (x[0] - lower).min(upper - x[0]),
            FeasibleRegion::Ray { .. } => 0.0,
        }
    }

    /// Highest optimality order `q` for which the measure can be computed
    /// exactly on this region (`None` means unbounded).
    pub fn max_exact_order(&self) -> Option<usize> {
        match self {
            _ if self.dim() == 1 => None,
            FeasibleRegion::Ray { .. } => None,
            FeasibleRegion::WholeSpace(_) => Some(2),
            FeasibleRegion::Box { .. } => Some(1),
            FeasibleRegion::Interval { .. } => None,
        }
    }

    pub fn supports_order(&self, q: usize) -> bool {
        self.max_exact_order().is_none_or(|m| q <= m)
    }
}
