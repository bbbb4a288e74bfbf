//! Symmetric edge rewards `f_e(x, y)` and their class predicates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::ScalarFn;

/// Symmetric polynomial with nonnegative coefficients, stored as
/// monomials `coef * x^i * y^j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Poly(pub Vec<(u32, u32, f64)>);

impl Poly {
    pub fn new(mut terms: Vec<(u32, u32, f64)>) -> Result<Self> {
        terms.sort_by_key(|t| (t.0, t.1));
        let p = Poly(terms);
        p.validate("poly")?;
        Ok(p)
    }

    /// `c * x * y`
    pub fn product(c: f64) -> Self {
        Poly(vec![(1, 1, c)])
    }

    pub fn validate(&self, location: &str) -> Result<()> {
        if self.0.is_empty() {
            return Err(Error::param(location, "polynomial has no monomials"));
        }
        for (idx, &(i, j, c)) in self.0.iter().enumerate() {
            if !(c.is_finite() && c >= 0.0) {
                return Err(Error::param(
                    format!("{location}[{idx}]"),
                    format!("coefficient must be finite and >= 0, got {c}"),
                ));
            }
            if self.0[..idx].iter().any(|t| t.0 == i && t.1 == j) {
                return Err(Error::param(
                    format!("{location}[{idx}]"),
                    format!("monomial x^{i} y^{j} listed twice"),
                ));
            }
            let mirror = self.0.iter().find(|t| t.0 == j && t.1 == i);
            match mirror {
                Some(t) if (t.2 - c).abs() <= 1e-12 * c.abs().max(1.0) => {}
                _ => {
                    return Err(Error::param(
                        format!("{location}[{idx}]"),
                        format!("polynomial is not symmetric: x^{i} y^{j} has no matching x^{j} y^{i}"),
                    ))
                }
            }
        }
        Ok(())
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.0
            .iter()
            .map(|&(i, j, c)| c * x.powi(i as i32) * y.powi(j as i32))
            .sum()
    }

    /// Partial derivative in the first argument.
    pub fn dx(&self, x: f64, y: f64) -> f64 {
        self.0
            .iter()
            .filter(|t| t.0 > 0)
            .map(|&(i, j, c)| c * i as f64 * x.powi(i as i32 - 1) * y.powi(j as i32))
            .sum()
    }

    fn active(&self) -> impl Iterator<Item = &(u32, u32, f64)> {
        self.0.iter().filter(|t| t.2 > 0.0)
    }

    pub fn max_degree(&self) -> u32 {
        self.active().map(|t| t.0.max(t.1)).max().unwrap_or(0)
    }

    /// No monomial survives when one argument is zero.
    pub fn vanishes_on_axes(&self) -> bool {
        self.active().all(|t| t.0 >= 1 && t.1 >= 1)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum RewardSpec {
    /// `c * (x + y)`
    WeightedSum { c: f64 },
    /// `c * x * y`
    WeightedProduct { c: f64 },
    /// `outer(p(x, y))`
    PolyConvex { poly: Poly, outer: ScalarFn },
    /// `h(min(x, y))`
    MinEffort { h: ScalarFn },
    /// `h(max(x, y))`
    MaxEffort { h: ScalarFn },
}

impl RewardSpec {
    pub fn validate(&self, location: &str) -> Result<()> {
        match self {
            RewardSpec::WeightedSum { c } | RewardSpec::WeightedProduct { c } => {
                if !(c.is_finite() && *c > 0.0) {
                    return Err(Error::param(format!("{location}.c"), format!("constant must be > 0, got {c}")));
                }
                Ok(())
            }
            RewardSpec::PolyConvex { poly, outer } => {
                poly.validate(&format!("{location}.poly"))?;
                outer.validate(&format!("{location}.outer"))
            }
            RewardSpec::MinEffort { h } | RewardSpec::MaxEffort { h } => h.validate(&format!("{location}.h")),
        }
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        // ordered arguments keep symmetry exact in floating point
        let (x, y) = (x.max(0.0), y.max(0.0));
        let (x, y) = if x <= y { (x, y) } else { (y, x) };
        match self {
            RewardSpec::WeightedSum { c } => c * (x + y),
            RewardSpec::WeightedProduct { c } => c * x * y,
            RewardSpec::PolyConvex { poly, outer } => outer.eval(poly.eval(x, y)),
            RewardSpec::MinEffort { h } => h.eval(x.min(y)),
            RewardSpec::MaxEffort { h } => h.eval(x.max(y)),
        }
    }

    /// Right partial derivative in the first argument.
    pub fn dx_right(&self, x: f64, y: f64) -> f64 {
        let (x, y) = (x.max(0.0), y.max(0.0));
        match self {
            RewardSpec::WeightedSum { c } => *c,
            RewardSpec::WeightedProduct { c } => c * y,
            RewardSpec::PolyConvex { poly, outer } => {
                let px = poly.dx(x, y);
                if px == 0.0 {
                    0.0
                } else {
                    outer.deriv_right(poly.eval(x, y)) * px
                }
            }
            RewardSpec::MinEffort { h } => {
                if x < y {
                    h.deriv_right(x)
                } else {
                    0.0
                }
            }
            RewardSpec::MaxEffort { h } => {
                if x >= y {
                    h.deriv_right(x)
                } else {
                    0.0
                }
            }
        }
    }

    /// Left partial derivative in the first argument.
    pub fn dx_left(&self, x: f64, y: f64) -> f64 {
        let (x, y) = (x.max(0.0), y.max(0.0));
        match self {
            RewardSpec::WeightedSum { c } => *c,
            RewardSpec::WeightedProduct { c } => c * y,
            RewardSpec::PolyConvex { poly, outer } => {
                let px = poly.dx(x, y);
                if px == 0.0 {
                    0.0
                } else {
                    outer.deriv_left(poly.eval(x, y)) * px
                }
            }
            RewardSpec::MinEffort { h } => {
                if x <= y {
                    h.deriv_left(x)
                } else {
                    0.0
                }
            }
            RewardSpec::MaxEffort { h } => {
                if x > y {
                    h.deriv_left(x)
                } else {
                    0.0
                }
            }
        }
    }

    /// `c_{u,v} = f_e(B_u, B_v)`
    pub fn max_reward(&self, bu: f64, bv: f64) -> f64 {
        self.eval(bu, bv)
    }

    /// Coordinate-convex, symmetric and nondecreasing (class C).
    pub fn in_c(&self) -> bool {
        match self {
            RewardSpec::WeightedSum { .. } | RewardSpec::WeightedProduct { .. } => true,
            RewardSpec::PolyConvex { outer, .. } => outer.shape().is_convex(),
            RewardSpec::MaxEffort { h } => h.shape().is_convex(),
            RewardSpec::MinEffort { .. } => false,
        }
    }

    /// Strictly coordinate-convex on the open quadrant (class C').
    pub fn in_c_strict(&self) -> bool {
        match self {
            RewardSpec::PolyConvex { poly, outer } => {
                let s = outer.shape();
                s.is_strictly_convex() || (s.is_convex() && poly.max_degree() >= 2)
            }
            _ => false,
        }
    }

    /// In C with `f(x, 0) = 0` (class C0).
    pub fn in_c0(&self) -> bool {
        match self {
            RewardSpec::WeightedProduct { .. } => true,
            RewardSpec::PolyConvex { poly, outer } => outer.shape().is_convex() && poly.vanishes_on_axes(),
            _ => false,
        }
    }

    pub fn coordinate_concave(&self) -> bool {
        match self {
            RewardSpec::WeightedSum { .. } | RewardSpec::WeightedProduct { .. } => true,
            RewardSpec::PolyConvex { poly, outer } => {
                outer.shape().is_concave() && poly.0.iter().all(|t| t.2 == 0.0 || (t.0 <= 1 && t.1 <= 1))
            }
            RewardSpec::MinEffort { h } => h.shape().is_concave(),
            RewardSpec::MaxEffort { .. } => false,
        }
    }

    /// Nonnegative mixed partial derivative, structurally.
    pub fn supermodular(&self) -> bool {
        match self {
            RewardSpec::WeightedSum { .. } | RewardSpec::WeightedProduct { .. } => true,
            RewardSpec::PolyConvex { outer, .. } => outer.shape().is_convex(),
            _ => false,
        }
    }

    pub fn is_weighted_sum(&self) -> bool {
        matches!(self, RewardSpec::WeightedSum { .. })
    }

    pub fn min_h(&self) -> Option<&ScalarFn> {
        match self {
            RewardSpec::MinEffort { h } => Some(h),
            _ => None,
        }
    }

    pub fn max_h(&self) -> Option<&ScalarFn> {
        match self {
            RewardSpec::MaxEffort { h } => Some(h),
            _ => None,
        }
    }

    pub fn family(&self) -> &'static str {
        match self {
            RewardSpec::WeightedSum { .. } => "weighted_sum",
            RewardSpec::WeightedProduct { .. } => "weighted_product",
            RewardSpec::PolyConvex { .. } => "poly_convex",
            RewardSpec::MinEffort { .. } => "min_effort",
            RewardSpec::MaxEffort { .. } => "max_effort",
        }
    }

    /// Points where a one-sided derivative in the first argument may jump,
    /// given the partner's effort `y`.
    pub fn kinks(&self, y: f64) -> Vec<f64> {
        match self {
            RewardSpec::MinEffort { h } => {
                let mut k: Vec<f64> = h.breakpoints().into_iter().filter(|&b| b < y).collect();
                k.push(y);
                k
            }
            RewardSpec::MaxEffort { h } => {
                let mut k = h.breakpoints();
                k.push(y);
                k
            }
            _ => Vec::new(),
        }
    }
}
