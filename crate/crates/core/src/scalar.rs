//! One-dimensional nondecreasing reward shapes `h` with `h(0) = 0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Shape {
    Linear,
    StrictlyConvex,
    Convex,
    StrictlyConcave,
    Concave,
    General,
}

impl Shape {
    pub fn is_convex(self) -> bool {
        matches!(self, Shape::Linear | Shape::Convex | Shape::StrictlyConvex)
    }

    pub fn is_concave(self) -> bool {
        matches!(self, Shape::Linear | Shape::Concave | Shape::StrictlyConcave)
    }

    pub fn is_strictly_convex(self) -> bool {
        self == Shape::StrictlyConvex
    }

    pub fn is_strictly_concave(self) -> bool {
        self == Shape::StrictlyConcave
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScalarFn {
    /// `a * x`
    Linear { a: f64 },
    /// `a * min(x, cap)^k`; a cap is only accepted for `k <= 1`.
    Power {
        a: f64,
        k: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cap: Option<f64>,
    },
    /// Breakpoints `(x, h(x))` starting at the origin; the last segment
    /// extends past the final breakpoint.
    PiecewiseLinear { points: Vec<[f64; 2]> },
}

const SLOPE_EPS: f64 = 1e-12;

impl ScalarFn {
    pub fn linear(a: f64) -> Self {
        ScalarFn::Linear { a }
    }

    pub fn power(a: f64, k: f64) -> Self {
        ScalarFn::Power { a, k, cap: None }
    }

    pub fn capped_power(a: f64, k: f64, cap: f64) -> Self {
        ScalarFn::Power { a, k, cap: Some(cap) }
    }

    pub fn piecewise(points: &[(f64, f64)]) -> Self {
        ScalarFn::PiecewiseLinear {
            points: points.iter().map(|&(x, y)| [x, y]).collect(),
        }
    }

    pub fn validate(&self, location: &str) -> Result<()> {
        match self {
            ScalarFn::Linear { a } => {
                if !(a.is_finite() && *a > 0.0) {
                    return Err(Error::param(location, format!("linear slope must be > 0, got {a}")));
                }
            }
            ScalarFn::Power { a, k, cap } => {
                if !(a.is_finite() && *a > 0.0) {
                    return Err(Error::param(location, format!("power coefficient must be > 0, got {a}")));
                }
                if !(k.is_finite() && *k > 0.0) {
                    return Err(Error::param(location, format!("power exponent must be > 0, got {k}")));
                }
                if let Some(c) = cap {
                    if !(c.is_finite() && *c > 0.0) {
                        return Err(Error::param(location, format!("power cap must be > 0, got {c}")));
                    }
                    if *k > 1.0 {
                        return Err(Error::param(location, "a cap is only allowed for exponents k <= 1"));
                    }
                }
            }
            ScalarFn::PiecewiseLinear { points } => {
                if points.len() < 2 {
                    return Err(Error::param(location, "piecewise function needs at least two points"));
                }
                if points.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
                    return Err(Error::param(location, "breakpoints must be finite"));
                }
                if points[0] != [0.0, 0.0] {
                    return Err(Error::param(location, "first breakpoint must be (0, 0)"));
                }
                for (i, w) in points.windows(2).enumerate() {
                    if w[1][0] <= w[0][0] {
                        return Err(Error::NonMonotoneBreakpoints {
                            location: format!("{location}.points[{}]", i + 1),
                            message: format!("x must increase, got {} after {}", w[1][0], w[0][0]),
                        });
                    }
                    if w[1][1] < w[0][1] {
                        return Err(Error::NonMonotoneBreakpoints {
                            location: format!("{location}.points[{}]", i + 1),
                            message: format!("values must not decrease, got {} after {}", w[1][1], w[0][1]),
                        });
                    }
                }
            }
        }
        Ok(())
    }

    fn slopes(points: &[[f64; 2]]) -> impl Iterator<Item = f64> + '_ {
        points
            .windows(2)
            .map(|w| (w[1][1] - w[0][1]) / (w[1][0] - w[0][0]))
    }

    pub fn shape(&self) -> Shape {
        match self {
            ScalarFn::Linear { .. } => Shape::Linear,
            ScalarFn::Power { k, cap, .. } => {
                if cap.is_some() {
                    Shape::Concave
                } else if *k == 1.0 {
                    Shape::Linear
                } else if *k > 1.0 {
                    Shape::StrictlyConvex
                } else {
                    Shape::StrictlyConcave
                }
            }
            ScalarFn::PiecewiseLinear { points } => {
                let s: Vec<f64> = Self::slopes(points).collect();
                let tol = |a: f64, b: f64| SLOPE_EPS * (1.0 + a.abs().max(b.abs()));
                let nondec = s.windows(2).all(|w| w[1] >= w[0] - tol(w[0], w[1]));
                let noninc = s.windows(2).all(|w| w[1] <= w[0] + tol(w[0], w[1]));
                match (nondec, noninc) {
                    (true, true) => Shape::Linear,
                    (true, false) => Shape::Convex,
                    (false, true) => Shape::Concave,
                    (false, false) => Shape::General,
                }
            }
        }
    }

    /// Constant slope when the function is linear on `[0, inf)`.
    pub fn linear_slope(&self) -> Option<f64> {
        if self.shape() != Shape::Linear {
            return None;
        }
        match self {
            ScalarFn::Linear { a } => Some(*a),
            ScalarFn::Power { a, .. } => Some(*a),
            ScalarFn::PiecewiseLinear { points } => Self::slopes(points).next(),
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let x = x.max(0.0);
        match self {
            ScalarFn::Linear { a } => a * x,
            ScalarFn::Power { a, k, cap } => {
                let x = match cap {
                    Some(c) => x.min(*c),
                    None => x,
                };
                if *k == 1.0 {
                    a * x
                } else if *k == 2.0 {
                    a * x * x
                } else {
                    a * x.powf(*k)
                }
            }
            ScalarFn::PiecewiseLinear { points } => {
                let n = points.len();
                for i in 0..n - 1 {
                    if x <= points[i + 1][0] {
                        let [x0, y0] = points[i];
                        let [x1, y1] = points[i + 1];
                        return y0 + (y1 - y0) * (x - x0) / (x1 - x0);
                    }
                }
                let [x0, y0] = points[n - 2];
                let [x1, y1] = points[n - 1];
                y1 + (y1 - y0) / (x1 - x0) * (x - x1)
            }
        }
    }

    /// Right derivative `h+(x)`.
    pub fn deriv_right(&self, x: f64) -> f64 {
        let x = x.max(0.0);
        match self {
            ScalarFn::Linear { a } => *a,
            ScalarFn::Power { a, k, cap } => {
                if let Some(c) = cap {
                    if x >= *c {
                        return 0.0;
                    }
                }
                power_deriv(*a, *k, x)
            }
            ScalarFn::PiecewiseLinear { points } => {
                let n = points.len();
                for i in 0..n - 1 {
                    if x < points[i + 1][0] {
                        return seg_slope(points, i);
                    }
                }
                seg_slope(points, n - 2)
            }
        }
    }

    /// Left derivative `h-(x)`; at the origin this is the right derivative.
    pub fn deriv_left(&self, x: f64) -> f64 {
        let x = x.max(0.0);
        match self {
            ScalarFn::Linear { a } => *a,
            ScalarFn::Power { a, k, cap } => {
                if let Some(c) = cap {
                    if x > *c {
                        return 0.0;
                    }
                }
                power_deriv(*a, *k, x)
            }
            ScalarFn::PiecewiseLinear { points } => {
                let n = points.len();
                for i in 0..n - 1 {
                    if x <= points[i + 1][0] {
                        return seg_slope(points, i);
                    }
                }
                seg_slope(points, n - 2)
            }
        }
    }

    /// Interior points where the derivative may jump.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            ScalarFn::Linear { .. } => Vec::new(),
            ScalarFn::Power { cap, .. } => cap.iter().copied().collect(),
            ScalarFn::PiecewiseLinear { points } => {
                points[1..points.len() - 1].iter().map(|p| p[0]).collect()
            }
        }
    }

    /// Largest `x` whose left derivative is at least `lambda` (strictly
    /// greater when `strict`). Only meaningful for concave shapes.
    pub fn demand(&self, lambda: f64, strict: bool) -> f64 {
        let reaches = |d: f64| if strict { d > lambda } else { d >= lambda };
        match self {
            ScalarFn::Linear { a } => {
                if reaches(*a) {
                    f64::INFINITY
                } else {
                    0.0
                }
            }
            ScalarFn::Power { a, k, cap } => {
                let c = cap.unwrap_or(f64::INFINITY);
                if *k == 1.0 {
                    if reaches(*a) {
                        if !reaches(0.0) { c } else { f64::INFINITY }
                    } else {
                        0.0
                    }
                } else if *k < 1.0 {
                    if lambda <= 0.0 {
                        return if reaches(0.0) { f64::INFINITY } else { c };
                    }
                    let x = (lambda / (a * k)).powf(1.0 / (k - 1.0));
                    x.min(c)
                } else {
                    f64::NAN
                }
            }
            ScalarFn::PiecewiseLinear { points } => {
                let n = points.len();
                let last = seg_slope(points, n - 2);
                if reaches(last) {
                    return f64::INFINITY;
                }
                let mut out = 0.0;
                for i in 0..n - 1 {
                    if reaches(seg_slope(points, i)) {
                        out = points[i + 1][0];
                    } else {
                        break;
                    }
                }
                out
            }
        }
    }

    /// Slopes at which the demand jumps (piecewise and linear shapes only).
    pub fn exact_levels(&self) -> Option<Vec<f64>> {
        match self {
            ScalarFn::Linear { a } => Some(vec![*a]),
            ScalarFn::Power { a, k, .. } if *k == 1.0 => Some(vec![*a, 0.0]),
            ScalarFn::Power { .. } => None,
            ScalarFn::PiecewiseLinear { points } => Some(Self::slopes(points).collect()),
        }
    }
}

fn power_deriv(a: f64, k: f64, x: f64) -> f64 {
    if x == 0.0 {
        if k < 1.0 {
            f64::INFINITY
        } else if k == 1.0 {
            a
        } else {
            0.0
        }
    } else if k == 2.0 {
        2.0 * a * x
    } else {
        a * k * x.powf(k - 1.0)
    }
}

fn seg_slope(points: &[[f64; 2]], i: usize) -> f64 {
    (points[i + 1][1] - points[i][1]) / (points[i + 1][0] - points[i][0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn star_h() -> ScalarFn {
        ScalarFn::piecewise(&[(0.0, 0.0), (0.5, 1.5), (1.0, 2.0)])
    }

    #[test]
    fn piecewise_values_and_derivatives() {
        let h = star_h();
        assert_eq!(h.eval(0.25), 0.75);
        assert_eq!(h.eval(1.0), 2.0);
        assert_eq!(h.eval(2.0), 3.0);
        assert_eq!(h.deriv_left(0.5), 3.0);
        assert_eq!(h.deriv_right(0.5), 1.0);
        assert_eq!(h.shape(), Shape::Concave);
    }

    #[test]
    fn shapes() {
        assert_eq!(ScalarFn::power(2.0, 2.0).shape(), Shape::StrictlyConvex);
        assert_eq!(ScalarFn::power(2.0, 0.5).shape(), Shape::StrictlyConcave);
        assert_eq!(ScalarFn::power(2.0, 1.0).shape(), Shape::Linear);
        assert_eq!(ScalarFn::capped_power(2.0, 0.5, 1.0).shape(), Shape::Concave);
        let convex = ScalarFn::piecewise(&[(0.0, 0.0), (1.0, 1.0), (2.0, 3.0)]);
        assert_eq!(convex.shape(), Shape::Convex);
        let general = ScalarFn::piecewise(&[(0.0, 0.0), (1.0, 1.0), (2.0, 3.0), (3.0, 3.5)]);
        assert_eq!(general.shape(), Shape::General);
    }

    #[test]
    fn validation_errors() {
        let bad = ScalarFn::piecewise(&[(0.0, 0.0), (1.0, 1.0), (0.5, 2.0)]);
        assert!(matches!(bad.validate("h"), Err(Error::NonMonotoneBreakpoints { .. })));
        let dec = ScalarFn::piecewise(&[(0.0, 0.0), (1.0, 1.0), (2.0, 0.5)]);
        assert!(matches!(dec.validate("h"), Err(Error::NonMonotoneBreakpoints { .. })));
        let off = ScalarFn::piecewise(&[(0.0, 1.0), (1.0, 2.0)]);
        assert!(off.validate("h").is_err());
        assert!(ScalarFn::Power { a: 1.0, k: 2.0, cap: Some(1.0) }.validate("h").is_err());
        assert!(ScalarFn::linear(0.0).validate("h").is_err());
    }

    #[test]
    fn demand_of_piecewise() {
        let h = star_h();
        assert_eq!(h.demand(2.0, false), 0.5);
        assert_eq!(h.demand(3.0, false), 0.5);
        assert_eq!(h.demand(3.0, true), 0.0);
        assert_eq!(h.demand(1.0, true), 0.5);
        assert_eq!(h.demand(1.0, false), f64::INFINITY);
    }

    #[test]
    fn capped_power_joins_continuously() {
        let h = ScalarFn::capped_power(10.0 * 4f64.powf(1.5), 0.5, 4.0);
        assert!((h.eval(4.0) - 160.0).abs() < 1e-9);
        assert_eq!(h.eval(9.0), h.eval(4.0));
        assert_eq!(h.deriv_right(4.0), 0.0);
        assert!((h.deriv_left(4.0) - 20.0).abs() < 1e-9);
    }

    fn arb_fn() -> impl Strategy<Value = ScalarFn> {
        prop_oneof![
            (0.1f64..10.0).prop_map(ScalarFn::linear),
            (0.1f64..10.0, 0.2f64..3.0).prop_map(|(a, k)| ScalarFn::power(a, k)),
            prop::collection::vec((0.05f64..1.0, 0.0f64..5.0), 1..5).prop_map(|segs| {
                let mut pts = vec![(0.0, 0.0)];
                for (dx, s) in segs {
                    let (x, y) = *pts.last().unwrap();
                    pts.push((x + dx, y + s * dx));
                }
                ScalarFn::piecewise(&pts)
            }),
        ]
    }

    proptest! {
        #[test]
        fn nondecreasing_and_normalized(h in arb_fn(), x in 0.0f64..5.0, d in 0.0f64..2.0) {
            prop_assert!(h.validate("h").is_ok());
            prop_assert_eq!(h.eval(0.0), 0.0);
            prop_assert!(h.eval(x + d) >= h.eval(x) - 1e-12);
        }

        #[test]
        fn declared_shape_consistent(h in arb_fn(), x in 0.01f64..4.0, d in 0.01f64..1.0) {
            let y = x + d;
            let s = h.shape();
            if s.is_convex() {
                prop_assert!(h.deriv_left(x) <= h.deriv_right(x) + 1e-9);
                prop_assert!(h.deriv_right(x) <= h.deriv_left(y) + 1e-9);
            }
            if s.is_concave() {
                prop_assert!(h.deriv_left(x) + 1e-9 >= h.deriv_right(x));
                prop_assert!(h.deriv_right(x) + 1e-9 >= h.deriv_left(y));
            }
        }
    }
}
