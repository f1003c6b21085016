//! Small-dimension geometry: points, circumcenters of three points and the
//! colinearity classification that drives the generically proper
//! circumcentered reflection operator.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A finite point of `R^n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Point(Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::InvalidParameter("point must have dimension >= 1".into()));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Point(coords))
    }

    /// Planar point from two literals.
    ///
    /// Panics if either coordinate is not finite.
    pub fn xy(x: f64, y: f64) -> Self {
        assert!(x.is_finite() && y.is_finite(), "non-finite coordinate");
        Point(vec![x, y])
    }

    pub fn zeros(dim: usize) -> Self {
        Point(vec![0.0; dim.max(1)])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.0
    }

    pub fn dot(&self, other: &Point) -> f64 {
        debug_assert_eq!(self.dim(), other.dim());
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn norm(&self) -> f64 {
        // hypot-style scaling keeps tiny and huge coordinates from under/overflowing
        let scale = self.0.iter().fold(0.0_f64, |m, c| m.max(c.abs()));
        if scale == 0.0 {
            return 0.0;
        }
        let s: f64 = self.0.iter().map(|c| (c / scale) * (c / scale)).sum();
        scale * s.sqrt()
    }

    pub fn dist(&self, other: &Point) -> f64 {
        (self - other).norm()
    }

    pub fn scale(&self, k: f64) -> Point {
        Point(self.0.iter().map(|c| c * k).collect())
    }

    /// `self + k * dir`
    pub fn axpy(&self, k: f64, dir: &Point) -> Point {
        debug_assert_eq!(self.dim(), dir.dim());
        Point(self.0.iter().zip(&dir.0).map(|(a, d)| a + k * d).collect())
    }

    pub fn midpoint(&self, other: &Point) -> Point {
        debug_assert_eq!(self.dim(), other.dim());
        Point(self.0.iter().zip(&other.0).map(|(a, b)| 0.5 * a + 0.5 * b).collect())
    }

    pub fn ensure_dim(&self, expected: usize) -> Result<()> {
        if self.dim() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                found: self.dim(),
            });
        }
        Ok(())
    }

    fn lex_cmp(&self, other: &Point) -> Ordering {
        for (a, b) in self.0.iter().zip(&other.0) {
            match a.total_cmp(b) {
                Ordering::Equal => continue,
                ord => return ord,
            }
        }
        Ordering::Equal
    }
}

impl TryFrom<Vec<f64>> for Point {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Point::new(v)
    }
}

impl From<Point> for Vec<f64> {
    fn from(p: Point) -> Self {
        p.0
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

impl Sub for &Point {
    type Output = Point;

    fn sub(self, rhs: &Point) -> Point {
        debug_assert_eq!(self.dim(), rhs.dim());
        Point(self.0.iter().zip(&rhs.0).map(|(a, b)| a - b).collect())
    }
}

impl Add for &Point {
    type Output = Point;

    fn add(self, rhs: &Point) -> Point {
        debug_assert_eq!(self.dim(), rhs.dim());
        Point(self.0.iter().zip(&rhs.0).map(|(a, b)| a + b).collect())
    }
}

/// Numerical thresholds shared by every operation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// `epsilon` in the noncolinearity test `ratio < 1 - epsilon`.
    pub colinearity_eps: f64,
    /// Absolute distance under which two points count as equal.
    pub point_eq_eps: f64,
    /// Solver stop threshold on the feasibility residual.
    pub residual_tol: f64,
    /// Width to which the one-dimensional projection search is refined.
    pub projection_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            colinearity_eps: 1e-9,
            point_eq_eps: 1e-12,
            residual_tol: 1e-10,
            projection_tol: 1e-13,
        }
    }
}

impl Tolerances {
    pub fn validate(&self) -> Result<()> {
        let named = [
            ("colinearity_eps", self.colinearity_eps),
            ("point_eq_eps", self.point_eq_eps),
            ("residual_tol", self.residual_tol),
            ("projection_tol", self.projection_tol),
        ];
        for (name, v) in named {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        if self.colinearity_eps >= 1.0 {
            return Err(Error::InvalidParameter(format!(
                "colinearity_eps must be < 1, got {}",
                self.colinearity_eps
            )));
        }
        Ok(())
    }
}

/// Shape of the reflection triple `(x, R_A x, R_B R_A x)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ColinearityCase {
    /// All three points coincide: `x` is feasible.
    AllCoincide,
    /// Exactly two distinct points.
    TwoDistinct,
    /// `R_B R_A x = x != R_A x`: `x` is a fixed point of the DR operator.
    FixedPointPair,
    /// Three distinct colinear points: the circumcenter does not exist.
    DistinctColinear,
    NonColinear,
}

impl ColinearityCase {
    pub fn tag(&self) -> &'static str {
        match self {
            ColinearityCase::AllCoincide => "all-coincide",
            ColinearityCase::TwoDistinct => "two-distinct",
            ColinearityCase::FixedPointPair => "fixed-point-pair",
            ColinearityCase::DistinctColinear => "distinct-colinear",
            ColinearityCase::NonColinear => "non-colinear",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        Some(match tag {
            "all-coincide" => ColinearityCase::AllCoincide,
            "two-distinct" => ColinearityCase::TwoDistinct,
            "fixed-point-pair" => ColinearityCase::FixedPointPair,
            "distinct-colinear" => ColinearityCase::DistinctColinear,
            "non-colinear" => ColinearityCase::NonColinear,
            _ => return None,
        })
    }

    pub fn is_colinear(&self) -> bool {
        !matches!(self, ColinearityCase::NonColinear)
    }
}

impl fmt::Display for ColinearityCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

fn ensure_same_dim(points: &[&Point]) -> Result<usize> {
    let n = points[0].dim();
    for p in &points[1..] {
        p.ensure_dim(n)?;
    }
    Ok(n)
}

/// Circumcenter of three points using the default point-equality threshold.
pub fn circumcenter(u: &Point, v: &Point, w: &Point) -> Result<Point> {
    circumcenter_with(u, v, w, Tolerances::default().point_eq_eps)
}

/// Circumcenter of `u, v, w`: the point of their affine hull equidistant to
/// all three.
///
/// A single distinct point is its own circumcenter; two distinct points give
/// their midpoint. Three distinct colinear points have no circumcenter.
///
/// The inputs are put in a canonical (lexicographic) order first, so the
/// result does not depend on argument order. The center is then solved in an
/// orthonormal frame of the affine hull anchored at the vertex opposite the
/// longest edge.
pub fn circumcenter_with(u: &Point, v: &Point, w: &Point, point_eq_eps: f64) -> Result<Point> {
    ensure_same_dim(&[u, v, w])?;
    let mut pts = [u, v, w];
    pts.sort_by(|a, b| a.lex_cmp(b));
    let [p0, p1, p2] = pts;

    let d01 = p0.dist(p1);
    let d12 = p1.dist(p2);
    let d02 = p0.dist(p2);
    let eq = [d01 <= point_eq_eps, d12 <= point_eq_eps, d02 <= point_eq_eps];
    match eq.iter().filter(|&&e| e).count() {
        0 => {}
        1 => {
            let (a, b) = if eq[0] { (p0, p2) } else { (p0, p1) };
            return Ok(a.midpoint(b));
        }
        _ => return Ok(p0.clone()),
    }

    // anchor at the vertex opposite the longest edge
    let (base, q1, q2) = if d12 >= d01 && d12 >= d02 {
        (p0, p1, p2)
    } else if d02 >= d01 {
        (p1, p0, p2)
    } else {
        (p2, p0, p1)
    };
    let a = q1 - base;
    let b = q2 - base;
    let na = a.norm();
    let nb = b.norm();
    let e1 = a.scale(1.0 / na);
    let b1 = b.dot(&e1);
    let mut perp = b.axpy(-b1, &e1);
    // second Gram-Schmidt pass
    let corr = perp.dot(&e1);
    perp = perp.axpy(-corr, &e1);
    let b1 = b1 + corr;
    let h = perp.norm();
    if h <= 8.0 * f64::EPSILON * na.max(nb) {
        return Err(Error::DistinctColinearInput);
    }
    let e2 = perp.scale(1.0 / h);
    let cx = 0.5 * na;
    let cy = (b1 * (b1 - na) + h * h) / (2.0 * h);
    Ok(base.axpy(cx, &e1).axpy(cy, &e2))
}

/// Absolute cosine of the angle at `rbrax` in the triple, or `None` when
/// either edge meeting there is shorter than `point_eq_eps`.
pub fn alignment_ratio(x: &Point, rax: &Point, rbrax: &Point, tol: &Tolerances) -> Result<Option<f64>> {
    ensure_same_dim(&[x, rax, rbrax])?;
    let d1 = x - rbrax;
    let d2 = rax - rbrax;
    let n1 = d1.norm();
    let n2 = d2.norm();
    if n1 <= tol.point_eq_eps || n2 <= tol.point_eq_eps {
        return Ok(None);
    }
    let u1 = d1.scale(1.0 / n1);
    let u2 = d2.scale(1.0 / n2);
    Ok(Some(u1.dot(&u2).abs().min(1.0)))
}

/// Classify the reflection triple `(x, R_A x, R_B R_A x)`.
///
/// The triple is non-colinear when the alignment ratio is defined and below
/// `1 - colinearity_eps`. Otherwise the colinear variant is decided by which
/// points coincide, checked in the order: all coincide, exactly two
/// distinct, `R_B R_A x = x`, three distinct.
pub fn classify_triple(x: &Point, rax: &Point, rbrax: &Point, tol: &Tolerances) -> Result<ColinearityCase> {
    if let Some(ratio) = alignment_ratio(x, rax, rbrax, tol)? {
        if ratio < 1.0 - tol.colinearity_eps {
            return Ok(ColinearityCase::NonColinear);
        }
    }
    let x_rax = x.dist(rax) <= tol.point_eq_eps;
    let rax_rbrax = rax.dist(rbrax) <= tol.point_eq_eps;
    let x_rbrax = x.dist(rbrax) <= tol.point_eq_eps;
    let equal_pairs = [x_rax, rax_rbrax, x_rbrax].iter().filter(|&&e| e).count();
    Ok(if equal_pairs >= 2 {
        ColinearityCase::AllCoincide
    } else if x_rax || rax_rbrax {
        ColinearityCase::TwoDistinct
    } else if x_rbrax {
        ColinearityCase::FixedPointPair
    } else {
        ColinearityCase::DistinctColinear
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: &Point, b: &Point, tol: f64) -> bool {
        a.dist(b) <= tol
    }

    #[test]
    fn obtuse_triangle_center_lies_outside() {
        let c = circumcenter(&Point::xy(-1.0, 1.0), &Point::xy(0.0, 0.0), &Point::xy(1.0, 0.0)).unwrap();
        assert!(close(&c, &Point::xy(0.5, 1.5), 1e-12), "{c}");
    }

    #[test]
    fn degenerate_cardinalities() {
        let p = Point::xy(3.0, 4.0);
        assert_eq!(circumcenter(&p, &p, &p).unwrap(), p);
        let q = Point::xy(1.0, 0.0);
        assert_eq!(circumcenter(&p, &q, &p).unwrap(), Point::xy(2.0, 2.0));
        assert_eq!(circumcenter(&q, &p, &p).unwrap(), Point::xy(2.0, 2.0));
    }

    #[test]
    fn right_triangle_center_is_hypotenuse_midpoint() {
        let c = circumcenter(&Point::xy(0.0, 0.0), &Point::xy(2.0, 0.0), &Point::xy(0.0, 2.0)).unwrap();
        assert!(close(&c, &Point::xy(1.0, 1.0), 1e-14));
    }

    #[test]
    fn distinct_colinear_is_rejected() {
        let err = circumcenter(&Point::xy(0.0, 2.0), &Point::xy(0.0, 0.0), &Point::xy(0.0, 1.5)).unwrap_err();
        assert_eq!(err, Error::DistinctColinearInput);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let err = circumcenter(&Point::xy(0.0, 0.0), &Point::new(vec![1.0, 0.0, 0.0]).unwrap(), &Point::xy(0.0, 1.0))
            .unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
    }

    #[test]
    fn non_finite_points_are_refused() {
        assert_eq!(Point::new(vec![1.0, f64::NAN]).unwrap_err(), Error::NonFinite);
        assert!(serde_json::from_str::<Point>("[1.0, 2.0]").is_ok());
        assert!(serde_json::from_str::<Point>("[]").is_err());
    }

    #[test]
    fn classify_examples() {
        let tol = Tolerances::default();
        let case = classify_triple(&Point::xy(0.0, 2.0), &Point::xy(0.0, 0.0), &Point::xy(0.0, 1.5), &tol).unwrap();
        assert_eq!(case, ColinearityCase::DistinctColinear);
        let p = Point::xy(1.0, 1.0);
        assert_eq!(classify_triple(&p, &p, &p, &tol).unwrap(), ColinearityCase::AllCoincide);
        let case = classify_triple(&Point::xy(1.0, 0.0), &Point::xy(0.0, 1.0), &Point::xy(-1.0, 0.0), &tol).unwrap();
        assert_eq!(case, ColinearityCase::NonColinear);
    }

    #[test]
    fn classify_colinear_variants() {
        let tol = Tolerances::default();
        let a = Point::xy(0.0, 0.0);
        let b = Point::xy(0.0, 1.0);
        assert_eq!(classify_triple(&a, &a, &b, &tol).unwrap(), ColinearityCase::TwoDistinct);
        assert_eq!(classify_triple(&a, &b, &b, &tol).unwrap(), ColinearityCase::TwoDistinct);
        assert_eq!(classify_triple(&a, &b, &a, &tol).unwrap(), ColinearityCase::FixedPointPair);
    }

    #[test]
    fn alignment_ratio_examples() {
        let tol = Tolerances::default();
        let r = alignment_ratio(&Point::xy(0.0, 0.0), &Point::xy(1.0, 0.0), &Point::xy(2.0, 0.0), &tol)
            .unwrap()
            .unwrap();
        assert!((r - 1.0).abs() < 1e-15);
        // |<(1,1),(1,0)>| / (sqrt(2) * 1)
        let r = alignment_ratio(&Point::xy(1.0, 1.0), &Point::xy(1.0, 0.0), &Point::xy(0.0, 0.0), &tol)
            .unwrap()
            .unwrap();
        assert!((r - 1.0 / 2f64.sqrt()).abs() < 1e-15);
        let x = Point::xy(0.3, 0.7);
        assert_eq!(alignment_ratio(&x, &Point::xy(1.0, 0.0), &x, &tol).unwrap(), None);
    }

    #[test]
    fn tolerances_validation() {
        assert!(Tolerances::default().validate().is_ok());
        let bad = Tolerances {
            colinearity_eps: 1.0,
            ..Tolerances::default()
        };
        assert!(bad.validate().is_err());
        let bad = Tolerances {
            point_eq_eps: 0.0,
            ..Tolerances::default()
        };
        assert!(bad.validate().is_err());
    }

    fn pt2() -> impl Strategy<Value = Point> {
        (-10.0..10.0f64, -10.0..10.0f64).prop_map(|(x, y)| Point::xy(x, y))
    }

    proptest! {
        #[test]
        fn circumcenter_is_order_independent(u in pt2(), v in pt2(), w in pt2()) {
            if let Ok(c) = circumcenter(&u, &v, &w) {
                let c2 = circumcenter(&w, &u, &v).unwrap();
                let c3 = circumcenter(&v, &w, &u).unwrap();
                prop_assert!(c.dist(&c2) <= 1e-12);
                prop_assert!(c.dist(&c3) <= 1e-12);
            }
        }

        #[test]
        fn circumcenter_is_equidistant(u in pt2(), v in pt2(), w in pt2()) {
            if let Ok(c) = circumcenter(&u, &v, &w) {
                let diam = u.dist(&v).max(v.dist(&w)).max(u.dist(&w));
                let (a, b, d) = (c.dist(&u), c.dist(&v), c.dist(&w));
                let bound = 1e-10 * (1.0 + diam);
                prop_assert!((a - b).abs() <= bound && (b - d).abs() <= bound);
            }
        }

        #[test]
        fn classification_is_scale_invariant(x in pt2(), rax in pt2(), rbrax in pt2()) {
            let tol = Tolerances::default();
            let base = classify_triple(&x, &rax, &rbrax, &tol).unwrap();
            let centroid = (&(&x + &rax) + &rbrax).scale(1.0 / 3.0);
            for lambda in [1e-3, 1.0, 1e3] {
                let s = |p: &Point| centroid.axpy(lambda, &(p - &centroid));
                let case = classify_triple(&s(&x), &s(&rax), &s(&rbrax), &tol).unwrap();
                prop_assert_eq!(case, base);
            }
        }
    }
}
