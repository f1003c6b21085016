//! Closed sets with projection selectors: hyperplanes, spheres and graphs of
//! scalar functions on the real line.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point, Tolerances};

/// Number of uniform samples used to bracket the nearest point on a graph.
pub const GRID_POINTS: usize = 2048;

const GOLDEN: f64 = 0.618_033_988_749_894_9;

/// `{p : <normal, p> = offset}` with a unit normal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "HyperplaneRepr", into = "HyperplaneRepr")]
pub struct Hyperplane {
    normal: Point,
    offset: f64,
}

#[derive(Serialize, Deserialize)]
struct HyperplaneRepr {
    normal: Point,
    offset: f64,
}

impl TryFrom<HyperplaneRepr> for Hyperplane {
    type Error = Error;

    fn try_from(s: HyperplaneRepr) -> Result<Self> {
        Hyperplane::new(s.normal, s.offset)
    }
}

impl From<Hyperplane> for HyperplaneRepr {
    fn from(h: Hyperplane) -> Self {
        HyperplaneRepr {
            normal: h.normal,
            offset: h.offset,
        }
    }
}

impl Hyperplane {
    /// The normal is rescaled to unit length; `offset` is rescaled with it.
    pub fn new(normal: Point, offset: f64) -> Result<Self> {
        let n = normal.norm();
        if n == 0.0 || !offset.is_finite() {
            return Err(Error::Definition("hyperplane needs a nonzero normal and finite offset".into()));
        }
        Ok(Hyperplane {
            normal: normal.scale(1.0 / n),
            offset: offset / n,
        })
    }

    /// The horizontal axis `{(t, 0)}` of the plane.
    pub fn horizontal_axis() -> Self {
        Hyperplane {
            normal: Point::xy(0.0, 1.0),
            offset: 0.0,
        }
    }

    pub fn normal(&self) -> &Point {
        &self.normal
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn dim(&self) -> usize {
        self.normal.dim()
    }

    pub fn signed_distance(&self, x: &Point) -> f64 {
        self.normal.dot(x) - self.offset
    }

    /// True for `R^{n-1} x {0}`.
    pub fn is_coordinate_axis(&self) -> bool {
        let c = self.normal.coords();
        let last = c.len() - 1;
        self.offset == 0.0 && c[last].abs() == 1.0 && c[..last].iter().all(|&v| v == 0.0)
    }

    fn project(&self, x: &Point) -> Point {
        x.axpy(-self.signed_distance(x), &self.normal)
    }
}

/// Sphere (the boundary, not the ball) with positive radius.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SphereRepr", into = "SphereRepr")]
pub struct Sphere {
    center: Point,
    radius: f64,
}

#[derive(Serialize, Deserialize)]
struct SphereRepr {
    center: Point,
    radius: f64,
}

impl TryFrom<SphereRepr> for Sphere {
    type Error = Error;

    fn try_from(s: SphereRepr) -> Result<Self> {
        Sphere::new(s.center, s.radius)
    }
}

impl From<Sphere> for SphereRepr {
    fn from(s: Sphere) -> Self {
        SphereRepr {
            center: s.center,
            radius: s.radius,
        }
    }
}

impl Sphere {
    pub fn new(center: Point, radius: f64) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::Definition(format!("sphere radius must be positive, got {radius}")));
        }
        Ok(Sphere { center, radius })
    }

    pub fn center(&self) -> &Point {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    fn project(&self, x: &Point) -> Point {
        let d = x - &self.center;
        let n = d.norm();
        if n == 0.0 {
            // every point of the sphere is nearest; pick the first basis direction
            let mut e1 = vec![0.0; x.dim()];
            e1[0] = 1.0;
            return self.center.axpy(self.radius, &Point::new(e1).expect("finite"));
        }
        self.center.axpy(self.radius / n, &d)
    }
}

/// Closed interval of the real line; missing ends are unbounded.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lo: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hi: Option<f64>,
}

impl Domain {
    pub fn unbounded() -> Self {
        Domain { lo: None, hi: None }
    }

    pub fn closed(lo: f64, hi: f64) -> Self {
        Domain {
            lo: Some(lo),
            hi: Some(hi),
        }
    }

    pub fn lo(&self) -> f64 {
        self.lo.unwrap_or(f64::NEG_INFINITY)
    }

    pub fn hi(&self) -> f64 {
        self.hi.unwrap_or(f64::INFINITY)
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.lo() && t <= self.hi()
    }

    pub fn clamp(&self, t: f64) -> f64 {
        t.max(self.lo()).min(self.hi())
    }

    fn intersect(&self, other: &Domain) -> Domain {
        let lo = match (self.lo, other.lo) {
            (Some(a), Some(b)) => Some(a.max(b)),
            (a, b) => a.or(b),
        };
        let hi = match (self.hi, other.hi) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
        Domain { lo, hi }
    }
}

/// Built-in scalar curves, identified by id and parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "id", rename_all = "kebab-case")]
pub enum Curve {
    /// `sum_k coeffs[k] * t^k`
    Polynomial { coeffs: Vec<f64> },
    /// `t / sqrt(|t|)`, extended by 0 at the origin.
    SignedSqrt,
    /// `slope * t` up to `knee`, constant `slope * knee` after it.
    Ramp { slope: f64, knee: f64 },
    /// Upper (or lower) half of `|(t-cx)/a|^p + |(s-cy)/b|^p = 1`, solved for `s`.
    /// Circles, ellipses and p-norm spheres are all of this form.
    SuperellipseArc {
        center: [f64; 2],
        semi_axes: [f64; 2],
        p: f64,
        upper: bool,
    },
}

impl Curve {
    pub fn polynomial(coeffs: &[f64]) -> Self {
        Curve::Polynomial { coeffs: coeffs.to_vec() }
    }

    pub fn circle_arc(center: [f64; 2], radius: f64, upper: bool) -> Self {
        Curve::SuperellipseArc {
            center,
            semi_axes: [radius, radius],
            p: 2.0,
            upper,
        }
    }

    fn validate(&self) -> Result<()> {
        let finite = |v: &[f64]| v.iter().all(|c| c.is_finite());
        let ok = match self {
            Curve::Polynomial { coeffs } => !coeffs.is_empty() && finite(coeffs),
            Curve::SignedSqrt => true,
            Curve::Ramp { slope, knee } => finite(&[*slope, *knee]),
            Curve::SuperellipseArc {
                center, semi_axes, p, ..
            } => finite(center) && semi_axes.iter().all(|&s| s.is_finite() && s > 0.0) && p.is_finite() && *p >= 1.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Definition(format!("invalid curve parameters: {self:?}")))
        }
    }

    pub fn natural_domain(&self) -> Domain {
        match self {
            Curve::SuperellipseArc { center, semi_axes, .. } => {
                Domain::closed(center[0] - semi_axes[0], center[0] + semi_axes[0])
            }
            _ => Domain::unbounded(),
        }
    }

    /// Points where the derivative oracle is not defined.
    pub fn kinks(&self) -> Vec<f64> {
        match self {
            Curve::Polynomial { .. } => vec![],
            Curve::SignedSqrt => vec![0.0],
            Curve::Ramp { knee, .. } => vec![*knee],
            Curve::SuperellipseArc { center, semi_axes, p, .. } => {
                let mut k = vec![center[0] - semi_axes[0], center[0] + semi_axes[0]];
                if *p == 1.0 {
                    k.insert(1, center[0]);
                }
                k
            }
        }
    }

    /// Curve value; the caller keeps `t` inside the natural domain.
    pub fn value(&self, t: f64) -> f64 {
        match self {
            Curve::Polynomial { coeffs } => coeffs.iter().rev().fold(0.0, |acc, c| acc * t + c),
            Curve::SignedSqrt => t.signum() * t.abs().sqrt(),
            Curve::Ramp { slope, knee } => slope * t.min(*knee),
            Curve::SuperellipseArc {
                center,
                semi_axes,
                p,
                upper,
            } => {
                let u = ((t - center[0]) / semi_axes[0]).abs();
                let g = (1.0 - u.powf(*p)).max(0.0);
                let s = if *upper { 1.0 } else { -1.0 };
                center[1] + s * semi_axes[1] * g.powf(1.0 / p)
            }
        }
    }

    pub fn derivative(&self, t: f64) -> Option<f64> {
        let d = match self {
            Curve::Polynomial { coeffs } => coeffs
                .iter()
                .enumerate()
                .skip(1)
                .rev()
                .fold(0.0, |acc, (k, c)| acc * t + k as f64 * c),
            Curve::SignedSqrt => {
                if t == 0.0 {
                    return None;
                }
                0.5 / t.abs().sqrt()
            }
            Curve::Ramp { slope, knee } => {
                if t == *knee {
                    return None;
                }
                if t < *knee {
                    *slope
                } else {
                    0.0
                }
            }
            Curve::SuperellipseArc {
                center,
                semi_axes,
                p,
                upper,
            } => {
                let (a, b) = (semi_axes[0], semi_axes[1]);
                let u = (t - center[0]) / a;
                if u.abs() >= 1.0 || (*p == 1.0 && u == 0.0) {
                    return None;
                }
                let g = 1.0 - u.abs().powf(*p);
                let dg = -p * u.abs().powf(p - 1.0) * u.signum() / a;
                let s = if *upper { 1.0 } else { -1.0 };
                s * b / p * g.powf(1.0 / p - 1.0) * dg
            }
        };
        d.is_finite().then_some(d)
    }

    pub fn second_derivative(&self, t: f64) -> Option<f64> {
        let d = match self {
            Curve::Polynomial { coeffs } => coeffs
                .iter()
                .enumerate()
                .skip(2)
                .rev()
                .fold(0.0, |acc, (k, c)| acc * t + (k * (k - 1)) as f64 * c),
            Curve::SignedSqrt => {
                if t == 0.0 {
                    return None;
                }
                -t.signum() * 0.25 / t.abs().powf(1.5)
            }
            Curve::Ramp { knee, .. } => {
                if t == *knee {
                    return None;
                }
                0.0
            }
            Curve::SuperellipseArc {
                center,
                semi_axes,
                p,
                upper,
            } => {
                let (a, b) = (semi_axes[0], semi_axes[1]);
                let u = (t - center[0]) / a;
                if u.abs() >= 1.0 || (u == 0.0 && *p < 2.0) {
                    return None;
                }
                let au = u.abs();
                let g = 1.0 - au.powf(*p);
                let dg = -p * au.powf(p - 1.0) * u.signum() / a;
                let ddg = -p * (p - 1.0) * au.powf(p - 2.0) / (a * a);
                let s = if *upper { 1.0 } else { -1.0 };
                s * b / p * ((1.0 / p - 1.0) * g.powf(1.0 / p - 2.0) * dg * dg + g.powf(1.0 / p - 1.0) * ddg)
            }
        };
        d.is_finite().then_some(d)
    }
}

/// Graph `{(t, f(t)) : t in domain}` of a built-in curve, a subset of the plane.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GraphRepr", into = "GraphRepr")]
pub struct FunctionGraph {
    curve: Curve,
    domain: Domain,
}

#[derive(Serialize, Deserialize)]
struct GraphRepr {
    curve: Curve,
    #[serde(default)]
    domain: Domain,
}

impl TryFrom<GraphRepr> for FunctionGraph {
    type Error = Error;

    fn try_from(s: GraphRepr) -> Result<Self> {
        FunctionGraph::with_domain(s.curve, s.domain)
    }
}

impl From<FunctionGraph> for GraphRepr {
    fn from(g: FunctionGraph) -> Self {
        GraphRepr {
            curve: g.curve,
            domain: g.domain,
        }
    }
}

impl FunctionGraph {
    pub fn new(curve: Curve) -> Result<Self> {
        FunctionGraph::with_domain(curve, Domain::unbounded())
    }

    /// Restrict the curve to `domain` (intersected with its natural domain).
    pub fn with_domain(curve: Curve, domain: Domain) -> Result<Self> {
        curve.validate()?;
        let domain = domain.intersect(&curve.natural_domain());
        if domain.lo.is_some_and(|v| !v.is_finite()) || domain.hi.is_some_and(|v| !v.is_finite()) {
            return Err(Error::Definition("domain bounds must be finite".into()));
        }
        if !(domain.lo() <= domain.hi()) {
            return Err(Error::EmptyDomain);
        }
        Ok(FunctionGraph { curve, domain })
    }

    pub fn curve(&self) -> &Curve {
        &self.curve
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        if !self.domain.contains(t) {
            return Err(Error::OutsideDomain { t });
        }
        Ok(self.curve.value(t))
    }

    /// Derivative oracle; `None` outside the domain, at declared kinks, and
    /// where the slope is infinite.
    pub fn derivative(&self, t: f64) -> Option<f64> {
        if !self.domain.contains(t) || self.curve.kinks().contains(&t) {
            return None;
        }
        self.curve.derivative(t)
    }

    /// Abscissa `y` of the selected nearest point `(y, f(y))` to `x`.
    ///
    /// The nearest point is no farther than the graph point above the
    /// (domain-clamped) abscissa of `x`, which bounds the search window. The
    /// window is sampled on a uniform grid; every sampled local minimum is
    /// refined by golden-section search and polished with Newton steps on
    /// the stationarity condition `(y - x) + (f(y) - x') f'(y) = 0`. Kinks and
    /// domain ends inside the window are scored exactly. Among equally near
    /// candidates the smallest abscissa wins.
    pub fn project_abscissa(&self, x: &Point, tol: &Tolerances) -> Result<f64> {
        x.ensure_dim(2)?;
        let (a, b) = (x.coords()[0], x.coords()[1]);
        let anchor = self.domain.clamp(a);
        let r0 = (a - anchor).hypot(b - self.curve.value(anchor));
        if r0 == 0.0 {
            return Ok(anchor);
        }
        let lo = (a - r0).max(self.domain.lo());
        let hi = (a + r0).min(self.domain.hi());
        if !(lo <= hi) {
            return Err(Error::EmptyDomain);
        }
        if lo == hi {
            return Ok(lo);
        }

        let f = &self.curve;
        let d2 = |y: f64| {
            let dy = y - a;
            let dz = f.value(y) - b;
            dy * dy + dz * dz
        };

        let n = GRID_POINTS;
        let step = (hi - lo) / (n - 1) as f64;
        let ys: Vec<f64> = (0..n).map(|i| if i == n - 1 { hi } else { lo + i as f64 * step }).collect();
        let vals: Vec<f64> = ys.iter().map(|&y| d2(y)).collect();
        let mut minima: Vec<usize> = (0..n)
            .filter(|&i| (i == 0 || vals[i] < vals[i - 1]) && (i == n - 1 || vals[i] <= vals[i + 1]))
            .collect();
        minima.sort_by(|&i, &j| vals[i].total_cmp(&vals[j]));
        minima.truncate(16);

        let mut exact: Vec<f64> = f.kinks().into_iter().filter(|k| (lo..=hi).contains(k)).collect();
        for end in [self.domain.lo, self.domain.hi].into_iter().flatten() {
            if (lo..=hi).contains(&end) {
                exact.push(end);
            }
        }

        let width = tol.projection_tol * (hi - lo).min(1.0);
        let mut cands: Vec<(f64, f64)> = exact.iter().map(|&y| (y, d2(y))).collect();
        for &i in &minima {
            let l = if i == 0 { lo } else { ys[i - 1] };
            let r = if i == n - 1 { hi } else { ys[i + 1] };
            let y = golden_section(&d2, l, r, width);
            let y = self.polish(a, b, y, l, r);
            let near_exact = exact.iter().any(|&k| (y - k).abs() <= 10.0 * tol.projection_tol * (1.0 + k.abs()));
            if !near_exact {
                cands.push((y, d2(y)));
            }
        }

        let best = cands.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
        let cutoff = best * (1.0 + 1e-12);
        let y = cands
            .iter()
            .filter(|c| c.1 <= cutoff)
            .map(|c| c.0)
            .fold(f64::INFINITY, f64::min);
        Ok(y)
    }

    fn polish(&self, a: f64, b: f64, mut y: f64, l: f64, r: f64) -> f64 {
        let f = &self.curve;
        let stationarity = |y: f64| -> Option<(f64, f64)> {
            let fy = f.value(y);
            let d1 = self.derivative(y)?;
            let d2 = f.second_derivative(y)?;
            Some(((y - a) + (fy - b) * d1, 1.0 + d1 * d1 + (fy - b) * d2))
        };
        for _ in 0..6 {
            let Some((phi, dphi)) = stationarity(y) else { break };
            if phi == 0.0 || !(dphi.is_finite() && dphi > 0.0) {
                break;
            }
            let next = y - phi / dphi;
            if !(next >= l && next <= r) {
                break;
            }
            match stationarity(next) {
                Some((phi_next, _)) if phi_next.abs() < phi.abs() => y = next,
                _ => break,
            }
        }
        y
    }

    fn project(&self, x: &Point, tol: &Tolerances) -> Result<Point> {
        let y = self.project_abscissa(x, tol)?;
        Ok(Point::xy(y, self.curve.value(y)))
    }
}

fn golden_section(f: &impl Fn(f64) -> f64, mut l: f64, mut r: f64, width: f64) -> f64 {
    let mut c = r - GOLDEN * (r - l);
    let mut d = l + GOLDEN * (r - l);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..300 {
        if r - l <= width {
            break;
        }
        if fc <= fd {
            r = d;
            d = c;
            fd = fc;
            c = r - GOLDEN * (r - l);
            fc = f(c);
        } else {
            l = c;
            c = d;
            fc = fd;
            d = l + GOLDEN * (r - l);
            fd = f(d);
        }
    }
    if fc <= fd {
        c
    } else {
        d
    }
}

/// A closed constraint set with a single-valued projection selector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FeasibleSet {
    Hyperplane(Hyperplane),
    Graph(FunctionGraph),
    Sphere(Sphere),
}

impl FeasibleSet {
    pub fn dim(&self) -> usize {
        match self {
            FeasibleSet::Hyperplane(h) => h.dim(),
            FeasibleSet::Graph(_) => 2,
            FeasibleSet::Sphere(s) => s.center.dim(),
        }
    }

    pub fn as_graph(&self) -> Option<&FunctionGraph> {
        match self {
            FeasibleSet::Graph(g) => Some(g),
            _ => None,
        }
    }

    pub fn as_hyperplane(&self) -> Option<&Hyperplane> {
        match self {
            FeasibleSet::Hyperplane(h) => Some(h),
            _ => None,
        }
    }

    pub fn project(&self, x: &Point, tol: &Tolerances) -> Result<Point> {
        x.ensure_dim(self.dim())?;
        match self {
            FeasibleSet::Hyperplane(h) => Ok(h.project(x)),
            FeasibleSet::Sphere(s) => Ok(s.project(x)),
            FeasibleSet::Graph(g) => g.project(x, tol),
        }
    }

    /// `2 P(x) - x`
    pub fn reflect(&self, x: &Point, tol: &Tolerances) -> Result<Point> {
        let p = self.project(x, tol)?;
        Ok(p.scale(2.0).axpy(-1.0, x))
    }

    pub fn distance(&self, x: &Point, tol: &Tolerances) -> Result<f64> {
        match self {
            FeasibleSet::Hyperplane(h) => {
                x.ensure_dim(h.dim())?;
                Ok(h.signed_distance(x).abs())
            }
            FeasibleSet::Sphere(s) => {
                x.ensure_dim(s.center.dim())?;
                Ok((x.dist(&s.center) - s.radius).abs())
            }
            FeasibleSet::Graph(_) => Ok(x.dist(&self.project(x, tol)?)),
        }
    }
}

/// Coefficient `y*` with `x = y + (f(y) - x') y*`, recovered from a point `x`
/// and its projection `p = (y, f(y))` onto a graph.
///
/// At smooth points this equals `f'(y)`; it never consults the derivative
/// oracle, so it is also defined when `y` is a kink. `None` when `x` lies on
/// the graph (`|f(y) - x'| <= point_eq_eps`).
pub fn graph_normal_coefficient(x: &Point, p: &Point, tol: &Tolerances) -> Result<Option<f64>> {
    x.ensure_dim(2)?;
    p.ensure_dim(2)?;
    let drop = p.coords()[1] - x.coords()[1];
    if drop.abs() <= tol.point_eq_eps {
        return Ok(None);
    }
    Ok(Some((x.coords()[0] - p.coords()[0]) / drop))
}
