//! Catalog of model feasibility problems and the sampled check of the local
//! shape conditions a curve satisfies near its root.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point, Tolerances};
use crate::sets::{Curve, FeasibleSet, FunctionGraph, Hyperplane, Sphere};
use crate::solvers::{run, Method, StopRule, Trace};

/// Residual a stored solution may have in each set.
pub const SOLUTION_RESIDUAL: f64 = 1e-10;

/// Shape of `f` on `]0, eps_f]` next to the root at the origin.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "case", rename_all = "kebab-case")]
pub enum CaseLabel {
    ConcaveFiniteSlope,
    ConcaveInfiniteSlope,
    ConvexNonzeroSlope,
    /// `m` is the multiplicity of the root of the smooth extension.
    ConvexZeroSlopeMultiplicityM { m: u32 },
}

/// Sampled verdict; the multiplicity of a zero-slope root is not estimated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CaseVerdict {
    ConcaveFiniteSlope,
    ConcaveInfiniteSlope,
    ConvexNonzeroSlope,
    ConvexZeroSlope,
    Unclassified,
}

impl CaseLabel {
    pub fn verdict(&self) -> CaseVerdict {
        match self {
            CaseLabel::ConcaveFiniteSlope => CaseVerdict::ConcaveFiniteSlope,
            CaseLabel::ConcaveInfiniteSlope => CaseVerdict::ConcaveInfiniteSlope,
            CaseLabel::ConvexNonzeroSlope => CaseVerdict::ConvexNonzeroSlope,
            CaseLabel::ConvexZeroSlopeMultiplicityM { .. } => CaseVerdict::ConvexZeroSlope,
        }
    }
}

/// A two-set feasibility problem with its known solutions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ProblemRepr", into = "ProblemRepr")]
pub struct Problem {
    name: String,
    a: FeasibleSet,
    b: FeasibleSet,
    known_solutions: Vec<Point>,
    case_label: Option<CaseLabel>,
    epsilon_f: Option<f64>,
    default_x0: Point,
    root_curve: Option<FunctionGraph>,
    solutions_numeric: bool,
}

#[derive(Serialize, Deserialize)]
struct ProblemRepr {
    name: String,
    a: FeasibleSet,
    b: FeasibleSet,
    solutions: Vec<Point>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    case_label: Option<CaseLabel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    epsilon_f: Option<f64>,
    x0: Point,
    /// Graph whose root problem Newton iterates when `a` is not a graph.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    root_curve: Option<FunctionGraph>,
    #[serde(default)]
    solutions_numeric: bool,
}

impl TryFrom<ProblemRepr> for Problem {
    type Error = Error;

    fn try_from(s: ProblemRepr) -> Result<Self> {
        let p = Problem {
            name: s.name,
            a: s.a,
            b: s.b,
            known_solutions: s.solutions,
            case_label: s.case_label,
            epsilon_f: s.epsilon_f,
            default_x0: s.x0,
            root_curve: s.root_curve,
            solutions_numeric: s.solutions_numeric,
        };
        p.validate()?;
        Ok(p)
    }
}

impl From<Problem> for ProblemRepr {
    fn from(p: Problem) -> Self {
        ProblemRepr {
            name: p.name,
            a: p.a,
            b: p.b,
            solutions: p.known_solutions,
            case_label: p.case_label,
            epsilon_f: p.epsilon_f,
            x0: p.default_x0,
            root_curve: p.root_curve,
            solutions_numeric: p.solutions_numeric,
        }
    }
}

impl Problem {
    pub fn new(name: &str, a: FeasibleSet, b: FeasibleSet, known_solutions: Vec<Point>, default_x0: Point) -> Result<Self> {
        let p = Problem {
            name: name.to_string(),
            a,
            b,
            known_solutions,
            case_label: None,
            epsilon_f: None,
            default_x0,
            root_curve: None,
            solutions_numeric: false,
        };
        p.validate()?;
        Ok(p)
    }

    fn with_case(mut self, label: CaseLabel, epsilon_f: f64) -> Result<Self> {
        self.case_label = Some(label);
        self.epsilon_f = Some(epsilon_f);
        self.validate()?;
        Ok(self)
    }

    fn with_root_curve(mut self, g: FunctionGraph) -> Self {
        self.root_curve = Some(g);
        self
    }

    fn validate(&self) -> Result<()> {
        let n = self.a.dim();
        if self.b.dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: self.b.dim(),
            });
        }
        self.default_x0.ensure_dim(n)?;
        if let Some(e) = self.epsilon_f {
            if !(e.is_finite() && e > 0.0) {
                return Err(Error::Definition(format!("epsilon_f must be positive, got {e}")));
            }
        }
        let tol = Tolerances::default();
        for s in &self.known_solutions {
            s.ensure_dim(n)?;
            let ra = self.a.distance(s, &tol)?;
            let rb = self.b.distance(s, &tol)?;
            if ra.max(rb) > SOLUTION_RESIDUAL {
                return Err(Error::Definition(format!(
                    "{}: stored solution {s} has residual {:e}",
                    self.name,
                    ra.max(rb)
                )));
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn a(&self) -> &FeasibleSet {
        &self.a
    }

    pub fn b(&self) -> &FeasibleSet {
        &self.b
    }

    pub fn known_solutions(&self) -> &[Point] {
        &self.known_solutions
    }

    pub fn case_label(&self) -> Option<CaseLabel> {
        self.case_label
    }

    pub fn epsilon_f(&self) -> Option<f64> {
        self.epsilon_f
    }

    pub fn default_x0(&self) -> &Point {
        &self.default_x0
    }

    /// True when the stored solutions come from a numerical solve rather than
    /// a closed form.
    pub fn solutions_numeric(&self) -> bool {
        self.solutions_numeric
    }

    /// Graph whose root Newton–Raphson targets: the explicit root curve, or
    /// `A` itself when it is a graph.
    pub fn newton_graph(&self) -> Option<&FunctionGraph> {
        self.root_curve.as_ref().or_else(|| self.a.as_graph())
    }

    pub fn nearest_solution(&self, p: &Point) -> Option<&Point> {
        self.known_solutions
            .iter()
            .filter(|s| s.dim() == p.dim())
            .min_by(|u, v| u.dist(p).total_cmp(&v.dist(p)))
    }

    /// Run `method` from `x0` (default start when `None`); distances are
    /// measured to the known solution nearest the final iterate.
    pub fn solve(&self, method: Method, x0: Option<&Point>, stop: &StopRule, tol: &Tolerances) -> Result<Trace> {
        let x0 = x0.unwrap_or(&self.default_x0);
        let newton_set;
        let a = if method == Method::Newton {
            let g = self
                .newton_graph()
                .ok_or_else(|| Error::Unsupported(format!("{} has no curve for newton", self.name)))?;
            newton_set = FeasibleSet::Graph(g.clone());
            &newton_set
        } else {
            &self.a
        };
        let mut trace = run(method, a, &self.b, x0, stop, tol, None)?;
        if let Some(s) = self.nearest_solution(trace.last()) {
            trace.attach_solution(&s.clone());
        }
        Ok(trace)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("problem serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Definition(e.to_string()))
    }
}

/// Names accepted by [`builtin`]; `psphere-<p>` also accepts any `p > 1`.
pub const CATALOG: [&str; 10] = [
    "sphere-line",
    "parabola",
    "shifted-parabola",
    "signed-sqrt",
    "pline",
    "ellipse-line",
    "psphere-1.5",
    "psphere-2",
    "psphere-3",
    "psphere-4",
];

fn axis() -> FeasibleSet {
    FeasibleSet::Hyperplane(Hyperplane::horizontal_axis())
}

fn origin() -> Point {
    Point::xy(0.0, 0.0)
}

fn graph(curve: Curve) -> Result<FeasibleSet> {
    Ok(FeasibleSet::Graph(FunctionGraph::new(curve)?))
}

/// Upper half of the unit p-norm sphere centered at `(0, -1/2)`.
fn psphere(p: f64) -> Result<Problem> {
    if !(p.is_finite() && p > 1.0) {
        return Err(Error::UnknownProblem(format!("psphere-{p}")));
    }
    let root = (1.0 - 0.5f64.powf(p)).powf(1.0 / p);
    let a = graph(Curve::SuperellipseArc {
        center: [0.0, -0.5],
        semi_axes: [1.0, 1.0],
        p,
        upper: true,
    })?;
    Problem::new(
        &format!("psphere-{p}"),
        a,
        axis(),
        vec![Point::xy(-root, 0.0), Point::xy(root, 0.0)],
        Point::xy(0.9999, 0.0),
    )
}

pub fn builtin(name: &str) -> Result<Problem> {
    match name {
        "sphere-line" => {
            let r = 3f64.sqrt() / 2.0;
            Ok(Problem::new(
                name,
                FeasibleSet::Sphere(Sphere::new(Point::xy(0.0, -0.5), 1.0)?),
                axis(),
                vec![Point::xy(-r, 0.0), Point::xy(r, 0.0)],
                Point::xy(0.9999, 0.0),
            )?
            .with_root_curve(FunctionGraph::new(Curve::circle_arc([0.0, -0.5], 1.0, true))?))
        }
        "parabola" => Problem::new(
            name,
            graph(Curve::polynomial(&[0.0, 0.0, 1.0]))?,
            axis(),
            vec![origin()],
            Point::xy(0.75, 0.0),
        )?
        .with_case(CaseLabel::ConvexZeroSlopeMultiplicityM { m: 2 }, 1.0),
        // t^2 - 1 translated so that its root t = 1 sits at the origin
        "shifted-parabola" => Problem::new(
            name,
            graph(Curve::polynomial(&[0.0, 2.0, 1.0]))?,
            axis(),
            vec![origin()],
            Point::xy(0.5, 0.0),
        )?
        .with_case(CaseLabel::ConvexNonzeroSlope, 0.49),
        "signed-sqrt" => Problem::new(name, graph(Curve::SignedSqrt)?, axis(), vec![origin()], Point::xy(2.6, 0.0))?
            .with_case(CaseLabel::ConcaveInfiniteSlope, 1.0),
        "pline" => Problem::new(
            name,
            graph(Curve::Ramp { slope: -1.0, knee: 1.0 })?,
            axis(),
            vec![origin()],
            Point::xy(3.0, -5.0),
        ),
        "ellipse-line" => {
            let r = 3f64.sqrt();
            Problem::new(
                name,
                graph(Curve::SuperellipseArc {
                    center: [0.0, -0.5],
                    semi_axes: [2.0, 1.0],
                    p: 2.0,
                    upper: true,
                })?,
                axis(),
                vec![Point::xy(-r, 0.0), Point::xy(r, 0.0)],
                Point::xy(1.9999, 0.0),
            )
        }
        _ => match name.strip_prefix("psphere-").and_then(|p| p.parse::<f64>().ok()) {
            Some(p) => psphere(p),
            None => Err(Error::UnknownProblem(name.to_string())),
        },
    }
}

/// Sign pattern and slope limit of a curve sampled on `]0, window]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseReport {
    /// `1` or `-1` when constant over the samples, `0` otherwise.
    pub sign_f: i8,
    pub sign_df: i8,
    pub sign_ddf: i8,
    /// Extrapolated `f'(0+)`; infinite when the slope blows up.
    pub slope_at_zero: f64,
    pub verdict: CaseVerdict,
}

pub const CLASSIFY_SAMPLES: usize = 64;

fn constant_sign(v: &[f64]) -> i8 {
    if v.iter().all(|&x| x > 0.0) {
        1
    } else if v.iter().all(|&x| x < 0.0) {
        -1
    } else {
        0
    }
}

/// Check which local shape the curve has right of the origin, from samples on
/// a log-spaced grid over `]window * 1e-6, window]`.
///
/// Derivatives come from the oracle when it is defined and from central
/// differences otherwise; second derivatives are differences of the first.
pub fn classify_conditions(g: &FunctionGraph, window: f64) -> CaseReport {
    let n = CLASSIFY_SAMPLES;
    let ts: Vec<f64> = (0..n)
        .map(|i| window * 10f64.powf(-6.0 + 6.0 * i as f64 / (n - 1) as f64))
        .filter(|&t| g.domain().contains(t))
        .collect();
    let f = |t: f64| g.curve().value(t);
    let df = |t: f64| {
        g.derivative(t).unwrap_or_else(|| {
            let h = 1e-4 * t;
            (f(t + h) - f(t - h)) / (2.0 * h)
        })
    };
    let ddf = |t: f64| {
        let h = 1e-3 * t;
        (df(t + h) - df(t - h)) / (2.0 * h)
    };
    let unclassified = CaseReport {
        sign_f: 0,
        sign_df: 0,
        sign_ddf: 0,
        slope_at_zero: f64::NAN,
        verdict: CaseVerdict::Unclassified,
    };
    if ts.len() < 2 {
        return unclassified;
    }

    let fs: Vec<f64> = ts.iter().map(|&t| f(t)).collect();
    let dfs: Vec<f64> = ts.iter().map(|&t| df(t)).collect();
    let ddfs: Vec<f64> = ts.iter().map(|&t| ddf(t)).collect();
    let (sign_f, sign_df, sign_ddf) = (constant_sign(&fs), constant_sign(&dfs), constant_sign(&ddfs));

    let (t0, t1) = (ts[0], 10.0 * ts[0]);
    let (d0, d1) = (df(t0), df(t1));
    let infinite = d1 != 0.0 && d0 / d1 > 1.5;
    let slope_at_zero = if infinite {
        d0.signum() * f64::INFINITY
    } else {
        d0 - t0 * (d1 - d0) / (t1 - t0)
    };
    let zero = !infinite && slope_at_zero.abs() <= 1e-3 * dfs[dfs.len() - 1].abs();

    let verdict = match (sign_f, sign_df, sign_ddf) {
        (1, 1, -1) if infinite => CaseVerdict::ConcaveInfiniteSlope,
        (1, 1, -1) if !zero => CaseVerdict::ConcaveFiniteSlope,
        (1, 1, 1) if zero => CaseVerdict::ConvexZeroSlope,
        (1, 1, 1) if !infinite => CaseVerdict::ConvexNonzeroSlope,
        _ => CaseVerdict::Unclassified,
    };
    CaseReport {
        sign_f,
        sign_df,
        sign_ddf,
        slope_at_zero,
        verdict,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn curve(c: Curve) -> FunctionGraph {
        FunctionGraph::new(c).unwrap()
    }

    #[test]
    fn catalog_loads_and_validates() {
        for name in CATALOG {
            let p = builtin(name).unwrap();
            assert_eq!(p.name(), name);
            assert!(!p.known_solutions().is_empty());
        }
    }

    #[test]
    fn sphere_line_solutions() {
        let p = builtin("sphere-line").unwrap();
        let r = 3f64.sqrt() / 2.0;
        assert_eq!(p.known_solutions(), &[Point::xy(-r, 0.0), Point::xy(r, 0.0)]);
        assert_eq!(p.default_x0(), &Point::xy(0.9999, 0.0));
        assert!(p.newton_graph().is_some());
    }

    #[test]
    fn labelled_problems() {
        let p = builtin("signed-sqrt").unwrap();
        assert_eq!(p.known_solutions(), &[Point::xy(0.0, 0.0)]);
        assert_eq!(p.case_label(), Some(CaseLabel::ConcaveInfiniteSlope));
        let p = builtin("parabola").unwrap();
        assert_eq!(p.case_label(), Some(CaseLabel::ConvexZeroSlopeMultiplicityM { m: 2 }));
        assert_eq!(builtin("shifted-parabola").unwrap().case_label(), Some(CaseLabel::ConvexNonzeroSlope));
    }

    #[test]
    fn unknown_names_are_rejected() {
        for name in ["circle", "psphere-0.5", "psphere-x", ""] {
            assert!(matches!(builtin(name), Err(Error::UnknownProblem(_))), "{name}");
        }
        assert!(builtin("psphere-2.5").is_ok());
    }

    #[test]
    fn json_round_trip() {
        for name in CATALOG {
            let p = builtin(name).unwrap();
            let back = Problem::from_json(&p.to_json()).unwrap();
            assert_eq!(back, p);
        }
    }

    #[test]
    fn import_rejects_wrong_solutions() {
        let mut v: serde_json::Value = serde_json::from_str(&builtin("parabola").unwrap().to_json()).unwrap();
        v["solutions"] = serde_json::json!([[0.5, 0.0]]);
        assert!(Problem::from_json(&v.to_string()).is_err());
        v["solutions"] = serde_json::json!([[0.0, 0.0]]);
        v["epsilon_f"] = serde_json::json!(-1.0);
        assert!(Problem::from_json(&v.to_string()).is_err());
    }

    #[test]
    fn import_from_hand_written_document() {
        let text = r#"{
            "name": "cubic",
            "a": {"kind": "graph", "curve": {"id": "polynomial", "coeffs": [0, 1, 0, 1]}},
            "b": {"kind": "hyperplane", "normal": [0, 1], "offset": 0},
            "solutions": [[0, 0]],
            "x0": [0.5, 0]
        }"#;
        let p = Problem::from_json(text).unwrap();
        assert!(p.a().as_graph().is_some());
        assert_eq!(p.case_label(), None);
    }

    #[test]
    fn classify_examples() {
        let r = classify_conditions(&curve(Curve::SignedSqrt), 0.5);
        assert_eq!(r.verdict, CaseVerdict::ConcaveInfiniteSlope);
        assert!(r.slope_at_zero.is_infinite());

        let r = classify_conditions(&curve(Curve::polynomial(&[0.0, 0.0, 1.0])), 0.5);
        assert_eq!(r.verdict, CaseVerdict::ConvexZeroSlope);
        assert!(r.slope_at_zero.abs() < 1e-6);

        let r = classify_conditions(&curve(Curve::polynomial(&[0.0, 1.0, 1.0])), 0.5);
        assert_eq!(r.verdict, CaseVerdict::ConvexNonzeroSlope);
        assert!((r.slope_at_zero - 1.0).abs() < 1e-6);

        // cubic Taylor model of log(1 + t); its curvature changes sign at t = 1/2
        let r = classify_conditions(&curve(Curve::polynomial(&[0.0, 1.0, -0.5, 1.0 / 3.0])), 0.4);
        assert_eq!(r.verdict, CaseVerdict::ConcaveFiniteSlope);

        let r = classify_conditions(&curve(Curve::polynomial(&[0.0, -1.0, 1.0])), 0.5);
        assert_eq!(r.verdict, CaseVerdict::Unclassified);
        assert_eq!(r.sign_f, -1);
    }

    #[test]
    fn classification_matches_stored_labels() {
        for name in CATALOG {
            let p = builtin(name).unwrap();
            if let (Some(label), Some(eps)) = (p.case_label(), p.epsilon_f()) {
                let g = p.a().as_graph().unwrap();
                assert_eq!(classify_conditions(g, eps).verdict, label.verdict(), "{name}");
            }
        }
    }

    #[test]
    fn solve_attaches_nearest_solution() {
        let p = builtin("sphere-line").unwrap();
        let tr = p.solve(Method::Crm, None, &StopRule::default(), &Tolerances::default()).unwrap();
        let d = tr.dist_to_solution.as_ref().unwrap();
        assert!(*d.last().unwrap() <= 1e-10);
        assert!(tr.last().coords()[0] > 0.0);
    }
}
