//! Iterative operators and the run loop.
//!
//! `R_S = 2 P_S - Id` is the reflector of a set. The Douglas–Rachford
//! operator is `T = (R_B R_A + Id) / 2`; the circumcentered step takes the
//! circumcenter of `(x, R_A x, R_B R_A x)`; `C_T` does so only when the
//! triple is non-colinear and otherwise falls back to `T`.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{circumcenter_with, classify_triple, ColinearityCase, Point, Tolerances};
use crate::sets::{graph_normal_coefficient, FeasibleSet, FunctionGraph};

/// The intermediate reflections of one step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Substeps {
    pub rax: Point,
    pub rbrax: Point,
}

/// One application of `C_T`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepResult {
    pub next: Point,
    pub case: ColinearityCase,
    pub substeps: Substeps,
    /// Always `case == NonColinear`.
    pub used_circumcenter: bool,
}

fn check_dims(a: &FeasibleSet, b: &FeasibleSet, x: &Point) -> Result<()> {
    x.ensure_dim(a.dim())?;
    x.ensure_dim(b.dim())
}

fn reflections(a: &FeasibleSet, b: &FeasibleSet, x: &Point, tol: &Tolerances) -> Result<Substeps> {
    check_dims(a, b, x)?;
    let rax = a.reflect(x, tol)?;
    let rbrax = b.reflect(&rax, tol)?;
    Ok(Substeps { rax, rbrax })
}

fn average(x: &Point, rbrax: &Point) -> Point {
    x.midpoint(rbrax)
}

/// Douglas–Rachford step `(R_B R_A x + x) / 2`.
pub fn dr_step(a: &FeasibleSet, b: &FeasibleSet, x: &Point, tol: &Tolerances) -> Result<Point> {
    let s = reflections(a, b, x, tol)?;
    Ok(average(x, &s.rbrax))
}

/// Circumcenter of `(x, R_A x, R_B R_A x)`, failing when the three points are
/// distinct and colinear.
pub fn crm_raw(a: &FeasibleSet, b: &FeasibleSet, x: &Point, tol: &Tolerances) -> Result<Point> {
    let s = reflections(a, b, x, tol)?;
    circumcenter_with(x, &s.rax, &s.rbrax, tol.point_eq_eps)
}

/// Generically proper circumcentered step.
pub fn ct_step(a: &FeasibleSet, b: &FeasibleSet, x: &Point, tol: &Tolerances) -> Result<StepResult> {
    let substeps = reflections(a, b, x, tol)?;
    let mut case = classify_triple(x, &substeps.rax, &substeps.rbrax, tol)?;
    let mut next = None;
    if case == ColinearityCase::NonColinear {
        match circumcenter_with(x, &substeps.rax, &substeps.rbrax, tol.point_eq_eps) {
            Ok(c) => next = Some(c),
            // numerically flat triangle that passed the angle test
            Err(Error::DistinctColinearInput) => case = ColinearityCase::DistinctColinear,
            Err(e) => return Err(e),
        }
    }
    let next = match next {
        Some(c) => c,
        None => average(x, &substeps.rbrax),
    };
    Ok(StepResult {
        next,
        case,
        used_circumcenter: case == ColinearityCase::NonColinear,
        substeps,
    })
}

/// Alternating projections `P_B P_A x`.
pub fn altproj_step(a: &FeasibleSet, b: &FeasibleSet, x: &Point, tol: &Tolerances) -> Result<Point> {
    check_dims(a, b, x)?;
    b.project(&a.project(x, tol)?, tol)
}

/// Newton–Raphson map `t - f(t) / f'(t)`.
pub fn newton_step(g: &FunctionGraph, t: f64, tol: &Tolerances) -> Result<f64> {
    let ft = g.eval(t)?;
    let d = g.derivative(t).ok_or(Error::DerivativeUndefined { t })?;
    if d.abs() <= tol.point_eq_eps {
        return Err(Error::DerivativeZero { t });
    }
    Ok(t - ft / d)
}

/// Subgradient projection `y - f(y) / |y*|^2 * y*`.
pub fn subgradient_projection_step(f_at_y: f64, y: &Point, ystar: &Point, tol: &Tolerances) -> Result<Point> {
    ystar.ensure_dim(y.dim())?;
    let n2 = ystar.dot(ystar);
    if n2.sqrt() <= tol.point_eq_eps {
        return Err(Error::ZeroSubgradient);
    }
    Ok(y.axpy(-f_at_y / n2, ystar))
}

/// Projection onto the graph followed by a subgradient-projection step, with
/// `y*` recovered from the projection geometry (the derivative oracle is the
/// fallback when `x` already lies on the graph). Lands on the horizontal axis.
fn subgrad_step(g: &FunctionGraph, x: &Point, tol: &Tolerances) -> Result<Point> {
    let y = g.project_abscissa(x, tol)?;
    let fy = g.eval(y)?;
    let p = Point::xy(y, fy);
    let ystar = match graph_normal_coefficient(x, &p, tol)? {
        Some(s) => s,
        None => g.derivative(y).ok_or(Error::DerivativeUndefined { t: y })?,
    };
    let next = subgradient_projection_step(fy, &Point::new(vec![y])?, &Point::new(vec![ystar])?, tol)?;
    Ok(Point::xy(next.coords()[0], 0.0))
}

/// Solver identifiers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    #[serde(rename = "altproj")]
    AltProj,
    /// The generically proper operator `C_T`.
    Crm,
    Dr,
    Newton,
    Subgrad,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::AltProj, Method::Crm, Method::Dr, Method::Newton, Method::Subgrad];

    pub fn id(&self) -> &'static str {
        match self {
            Method::AltProj => "altproj",
            Method::Crm => "crm",
            Method::Dr => "dr",
            Method::Newton => "newton",
            Method::Subgrad => "subgrad",
        }
    }

    /// Methods that iterate a scalar abscissa rather than a point of the plane.
    pub fn is_scalar(&self) -> bool {
        matches!(self, Method::Newton)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.id() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown method '{s}'")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StopRule {
    pub residual_tol: f64,
    /// Maximum number of steps.
    pub max_iter: usize,
    /// How many previous iterates are checked for an exact revisit.
    pub cycle_window: usize,
}

impl Default for StopRule {
    fn default() -> Self {
        StopRule {
            residual_tol: 1e-10,
            max_iter: 1000,
            cycle_window: 8,
        }
    }
}

impl StopRule {
    pub fn validate(&self) -> Result<()> {
        if self.max_iter < 1 {
            return Err(Error::InvalidParameter("max_iter must be at least 1".into()));
        }
        if !(self.residual_tol.is_finite() && self.residual_tol > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "residual_tol must be positive, got {}",
                self.residual_tol
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "kebab-case")]
pub enum StopReason {
    ResidualMet,
    MaxIter,
    Cycle { period: usize },
    Error { message: String },
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StopReason::ResidualMet => f.write_str("residual-met"),
            StopReason::MaxIter => f.write_str("max-iter"),
            StopReason::Cycle { period } => write!(f, "cycle({period})"),
            StopReason::Error { message } => write!(f, "error({message})"),
        }
    }
}

/// Iterate history of one solver run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub method: Method,
    pub iterates: Vec<Point>,
    /// One entry per step for `crm`; empty for the other methods.
    pub step_results: Vec<StepResult>,
    /// `max(dist(x, A), dist(x, B))` per iterate.
    pub residuals: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dist_to_solution: Option<Vec<f64>>,
    pub stop_reason: StopReason,
    pub wall_time_ms: f64,
}

impl Trace {
    /// Number of steps taken.
    pub fn iterations(&self) -> usize {
        self.iterates.len().saturating_sub(1)
    }

    pub fn last(&self) -> &Point {
        self.iterates.last().expect("a trace holds its start point")
    }

    pub fn final_residual(&self) -> f64 {
        *self.residuals.last().expect("a trace holds its start point")
    }

    pub fn attach_solution(&mut self, solution: &Point) {
        self.dist_to_solution = Some(self.iterates.iter().map(|x| x.dist(solution)).collect());
    }
}

fn residual(a: &FeasibleSet, b: &FeasibleSet, x: &Point, tol: &Tolerances) -> Result<f64> {
    Ok(a.distance(x, tol)?.max(b.distance(x, tol)?))
}

/// Iterate `method` from `x0` until the residual drops to the tolerance, the
/// step budget is spent, or an iterate revisits one of the last
/// `cycle_window` iterates.
///
/// Only malformed input (dimensions, tolerances, a method that does not fit
/// the sets) is returned as an error; failures during iteration end the
/// trace with [`StopReason::Error`]. Newton iterates the abscissa of `x0`
/// on the graph `A`, embedded as `(t, 0)`.
pub fn run(
    method: Method,
    a: &FeasibleSet,
    b: &FeasibleSet,
    x0: &Point,
    stop: &StopRule,
    tol: &Tolerances,
    solution: Option<&Point>,
) -> Result<Trace> {
    stop.validate()?;
    tol.validate()?;
    check_dims(a, b, x0)?;
    let graph = a.as_graph();
    match method {
        Method::Newton | Method::Subgrad if graph.is_none() => {
            return Err(Error::Unsupported(format!("{method} needs A to be a function graph")));
        }
        Method::Subgrad if !b.as_hyperplane().is_some_and(|h| h.is_coordinate_axis()) => {
            return Err(Error::Unsupported("subgrad needs B to be the horizontal axis".into()));
        }
        _ => {}
    }

    let started = Instant::now();
    let x_start = if method.is_scalar() {
        Point::xy(x0.coords()[0], 0.0)
    } else {
        x0.clone()
    };
    let mut iterates = vec![x_start];
    let mut residuals = Vec::new();
    let mut step_results = Vec::new();

    let stop_reason = 'run: {
        match residual(a, b, &iterates[0], tol) {
            Ok(r) => residuals.push(r),
            Err(e) => {
                residuals.push(f64::NAN);
                break 'run StopReason::Error { message: e.to_string() };
            }
        }
        loop {
            if residuals[residuals.len() - 1] <= stop.residual_tol {
                break 'run StopReason::ResidualMet;
            }
            if iterates.len() > stop.max_iter {
                break 'run StopReason::MaxIter;
            }
            let x = &iterates[iterates.len() - 1];
            let next = match method {
                Method::Dr => dr_step(a, b, x, tol),
                Method::Crm => ct_step(a, b, x, tol).map(|s| {
                    let n = s.next.clone();
                    step_results.push(s);
                    n
                }),
                Method::AltProj => altproj_step(a, b, x, tol),
                Method::Newton => {
                    newton_step(graph.expect("checked above"), x.coords()[0], tol).map(|t| Point::xy(t, 0.0))
                }
                Method::Subgrad => subgrad_step(graph.expect("checked above"), x, tol),
            };
            let next = match next.and_then(|p| Point::new(p.into_coords())) {
                Ok(p) => p,
                Err(e) => break 'run StopReason::Error { message: e.to_string() },
            };
            let r = match residual(a, b, &next, tol) {
                Ok(r) => r,
                Err(e) => break 'run StopReason::Error { message: e.to_string() },
            };
            let n = iterates.len();
            let revisit = iterates
                .iter()
                .rev()
                .take(stop.cycle_window)
                .position(|p| p.dist(&next) <= tol.point_eq_eps);
            iterates.push(next);
            residuals.push(r);
            if r <= stop.residual_tol {
                break 'run StopReason::ResidualMet;
            }
            if let Some(back) = revisit {
                debug_assert!(back < n);
                break 'run StopReason::Cycle { period: back + 1 };
            }
        }
    };

    let mut trace = Trace {
        method,
        iterates,
        step_results,
        residuals,
        dist_to_solution: None,
        stop_reason,
        wall_time_ms: started.elapsed().as_secs_f64() * 1e3,
    };
    if let Some(s) = solution {
        trace.attach_solution(s);
    }
    Ok(trace)
}
