//! Convergence-rate diagnostics over solver traces.

use std::fmt;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point, Tolerances};
use crate::problems::Problem;
use crate::solvers::{Method, StopReason, StopRule, Trace};

/// Errors at or below this are not used as ratio denominators.
pub const ERROR_FLOOR: f64 = 1e-15;

const LINEAR_MAX_RATIO: f64 = 0.9;
const LINEAR_MAX_SPREAD: f64 = 0.2;
const QUADRATIC_BAND: (f64, f64) = (1e-3, 1e3);
const SUPERLINEAR_LAST_RATIO: f64 = 0.1;
/// A landing is abrupt when its ratio undercuts every earlier one by this factor.
const ABRUPT_FACTOR: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "kebab-case")]
pub enum RateClass {
    /// Exact landing on the solution after this many steps.
    Finite { iterations: usize },
    Linear { ratio: f64 },
    Superlinear,
    /// `m` estimates `lim e_{n+1} / e_n^2`.
    Quadratic { m: f64 },
    Cycling { period: usize },
    Diverging,
    Inconclusive,
}

impl RateClass {
    pub fn name(&self) -> &'static str {
        match self {
            RateClass::Finite { .. } => "finite",
            RateClass::Linear { .. } => "linear",
            RateClass::Superlinear => "superlinear",
            RateClass::Quadratic { .. } => "quadratic",
            RateClass::Cycling { .. } => "cycling",
            RateClass::Diverging => "diverging",
            RateClass::Inconclusive => "inconclusive",
        }
    }

    /// The number carried by the class, if any.
    pub fn constant(&self) -> Option<f64> {
        match *self {
            RateClass::Finite { iterations } => Some(iterations as f64),
            RateClass::Linear { ratio } => Some(ratio),
            RateClass::Quadratic { m } => Some(m),
            RateClass::Cycling { period } => Some(period as f64),
            _ => None,
        }
    }
}

impl fmt::Display for RateClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            RateClass::Finite { iterations } => write!(f, "finite({iterations})"),
            RateClass::Linear { ratio } => write!(f, "linear({ratio:.4})"),
            RateClass::Quadratic { m } => write!(f, "quadratic({m:.4})"),
            RateClass::Cycling { period } => write!(f, "cycling({period})"),
            other => f.write_str(other.name()),
        }
    }
}

fn errors(trace: &Trace, solution: &Point) -> Vec<f64> {
    trace.iterates.iter().map(|x| x.dist(solution)).collect()
}

fn ratios_of(e: &[f64], order: f64) -> Vec<f64> {
    e.windows(2)
        .take_while(|w| w[0] > ERROR_FLOOR)
        .map(|w| w[1] / w[0].powf(order))
        .collect()
}

/// `e_{n+1} / e_n^order` with `e_n = |x_n - solution|`, stopping before the
/// first `e_n <= 1e-15`.
pub fn error_ratios(trace: &Trace, solution: &Point, order: f64) -> Result<Vec<f64>> {
    if trace.iterates.len() < 3 {
        return Err(Error::TooShort {
            len: trace.iterates.len(),
            needed: 3,
        });
    }
    if !(order.is_finite() && order > 0.0) {
        return Err(Error::InvalidParameter(format!("order must be positive, got {order}")));
    }
    Ok(ratios_of(&errors(trace, solution), order))
}

fn abrupt(ratio: f64, earlier: &[f64]) -> bool {
    let min = earlier.iter().copied().fold(f64::INFINITY, f64::min);
    earlier.is_empty() || ratio < ABRUPT_FACTOR * min
}

/// Index of an exact landing: the first iterate within `point_eq_eps` of the
/// solution, provided it is reached by a jump rather than the normal
/// progression of a linear or quadratic sequence.
fn finite_landing(e: &[f64], point_eq_eps: f64) -> Option<usize> {
    let k = e.iter().position(|&v| v <= point_eq_eps)?;
    if k == 0 || e[k] == 0.0 {
        return Some(k);
    }
    let head = &e[..k];
    let r1 = e[k] / e[k - 1];
    let r2 = e[k] / (e[k - 1] * e[k - 1]);
    (abrupt(r1, &ratios_of(head, 1.0)) && abrupt(r2, &ratios_of(head, 2.0))).then_some(k)
}

fn relative_spread(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = v.iter().copied().fold(f64::INFINITY, f64::min);
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    (max - min) / mean
}

fn tail(v: &[f64]) -> &[f64] {
    let len = 4.max(v.len().div_ceil(4)).min(v.len());
    &v[v.len() - len..]
}

/// Diagnose the asymptotic convergence class of a trace.
///
/// Checked in order: a cycle reported by the run; an exact landing; then on
/// the tail (the last `max(4, n/4)` ratios) linear, quadratic and
/// superlinear screens; finally the overall error trend.
pub fn classify_rate(trace: &Trace, solution: &Point) -> Result<RateClass> {
    if let StopReason::Cycle { period } = trace.stop_reason {
        return Ok(RateClass::Cycling { period });
    }
    let e = errors(trace, solution);
    if let Some(k) = finite_landing(&e, Tolerances::default().point_eq_eps) {
        return Ok(RateClass::Finite { iterations: k });
    }
    if e.len() < 4 {
        return Err(Error::TooShort { len: e.len(), needed: 4 });
    }
    let r1 = ratios_of(&e, 1.0);
    let r2 = ratios_of(&e, 2.0);
    if r1.len() < 2 {
        return Ok(RateClass::Inconclusive);
    }

    let t1 = tail(&r1);
    if t1.iter().all(|&r| r > 0.0 && r <= LINEAR_MAX_RATIO) && relative_spread(t1) < LINEAR_MAX_SPREAD {
        return Ok(RateClass::Linear { ratio: t1[t1.len() - 1] });
    }
    let t2 = tail(&r2);
    let (lo, hi) = QUADRATIC_BAND;
    if t2.iter().all(|&r| r >= lo && r <= hi) {
        let max = t2.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = t2.iter().copied().fold(f64::INFINITY, f64::min);
        if max < 10.0 * min {
            return Ok(RateClass::Quadratic { m: t2[t2.len() - 1] });
        }
    }
    if t1.windows(2).all(|w| w[1] < w[0]) && t1[t1.len() - 1] < SUPERLINEAR_LAST_RATIO {
        return Ok(RateClass::Superlinear);
    }
    Ok(if e[e.len() - 1] > e[0] {
        RateClass::Diverging
    } else {
        RateClass::Inconclusive
    })
}

/// A trace whose iterates are `(e_n, 0)`, at distance `e_n` from the origin.
pub fn synthetic_trace(method: Method, errors: &[f64]) -> Trace {
    let iterates: Vec<Point> = errors.iter().map(|&e| Point::xy(e, 0.0)).collect();
    Trace {
        method,
        residuals: errors.to_vec(),
        dist_to_solution: Some(errors.to_vec()),
        iterates,
        step_results: vec![],
        stop_reason: StopReason::ResidualMet,
        wall_time_ms: 0.0,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub method: Method,
    pub iterations: usize,
    pub final_residual: f64,
    pub rate: RateClass,
    pub stop_reason: StopReason,
    pub wall_time_ms: f64,
}

impl ComparisonRow {
    pub const HEADER: [&'static str; 6] = [
        "method",
        "iterations",
        "final_residual",
        "rate_class",
        "rate_constant",
        "wall_time_ms",
    ];

    pub fn failed(&self) -> bool {
        matches!(self.stop_reason, StopReason::Error { .. })
    }

    pub fn record(&self) -> [String; 6] {
        [
            self.method.id().to_string(),
            self.iterations.to_string(),
            format!("{:e}", self.final_residual),
            self.rate.name().to_string(),
            self.rate.constant().map(|c| c.to_string()).unwrap_or_default(),
            format!("{:.3}", self.wall_time_ms),
        ]
    }
}

/// Run each method once from the problem's default start under the same stop
/// rule. Rows are ordered by method id; a method that fails yields a row
/// whose stop reason is an error.
pub fn compare(problem: &Problem, methods: &[Method], stop: &StopRule, tol: &Tolerances) -> Result<Vec<ComparisonRow>> {
    if methods.is_empty() {
        return Err(Error::InvalidParameter("no methods to compare".into()));
    }
    stop.validate()?;
    tol.validate()?;
    let mut methods = methods.to_vec();
    methods.sort();
    methods.dedup();

    let rows = methods
        .into_iter()
        .map(|method| {
            let started = Instant::now();
            match problem.solve(method, None, stop, tol) {
                Ok(trace) => {
                    let rate = problem
                        .nearest_solution(trace.last())
                        .and_then(|s| classify_rate(&trace, s).ok())
                        .unwrap_or(RateClass::Inconclusive);
                    ComparisonRow {
                        method,
                        iterations: trace.iterations(),
                        final_residual: trace.final_residual(),
                        rate,
                        stop_reason: trace.stop_reason,
                        wall_time_ms: trace.wall_time_ms,
                    }
                }
                Err(e) => ComparisonRow {
                    method,
                    iterations: 0,
                    final_residual: f64::NAN,
                    rate: RateClass::Inconclusive,
                    stop_reason: StopReason::Error { message: e.to_string() },
                    wall_time_ms: started.elapsed().as_secs_f64() * 1e3,
                },
            }
        })
        .collect();
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::builtin;
    use proptest::prelude::*;

    fn origin() -> Point {
        Point::xy(0.0, 0.0)
    }

    fn geometric(c: f64, e0: f64, n: usize) -> Vec<f64> {
        (0..n).map(|k| e0 * c.powi(k as i32)).collect()
    }

    fn quadratic(m: f64, e0: f64, n: usize) -> Vec<f64> {
        let mut e = vec![e0];
        for _ in 1..n {
            let last = e[e.len() - 1];
            e.push(m * last * last);
        }
        e
    }

    #[test]
    fn ratio_examples() {
        let tr = synthetic_trace(Method::Dr, &geometric(0.5, 1.0, 20));
        let r = error_ratios(&tr, &origin(), 1.0).unwrap();
        assert_eq!(r.len(), 19);
        assert!(r.iter().all(|&v| v == 0.5));

        let e: Vec<f64> = (0..6).map(|n| 2f64.powf(-(2f64.powi(n)))).collect();
        let r = error_ratios(&synthetic_trace(Method::Dr, &e), &origin(), 2.0).unwrap();
        assert!(r.iter().all(|&v| (v - 1.0).abs() < 1e-12), "{r:?}");
    }

    #[test]
    fn ratios_truncate_at_the_floor() {
        let tr = synthetic_trace(Method::Dr, &[1.0, 1e-16, 1e-17, 1e-18]);
        assert_eq!(error_ratios(&tr, &origin(), 1.0).unwrap(), vec![1e-16]);
        let short = synthetic_trace(Method::Dr, &[1.0, 0.5]);
        assert_eq!(
            error_ratios(&short, &origin(), 1.0).unwrap_err(),
            Error::TooShort { len: 2, needed: 3 }
        );
    }

    #[test]
    fn parabola_ratios_approach_one_half() {
        let p = builtin("parabola").unwrap();
        // keeps the thin triangles near the root above the alignment threshold
        let tol = Tolerances {
            colinearity_eps: 1e-12,
            ..Tolerances::default()
        };
        let tr = p.solve(Method::Crm, Some(&Point::xy(3.0, 0.0)), &StopRule::default(), &tol).unwrap();
        let r = error_ratios(&tr, &origin(), 1.0).unwrap();
        assert!((r[0] - 1.0 / 6.0).abs() < 1e-12);
        assert!(r[6..].iter().all(|v| (v - 0.5).abs() < 0.01), "{r:?}");
    }

    #[test]
    fn calibration_on_exact_models() {
        let lin = classify_rate(&synthetic_trace(Method::Dr, &geometric(0.3, 1.0, 24)), &origin()).unwrap();
        let RateClass::Linear { ratio } = lin else { panic!("{lin:?}") };
        assert!((ratio - 0.3).abs() < 0.03);

        let quad = classify_rate(&synthetic_trace(Method::Dr, &quadratic(2.0, 0.1, 6)), &origin()).unwrap();
        let RateClass::Quadratic { m } = quad else { panic!("{quad:?}") };
        assert!((m - 2.0).abs() < 0.2);
    }

    #[test]
    fn finite_and_cycling() {
        let tr = synthetic_trace(Method::Crm, &[0.25, 0.0]);
        assert_eq!(classify_rate(&tr, &origin()).unwrap(), RateClass::Finite { iterations: 1 });
        let tr = synthetic_trace(Method::Crm, &[0.0]);
        assert_eq!(classify_rate(&tr, &origin()).unwrap(), RateClass::Finite { iterations: 0 });
        let mut tr = synthetic_trace(Method::Newton, &[0.25, 0.25, 0.25]);
        tr.stop_reason = StopReason::Cycle { period: 2 };
        assert_eq!(classify_rate(&tr, &origin()).unwrap(), RateClass::Cycling { period: 2 });
        let tr = synthetic_trace(Method::Crm, &[0.3, 0.2, 0.1]);
        assert!(matches!(classify_rate(&tr, &origin()), Err(Error::TooShort { .. })));
    }

    #[test]
    fn gradual_landing_is_not_finite() {
        // a quadratic sequence that dips under the equality threshold
        let e = [0.5, 0.005, 5e-7, 5e-15];
        let c = classify_rate(&synthetic_trace(Method::Crm, &e), &origin()).unwrap();
        assert!(matches!(c, RateClass::Quadratic { .. }), "{c:?}");
    }

    #[test]
    fn superlinear_and_diverging() {
        let mut e = vec![1.0];
        for k in 1..10 {
            let last: f64 = e[e.len() - 1];
            e.push(last / (k as f64 + 1.0).powi(2));
        }
        let c = classify_rate(&synthetic_trace(Method::Crm, &e), &origin()).unwrap();
        assert_eq!(c, RateClass::Superlinear);

        let c = classify_rate(&synthetic_trace(Method::Dr, &[1.0, 2.0, 1.5, 4.0, 3.0]), &origin()).unwrap();
        assert_eq!(c, RateClass::Diverging);
    }

    #[test]
    fn compare_orders_rows_by_method() {
        let p = builtin("sphere-line").unwrap();
        let rows = compare(&p, &[Method::Newton, Method::Dr, Method::Crm, Method::Dr], &StopRule::default(), &Tolerances::default())
            .unwrap();
        let ids: Vec<&str> = rows.iter().map(|r| r.method.id()).collect();
        assert_eq!(ids, ["crm", "dr", "newton"]);
        assert!(rows[0].iterations < rows[1].iterations);
        assert!(rows.iter().all(|r| !r.failed()));
    }

    #[test]
    fn compare_reports_failures_as_rows() {
        let p = builtin("signed-sqrt").unwrap();
        let rows = compare(&p, &[Method::Newton], &StopRule::default(), &Tolerances::default()).unwrap();
        assert!(matches!(rows[0].rate, RateClass::Cycling { period: 2 }));

        let psphere = builtin("psphere-3").unwrap();
        let rows = compare(&psphere, &[Method::Subgrad, Method::Crm], &StopRule::default(), &Tolerances::default()).unwrap();
        assert_eq!(rows.len(), 2);
        assert!(compare(&p, &[], &StopRule::default(), &Tolerances::default()).is_err());
    }

    proptest! {
        #[test]
        fn linear_models_are_recovered(c in 0.05..0.85f64, scale in 1e-3..1e3f64) {
            let e = geometric(c, scale, 30);
            let got = classify_rate(&synthetic_trace(Method::Dr, &e), &origin()).unwrap();
            let RateClass::Linear { ratio } = got else { return Err(TestCaseError::fail(format!("{got:?}"))) };
            prop_assert!((ratio - c).abs() <= 0.1 * c);
        }

        #[test]
        fn quadratic_models_are_recovered(m in 0.05..20.0f64, lambda in 0.2..5.0f64) {
            // start where the model contracts: m * e0 <= 0.1
            let e: Vec<f64> = quadratic(m, 0.1 / m, 6).into_iter().map(|v| v * lambda).collect();
            let got = classify_rate(&synthetic_trace(Method::Dr, &e), &origin()).unwrap();
            let RateClass::Quadratic { m: est } = got else { return Err(TestCaseError::fail(format!("{got:?}"))) };
            prop_assert!((est - m / lambda).abs() <= 0.1 * m / lambda);
        }

        #[test]
        fn verdicts_survive_rescaling(c in 0.05..0.85f64, lambda in 1e-2..1e2f64) {
            let e = geometric(c, 1.0, 25);
            let scaled: Vec<f64> = e.iter().map(|v| v * lambda).collect();
            let a = classify_rate(&synthetic_trace(Method::Dr, &e), &origin()).unwrap();
            let b = classify_rate(&synthetic_trace(Method::Dr, &scaled), &origin()).unwrap();
            prop_assert_eq!(a.name(), b.name());
        }
    }
}
