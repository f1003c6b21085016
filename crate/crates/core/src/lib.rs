//! Projection and circumcentering methods for two-set feasibility problems in
//! which one set is a hyperplane and the other a plane curve.
//!
//! The crate provides the circumcenter kernel, projection selectors for
//! hyperplanes, spheres and function graphs, the Douglas–Rachford and
//! circumcentered reflection operators with their run loop, a catalog of
//! model problems, and convergence-rate diagnostics for solver traces.

pub mod analysis;
pub mod error;
pub mod geometry;
pub mod problems;
pub mod solvers;

pub mod sets;

pub use error::{Error, Result};
pub use geometry::{circumcenter, classify_triple, ColinearityCase, Point, Tolerances};
pub use sets::{Curve, Domain, FeasibleSet, FunctionGraph, Hyperplane, Sphere};
pub use solvers::{Method, StepResult, StopReason, StopRule, Trace};

