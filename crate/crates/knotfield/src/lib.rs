//! Electrostatics of charged knots.
//!
//! A closed curve `K` carrying uniform line charge produces the potential
//!
//! ```text
//! phi(x) = integral over [0, 2*pi] of |r'(t)| / |x - r(t)| dt
//! ```
//!
//! which is smooth, positive, and harmonic away from the curve. This crate
//! evaluates `phi`, its gradient and Hessian by adaptive periodic quadrature,
//! locates and Morse-classifies the finite critical points, traces the
//! one-dimensional stable/unstable separatrices of the gradient flow, and
//! assembles the counts into Euler/index identities and the tunnel-number
//! lower bound `cp >= 2*t + 2`.
//!
//! Modules mirror the pipeline:
//! - [`knot`]: curve kinds (torus, Fourier, sampled spline) and geometry.
//! - [`field`]: potential / gradient / Hessian quadrature.
//! - [`critical`]: grid-seeded damped Newton search and classification.
//! - [`flow`]: separatrix tracing and descending-flow census.
//! - [`morse`]: report assembly, tunnel catalog, bound verdicts.
//! - [`oracle`]: slow independent reference implementations for validation.
//! - [`formats`]: file schemas (knot definition JSON, scan/flow/report exports).

pub mod critical;
pub mod eig3;
pub mod field;
pub mod flow;
pub mod formats;
pub mod knot;
pub mod morse;
pub mod oracle;
pub mod pipeline;
mod quadrature;

pub use critical::{find_critical_points, CriticalPoint, ScanOutcome, SearchConfig};
pub use field::{field_sample, gradient, hessian, potential, FieldError, FieldSample, QuadratureConfig};
pub use flow::{
    build_tunneling, descending_flow_census, integrate_flow, trace_stable, trace_unstable,
    CensusStats, FlowArc, FlowConfig, FlowError, SeparatrixPair, Termination, TimeDirection,
    TunnelingBundle,
};
pub use knot::{Aabb, KnotCurve, KnotError, TubeSpec};
pub use morse::{assemble_report, catalog_lookup, verify_bound, BoundVerdict, MorseError, MorseReport};
pub use pipeline::{run_report, PipelineConfig, PipelineError, ReportBundle};

/// 3-vector used for points, velocities, gradients.
pub type Vec3 = nalgebra::Vector3<f64>;
/// Symmetric 3x3 matrices (Hessians).
pub type Mat3 = nalgebra::Matrix3<f64>;
