//! Gradient flows of semiconvex potentials on finite metric measure spaces.
//!
//! The crate builds discrete geodesic-like spaces ([`space`]), computes
//! quadratic optimal transport ([`transport`]), evaluates entropy and
//! potential functionals ([`functionals`]), generates proximal-point and JKO
//! minimizing-movement flows ([`flow`]), and measures how far generated
//! flows are from satisfying the evolution variational inequality and its
//! consequences ([`verify`]).

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

pub mod error;
pub mod flow;
pub mod functionals;
pub mod io;
pub mod space;
pub mod transport;
pub mod verify;

pub use error::{Error, Result};
pub use flow::{
    extract_dirac_trajectory, jko_step, proximal_point_step, pushforward_flow,
    run_measure_flow, run_point_flow, run_regularized_family, FlowParams, FlowTrajectory,
    Functional, MeasureTrajectory,
};
pub use functionals::{
    entropy, kappa_convexity_report, potential_energy, regularized_energy, ConvexityReport,
    Potential,
};
pub use space::{
    build_circle_space, build_graph_space, build_interval_space, intermediate_point,
    validate_metric, GeodesicSample, MetricMeasureSpace,
};
pub use transport::{
    variance2, w2_entropic, w2_exact, Coupling, ProbabilityMeasure, TransportResult,
};
