//! Probabilistic available bandwidth estimation over many network paths.
//!
//! Binary packet-train outcomes are fused in a factor graph whose path
//! variables are the minimum of their link variables; loopy belief
//! propagation yields per-path posteriors, and an active learner picks which
//! path and rate to probe next until every path's credible interval is tight
//! enough.

pub mod domain;
pub mod inference;
pub mod learner;
pub mod likelihood;
pub mod simkit;

pub use domain::{
    BandwidthDomain, CredibleInterval, EstimatorConfig, LinkId, Measurement, PathEstimate, PathId,
    Pmf, RawPath, Topology,
};
pub use inference::{BpOutcome, BpSchedule, FactorGraph, Marginals};
pub use learner::{
    run_session, MeasureError, Measurer, PolicyKind, SelectionPolicy, Session, SessionOptions,
    SessionReport, Termination,
};
pub use likelihood::{LikelihoodModel, TrainingSample};
