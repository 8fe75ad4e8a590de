//! Value types shared by every other module: the rate grid, probability mass
//! functions over it, topologies, measurements, configuration and per-path
//! estimates.

mod pmf;
mod topology;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use pmf::{
    posterior_median, shortest_credible_interval, BandwidthDomain, CredibleInterval, Pmf,
    PMF_FLOOR,
};
pub(crate) use pmf::MASS_TOLERANCE;
pub use topology::{
    load_topology, parse_topology_file, reduce_to_logical, Link, LinkId, PathId, RawPath,
    Topology,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DomainError {
    #[error("invalid rate domain [{b_min}, {b_max}]: need 1 <= b_min < b_max")]
    InvalidDomain { b_min: u32, b_max: u32 },
    #[error("rate {rate} lies outside the domain")]
    RateOutOfDomain { rate: u32 },
    #[error("expected {expected} weights, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("weights must be finite, non-negative and not all zero")]
    InvalidWeights,
    #[error("topology has no paths")]
    EmptyTopology,
    #[error("path `{0}` has no links")]
    EmptyPath(String),
    #[error("path `{0}` declared twice")]
    DuplicatePath(String),
    #[error("path `{path}` traverses link `{link}` more than once")]
    DuplicateLink { path: String, link: String },
    #[error("unknown link `{0}`")]
    UnknownLink(String),
    #[error("link `{0}` is not traversed by any path")]
    UnusedLink(String),
    #[error("topology line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

/// One probe outcome: path, probing rate and the binary rate difference test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Measurement {
    pub path: PathId,
    pub rate: u32,
    pub outcome: bool,
    pub seq: usize,
}

/// Estimator parameters and stopping criteria.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    /// Rate tolerance of the difference test, Mbps.
    pub epsilon: f64,
    /// Failure probability.
    pub delta: f64,
    /// Required credible mass per path.
    pub eta: f64,
    /// Maximum credible interval width per path, Mbps.
    pub beta: f64,
    pub max_measurements: usize,
    pub domain: BandwidthDomain,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            epsilon: 5.0,
            delta: 0.5,
            eta: 0.95,
            beta: 10.0,
            max_measurements: 10_000,
            domain: BandwidthDomain::default(),
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<(), DomainError> {
        let span = f64::from(self.domain.b_max() - self.domain.b_min());
        let fail = |m: String| Err(DomainError::InvalidConfig(m));
        if self.epsilon.is_nan() || self.epsilon < 0.0 {
            return fail(format!("epsilon must be >= 0, got {}", self.epsilon));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return fail(format!("delta must lie in (0, 1), got {}", self.delta));
        }
        if !(self.eta > 0.5 && self.eta < 1.0) {
            return fail(format!("eta must lie in (0.5, 1), got {}", self.eta));
        }
        if !(self.beta > 0.0 && self.beta < span) {
            return fail(format!("beta must lie in (0, {span}), got {}", self.beta));
        }
        if self.max_measurements < 1 {
            return fail("max_measurements must be >= 1".into());
        }
        Ok(())
    }
}

/// Posterior summary for one path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathEstimate {
    pub path: PathId,
    pub lb: u32,
    pub ub: u32,
    pub mass_in_interval: f64,
    pub width: u32,
    pub satisfied: bool,
}

impl PathEstimate {
    /// Summarizes a path marginal against the stopping criteria in `config`.
    pub fn from_marginal(path: PathId, pmf: &Pmf, config: &EstimatorConfig) -> Self {
        let ci = shortest_credible_interval(pmf, config.eta);
        let width = ci.width();
        Self {
            path,
            lb: ci.lb,
            ub: ci.ub,
            mass_in_interval: ci.mass,
            width,
            satisfied: ci.mass + MASS_TOLERANCE >= config.eta && f64::from(width) <= config.beta,
        }
    }

    pub fn contains(&self, rate: u32) -> bool {
        (self.lb..=self.ub).contains(&rate)
    }
}
