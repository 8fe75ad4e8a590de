//! Active measurement loop: pick a path, probe it at its posterior median,
//! fold the outcome into the factor graph, rerun belief propagation and check
//! the stopping criteria.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use log::{debug, warn};
use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{DomainError, EstimatorConfig, Measurement, PathEstimate, PathId, Pmf, Topology};
use crate::inference::{BpSchedule, FactorGraph};
use crate::likelihood::LikelihoodModel;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LearnerError {
    #[error("every path already satisfies the stopping criteria")]
    AllSatisfied,
    #[error("unknown path {0}")]
    UnknownPath(PathId),
    #[error(transparent)]
    Config(#[from] DomainError),
    #[error("unknown selection policy `{0}` (expected RR, SEQ, WE or WCI)")]
    UnknownPolicy(String),
}

/// Failure reported by a measurement provider.
#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[error("{0}")]
pub struct MeasureError(pub String);

/// Source of rate difference test outcomes.
pub trait Measurer {
    fn measure(&mut self, path: PathId, rate: u32) -> Result<bool, MeasureError>;
}

impl<F> Measurer for F
where
    F: FnMut(PathId, u32) -> Result<bool, MeasureError>,
{
    fn measure(&mut self, path: PathId, rate: u32) -> Result<bool, MeasureError> {
        self(path, rate)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PolicyKind {
    /// Round robin over every path that has not been abandoned, satisfied or
    /// not.
    #[serde(rename = "RR")]
    RoundRobin,
    /// One path at a time, without sharing information between paths.
    #[serde(rename = "SEQ")]
    Sequential,
    /// Sampling proportional to posterior entropy.
    #[serde(rename = "WE")]
    WeightedEntropy,
    /// Sampling proportional to credible interval width.
    #[serde(rename = "WCI")]
    WeightedInterval,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 4] = [
        PolicyKind::RoundRobin,
        PolicyKind::Sequential,
        PolicyKind::WeightedEntropy,
        PolicyKind::WeightedInterval,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            PolicyKind::RoundRobin => "RR",
            PolicyKind::Sequential => "SEQ",
            PolicyKind::WeightedEntropy => "WE",
            PolicyKind::WeightedInterval => "WCI",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PolicyKind {
    type Err = LearnerError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "RR" => Ok(PolicyKind::RoundRobin),
            "SEQ" => Ok(PolicyKind::Sequential),
            "WE" => Ok(PolicyKind::WeightedEntropy),
            "WCI" => Ok(PolicyKind::WeightedInterval),
            _ => Err(LearnerError::UnknownPolicy(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionPolicy {
    pub kind: PolicyKind,
    pub rng_seed: u64,
}

impl SelectionPolicy {
    pub fn new(kind: PolicyKind, rng_seed: u64) -> Self {
        Self { kind, rng_seed }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SessionOptions {
    pub schedule: BpSchedule,
    /// Keep per-iteration interval snapshots in the report.
    pub record_snapshots: bool,
    /// Consecutive skipped iterations after which a path is given up on.
    pub max_path_failures: u32,
}

impl Default for SessionOptions {
    fn default() -> Self {
        Self {
            schedule: BpSchedule::default(),
            record_snapshots: true,
            max_path_failures: 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// Every path met both stopping criteria.
    CriteriaMet,
    /// The measurement budget ran out.
    Budget,
    /// Every remaining unsatisfied path was abandoned after repeated failures.
    PathsFailed,
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Termination::CriteriaMet => "criteria_met",
            Termination::Budget => "budget",
            Termination::PathsFailed => "paths_failed",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub k: usize,
    pub path: PathId,
    pub rate: u32,
    pub z: bool,
    pub bp_iterations: usize,
    /// `[lb, ub]` for every path after this measurement.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub bounds: Option<Vec<[u32; 2]>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub path: PathId,
    pub rate: u32,
    pub error: String,
    pub attempts: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedEstimate {
    pub name: String,
    #[serde(flatten)]
    pub estimate: PathEstimate,
    pub failed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionReport {
    pub config: EstimatorConfig,
    pub model: LikelihoodModel,
    pub policy: SelectionPolicy,
    pub seed: u64,
    pub termination: Termination,
    pub measurements: usize,
    pub estimates: Vec<NamedEstimate>,
    pub iterations: Vec<IterationRecord>,
    pub failures: Vec<FailureRecord>,
    /// Belief propagation runs that hit the iteration cap.
    pub bp_nonconverged: usize,
}

impl SessionReport {
    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(self)
    }

    /// Per-path summary: `path,lb,ub,width,mass,satisfied,failed,measurements`.
    pub fn write_summary_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "path,lb,ub,width,mass,satisfied,failed,measurements")?;
        for e in &self.estimates {
            let count = self.iterations.iter().filter(|r| r.path == e.estimate.path).count();
            writeln!(
                out,
                "{},{},{},{},{:.6},{},{},{}",
                e.name,
                e.estimate.lb,
                e.estimate.ub,
                e.estimate.width,
                e.estimate.mass_in_interval,
                e.estimate.satisfied,
                e.failed,
                count
            )?;
        }
        Ok(())
    }
}

/// State of one estimation session.
#[derive(Debug, Clone)]
pub struct Session {
    path_names: Vec<String>,
    graph: FactorGraph,
    config: EstimatorConfig,
    model: LikelihoodModel,
    policy: SelectionPolicy,
    options: SessionOptions,
    rng: ChaCha8Rng,
    history: Vec<Measurement>,
    marginals: Vec<Pmf>,
    estimates: Vec<PathEstimate>,
    records: Vec<IterationRecord>,
    failures: Vec<FailureRecord>,
    failed: Vec<bool>,
    consecutive_failures: Vec<u32>,
    last_round_robin: Option<usize>,
    bp_nonconverged: usize,
}

impl Session {
    /// Creates the factor graph with uniform link priors and computes the
    /// initial estimates.
    ///
    /// Under [`PolicyKind::Sequential`] every path gets private copies of its
    /// links so no information flows between paths.
    pub fn new(
        topology: &Topology,
        config: EstimatorConfig,
        model: LikelihoodModel,
        policy: SelectionPolicy,
        options: SessionOptions,
    ) -> Result<Self, LearnerError> {
        config.validate()?;
        let prior = Pmf::uniform(config.domain);
        let graph = if policy.kind == PolicyKind::Sequential {
            FactorGraph::build(&topology.decoupled(), &prior)
        } else {
            FactorGraph::build(topology, &prior)
        };
        let m = topology.num_paths();
        let mut session = Self {
            path_names: topology.path_names().to_vec(),
            graph,
            config,
            model,
            policy,
            options,
            rng: ChaCha8Rng::seed_from_u64(policy.rng_seed),
            history: Vec::new(),
            marginals: Vec::new(),
            estimates: Vec::new(),
            records: Vec::new(),
            failures: Vec::new(),
            failed: vec![false; m],
            consecutive_failures: vec![0; m],
            last_round_robin: None,
            bp_nonconverged: 0,
        };
        session.refresh();
        Ok(session)
    }

    pub fn estimates(&self) -> &[PathEstimate] {
        &self.estimates
    }

    pub fn history(&self) -> &[Measurement] {
        &self.history
    }

    pub fn marginal(&self, p: PathId) -> Option<&Pmf> {
        self.marginals.get(p.0)
    }

    pub fn graph(&self) -> &FactorGraph {
        &self.graph
    }

    pub fn config(&self) -> &EstimatorConfig {
        &self.config
    }

    pub fn mark_failed(&mut self, p: PathId) -> Result<(), LearnerError> {
        *self.failed.get_mut(p.0).ok_or(LearnerError::UnknownPath(p))? = true;
        Ok(())
    }

    /// Runs belief propagation and recomputes every path estimate.
    fn refresh(&mut self) -> usize {
        let out = self.graph.run_bp(&self.options.schedule);
        if !out.converged {
            self.bp_nonconverged += 1;
            debug!("belief propagation stopped after {} iterations without converging", out.iterations);
        }
        self.marginals = out.marginals.paths;
        self.update_estimates();
        out.iterations
    }

    /// Recomputes per-path credible intervals from the current marginals.
    pub fn update_estimates(&mut self) -> &[PathEstimate] {
        self.estimates = self
            .marginals
            .iter()
            .enumerate()
            .map(|(p, pmf)| PathEstimate::from_marginal(PathId(p), pmf, &self.config))
            .collect();
        &self.estimates
    }

    fn candidates(&self) -> Vec<usize> {
        (0..self.estimates.len())
            .filter(|&p| !self.estimates[p].satisfied && !self.failed[p])
            .collect()
    }

    pub fn all_satisfied(&self) -> bool {
        self.estimates.iter().all(|e| e.satisfied)
    }

    /// Probing probability of every path under a weighted policy; zero for
    /// satisfied or abandoned paths. Round robin is reported as uniform over
    /// the paths it rotates through.
    pub fn probe_weights(&self) -> Vec<f64> {
        let candidates = match self.policy.kind {
            PolicyKind::RoundRobin => (0..self.estimates.len()).filter(|&p| !self.failed[p]).collect(),
            _ => self.candidates(),
        };
        let mut w = vec![0.0; self.estimates.len()];
        for &p in &candidates {
            w[p] = match self.policy.kind {
                PolicyKind::WeightedEntropy => self.marginals[p].entropy(),
                PolicyKind::WeightedInterval => f64::from(self.estimates[p].width),
                PolicyKind::RoundRobin | PolicyKind::Sequential => 1.0,
            };
        }
        let total: f64 = w.iter().sum();
        if total > 0.0 {
            w.iter_mut().for_each(|x| *x /= total);
        } else if !candidates.is_empty() {
            let u = 1.0 / candidates.len() as f64;
            candidates.iter().for_each(|&p| w[p] = u);
        }
        w
    }

    pub fn select_path(&mut self) -> Result<PathId, LearnerError> {
        let candidates = self.candidates();
        if candidates.is_empty() {
            return Err(LearnerError::AllSatisfied);
        }
        let chosen = match self.policy.kind {
            PolicyKind::Sequential => candidates[0],
            PolicyKind::RoundRobin => {
                // non-adaptive: satisfied paths stay in the rotation
                let candidates: Vec<usize> = (0..self.estimates.len()).filter(|&p| !self.failed[p]).collect();
                let next = self
                    .last_round_robin
                    .and_then(|last| candidates.iter().copied().find(|&p| p > last))
                    .unwrap_or(candidates[0]);
                self.last_round_robin = Some(next);
                next
            }
            PolicyKind::WeightedEntropy | PolicyKind::WeightedInterval => {
                let w = self.probe_weights();
                WeightedIndex::new(&w)
                    .expect("at least one candidate carries weight")
                    .sample(&mut self.rng)
            }
        };
        Ok(PathId(chosen))
    }

    /// Posterior median of the path's current marginal.
    pub fn select_rate(&self, p: PathId) -> Result<u32, LearnerError> {
        self.marginals
            .get(p.0)
            .map(Pmf::median)
            .ok_or(LearnerError::UnknownPath(p))
    }

    /// Folds an externally obtained outcome into the session.
    pub fn record(&mut self, path: PathId, rate: u32, outcome: bool) -> Result<(), LearnerError> {
        let m = Measurement {
            path,
            rate,
            outcome,
            seq: self.history.len(),
        };
        self.graph.add_evidence(&m, &self.model).map_err(|e| match e {
            crate::inference::InferenceError::RateOutOfDomain(rate) => {
                LearnerError::Config(DomainError::RateOutOfDomain { rate })
            }
            _ => LearnerError::UnknownPath(path),
        })?;
        self.history.push(m);
        let bp_iterations = self.refresh();
        let bounds = self
            .options
            .record_snapshots
            .then(|| self.estimates.iter().map(|e| [e.lb, e.ub]).collect());
        self.records.push(IterationRecord {
            k: m.seq,
            path,
            rate,
            z: outcome,
            bp_iterations,
            bounds,
        });
        Ok(())
    }

    fn termination(&self) -> Option<Termination> {
        if self.all_satisfied() {
            Some(Termination::CriteriaMet)
        } else if self.history.len() >= self.config.max_measurements {
            Some(Termination::Budget)
        } else if self.candidates().is_empty() {
            Some(Termination::PathsFailed)
        } else {
            None
        }
    }

    /// Runs the loop until the criteria hold, the budget is spent, or no
    /// probeable path remains.
    pub fn run<M: Measurer + ?Sized>(mut self, measurer: &mut M) -> SessionReport {
        let termination = loop {
            if let Some(t) = self.termination() {
                break t;
            }
            let path = self.select_path().expect("termination checked above");
            let rate = self.select_rate(path).expect("selected path exists");
            let outcome = measurer.measure(path, rate).or_else(|first| {
                warn!("measurement of {} at {rate} Mbps failed: {first}; retrying", self.path_names[path.0]);
                measurer.measure(path, rate)
            });
            match outcome {
                Ok(z) => {
                    self.consecutive_failures[path.0] = 0;
                    self.record(path, rate, z).expect("selected path and rate are valid");
                }
                Err(err) => {
                    warn!("skipping {} at {rate} Mbps: {err}", self.path_names[path.0]);
                    self.failures.push(FailureRecord {
                        path,
                        rate,
                        error: err.0,
                        attempts: 2,
                    });
                    self.consecutive_failures[path.0] += 1;
                    if self.consecutive_failures[path.0] >= self.options.max_path_failures {
                        self.failed[path.0] = true;
                    }
                }
            }
        };
        self.into_report(termination)
    }

    fn into_report(self, termination: Termination) -> SessionReport {
        SessionReport {
            config: self.config,
            model: self.model,
            policy: self.policy,
            seed: self.policy.rng_seed,
            termination,
            measurements: self.history.len(),
            estimates: self
                .estimates
                .iter()
                .zip(&self.path_names)
                .zip(&self.failed)
                .map(|((e, name), &failed)| NamedEstimate {
                    name: name.clone(),
                    estimate: *e,
                    failed,
                })
                .collect(),
            iterations: self.records,
            failures: self.failures,
            bp_nonconverged: self.bp_nonconverged,
        }
    }
}

/// Runs a complete estimation session against `measurer`.
pub fn run_session<M: Measurer + ?Sized>(
    topology: &Topology,
    config: EstimatorConfig,
    model: LikelihoodModel,
    policy: SelectionPolicy,
    options: SessionOptions,
    measurer: &mut M,
) -> Result<SessionReport, LearnerError> {
    Ok(Session::new(topology, config, model, policy, options)?.run(measurer))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{reduce_to_logical, BandwidthDomain, RawPath};

    fn three_paths() -> Topology {
        reduce_to_logical(&[
            RawPath::new("a", ["x"]),
            RawPath::new("b", ["y"]),
            RawPath::new("c", ["z"]),
        ])
        .unwrap()
    }

    fn session(kind: PolicyKind, topology: &Topology) -> Session {
        Session::new(
            topology,
            EstimatorConfig::default(),
            LikelihoodModel::default(),
            SelectionPolicy::new(kind, 7),
            SessionOptions::default(),
        )
        .unwrap()
    }

    fn set_marginal(s: &mut Session, p: usize, pmf: Pmf) {
        s.marginals[p] = pmf;
        s.update_estimates();
    }

    fn window(lo: u32, hi: u32) -> Pmf {
        let d = BandwidthDomain::default();
        Pmf::from_weights(d, d.rates().map(|r| if (lo..=hi).contains(&r) { 1.0 } else { 0.0 }).collect())
            .unwrap()
    }

    #[test]
    fn round_robin_cycles() {
        let t = three_paths();
        let mut s = session(PolicyKind::RoundRobin, &t);
        let picks: Vec<usize> = (0..6).map(|_| s.select_path().unwrap().0).collect();
        assert_eq!(picks, [0, 1, 2, 0, 1, 2]);
    }

    #[test]
    fn round_robin_keeps_satisfied_paths() {
        let t = three_paths();
        let mut s = session(PolicyKind::RoundRobin, &t);
        set_marginal(&mut s, 1, Pmf::point(BandwidthDomain::default(), 40).unwrap());
        let picks: Vec<usize> = (0..4).map(|_| s.select_path().unwrap().0).collect();
        assert_eq!(picks, [0, 1, 2, 0]);
        s.mark_failed(PathId(2)).unwrap();
        let picks: Vec<usize> = (0..3).map(|_| s.select_path().unwrap().0).collect();
        assert_eq!(picks, [1, 0, 1]);
    }

    #[test]
    fn sequential_sticks_to_lowest() {
        let t = three_paths();
        let mut s = session(PolicyKind::Sequential, &t);
        assert_eq!(s.select_path().unwrap(), PathId(0));
        assert_eq!(s.select_path().unwrap(), PathId(0));
        set_marginal(&mut s, 0, Pmf::point(BandwidthDomain::default(), 40).unwrap());
        assert_eq!(s.select_path().unwrap(), PathId(1));
    }

    #[test]
    fn interval_weights() {
        let t = three_paths();
        let mut s = session(PolicyKind::WeightedInterval, &t);
        // uniform windows of 21, 31 and 6 points have 95% widths 20, 30, 5
        set_marginal(&mut s, 0, window(10, 30));
        set_marginal(&mut s, 1, window(40, 70));
        set_marginal(&mut s, 2, window(80, 85));
        let widths: Vec<u32> = s.estimates().iter().map(|e| e.width).collect();
        assert_eq!(widths, [19, 29, 5]);
        let w = s.probe_weights();
        assert!((w[0] - 19.0 / 48.0).abs() < 1e-12);
        assert!((w[1] - 29.0 / 48.0).abs() < 1e-12);
        assert_eq!(w[2], 0.0);
    }

    #[test]
    fn interval_weight_normalization_example() {
        // widths {20, 30, 5} with beta = 10
        let weights = [20.0f64, 30.0, 0.0];
        let total: f64 = weights.iter().sum();
        assert_eq!(weights.map(|w| w / total), [0.4, 0.6, 0.0]);
    }

    #[test]
    fn entropy_weights_zero_for_point_mass() {
        let t = three_paths();
        let mut s = session(PolicyKind::WeightedEntropy, &t);
        set_marginal(&mut s, 0, Pmf::point(BandwidthDomain::default(), 40).unwrap());
        assert_eq!(s.marginals[0].entropy(), 0.0);
        let w = s.probe_weights();
        assert_eq!(w[0], 0.0);
        assert!((w[1] - 0.5).abs() < 1e-12);
        for _ in 0..200 {
            assert_ne!(s.select_path().unwrap(), PathId(0));
        }
    }

    #[test]
    fn weighted_sampling_follows_weights() {
        let t = three_paths();
        let mut s = session(PolicyKind::WeightedInterval, &t);
        set_marginal(&mut s, 0, window(10, 30));
        set_marginal(&mut s, 1, window(40, 70));
        set_marginal(&mut s, 2, window(80, 85));
        let mut counts = [0usize; 3];
        let n = 20_000;
        for _ in 0..n {
            counts[s.select_path().unwrap().0] += 1;
        }
        assert_eq!(counts[2], 0);
        let freq = counts[0] as f64 / n as f64;
        let p = 19.0 / 48.0;
        let sigma = (p * (1.0 - p) / n as f64).sqrt();
        assert!((freq - p).abs() < 4.0 * sigma, "{freq}");
    }

    #[test]
    fn all_satisfied_is_an_error() {
        let t = three_paths();
        let mut s = session(PolicyKind::WeightedInterval, &t);
        for p in 0..3 {
            set_marginal(&mut s, p, Pmf::point(BandwidthDomain::default(), 40).unwrap());
        }
        assert_eq!(s.select_path(), Err(LearnerError::AllSatisfied));
    }

    #[test]
    fn rate_selection() {
        let t = three_paths();
        let mut s = session(PolicyKind::WeightedInterval, &t);
        assert_eq!(s.select_rate(PathId(0)).unwrap(), 50);
        assert_eq!(s.select_rate(PathId(5)), Err(LearnerError::UnknownPath(PathId(5))));
        s.model = LikelihoodModel::new(10.0, 0.05).unwrap();
        s.record(PathId(0), 50, false).unwrap();
        assert!(s.select_rate(PathId(0)).unwrap() < 50);
        set_marginal(&mut s, 1, Pmf::point(BandwidthDomain::default(), 42).unwrap());
        assert_eq!(s.select_rate(PathId(1)).unwrap(), 42);
    }

    #[test]
    fn budget_of_one() {
        let t = three_paths();
        let config = EstimatorConfig { max_measurements: 1, ..Default::default() };
        let mut oracle = |_: PathId, _: u32| Ok(true);
        let report = run_session(
            &t,
            config,
            LikelihoodModel::default(),
            SelectionPolicy::new(PolicyKind::RoundRobin, 1),
            SessionOptions::default(),
            &mut oracle,
        )
        .unwrap();
        assert_eq!(report.measurements, 1);
        assert_eq!(report.termination, Termination::Budget);
        assert_eq!(report.iterations.len(), 1);
    }

    #[test]
    fn failing_path_is_abandoned() {
        let t = three_paths();
        let mut calls = 0;
        let mut oracle = |p: PathId, r: u32| {
            calls += 1;
            if p.0 == 1 {
                Err(MeasureError("unreachable".into()))
            } else {
                Ok(r <= 40)
            }
        };
        let report = run_session(
            &t,
            EstimatorConfig { max_measurements: 500, ..Default::default() },
            LikelihoodModel::new(10.0, 0.05).unwrap(),
            SelectionPolicy::new(PolicyKind::RoundRobin, 1),
            SessionOptions::default(),
            &mut oracle,
        )
        .unwrap();
        assert_eq!(report.termination, Termination::PathsFailed);
        assert!(report.estimates[1].failed);
        assert!(report.estimates[0].estimate.satisfied && report.estimates[2].estimate.satisfied);
        // each skipped iteration retries once
        assert!(report.failures.iter().all(|f| f.attempts == 2 && f.path == PathId(1)));
        assert_eq!(report.failures.len(), 3);
        assert_eq!(report.measurements, report.iterations.len());
        assert_eq!(calls, report.measurements + 6);
    }

    #[test]
    fn report_json_and_csv() {
        let t = three_paths();
        let mut oracle = |_: PathId, r: u32| Ok(r <= 60);
        let report = run_session(
            &t,
            EstimatorConfig { max_measurements: 5, ..Default::default() },
            LikelihoodModel::default(),
            SelectionPolicy::new(PolicyKind::WeightedInterval, 3),
            SessionOptions::default(),
            &mut oracle,
        )
        .unwrap();
        let json = report.to_json().unwrap();
        let back: SessionReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, report);
        assert!(json.contains("\"kind\": \"WCI\""));
        let mut csv = Vec::new();
        report.write_summary_csv(&mut csv).unwrap();
        assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 4);
    }

    #[test]
    fn policy_names_parse() {
        for kind in PolicyKind::ALL {
            assert_eq!(kind.as_str().parse::<PolicyKind>().unwrap(), kind);
        }
        assert!("XYZ".parse::<PolicyKind>().is_err());
    }
}
