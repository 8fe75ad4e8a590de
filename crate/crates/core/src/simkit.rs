//! Simulation harness: random topologies, planted link bandwidths, an oracle
//! that draws outcomes from the likelihood model, and multi-policy
//! experiments over many seeded trials.

use std::collections::{HashSet, VecDeque};
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{
    load_topology, reduce_to_logical, BandwidthDomain, DomainError, EstimatorConfig, LinkId,
    PathId, RawPath, Topology,
};
use crate::learner::{
    LearnerError, MeasureError, Measurer, PolicyKind, SelectionPolicy, Session, SessionOptions,
    Termination,
};
use crate::likelihood::{LikelihoodError, LikelihoodModel};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("infeasible topology parameters: {0}")]
    InfeasibleParams(String),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Learner(#[from] LearnerError),
    #[error(transparent)]
    Likelihood(#[from] LikelihoodError),
    #[error("experiment spec: {0}")]
    Spec(String),
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

/// Parameters of the random topology generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorParams {
    pub nodes: usize,
    /// Links added on top of the spanning tree.
    pub extra_links: usize,
    pub paths: usize,
}

/// The six-node topology with two sources, one shared core link and two
/// destinations: five links and four paths.
pub fn dumbbell() -> Topology {
    reduce_to_logical(&dumbbell_raw()).expect("fixture is valid")
}

fn dumbbell_raw() -> Vec<RawPath> {
    vec![
        RawPath::new("p1", ["l1", "l3", "l4"]),
        RawPath::new("p2", ["l1", "l3", "l5"]),
        RawPath::new("p3", ["l2", "l3", "l4"]),
        RawPath::new("p4", ["l2", "l3", "l5"]),
    ]
}

/// Where an experiment gets its topologies.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum TopologySource {
    Generator(GeneratorParams),
    File { path: PathBuf },
    Dumbbell,
}

/// Random connected topology: a preferential-attachment spanning tree plus
/// `extra_links` random cross links, with `paths` shortest paths between
/// distinct random node pairs, reduced to its logical form.
pub fn generate_topology(params: &GeneratorParams, seed: u64) -> Result<Topology, SimError> {
    let GeneratorParams { nodes: n, extra_links, paths } = *params;
    if n < 2 {
        return Err(SimError::InfeasibleParams(format!("need at least 2 nodes, got {n}")));
    }
    if paths < 1 {
        return Err(SimError::InfeasibleParams("need at least one path".into()));
    }
    let pairs = n * (n - 1) / 2;
    if paths > pairs {
        return Err(SimError::InfeasibleParams(format!(
            "{paths} paths requested but {n} nodes only have {pairs} node pairs"
        )));
    }
    if extra_links > pairs - (n - 1) {
        return Err(SimError::InfeasibleParams(format!(
            "{extra_links} extra links do not fit on {n} nodes"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut edges: HashSet<(usize, usize)> = HashSet::new();
    let mut add_edge = |adj: &mut Vec<Vec<usize>>, a: usize, b: usize| {
        let key = (a.min(b), a.max(b));
        if a != b && edges.insert(key) {
            adj[a].push(b);
            adj[b].push(a);
            true
        } else {
            false
        }
    };
    for v in 1..n {
        // attach proportionally to degree + 1
        let total: usize = adj[..v].iter().map(|a| a.len() + 1).sum();
        let mut pick = rng.gen_range(0..total);
        let mut parent = 0;
        for (u, a) in adj[..v].iter().enumerate() {
            let w = a.len() + 1;
            if pick < w {
                parent = u;
                break;
            }
            pick -= w;
        }
        add_edge(&mut adj, parent, v);
    }
    let mut added = 0;
    while added < extra_links {
        let a = rng.gen_range(0..n);
        let b = rng.gen_range(0..n);
        if add_edge(&mut adj, a, b) {
            added += 1;
        }
    }
    for list in &mut adj {
        list.sort_unstable();
    }

    let mut all_pairs: Vec<(usize, usize)> =
        (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect();
    all_pairs.shuffle(&mut rng);
    let raw: Vec<RawPath> = all_pairs[..paths]
        .iter()
        .enumerate()
        .map(|(i, &(src, dst))| {
            let nodes = shortest_path(&adj, src, dst);
            let links = nodes.windows(2).map(|w| {
                let (a, b) = (w[0].min(w[1]), w[0].max(w[1]));
                format!("e{a}-{b}")
            });
            RawPath::new(format!("p{}", i + 1), links)
        })
        .collect();
    Ok(reduce_to_logical(&raw)?)
}

fn shortest_path(adj: &[Vec<usize>], src: usize, dst: usize) -> Vec<usize> {
    let mut prev = vec![usize::MAX; adj.len()];
    prev[src] = src;
    let mut queue = VecDeque::from([src]);
    while let Some(u) = queue.pop_front() {
        if u == dst {
            break;
        }
        for &v in &adj[u] {
            if prev[v] == usize::MAX {
                prev[v] = u;
                queue.push_back(v);
            }
        }
    }
    let mut path = vec![dst];
    let mut cur = dst;
    while cur != src {
        cur = prev[cur];
        path.push(cur);
    }
    path.reverse();
    path
}

/// Planted link bandwidths and the path bandwidths they imply.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub link_bandwidth: Vec<u32>,
    pub path_bandwidth: Vec<u32>,
    /// Link realizing each path's minimum (the first one on ties).
    pub tight_link: Vec<LinkId>,
    /// Distinct links realizing at least one path minimum.
    pub tight_link_count: usize,
}

impl GroundTruth {
    pub fn from_links(topology: &Topology, link_bandwidth: Vec<u32>) -> Self {
        assert_eq!(link_bandwidth.len(), topology.num_links());
        let tight_link: Vec<LinkId> = topology
            .incidence()
            .iter()
            .map(|ls| *ls.iter().min_by_key(|l| link_bandwidth[l.0]).expect("paths are non-empty"))
            .collect();
        let path_bandwidth = tight_link.iter().map(|l| link_bandwidth[l.0]).collect();
        let tight_link_count = tight_link.iter().collect::<HashSet<_>>().len();
        Self {
            link_bandwidth,
            path_bandwidth,
            tight_link,
            tight_link_count,
        }
    }

    pub fn path(&self, p: PathId) -> u32 {
        self.path_bandwidth[p.0]
    }
}

/// Draws every link bandwidth uniformly from the rate grid.
pub fn plant_truth<R: Rng + ?Sized>(topology: &Topology, domain: BandwidthDomain, rng: &mut R) -> GroundTruth {
    let links = (0..topology.num_links())
        .map(|_| rng.gen_range(domain.b_min()..=domain.b_max()))
        .collect();
    GroundTruth::from_links(topology, links)
}

/// Outcome drawn with probability `P(z = 1 | y_p, rate)` under `model`.
pub fn oracle_measure<R: Rng + ?Sized>(
    truth: &GroundTruth,
    model: &LikelihoodModel,
    path: PathId,
    rate: u32,
    rng: &mut R,
) -> bool {
    rng.gen::<f64>() < model.pass_probability(f64::from(truth.path(path)), f64::from(rate))
}

/// [`Measurer`] backed by [`oracle_measure`].
#[derive(Debug, Clone)]
pub struct OracleMeasurer<'a> {
    pub truth: &'a GroundTruth,
    pub model: LikelihoodModel,
    pub rng: ChaCha8Rng,
}

impl<'a> OracleMeasurer<'a> {
    pub fn new(truth: &'a GroundTruth, model: LikelihoodModel, seed: u64) -> Self {
        Self {
            truth,
            model,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl Measurer for OracleMeasurer<'_> {
    fn measure(&mut self, path: PathId, rate: u32) -> Result<bool, MeasureError> {
        if path.0 >= self.truth.path_bandwidth.len() {
            return Err(MeasureError(format!("unknown path {path}")));
        }
        Ok(oracle_measure(self.truth, &self.model, path, rate, &mut self.rng))
    }
}

fn default_policies() -> Vec<PolicyKind> {
    PolicyKind::ALL.to_vec()
}

fn default_trials() -> usize {
    10
}

fn default_alpha() -> f64 {
    LikelihoodModel::default().alpha()
}

fn default_kappa() -> f64 {
    LikelihoodModel::DEFAULT_KAPPA
}

fn default_topology() -> TopologySource {
    TopologySource::Generator(GeneratorParams {
        nodes: 100,
        extra_links: 10,
        paths: 50,
    })
}

/// Experiment description, loadable from a `key = value` config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    #[serde(default = "default_topology")]
    pub topology: TopologySource,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_policies")]
    pub policies: Vec<PolicyKind>,
    #[serde(default)]
    pub config: EstimatorConfig,
    /// Slope assumed by the estimator.
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_kappa")]
    pub kappa: f64,
    /// Slope used by the outcome oracle; defaults to the estimator's.
    #[serde(default)]
    pub oracle_alpha: Option<f64>,
    #[serde(default)]
    pub oracle_kappa: Option<f64>,
    #[serde(default)]
    pub seed: u64,
    /// Include per-session wall-clock times, which makes reports
    /// non-reproducible byte for byte.
    #[serde(default)]
    pub record_wall_time: bool,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            topology: default_topology(),
            trials: default_trials(),
            policies: default_policies(),
            config: EstimatorConfig::default(),
            alpha: default_alpha(),
            kappa: default_kappa(),
            oracle_alpha: None,
            oracle_kappa: None,
            seed: 0,
            record_wall_time: false,
        }
    }
}

/// Flat key-value form of [`ExperimentSpec`] as written in config files.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecFile {
    topology: Option<String>,
    topology_file: Option<PathBuf>,
    nodes: Option<usize>,
    extra_links: Option<usize>,
    paths: Option<usize>,
    trials: Option<usize>,
    policies: Option<PolicyNames>,
    epsilon: Option<f64>,
    delta: Option<f64>,
    eta: Option<f64>,
    beta: Option<f64>,
    max_measurements: Option<usize>,
    b_min: Option<u32>,
    b_max: Option<u32>,
    alpha: Option<f64>,
    kappa: Option<f64>,
    oracle_alpha: Option<f64>,
    oracle_kappa: Option<f64>,
    seed: Option<u64>,
    record_wall_time: Option<bool>,
}

/// A list of policy names, or one comma-separated string.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum PolicyNames {
    List(Vec<String>),
    Joined(String),
}

impl PolicyNames {
    fn into_vec(self) -> Vec<String> {
        match self {
            PolicyNames::List(v) => v,
            PolicyNames::Joined(s) => s.split(',').map(|n| n.trim().to_string()).collect(),
        }
    }
}

impl ExperimentSpec {
    /// Parses the plain `key = value` experiment format.
    ///
    /// Recognized keys: `topology` (`generator`, `dumbbell` or `file`),
    /// `topology_file`, `nodes`, `extra_links`, `paths`, `trials`,
    /// `policies`, `epsilon`, `delta`, `eta`, `beta`, `max_measurements`,
    /// `b_min`, `b_max`, `alpha`, `kappa`, `oracle_alpha`, `oracle_kappa`,
    /// `seed`, `record_wall_time`. Unknown keys are rejected.
    pub fn from_config_str(text: &str) -> Result<Self, SimError> {
        let f: SpecFile = toml::from_str(text).map_err(|e| SimError::Spec(e.message().to_string()))?;
        let mut spec = ExperimentSpec::default();
        let mut gen = match spec.topology {
            TopologySource::Generator(g) => g,
            _ => unreachable!(),
        };
        gen.nodes = f.nodes.unwrap_or(gen.nodes);
        gen.extra_links = f.extra_links.unwrap_or(gen.extra_links);
        gen.paths = f.paths.unwrap_or(gen.paths);
        spec.topology = match (f.topology.as_deref(), f.topology_file) {
            (Some("file") | None, Some(path)) => TopologySource::File { path },
            (Some("file"), None) => return Err(SimError::Spec("topology = \"file\" needs topology_file".into())),
            (Some("dumbbell"), None) => TopologySource::Dumbbell,
            (Some("generator") | None, None) => TopologySource::Generator(gen),
            (Some(other), _) => {
                return Err(SimError::Spec(format!(
                    "topology: unknown source `{other}` (expected generator, dumbbell or file)"
                )))
            }
        };
        if let Some(names) = f.policies {
            spec.policies = names
                .into_vec()
                .iter()
                .map(|n| n.parse().map_err(|_| SimError::Spec(format!("policies: unknown policy `{n}`"))))
                .collect::<Result<_, _>>()?;
        }
        spec.trials = f.trials.unwrap_or(spec.trials);
        let c = &mut spec.config;
        c.epsilon = f.epsilon.unwrap_or(c.epsilon);
        c.delta = f.delta.unwrap_or(c.delta);
        c.eta = f.eta.unwrap_or(c.eta);
        c.beta = f.beta.unwrap_or(c.beta);
        c.max_measurements = f.max_measurements.unwrap_or(c.max_measurements);
        if f.b_min.is_some() || f.b_max.is_some() {
            c.domain = BandwidthDomain::new(
                f.b_min.unwrap_or(c.domain.b_min()),
                f.b_max.unwrap_or(c.domain.b_max()),
            )?;
        }
        spec.alpha = f.alpha.unwrap_or(spec.alpha);
        spec.kappa = f.kappa.unwrap_or(spec.kappa);
        spec.oracle_alpha = f.oracle_alpha;
        spec.oracle_kappa = f.oracle_kappa;
        spec.seed = f.seed.unwrap_or(spec.seed);
        spec.record_wall_time = f.record_wall_time.unwrap_or(false);
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.trials < 1 {
            return Err(SimError::Spec("trials must be >= 1".into()));
        }
        if self.policies.is_empty() {
            return Err(SimError::Spec("policies must not be empty".into()));
        }
        if let TopologySource::Generator(g) = &self.topology {
            if g.paths < 1 {
                return Err(SimError::Spec("paths must be >= 1".into()));
            }
        }
        self.config.validate()?;
        self.estimator_model()?;
        self.oracle_model()?;
        Ok(())
    }

    pub fn estimator_model(&self) -> Result<LikelihoodModel, SimError> {
        Ok(LikelihoodModel::new(self.alpha, self.kappa)?)
    }

    pub fn oracle_model(&self) -> Result<LikelihoodModel, SimError> {
        Ok(LikelihoodModel::new(
            self.oracle_alpha.unwrap_or(self.alpha),
            self.oracle_kappa.unwrap_or(self.kappa),
        )?)
    }
}

/// Result of one policy's session within a trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub policy: PolicyKind,
    pub measurements: usize,
    /// Fraction of paths whose planted bandwidth lies in `[lb, ub]`.
    pub accuracy: f64,
    pub termination: Termination,
    pub bp_nonconverged: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub wall_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub num_links: usize,
    pub num_paths: usize,
    pub tight_links: usize,
    pub sessions: Vec<SessionSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicySummary {
    pub policy: PolicyKind,
    pub mean_measurements: f64,
    pub mean_measurements_per_path: f64,
    pub mean_accuracy: f64,
    pub min_accuracy: f64,
    /// Fraction of sessions that ended with every criterion met.
    pub criteria_met_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatterPoint {
    pub tight_links_per_path: f64,
    pub measurements_per_path: f64,
    pub policy: PolicyKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub spec: ExperimentSpec,
    pub summaries: Vec<PolicySummary>,
    pub trials: Vec<TrialRecord>,
}

impl ExperimentReport {
    pub fn summary(&self, policy: PolicyKind) -> Option<&PolicySummary> {
        self.summaries.iter().find(|s| s.policy == policy)
    }

    /// Measurements per path against tight links per path, one point per
    /// trial and policy.
    pub fn scatter(&self) -> Vec<ScatterPoint> {
        self.trials
            .iter()
            .flat_map(|t| {
                t.sessions.iter().map(move |s| ScatterPoint {
                    tight_links_per_path: t.tight_links as f64 / t.num_paths as f64,
                    measurements_per_path: s.measurements as f64 / t.num_paths as f64,
                    policy: s.policy,
                })
            })
            .collect()
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(self)
    }

    pub fn write_trials_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "trial,seed,policy,num_links,num_paths,tight_links,measurements,accuracy,termination")?;
        for t in &self.trials {
            for s in &t.sessions {
                writeln!(
                    out,
                    "{},{},{},{},{},{},{},{:.6},{}",
                    t.trial, t.seed, s.policy, t.num_links, t.num_paths, t.tight_links, s.measurements, s.accuracy, s.termination
                )?;
            }
        }
        Ok(())
    }

    pub fn write_scatter_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "tight_links_per_path,measurements_per_path,policy")?;
        for p in self.scatter() {
            writeln!(out, "{:.6},{:.6},{}", p.tight_links_per_path, p.measurements_per_path, p.policy)?;
        }
        Ok(())
    }
}

/// SplitMix64 step, used to derive independent sub-seeds.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Runs one trial: builds its topology and truth, then one session per
/// policy, all policies sharing the same selection and oracle seeds.
pub fn run_trial(spec: &ExperimentSpec, trial: usize, base: Option<&Topology>) -> Result<TrialRecord, SimError> {
    let trial_seed = derive_seed(spec.seed, trial as u64);
    let topology = match (&spec.topology, base) {
        (_, Some(t)) => t.clone(),
        (TopologySource::Generator(g), None) => generate_topology(g, derive_seed(trial_seed, 1))?,
        (TopologySource::Dumbbell, None) => dumbbell(),
        (TopologySource::File { path }, None) => load_topology_file(path)?,
    };
    let mut truth_rng = ChaCha8Rng::seed_from_u64(derive_seed(trial_seed, 2));
    let truth = plant_truth(&topology, spec.config.domain, &mut truth_rng);
    let estimator = spec.estimator_model()?;
    let oracle = spec.oracle_model()?;
    let options = SessionOptions {
        record_snapshots: false,
        ..SessionOptions::default()
    };
    let mut sessions = Vec::with_capacity(spec.policies.len());
    for &kind in &spec.policies {
        let started = Instant::now();
        let policy = SelectionPolicy::new(kind, derive_seed(trial_seed, 3));
        let mut measurer = OracleMeasurer::new(&truth, oracle, derive_seed(trial_seed, 4));
        let report = Session::new(&topology, spec.config, estimator, policy, options)?.run(&mut measurer);
        let correct = report
            .estimates
            .iter()
            .enumerate()
            .filter(|(p, e)| e.estimate.contains(truth.path(PathId(*p))))
            .count();
        sessions.push(SessionSummary {
            policy: kind,
            measurements: report.measurements,
            accuracy: correct as f64 / topology.num_paths() as f64,
            termination: report.termination,
            bp_nonconverged: report.bp_nonconverged,
            wall_ms: spec.record_wall_time.then(|| started.elapsed().as_secs_f64() * 1e3),
        });
    }
    Ok(TrialRecord {
        trial,
        seed: trial_seed,
        num_links: topology.num_links(),
        num_paths: topology.num_paths(),
        tight_links: truth.tight_link_count,
        sessions,
    })
}

fn load_topology_file(path: &PathBuf) -> Result<Topology, SimError> {
    let text = std::fs::read_to_string(path).map_err(|source| SimError::Io {
        path: path.clone(),
        source,
    })?;
    Ok(load_topology(&text)?)
}

/// Runs every trial of `spec`, calling `on_trial` as each one completes.
///
/// Trials run in parallel; the report lists them by trial index regardless
/// of completion order.
pub fn run_experiment_with<F>(spec: &ExperimentSpec, on_trial: F) -> Result<ExperimentReport, SimError>
where
    F: Fn(&TrialRecord) + Sync,
{
    spec.validate()?;
    let base = match &spec.topology {
        TopologySource::File { path } => Some(load_topology_file(path)?),
        _ => None,
    };
    let trials: Vec<TrialRecord> = (0..spec.trials)
        .into_par_iter()
        .map(|i| {
            let rec = run_trial(spec, i, base.as_ref())?;
            on_trial(&rec);
            Ok(rec)
        })
        .collect::<Result<_, SimError>>()?;
    let summaries = spec
        .policies
        .iter()
        .map(|&policy| {
            let rows: Vec<(&TrialRecord, &SessionSummary)> = trials
                .iter()
                .flat_map(|t| t.sessions.iter().filter(move |s| s.policy == policy).map(move |s| (t, s)))
                .collect();
            let n = rows.len() as f64;
            PolicySummary {
                policy,
                mean_measurements: rows.iter().map(|(_, s)| s.measurements as f64).sum::<f64>() / n,
                mean_measurements_per_path: rows
                    .iter()
                    .map(|(t, s)| s.measurements as f64 / t.num_paths as f64)
                    .sum::<f64>()
                    / n,
                mean_accuracy: rows.iter().map(|(_, s)| s.accuracy).sum::<f64>() / n,
                min_accuracy: rows.iter().map(|(_, s)| s.accuracy).fold(f64::INFINITY, f64::min),
                criteria_met_fraction: rows
                    .iter()
                    .filter(|(_, s)| s.termination == Termination::CriteriaMet)
                    .count() as f64
                    / n,
            }
        })
        .collect();
    Ok(ExperimentReport {
        spec: spec.clone(),
        summaries,
        trials,
    })
}

pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentReport, SimError> {
    run_experiment_with(spec, |_| {})
}
