//! Rate difference test, the bounded sigmoid observation model, and the
//! joint least-squares fit of the sigmoid slope and per-path bandwidths.

use std::collections::BTreeMap;
use std::io::Read;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::BandwidthDomain;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LikelihoodError {
    #[error("alpha must be positive and finite, got {0}")]
    InvalidAlpha(f64),
    #[error("kappa must lie in (0, 0.5), got {0}")]
    InvalidKappa(f64),
    #[error("path `{path}`: {reason}")]
    InsufficientData { path: String, reason: String },
    #[error("no training samples")]
    NoData,
    #[error("training data: {0}")]
    Csv(String),
}

/// Rate difference test: `1{egress >= ingress - epsilon}`.
pub fn rdt(ingress_rate: f64, egress_rate: f64, epsilon: f64) -> bool {
    egress_rate >= ingress_rate - epsilon
}

pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `P(z = 1 | y, r) = clamp(logistic(-alpha (r - y)), kappa, 1 - kappa)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LikelihoodModel {
    alpha: f64,
    kappa: f64,
}

impl Default for LikelihoodModel {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            kappa: 0.05,
        }
    }
}

impl LikelihoodModel {
    pub const DEFAULT_KAPPA: f64 = 0.05;

    pub fn new(alpha: f64, kappa: f64) -> Result<Self, LikelihoodError> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(LikelihoodError::InvalidAlpha(alpha));
        }
        if !(kappa > 0.0 && kappa < 0.5) {
            return Err(LikelihoodError::InvalidKappa(kappa));
        }
        Ok(Self { alpha, kappa })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// Probability of a passing test when probing at `rate` a path whose
    /// available bandwidth is `y`.
    pub fn pass_probability(&self, y: f64, rate: f64) -> f64 {
        logistic(-self.alpha * (rate - y)).clamp(self.kappa, 1.0 - self.kappa)
    }

    pub fn likelihood_of(&self, z: bool, y: f64, rate: f64) -> f64 {
        let p = self.pass_probability(y, rate);
        if z {
            p
        } else {
            1.0 - p
        }
    }

    /// Likelihood of outcome `z` at `rate` as a function of `y` over the grid.
    pub fn curve(&self, domain: BandwidthDomain, z: bool, rate: u32) -> Vec<f64> {
        domain
            .rates()
            .map(|y| self.likelihood_of(z, f64::from(y), f64::from(rate)))
            .collect()
    }
}

/// Aggregated outcomes of repeated probes at one rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingSample {
    pub rate: f64,
    /// Empirical fraction of passing tests.
    pub outcome_mean: f64,
    pub trials: u32,
}

/// Per-path training samples keyed by path name.
pub type TrainingSet = BTreeMap<String, Vec<TrainingSample>>;

#[derive(Debug, Deserialize)]
struct TrainingRow {
    path: String,
    rate: f64,
    z: u8,
}

/// Reads a `path,rate,z` CSV of individual outcomes and aggregates it per
/// `(path, rate)`.
pub fn read_training_csv<R: Read>(reader: R) -> Result<TrainingSet, LikelihoodError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| LikelihoodError::Csv(e.to_string()))?
        .clone();
    if headers.iter().collect::<Vec<_>>() != ["path", "rate", "z"] {
        return Err(LikelihoodError::Csv(format!(
            "expected header `path,rate,z`, got `{}`",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    // (passes, trials) per path and rate, keyed on the rate's bit pattern
    let mut counts: BTreeMap<String, BTreeMap<u64, (f64, u32, u32)>> = BTreeMap::new();
    for row in rdr.deserialize::<TrainingRow>() {
        let row = row.map_err(|e| LikelihoodError::Csv(e.to_string()))?;
        if row.z > 1 {
            return Err(LikelihoodError::Csv(format!("z must be 0 or 1, got {}", row.z)));
        }
        if !row.rate.is_finite() {
            return Err(LikelihoodError::Csv(format!("bad rate {}", row.rate)));
        }
        let entry = counts
            .entry(row.path)
            .or_default()
            .entry(row.rate.to_bits())
            .or_insert((row.rate, 0, 0));
        entry.1 += u32::from(row.z);
        entry.2 += 1;
    }
    if counts.is_empty() {
        return Err(LikelihoodError::NoData);
    }
    Ok(counts
        .into_iter()
        .map(|(path, by_rate)| {
            let mut samples: Vec<TrainingSample> = by_rate
                .into_values()
                .map(|(rate, passes, trials)| TrainingSample {
                    rate,
                    outcome_mean: f64::from(passes) / f64::from(trials),
                    trials,
                })
                .collect();
            samples.sort_by(|a, b| a.rate.total_cmp(&b.rate));
            (path, samples)
        })
        .collect())
}

/// Search grid for the shared slope.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaGrid {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl Default for AlphaGrid {
    fn default() -> Self {
        Self {
            min: 0.05,
            max: 10.0,
            points: 60,
        }
    }
}

impl AlphaGrid {
    pub fn values(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.min];
        }
        let ratio = (self.max / self.min).ln() / (self.points - 1) as f64;
        (0..self.points)
            .map(|i| self.min * (ratio * i as f64).exp())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub alpha: f64,
    /// Fitted bandwidth per identifiable path.
    pub y_hat: BTreeMap<String, u32>,
    /// Paths whose bandwidth cannot be located from their samples.
    pub unidentifiable: Vec<LikelihoodError>,
    /// Weighted squared error at the optimum.
    pub objective: f64,
}

/// Trial-weighted squared error of a single path's samples against the
/// unbounded sigmoid.
pub fn path_objective(samples: &[TrainingSample], alpha: f64, y: f64) -> f64 {
    samples
        .iter()
        .map(|s| {
            let d = s.outcome_mean - logistic(-alpha * (s.rate - y));
            f64::from(s.trials) * d * d
        })
        .sum()
}

fn check_identifiable(path: &str, samples: &[TrainingSample]) -> Result<(), LikelihoodError> {
    let insufficient = |reason: &str| LikelihoodError::InsufficientData {
        path: path.to_string(),
        reason: reason.to_string(),
    };
    if samples.is_empty() {
        return Err(insufficient("no samples"));
    }
    if samples.iter().all(|s| s.outcome_mean >= 1.0) {
        return Err(insufficient("every outcome passed"));
    }
    if samples.iter().all(|s| s.outcome_mean <= 0.0) {
        return Err(insufficient("every outcome failed"));
    }
    Ok(())
}

/// Jointly fits one shared slope and one bandwidth per path by exhaustive
/// search: `alpha` over `grid`, each `y_p` over the integer rate grid.
///
/// Given `alpha` the per-path problems are independent, so the inner search
/// is a separate scan per path.
pub fn fit(
    samples: &TrainingSet,
    domain: BandwidthDomain,
    grid: AlphaGrid,
) -> Result<FitResult, LikelihoodError> {
    if samples.is_empty() {
        return Err(LikelihoodError::NoData);
    }
    let mut usable = Vec::new();
    let mut unidentifiable = Vec::new();
    for (path, ss) in samples {
        match check_identifiable(path, ss) {
            Ok(()) => usable.push((path, ss)),
            Err(e) => unidentifiable.push(e),
        }
    }
    if usable.is_empty() {
        return Err(unidentifiable.into_iter().next().unwrap_or(LikelihoodError::NoData));
    }

    let mut best: Option<(f64, f64, Vec<u32>)> = None;
    for alpha in grid.values() {
        let mut total = 0.0;
        let mut ys = Vec::with_capacity(usable.len());
        for (_, ss) in &usable {
            let (y, err) = domain
                .rates()
                .map(|y| (y, path_objective(ss, alpha, f64::from(y))))
                .fold((0, f64::INFINITY), |acc, cur| if cur.1 < acc.1 { cur } else { acc });
            total += err;
            ys.push(y);
        }
        if best.as_ref().is_none_or(|b| total < b.1) {
            best = Some((alpha, total, ys));
        }
    }
    let (alpha, objective, ys) = best.expect("alpha grid is non-empty");
    Ok(FitResult {
        alpha,
        y_hat: usable
            .iter()
            .zip(ys)
            .map(|((p, _), y)| ((*p).clone(), y))
            .collect(),
        unidentifiable,
        objective,
    })
}
