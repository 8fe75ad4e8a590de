use serde::{Deserialize, Serialize};

use super::DomainError;

/// Smallest value any posterior entry is allowed to take after an update.
pub const PMF_FLOOR: f64 = 1e-12;

/// Slack used when comparing accumulated probability mass against a target.
pub(crate) const MASS_TOLERANCE: f64 = 1e-12;

/// Integer Mbps rate grid `b_min..=b_max`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawDomain", into = "RawDomain")]
pub struct BandwidthDomain {
    b_min: u32,
    b_max: u32,
}

#[derive(Serialize, Deserialize)]
struct RawDomain {
    b_min: u32,
    b_max: u32,
}

impl TryFrom<RawDomain> for BandwidthDomain {
    type Error = DomainError;

    fn try_from(raw: RawDomain) -> Result<Self, Self::Error> {
        BandwidthDomain::new(raw.b_min, raw.b_max)
    }
}

impl From<BandwidthDomain> for RawDomain {
    fn from(d: BandwidthDomain) -> Self {
        RawDomain {
            b_min: d.b_min,
            b_max: d.b_max,
        }
    }
}

impl BandwidthDomain {
    pub fn new(b_min: u32, b_max: u32) -> Result<Self, DomainError> {
        if b_min < 1 || b_max <= b_min {
            return Err(DomainError::InvalidDomain { b_min, b_max });
        }
        Ok(Self { b_min, b_max })
    }

    pub fn b_min(&self) -> u32 {
        self.b_min
    }

    pub fn b_max(&self) -> u32 {
        self.b_max
    }

    /// Number of grid points.
    pub fn len(&self) -> usize {
        (self.b_max - self.b_min + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, rate: u32) -> bool {
        (self.b_min..=self.b_max).contains(&rate)
    }

    pub fn rate(&self, index: usize) -> u32 {
        debug_assert!(index < self.len());
        self.b_min + index as u32
    }

    pub fn index(&self, rate: u32) -> Option<usize> {
        self.contains(rate).then(|| (rate - self.b_min) as usize)
    }

    pub fn rates(&self) -> impl Iterator<Item = u32> {
        self.b_min..=self.b_max
    }
}

impl Default for BandwidthDomain {
    fn default() -> Self {
        Self { b_min: 1, b_max: 100 }
    }
}

/// Discrete probability mass function over a [`BandwidthDomain`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pmf {
    domain: BandwidthDomain,
    mass: Vec<f64>,
}

impl Pmf {
    pub fn uniform(domain: BandwidthDomain) -> Self {
        let k = domain.len();
        Self {
            domain,
            mass: vec![1.0 / k as f64; k],
        }
    }

    pub fn point(domain: BandwidthDomain, rate: u32) -> Result<Self, DomainError> {
        let idx = domain
            .index(rate)
            .ok_or(DomainError::RateOutOfDomain { rate })?;
        let mut mass = vec![0.0; domain.len()];
        mass[idx] = 1.0;
        Ok(Self { domain, mass })
    }

    /// Builds a normalized PMF from arbitrary non-negative weights.
    pub fn from_weights(domain: BandwidthDomain, weights: Vec<f64>) -> Result<Self, DomainError> {
        if weights.len() != domain.len() {
            return Err(DomainError::LengthMismatch {
                expected: domain.len(),
                got: weights.len(),
            });
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(DomainError::InvalidWeights);
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(DomainError::InvalidWeights);
        }
        Ok(Self {
            domain,
            mass: weights.into_iter().map(|w| w / total).collect(),
        })
    }

    pub fn domain(&self) -> BandwidthDomain {
        self.domain
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn at(&self, rate: u32) -> f64 {
        self.domain.index(rate).map_or(0.0, |i| self.mass[i])
    }

    pub fn total(&self) -> f64 {
        self.mass.iter().sum()
    }

    pub fn normalize(&mut self) {
        let total = self.total();
        if total > 0.0 && total.is_finite() {
            self.mass.iter_mut().for_each(|m| *m /= total);
        } else {
            let k = self.mass.len() as f64;
            self.mass.iter_mut().for_each(|m| *m = 1.0 / k);
        }
    }

    /// Clamps every entry to at least `floor` and renormalizes.
    pub fn floor_and_normalize(&mut self, floor: f64) {
        self.normalize();
        self.mass.iter_mut().for_each(|m| *m = m.max(floor));
        self.normalize();
    }

    /// Natural-log Shannon entropy; zero entries contribute nothing.
    pub fn entropy(&self) -> f64 {
        -self
            .mass
            .iter()
            .filter(|&&m| m > 0.0)
            .map(|&m| m * m.ln())
            .sum::<f64>()
    }

    /// `P(X <= rate)` for every grid point.
    pub fn cdf(&self) -> Vec<f64> {
        self.mass
            .iter()
            .scan(0.0, |acc, &m| {
                *acc += m;
                Some(*acc)
            })
            .collect()
    }

    pub fn median(&self) -> u32 {
        posterior_median(self)
    }

    pub fn credible_interval(&self, eta: f64) -> CredibleInterval {
        shortest_credible_interval(self, eta)
    }
}

/// Contiguous grid interval `[lb, ub]` and the mass it holds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CredibleInterval {
    pub lb: u32,
    pub ub: u32,
    pub mass: f64,
}

impl CredibleInterval {
    pub fn width(&self) -> u32 {
        self.ub - self.lb
    }

    pub fn contains(&self, rate: u32) -> bool {
        (self.lb..=self.ub).contains(&rate)
    }
}

/// Narrowest contiguous interval holding at least `eta` of the mass.
///
/// Ties in width go to the interval with the most mass, then to the one with
/// the smallest lower bound.
pub fn shortest_credible_interval(pmf: &Pmf, eta: f64) -> CredibleInterval {
    let k = pmf.mass.len();
    let mut prefix = Vec::with_capacity(k + 1);
    prefix.push(0.0);
    for &m in &pmf.mass {
        prefix.push(prefix.last().unwrap() + m);
    }
    for width in 0..k {
        let mut best: Option<(usize, f64)> = None;
        for lo in 0..k - width {
            let mass = prefix[lo + width + 1] - prefix[lo];
            if mass + MASS_TOLERANCE >= eta && best.is_none_or(|(_, m)| mass > m) {
                best = Some((lo, mass));
            }
        }
        if let Some((lo, mass)) = best {
            return CredibleInterval {
                lb: pmf.domain.rate(lo),
                ub: pmf.domain.rate(lo + width),
                mass,
            };
        }
    }
    CredibleInterval {
        lb: pmf.domain.b_min(),
        ub: pmf.domain.b_max(),
        mass: prefix[k],
    }
}

/// Smallest grid rate whose cumulative mass reaches one half.
pub fn posterior_median(pmf: &Pmf) -> u32 {
    let mut acc = 0.0;
    for (i, &m) in pmf.mass.iter().enumerate() {
        acc += m;
        if acc + MASS_TOLERANCE >= 0.5 {
            return pmf.domain.rate(i);
        }
    }
    pmf.domain.b_max()
}
