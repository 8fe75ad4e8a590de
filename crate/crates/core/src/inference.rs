//! Factor graph over link and path bandwidth variables, and loopy belief
//! propagation on it.
//!
//! Every path variable `y_p` hangs off one min factor that ties it to the link
//! variables `x_l` it traverses; every link variable carries a prior factor.
//! Measurement likelihoods all attach to a single path variable, so instead of
//! growing the graph with one factor per measurement each path keeps the
//! running pointwise product of its likelihood curves.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{BandwidthDomain, LinkId, Measurement, PathId, Pmf, Topology, PMF_FLOOR};
use crate::likelihood::LikelihoodModel;

/// Floor applied to message entries to keep products away from underflow.
pub const MESSAGE_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InferenceError {
    #[error("unknown path {0}")]
    UnknownPath(PathId),
    #[error("rate {0} lies outside the domain")]
    RateOutOfDomain(u32),
    #[error("messages are defined on different domains")]
    DomainMismatch,
    #[error("a min factor needs at least one incoming message")]
    NoMessages,
}

/// Flooding schedule parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BpSchedule {
    pub max_iterations: usize,
    /// Largest absolute change of any message entry that counts as converged.
    pub convergence_tol: f64,
    /// Weight kept from the previous factor-to-variable message.
    pub damping: f64,
}

impl Default for BpSchedule {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            convergence_tol: 1e-6,
            damping: 0.3,
        }
    }
}

impl BpSchedule {
    /// Undamped schedule with a tight tolerance; exact on trees.
    pub fn exact() -> Self {
        Self {
            max_iterations: 1000,
            convergence_tol: 1e-14,
            damping: 0.0,
        }
    }
}

/// Per-variable marginals after a belief propagation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Marginals {
    pub paths: Vec<Pmf>,
    pub links: Vec<Pmf>,
}

impl Marginals {
    pub fn path(&self, p: PathId) -> &Pmf {
        &self.paths[p.0]
    }

    pub fn link(&self, l: LinkId) -> &Pmf {
        &self.links[l.0]
    }

    /// Writes `kind,id,rate,mass` rows.
    pub fn write_csv<W: Write>(&self, topology: &Topology, mut out: W) -> std::io::Result<()> {
        writeln!(out, "kind,id,rate,mass")?;
        for (l, pmf) in self.links.iter().enumerate() {
            for (rate, m) in pmf.domain().rates().zip(pmf.mass()) {
                writeln!(out, "link,{},{rate},{m:e}", topology.link_name(LinkId(l)))?;
            }
        }
        for (p, pmf) in self.paths.iter().enumerate() {
            for (rate, m) in pmf.domain().rates().zip(pmf.mass()) {
                writeln!(out, "path,{},{rate},{m:e}", topology.path_name(PathId(p)))?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BpOutcome {
    pub marginals: Marginals,
    pub converged: bool,
    pub iterations: usize,
}

fn normalize_floor(v: &mut [f64], floor: f64) {
    let total: f64 = v.iter().sum();
    if total > 0.0 && total.is_finite() {
        let inv = 1.0 / total;
        v.iter_mut().for_each(|x| *x = floor_at(*x * inv, floor));
    } else {
        let u = 1.0 / v.len() as f64;
        v.iter_mut().for_each(|x| *x = u);
    }
}

#[inline]
fn floor_at(x: f64, floor: f64) -> f64 {
    if x > floor {
        x
    } else {
        floor
    }
}

/// `out[i] = sum(msg[i..])`.
fn survival_into(msg: &[f64], out: &mut [f64]) {
    let mut acc = 0.0;
    for i in (0..msg.len()).rev() {
        acc += msg[i];
        out[i] = acc;
    }
}

/// Distribution of the minimum given survival products `surv` (with an
/// implicit zero past the end).
fn min_from_survival(surv: &[f64], out: &mut [f64]) {
    let k = surv.len();
    for i in 0..k {
        let next = if i + 1 < k { surv[i + 1] } else { 0.0 };
        out[i] = floor_at(surv[i] - next, 0.0);
    }
}

/// Message from a min factor to the target link, given the path message and
/// the survival product `others` of every other link on the path.
fn link_message_from_survival(path_msg: &[f64], others: &[f64], out: &mut [f64]) {
    let k = path_msg.len();
    let mut cum = 0.0;
    for x in 0..k {
        let next = if x + 1 < k { others[x + 1] } else { 0.0 };
        // the other links' minimum sits exactly at x
        cum += path_msg[x] * floor_at(others[x] - next, 0.0);
        // target is the strict minimum, or the others' minimum is <= x
        out[x] = path_msg[x] * next + cum;
    }
}

fn check_domains<'a>(msgs: impl IntoIterator<Item = &'a Pmf>) -> Result<BandwidthDomain, InferenceError> {
    let mut it = msgs.into_iter();
    let first = it.next().ok_or(InferenceError::NoMessages)?.domain();
    if it.all(|m| m.domain() == first) {
        Ok(first)
    } else {
        Err(InferenceError::DomainMismatch)
    }
}

/// Distribution of `min(x_1, ..., x_n)` for independent inputs, in `O(n k)`.
pub fn min_factor_message_to_path(incoming: &[Pmf]) -> Result<Pmf, InferenceError> {
    let domain = check_domains(incoming)?;
    let k = domain.len();
    let mut prod = vec![1.0; k];
    let mut surv = vec![0.0; k];
    for m in incoming {
        survival_into(m.mass(), &mut surv);
        prod.iter_mut().zip(&surv).for_each(|(p, s)| *p *= s);
    }
    let mut out = vec![0.0; k];
    min_from_survival(&prod, &mut out);
    normalize_floor(&mut out, MESSAGE_FLOOR);
    Ok(Pmf::from_weights(domain, out).expect("normalized message"))
}

/// Sum-product message from a min factor to one of its links, given the
/// message arriving from the path variable and the messages from the other
/// links, in `O(n k)`.
pub fn min_factor_message_to_link(path_msg: &Pmf, other_links: &[Pmf]) -> Result<Pmf, InferenceError> {
    let domain = check_domains(std::iter::once(path_msg).chain(other_links))?;
    let k = domain.len();
    let mut others = vec![1.0; k];
    let mut surv = vec![0.0; k];
    for m in other_links {
        survival_into(m.mass(), &mut surv);
        others.iter_mut().zip(&surv).for_each(|(p, s)| *p *= s);
    }
    let mut out = vec![0.0; k];
    link_message_from_survival(path_msg.mass(), &others, &mut out);
    normalize_floor(&mut out, MESSAGE_FLOOR);
    Ok(Pmf::from_weights(domain, out).expect("normalized message"))
}

/// Bipartite factor graph with folded measurement factors and persistent
/// messages, so successive runs warm-start from the previous fixed point.
#[derive(Debug, Clone)]
pub struct FactorGraph {
    domain: BandwidthDomain,
    k: usize,
    /// Start of each path's edge block; edges of path `p` are
    /// `edge_offset[p]..edge_offset[p + 1]`.
    edge_offset: Vec<usize>,
    edge_link: Vec<usize>,
    link_edges: Vec<Vec<usize>>,
    prior: Vec<Vec<f64>>,
    evidence: Vec<Vec<f64>>,
    evidence_count: Vec<usize>,
    link_to_factor: Vec<f64>,
    factor_to_link: Vec<f64>,
    factor_to_path: Vec<f64>,
}

impl FactorGraph {
    /// Builds the graph with the same prior on every link.
    pub fn build(topology: &Topology, prior: &Pmf) -> Self {
        let priors = vec![prior.clone(); topology.num_links()];
        Self::build_with_priors(topology, &priors).expect("one prior per link on one domain")
    }

    pub fn build_with_priors(topology: &Topology, priors: &[Pmf]) -> Result<Self, InferenceError> {
        let domain = check_domains(priors)?;
        if priors.len() != topology.num_links() {
            return Err(InferenceError::DomainMismatch);
        }
        let k = domain.len();
        let mut edge_offset = vec![0];
        let mut edge_link = Vec::new();
        let mut link_edges = vec![Vec::new(); topology.num_links()];
        for links in topology.incidence() {
            for l in links {
                link_edges[l.0].push(edge_link.len());
                edge_link.push(l.0);
            }
            edge_offset.push(edge_link.len());
        }
        let m = topology.num_paths();
        let e = edge_link.len();
        let uniform = 1.0 / k as f64;
        let mut link_to_factor = vec![uniform; e * k];
        for (l, edges) in link_edges.iter().enumerate() {
            if let [e] = edges[..] {
                let out = &mut link_to_factor[e * k..(e + 1) * k];
                out.copy_from_slice(priors[l].mass());
                normalize_floor(out, MESSAGE_FLOOR);
            }
        }
        Ok(Self {
            domain,
            k,
            edge_offset,
            edge_link,
            link_edges,
            prior: priors.iter().map(|p| p.mass().to_vec()).collect(),
            evidence: vec![vec![uniform; k]; m],
            evidence_count: vec![0; m],
            link_to_factor,
            factor_to_link: vec![uniform; e * k],
            factor_to_path: vec![uniform; m * k],
        })
    }

    pub fn domain(&self) -> BandwidthDomain {
        self.domain
    }

    pub fn num_paths(&self) -> usize {
        self.evidence.len()
    }

    pub fn num_links(&self) -> usize {
        self.link_edges.len()
    }

    /// Number of variable-to-factor edges between links and min factors.
    pub fn num_edges(&self) -> usize {
        self.edge_link.len()
    }

    /// Links attached to a path's min factor, in path order.
    pub fn factor_links(&self, p: PathId) -> Vec<LinkId> {
        self.edge_link[self.edge_offset[p.0]..self.edge_offset[p.0 + 1]]
            .iter()
            .map(|&l| LinkId(l))
            .collect()
    }

    /// Normalized product of every likelihood folded into a path.
    pub fn evidence(&self, p: PathId) -> &[f64] {
        &self.evidence[p.0]
    }

    pub fn evidence_count(&self, p: PathId) -> usize {
        self.evidence_count[p.0]
    }

    pub fn prior(&self, l: LinkId) -> &[f64] {
        &self.prior[l.0]
    }

    /// Folds one measurement's likelihood into its path's evidence.
    pub fn add_evidence(&mut self, m: &Measurement, model: &LikelihoodModel) -> Result<(), InferenceError> {
        let ev = self
            .evidence
            .get_mut(m.path.0)
            .ok_or(InferenceError::UnknownPath(m.path))?;
        if !self.domain.contains(m.rate) {
            return Err(InferenceError::RateOutOfDomain(m.rate));
        }
        let rate = f64::from(m.rate);
        for (y, e) in self.domain.rates().zip(ev.iter_mut()) {
            *e *= model.likelihood_of(m.outcome, f64::from(y), rate);
        }
        normalize_floor(ev, PMF_FLOOR);
        self.evidence_count[m.path.0] += 1;
        Ok(())
    }

    /// Runs flooding belief propagation, starting from the current messages.
    pub fn run_bp(&mut self, schedule: &BpSchedule) -> BpOutcome {
        let k = self.k;
        let max_edges = self.edge_offset.windows(2).map(|w| w[1] - w[0]).max().unwrap_or(0);
        let max_degree = self.link_edges.iter().map(Vec::len).max().unwrap_or(0);
        let mut scratch = Scratch::new(k, max_edges.max(max_degree));
        let mut converged = false;
        let mut iterations = 0;
        while iterations < schedule.max_iterations {
            iterations += 1;
            self.update_link_to_factor(&mut scratch);
            let delta = self.update_factor_messages(schedule.damping, &mut scratch);
            if delta < schedule.convergence_tol {
                converged = true;
                break;
            }
        }
        BpOutcome {
            marginals: self.marginals(),
            converged,
            iterations,
        }
    }

    fn update_link_to_factor(&mut self, s: &mut Scratch) {
        let k = self.k;
        for (l, edges) in self.link_edges.iter().enumerate() {
            let d = edges.len();
            if d < 2 {
                // a link on one path only ever sends its prior, set at build
                continue;
            }
            // prefix[i] = prior * prod_{j<i} f2l[edges[j]]; suffix[i] = prod_{j>=i}
            s.prefix[..k].copy_from_slice(&self.prior[l]);
            for (i, &e) in edges.iter().enumerate() {
                let (cur, next) = s.prefix.split_at_mut((i + 1) * k);
                let msg = &self.factor_to_link[e * k..(e + 1) * k];
                mul_rescaled(&cur[i * k..], msg, &mut next[..k]);
            }
            s.suffix[d * k..(d + 1) * k].fill(1.0);
            for i in (0..d).rev() {
                let e = edges[i];
                let (cur, next) = s.suffix.split_at_mut((i + 1) * k);
                let msg = &self.factor_to_link[e * k..(e + 1) * k];
                mul_rescaled(&next[..k], msg, &mut cur[i * k..]);
            }
            for (i, &e) in edges.iter().enumerate() {
                let out = &mut self.link_to_factor[e * k..(e + 1) * k];
                let total = mul_rescaled(&s.prefix[i * k..], &s.suffix[(i + 1) * k..], out);
                scale_floor(out, total, MESSAGE_FLOOR);
            }
        }
    }

    fn update_factor_messages(&mut self, damping: f64, s: &mut Scratch) -> f64 {
        let k = self.k;
        let mut delta: f64 = 0.0;
        for p in 0..self.evidence.len() {
            let (start, end) = (self.edge_offset[p], self.edge_offset[p + 1]);
            let n = end - start;
            for (i, e) in (start..end).enumerate() {
                survival_into(
                    &self.link_to_factor[e * k..(e + 1) * k],
                    &mut s.survival[i * k..(i + 1) * k],
                );
            }
            // survival products stay within [0, 1]; no rescaling needed
            s.prefix[..k].fill(1.0);
            for i in 0..n {
                let (cur, next) = s.prefix.split_at_mut((i + 1) * k);
                for x in 0..k {
                    next[x] = cur[i * k + x] * s.survival[i * k + x];
                }
            }
            s.suffix[n * k..(n + 1) * k].fill(1.0);
            for i in (0..n).rev() {
                let (cur, next) = s.suffix.split_at_mut((i + 1) * k);
                for x in 0..k {
                    cur[i * k + x] = next[x] * s.survival[i * k + x];
                }
            }

            min_from_survival(&s.prefix[n * k..(n + 1) * k], &mut s.out);
            let total = s.out.iter().sum();
            delta = delta.max(damp_into(
                &mut self.factor_to_path[p * k..(p + 1) * k],
                &s.out,
                total,
                damping,
            ));

            let path_msg = &self.evidence[p];
            for (i, e) in (start..end).enumerate() {
                let pre = &s.prefix[i * k..(i + 1) * k];
                let suf = &s.suffix[(i + 1) * k..(i + 2) * k];
                // same recursion as link_message_from_survival, with the
                // other links' survival product formed on the fly
                let mut cum = 0.0;
                let mut total = 0.0;
                let mut here = pre[0] * suf[0];
                for x in 0..k {
                    let next = if x + 1 < k { pre[x + 1] * suf[x + 1] } else { 0.0 };
                    cum += path_msg[x] * floor_at(here - next, 0.0);
                    let v = path_msg[x] * next + cum;
                    s.out[x] = v;
                    total += v;
                    here = next;
                }
                delta = delta.max(damp_into(
                    &mut self.factor_to_link[e * k..(e + 1) * k],
                    &s.out,
                    total,
                    damping,
                ));
            }
        }
        delta
    }

    /// Marginals implied by the current messages.
    pub fn marginals(&self) -> Marginals {
        let k = self.k;
        let paths = (0..self.num_paths())
            .map(|p| {
                let w: Vec<f64> = self.evidence[p]
                    .iter()
                    .zip(&self.factor_to_path[p * k..(p + 1) * k])
                    .map(|(a, b)| a * b)
                    .collect();
                self.to_pmf(w)
            })
            .collect();
        let links = self
            .link_edges
            .iter()
            .enumerate()
            .map(|(l, edges)| {
                let mut w = self.prior[l].clone();
                for &e in edges {
                    let msg = &self.factor_to_link[e * k..(e + 1) * k];
                    w.iter_mut().zip(msg).for_each(|(a, b)| *a *= b);
                    normalize_floor(&mut w, 0.0);
                }
                self.to_pmf(w)
            })
            .collect();
        Marginals { paths, links }
    }

    pub fn path_marginal(&self, p: PathId) -> Pmf {
        let k = self.k;
        let w = self.evidence[p.0]
            .iter()
            .zip(&self.factor_to_path[p.0 * k..(p.0 + 1) * k])
            .map(|(a, b)| a * b)
            .collect();
        self.to_pmf(w)
    }

    fn to_pmf(&self, mut w: Vec<f64>) -> Pmf {
        normalize_floor(&mut w, 0.0);
        let mut pmf = Pmf::from_weights(self.domain, w).expect("non-negative weights");
        pmf.floor_and_normalize(PMF_FLOOR);
        pmf
    }
}

/// Writes `(1 - damping) * fresh / total + damping * old` into `old` and
/// returns the largest absolute change.
fn damp_into(old: &mut [f64], fresh: &[f64], total: f64, damping: f64) -> f64 {
    let (inv, fallback) = if total > 0.0 && total.is_finite() {
        (1.0 / total, None)
    } else {
        (0.0, Some(1.0 / fresh.len() as f64))
    };
    let mut delta: f64 = 0.0;
    for (o, &f) in old.iter_mut().zip(fresh) {
        let f = fallback.unwrap_or_else(|| floor_at(f * inv, MESSAGE_FLOOR));
        // both inputs are normalized, so the mixture already sums to one up
        // to the floor
        let mixed = floor_at((1.0 - damping) * f + damping * *o, MESSAGE_FLOOR);
        let change = (mixed - *o).abs();
        if change > delta {
            delta = change;
        }
        *o = mixed;
    }
    delta
}

/// `out = a * b`, rescaled to unit sum only when the total drifts far from
/// one. Returns the final total.
fn mul_rescaled(a: &[f64], b: &[f64], out: &mut [f64]) -> f64 {
    let mut total = 0.0;
    for ((o, &x), &y) in out.iter_mut().zip(a).zip(b) {
        *o = x * y;
        total += *o;
    }
    if (1e-100..=1e100).contains(&total) {
        total
    } else {
        normalize_floor(out, 0.0);
        1.0
    }
}

fn scale_floor(v: &mut [f64], total: f64, floor: f64) {
    if total > 0.0 && total.is_finite() {
        let inv = 1.0 / total;
        v.iter_mut().for_each(|x| *x = floor_at(*x * inv, floor));
    } else {
        let u = 1.0 / v.len() as f64;
        v.iter_mut().for_each(|x| *x = u);
    }
}

struct Scratch {
    prefix: Vec<f64>,
    suffix: Vec<f64>,
    survival: Vec<f64>,
    out: Vec<f64>,
}

impl Scratch {
    fn new(k: usize, width: usize) -> Self {
        Self {
            prefix: vec![0.0; (width + 1) * k],
            suffix: vec![0.0; (width + 1) * k],
            survival: vec![0.0; width * k],
            out: vec![0.0; k],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{reduce_to_logical, RawPath};

    fn dom(k: u32) -> BandwidthDomain {
        BandwidthDomain::new(1, k).unwrap()
    }

    fn pmf(k: u32, w: &[f64]) -> Pmf {
        Pmf::from_weights(dom(k), w.to_vec()).unwrap()
    }

    fn assert_close(a: &[f64], b: &[f64], tol: f64) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() <= tol, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn min_of_constants() {
        let d = dom(30);
        let out = min_factor_message_to_path(&[Pmf::point(d, 10).unwrap(), Pmf::point(d, 20).unwrap()]).unwrap();
        assert!((out.at(10) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn min_of_two_uniforms() {
        let u = Pmf::uniform(dom(4));
        let out = min_factor_message_to_path(&[u.clone(), u]).unwrap();
        assert_close(out.mass(), &[7.0 / 16.0, 5.0 / 16.0, 3.0 / 16.0, 1.0 / 16.0], 1e-15);
    }

    #[test]
    fn min_of_one_is_identity() {
        let p = pmf(5, &[0.1, 0.4, 0.2, 0.2, 0.1]);
        let out = min_factor_message_to_path(std::slice::from_ref(&p)).unwrap();
        assert_close(out.mass(), p.mass(), 1e-15);
    }

    #[test]
    fn link_message_forced_minimum() {
        let d = dom(40);
        let out = min_factor_message_to_link(&Pmf::point(d, 10).unwrap(), &[Pmf::point(d, 25).unwrap()]).unwrap();
        assert!((out.at(10) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn link_message_tied_minimum_is_flat_above() {
        let d = dom(40);
        let out = min_factor_message_to_link(&Pmf::point(d, 10).unwrap(), &[Pmf::point(d, 10).unwrap()]).unwrap();
        let expected = 1.0 / 31.0;
        for r in 1..=40 {
            let want = if r >= 10 { expected } else { 0.0 };
            assert!((out.at(r) - want).abs() < 1e-12, "rate {r}");
        }
    }

    #[test]
    fn domain_mismatch_is_rejected() {
        let a = Pmf::uniform(dom(4));
        let b = Pmf::uniform(dom(5));
        assert_eq!(min_factor_message_to_path(&[a.clone(), b.clone()]), Err(InferenceError::DomainMismatch));
        assert_eq!(min_factor_message_to_link(&a, &[b]), Err(InferenceError::DomainMismatch));
        assert_eq!(min_factor_message_to_path(&[]), Err(InferenceError::NoMessages));
    }

    fn dumbbell() -> Topology {
        reduce_to_logical(&[
            RawPath::new("p1", ["l1", "l3", "l4"]),
            RawPath::new("p2", ["l1", "l3", "l5"]),
            RawPath::new("p3", ["l2", "l3", "l4"]),
            RawPath::new("p4", ["l2", "l3", "l5"]),
        ])
        .unwrap()
    }

    #[test]
    fn dumbbell_graph_structure() {
        let t = dumbbell();
        let g = FactorGraph::build(&t, &Pmf::uniform(BandwidthDomain::default()));
        assert_eq!((g.num_links(), g.num_paths(), g.num_edges()), (5, 4, 12));
        let by_name = |p: usize| -> Vec<String> {
            g.factor_links(PathId(p)).iter().map(|l| t.link_name(*l).to_string()).collect()
        };
        assert_eq!(by_name(0), ["l1", "l3", "l4"]);
        assert_eq!(by_name(1), ["l1", "l3", "l5"]);
        assert_eq!(by_name(2), ["l2", "l3", "l4"]);
        assert_eq!(by_name(3), ["l2", "l3", "l5"]);
        for p in 0..4 {
            assert_eq!(g.evidence_count(PathId(p)), 0);
            assert!(g.evidence(PathId(p)).iter().all(|&e| (e - 0.01).abs() < 1e-15));
        }
    }

    #[test]
    fn single_link_chain_returns_prior() {
        let t = reduce_to_logical(&[RawPath::new("p", ["a"])]).unwrap();
        let prior = pmf(6, &[0.1, 0.3, 0.2, 0.2, 0.1, 0.1]);
        let mut g = FactorGraph::build(&t, &prior);
        let out = g.run_bp(&BpSchedule::exact());
        assert!(out.converged);
        assert_close(out.marginals.paths[0].mass(), prior.mass(), 1e-9);
        assert_close(out.marginals.links[0].mass(), prior.mass(), 1e-9);
    }

    #[test]
    fn no_evidence_gives_min_of_priors() {
        let t = dumbbell();
        let d = dom(20);
        let mut g = FactorGraph::build(&t, &Pmf::uniform(d));
        let out = g.run_bp(&BpSchedule::exact());
        // min of three iid uniforms on 1..=20: P(min >= r) = ((21 - r) / 20)^3
        let expected: Vec<f64> = (1..=20)
            .map(|r| {
                let s = |r: i32| (f64::from(21 - r) / 20.0).max(0.0).powi(3);
                s(r) - s(r + 1)
            })
            .collect();
        for p in &out.marginals.paths {
            assert_close(p.mass(), &expected, 1e-9);
        }
    }

    #[test]
    fn evidence_ratio_is_likelihood_curve() {
        let t = reduce_to_logical(&[RawPath::new("p", ["a"])]).unwrap();
        let d = BandwidthDomain::default();
        let model = LikelihoodModel::default();
        let mut g = FactorGraph::build(&t, &Pmf::uniform(d));
        let before = g.evidence(PathId(0)).to_vec();
        g.add_evidence(&Measurement { path: PathId(0), rate: 30, outcome: true, seq: 0 }, &model)
            .unwrap();
        let after = g.evidence(PathId(0));
        let curve = model.curve(d, true, 30);
        let scale = after[29] / before[29] / curve[29];
        for i in 0..d.len() {
            assert!((after[i] / before[i] - scale * curve[i]).abs() < 1e-12);
        }
        assert_eq!(curve[29], 0.5);
    }

    #[test]
    fn add_evidence_errors() {
        let t = dumbbell();
        let mut g = FactorGraph::build(&t, &Pmf::uniform(BandwidthDomain::default()));
        let model = LikelihoodModel::default();
        let bad_path = Measurement { path: PathId(9), rate: 10, outcome: true, seq: 0 };
        assert_eq!(g.add_evidence(&bad_path, &model), Err(InferenceError::UnknownPath(PathId(9))));
        let bad_rate = Measurement { path: PathId(0), rate: 101, outcome: true, seq: 0 };
        assert_eq!(g.add_evidence(&bad_rate, &model), Err(InferenceError::RateOutOfDomain(101)));
    }

    #[test]
    fn contradictory_pair_is_symmetric() {
        let t = reduce_to_logical(&[RawPath::new("p", ["a"])]).unwrap();
        let d = BandwidthDomain::default();
        let model = LikelihoodModel::default();
        let mut g = FactorGraph::build(&t, &Pmf::uniform(d));
        let r = 50;
        for z in [true, false] {
            g.add_evidence(&Measurement { path: PathId(0), rate: r, outcome: z, seq: 0 }, &model).unwrap();
        }
        let ev = g.evidence(PathId(0));
        for off in 1..=49u32 {
            let lo = ev[d.index(r - off).unwrap()];
            let hi = ev[d.index(r + off).unwrap()];
            assert!((lo - hi).abs() < 1e-15, "offset {off}");
        }
        // maximal at r itself
        let peak = ev[d.index(r).unwrap()];
        assert!(ev.iter().all(|&e| e <= peak + 1e-15));
        let prior_median = Pmf::uniform(d).median();
        let post = g.run_bp(&BpSchedule::default());
        assert_eq!(post.marginals.paths[0].median(), prior_median);
    }

    #[test]
    fn pass_at_top_shifts_mass_up() {
        let t = reduce_to_logical(&[RawPath::new("p", ["a"])]).unwrap();
        let d = dom(12);
        let model = LikelihoodModel::new(0.5, 0.05).unwrap();
        let mut g = FactorGraph::build(&t, &Pmf::uniform(d));
        let prior = g.run_bp(&BpSchedule::exact()).marginals.paths[0].cdf();
        g.add_evidence(&Measurement { path: PathId(0), rate: 12, outcome: true, seq: 0 }, &model).unwrap();
        let post = g.run_bp(&BpSchedule::exact()).marginals.paths[0].cdf();
        for (a, b) in post.iter().zip(&prior) {
            assert!(*a <= *b + 1e-12);
        }
    }

    #[test]
    fn fail_lowers_median() {
        let t = dumbbell();
        let d = BandwidthDomain::default();
        let model = LikelihoodModel::default();
        let mut g = FactorGraph::build(&t, &Pmf::uniform(d));
        let before = g.run_bp(&BpSchedule::default()).marginals.paths[0].median();
        g.add_evidence(&Measurement { path: PathId(0), rate: before, outcome: false, seq: 0 }, &model)
            .unwrap();
        let after = g.run_bp(&BpSchedule::default()).marginals.paths[0].median();
        assert!(after < before, "{after} !< {before}");
    }

    #[test]
    fn marginals_csv_rows() {
        let t = dumbbell();
        let d = dom(3);
        let mut g = FactorGraph::build(&t, &Pmf::uniform(d));
        let out = g.run_bp(&BpSchedule::default());
        let mut buf = Vec::new();
        out.marginals.write_csv(&t, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + (5 + 4) * 3);
        assert!(text.starts_with("kind,id,rate,mass\nlink,l1,1,"));
    }
}
