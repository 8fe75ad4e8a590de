//! Shared fixtures for the benchmarks.

use pab_core::simkit::{generate_topology, plant_truth, GeneratorParams, GroundTruth};
use pab_core::{BandwidthDomain, EstimatorConfig, FactorGraph, LikelihoodModel, Measurement, PathId, Pmf, Topology};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `n` random link messages over `1..=k` Mbps.
pub fn random_pmfs(n: usize, k: u32, seed: u64) -> Vec<Pmf> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = BandwidthDomain::new(1, k).unwrap();
    (0..n)
        .map(|_| Pmf::from_weights(d, (0..k).map(|_| rng.gen_range(0.01..1.0)).collect()).unwrap())
        .collect()
}

/// A generated topology with planted link bandwidths.
pub fn planted(nodes: usize, extra_links: usize, paths: usize, seed: u64) -> (Topology, GroundTruth) {
    let t = generate_topology(&GeneratorParams { nodes, extra_links, paths }, seed).unwrap();
    let truth = plant_truth(&t, EstimatorConfig::default().domain, &mut ChaCha8Rng::seed_from_u64(seed));
    (t, truth)
}

/// Factor graph over `t` holding `per_path` noiseless measurements per path.
pub fn graph_with_evidence(t: &Topology, truth: &GroundTruth, per_path: usize, seed: u64) -> FactorGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = EstimatorConfig::default().domain;
    let model = LikelihoodModel::default();
    let mut g = FactorGraph::build(t, &Pmf::uniform(d));
    let mut seq = 0;
    for p in 0..t.num_paths() {
        for _ in 0..per_path {
            let rate = rng.gen_range(d.b_min()..=d.b_max());
            let m = Measurement {
                path: PathId(p),
                rate,
                outcome: rate <= truth.path_bandwidth[p],
                seq,
            };
            g.add_evidence(&m, &model).unwrap();
            seq += 1;
        }
    }
    g
}
