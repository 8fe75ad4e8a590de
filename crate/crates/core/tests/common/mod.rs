#![allow(dead_code)]

use pab_core::domain::Link;
use pab_core::{BandwidthDomain, LikelihoodModel, LinkId, Measurement, Topology};
use rand::Rng;

pub fn domain(k: usize) -> BandwidthDomain {
    BandwidthDomain::new(1, k as u32).unwrap()
}

pub fn normalized(mut v: Vec<f64>) -> Vec<f64> {
    let s: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= s);
    v
}

pub fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Every assignment of `n` variables over `0..k`.
pub fn assignments(n: usize, k: usize) -> impl Iterator<Item = Vec<usize>> {
    (0..k.pow(n as u32)).map(move |mut code| {
        (0..n)
            .map(|_| {
                let d = code % k;
                code /= k;
                d
            })
            .collect()
    })
}

pub fn topology(n: usize, paths: &[Vec<usize>]) -> Topology {
    let links = (0..n)
        .map(|l| Link {
            name: format!("l{l}"),
            members: vec![format!("l{l}")],
        })
        .collect();
    let paths = paths
        .iter()
        .enumerate()
        .map(|(p, ls)| (format!("p{p}"), ls.iter().map(|&l| LinkId(l)).collect()))
        .collect();
    Topology::new(links, paths).unwrap()
}

/// Random incidence over at most four links, every link used.
pub fn random_incidence<R: Rng>(rng: &mut R, tree: bool) -> (usize, Vec<Vec<usize>>) {
    loop {
        let n = rng.gen_range(1..=4);
        let m = rng.gen_range(1..=4);
        let paths: Vec<Vec<usize>> = (0..m)
            .map(|_| {
                let mut ls: Vec<usize> = (0..n).filter(|_| rng.gen_bool(0.5)).collect();
                if ls.is_empty() {
                    ls.push(rng.gen_range(0..n));
                }
                ls
            })
            .collect();
        if !(0..n).all(|l| paths.iter().any(|ls| ls.contains(&l))) {
            continue;
        }
        if !tree || is_forest(n, &paths) {
            return (n, paths);
        }
    }
}

/// Whether the link/path bipartite graph has no cycle.
pub fn is_forest(n: usize, paths: &[Vec<usize>]) -> bool {
    fn find(parent: &mut [usize], x: usize) -> usize {
        if parent[x] != x {
            let r = find(parent, parent[x]);
            parent[x] = r;
        }
        parent[x]
    }
    let mut parent: Vec<usize> = (0..n + paths.len()).collect();
    for (p, ls) in paths.iter().enumerate() {
        for &l in ls {
            let (a, b) = (find(&mut parent, l), find(&mut parent, n + p));
            if a == b {
                return false;
            }
            parent[a] = b;
        }
    }
    true
}

/// Exact link and path marginals by summing the joint over all `k^n` link
/// assignments.
pub fn enumerate_marginals(
    n: usize,
    paths: &[Vec<usize>],
    priors: &[Vec<f64>],
    measurements: &[Measurement],
    model: &LikelihoodModel,
    k: usize,
) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let mut path_marg = vec![vec![0.0; k]; paths.len()];
    let mut link_marg = vec![vec![0.0; k]; n];
    for xs in assignments(n, k) {
        let mins: Vec<usize> = paths.iter().map(|ls| ls.iter().map(|&l| xs[l]).min().unwrap()).collect();
        let mut w: f64 = xs.iter().enumerate().map(|(l, &x)| priors[l][x]).product();
        for m in measurements {
            // grid index i is rate i + 1
            let y = (mins[m.path.0] + 1) as f64;
            w *= model.likelihood_of(m.outcome, y, f64::from(m.rate));
        }
        for (p, &y) in mins.iter().enumerate() {
            path_marg[p][y] += w;
        }
        for (l, &x) in xs.iter().enumerate() {
            link_marg[l][x] += w;
        }
    }
    (
        link_marg.into_iter().map(normalized).collect(),
        path_marg.into_iter().map(normalized).collect(),
    )
}
