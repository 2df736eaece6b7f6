//! Synthetic multilayer benchmarks: planted partitions with interlayer
//! label copying (temporal chain, multiplex permutation order, multilevel
//! tree) and planted-partition-model edge placement, plus the brute-force
//! permutation-weight statistic used to justify the uniform multiplex
//! coupling approximation.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::network::{LayerGraph, MultilayerNetwork, Partition};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EdgeModel {
    /// Explicit intra/inter community edge probabilities.
    Probabilities { p_in: f64, p_out: f64 },
    /// Mean degree c and ratio eps = p_out/p_in, converted through
    /// c = p_in (N/K - 1) + p_out N(K-1)/K.
    MeanDegree { c: f64, eps: f64 },
}

impl EdgeModel {
    pub fn probabilities(&self, n: usize, k: usize) -> Result<(f64, f64)> {
        let (p_in, p_out) = match *self {
            EdgeModel::Probabilities { p_in, p_out } => (p_in, p_out),
            EdgeModel::MeanDegree { c, eps } => {
                if !(0.0..=1.0).contains(&eps) {
                    return Err(Error::Validation("eps must lie in [0, 1]".into()));
                }
                let nf = n as f64;
                let kf = k as f64;
                let denom = (nf / kf - 1.0) + eps * nf * (kf - 1.0) / kf;
                let p_in = c / denom;
                (p_in, eps * p_in)
            }
        };
        if !(0.0..=1.0).contains(&p_in) || !(0.0..=1.0).contains(&p_out) {
            return Err(Error::Validation(format!(
                "edge probabilities out of range: p_in = {p_in}, p_out = {p_out}"
            )));
        }
        if p_out > p_in {
            return Err(Error::Validation("p_out must not exceed p_in".into()));
        }
        Ok((p_in, p_out))
    }
}

#[derive(Debug, Clone)]
pub struct GeneratorConfig {
    pub n: usize,
    pub t_layers: usize,
    pub k: usize,
    /// Copying probability per layer t in {2, ..., T}; index 0 is unused.
    pub eta: Vec<f64>,
    pub edges: EdgeModel,
    pub seed: u64,
}

impl GeneratorConfig {
    pub fn new(n: usize, t_layers: usize, k: usize, eta: f64, edges: EdgeModel) -> Self {
        GeneratorConfig {
            n,
            t_layers,
            k,
            eta: vec![eta; t_layers],
            edges,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_eta_per_layer(mut self, eta: Vec<f64>) -> Self {
        self.eta = eta;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.t_layers == 0 || self.k == 0 {
            return Err(Error::Validation("N, T, K must be positive".into()));
        }
        if self.eta.len() != self.t_layers {
            return Err(Error::Validation(format!(
                "expected {} eta values, got {}",
                self.t_layers,
                self.eta.len()
            )));
        }
        if self.eta.iter().any(|&e| !(0.0..=1.0).contains(&e)) {
            return Err(Error::Validation("eta values must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

fn uniform_label(k: usize, rng: &mut ChaCha8Rng) -> u32 {
    rng.random_range(0..k as u32)
}

/// Temporal label prior: layer-1 labels uniform over K; each later label
/// is copied from the previous layer with probability eta_t, else
/// resampled uniformly.
pub fn sample_temporal_partition(cfg: &GeneratorConfig, rng: &mut ChaCha8Rng) -> Partition {
    let mut layers: Vec<Vec<u32>> = Vec::with_capacity(cfg.t_layers);
    layers.push((0..cfg.n).map(|_| uniform_label(cfg.k, rng)).collect());
    for t in 1..cfg.t_layers {
        let prev = layers[t - 1].clone();
        let layer = prev
            .iter()
            .map(|&g| {
                if rng.random::<f64>() < cfg.eta[t] {
                    g
                } else {
                    uniform_label(cfg.k, rng)
                }
            })
            .collect();
        layers.push(layer);
    }
    Partition::new(layers)
}

/// Multiplex label prior: per node, draw a uniformly random layer order,
/// sample the first label uniformly, then copy-or-resample along that
/// order with probability eta (a single scalar; index 1 of `eta` is used).
pub fn sample_multiplex_partition(cfg: &GeneratorConfig, rng: &mut ChaCha8Rng) -> Partition {
    let t_layers = cfg.t_layers;
    let p = cfg.eta.get(1).copied().unwrap_or(cfg.eta[0]);
    let mut layers: Vec<Vec<u32>> = vec![vec![0; cfg.n]; t_layers];
    let mut order: Vec<usize> = (0..t_layers).collect();
    for i in 0..cfg.n {
        order.shuffle(rng);
        let mut g = uniform_label(cfg.k, rng);
        layers[order[0]][i] = g;
        for &t in &order[1..] {
            if rng.random::<f64>() >= p {
                g = uniform_label(cfg.k, rng);
            }
            layers[t][i] = g;
        }
    }
    Partition::new(layers)
}

/// Multilevel label prior over a parent-map hierarchy: the top layer has
/// `cfg.n` nodes with uniform labels; each child copies its parent's
/// label with probability eta_t, else resamples uniformly.
pub fn sample_multilevel_partition(
    cfg: &GeneratorConfig,
    parent_maps: &[Vec<u32>],
    rng: &mut ChaCha8Rng,
) -> Result<Partition> {
    if parent_maps.len() + 1 != cfg.t_layers {
        return Err(Error::Validation(format!(
            "expected {} parent maps, got {}",
            cfg.t_layers - 1,
            parent_maps.len()
        )));
    }
    let mut layers: Vec<Vec<u32>> = Vec::with_capacity(cfg.t_layers);
    layers.push((0..cfg.n).map(|_| uniform_label(cfg.k, rng)).collect());
    for (idx, map) in parent_maps.iter().enumerate() {
        let t = idx + 1;
        let layer = map
            .iter()
            .map(|&p| {
                if rng.random::<f64>() < cfg.eta[t] {
                    layers[t - 1][p as usize]
                } else {
                    uniform_label(cfg.k, rng)
                }
            })
            .collect();
        layers.push(layer);
    }
    Ok(Partition::new(layers))
}

/// Places edges independently per layer: each unordered pair of distinct
/// nodes gets an edge with probability p_in (same community) or p_out.
/// No self-loops, no degree correction.
pub fn place_ppm_edges(
    p: &Partition,
    cfg: &GeneratorConfig,
    rng: &mut ChaCha8Rng,
) -> Result<MultilayerNetwork> {
    let (p_in, p_out) = cfg.edges.probabilities(cfg.n, cfg.k)?;
    let mut layers = Vec::with_capacity(p.num_layers());
    for t in 0..p.num_layers() {
        let labels = p.layer(t);
        let n = labels.len();
        let mut layer = LayerGraph::new(n, false);
        for i in 0..n {
            for j in (i + 1)..n {
                let prob = if labels[i] == labels[j] { p_in } else { p_out };
                if rng.random::<f64>() < prob {
                    layer.add_edge(i, j)?;
                }
            }
        }
        layers.push(layer);
    }
    MultilayerNetwork::from_layers(layers, false)
}

/// The two-layer merge benchmark: 1000 nodes, 20 equal communities in
/// layer 1 merging pairwise into 10 in layer 2, p_in = 0.32, p_out = 0.1.
pub fn toy_merge_network(seed: u64) -> (MultilayerNetwork, Partition) {
    let n = 1000;
    let layer1: Vec<u32> = (0..n).map(|i| (i / 50) as u32).collect();
    let layer2: Vec<u32> = layer1.iter().map(|&g| g / 2).collect();
    let planted = Partition::new(vec![layer1, layer2]);
    let cfg = GeneratorConfig::new(
        n,
        2,
        20,
        0.0,
        EdgeModel::Probabilities {
            p_in: 0.32,
            p_out: 0.1,
        },
    );
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let net = place_ppm_edges(&planted, &cfg, &mut rng).expect("fixed valid probabilities");
    (net, planted)
}

/// Summary statistics of the permutation-weight deviation.
#[derive(Debug, Clone, Copy)]
pub struct QsigmaStats {
    pub mean: f64,
    pub std: f64,
}

/// Visits every permutation of 0..n in lexicographic order.
fn for_each_permutation(n: usize, mut f: impl FnMut(&[usize])) {
    let mut perm: Vec<usize> = (0..n).collect();
    loop {
        f(&perm);
        // next_permutation
        let Some(i) = (0..n.saturating_sub(1)).rev().find(|&i| perm[i] < perm[i + 1]) else {
            break;
        };
        let j = (i + 1..n).rev().find(|&j| perm[j] > perm[i]).unwrap();
        perm.swap(i, j);
        perm[i + 1..].reverse();
    }
}

/// Brute-force check of the uniform approximation sum_{sigma in
/// S_T^(s,t)} q_i^sigma ~ 1/T: for each trial, sample one node's label
/// sequence from the multiplex prior, compute the posterior permutation
/// weights q_i^sigma over all T! permutations, and sum those where layer
/// 1 appears immediately before layer 2 in the update order. Reports
/// mean and sample standard deviation of the deviation from 1/T.
pub fn qsigma_table(
    p: f64,
    k: usize,
    t_layers: usize,
    n_trials: usize,
    seed: u64,
) -> Result<QsigmaStats> {
    if !(3..=10).contains(&t_layers) {
        return Err(Error::Unsupported(
            "permutation statistic limited to 3 <= T <= 10 (T! enumeration)".into(),
        ));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Validation("p must lie in [0, 1]".into()));
    }
    if n_trials < 2 {
        return Err(Error::Validation("need at least 2 trials".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // The common (1-p)^(T-1) factor cancels against Z_i, leaving
    // products of 1 + pK/(1-p) per persisting step. p is clamped just
    // below 1 so the all-copy limit degrades to uniform weights instead
    // of dividing by zero.
    let pc = p.min(1.0 - 1e-9);
    let coef = pc * k as f64 / (1.0 - pc);
    let cfg = GeneratorConfig::new(
        1,
        t_layers,
        k,
        p,
        EdgeModel::Probabilities { p_in: 0.0, p_out: 0.0 },
    );
    let mut deviations = Vec::with_capacity(n_trials);
    for _ in 0..n_trials {
        let part = sample_multiplex_partition(&cfg, &mut rng);
        let g: Vec<u32> = (0..t_layers).map(|t| part.get(t, 0)).collect();
        let mut z = 0.0;
        let mut subset = 0.0;
        for_each_permutation(t_layers, |perm| {
            let mut w = 1.0;
            let mut adjacent = false;
            for step in 1..t_layers {
                let (a, b) = (perm[step - 1], perm[step]);
                if g[a] == g[b] {
                    w *= 1.0 + coef;
                }
                if a == 0 && b == 1 {
                    adjacent = true;
                }
            }
            z += w;
            if adjacent {
                subset += w;
            }
        });
        deviations.push(subset / z - 1.0 / t_layers as f64);
    }
    let mean = deviations.iter().sum::<f64>() / n_trials as f64;
    let var = deviations.iter().map(|d| (d - mean).powi(2)).sum::<f64>()
        / (n_trials - 1) as f64;
    Ok(QsigmaStats {
        mean,
        std: var.sqrt(),
    })
}
