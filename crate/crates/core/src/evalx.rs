//! Partition comparison and analysis: normalized mutual information,
//! layer-averaged and pairwise NMI, association-matrix consensus
//! partitions, and metadata-vs-partition scores.

use std::collections::HashMap;
use std::hash::Hash;

use crate::error::{Error, Result};
use crate::network::{InterlayerTopology, Partition, TopologyKind};
use crate::optimizer::{louvain, OptimizerConfig, QuadraticInstance};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalization {
    /// I(a;b) / ((H(a) + H(b)) / 2)
    MeanEntropy,
    /// I(a;b) / H(a,b)
    JointEntropy,
}

fn index_labels<T: Hash + Eq>(v: &[T]) -> (Vec<usize>, usize) {
    let mut map = HashMap::new();
    let idx = v
        .iter()
        .map(|x| {
            let next = map.len();
            *map.entry(x).or_insert(next)
        })
        .collect();
    let k = map.len();
    (idx, k)
}

/// Normalized mutual information of two labelings, in [0, 1]. Natural
/// logs throughout (the normalization cancels the base). The 0/0 case of
/// two constant labelings is defined as 1.
pub fn nmi<A: Hash + Eq, B: Hash + Eq>(a: &[A], b: &[B], norm: Normalization) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Validation(format!(
            "labeling lengths differ: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Err(Error::Validation("labelings must be non-empty".into()));
    }
    let n = a.len() as f64;
    let (ai, ka) = index_labels(a);
    let (bi, kb) = index_labels(b);
    let mut joint = vec![vec![0.0f64; kb]; ka];
    let mut ca = vec![0.0f64; ka];
    let mut cb = vec![0.0f64; kb];
    for (&r, &c) in ai.iter().zip(&bi) {
        joint[r][c] += 1.0;
        ca[r] += 1.0;
        cb[c] += 1.0;
    }
    let h = |counts: &[f64]| -> f64 {
        counts
            .iter()
            .filter(|&&c| c > 0.0)
            .map(|&c| {
                let p = c / n;
                -p * p.ln()
            })
            .sum()
    };
    let ha = h(&ca);
    let hb = h(&cb);
    let mut mi = 0.0;
    let mut h_joint = 0.0;
    for (r, row) in joint.iter().enumerate() {
        for (c, &cnt) in row.iter().enumerate() {
            if cnt == 0.0 {
                continue;
            }
            let p = cnt / n;
            h_joint -= p * p.ln();
            mi += p * (p * n * n / (ca[r] * cb[c])).ln();
        }
    }
    let denom = match norm {
        Normalization::MeanEntropy => 0.5 * (ha + hb),
        Normalization::JointEntropy => h_joint,
    };
    if denom <= 0.0 {
        // both labelings constant: identical up to renaming
        return Ok(1.0);
    }
    Ok((mi / denom).clamp(0.0, 1.0))
}

/// Per-layer NMI averaged uniformly over layers.
pub fn layer_avg_nmi(p1: &Partition, p2: &Partition, norm: Normalization) -> Result<f64> {
    Ok(per_layer_nmi(p1, p2, norm)?.iter().sum::<f64>() / p1.num_layers() as f64)
}

pub fn per_layer_nmi(p1: &Partition, p2: &Partition, norm: Normalization) -> Result<Vec<f64>> {
    if p1.layer_sizes() != p2.layer_sizes() {
        return Err(Error::Validation("partition shapes differ".into()));
    }
    (0..p1.num_layers())
        .map(|t| nmi(p1.layer(t), p2.layer(t), norm))
        .collect()
}

/// Symmetric matrix of layer-averaged NMI values between all pairs of
/// partitions; unit diagonal.
pub fn pairwise_nmi_matrix(
    partitions: &[Partition],
    norm: Normalization,
) -> Result<Vec<Vec<f64>>> {
    if partitions.is_empty() {
        return Err(Error::Validation("need at least one partition".into()));
    }
    let n = partitions.len();
    let mut m = vec![vec![1.0; n]; n];
    for a in 0..n {
        for b in (a + 1)..n {
            let v = layer_avg_nmi(&partitions[a], &partitions[b], norm)?;
            m[a][b] = v;
            m[b][a] = v;
        }
    }
    Ok(m)
}

/// Builds the thresholded association objective over state nodes:
/// sum over co-classifiable pairs of (w_uv - tau) delta(g_u, g_v), where
/// w_uv is the co-classification frequency across the input partitions
/// (within-layer pairs, plus same-node pairs along the coupling) and
/// frequencies below tau are zeroed. The -tau penalty on every pair is
/// realized through the quadratic term with unit masses.
fn association_instance(
    partitions: &[Partition],
    topo: &InterlayerTopology,
    tau: f64,
) -> QuadraticInstance {
    let sizes = partitions[0].layer_sizes();
    let num_layers = sizes.len();
    let mut offsets = vec![0usize];
    for s in &sizes {
        offsets.push(offsets.last().unwrap() + s);
    }
    let n = *offsets.last().unwrap();
    let r = partitions.len() as f64;
    let mut adj: Vec<Vec<(u32, f64)>> = vec![Vec::new(); n];
    let add = |adj: &mut Vec<Vec<(u32, f64)>>, u: usize, v: usize, count: usize| {
        let w = count as f64 / r;
        if w >= tau && w > 0.0 {
            adj[u].push((v as u32, w));
            adj[v].push((u as u32, w));
        }
    };
    for t in 0..num_layers {
        for i in 0..sizes[t] {
            for j in (i + 1)..sizes[t] {
                let count = partitions
                    .iter()
                    .filter(|p| p.get(t, i) == p.get(t, j))
                    .count();
                add(&mut adj, offsets[t] + i, offsets[t] + j, count);
            }
        }
    }
    let mut coupled: Vec<(usize, usize, usize, usize)> = Vec::new(); // (s, t, node_s, node_t)
    match topo.kind {
        TopologyKind::TemporalChain => {
            for t in 1..num_layers {
                for i in 0..sizes[t] {
                    coupled.push((t - 1, t, i, i));
                }
            }
        }
        TopologyKind::MultilevelTree => {
            for t in 1..num_layers {
                for i in 0..sizes[t] {
                    coupled.push((t - 1, t, topo.parent(t, i), i));
                }
            }
        }
        TopologyKind::MultiplexAllPairs => {
            for s in 0..num_layers {
                for t in (s + 1)..num_layers {
                    for i in 0..sizes[s] {
                        coupled.push((s, t, i, i));
                    }
                }
            }
        }
    }
    for (s, t, i, j) in coupled {
        let count = partitions
            .iter()
            .filter(|p| p.get(s, i) == p.get(t, j))
            .count();
        add(&mut adj, offsets[s] + i, offsets[t] + j, count);
    }
    // -tau per unordered pair via the quadratic term: (tau/2) sum_r size_r^2
    // = tau * (unordered same-community pairs) + constant.
    let masses = vec![vec![(0u32, 1.0, 1.0)]; n];
    QuadraticInstance::new(adj, masses, vec![tau / 2.0], 0.0)
}

/// Consensus partition of a set of runs: threshold the co-classification
/// frequencies at `tau`, re-cluster the association structure once per
/// input run (distinct seeds), and repeat on the re-clusterings until
/// they all agree (capped at 20 rounds).
pub fn consensus_partition(
    partitions: &[Partition],
    topo: &InterlayerTopology,
    tau: f64,
    cfg: &OptimizerConfig,
) -> Result<Partition> {
    if partitions.len() < 2 {
        return Err(Error::Validation("consensus needs at least two partitions".into()));
    }
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::Validation("tau must lie in [0, 1]".into()));
    }
    let sizes = partitions[0].layer_sizes();
    if partitions.iter().any(|p| p.layer_sizes() != sizes) {
        return Err(Error::Validation("partitions have differing shapes".into()));
    }
    let mut current: Vec<Partition> = partitions.to_vec();
    for round in 0..20 {
        let first = current[0].canonicalize();
        if current.iter().all(|p| p.canonicalize() == first) {
            return Ok(first);
        }
        let inst = association_instance(&current, topo, tau);
        let n = sizes.iter().sum::<usize>();
        current = (0..current.len())
            .map(|r| {
                let cfg_r = OptimizerConfig {
                    rng_seed: cfg
                        .rng_seed
                        .wrapping_add((round * 1000 + r) as u64 + 1),
                    ..cfg.clone()
                };
                let (labels, _) = louvain(&inst, (0..n as u32).collect(), &cfg_r);
                let mut layers = Vec::with_capacity(sizes.len());
                let mut off = 0;
                for &s in &sizes {
                    layers.push(labels[off..off + s].to_vec());
                    off += s;
                }
                Partition::new(layers)
            })
            .collect();
    }
    Ok(current[0].canonicalize())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerMode {
    PerLayer,
    Flatten,
}

#[derive(Debug, Clone)]
pub struct MetadataNmi {
    /// Mean over layers (PerLayer) or the single flattened value.
    pub value: f64,
    pub per_layer: Option<Vec<f64>>,
}

/// NMI between a partition and per-physical-node metadata, broadcast
/// across layers.
pub fn metadata_nmi(
    p: &Partition,
    metadata: &[String],
    mode: LayerMode,
    norm: Normalization,
) -> Result<MetadataNmi> {
    if p.layer_sizes().iter().any(|&s| s != metadata.len()) {
        return Err(Error::Validation(format!(
            "metadata covers {} nodes but layers have sizes {:?}",
            metadata.len(),
            p.layer_sizes()
        )));
    }
    match mode {
        LayerMode::PerLayer => {
            let per: Vec<f64> = (0..p.num_layers())
                .map(|t| nmi(p.layer(t), metadata, norm))
                .collect::<Result<_>>()?;
            let value = per.iter().sum::<f64>() / per.len() as f64;
            Ok(MetadataNmi {
                value,
                per_layer: Some(per),
            })
        }
        LayerMode::Flatten => {
            let flat_p: Vec<u32> = (0..p.num_layers())
                .flat_map(|t| p.layer(t).iter().copied())
                .collect();
            let flat_m: Vec<&String> = (0..p.num_layers())
                .flat_map(|_| metadata.iter())
                .collect();
            Ok(MetadataNmi {
                value: nmi(&flat_p, &flat_m, norm)?,
                per_layer: None,
            })
        }
    }
}
