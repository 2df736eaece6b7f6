//! Quality functions: multilayer modularity, persistence, and the
//! planted-partition log-posterior.
//!
//! Conventions (fixed here, relied on everywhere downstream):
//! - intralayer sums run over all ordered pairs (i, j) including i = j,
//!   with no 1/2 factor and no global 1/(2m) normalization, so directed
//!   and undirected evaluations coincide on symmetric inputs;
//! - temporal/multilevel interlayer terms count each coupled pair once
//!   (directed, layer t-1 into t); multiplex terms run over ordered
//!   pairs of distinct layers.

use crate::error::{Error, Result};
use crate::estimator::{LayeredSbmParams, SbmParams};
use crate::network::{
    Coupling, InterlayerTopology, MultilayerNetwork, Partition, TopologyKind,
};

/// Parameters of the multilayer modularity objective.
#[derive(Debug, Clone)]
pub struct ModularityParams {
    /// Per-layer resolutions, length T.
    pub gamma: Vec<f64>,
    /// Per-layer weights on the intralayer terms, length T.
    pub beta: Vec<f64>,
    pub coupling: Coupling,
    pub directed: bool,
}

impl ModularityParams {
    pub fn uniform(num_layers: usize, gamma: f64, omega: f64) -> Self {
        ModularityParams {
            gamma: vec![gamma; num_layers],
            beta: vec![1.0; num_layers],
            coupling: Coupling::Uniform(omega),
            directed: false,
        }
    }

    pub fn with_coupling(mut self, coupling: Coupling) -> Self {
        self.coupling = coupling;
        self
    }

    pub fn with_beta(mut self, beta: Vec<f64>) -> Self {
        self.beta = beta;
        self
    }

    pub fn with_directed(mut self, directed: bool) -> Self {
        self.directed = directed;
        self
    }

    pub fn validate(&self, net: &MultilayerNetwork) -> Result<()> {
        let num_layers = net.num_layers();
        if self.gamma.len() != num_layers || self.beta.len() != num_layers {
            return Err(Error::Validation(format!(
                "expected {num_layers} gamma/beta values, got {}/{}",
                self.gamma.len(),
                self.beta.len()
            )));
        }
        if self.gamma.iter().any(|&g| !(g >= 0.0) || !g.is_finite()) {
            return Err(Error::Validation("gamma values must be finite and >= 0".into()));
        }
        if self.beta.iter().any(|b| !b.is_finite()) {
            return Err(Error::Validation("beta values must be finite".into()));
        }
        if self.directed != net.directed() {
            return Err(Error::Validation(
                "directedness of params and network disagree".into(),
            ));
        }
        Ok(())
    }
}

/// Implicit per-layer modularity matrix B = A - gamma * (degree product)/(2m)
/// (directed: d_out d_in / m'). Stored as the adjacency plus the rank-one
/// correction's factors; entries are computed on demand.
#[derive(Debug)]
pub struct ModularityMatrix<'a> {
    net: &'a MultilayerNetwork,
    layer: usize,
    gamma: f64,
    /// gamma / (2 m_t) undirected, gamma / m'_t directed; 0 for empty layers.
    null_coeff: f64,
    /// True when m_t = 0 and the null term was defined away.
    pub empty_layer: bool,
}

impl<'a> ModularityMatrix<'a> {
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        let layer = self.net.layer(self.layer);
        let a = if layer.has_edge(i, j) { 1.0 } else { 0.0 };
        let null = if self.net.directed() {
            (layer.out_degree(i) * layer.in_degree(j)) as f64
        } else {
            (layer.degree(i) * layer.degree(j)) as f64
        };
        a - self.null_coeff * null
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn dim(&self) -> usize {
        self.net.layer(self.layer).num_nodes()
    }
}

/// Null-term coefficient for a layer: gamma/(2 m_t) or gamma/m'_t, and 0
/// when the layer has no edges (empty layers stay inert).
fn null_coeff(net: &MultilayerNetwork, t: usize, gamma: f64) -> f64 {
    let m = net.layer(t).edge_count();
    if m == 0 {
        0.0
    } else if net.directed() {
        gamma / m as f64
    } else {
        gamma / (2.0 * m as f64)
    }
}

pub fn modularity_matrix<'a>(
    net: &'a MultilayerNetwork,
    t: usize,
    gamma_t: f64,
) -> ModularityMatrix<'a> {
    ModularityMatrix {
        net,
        layer: t,
        gamma: gamma_t,
        null_coeff: null_coeff(net, t, gamma_t),
        empty_layer: net.layer(t).edge_count() == 0,
    }
}

/// Intralayer modularity of one layer: sum over all ordered pairs (i, j),
/// diagonal included, of B_ij * delta(g_i, g_j). Computed incrementally
/// via community degree sums rather than the quadratic double sum.
pub fn intra_modularity_layer(
    net: &MultilayerNetwork,
    t: usize,
    labels: &[u32],
    gamma_t: f64,
) -> f64 {
    let layer = net.layer(t);
    let coeff = null_coeff(net, t, gamma_t);
    let mut edge_term = 0.0;
    for (i, j) in layer.edges() {
        if labels[i] != labels[j as usize] {
            continue;
        }
        // Ordered-pair sum: a symmetric off-diagonal edge appears twice,
        // a self-loop entry once.
        edge_term += if !net.directed() && i != j { 2.0 } else { 1.0 };
    }
    let mut null_term = 0.0;
    if coeff != 0.0 {
        let max_label = labels.iter().copied().max().unwrap_or(0) as usize;
        if net.directed() {
            let mut kout = vec![0.0f64; max_label + 1];
            let mut kin = vec![0.0f64; max_label + 1];
            for i in 0..layer.num_nodes() {
                kout[labels[i] as usize] += layer.out_degree(i) as f64;
                kin[labels[i] as usize] += layer.in_degree(i) as f64;
            }
            null_term = kout.iter().zip(&kin).map(|(o, i)| o * i).sum();
        } else {
            let mut kappa = vec![0.0f64; max_label + 1];
            for i in 0..layer.num_nodes() {
                kappa[labels[i] as usize] += layer.degree(i) as f64;
            }
            null_term = kappa.iter().map(|k| k * k).sum();
        }
    }
    edge_term - coeff * null_term
}

/// Interlayer persistence/agreement term of the modularity objective
/// under the given coupling weights.
fn interlayer_term(
    topo: &InterlayerTopology,
    coupling: &Coupling,
    p: &Partition,
) -> f64 {
    let num_layers = p.num_layers();
    let mut total = 0.0;
    match topo.kind {
        TopologyKind::TemporalChain => {
            for t in 1..num_layers {
                let w = coupling.weight(t - 1, t);
                if w == 0.0 {
                    continue;
                }
                let agree = p
                    .layer(t)
                    .iter()
                    .zip(p.layer(t - 1))
                    .filter(|(a, b)| a == b)
                    .count();
                total += w * agree as f64;
            }
        }
        TopologyKind::MultilevelTree => {
            for t in 1..num_layers {
                let w = coupling.weight(t - 1, t);
                if w == 0.0 {
                    continue;
                }
                let agree = (0..p.layer(t).len())
                    .filter(|&i| p.get(t, i) == p.get(t - 1, topo.parent(t, i)))
                    .count();
                total += w * agree as f64;
            }
        }
        TopologyKind::MultiplexAllPairs => {
            for s in 0..num_layers {
                for t in 0..num_layers {
                    if s == t {
                        continue;
                    }
                    let w = coupling.weight(s, t);
                    if w == 0.0 {
                        continue;
                    }
                    let agree = p
                        .layer(s)
                        .iter()
                        .zip(p.layer(t))
                        .filter(|(a, b)| a == b)
                        .count();
                    total += w * agree as f64;
                }
            }
        }
    }
    total
}

/// Multilayer modularity Q = sum_t beta_t * Q_intra^t + interlayer term.
pub fn multilayer_modularity(
    net: &MultilayerNetwork,
    topo: &InterlayerTopology,
    p: &Partition,
    params: &ModularityParams,
) -> Result<f64> {
    params.validate(net)?;
    topo.validate(net)?;
    if !p.matches(net) {
        return Err(Error::Validation(
            "partition shape does not match the network".into(),
        ));
    }
    let mut q = 0.0;
    for t in 0..net.num_layers() {
        q += params.beta[t] * intra_modularity_layer(net, t, p.layer(t), params.gamma[t]);
    }
    q += interlayer_term(topo, &params.coupling, p);
    Ok(q)
}

/// Number of node copies keeping their label across the coupled layer:
/// temporal counts consecutive-layer agreements, multilevel agreements
/// with the parent. Not defined for multiplex topologies.
pub fn persistence(p: &Partition, topo: &InterlayerTopology) -> Result<u64> {
    Ok(persistence_per_layer(p, topo)?.iter().sum())
}

/// Persistence broken out per layer t in {2, ..., T}; index 0 holds the
/// count for layer 2.
pub fn persistence_per_layer(p: &Partition, topo: &InterlayerTopology) -> Result<Vec<u64>> {
    match topo.kind {
        TopologyKind::TemporalChain => Ok((1..p.num_layers())
            .map(|t| {
                p.layer(t)
                    .iter()
                    .zip(p.layer(t - 1))
                    .filter(|(a, b)| a == b)
                    .count() as u64
            })
            .collect()),
        TopologyKind::MultilevelTree => Ok((1..p.num_layers())
            .map(|t| {
                (0..p.layer(t).len())
                    .filter(|&i| p.get(t, i) == p.get(t - 1, topo.parent(t, i)))
                    .count() as u64
            })
            .collect()),
        TopologyKind::MultiplexAllPairs => Err(Error::Unsupported(
            "persistence is defined for temporal/multilevel topologies; multiplex uses pairwise agreement".into(),
        )),
    }
}

/// Count of label agreements over ordered pairs of distinct layers,
/// summed over nodes: sum_i sum_{s != t} delta(g_i^s, g_i^t).
pub fn pairwise_agreement_count(p: &Partition) -> u64 {
    let num_layers = p.num_layers();
    let mut total = 0u64;
    for s in 0..num_layers {
        for t in 0..num_layers {
            if s == t {
                continue;
            }
            total += p
                .layer(s)
                .iter()
                .zip(p.layer(t))
                .filter(|(a, b)| a == b)
                .count() as u64;
        }
    }
    total
}

fn coupling_coefficient(p: f64, k: usize) -> Result<f64> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::Numerical(format!(
            "copying probability must lie in [0, 1); got {p} (the p = 1 limit needs omega_max handling)"
        )));
    }
    Ok((1.0 + p * k as f64 / (1.0 - p)).ln())
}

/// Planted-partition log-posterior of a partition, up to additive
/// constants independent of the labels:
/// (ln th_in - ln th_out) * Q_intra(gamma from theta) plus
/// ln(1 + pK/(1-p)) times persistence (temporal/multilevel) or 1/T times
/// the pairwise agreement count (multiplex).
pub fn log_posterior(
    net: &MultilayerNetwork,
    topo: &InterlayerTopology,
    p: &Partition,
    sbm: &SbmParams,
) -> Result<f64> {
    sbm.validate()?;
    if !p.matches(net) {
        return Err(Error::Validation(
            "partition shape does not match the network".into(),
        ));
    }
    let dlog = sbm.theta_in.ln() - sbm.theta_out.ln();
    let gamma = crate::estimator::gamma_from_theta(sbm.theta_in, sbm.theta_out)?;
    let mut intra = 0.0;
    for t in 0..net.num_layers() {
        intra += intra_modularity_layer(net, t, p.layer(t), gamma);
    }
    let coupling = coupling_coefficient(sbm.p, sbm.k)?;
    let inter = match topo.kind {
        TopologyKind::TemporalChain | TopologyKind::MultilevelTree => {
            coupling * persistence(p, topo)? as f64
        }
        TopologyKind::MultiplexAllPairs => {
            coupling / net.num_layers() as f64 * pairwise_agreement_count(p) as f64
        }
    };
    Ok(dlog * intra + inter)
}

/// Layer-dependent log-posterior (temporal/multilevel), unnormalized:
/// sum_t (ln th_in^t - ln th_out^t) * Q_intra^t(gamma_t) +
/// sum_t ln(1 + p_t K_t/(1-p_t)) * Pers_t. Dividing by the mean log-ratio
/// recovers the (gamma_t, omega_t, beta_t) modularity form.
pub fn log_posterior_layered(
    net: &MultilayerNetwork,
    topo: &InterlayerTopology,
    p: &Partition,
    sbm: &LayeredSbmParams,
) -> Result<f64> {
    sbm.validate(net.num_layers())?;
    if topo.kind == TopologyKind::MultiplexAllPairs {
        return Err(Error::Unsupported(
            "layer-dependent posterior applies to temporal/multilevel topologies".into(),
        ));
    }
    if !p.matches(net) {
        return Err(Error::Validation(
            "partition shape does not match the network".into(),
        ));
    }
    let mut total = 0.0;
    for t in 0..net.num_layers() {
        let dlog = sbm.theta_in[t].ln() - sbm.theta_out[t].ln();
        let gamma = crate::estimator::gamma_from_theta(sbm.theta_in[t], sbm.theta_out[t])?;
        total += dlog * intra_modularity_layer(net, t, p.layer(t), gamma);
    }
    let pers = persistence_per_layer(p, topo)?;
    for t in 1..net.num_layers() {
        total += coupling_coefficient(sbm.p[t], sbm.k[t])? * pers[t - 1] as f64;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::MultilayerNetwork;

    fn single_edge() -> MultilayerNetwork {
        MultilayerNetwork::from_edges(1, 2, false, &[(0, 0, 1)]).unwrap()
    }

    #[test]
    fn modularity_matrix_single_edge() {
        let net = single_edge();
        let b = modularity_matrix(&net, 0, 1.0);
        let expected = [[-0.5, 0.5], [0.5, -0.5]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((b.entry(i, j) - expected[i][j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn gamma_zero_gives_adjacency() {
        let net = MultilayerNetwork::from_edges(1, 3, false, &[(0, 0, 1), (0, 1, 2)]).unwrap();
        let b = modularity_matrix(&net, 0, 0.0);
        for i in 0..3 {
            for j in 0..3 {
                let a = if net.layer(0).has_edge(i, j) { 1.0 } else { 0.0 };
                assert_eq!(b.entry(i, j), a);
            }
        }
    }

    #[test]
    fn directed_two_cycle_entry() {
        let net = MultilayerNetwork::from_edges(1, 2, true, &[(0, 0, 1), (0, 1, 0)]).unwrap();
        let b = modularity_matrix(&net, 0, 1.0);
        assert!((b.entry(0, 1) - 0.5).abs() < 1e-12);
        assert!((b.entry(0, 0) + 0.5).abs() < 1e-12);
    }

    #[test]
    fn empty_layer_matrix_is_adjacency() {
        let net = MultilayerNetwork::from_edges(1, 3, false, &[]).unwrap();
        let b = modularity_matrix(&net, 0, 1.0);
        assert!(b.empty_layer);
        assert_eq!(b.entry(0, 1), 0.0);
    }

    #[test]
    fn single_edge_q_together_and_apart() {
        let net = single_edge();
        let topo = InterlayerTopology::temporal(Coupling::Uniform(0.0));
        let params = ModularityParams::uniform(1, 1.0, 0.0);
        let together = Partition::new(vec![vec![0, 0]]);
        let apart = Partition::new(vec![vec![0, 1]]);
        let q1 = multilayer_modularity(&net, &topo, &together, &params).unwrap();
        let q2 = multilayer_modularity(&net, &topo, &apart, &params).unwrap();
        assert!((q1 - 0.0).abs() < 1e-12);
        assert!((q2 + 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_omega_decouples_layers() {
        let net = MultilayerNetwork::from_edges(
            2,
            4,
            false,
            &[(0, 0, 1), (0, 2, 3), (1, 0, 2), (1, 1, 3)],
        )
        .unwrap();
        let topo = InterlayerTopology::temporal(Coupling::Uniform(0.0));
        let params = ModularityParams::uniform(2, 1.0, 0.0);
        let p = Partition::new(vec![vec![0, 0, 1, 1], vec![0, 1, 0, 1]]);
        let q = multilayer_modularity(&net, &topo, &p, &params).unwrap();
        let per_layer: f64 = (0..2)
            .map(|t| intra_modularity_layer(&net, t, p.layer(t), 1.0))
            .sum();
        assert!((q - per_layer).abs() < 1e-12);
    }

    #[test]
    fn identical_labels_interlayer_term() {
        let n = 5;
        let t_layers = 4;
        let net = MultilayerNetwork::from_edges(t_layers, n, false, &[]).unwrap();
        let omega = 0.7;
        let topo = InterlayerTopology::temporal(Coupling::Uniform(omega));
        let params = ModularityParams::uniform(t_layers, 1.0, omega);
        let p = Partition::new(vec![vec![0; n]; t_layers]);
        let q = multilayer_modularity(&net, &topo, &p, &params).unwrap();
        assert!((q - omega * (n * (t_layers - 1)) as f64).abs() < 1e-12);
    }

    #[test]
    fn multiplex_counts_ordered_pairs() {
        let n = 3;
        let net = MultilayerNetwork::from_edges(3, n, false, &[]).unwrap();
        let omega = 0.5;
        let topo = InterlayerTopology::multiplex(Coupling::Uniform(omega));
        let params =
            ModularityParams::uniform(3, 1.0, omega).with_coupling(Coupling::Uniform(omega));
        let p = Partition::new(vec![vec![0; n]; 3]);
        let q = multilayer_modularity(&net, &topo, &p, &params).unwrap();
        // 6 ordered layer pairs, n agreements each.
        assert!((q - omega * 6.0 * n as f64).abs() < 1e-12);
    }

    #[test]
    fn persistence_counts() {
        let topo = InterlayerTopology::temporal(Coupling::Uniform(1.0));
        let same = Partition::new(vec![vec![0, 1], vec![0, 1], vec![0, 1]]);
        assert_eq!(persistence(&same, &topo).unwrap(), 4);
        let distinct = Partition::new(vec![vec![0, 1], vec![2, 3], vec![4, 5]]);
        assert_eq!(persistence(&distinct, &topo).unwrap(), 0);
        // node 0 persists twice, node 1 once
        let mixed = Partition::new(vec![vec![0, 1], vec![0, 1], vec![0, 9]]);
        assert_eq!(persistence(&mixed, &topo).unwrap(), 3);
    }

    #[test]
    fn multilevel_persistence_follows_parents() {
        use crate::network::LayerGraph;
        let layers = vec![LayerGraph::new(2, false), LayerGraph::new(4, false)];
        let net = MultilayerNetwork::from_layers(layers, false).unwrap();
        let topo = InterlayerTopology::multilevel(vec![vec![0, 0, 1, 1]], Coupling::Uniform(1.0));
        topo.validate(&net).unwrap();
        let p = Partition::new(vec![vec![0, 1], vec![0, 0, 1, 0]]);
        assert_eq!(persistence(&p, &topo).unwrap(), 3);
    }

    #[test]
    fn posterior_difference_tracks_q_difference() {
        let net = MultilayerNetwork::from_edges(
            2,
            4,
            false,
            &[(0, 0, 1), (0, 1, 2), (0, 2, 3), (1, 0, 1), (1, 0, 3)],
        )
        .unwrap();
        let topo = InterlayerTopology::temporal(Coupling::Uniform(1.0));
        let sbm = SbmParams {
            theta_in: 1.6,
            theta_out: 0.4,
            p: 0.6,
            k: 2,
        };
        let dlog = sbm.theta_in.ln() - sbm.theta_out.ln();
        let gamma = crate::estimator::gamma_from_theta(sbm.theta_in, sbm.theta_out).unwrap();
        let omega =
            crate::estimator::omega_temporal(sbm.theta_in, sbm.theta_out, sbm.p, sbm.k, 1000.0)
                .unwrap();
        let params = ModularityParams::uniform(2, gamma, omega);
        let g1 = Partition::new(vec![vec![0, 0, 1, 1], vec![0, 0, 1, 1]]);
        let g2 = Partition::new(vec![vec![0, 1, 0, 1], vec![1, 1, 0, 0]]);
        let dq = multilayer_modularity(&net, &topo, &g1, &params).unwrap()
            - multilayer_modularity(&net, &topo, &g2, &params).unwrap();
        let dlp = log_posterior(&net, &topo, &g1, &sbm).unwrap()
            - log_posterior(&net, &topo, &g2, &sbm).unwrap();
        assert!((dlp - dlog * dq).abs() < 1e-9, "dlp={dlp} dlog*dq={}", dlog * dq);
    }

    #[test]
    fn p_one_rejected() {
        let net = single_edge();
        let topo = InterlayerTopology::temporal(Coupling::Uniform(1.0));
        let sbm = SbmParams {
            theta_in: 1.5,
            theta_out: 0.5,
            p: 1.0,
            k: 2,
        };
        let p = Partition::new(vec![vec![0, 0]]);
        assert!(log_posterior(&net, &topo, &p, &sbm).is_err());
    }

    #[test]
    fn directed_matches_undirected_on_symmetric_input() {
        let edges = [(0usize, 0usize, 1usize), (0, 1, 2), (0, 2, 3), (0, 0, 3)];
        let undirected = MultilayerNetwork::from_edges(1, 4, false, &edges).unwrap();
        let mut both_ways: Vec<(usize, usize, usize)> = Vec::new();
        for &(t, i, j) in &edges {
            both_ways.push((t, i, j));
            both_ways.push((t, j, i));
        }
        let directed = MultilayerNetwork::from_edges(1, 4, true, &both_ways).unwrap();
        let p = Partition::new(vec![vec![0, 0, 1, 1]]);
        for gamma in [0.5, 1.0, 1.7] {
            let qu = intra_modularity_layer(&undirected, 0, p.layer(0), gamma);
            let qd = intra_modularity_layer(&directed, 0, p.layer(0), gamma);
            assert!((qu - qd).abs() < 1e-12, "gamma={gamma}: {qu} vs {qd}");
        }
    }
}
