//! Planted-partition parameter estimation and the closed-form conversion
//! from SBM parameters (theta_in, theta_out, p, K) to modularity
//! parameters (gamma, omega, beta).

use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::network::{Coupling, InterlayerTopology, MultilayerNetwork, Partition};
use crate::quality::{pairwise_agreement_count, persistence_per_layer};

/// Default cap on interlayer coupling, reached in the p -> 1 limit.
pub const OMEGA_MAX_DEFAULT: f64 = 1000.0;
/// theta_out is floored at this fraction of theta_in before taking logs,
/// so partitions with no inter-community edges still yield finite gamma/omega.
pub const THETA_OUT_FLOOR_RATIO: f64 = 1e-6;
/// Copying probabilities are clamped below 1 by this margin before the
/// log(1 + pK/(1-p)) coupling computation.
pub const P_CLAMP_MARGIN: f64 = 1e-9;

/// Global planted-partition parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SbmParams {
    pub theta_in: f64,
    pub theta_out: f64,
    /// Copying probability of the interlayer label prior.
    pub p: f64,
    /// Number of communities.
    pub k: usize,
}

impl SbmParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta_in > 0.0) || !(self.theta_out > 0.0) {
            return Err(Error::Validation("theta values must be positive".into()));
        }
        if self.theta_out > self.theta_in {
            return Err(Error::Validation(
                "assortative use requires theta_out <= theta_in".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.p) {
            return Err(Error::Validation("p must lie in [0, 1]".into()));
        }
        if self.k == 0 {
            return Err(Error::Validation("K must be at least 1".into()));
        }
        Ok(())
    }
}

/// Per-layer planted-partition parameters. All vectors have length T;
/// `p[0]` is unused (copying starts at the second layer).
#[derive(Debug, Clone, PartialEq)]
pub struct LayeredSbmParams {
    pub theta_in: Vec<f64>,
    pub theta_out: Vec<f64>,
    pub p: Vec<f64>,
    pub k: Vec<usize>,
}

impl LayeredSbmParams {
    pub fn validate(&self, num_layers: usize) -> Result<()> {
        for v in [&self.theta_in, &self.theta_out] {
            if v.len() != num_layers {
                return Err(Error::Validation("per-layer theta length mismatch".into()));
            }
            if v.iter().any(|&x| !(x > 0.0)) {
                return Err(Error::Validation("theta values must be positive".into()));
            }
        }
        if self.p.len() != num_layers || self.k.len() != num_layers {
            return Err(Error::Validation("per-layer p/K length mismatch".into()));
        }
        if self.p[1..].iter().any(|&p| !(0.0..=1.0).contains(&p)) {
            return Err(Error::Validation("p values must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Sufficient statistics of a (network, partition) pair for the theta
/// estimators.
#[derive(Debug, Clone)]
pub struct PartitionStats {
    /// Intra-community edge mass per layer: 2 m_in^t undirected, arc count directed.
    pub intra_mass: Vec<f64>,
    /// Inter-community edge mass per layer (same convention).
    pub inter_mass: Vec<f64>,
    /// Null-model mass per layer: sum_r (kappa_r^t)^2 / (2 m_t) undirected,
    /// sum_r kappa_out kappa_in / m'_t directed. Zero for empty layers.
    pub null_mass: Vec<f64>,
    /// Total edge mass per layer: 2 m_t or m'_t.
    pub total_mass: Vec<f64>,
}

pub fn partition_stats(net: &MultilayerNetwork, p: &Partition) -> Result<PartitionStats> {
    if !p.matches(net) {
        return Err(Error::Validation(
            "partition shape does not match the network".into(),
        ));
    }
    let mut stats = PartitionStats {
        intra_mass: Vec::new(),
        inter_mass: Vec::new(),
        null_mass: Vec::new(),
        total_mass: Vec::new(),
    };
    for (t, layer) in net.layers().iter().enumerate() {
        let labels = p.layer(t);
        let mut intra = 0.0;
        for (i, j) in layer.edges() {
            if labels[i] == labels[j] {
                // Ordered-pair mass: off-diagonal undirected edges count twice.
                intra += if !net.directed() && i != j { 2.0 } else { 1.0 };
            }
        }
        let total = if net.directed() {
            layer.edge_count() as f64
        } else {
            2.0 * layer.edge_count() as f64
        };
        let null = if layer.edge_count() == 0 {
            0.0
        } else {
            let max_label = labels.iter().copied().max().unwrap_or(0) as usize;
            if net.directed() {
                let mut kout = vec![0.0f64; max_label + 1];
                let mut kin = vec![0.0f64; max_label + 1];
                for i in 0..layer.num_nodes() {
                    kout[labels[i] as usize] += layer.out_degree(i) as f64;
                    kin[labels[i] as usize] += layer.in_degree(i) as f64;
                }
                kout.iter().zip(&kin).map(|(o, i)| o * i).sum::<f64>() / total
            } else {
                let mut kappa = vec![0.0f64; max_label + 1];
                for i in 0..layer.num_nodes() {
                    kappa[labels[i] as usize] += layer.degree(i) as f64;
                }
                kappa.iter().map(|k| k * k).sum::<f64>() / total
            }
        };
        stats.intra_mass.push(intra);
        stats.inter_mass.push(total - intra);
        stats.null_mass.push(null);
        stats.total_mass.push(total);
    }
    Ok(stats)
}

/// Connection-propensity estimates, with a flag recording whether
/// theta_out had to be floored (degenerate partitions with little or no
/// inter-community structure).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaEstimate {
    pub theta_in: f64,
    pub theta_out: f64,
    pub clamped: bool,
}

fn theta_from_masses(intra: f64, inter: f64, null: f64, total: f64) -> Result<ThetaEstimate> {
    if total <= 0.0 {
        return Err(Error::Numerical(
            "theta estimation needs at least one edge".into(),
        ));
    }
    if null <= 0.0 {
        return Err(Error::Numerical(
            "degenerate null mass in theta estimation".into(),
        ));
    }
    let theta_in = intra / null;
    let out_denom = total - null;
    let mut clamped = false;
    let raw_out = if out_denom <= f64::EPSILON * total {
        clamped = true;
        0.0
    } else {
        inter / out_denom
    };
    let floor = THETA_OUT_FLOOR_RATIO * theta_in;
    let theta_out = if raw_out < floor {
        clamped = true;
        floor
    } else {
        raw_out
    };
    if !(theta_in > 0.0) {
        return Err(Error::Numerical(
            "estimated theta_in is not positive (no intra-community edges)".into(),
        ));
    }
    Ok(ThetaEstimate {
        theta_in,
        theta_out,
        clamped,
    })
}

/// Pooled (theta_in, theta_out) estimate over all layers.
pub fn estimate_theta(net: &MultilayerNetwork, p: &Partition) -> Result<ThetaEstimate> {
    let s = partition_stats(net, p)?;
    theta_from_masses(
        s.intra_mass.iter().sum(),
        s.inter_mass.iter().sum(),
        s.null_mass.iter().sum(),
        s.total_mass.iter().sum(),
    )
}

/// Per-layer theta estimates. Layers without edges are reported as None.
pub fn estimate_theta_per_layer(
    net: &MultilayerNetwork,
    p: &Partition,
) -> Result<Vec<Option<ThetaEstimate>>> {
    let s = partition_stats(net, p)?;
    Ok((0..net.num_layers())
        .map(|t| {
            theta_from_masses(s.intra_mass[t], s.inter_mass[t], s.null_mass[t], s.total_mass[t])
                .ok()
        })
        .collect())
}

/// Number of distinct community labels over all node-layer pairs.
pub fn estimate_k(p: &Partition) -> usize {
    p.num_communities()
}

/// Distinct labels within each layer.
pub fn estimate_k_per_layer(p: &Partition) -> Vec<usize> {
    (0..p.num_layers())
        .map(|t| p.layer(t).iter().copied().collect::<HashSet<_>>().len())
        .collect()
}

fn p_from_agreement(agreement: f64, k: usize) -> Result<f64> {
    if k < 2 {
        return Err(Error::Numerical(
            "p estimation needs K >= 2; with a single community treat omega as 0".into(),
        ));
    }
    let base = 1.0 / k as f64;
    Ok(((agreement - base) / (1.0 - base)).clamp(0.0, 1.0))
}

/// Temporal copying probability from the persistence fraction:
/// p = [Pers/(N(T-1)) - 1/K] / (1 - 1/K), clamped to [0, 1].
pub fn estimate_p_temporal(p: &Partition, k: usize) -> Result<f64> {
    if p.num_layers() < 2 {
        return Err(Error::Validation("temporal p estimation needs T >= 2".into()));
    }
    let topo = InterlayerTopology::temporal(Coupling::Uniform(0.0));
    let pers: u64 = persistence_per_layer(p, &topo)?.iter().sum();
    let trials: usize = p.layer_sizes()[1..].iter().sum();
    p_from_agreement(pers as f64 / trials as f64, k)
}

/// Per-layer temporal copying probabilities p_t for t in {2, ..., T}
/// (index 0 holds p_2), using the layer-t persistence fraction and K_t.
/// Layers with K_t = 1 yield p_t = 0 (no coupling information).
pub fn estimate_p_temporal_layered(p: &Partition, k_per_layer: &[usize]) -> Result<Vec<f64>> {
    if p.num_layers() < 2 {
        return Err(Error::Validation("temporal p estimation needs T >= 2".into()));
    }
    if k_per_layer.len() != p.num_layers() {
        return Err(Error::Validation("per-layer K length mismatch".into()));
    }
    let topo = InterlayerTopology::temporal(Coupling::Uniform(0.0));
    let pers = persistence_per_layer(p, &topo)?;
    (1..p.num_layers())
        .map(|t| {
            if k_per_layer[t] < 2 {
                return Ok(0.0);
            }
            p_from_agreement(pers[t - 1] as f64 / p.layer(t).len() as f64, k_per_layer[t])
        })
        .collect()
}

/// Multilevel copying probability: persistence measured against parents,
/// normalized by the number of child node-layer pairs.
pub fn estimate_p_multilevel(p: &Partition, topo: &InterlayerTopology, k: usize) -> Result<f64> {
    let pers: u64 = persistence_per_layer(p, topo)?.iter().sum();
    let trials: usize = p.layer_sizes()[1..].iter().sum();
    p_from_agreement(pers as f64 / trials as f64, k)
}

/// Per-layer multilevel variant of [`estimate_p_temporal_layered`].
pub fn estimate_p_multilevel_layered(
    p: &Partition,
    topo: &InterlayerTopology,
    k_per_layer: &[usize],
) -> Result<Vec<f64>> {
    if k_per_layer.len() != p.num_layers() {
        return Err(Error::Validation("per-layer K length mismatch".into()));
    }
    let pers = persistence_per_layer(p, topo)?;
    (1..p.num_layers())
        .map(|t| {
            if k_per_layer[t] < 2 {
                return Ok(0.0);
            }
            p_from_agreement(pers[t - 1] as f64 / p.layer(t).len() as f64, k_per_layer[t])
        })
        .collect()
}

/// Expected pairwise label agreement of the permutation-order multiplex
/// prior: P(g_i^s = g_i^t) = [2(1 - 1/K)/(T(T-1))] sum_{n=1}^{T-1} p^n (T-n) + 1/K.
pub fn multiplex_agreement(p: f64, k: usize, t_layers: usize) -> f64 {
    let k = k as f64;
    let t = t_layers as f64;
    let mut series = 0.0;
    let mut pn = 1.0;
    for n in 1..t_layers {
        pn *= p;
        series += pn * (t - n as f64);
    }
    2.0 * (1.0 - 1.0 / k) / (t * (t - 1.0)) * series + 1.0 / k
}

/// Inverts the agreement polynomial by bisection on [0, 1] (it is
/// strictly increasing in p for K >= 2). `a` is clamped into [1/K, 1].
pub fn invert_multiplex_agreement(a: f64, k: usize, t_layers: usize) -> Result<f64> {
    if k < 2 {
        return Err(Error::Numerical(
            "p estimation needs K >= 2; with a single community treat omega as 0".into(),
        ));
    }
    if t_layers < 2 {
        return Err(Error::Validation("multiplex p estimation needs T >= 2".into()));
    }
    let a = a.clamp(1.0 / k as f64, 1.0);
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        if multiplex_agreement(mid, k, t_layers) < a {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Multiplex copying probability from the empirical pairwise agreement
/// a = (1/(N T(T-1))) sum_i sum_{s != t} delta(g_i^s, g_i^t).
pub fn estimate_p_multiplex(p: &Partition, k: usize) -> Result<f64> {
    let t_layers = p.num_layers();
    if t_layers < 2 {
        return Err(Error::Validation("multiplex p estimation needs T >= 2".into()));
    }
    let n = p.layer(0).len();
    let pairs = (n * t_layers * (t_layers - 1)) as f64;
    let a = pairwise_agreement_count(p) as f64 / pairs;
    invert_multiplex_agreement(a, k, t_layers)
}

/// Optimal resolution gamma = (theta_in - theta_out)/(ln theta_in - ln theta_out),
/// continued across theta_in = theta_out by its limit theta.
pub fn gamma_from_theta(theta_in: f64, theta_out: f64) -> Result<f64> {
    if !(theta_in > 0.0) || !(theta_out > 0.0) {
        return Err(Error::Numerical("gamma needs positive theta values".into()));
    }
    if (theta_in - theta_out).abs() < 1e-12 {
        return Ok(theta_in);
    }
    Ok((theta_in - theta_out) / (theta_in.ln() - theta_out.ln()))
}

fn log_ratio(theta_in: f64, theta_out: f64) -> Result<f64> {
    if !(theta_in > 0.0) || !(theta_out > 0.0) {
        return Err(Error::Numerical("omega needs positive theta values".into()));
    }
    let d = theta_in.ln() - theta_out.ln();
    if d <= 0.0 {
        return Err(Error::Numerical(
            "omega needs theta_in > theta_out (assortative layers)".into(),
        ));
    }
    Ok(d)
}

fn coupling_numerator(p: f64, k: usize) -> f64 {
    let p = p.clamp(0.0, 1.0 - P_CLAMP_MARGIN);
    (1.0 + p * k as f64 / (1.0 - p)).ln()
}

/// Temporal (and multilevel) coupling
/// omega = ln(1 + pK/(1-p)) / (ln theta_in - ln theta_out), capped at omega_max.
pub fn omega_temporal(
    theta_in: f64,
    theta_out: f64,
    p: f64,
    k: usize,
    omega_max: f64,
) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Validation("p must lie in [0, 1]".into()));
    }
    let d = log_ratio(theta_in, theta_out)?;
    if p >= 1.0 {
        return Ok(omega_max);
    }
    Ok((coupling_numerator(p, k) / d).min(omega_max))
}

/// Uniform multiplex coupling: omega_temporal / T.
pub fn omega_multiplex_uniform(
    theta_in: f64,
    theta_out: f64,
    p: f64,
    k: usize,
    t_layers: usize,
    omega_max: f64,
) -> Result<f64> {
    Ok(omega_temporal(theta_in, theta_out, p, k, omega_max)? / t_layers as f64)
}

/// Pairwise multiplex couplings omega_st. `qsum` supplies the permutation
/// weight sum per ordered pair (exact brute-force values); when absent the
/// uniform 1/T approximation is used. Limited to T <= 8 (the exact weights
/// come from a T! enumeration).
pub fn omega_multiplex_pairwise(
    theta_in: f64,
    theta_out: f64,
    p_st: &[Vec<f64>],
    k: usize,
    qsum: Option<&[Vec<f64>]>,
    omega_max: f64,
) -> Result<Vec<Vec<f64>>> {
    let t_layers = p_st.len();
    if t_layers > 8 {
        return Err(Error::Unsupported(
            "pairwise multiplex coupling limited to T <= 8 (factorial enumeration)".into(),
        ));
    }
    if p_st.iter().any(|r| r.len() != t_layers) {
        return Err(Error::Validation("p_st matrix shape mismatch".into()));
    }
    let d = log_ratio(theta_in, theta_out)?;
    let mut omega = vec![vec![0.0; t_layers]; t_layers];
    for s in 0..t_layers {
        for t in 0..t_layers {
            if s == t {
                continue;
            }
            let q = match qsum {
                Some(m) => m[s][t],
                None => 1.0 / t_layers as f64,
            };
            let p = p_st[s][t];
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Validation("p_st values must lie in [0, 1]".into()));
            }
            omega[s][t] = if p >= 1.0 {
                omega_max
            } else {
                (coupling_numerator(p, k) * q / d).min(omega_max)
            };
        }
    }
    Ok(omega)
}

/// Per-layer couplings omega_t using the mean log-ratio denominator
/// (the layer-dependent closed form). Index 0 holds omega_2.
pub fn omega_temporal_layered(
    theta_in: &[f64],
    theta_out: &[f64],
    p: &[f64],
    k: &[usize],
    omega_max: f64,
) -> Result<Vec<f64>> {
    let t_layers = theta_in.len();
    if theta_out.len() != t_layers || p.len() != t_layers || k.len() != t_layers {
        return Err(Error::Validation("per-layer parameter length mismatch".into()));
    }
    let mean_d = mean_log_ratio(theta_in, theta_out)?;
    (1..t_layers)
        .map(|t| {
            if k[t] < 2 {
                return Ok(0.0);
            }
            if p[t] >= 1.0 {
                return Ok(omega_max);
            }
            Ok((coupling_numerator(p[t], k[t]) / mean_d).min(omega_max))
        })
        .collect()
}

/// Unweighted mean of ln(theta_in^t / theta_out^t) over layers.
pub fn mean_log_ratio(theta_in: &[f64], theta_out: &[f64]) -> Result<f64> {
    if theta_in.is_empty() {
        return Err(Error::Validation("need at least one layer".into()));
    }
    let mut sum = 0.0;
    for (&ti, &to) in theta_in.iter().zip(theta_out) {
        if !(ti > 0.0) || !(to > 0.0) {
            return Err(Error::Numerical("theta values must be positive".into()));
        }
        sum += ti.ln() - to.ln();
    }
    let mean = sum / theta_in.len() as f64;
    if mean <= 0.0 {
        return Err(Error::Numerical(
            "mean log-ratio must be positive for coupling conversion".into(),
        ));
    }
    Ok(mean)
}

/// Layer weights beta_t = log-ratio_t / mean log-ratio. Mean of the
/// result is 1; disassortative layers produce beta_t <= 0.
pub fn beta_weights(theta_in: &[f64], theta_out: &[f64]) -> Result<Vec<f64>> {
    let mean = mean_log_ratio(theta_in, theta_out)?;
    Ok(theta_in
        .iter()
        .zip(theta_out)
        .map(|(&ti, &to)| (ti.ln() - to.ln()) / mean)
        .collect())
}

/// Per-layer resolutions gamma_t from per-layer theta values.
pub fn gamma_from_theta_layered(theta_in: &[f64], theta_out: &[f64]) -> Result<Vec<f64>> {
    theta_in
        .iter()
        .zip(theta_out)
        .map(|(&ti, &to)| gamma_from_theta(ti, to))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::MultilayerNetwork;

    #[test]
    fn gamma_closed_form_values() {
        let g = gamma_from_theta(2.0, 0.5).unwrap();
        assert!((g - 1.5 / 4.0f64.ln()).abs() < 1e-12);
        let e = std::f64::consts::E;
        let g = gamma_from_theta(e, 1.0).unwrap();
        assert!((g - (e - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn gamma_equal_thetas_is_theta() {
        for theta in [0.3, 1.0, 2.5] {
            assert!((gamma_from_theta(theta, theta).unwrap() - theta).abs() < 1e-9);
            // continuity across the limit
            let near = gamma_from_theta(theta + 1e-9, theta).unwrap();
            assert!((near - theta).abs() < 1e-6);
        }
    }

    #[test]
    fn omega_closed_form_values() {
        assert_eq!(omega_temporal(2.0, 0.5, 0.0, 2, 1000.0).unwrap(), 0.0);
        assert_eq!(omega_temporal(2.0, 0.5, 1.0, 2, 1000.0).unwrap(), 1000.0);
        let w = omega_temporal(2.0, 0.5, 0.5, 2, 1000.0).unwrap();
        assert!((w - 3.0f64.ln() / 4.0f64.ln()).abs() < 1e-12);
        let wm = omega_multiplex_uniform(2.0, 0.5, 0.5, 2, 3, 1000.0).unwrap();
        assert!((wm - w / 3.0).abs() < 1e-15);
    }

    #[test]
    fn omega_needs_assortative_thetas() {
        assert!(omega_temporal(0.5, 2.0, 0.5, 2, 1000.0).is_err());
        assert!(omega_temporal(1.0, 1.0, 0.5, 2, 1000.0).is_err());
    }

    #[test]
    fn beta_weights_examples() {
        let b = beta_weights(&[4.0, 2.0], &[1.0, 1.0]).unwrap();
        assert!((b[0] - 4.0 / 3.0).abs() < 1e-12);
        assert!((b[1] - 2.0 / 3.0).abs() < 1e-12);
        let b = beta_weights(&[2.0, 2.0, 2.0], &[0.5, 0.5, 0.5]).unwrap();
        assert!(b.iter().all(|&x| (x - 1.0).abs() < 1e-12));
        let mean: f64 = b.iter().sum::<f64>() / b.len() as f64;
        assert!((mean - 1.0).abs() < 1e-12);
    }

    #[test]
    fn p_temporal_examples() {
        // N=2, T=3, K=2, Pers=3
        let p = Partition::new(vec![vec![0, 1], vec![0, 1], vec![0, 9]]);
        assert!((estimate_p_temporal(&p, 2).unwrap() - 0.5).abs() < 1e-12);
        let full = Partition::new(vec![vec![0, 1]; 3]);
        assert!((estimate_p_temporal(&full, 2).unwrap() - 1.0).abs() < 1e-12);
        assert!(estimate_p_temporal(&full, 1).is_err());
    }

    #[test]
    fn p_multiplex_inversion() {
        // T=3, K=2: RHS(0.5) = (1/6)(0.5*2 + 0.25*1) + 1/2
        let a = multiplex_agreement(0.5, 2, 3);
        assert!((a - (1.25 / 6.0 + 0.5)).abs() < 1e-12);
        let p = invert_multiplex_agreement(a, 2, 3).unwrap();
        assert!((p - 0.5).abs() < 1e-9);
        assert!(invert_multiplex_agreement(1.0, 2, 3).unwrap() > 1.0 - 1e-9);
        assert!(invert_multiplex_agreement(0.5, 2, 3).unwrap() < 1e-9);
    }

    #[test]
    fn multiplex_agreement_monotone() {
        for k in [2usize, 3, 5] {
            for t in [2usize, 3, 6] {
                let mut prev = multiplex_agreement(0.0, k, t);
                assert!((prev - 1.0 / k as f64).abs() < 1e-12);
                for step in 1..=100 {
                    let a = multiplex_agreement(step as f64 / 100.0, k, t);
                    assert!(a > prev);
                    prev = a;
                }
                assert!((prev - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn theta_all_in_one_community_clamps_out() {
        let net =
            MultilayerNetwork::from_edges(1, 4, false, &[(0, 0, 1), (0, 1, 2), (0, 2, 3)]).unwrap();
        let p = Partition::new(vec![vec![0; 4]]);
        let est = estimate_theta(&net, &p).unwrap();
        assert!((est.theta_in - 1.0).abs() < 1e-12);
        assert!(est.clamped);
        assert!(est.theta_out > 0.0);
    }

    #[test]
    fn theta_two_cliques_no_inter_edges() {
        let mut edges = Vec::new();
        for base in [0usize, 4] {
            for i in base..base + 4 {
                for j in (i + 1)..base + 4 {
                    edges.push((0usize, i, j));
                }
            }
        }
        let net = MultilayerNetwork::from_edges(1, 8, false, &edges).unwrap();
        let p = Partition::new(vec![vec![0, 0, 0, 0, 1, 1, 1, 1]]);
        let est = estimate_theta(&net, &p).unwrap();
        assert!(est.clamped); // theta_out floored at 1e-6 * theta_in
        assert!((est.theta_out - THETA_OUT_FLOOR_RATIO * est.theta_in).abs() < 1e-15);
    }

    #[test]
    fn k_counts_fixture() {
        let layer1: Vec<u32> = (0..20).collect();
        let layer2: Vec<u32> = (0..10).collect();
        let p = Partition::new(vec![layer1, layer2]);
        assert_eq!(estimate_k(&p), 20);
        assert_eq!(estimate_k_per_layer(&p), vec![20, 10]);
    }

    #[test]
    fn pairwise_omega_uniform_reduction() {
        let t_layers = 4;
        let p = 0.6;
        let p_st = vec![vec![p; t_layers]; t_layers];
        let m = omega_multiplex_pairwise(2.0, 0.5, &p_st, 3, None, 1000.0).unwrap();
        let uniform = omega_multiplex_uniform(2.0, 0.5, p, 3, t_layers, 1000.0).unwrap();
        for s in 0..t_layers {
            for t in 0..t_layers {
                if s != t {
                    assert!((m[s][t] - uniform).abs() < 1e-12);
                } else {
                    assert_eq!(m[s][t], 0.0);
                }
            }
        }
        let mut zeroed = p_st.clone();
        zeroed[0][1] = 0.0;
        let m = omega_multiplex_pairwise(2.0, 0.5, &zeroed, 3, None, 1000.0).unwrap();
        assert_eq!(m[0][1], 0.0);
    }

    #[test]
    fn pairwise_omega_t_limit() {
        let p_st = vec![vec![0.5; 9]; 9];
        assert!(omega_multiplex_pairwise(2.0, 0.5, &p_st, 2, None, 1000.0).is_err());
    }

    #[test]
    fn layered_omega_uses_mean_denominator() {
        let theta_in = [4.0, 2.0, 2.0];
        let theta_out = [1.0, 1.0, 1.0];
        let p = [0.0, 0.5, 0.5];
        let k = [2, 2, 2];
        let w = omega_temporal_layered(&theta_in, &theta_out, &p, &k, 1000.0).unwrap();
        let mean_d = (4.0f64.ln() + 2.0f64.ln() + 2.0f64.ln()) / 3.0;
        let expected = 3.0f64.ln() / mean_d;
        assert!((w[0] - expected).abs() < 1e-12);
        assert!((w[1] - expected).abs() < 1e-12);
    }
}
