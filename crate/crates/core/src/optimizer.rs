//! Louvain-style maximization of multilayer modularity (the GenLouvain
//! scheme): sweeps of single-node moves to neighboring communities,
//! followed by aggregation into super-nodes, repeated until a pass stops
//! paying.
//!
//! The engine operates on a `QuadraticInstance`, an objective of the form
//!   Q(g) = const + (1/2) sum_u sum_v c_uv delta(g_u, g_v)
//!          - sum_blocks coeff_b sum_r S_out(r,b) S_in(r,b),
//! which covers multilayer modularity (blocks are layers, masses are
//! degrees) as well as the thresholded association objective used for
//! consensus clustering.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::network::{InterlayerTopology, MultilayerNetwork, Partition, TopologyKind};
use crate::quality::{multilayer_modularity, ModularityParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MovePolicy {
    /// Take the highest-gain move; ties go to the lowest community label.
    BestMove,
    /// Sample among strictly positive-gain moves with probability
    /// proportional to the gain; stay put if none exists.
    WeightedRandomMove,
}

#[derive(Debug, Clone)]
pub struct OptimizerConfig {
    pub move_policy: MovePolicy,
    pub rng_seed: u64,
    pub max_passes: usize,
    /// Minimum Q improvement for a pass to be accepted.
    pub min_gain: f64,
    pub postprocess_persistence: bool,
    /// Independent descents per call; the best-Q result wins. More starts
    /// trade running time for a better chance of escaping shallow local
    /// optima.
    pub num_starts: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            move_policy: MovePolicy::BestMove,
            rng_seed: 0,
            max_passes: 100,
            min_gain: 1e-10,
            postprocess_persistence: false,
            num_starts: 3,
        }
    }
}

impl OptimizerConfig {
    pub fn seeded(seed: u64) -> Self {
        OptimizerConfig {
            rng_seed: seed,
            ..Default::default()
        }
    }
}

/// The optimizer's working objective; see the module docs for the form.
#[derive(Debug, Clone)]
pub struct QuadraticInstance {
    /// Symmetric pairwise weights as adjacency lists; no self entries.
    adj: Vec<Vec<(u32, f64)>>,
    /// Per node: (block, out-mass, in-mass) triples, sorted by block.
    masses: Vec<Vec<(u32, f64, f64)>>,
    /// Per-block quadratic coefficient.
    coeff: Vec<f64>,
    /// Label-independent offset (diagonal adjacency terms, folded
    /// intra-community weights after aggregation).
    constant: f64,
}

impl QuadraticInstance {
    pub fn new(
        adj: Vec<Vec<(u32, f64)>>,
        masses: Vec<Vec<(u32, f64, f64)>>,
        coeff: Vec<f64>,
        constant: f64,
    ) -> Self {
        QuadraticInstance {
            adj,
            masses,
            coeff,
            constant,
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.adj.len()
    }

    /// Objective value of a labeling.
    pub fn quality(&self, labels: &[u32]) -> f64 {
        let mut pair = 0.0;
        for (u, row) in self.adj.iter().enumerate() {
            for &(v, c) in row {
                if labels[u] == labels[v as usize] {
                    pair += c;
                }
            }
        }
        let mut sums: HashMap<(u32, u32), (f64, f64)> = HashMap::new();
        for (u, ms) in self.masses.iter().enumerate() {
            for &(b, ao, ai) in ms {
                let e = sums.entry((labels[u], b)).or_insert((0.0, 0.0));
                e.0 += ao;
                e.1 += ai;
            }
        }
        let null: f64 = sums
            .iter()
            .map(|(&(_, b), &(so, si))| self.coeff[b as usize] * so * si)
            .sum();
        self.constant + 0.5 * pair - null
    }
}

/// Builds the modularity instance for a network/topology/parameter triple.
/// Nodes are indexed by the network's global (layer, node) index.
pub fn build_instance(
    net: &MultilayerNetwork,
    topo: &InterlayerTopology,
    params: &ModularityParams,
) -> Result<QuadraticInstance> {
    params.validate(net)?;
    topo.validate(net)?;
    let n = net.num_state_nodes();
    let num_layers = net.num_layers();
    let mut pair_weights: HashMap<(u32, u32), f64> = HashMap::new();
    let mut constant = 0.0;
    let mut add_pair = |u: usize, v: usize, c: f64| {
        let key = if u < v {
            (u as u32, v as u32)
        } else {
            (v as u32, u as u32)
        };
        *pair_weights.entry(key).or_insert(0.0) += c;
    };
    for (t, layer) in net.layers().iter().enumerate() {
        let beta = params.beta[t];
        for (i, j) in layer.edges() {
            let (u, v) = (net.global_index(t, i), net.global_index(t, j));
            if u == v {
                constant += beta;
            } else {
                // Ordered-pair sum: A_ij and A_ji both contribute for
                // undirected edges; directed arcs are stored one-way.
                let c = if net.directed() { beta } else { 2.0 * beta };
                add_pair(u, v, c);
            }
        }
    }
    match topo.kind {
        TopologyKind::TemporalChain => {
            for t in 1..num_layers {
                let w = params.coupling.weight(t - 1, t);
                if w == 0.0 {
                    continue;
                }
                for i in 0..net.layer(t).num_nodes() {
                    add_pair(net.global_index(t - 1, i), net.global_index(t, i), w);
                }
            }
        }
        TopologyKind::MultilevelTree => {
            for t in 1..num_layers {
                let w = params.coupling.weight(t - 1, t);
                if w == 0.0 {
                    continue;
                }
                for i in 0..net.layer(t).num_nodes() {
                    let p = topo.parent(t, i);
                    add_pair(net.global_index(t - 1, p), net.global_index(t, i), w);
                }
            }
        }
        TopologyKind::MultiplexAllPairs => {
            for s in 0..num_layers {
                for t in (s + 1)..num_layers {
                    let w = params.coupling.weight(s, t) + params.coupling.weight(t, s);
                    if w == 0.0 {
                        continue;
                    }
                    for i in 0..net.layer(t).num_nodes() {
                        add_pair(net.global_index(s, i), net.global_index(t, i), w);
                    }
                }
            }
        }
    }
    let mut adj: Vec<Vec<(u32, f64)>> = vec![Vec::new(); n];
    for (&(u, v), &c) in &pair_weights {
        adj[u as usize].push((v, c));
        adj[v as usize].push((u, c));
    }
    let mut masses: Vec<Vec<(u32, f64, f64)>> = Vec::with_capacity(n);
    let mut coeff = Vec::with_capacity(num_layers);
    for (t, layer) in net.layers().iter().enumerate() {
        let m = layer.edge_count() as f64;
        coeff.push(if layer.edge_count() == 0 {
            0.0
        } else if net.directed() {
            params.beta[t] * params.gamma[t] / m
        } else {
            params.beta[t] * params.gamma[t] / (2.0 * m)
        });
        for i in 0..layer.num_nodes() {
            let (ao, ai) = if net.directed() {
                (layer.out_degree(i) as f64, layer.in_degree(i) as f64)
            } else {
                (layer.degree(i) as f64, layer.degree(i) as f64)
            };
            masses.push(vec![(t as u32, ao, ai)]);
        }
    }
    Ok(QuadraticInstance::new(adj, masses, coeff, constant))
}

/// Per-community block mass sums, updated incrementally as nodes move.
struct CommunityState {
    labels: Vec<u32>,
    sums: HashMap<(u32, u32), (f64, f64)>,
}

impl CommunityState {
    fn new(inst: &QuadraticInstance, labels: Vec<u32>) -> Self {
        let mut sums = HashMap::new();
        for (u, ms) in inst.masses.iter().enumerate() {
            for &(b, ao, ai) in ms {
                let e = sums.entry((labels[u], b)).or_insert((0.0, 0.0));
                e.0 += ao;
                e.1 += ai;
            }
        }
        CommunityState { labels, sums }
    }

    fn sum(&self, comm: u32, block: u32) -> (f64, f64) {
        self.sums.get(&(comm, block)).copied().unwrap_or((0.0, 0.0))
    }

    fn apply_move(&mut self, inst: &QuadraticInstance, u: usize, to: u32) {
        let from = self.labels[u];
        for &(b, ao, ai) in &inst.masses[u] {
            let e = self.sums.get_mut(&(from, b)).unwrap();
            e.0 -= ao;
            e.1 -= ai;
            let e = self.sums.entry((to, b)).or_insert((0.0, 0.0));
            e.0 += ao;
            e.1 += ai;
        }
        self.labels[u] = to;
    }

    /// Gain of moving node u to community `to`, given the total pairwise
    /// link weight of u into `to` and into its current community.
    fn gain(
        &self,
        inst: &QuadraticInstance,
        u: usize,
        to: u32,
        link_to: f64,
        link_from: f64,
    ) -> f64 {
        let from = self.labels[u];
        let mut null_delta = 0.0;
        for &(b, ao, ai) in &inst.masses[u] {
            let (so_to, si_to) = self.sum(to, b);
            let (so_from, si_from) = self.sum(from, b);
            // community sums with u removed
            let (so_from, si_from) = (so_from - ao, si_from - ai);
            null_delta += inst.coeff[b as usize]
                * (ao * (si_to - si_from) + ai * (so_to - so_from));
        }
        (link_to - link_from) - null_delta
    }
}

/// One node-move phase: sweeps in randomized order until a full sweep
/// makes no move. Returns whether anything moved.
fn local_phase(
    inst: &QuadraticInstance,
    state: &mut CommunityState,
    policy: MovePolicy,
    rng: &mut ChaCha8Rng,
) -> bool {
    let n = inst.num_nodes();
    let mut order: Vec<usize> = (0..n).collect();
    let mut moved_any = false;
    let mut links: HashMap<u32, f64> = HashMap::new();
    loop {
        order.shuffle(rng);
        let mut moved_this_sweep = false;
        for &u in &order {
            links.clear();
            for &(v, c) in &inst.adj[u] {
                *links.entry(state.labels[v as usize]).or_insert(0.0) += c;
            }
            let from = state.labels[u];
            let link_from = links.get(&from).copied().unwrap_or(0.0);
            match policy {
                MovePolicy::BestMove => {
                    let mut best: Option<(f64, u32)> = None;
                    for (&comm, &link) in &links {
                        if comm == from {
                            continue;
                        }
                        let g = state.gain(inst, u, comm, link, link_from);
                        let better = match best {
                            None => g > 0.0,
                            Some((bg, bc)) => g > bg || (g == bg && comm < bc),
                        };
                        if better && g > 0.0 {
                            best = Some((g, comm));
                        }
                    }
                    if let Some((_, comm)) = best {
                        state.apply_move(inst, u, comm);
                        moved_this_sweep = true;
                    }
                }
                MovePolicy::WeightedRandomMove => {
                    let mut options: Vec<(u32, f64)> = Vec::new();
                    let mut total = 0.0;
                    for (&comm, &link) in &links {
                        if comm == from {
                            continue;
                        }
                        let g = state.gain(inst, u, comm, link, link_from);
                        if g > 0.0 {
                            options.push((comm, g));
                            total += g;
                        }
                    }
                    if !options.is_empty() {
                        // Deterministic iteration order for reproducibility.
                        options.sort_unstable_by_key(|&(c, _)| c);
                        let mut target = rng.random::<f64>() * total;
                        let mut chosen = options[options.len() - 1].0;
                        for &(comm, g) in &options {
                            if target < g {
                                chosen = comm;
                                break;
                            }
                            target -= g;
                        }
                        state.apply_move(inst, u, chosen);
                        moved_this_sweep = true;
                    }
                }
            }
        }
        if !moved_this_sweep {
            break;
        }
        moved_any = true;
    }
    moved_any
}

/// Collapses communities into super-nodes, preserving the objective
/// exactly: inter-community pair weights sum, intra-community weights and
/// the constant fold into the new constant, block masses sum per
/// community. Returns the instance and the compact community labels.
fn aggregate(inst: &QuadraticInstance, labels: &[u32]) -> (QuadraticInstance, Vec<u32>) {
    let mut relabel: HashMap<u32, u32> = HashMap::new();
    let mut compact = Vec::with_capacity(labels.len());
    for &g in labels {
        let next = relabel.len() as u32;
        compact.push(*relabel.entry(g).or_insert(next));
    }
    let num_comms = relabel.len();
    let mut constant = inst.constant;
    let mut pair: HashMap<(u32, u32), f64> = HashMap::new();
    for (u, row) in inst.adj.iter().enumerate() {
        let cu = compact[u];
        for &(v, c) in row {
            let cv = compact[v as usize];
            if cu == cv {
                constant += 0.5 * c;
            } else if cu < cv {
                *pair.entry((cu, cv)).or_insert(0.0) += c;
            }
        }
    }
    let mut adj: Vec<Vec<(u32, f64)>> = vec![Vec::new(); num_comms];
    for (&(a, b), &c) in &pair {
        adj[a as usize].push((b, c));
        adj[b as usize].push((a, c));
    }
    let mut mass_sums: Vec<HashMap<u32, (f64, f64)>> = vec![HashMap::new(); num_comms];
    for (u, ms) in inst.masses.iter().enumerate() {
        for &(b, ao, ai) in ms {
            let e = mass_sums[compact[u] as usize].entry(b).or_insert((0.0, 0.0));
            e.0 += ao;
            e.1 += ai;
        }
    }
    let masses = mass_sums
        .into_iter()
        .map(|m| {
            let mut v: Vec<(u32, f64, f64)> =
                m.into_iter().map(|(b, (ao, ai))| (b, ao, ai)).collect();
            v.sort_unstable_by_key(|&(b, _, _)| b);
            v
        })
        .collect();
    (
        QuadraticInstance::new(adj, masses, inst.coeff.clone(), constant),
        compact,
    )
}

/// One move/aggregate cycle down the level hierarchy. Returns final labels
/// (over the original nodes) and Q.
fn louvain_cycle(
    inst: &QuadraticInstance,
    init: Vec<u32>,
    cfg: &OptimizerConfig,
    rng: &mut ChaCha8Rng,
) -> (Vec<u32>, f64) {
    // node_of[u] = index of u's super-node at the current level; level 0
    // works on the original nodes directly so single nodes can leave
    // their initial communities before any aggregation.
    let mut node_of: Vec<u32> = (0..inst.num_nodes() as u32).collect();
    let mut labels = init;
    let mut q = inst.quality(&labels);
    let mut owned: Option<QuadraticInstance> = None;
    for _pass in 0..cfg.max_passes {
        let cur = owned.as_ref().unwrap_or(inst);
        let mut state = CommunityState::new(cur, std::mem::take(&mut labels));
        local_phase(cur, &mut state, cfg.move_policy, rng);
        // Moves only ever apply strictly positive gains, so this never drops.
        let q_new = cur.quality(&state.labels);
        let improved = q_new - q > cfg.min_gain;
        q = q_new.max(q);
        let (next, compact) = aggregate(cur, &state.labels);
        for v in &mut node_of {
            *v = compact[*v as usize];
        }
        let stalled = next.num_nodes() == cur.num_nodes();
        labels = (0..next.num_nodes() as u32).collect();
        owned = Some(next);
        if !improved || stalled {
            break;
        }
    }
    (node_of, q)
}

/// Runs move/aggregate cycles, restarting each cycle from the previous
/// result so original nodes can keep refining after aggregation locked
/// them together, until Q stops improving.
pub fn louvain(
    inst: &QuadraticInstance,
    init: Vec<u32>,
    cfg: &OptimizerConfig,
) -> (Vec<u32>, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut labels = init;
    let mut q = inst.quality(&labels);
    for _ in 0..cfg.max_passes {
        let (next, q_next) = louvain_cycle(inst, labels.clone(), cfg, &mut rng);
        if q_next - q > cfg.min_gain {
            labels = next;
            q = q_next;
        } else {
            break;
        }
    }
    (labels, q)
}

fn partition_from_labels(net: &MultilayerNetwork, labels: &[u32]) -> Partition {
    let layers = net
        .layers()
        .iter()
        .enumerate()
        .map(|(t, l)| {
            (0..l.num_nodes())
                .map(|i| labels[net.global_index(t, i)])
                .collect()
        })
        .collect();
    Partition::new(layers)
}

fn flatten_partition(net: &MultilayerNetwork, p: &Partition) -> Vec<u32> {
    let mut labels = vec![0u32; net.num_state_nodes()];
    for t in 0..net.num_layers() {
        for i in 0..net.layer(t).num_nodes() {
            labels[net.global_index(t, i)] = p.get(t, i);
        }
    }
    labels
}

/// Maximizes multilayer modularity from `init` (singletons when absent).
/// The returned Q is the exact multilayer modularity of the returned
/// partition.
pub fn maximize(
    net: &MultilayerNetwork,
    topo: &InterlayerTopology,
    params: &ModularityParams,
    cfg: &OptimizerConfig,
    init: Option<&Partition>,
) -> Result<(Partition, f64)> {
    if let Some(p) = init {
        if !p.matches(net) {
            return Err(Error::Validation(
                "initial partition shape does not match the network".into(),
            ));
        }
    }
    let inst = build_instance(net, topo, params)?;
    let init_labels = match init {
        Some(p) => flatten_partition(net, &p.canonicalize()),
        None => (0..net.num_state_nodes() as u32).collect(),
    };
    let singletons: Vec<u32> = (0..net.num_state_nodes() as u32).collect();
    let (mut labels, mut best_q) = louvain(&inst, init_labels, cfg);
    for start in 1..cfg.num_starts.max(1) {
        let start_cfg = OptimizerConfig {
            rng_seed: cfg.rng_seed.wrapping_add(0x9e3779b97f4a7c15u64.wrapping_mul(start as u64)),
            ..cfg.clone()
        };
        let (l, q) = louvain(&inst, singletons.clone(), &start_cfg);
        if q > best_q {
            labels = l;
            best_q = q;
        }
    }
    let mut partition = partition_from_labels(net, &labels);
    if cfg.postprocess_persistence && topo.kind != TopologyKind::MultiplexAllPairs {
        partition = postprocess_persistence(net, topo, &partition, params)?;
    }
    let q = multilayer_modularity(net, topo, &partition, params)?;
    Ok((partition, q))
}

/// Greedy layer-by-layer relabeling that aligns community labels with the
/// previous (or parent) layer by maximum overlap. The relabeled partition
/// is returned only when it does not decrease Q; groupings never change,
/// only labels.
pub fn postprocess_persistence(
    net: &MultilayerNetwork,
    topo: &InterlayerTopology,
    p: &Partition,
    params: &ModularityParams,
) -> Result<Partition> {
    if topo.kind == TopologyKind::MultiplexAllPairs {
        return Err(Error::Unsupported(
            "persistence post-processing applies to temporal/multilevel topologies".into(),
        ));
    }
    let num_layers = p.num_layers();
    let mut fresh = p
        .layer(0)
        .iter()
        .chain((1..num_layers).flat_map(|t| p.layer(t).iter()))
        .copied()
        .max()
        .unwrap_or(0)
        + 1;
    let mut relabeled: Vec<Vec<u32>> = vec![p.layer(0).to_vec()];
    for t in 1..num_layers {
        // Overlap counts between previous (already relabeled) layer and
        // the current layer's original labels, along the coupling.
        let mut overlap: HashMap<(u32, u32), usize> = HashMap::new();
        for i in 0..p.layer(t).len() {
            let prev = match topo.kind {
                TopologyKind::MultilevelTree => relabeled[t - 1][topo.parent(t, i)],
                _ => relabeled[t - 1][i],
            };
            *overlap.entry((p.get(t, i), prev)).or_insert(0) += 1;
        }
        let mut pairs: Vec<((u32, u32), usize)> = overlap.into_iter().collect();
        pairs.sort_unstable_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        let mut map: HashMap<u32, u32> = HashMap::new();
        let mut used: std::collections::HashSet<u32> = std::collections::HashSet::new();
        for ((cur, prev), _) in pairs {
            if !map.contains_key(&cur) && !used.contains(&prev) {
                map.insert(cur, prev);
                used.insert(prev);
            }
        }
        let layer = p
            .layer(t)
            .iter()
            .map(|&g| {
                *map.entry(g).or_insert_with(|| {
                    let v = fresh;
                    fresh += 1;
                    used.insert(v);
                    v
                })
            })
            .collect();
        relabeled.push(layer);
    }
    let candidate = Partition::new(relabeled);
    let q_old = multilayer_modularity(net, topo, p, params)?;
    let q_new = multilayer_modularity(net, topo, &candidate, params)?;
    Ok(if q_new >= q_old { candidate } else { p.clone() })
}
