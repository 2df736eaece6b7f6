//! Multilayer network data model and file I/O.
//!
//! A multilayer network is a sequence of intralayer graphs over a shared
//! node universe together with an interlayer topology describing how
//! node copies in different layers are coupled. Layers are 1-based in
//! files and 0-based internally; node ids are 0-based everywhere.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// One intralayer graph. Unweighted; adjacency stored as sorted
/// neighbor lists. For undirected layers `out_adj == in_adj`.
#[derive(Debug, Clone)]
pub struct LayerGraph {
    num_nodes: usize,
    out_adj: Vec<Vec<u32>>,
    in_adj: Vec<Vec<u32>>,
    directed: bool,
    /// m_t for undirected layers (each edge once), m'_t = sum A_ij for directed.
    edge_count: usize,
}

impl LayerGraph {
    pub fn new(num_nodes: usize, directed: bool) -> Self {
        LayerGraph {
            num_nodes,
            out_adj: vec![Vec::new(); num_nodes],
            in_adj: vec![Vec::new(); num_nodes],
            directed,
            edge_count: 0,
        }
    }

    /// Adds an edge. Undirected edges are stored in both endpoint lists
    /// but count once toward the edge count. Duplicate edges are rejected.
    pub fn add_edge(&mut self, i: usize, j: usize) -> Result<()> {
        if i >= self.num_nodes || j >= self.num_nodes {
            return Err(Error::Validation(format!(
                "node id out of range: edge ({i}, {j}) with {} nodes",
                self.num_nodes
            )));
        }
        if self.out_adj[i].contains(&(j as u32)) {
            return Err(Error::Validation(format!("duplicate edge ({i}, {j})")));
        }
        if !self.directed && i != j && self.out_adj[j].contains(&(i as u32)) {
            return Err(Error::Validation(format!(
                "duplicate edge ({j}, {i}) listed in both orientations"
            )));
        }
        self.out_adj[i].push(j as u32);
        if self.directed {
            self.in_adj[j].push(i as u32);
        } else if i != j {
            self.out_adj[j].push(i as u32);
        }
        self.edge_count += 1;
        Ok(())
    }

    fn finish(&mut self) {
        for row in &mut self.out_adj {
            row.sort_unstable();
        }
        if self.directed {
            for row in &mut self.in_adj {
                row.sort_unstable();
            }
        } else {
            self.in_adj = self.out_adj.clone();
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    /// m_t (undirected) or m'_t (directed).
    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn has_self_loop(&self, i: usize) -> bool {
        self.out_adj[i].binary_search(&(i as u32)).is_ok()
    }

    /// Undirected degree; self-loops contribute 2 so that sum(d) = 2m.
    pub fn degree(&self, i: usize) -> usize {
        self.out_adj[i].len() + usize::from(self.has_self_loop(i))
    }

    pub fn out_degree(&self, i: usize) -> usize {
        self.out_adj[i].len()
    }

    pub fn in_degree(&self, i: usize) -> usize {
        self.in_adj[i].len()
    }

    pub fn neighbors(&self, i: usize) -> &[u32] {
        &self.out_adj[i]
    }

    pub fn in_neighbors(&self, i: usize) -> &[u32] {
        &self.in_adj[i]
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.out_adj[i].binary_search(&(j as u32)).is_ok()
    }

    /// Iterates each stored edge once: (i, j) with i <= j for undirected
    /// layers, every directed arc for directed ones.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.out_adj.iter().enumerate().flat_map(move |(i, row)| {
            row.iter()
                .map(move |&j| (i, j as usize))
                .filter(move |&(i, j)| self.directed || i <= j)
        })
    }
}

/// A fully constructed multilayer network. Immutable after construction;
/// degree and edge-count caches live in the layer graphs.
#[derive(Debug, Clone)]
pub struct MultilayerNetwork {
    layers: Vec<LayerGraph>,
    directed: bool,
    /// Cumulative node offsets per layer for the global index i' = offset_t + i.
    offsets: Vec<usize>,
}

impl MultilayerNetwork {
    pub fn from_layers(layers: Vec<LayerGraph>, directed: bool) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Validation("network needs at least one layer".into()));
        }
        if layers.iter().any(|l| l.directed != directed) {
            return Err(Error::Validation("layer directedness mismatch".into()));
        }
        let mut offsets = Vec::with_capacity(layers.len() + 1);
        let mut acc = 0;
        for l in &layers {
            offsets.push(acc);
            acc += l.num_nodes();
        }
        offsets.push(acc);
        Ok(MultilayerNetwork {
            layers,
            directed,
            offsets,
        })
    }

    /// Builds a network from per-layer edge lists over `num_nodes` shared nodes.
    pub fn from_edges(
        num_layers: usize,
        num_nodes: usize,
        directed: bool,
        edges: &[(usize, usize, usize)],
    ) -> Result<Self> {
        let mut layers: Vec<LayerGraph> = (0..num_layers)
            .map(|_| LayerGraph::new(num_nodes, directed))
            .collect();
        for &(t, i, j) in edges {
            if t >= num_layers {
                return Err(Error::Validation(format!(
                    "layer index {t} out of range (T = {num_layers})"
                )));
            }
            layers[t].add_edge(i, j)?;
        }
        for l in &mut layers {
            l.finish();
        }
        Self::from_layers(layers, directed)
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn layer(&self, t: usize) -> &LayerGraph {
        &self.layers[t]
    }

    pub fn layers(&self) -> &[LayerGraph] {
        &self.layers
    }

    pub fn directed(&self) -> bool {
        self.directed
    }

    /// Total number of node-layer pairs (state nodes).
    pub fn num_state_nodes(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    /// Global index of node `i` in layer `t`.
    pub fn global_index(&self, t: usize, i: usize) -> usize {
        self.offsets[t] + i
    }

    /// Inverse of [`global_index`](Self::global_index).
    pub fn layer_node(&self, idx: usize) -> (usize, usize) {
        let t = self.offsets.partition_point(|&o| o <= idx) - 1;
        (t, idx - self.offsets[t])
    }

    /// True when all layers share the same node count.
    pub fn uniform_node_count(&self) -> Option<usize> {
        let n = self.layers[0].num_nodes();
        self.layers
            .iter()
            .all(|l| l.num_nodes() == n)
            .then_some(n)
    }
}

/// Interlayer coupling weights.
#[derive(Debug, Clone, PartialEq)]
pub enum Coupling {
    Uniform(f64),
    /// omega_t for t in {2, ..., T}; index 0 holds omega_2.
    PerLayer(Vec<f64>),
    /// omega_st for ordered layer pairs; diagonal ignored.
    PerPair(Vec<Vec<f64>>),
}

impl Coupling {
    /// Weight of the coupling from layer `s` to layer `t` (0-based).
    pub fn weight(&self, s: usize, t: usize) -> f64 {
        match self {
            Coupling::Uniform(w) => *w,
            Coupling::PerLayer(ws) => ws[t - 1],
            Coupling::PerPair(m) => m[s][t],
        }
    }

    fn validate(&self, kind: TopologyKind, num_layers: usize) -> Result<()> {
        let nonneg = |v: f64| v >= 0.0;
        match self {
            Coupling::Uniform(w) => {
                if !nonneg(*w) {
                    return Err(Error::Validation("negative coupling weight".into()));
                }
            }
            Coupling::PerLayer(ws) => {
                if kind == TopologyKind::MultiplexAllPairs {
                    return Err(Error::Validation(
                        "per-layer coupling requires a temporal or multilevel topology".into(),
                    ));
                }
                if ws.len() + 1 != num_layers {
                    return Err(Error::Validation(format!(
                        "expected {} per-layer coupling weights, got {}",
                        num_layers - 1,
                        ws.len()
                    )));
                }
                if !ws.iter().copied().all(nonneg) {
                    return Err(Error::Validation("negative coupling weight".into()));
                }
            }
            Coupling::PerPair(m) => {
                if kind != TopologyKind::MultiplexAllPairs {
                    return Err(Error::Validation(
                        "per-pair coupling requires a multiplex topology".into(),
                    ));
                }
                if m.len() != num_layers || m.iter().any(|r| r.len() != num_layers) {
                    return Err(Error::Validation("coupling matrix shape mismatch".into()));
                }
                if m.iter().flatten().any(|&w| !nonneg(w)) {
                    return Err(Error::Validation("negative coupling weight".into()));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TopologyKind {
    /// Ordinal, diagonal, layer-coupled: couples consecutive layers only.
    TemporalChain,
    /// Diagonal coupling between every ordered pair of distinct layers.
    MultiplexAllPairs,
    /// Hierarchy with parent maps from each layer to the one above.
    MultilevelTree,
}

/// Interlayer topology: coupling structure plus weights.
#[derive(Debug, Clone)]
pub struct InterlayerTopology {
    pub kind: TopologyKind,
    /// For MultilevelTree: parent_maps[t - 1][i] is the parent of node i in
    /// layer t (1-based t in {2, ..., T}); index 0 holds the map for layer 2.
    pub parent_maps: Option<Vec<Vec<u32>>>,
    pub coupling: Coupling,
}

impl InterlayerTopology {
    pub fn temporal(coupling: Coupling) -> Self {
        InterlayerTopology {
            kind: TopologyKind::TemporalChain,
            parent_maps: None,
            coupling,
        }
    }

    pub fn multiplex(coupling: Coupling) -> Self {
        InterlayerTopology {
            kind: TopologyKind::MultiplexAllPairs,
            parent_maps: None,
            coupling,
        }
    }

    pub fn multilevel(parent_maps: Vec<Vec<u32>>, coupling: Coupling) -> Self {
        InterlayerTopology {
            kind: TopologyKind::MultilevelTree,
            parent_maps: Some(parent_maps),
            coupling,
        }
    }

    /// Parent of node `i` of layer `t` (0-based t >= 1) in layer t - 1.
    pub fn parent(&self, t: usize, i: usize) -> usize {
        self.parent_maps.as_ref().expect("multilevel topology")[t - 1][i] as usize
    }

    /// Checks structural consistency against a network.
    pub fn validate(&self, net: &MultilayerNetwork) -> Result<()> {
        let num_layers = net.num_layers();
        self.coupling.validate(self.kind, num_layers)?;
        match self.kind {
            TopologyKind::MultilevelTree => {
                let maps = self
                    .parent_maps
                    .as_ref()
                    .ok_or_else(|| Error::Validation("multilevel topology needs parent maps".into()))?;
                if maps.len() + 1 != num_layers {
                    return Err(Error::Validation(format!(
                        "expected {} parent maps, got {}",
                        num_layers - 1,
                        maps.len()
                    )));
                }
                for (idx, map) in maps.iter().enumerate() {
                    let t = idx + 1;
                    if map.len() != net.layer(t).num_nodes() {
                        return Err(Error::Validation(format!(
                            "parent map for layer {} is not total ({} entries, {} nodes)",
                            t + 1,
                            map.len(),
                            net.layer(t).num_nodes()
                        )));
                    }
                    let parent_n = net.layer(t - 1).num_nodes();
                    if let Some(&bad) = map.iter().find(|&&p| (p as usize) >= parent_n) {
                        return Err(Error::Validation(format!(
                            "parent {bad} not in layer {t} (which has {parent_n} nodes)"
                        )));
                    }
                }
            }
            TopologyKind::TemporalChain | TopologyKind::MultiplexAllPairs => {
                if self.parent_maps.is_some() {
                    return Err(Error::Validation(
                        "parent maps only apply to multilevel topologies".into(),
                    ));
                }
                if net.uniform_node_count().is_none() {
                    return Err(Error::Validation(
                        "temporal/multiplex topologies require equal layer sizes".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Coupled layer pairs (s, t) with the coupling weight, each coupling
    /// instance listed once (temporal/multilevel chains are directed s -> t;
    /// multiplex lists both ordered pairs).
    pub fn coupled_pairs(&self, num_layers: usize) -> Vec<(usize, usize, f64)> {
        match self.kind {
            TopologyKind::TemporalChain | TopologyKind::MultilevelTree => (1..num_layers)
                .map(|t| (t - 1, t, self.coupling.weight(t - 1, t)))
                .collect(),
            TopologyKind::MultiplexAllPairs => {
                let mut pairs = Vec::new();
                for s in 0..num_layers {
                    for t in 0..num_layers {
                        if s != t {
                            pairs.push((s, t, self.coupling.weight(s, t)));
                        }
                    }
                }
                pairs
            }
        }
    }
}

/// Assignment of every node-layer pair to an integer community label.
/// Labels share one space across layers, so cross-layer equality is
/// meaningful.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    labels: Vec<Vec<u32>>,
}

impl Partition {
    pub fn new(labels: Vec<Vec<u32>>) -> Self {
        Partition { labels }
    }

    /// Singleton partition: each node-layer pair its own community.
    pub fn singletons(net: &MultilayerNetwork) -> Self {
        let mut next = 0u32;
        let labels = net
            .layers()
            .iter()
            .map(|l| {
                (0..l.num_nodes())
                    .map(|_| {
                        let g = next;
                        next += 1;
                        g
                    })
                    .collect()
            })
            .collect();
        Partition { labels }
    }

    pub fn num_layers(&self) -> usize {
        self.labels.len()
    }

    pub fn layer(&self, t: usize) -> &[u32] {
        &self.labels[t]
    }

    pub fn get(&self, t: usize, i: usize) -> u32 {
        self.labels[t][i]
    }

    pub fn set(&mut self, t: usize, i: usize, g: u32) {
        self.labels[t][i] = g;
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        self.labels.iter().map(|l| l.len()).collect()
    }

    pub fn num_state_nodes(&self) -> usize {
        self.labels.iter().map(|l| l.len()).sum()
    }

    /// Distinct labels over all node-layer pairs.
    pub fn num_communities(&self) -> usize {
        let mut seen: HashSet<u32> = HashSet::new();
        for layer in &self.labels {
            seen.extend(layer.iter().copied());
        }
        seen.len()
    }

    /// Distinct labels within layer `t`.
    pub fn num_communities_in_layer(&self, t: usize) -> usize {
        self.labels[t].iter().copied().collect::<HashSet<_>>().len()
    }

    pub fn matches(&self, net: &MultilayerNetwork) -> bool {
        self.labels.len() == net.num_layers()
            && self
                .labels
                .iter()
                .zip(net.layers())
                .all(|(l, g)| l.len() == g.num_nodes())
    }

    /// Relabels communities to 0..K-1 in order of first appearance.
    /// Two partitions are label-permutation equivalent iff their
    /// canonical forms are equal.
    pub fn canonicalize(&self) -> Partition {
        let mut map = std::collections::HashMap::new();
        let mut next = 0u32;
        let labels = self
            .labels
            .iter()
            .map(|layer| {
                layer
                    .iter()
                    .map(|&g| {
                        *map.entry(g).or_insert_with(|| {
                            let v = next;
                            next += 1;
                            v
                        })
                    })
                    .collect()
            })
            .collect();
        Partition { labels }
    }
}

fn parse_usize(tok: &str, line: usize, what: &str) -> Result<usize> {
    tok.parse().map_err(|_| Error::Parse {
        line,
        msg: format!("invalid {what}: {tok:?}"),
    })
}

/// Loads a multilayer network from a "t i j [w]" edge list.
///
/// Layers are 1-based, nodes 0-based. Lines starting with `#` are
/// comments, except the optional header `#layers T #nodes N`. Weights,
/// when present, must be 0 (no edge) or 1 (unweighted scope).
pub fn load_network(path: impl AsRef<Path>, directed: bool) -> Result<MultilayerNetwork> {
    let text = fs::read_to_string(path)?;
    let mut header: Option<(usize, usize)> = None;
    let mut edges: Vec<(usize, usize, usize)> = Vec::new();
    let mut max_layer = 0usize;
    let mut max_node = 0usize;
    for (lineno, raw) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('#') {
            let toks: Vec<&str> = line.split_whitespace().collect();
            if toks.first() == Some(&"#layers") {
                if toks.len() != 4 || toks[2] != "#nodes" {
                    return Err(Error::Parse {
                        line: lineno,
                        msg: "header must be '#layers T #nodes N'".into(),
                    });
                }
                let t = parse_usize(toks[1], lineno, "layer count")?;
                let n = parse_usize(toks[3], lineno, "node count")?;
                header = Some((t, n));
            }
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != 3 && toks.len() != 4 {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("expected 't i j [w]', got {line:?}"),
            });
        }
        let t = parse_usize(toks[0], lineno, "layer index")?;
        let i = parse_usize(toks[1], lineno, "node id")?;
        let j = parse_usize(toks[2], lineno, "node id")?;
        if t == 0 {
            return Err(Error::Validation(format!(
                "layer indices are 1-based; got 0 at line {lineno}"
            )));
        }
        if toks.len() == 4 {
            let w: i64 = toks[3].parse().map_err(|_| Error::Parse {
                line: lineno,
                msg: format!("invalid weight: {:?}", toks[3]),
            })?;
            match w {
                0 => continue,
                1 => {}
                w if w < 0 => {
                    return Err(Error::Validation(format!("negative weight at line {lineno}")))
                }
                _ => {
                    return Err(Error::Validation(format!(
                        "weight {w} at line {lineno}: only 0/1 supported (unweighted scope)"
                    )))
                }
            }
        }
        max_layer = max_layer.max(t);
        max_node = max_node.max(i).max(j);
        edges.push((t - 1, i, j));
    }
    let (num_layers, num_nodes) = match header {
        Some((t, n)) => (t, n),
        None => {
            if edges.is_empty() {
                return Err(Error::Validation(
                    "empty network file without a '#layers T #nodes N' header".into(),
                ));
            }
            (max_layer, max_node + 1)
        }
    };
    if max_layer > num_layers {
        return Err(Error::Validation(format!(
            "layer index {max_layer} out of range (header says {num_layers} layers)"
        )));
    }
    MultilayerNetwork::from_edges(num_layers, num_nodes, directed, &edges)
}

/// Writes a network in the same "t i j" format that [`load_network`] reads.
pub fn save_network(net: &MultilayerNetwork, path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::new();
    if let Some(n) = net.uniform_node_count() {
        out.push_str(&format!("#layers {} #nodes {}\n", net.num_layers(), n));
    }
    for (t, layer) in net.layers().iter().enumerate() {
        for (i, j) in layer.edges() {
            out.push_str(&format!("{} {} {}\n", t + 1, i, j));
        }
    }
    fs::write(path, out)?;
    Ok(())
}

/// Loads multilevel parent maps from "t i p" lines, t in {2, ..., T}.
/// Each map must be total on its layer's nodes (ids 0..max contiguous).
pub fn load_parent_maps(path: impl AsRef<Path>) -> Result<Vec<Vec<u32>>> {
    let text = fs::read_to_string(path)?;
    let mut entries: Vec<(usize, usize, usize)> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != 3 {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("expected 't i p', got {line:?}"),
            });
        }
        let t = parse_usize(toks[0], lineno, "layer index")?;
        let i = parse_usize(toks[1], lineno, "node id")?;
        let p = parse_usize(toks[2], lineno, "parent id")?;
        if t < 2 {
            return Err(Error::Validation(format!(
                "parent maps start at layer 2; got {t} at line {lineno}"
            )));
        }
        entries.push((t, i, p));
    }
    if entries.is_empty() {
        return Err(Error::Validation("empty parent-map file".into()));
    }
    let max_t = entries.iter().map(|e| e.0).max().unwrap();
    let mut maps: Vec<Vec<Option<u32>>> = Vec::new();
    for t in 2..=max_t {
        let n = entries
            .iter()
            .filter(|e| e.0 == t)
            .map(|e| e.1 + 1)
            .max()
            .unwrap_or(0);
        if n == 0 {
            return Err(Error::Validation(format!("no parent entries for layer {t}")));
        }
        maps.push(vec![None; n]);
    }
    for (t, i, p) in entries {
        let slot = &mut maps[t - 2][i];
        if slot.is_some() {
            return Err(Error::Validation(format!(
                "duplicate parent entry for node {i} of layer {t}"
            )));
        }
        *slot = Some(p as u32);
    }
    let mut result = Vec::with_capacity(maps.len());
    for (idx, map) in maps.into_iter().enumerate() {
        let t = idx + 2;
        let mut full = Vec::with_capacity(map.len());
        for (i, slot) in map.into_iter().enumerate() {
            full.push(slot.ok_or_else(|| {
                Error::Validation(format!("missing parent for node {i} of layer {t}"))
            })?);
        }
        result.push(full);
    }
    // Parent ids must land in the layer above. The top layer's size is only
    // known from the network, so that check happens in validate().
    for t in 1..result.len() {
        let parent_n = result[t - 1].len();
        if let Some(&bad) = result[t].iter().find(|&&p| (p as usize) >= parent_n) {
            return Err(Error::Validation(format!(
                "parent {bad} not in layer {} ({} nodes)",
                t + 1,
                parent_n
            )));
        }
    }
    Ok(result)
}

/// Writes a partition as "t i g" lines.
pub fn save_partition(p: &Partition, path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::new();
    for (t, layer) in p.labels.iter().enumerate() {
        for (i, &g) in layer.iter().enumerate() {
            out.push_str(&format!("{} {} {}\n", t + 1, i, g));
        }
    }
    fs::write(path, out)?;
    Ok(())
}

/// Loads a partition from "t i g" lines. Every node-layer pair implied by
/// the file (contiguous node ids per layer) must be present exactly once.
pub fn load_partition(path: impl AsRef<Path>) -> Result<Partition> {
    let text = fs::read_to_string(path)?;
    let mut entries: Vec<(usize, usize, u32)> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != 3 {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("expected 't i g', got {line:?}"),
            });
        }
        let t = parse_usize(toks[0], lineno, "layer index")?;
        let i = parse_usize(toks[1], lineno, "node id")?;
        let g = parse_usize(toks[2], lineno, "label")? as u32;
        if t == 0 {
            return Err(Error::Validation(format!(
                "layer indices are 1-based; got 0 at line {lineno}"
            )));
        }
        entries.push((t - 1, i, g));
    }
    if entries.is_empty() {
        return Err(Error::Validation("empty partition file".into()));
    }
    let num_layers = entries.iter().map(|e| e.0 + 1).max().unwrap();
    let mut labels: Vec<Vec<Option<u32>>> = (0..num_layers)
        .map(|t| {
            let n = entries
                .iter()
                .filter(|e| e.0 == t)
                .map(|e| e.1 + 1)
                .max()
                .unwrap_or(0);
            vec![None; n]
        })
        .collect();
    for (t, i, g) in entries {
        let slot = &mut labels[t][i];
        if slot.is_some() {
            return Err(Error::Validation(format!(
                "duplicate label for node {i} of layer {}",
                t + 1
            )));
        }
        *slot = Some(g);
    }
    let mut result = Vec::with_capacity(num_layers);
    for (t, layer) in labels.into_iter().enumerate() {
        if layer.is_empty() {
            return Err(Error::Validation(format!("no labels for layer {}", t + 1)));
        }
        let mut full = Vec::with_capacity(layer.len());
        for (i, slot) in layer.into_iter().enumerate() {
            full.push(slot.ok_or_else(|| {
                Error::Validation(format!("missing label for node {i} of layer {}", t + 1))
            })?);
        }
        result.push(full);
    }
    Ok(Partition::new(result))
}

/// Sparse supra-adjacency matrix over global node-layer indexes.
#[derive(Debug, Clone)]
pub struct SupraAdjacency {
    dim: usize,
    rows: Vec<Vec<(usize, f64)>>,
}

impl SupraAdjacency {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.rows[i]
            .iter()
            .find(|&&(c, _)| c == j)
            .map_or(0.0, |&(_, v)| v)
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(|r| r.len()).sum()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut m = vec![vec![0.0; self.dim]; self.dim];
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                m[i][j] = v;
            }
        }
        m
    }
}

/// Assembles the supra-adjacency matrix: intralayer adjacencies on the
/// diagonal blocks, diagonal coupling matrices off-diagonal. Temporal and
/// multilevel couplings are directed (layer t-1 into layer t); multiplex
/// couplings appear for both ordered pairs.
pub fn supra_adjacency(
    net: &MultilayerNetwork,
    topo: &InterlayerTopology,
) -> Result<SupraAdjacency> {
    topo.validate(net)?;
    let dim = net.num_state_nodes();
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); dim];
    for (t, layer) in net.layers().iter().enumerate() {
        for i in 0..layer.num_nodes() {
            let gi = net.global_index(t, i);
            for &j in layer.neighbors(i) {
                rows[gi].push((net.global_index(t, j as usize), 1.0));
            }
        }
    }
    for (s, t, w) in topo.coupled_pairs(net.num_layers()) {
        if w == 0.0 {
            continue;
        }
        match topo.kind {
            TopologyKind::MultilevelTree => {
                for i in 0..net.layer(t).num_nodes() {
                    let p = topo.parent(t, i);
                    rows[net.global_index(s, p)].push((net.global_index(t, i), w));
                }
            }
            _ => {
                for i in 0..net.layer(t).num_nodes() {
                    rows[net.global_index(s, i)].push((net.global_index(t, i), w));
                }
            }
        }
    }
    for row in &mut rows {
        row.sort_unstable_by_key(|&(c, _)| c);
    }
    Ok(SupraAdjacency { dim, rows })
}

/// Per-node categorical metadata with named columns.
#[derive(Debug, Clone)]
pub struct Metadata {
    pub columns: Vec<(String, Vec<String>)>,
}

impl Metadata {
    pub fn num_nodes(&self) -> usize {
        self.columns.first().map_or(0, |(_, v)| v.len())
    }

    pub fn column(&self, name: &str) -> Option<&[String]> {
        self.columns
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_slice())
    }
}

/// Reads a CSV metadata file (header row, one row per node). Columns whose
/// values all parse as numbers are binned with the given width (the 5-year
/// binning convention for age/seniority style columns); pass None to keep
/// raw values.
pub fn load_metadata(path: impl AsRef<Path>, bin_width: Option<f64>) -> Result<Metadata> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path.as_ref())
        .map_err(|e| Error::Validation(format!("metadata read failed: {e}")))?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Validation(format!("metadata header: {e}")))?
        .iter()
        .map(str::to_owned)
        .collect();
    let mut columns: Vec<Vec<String>> = vec![Vec::new(); headers.len()];
    for record in reader.records() {
        let record = record.map_err(|e| Error::Validation(format!("metadata row: {e}")))?;
        if record.len() != headers.len() {
            return Err(Error::Validation("ragged metadata row".into()));
        }
        for (c, field) in record.iter().enumerate() {
            columns[c].push(field.to_owned());
        }
    }
    if let Some(width) = bin_width {
        for col in &mut columns {
            let parsed: Option<Vec<f64>> = col.iter().map(|v| v.parse().ok()).collect();
            if let Some(values) = parsed {
                for (slot, v) in col.iter_mut().zip(values) {
                    *slot = format!("bin{}", (v / width).floor() as i64);
                }
            }
        }
    }
    Ok(Metadata {
        columns: headers.into_iter().zip(columns).collect(),
    })
}

/// Formats a numeric CSV field with 9 significant digits (the fixed
/// output convention of the command-line tools).
pub fn fmt_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    let formatted = format!("{x:.9e}");
    // Prefer plain decimal for moderate magnitudes.
    if x.abs() >= 1e-4 && x.abs() < 1e12 {
        let digits = x.abs().log10().floor() as i32;
        let decimals = (8 - digits).max(0) as usize;
        format!("{x:.decimals$}")
    } else {
        formatted
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write as _;

    fn write_tmp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn load_counts_edges_per_layer() {
        let f = write_tmp("1 0 1\n1 1 2\n2 0 2\n");
        let net = load_network(f.path(), false).unwrap();
        assert_eq!(net.num_layers(), 2);
        assert_eq!(net.layer(0).edge_count(), 2);
        assert_eq!(net.layer(1).edge_count(), 1);
    }

    #[test]
    fn empty_layer_from_header() {
        let f = write_tmp("#layers 2 #nodes 3\n1 0 1\n1 1 2\n");
        let net = load_network(f.path(), false).unwrap();
        assert_eq!(net.layer(1).edge_count(), 0);
        assert!((0..3).all(|i| net.layer(1).degree(i) == 0));
    }

    #[test]
    fn directed_multiplex_layers() {
        // Lazega-shaped input: 3 directed layers over a shared node set.
        let mut lines = String::from("#layers 3 #nodes 71\n");
        for t in 1..=3 {
            for i in 0..70 {
                lines.push_str(&format!("{t} {i} {}\n", i + 1));
            }
        }
        let f = write_tmp(&lines);
        let net = load_network(f.path(), true).unwrap();
        assert_eq!(net.num_layers(), 3);
        assert!(net.directed());
        assert_eq!(net.uniform_node_count(), Some(71));
        assert_eq!(net.layer(0).out_degree(0), 1);
        assert_eq!(net.layer(0).in_degree(0), 0);
    }

    #[test]
    fn malformed_line_reports_number() {
        let f = write_tmp("1 0 1\n1 x 2\n");
        match load_network(f.path(), false) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn layer_out_of_header_range_rejected() {
        let f = write_tmp("#layers 1 #nodes 2\n2 0 1\n");
        assert!(matches!(
            load_network(f.path(), false),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn negative_weight_rejected() {
        let f = write_tmp("1 0 1 -1\n");
        assert!(matches!(
            load_network(f.path(), false),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn multi_edge_rejected() {
        let f = write_tmp("1 0 1\n1 1 0\n");
        assert!(load_network(f.path(), false).is_err());
    }

    #[test]
    fn self_loop_counts_once_with_degree_two() {
        let net =
            MultilayerNetwork::from_edges(1, 2, false, &[(0, 0, 0), (0, 0, 1)]).unwrap();
        assert_eq!(net.layer(0).edge_count(), 2);
        assert_eq!(net.layer(0).degree(0), 3); // self-loop 2 + edge 1
        let sum: usize = (0..2).map(|i| net.layer(0).degree(i)).sum();
        assert_eq!(sum, 2 * net.layer(0).edge_count());
    }

    #[test]
    fn parent_maps_total_and_validated() {
        let f = write_tmp("2 0 0\n2 1 0\n");
        let maps = load_parent_maps(f.path()).unwrap();
        assert_eq!(maps, vec![vec![0, 0]]);

        let incomplete = write_tmp("2 0 0\n2 2 0\n");
        assert!(load_parent_maps(incomplete.path()).is_err());
    }

    #[test]
    fn binary_tree_parent_maps() {
        let mut content = String::new();
        for i in 0..4 {
            content.push_str(&format!("2 {i} {}\n", i / 2));
        }
        for i in 0..8 {
            content.push_str(&format!("3 {i} {}\n", i / 2));
        }
        let f = write_tmp(&content);
        let maps = load_parent_maps(f.path()).unwrap();
        assert_eq!(maps[0].len(), 4);
        assert_eq!(maps[1].len(), 8);

        let layers = vec![
            LayerGraph::new(2, false),
            LayerGraph::new(4, false),
            LayerGraph::new(8, false),
        ];
        let net = MultilayerNetwork::from_layers(layers, false).unwrap();
        let topo = InterlayerTopology::multilevel(maps, Coupling::Uniform(1.0));
        topo.validate(&net).unwrap();
    }

    #[test]
    fn partition_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("part.txt");
        let p = Partition::new(vec![(0..20).collect(), (0..10).chain(0..10).collect()]);
        save_partition(&p, &path).unwrap();
        let q = load_partition(&path).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn duplicate_partition_line_rejected() {
        let f = write_tmp("1 0 0\n1 0 1\n");
        assert!(load_partition(f.path()).is_err());
    }

    #[test]
    fn network_round_trip_preserves_degrees() {
        let net = MultilayerNetwork::from_edges(
            2,
            4,
            false,
            &[(0, 0, 1), (0, 2, 3), (1, 1, 2), (1, 0, 3), (1, 0, 1)],
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.txt");
        save_network(&net, &path).unwrap();
        let loaded = load_network(&path, false).unwrap();
        for t in 0..2 {
            assert_eq!(net.layer(t).edge_count(), loaded.layer(t).edge_count());
            for i in 0..4 {
                assert_eq!(net.layer(t).degree(i), loaded.layer(t).degree(i));
            }
        }
    }

    #[test]
    fn supra_single_layer_is_adjacency() {
        let net = MultilayerNetwork::from_edges(1, 3, false, &[(0, 0, 1), (0, 1, 2)]).unwrap();
        let topo = InterlayerTopology::temporal(Coupling::Uniform(1.0));
        let supra = supra_adjacency(&net, &topo).unwrap();
        assert_eq!(supra.dim(), 3);
        assert_eq!(supra.get(0, 1), 1.0);
        assert_eq!(supra.get(1, 0), 1.0);
        assert_eq!(supra.get(0, 2), 0.0);
    }

    #[test]
    fn supra_temporal_upper_block() {
        let net = MultilayerNetwork::from_edges(2, 2, false, &[(0, 0, 1), (1, 0, 1)]).unwrap();
        let topo = InterlayerTopology::temporal(Coupling::Uniform(1.0));
        let supra = supra_adjacency(&net, &topo).unwrap();
        // [[A1, I], [0, A2]]
        assert_eq!(supra.get(0, 2), 1.0);
        assert_eq!(supra.get(1, 3), 1.0);
        assert_eq!(supra.get(2, 0), 0.0);
        assert_eq!(supra.get(3, 1), 0.0);
    }

    #[test]
    fn supra_multiplex_six_identity_blocks() {
        let n = 2;
        let net = MultilayerNetwork::from_edges(3, n, false, &[]).unwrap();
        let omega = 0.5;
        let topo = InterlayerTopology::multiplex(Coupling::Uniform(omega));
        let supra = supra_adjacency(&net, &topo).unwrap();
        let mut off_blocks = 0;
        for s in 0..3 {
            for t in 0..3 {
                if s == t {
                    continue;
                }
                for i in 0..n {
                    assert_eq!(supra.get(s * n + i, t * n + i), omega);
                }
                off_blocks += 1;
            }
        }
        assert_eq!(off_blocks, 6);
        assert_eq!(supra.nnz(), 6 * n);
    }

    #[test]
    fn global_index_bijection() {
        let net = MultilayerNetwork::from_edges(3, 5, false, &[]).unwrap();
        for t in 0..3 {
            for i in 0..5 {
                let idx = net.global_index(t, i);
                assert_eq!(net.layer_node(idx), (t, i));
            }
        }
    }
}
