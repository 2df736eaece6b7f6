//! Python bindings for the mlcd library. Exposes the multilayer network
//! data model, modularity evaluation, detection, the iterated parameter
//! estimation loop, synthetic benchmark generators, and partition
//! comparison metrics as the `mlcd._native` extension module.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use mlcd::estimator;
use mlcd::evalx::{self, Normalization};
use mlcd::itermodmax::{self, IterConfig};
use mlcd::network::{
    load_network, load_partition, save_network, save_partition, Coupling, InterlayerTopology,
    MultilayerNetwork, Partition, TopologyKind,
};
use mlcd::optimizer::{self, OptimizerConfig};
use mlcd::quality::{multilayer_modularity, ModularityParams};
use mlcd::synth::{
    place_ppm_edges, qsigma_table, sample_temporal_partition, toy_merge_network, EdgeModel,
    GeneratorConfig,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn err(e: mlcd::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// A node-aligned multilayer network: one simple graph per layer over a
/// shared node set.
#[pyclass(name = "Network")]
#[derive(Clone)]
struct PyNetwork {
    inner: MultilayerNetwork,
}

#[pymethods]
impl PyNetwork {
    /// Build from (layer, i, j) edge triples.
    #[staticmethod]
    #[pyo3(signature = (num_layers, num_nodes, edges, directed = false))]
    fn from_edges(
        num_layers: usize,
        num_nodes: usize,
        edges: Vec<(usize, usize, usize)>,
        directed: bool,
    ) -> PyResult<Self> {
        Ok(PyNetwork {
            inner: MultilayerNetwork::from_edges(num_layers, num_nodes, directed, &edges)
                .map_err(err)?,
        })
    }

    /// Load from the layered edge-list text format.
    #[staticmethod]
    #[pyo3(signature = (path, directed = false))]
    fn load(path: &str, directed: bool) -> PyResult<Self> {
        Ok(PyNetwork {
            inner: load_network(path, directed).map_err(err)?,
        })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        save_network(&self.inner, path).map_err(err)
    }

    #[getter]
    fn num_layers(&self) -> usize {
        self.inner.num_layers()
    }

    #[getter]
    fn num_nodes(&self) -> usize {
        self.inner.layer(0).num_nodes()
    }

    #[getter]
    fn num_state_nodes(&self) -> usize {
        self.inner.num_state_nodes()
    }

    #[getter]
    fn directed(&self) -> bool {
        self.inner.directed()
    }

    /// Edge count per layer.
    fn edge_counts(&self) -> Vec<usize> {
        self.inner.layers().iter().map(|l| l.edge_count()).collect()
    }

    /// All edges as (layer, i, j) triples.
    fn edges(&self) -> Vec<(usize, usize, usize)> {
        let mut out = Vec::new();
        for (t, layer) in self.inner.layers().iter().enumerate() {
            for (i, j) in layer.edges() {
                out.push((t, i, j));
            }
        }
        out
    }

    fn __repr__(&self) -> String {
        format!(
            "Network(layers={}, nodes={}, directed={})",
            self.inner.num_layers(),
            self.inner.layer(0).num_nodes(),
            self.inner.directed()
        )
    }
}

/// How layers are coupled: a temporal chain, all-pairs multiplex, or a
/// multilevel tree given by parent maps.
#[pyclass(name = "Topology")]
#[derive(Clone)]
struct PyTopology {
    inner: InterlayerTopology,
}

#[pymethods]
impl PyTopology {
    #[staticmethod]
    fn temporal() -> Self {
        PyTopology {
            inner: InterlayerTopology::temporal(Coupling::Uniform(1.0)),
        }
    }

    #[staticmethod]
    fn multiplex() -> Self {
        PyTopology {
            inner: InterlayerTopology::multiplex(Coupling::Uniform(1.0)),
        }
    }

    /// `parent_maps[t][i]` is node i's parent in layer t+1 (one map per
    /// consecutive layer pair, coarse to fine).
    #[staticmethod]
    fn multilevel(parent_maps: Vec<Vec<u32>>) -> Self {
        PyTopology {
            inner: InterlayerTopology::multilevel(parent_maps, Coupling::Uniform(1.0)),
        }
    }

    #[getter]
    fn kind(&self) -> &'static str {
        match self.inner.kind {
            TopologyKind::TemporalChain => "temporal",
            TopologyKind::MultiplexAllPairs => "multiplex",
            TopologyKind::MultilevelTree => "multilevel",
        }
    }

    fn __repr__(&self) -> String {
        format!("Topology(kind={:?})", self.kind())
    }
}

/// Community labels per state node: one integer vector per layer.
#[pyclass(name = "Partition")]
#[derive(Clone)]
struct PyPartition {
    inner: Partition,
}

#[pymethods]
impl PyPartition {
    #[new]
    fn new(labels: Vec<Vec<u32>>) -> Self {
        PyPartition {
            inner: Partition::new(labels),
        }
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(PyPartition {
            inner: load_partition(path).map_err(err)?,
        })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        save_partition(&self.inner, path).map_err(err)
    }

    fn labels(&self) -> Vec<Vec<u32>> {
        (0..self.inner.num_layers())
            .map(|t| self.inner.layer(t).to_vec())
            .collect()
    }

    #[getter]
    fn num_layers(&self) -> usize {
        self.inner.num_layers()
    }

    #[getter]
    fn num_communities(&self) -> usize {
        self.inner.num_communities()
    }

    /// Relabel communities in first-appearance order.
    fn canonicalize(&self) -> Self {
        PyPartition {
            inner: self.inner.canonicalize(),
        }
    }

    fn __repr__(&self) -> String {
        format!(
            "Partition(layers={}, communities={})",
            self.inner.num_layers(),
            self.inner.num_communities()
        )
    }
}

/// Outcome of the iterated estimation loop.
#[pyclass(name = "IterOutcome")]
struct PyIterOutcome {
    #[pyo3(get)]
    converged: bool,
    /// Final resolution(s); one entry for uniform runs, one per layer otherwise.
    #[pyo3(get)]
    gamma: Vec<f64>,
    /// Final coupling(s); one entry for uniform runs, one per layer pair otherwise.
    #[pyo3(get)]
    omega: Vec<f64>,
    #[pyo3(get)]
    beta: Vec<f64>,
    #[pyo3(get)]
    iterations: usize,
    #[pyo3(get)]
    best_q: f64,
    #[pyo3(get)]
    diagnostic: Option<String>,
    /// (iter, gamma, omega, q, k) per iteration.
    #[pyo3(get)]
    trajectory: Vec<(usize, Vec<f64>, Vec<f64>, f64, usize)>,
    partition: Partition,
}

#[pymethods]
impl PyIterOutcome {
    #[getter]
    fn partition(&self) -> PyPartition {
        PyPartition {
            inner: self.partition.clone(),
        }
    }

    fn __repr__(&self) -> String {
        format!(
            "IterOutcome(converged={}, gamma={:?}, omega={:?}, iterations={})",
            self.converged, self.gamma, self.omega, self.iterations
        )
    }
}

impl From<itermodmax::IterResult> for PyIterOutcome {
    fn from(r: itermodmax::IterResult) -> Self {
        PyIterOutcome {
            converged: r.converged,
            gamma: r.gamma,
            omega: r.omega,
            beta: r.beta,
            iterations: r.iterations,
            best_q: r.best_q,
            diagnostic: r.diagnostic,
            trajectory: r
                .trajectory
                .into_iter()
                .map(|rec| (rec.iter, rec.gamma, rec.omega, rec.q, rec.k))
                .collect(),
            partition: r.best_partition,
        }
    }
}

/// Multilayer modularity at uniform (gamma, omega).
#[pyfunction]
fn modularity(
    net: &PyNetwork,
    topo: &PyTopology,
    partition: &PyPartition,
    gamma: f64,
    omega: f64,
) -> PyResult<f64> {
    let params = ModularityParams::uniform(net.inner.num_layers(), gamma, omega)
        .with_directed(net.inner.directed());
    multilayer_modularity(&net.inner, &topo.inner, &partition.inner, &params).map_err(err)
}

/// Maximize multilayer modularity at fixed (gamma, omega); returns
/// (partition, q).
#[pyfunction]
#[pyo3(signature = (net, topo, gamma, omega, seed = 0, num_starts = 3))]
fn detect(
    net: &PyNetwork,
    topo: &PyTopology,
    gamma: f64,
    omega: f64,
    seed: u64,
    num_starts: usize,
) -> PyResult<(PyPartition, f64)> {
    let params = ModularityParams::uniform(net.inner.num_layers(), gamma, omega)
        .with_directed(net.inner.directed());
    let cfg = OptimizerConfig {
        num_starts,
        ..OptimizerConfig::seeded(seed)
    };
    let (p, q) = optimizer::maximize(&net.inner, &topo.inner, &params, &cfg, None).map_err(err)?;
    Ok((PyPartition { inner: p }, q))
}

/// Iterated estimation with uniform parameters: alternate detection and
/// closed-form (gamma, omega) updates from (gamma0, omega0) to a fixed
/// point.
#[pyfunction]
#[pyo3(signature = (net, topo, gamma0 = 1.0, omega0 = 1.0, max_iters = 30,
                     seed = 0, trials_per_iter = 1, k_max = None))]
#[allow(clippy::too_many_arguments)]
fn iterate(
    net: &PyNetwork,
    topo: &PyTopology,
    gamma0: f64,
    omega0: f64,
    max_iters: usize,
    seed: u64,
    trials_per_iter: usize,
    k_max: Option<usize>,
) -> PyResult<PyIterOutcome> {
    let cfg = IterConfig {
        gamma0,
        omega0,
        max_iters,
        k_max,
        trials_per_iter,
        optimizer: OptimizerConfig::seeded(seed),
        ..Default::default()
    };
    Ok(itermodmax::iterate(&net.inner, &topo.inner, &cfg)
        .map_err(err)?
        .into())
}

/// Iterated estimation with per-layer parameters (temporal/multilevel
/// only). With fix_gamma the resolutions stay at gamma0 and only the
/// couplings update.
#[pyfunction]
#[pyo3(signature = (net, topo, gamma0 = 1.0, omega0 = 1.0, fix_gamma = false,
                     max_iters = 30, seed = 0, trials_per_iter = 1))]
#[allow(clippy::too_many_arguments)]
fn iterate_layer_dependent(
    net: &PyNetwork,
    topo: &PyTopology,
    gamma0: f64,
    omega0: f64,
    fix_gamma: bool,
    max_iters: usize,
    seed: u64,
    trials_per_iter: usize,
) -> PyResult<PyIterOutcome> {
    let cfg = IterConfig {
        gamma0,
        omega0,
        fix_gamma,
        max_iters,
        trials_per_iter,
        optimizer: OptimizerConfig::seeded(seed),
        ..Default::default()
    };
    Ok(
        itermodmax::iterate_layer_dependent(&net.inner, &topo.inner, &cfg)
            .map_err(err)?
            .into(),
    )
}

/// Normalized mutual information between two label vectors
/// (mean-entropy normalization).
#[pyfunction]
fn nmi(a: Vec<u32>, b: Vec<u32>) -> PyResult<f64> {
    evalx::nmi(&a, &b, Normalization::MeanEntropy).map_err(err)
}

/// Per-layer NMI averaged over layers.
#[pyfunction]
fn layer_avg_nmi(p1: &PyPartition, p2: &PyPartition) -> PyResult<f64> {
    evalx::layer_avg_nmi(&p1.inner, &p2.inner, Normalization::MeanEntropy).map_err(err)
}

/// Closed-form resolution gamma from the block intensities.
#[pyfunction]
fn gamma_from_theta(theta_in: f64, theta_out: f64) -> PyResult<f64> {
    estimator::gamma_from_theta(theta_in, theta_out).map_err(err)
}

/// Closed-form temporal/multilevel coupling from the block intensities
/// and label copying probability.
#[pyfunction]
#[pyo3(signature = (theta_in, theta_out, p, k, omega_max = estimator::OMEGA_MAX_DEFAULT))]
fn omega_temporal(theta_in: f64, theta_out: f64, p: f64, k: usize, omega_max: f64) -> PyResult<f64> {
    estimator::omega_temporal(theta_in, theta_out, p, k, omega_max).map_err(err)
}

/// Uniform multiplex coupling (the temporal value divided by the layer
/// count).
#[pyfunction]
#[pyo3(signature = (theta_in, theta_out, p, k, t_layers, omega_max = estimator::OMEGA_MAX_DEFAULT))]
fn omega_multiplex(
    theta_in: f64,
    theta_out: f64,
    p: f64,
    k: usize,
    t_layers: usize,
    omega_max: f64,
) -> PyResult<f64> {
    estimator::omega_multiplex_uniform(theta_in, theta_out, p, k, t_layers, omega_max).map_err(err)
}

/// Two-layer benchmark where 20 communities merge pairwise into 10;
/// returns (network, planted_partition).
#[pyfunction]
fn toy_merge(seed: u64) -> (PyNetwork, PyPartition) {
    let (net, planted) = toy_merge_network(seed);
    (PyNetwork { inner: net }, PyPartition { inner: planted })
}

/// Temporal planted-partition benchmark: K equally likely labels copied
/// with probability eta between consecutive layers, mean degree c, and
/// mixing eps = p_out/p_in. Returns (network, planted_partition).
#[pyfunction]
fn sample_temporal_benchmark(
    n: usize,
    t_layers: usize,
    k: usize,
    eta: f64,
    c: f64,
    eps: f64,
    seed: u64,
) -> PyResult<(PyNetwork, PyPartition)> {
    let cfg = GeneratorConfig::new(n, t_layers, k, eta, EdgeModel::MeanDegree { c, eps })
        .with_seed(seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let planted = sample_temporal_partition(&cfg, &mut rng);
    let net = place_ppm_edges(&planted, &cfg, &mut rng).map_err(err)?;
    Ok((PyNetwork { inner: net }, PyPartition { inner: planted }))
}

/// Sample mean and std of the normalized interlayer quality statistic
/// over random label permutations; returns (mean, std).
#[pyfunction]
fn qsigma(p: f64, k: usize, t_layers: usize, trials: usize, seed: u64) -> PyResult<(f64, f64)> {
    let s = qsigma_table(p, k, t_layers, trials, seed).map_err(err)?;
    Ok((s.mean, s.std))
}

#[pymodule]
fn _native(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyNetwork>()?;
    m.add_class::<PyTopology>()?;
    m.add_class::<PyPartition>()?;
    m.add_class::<PyIterOutcome>()?;
    m.add_function(wrap_pyfunction!(modularity, m)?)?;
    m.add_function(wrap_pyfunction!(detect, m)?)?;
    m.add_function(wrap_pyfunction!(iterate, m)?)?;
    m.add_function(wrap_pyfunction!(iterate_layer_dependent, m)?)?;
    m.add_function(wrap_pyfunction!(nmi, m)?)?;
    m.add_function(wrap_pyfunction!(layer_avg_nmi, m)?)?;
    m.add_function(wrap_pyfunction!(gamma_from_theta, m)?)?;
    m.add_function(wrap_pyfunction!(omega_temporal, m)?)?;
    m.add_function(wrap_pyfunction!(omega_multiplex, m)?)?;
    m.add_function(wrap_pyfunction!(toy_merge, m)?)?;
    m.add_function(wrap_pyfunction!(sample_temporal_benchmark, m)?)?;
    m.add_function(wrap_pyfunction!(qsigma, m)?)?;
    Ok(())
}
