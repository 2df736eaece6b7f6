//! Command-line front end: detection, iterated parameter estimation,
//! multi-run fixed-point analysis, benchmark generation, partition
//! evaluation, (gamma, omega) sweeps, and the permutation-weight
//! statistic. Every command is deterministic under (inputs, seed) and
//! writes a manifest describing the run.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use sha2::{Digest, Sha256};

use mlcd::error::Error;
use mlcd::estimator::{
    estimate_k, estimate_p_multilevel, estimate_p_multiplex, estimate_p_temporal, estimate_theta,
    gamma_from_theta, omega_multiplex_uniform, omega_temporal, OMEGA_MAX_DEFAULT,
};
use mlcd::evalx::{
    layer_avg_nmi, metadata_nmi, per_layer_nmi, LayerMode, Normalization,
};
use mlcd::itermodmax::{iterate, iterate_layer_dependent, multi_run, IterConfig, IterResult};
use mlcd::network::{
    fmt_sig, load_metadata, load_network, load_parent_maps, load_partition, save_network,
    save_partition, Coupling, InterlayerTopology, TopologyKind,
};
use mlcd::optimizer::{maximize, MovePolicy, OptimizerConfig};
use mlcd::quality::ModularityParams;
use mlcd::synth::{
    place_ppm_edges, qsigma_table, sample_multilevel_partition, sample_multiplex_partition,
    sample_temporal_partition, toy_merge_network, EdgeModel, GeneratorConfig,
};

const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Usage errors (bad flag combinations) exit with code 2; library errors
/// keep their own classification.
#[derive(Debug)]
enum CliError {
    Usage(String),
    Lib(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Lib(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Lib(Error::Io(e))
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "{msg}"),
            CliError::Lib(e) => write!(f, "{e}"),
        }
    }
}

fn usage(msg: &str) -> CliError {
    CliError::Usage(msg.into())
}

#[derive(Parser)]
#[command(name = "mlcd", version, about = "Multilayer community detection toolkit")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Debug)]
#[group(required = true, multiple = false)]
struct TopologyKindArgs {
    /// Layers are ordered time slices coupled chain-wise.
    #[arg(long)]
    temporal: bool,
    /// Layers are edge types coupled all-to-all diagonally.
    #[arg(long)]
    multiplex: bool,
    /// Layers form a hierarchy; requires --parents.
    #[arg(long)]
    multilevel: bool,
}

#[derive(Args, Debug)]
struct TopologyArgs {
    #[command(flatten)]
    kind: TopologyKindArgs,
    /// Parent-map file ("t i p" lines) for --multilevel.
    #[arg(long)]
    parents: Option<PathBuf>,
    /// Treat intralayer edges as directed.
    #[arg(long)]
    directed: bool,
}

impl TopologyArgs {
    fn kind(&self) -> Result<TopologyKind, CliError> {
        let kind = if self.kind.temporal {
            TopologyKind::TemporalChain
        } else if self.kind.multiplex {
            TopologyKind::MultiplexAllPairs
        } else {
            TopologyKind::MultilevelTree
        };
        match (kind, &self.parents) {
            (TopologyKind::MultilevelTree, None) => {
                Err(usage("--multilevel requires --parents <file>"))
            }
            (TopologyKind::MultilevelTree, Some(_)) => Ok(kind),
            (_, Some(_)) => Err(usage("--parents only applies to --multilevel")),
            (_, None) => Ok(kind),
        }
    }

    fn build(&self, omega: f64) -> Result<InterlayerTopology, CliError> {
        Ok(match self.kind()? {
            TopologyKind::TemporalChain => InterlayerTopology::temporal(Coupling::Uniform(omega)),
            TopologyKind::MultiplexAllPairs => {
                InterlayerTopology::multiplex(Coupling::Uniform(omega))
            }
            TopologyKind::MultilevelTree => {
                let maps = load_parent_maps(self.parents.as_ref().unwrap())?;
                InterlayerTopology::multilevel(maps, Coupling::Uniform(omega))
            }
        })
    }

    fn input_files(&self) -> Vec<PathBuf> {
        self.parents.iter().cloned().collect()
    }
}

fn parse_policy(s: &str) -> Result<MovePolicy, String> {
    match s {
        "best" => Ok(MovePolicy::BestMove),
        "random" => Ok(MovePolicy::WeightedRandomMove),
        _ => Err("expected 'best' or 'random'".into()),
    }
}

fn parse_norm(s: &str) -> Result<Normalization, String> {
    match s {
        "mean" => Ok(Normalization::MeanEntropy),
        "joint" => Ok(Normalization::JointEntropy),
        _ => Err("expected 'mean' or 'joint'".into()),
    }
}

/// Comma-separated floats.
#[derive(Clone, Debug)]
struct FloatList(Vec<f64>);

impl std::str::FromStr for FloatList {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        s.split(',')
            .map(|x| x.trim().parse::<f64>().map_err(|e| e.to_string()))
            .collect::<Result<Vec<f64>, _>>()
            .map(FloatList)
    }
}

/// "start:end:steps" inclusive grid.
#[derive(Clone, Debug)]
struct Grid(Vec<f64>);

impl std::str::FromStr for Grid {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        parse_grid(s).map(Grid)
    }
}

fn parse_grid(s: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err("expected start:end:steps".into());
    }
    let start: f64 = parts[0].parse().map_err(|_| "bad start")?;
    let end: f64 = parts[1].parse().map_err(|_| "bad end")?;
    let steps: usize = parts[2].parse().map_err(|_| "bad step count")?;
    if steps == 0 {
        return Err("steps must be positive".into());
    }
    if steps == 1 {
        return Ok(vec![start]);
    }
    Ok((0..steps)
        .map(|i| start + (end - start) * i as f64 / (steps - 1) as f64)
        .collect())
}

#[derive(Subcommand)]
enum Cmd {
    /// One modularity maximization at fixed parameters.
    Detect {
        #[arg(long)]
        network: PathBuf,
        #[command(flatten)]
        topology: TopologyArgs,
        #[arg(long, default_value_t = 1.0)]
        gamma: f64,
        #[arg(long, default_value_t = 1.0)]
        omega: f64,
        /// Per-layer beta weights, comma-separated (default all 1).
        #[arg(long)]
        beta: Option<FloatList>,
        #[arg(long, default_value = "best", value_parser = parse_policy)]
        policy: MovePolicy,
        /// Relabel communities layer-by-layer to raise persistence.
        #[arg(long)]
        postprocess: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Iterated maximization with parameter estimation.
    Iterate {
        #[arg(long)]
        network: PathBuf,
        #[command(flatten)]
        topology: TopologyArgs,
        #[arg(long, default_value_t = 1.0)]
        gamma0: f64,
        #[arg(long, default_value_t = 1.0)]
        omega0: f64,
        #[arg(long, default_value_t = 30)]
        max_iters: usize,
        #[arg(long, default_value_t = 1e-3)]
        tol: f64,
        #[arg(long)]
        kmax: Option<usize>,
        #[arg(long, default_value_t = 0.8)]
        gamma_shrink: f64,
        /// Estimate per-layer (gamma_t, omega_t, beta_t).
        #[arg(long)]
        layer_dependent: bool,
        /// Keep gamma fixed, update only omega (layer-dependent mode).
        #[arg(long, requires = "layer_dependent")]
        fix_gamma: bool,
        #[arg(long, default_value_t = 1)]
        trials: usize,
        #[arg(long, default_value = "best", value_parser = parse_policy)]
        policy: MovePolicy,
        #[arg(long, default_value_t = OMEGA_MAX_DEFAULT)]
        omega_max: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Many iterations from random initial parameters.
    Multirun {
        #[arg(long)]
        network: PathBuf,
        #[command(flatten)]
        topology: TopologyArgs,
        #[arg(long, default_value_t = 100)]
        runs: usize,
        #[arg(long, default_value_t = 0.0)]
        gamma0_min: f64,
        #[arg(long, default_value_t = 5.0)]
        gamma0_max: f64,
        #[arg(long, default_value_t = 0.0)]
        omega0_min: f64,
        #[arg(long, default_value_t = 1.0)]
        omega0_max: f64,
        #[arg(long, default_value_t = 30)]
        max_iters: usize,
        #[arg(long, default_value_t = 1e-3)]
        tol: f64,
        #[arg(long)]
        kmax: Option<usize>,
        #[arg(long, default_value = "best", value_parser = parse_policy)]
        policy: MovePolicy,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sample a synthetic benchmark (network + planted partition).
    Generate {
        /// The two-layer 20-to-10 community merge benchmark.
        #[arg(long, conflicts_with_all = ["temporal", "multiplex", "multilevel"])]
        toy_merge: bool,
        #[arg(long, required_unless_present_any = ["toy_merge", "multiplex", "multilevel"])]
        temporal: bool,
        #[arg(long, conflicts_with = "temporal")]
        multiplex: bool,
        #[arg(long, conflicts_with_all = ["temporal", "multiplex"])]
        multilevel: bool,
        /// Parent-map file (required with --multilevel).
        #[arg(long)]
        parents: Option<PathBuf>,
        #[arg(long, default_value_t = 512)]
        n: usize,
        #[arg(long, default_value_t = 2)]
        t: usize,
        #[arg(long, default_value_t = 2)]
        k: usize,
        /// Copying probability (scalar).
        #[arg(long, default_value_t = 0.9)]
        eta: f64,
        /// Per-layer copying probabilities for t = 2..T, comma-separated.
        #[arg(long)]
        eta_list: Option<FloatList>,
        #[arg(long)]
        p_in: Option<f64>,
        #[arg(long)]
        p_out: Option<f64>,
        /// Mean degree (alternative to --p-in/--p-out).
        #[arg(long)]
        c: Option<f64>,
        /// Ratio p_out/p_in used with --c.
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare a partition against another partition or metadata.
    Evaluate {
        #[arg(long)]
        partition: PathBuf,
        #[arg(long, conflicts_with = "metadata")]
        reference: Option<PathBuf>,
        #[arg(long)]
        metadata: Option<PathBuf>,
        /// Bin width applied to numeric metadata columns.
        #[arg(long, default_value_t = 5.0)]
        bin_width: f64,
        #[arg(long, default_value = "mean", value_parser = parse_norm)]
        norm: Normalization,
        #[arg(long)]
        out: PathBuf,
    },
    /// Detection + one estimation step on a (gamma, omega) grid.
    Sweep {
        #[arg(long)]
        network: PathBuf,
        #[command(flatten)]
        topology: TopologyArgs,
        /// Planted/reference partition for NMI scoring.
        #[arg(long)]
        reference: Option<PathBuf>,
        /// Skip the NMI heatmap (arrows only).
        #[arg(long)]
        skip_nmi: bool,
        /// gamma grid as start:end:steps.
        #[arg(long)]
        gamma_grid: Grid,
        /// omega grid as start:end:steps.
        #[arg(long)]
        omega_grid: Grid,
        #[arg(long, default_value_t = 3)]
        trials: usize,
        #[arg(long, default_value = "best", value_parser = parse_policy)]
        policy: MovePolicy,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Brute-force permutation-weight statistic (uniform approximation check).
    Qsigma {
        #[arg(long)]
        p: f64,
        #[arg(long, default_value_t = 5)]
        k: usize,
        #[arg(long)]
        t: usize,
        #[arg(long, default_value_t = 50)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn sha256_file(path: &Path) -> Result<String, Error> {
    let bytes = fs::read(path)?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect())
}

fn write_manifest(
    out: &Path,
    command: &str,
    params: serde_json::Value,
    seed: u64,
    inputs: &[PathBuf],
    start: Instant,
) -> Result<(), Error> {
    let mut digests = serde_json::Map::new();
    for p in inputs {
        digests.insert(p.display().to_string(), json!(sha256_file(p)?));
    }
    let manifest = json!({
        "command": command,
        "params": params,
        "seed": seed,
        "version": VERSION,
        "inputs": digests,
        "duration_secs": start.elapsed().as_secs_f64(),
    });
    fs::write(
        out.join("manifest.json"),
        serde_json::to_string_pretty(&manifest).expect("manifest is valid json") + "\n",
    )?;
    Ok(())
}

fn ensure_out(out: &Path) -> Result<(), Error> {
    fs::create_dir_all(out)?;
    Ok(())
}

fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<(), Error> {
    let mut w = csv::Writer::from_path(path)
        .map_err(|e| Error::Validation(format!("cannot write {}: {e}", path.display())))?;
    w.write_record(header)
        .and_then(|_| rows.iter().try_for_each(|r| w.write_record(r)))
        .and_then(|_| w.flush().map_err(csv::Error::from))
        .map_err(|e| Error::Validation(format!("csv write failed: {e}")))?;
    Ok(())
}

fn iter_summary(res: &IterResult) -> serde_json::Value {
    json!({
        "converged": res.converged,
        "gamma": res.gamma,
        "omega": res.omega,
        "beta": res.beta,
        "best_q": res.best_q,
        "iterations": res.iterations,
        "num_communities": res.best_partition.num_communities(),
        "diagnostic": res.diagnostic,
    })
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.cmd {
        Cmd::Detect {
            network,
            topology,
            gamma,
            omega,
            beta,
            policy,
            postprocess,
            seed,
            out,
        } => {
            let start = Instant::now();
            ensure_out(&out)?;
            let net = load_network(&network, topology.directed)?;
            let topo = topology.build(omega)?;
            let mut params = ModularityParams::uniform(net.num_layers(), gamma, omega)
                .with_directed(topology.directed);
            if let Some(b) = &beta {
                params = params.with_beta(b.0.clone());
            }
            let cfg = OptimizerConfig {
                move_policy: policy,
                rng_seed: seed,
                postprocess_persistence: postprocess,
                ..Default::default()
            };
            let (partition, q) = maximize(&net, &topo, &params, &cfg, None)?;
            save_partition(&partition, out.join("partition.txt"))?;
            let summary = json!({
                "q": q,
                "num_communities": partition.num_communities(),
                "num_layers": net.num_layers(),
            });
            fs::write(
                out.join("summary.json"),
                serde_json::to_string_pretty(&summary).unwrap() + "\n",
            )?;
            let mut inputs = vec![network.clone()];
            inputs.extend(topology.input_files());
            write_manifest(
                &out,
                "detect",
                json!({
                    "network": network, "gamma": gamma, "omega": omega,
                    "beta": beta.as_ref().map(|b| b.0.clone()),
                    "directed": topology.directed, "postprocess": postprocess,
                }),
                seed,
                &inputs,
                start,
            )?;
            println!("Q = {}", fmt_sig(q));
        }
        Cmd::Iterate {
            network,
            topology,
            gamma0,
            omega0,
            max_iters,
            tol,
            kmax,
            gamma_shrink,
            layer_dependent,
            fix_gamma,
            trials,
            policy,
            omega_max,
            seed,
            out,
        } => {
            let start = Instant::now();
            ensure_out(&out)?;
            let net = load_network(&network, topology.directed)?;
            let topo = topology.build(omega0)?;
            if layer_dependent && topo.kind == TopologyKind::MultiplexAllPairs {
                return Err(usage("--layer-dependent is not available with --multiplex"));
            }
            let cfg = IterConfig {
                gamma0,
                omega0,
                max_iters,
                tol,
                k_max: kmax,
                gamma_shrink,
                fix_gamma,
                omega_max,
                trials_per_iter: trials,
                optimizer: OptimizerConfig {
                    move_policy: policy,
                    rng_seed: seed,
                    ..Default::default()
                },
            };
            let res = if layer_dependent {
                iterate_layer_dependent(&net, &topo, &cfg)?
            } else {
                iterate(&net, &topo, &cfg)?
            };
            let mut lines = String::new();
            for rec in &res.trajectory {
                lines.push_str(&serde_json::to_string(rec).unwrap());
                lines.push('\n');
            }
            fs::write(out.join("trajectory.jsonl"), lines)?;
            save_partition(&res.best_partition, out.join("partition.txt"))?;
            fs::write(
                out.join("summary.json"),
                serde_json::to_string_pretty(&iter_summary(&res)).unwrap() + "\n",
            )?;
            let mut inputs = vec![network.clone()];
            inputs.extend(topology.input_files());
            write_manifest(
                &out,
                "iterate",
                json!({
                    "network": network, "gamma0": gamma0, "omega0": omega0,
                    "max_iters": max_iters, "tol": tol, "kmax": kmax,
                    "gamma_shrink": gamma_shrink, "layer_dependent": layer_dependent,
                    "fix_gamma": fix_gamma, "trials": trials,
                    "directed": topology.directed, "omega_max": omega_max,
                }),
                seed,
                &inputs,
                start,
            )?;
            println!(
                "converged = {}, gamma = {:?}, omega = {:?}, Q = {}",
                res.converged,
                res.gamma,
                res.omega,
                fmt_sig(res.best_q)
            );
        }
        Cmd::Multirun {
            network,
            topology,
            runs,
            gamma0_min,
            gamma0_max,
            omega0_min,
            omega0_max,
            max_iters,
            tol,
            kmax,
            policy,
            seed,
            out,
        } => {
            let start = Instant::now();
            ensure_out(&out)?;
            let net = load_network(&network, topology.directed)?;
            let topo = topology.build(omega0_min)?;
            let cfg = IterConfig {
                max_iters,
                tol,
                k_max: kmax,
                optimizer: OptimizerConfig {
                    move_policy: policy,
                    ..Default::default()
                },
                ..Default::default()
            };
            let res = multi_run(
                &net,
                &topo,
                &cfg,
                runs,
                (gamma0_min, gamma0_max),
                (omega0_min, omega0_max),
                seed,
            )?;
            let rows: Vec<Vec<String>> = res
                .runs
                .iter()
                .map(|r| {
                    vec![
                        r.run.to_string(),
                        fmt_sig(r.gamma0),
                        fmt_sig(r.omega0),
                        fmt_sig(r.gamma),
                        fmt_sig(r.omega),
                        r.converged.to_string(),
                        r.iterations.to_string(),
                        fmt_sig(r.best_q),
                        r.k.to_string(),
                    ]
                })
                .collect();
            write_csv(
                &out.join("runs.csv"),
                &[
                    "run", "gamma0", "omega0", "gamma", "omega", "converged", "iterations",
                    "best_q", "k",
                ],
                &rows,
            )?;
            let header: Vec<String> = (0..runs).map(|i| format!("run{i}")).collect();
            let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
            let nmi_rows: Vec<Vec<String>> = res
                .nmi_matrix
                .iter()
                .map(|row| row.iter().map(|&v| fmt_sig(v)).collect())
                .collect();
            write_csv(&out.join("nmi_matrix.csv"), &header_refs, &nmi_rows)?;
            let part_dir = out.join("partitions");
            fs::create_dir_all(&part_dir)?;
            for (i, p) in res.partitions.iter().enumerate() {
                save_partition(p, part_dir.join(format!("run_{i:04}.txt")))?;
            }
            let mut inputs = vec![network.clone()];
            inputs.extend(topology.input_files());
            write_manifest(
                &out,
                "multirun",
                json!({
                    "network": network, "runs": runs,
                    "gamma0_range": [gamma0_min, gamma0_max],
                    "omega0_range": [omega0_min, omega0_max],
                    "max_iters": max_iters, "tol": tol, "kmax": kmax,
                    "directed": topology.directed,
                }),
                seed,
                &inputs,
                start,
            )?;
            println!("{} runs written to {}", runs, out.display());
        }
        Cmd::Generate {
            toy_merge,
            temporal,
            multiplex,
            multilevel,
            parents,
            n,
            t,
            k,
            eta,
            eta_list,
            p_in,
            p_out,
            c,
            eps,
            seed,
            out,
        } => {
            let start = Instant::now();
            ensure_out(&out)?;
            let mut inputs = Vec::new();
            let (net, planted) = if toy_merge {
                toy_merge_network(seed)
            } else {
                let edges = match (p_in, p_out, c, eps) {
                    (Some(p_in), Some(p_out), None, None) => {
                        EdgeModel::Probabilities { p_in, p_out }
                    }
                    (None, None, Some(c), Some(eps)) => EdgeModel::MeanDegree { c, eps },
                    _ => {
                        return Err(usage("specify either --p-in/--p-out or --c/--eps"))
                    }
                };
                let mut cfg = GeneratorConfig::new(n, t, k, eta, edges).with_seed(seed);
                if let Some(FloatList(list)) = eta_list {
                    if list.len() != t - 1 {
                        return Err(CliError::Usage(format!(
                            "--eta-list needs {} values (layers 2..T), got {}",
                            t - 1,
                            list.len()
                        )));
                    }
                    let mut full = vec![0.0];
                    full.extend(list);
                    cfg = cfg.with_eta_per_layer(full);
                }
                cfg.validate()?;
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let planted = if multiplex {
                    sample_multiplex_partition(&cfg, &mut rng)
                } else if multilevel {
                    let path = parents.as_ref().ok_or_else(|| {
                        Error::Validation("--multilevel requires --parents <file>".into())
                    })?;
                    inputs.push(path.clone());
                    let maps = load_parent_maps(path)?;
                    sample_multilevel_partition(&cfg, &maps, &mut rng)?
                } else {
                    debug_assert!(temporal);
                    sample_temporal_partition(&cfg, &mut rng)
                };
                let net = place_ppm_edges(&planted, &cfg, &mut rng)?;
                (net, planted)
            };
            save_network(&net, out.join("network.txt"))?;
            save_partition(&planted, out.join("planted.txt"))?;
            write_manifest(
                &out,
                "generate",
                json!({
                    "toy_merge": toy_merge, "temporal": temporal, "multiplex": multiplex,
                    "multilevel": multilevel, "n": n, "t": t, "k": k, "eta": eta,
                    "p_in": p_in, "p_out": p_out, "c": c, "eps": eps,
                }),
                seed,
                &inputs,
                start,
            )?;
            println!(
                "wrote network ({} layers) and planted partition to {}",
                net.num_layers(),
                out.display()
            );
        }
        Cmd::Evaluate {
            partition,
            reference,
            metadata,
            bin_width,
            norm,
            out,
        } => {
            let start = Instant::now();
            ensure_out(&out)?;
            let p = load_partition(&partition)?;
            let mut inputs = vec![partition.clone()];
            if let Some(ref_path) = &reference {
                inputs.push(ref_path.clone());
                let r = load_partition(ref_path)?;
                let per = per_layer_nmi(&p, &r, norm)?;
                let avg = layer_avg_nmi(&p, &r, norm)?;
                let mut rows: Vec<Vec<String>> = per
                    .iter()
                    .enumerate()
                    .map(|(t, &v)| vec![format!("layer_{}", t + 1), fmt_sig(v)])
                    .collect();
                rows.push(vec!["average".into(), fmt_sig(avg)]);
                write_csv(&out.join("metrics.csv"), &["scope", "nmi"], &rows)?;
            } else if let Some(meta_path) = &metadata {
                inputs.push(meta_path.clone());
                let meta = load_metadata(meta_path, Some(bin_width))?;
                let mut rows = Vec::new();
                for (name, column) in &meta.columns {
                    if name == "node" || name == "id" {
                        continue;
                    }
                    for (mode, mode_name) in
                        [(LayerMode::PerLayer, "per_layer"), (LayerMode::Flatten, "flatten")]
                    {
                        for (nm, nm_name) in [
                            (Normalization::MeanEntropy, "mean"),
                            (Normalization::JointEntropy, "joint"),
                        ] {
                            let r = metadata_nmi(&p, column, mode, nm)?;
                            rows.push(vec![
                                name.clone(),
                                mode_name.into(),
                                nm_name.into(),
                                fmt_sig(r.value),
                            ]);
                        }
                    }
                }
                write_csv(
                    &out.join("metrics.csv"),
                    &["column", "layer_mode", "normalization", "nmi"],
                    &rows,
                )?;
            } else {
                return Err(usage("provide --reference <partition> or --metadata <csv>"));
            }
            write_manifest(
                &out,
                "evaluate",
                json!({
                    "partition": partition, "reference": reference,
                    "metadata": metadata, "bin_width": bin_width,
                }),
                0,
                &inputs,
                start,
            )?;
        }
        Cmd::Sweep {
            network,
            topology,
            reference,
            skip_nmi,
            gamma_grid,
            omega_grid,
            trials,
            policy,
            seed,
            out,
        } => {
            let start = Instant::now();
            ensure_out(&out)?;
            let (gamma_grid, omega_grid) = (gamma_grid.0, omega_grid.0);
            if reference.is_none() && !skip_nmi {
                return Err(usage(
                    "NMI scoring needs --reference <partition> (or pass --skip-nmi)",
                ));
            }
            let net = load_network(&network, topology.directed)?;
            let reference_part = reference.as_ref().map(load_partition).transpose()?;
            let mut heat_rows = Vec::new();
            let mut arrow_rows = Vec::new();
            for (gi, &gamma) in gamma_grid.iter().enumerate() {
                for (wi, &omega) in omega_grid.iter().enumerate() {
                    let topo = topology.build(omega)?;
                    let params = ModularityParams::uniform(net.num_layers(), gamma, omega)
                        .with_directed(topology.directed);
                    let mut nmis = Vec::new();
                    let mut next_gammas = Vec::new();
                    let mut next_omegas = Vec::new();
                    for trial in 0..trials {
                        let cfg = OptimizerConfig {
                            move_policy: policy,
                            rng_seed: seed
                                .wrapping_add(((gi * omega_grid.len() + wi) * trials + trial)
                                    as u64),
                            ..Default::default()
                        };
                        let (part, _) = maximize(&net, &topo, &params, &cfg, None)?;
                        if let Some(r) = &reference_part {
                            nmis.push(layer_avg_nmi(&part, r, Normalization::MeanEntropy)?);
                        }
                        // one estimation step; degenerate trials are skipped
                        let k = estimate_k(&part);
                        if k < 2 {
                            continue;
                        }
                        let Ok(theta) = estimate_theta(&net, &part) else {
                            continue;
                        };
                        if theta.theta_in <= theta.theta_out {
                            continue;
                        }
                        let p_est = match topo.kind {
                            TopologyKind::TemporalChain => estimate_p_temporal(&part, k),
                            TopologyKind::MultilevelTree => {
                                estimate_p_multilevel(&part, &topo, k)
                            }
                            TopologyKind::MultiplexAllPairs => estimate_p_multiplex(&part, k),
                        };
                        let Ok(p_est) = p_est else { continue };
                        next_gammas.push(gamma_from_theta(theta.theta_in, theta.theta_out)?);
                        let w = match topo.kind {
                            TopologyKind::MultiplexAllPairs => omega_multiplex_uniform(
                                theta.theta_in,
                                theta.theta_out,
                                p_est,
                                k,
                                net.num_layers(),
                                OMEGA_MAX_DEFAULT,
                            )?,
                            _ => omega_temporal(
                                theta.theta_in,
                                theta.theta_out,
                                p_est,
                                k,
                                OMEGA_MAX_DEFAULT,
                            )?,
                        };
                        next_omegas.push(w);
                    }
                    let mean = |v: &[f64]| {
                        if v.is_empty() {
                            f64::NAN
                        } else {
                            v.iter().sum::<f64>() / v.len() as f64
                        }
                    };
                    if reference_part.is_some() {
                        heat_rows.push(vec![
                            fmt_sig(gamma),
                            fmt_sig(omega),
                            fmt_sig(mean(&nmis)),
                        ]);
                    }
                    arrow_rows.push(vec![
                        fmt_sig(gamma),
                        fmt_sig(omega),
                        fmt_sig(mean(&next_gammas)),
                        fmt_sig(mean(&next_omegas)),
                    ]);
                }
            }
            if reference_part.is_some() {
                write_csv(
                    &out.join("heatmap.csv"),
                    &["gamma", "omega", "mean_nmi"],
                    &heat_rows,
                )?;
            }
            write_csv(
                &out.join("arrows.csv"),
                &["gamma", "omega", "mean_next_gamma", "mean_next_omega"],
                &arrow_rows,
            )?;
            let mut inputs = vec![network.clone()];
            inputs.extend(topology.input_files());
            inputs.extend(reference.iter().cloned());
            write_manifest(
                &out,
                "sweep",
                json!({
                    "network": network, "reference": reference,
                    "gamma_grid": gamma_grid, "omega_grid": omega_grid,
                    "trials": trials, "directed": topology.directed,
                }),
                seed,
                &inputs,
                start,
            )?;
        }
        Cmd::Qsigma {
            p,
            k,
            t,
            trials,
            seed,
            out,
        } => {
            let start = Instant::now();
            ensure_out(&out)?;
            let stats = qsigma_table(p, k, t, trials, seed)?;
            write_csv(
                &out.join("qsigma.csv"),
                &["p", "k", "t", "trials", "mean", "std"],
                &[vec![
                    fmt_sig(p),
                    k.to_string(),
                    t.to_string(),
                    trials.to_string(),
                    fmt_sig(stats.mean),
                    fmt_sig(stats.std),
                ]],
            )?;
            write_manifest(
                &out,
                "qsigma",
                json!({"p": p, "k": k, "t": t, "trials": trials}),
                seed,
                &[],
                start,
            )?;
            println!("mean = {}, std = {}", fmt_sig(stats.mean), fmt_sig(stats.std));
        }
    }
    Ok(())
}

fn exit_code_for(err: &CliError) -> u8 {
    match err {
        CliError::Usage(_) | CliError::Lib(Error::Unsupported(_)) => 2,
        CliError::Lib(Error::Parse { .. })
        | CliError::Lib(Error::Validation(_))
        | CliError::Lib(Error::Io(_)) => 3,
        CliError::Lib(Error::Numerical(_)) => 4,
    }
}

fn main() -> ExitCode {
    // Optional thread cap for the parallel drivers.
    if let Ok(n) = std::env::var("MLCD_THREADS") {
        if let Ok(n) = n.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
