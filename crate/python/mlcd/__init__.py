"""Community detection in multilayer networks.

Thin Python facade over the Rust extension module: multilayer networks,
interlayer topologies, modularity maximization, and the iterated
parameter-estimation loop that picks the resolution and coupling from a
planted-partition model.
"""

from ._native import (
    IterOutcome,
    Network,
    Partition,
    Topology,
    detect,
    gamma_from_theta,
    iterate,
    iterate_layer_dependent,
    layer_avg_nmi,
    modularity,
    nmi,
    omega_multiplex,
    omega_temporal,
    qsigma,
    sample_temporal_benchmark,
    toy_merge,
)

__all__ = [
    "IterOutcome",
    "Network",
    "Partition",
    "Topology",
    "detect",
    "gamma_from_theta",
    "iterate",
    "iterate_layer_dependent",
    "layer_avg_nmi",
    "modularity",
    "nmi",
    "omega_multiplex",
    "omega_temporal",
    "qsigma",
    "sample_temporal_benchmark",
    "toy_merge",
]

__version__ = "0.1.0"
