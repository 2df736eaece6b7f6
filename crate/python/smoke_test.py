#!/usr/bin/env python3
"""End-to-end smoke test for the Python bindings.

Exercises the generators, modularity evaluation, detection, the iterated
estimation loop, the closed-form parameter maps, and partition I/O on
small inputs. Run after `pip install -e . --no-build-isolation`.
"""

import math
import tempfile
from pathlib import Path

import mlcd


def check(name, ok, detail=""):
    status = "ok" if ok else "FAIL"
    print(f"  {name}: {status} {detail}")
    if not ok:
        raise SystemExit(f"smoke test failed at: {name}")


def main():
    print("closed forms")
    g = mlcd.gamma_from_theta(3.2, 1.0)
    check("gamma_from_theta", abs(g - 2.2 / math.log(3.2)) < 1e-12, f"gamma={g:.4f}")
    w = mlcd.omega_temporal(3.2, 1.0, 0.5, 4)
    expect = math.log(1 + 0.5 * 4 / 0.5) / math.log(3.2)
    check("omega_temporal", abs(w - expect) < 1e-12, f"omega={w:.4f}")
    wm = mlcd.omega_multiplex(3.2, 1.0, 0.5, 4, 5)
    check("omega_multiplex = omega_temporal / T", abs(wm - w / 5) < 1e-12)
    check("omega cap", mlcd.omega_temporal(3.2, 1.0, 1.0, 4) == 1000.0)

    print("network construction and modularity")
    # two triangles per layer, persistent labels
    edges = [
        (t, i, j)
        for t in range(2)
        for (i, j) in [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)]
    ]
    net = mlcd.Network.from_edges(2, 6, edges)
    check("shape", net.num_layers == 2 and net.num_nodes == 6, repr(net))
    topo = mlcd.Topology.temporal()
    planted = mlcd.Partition([[0, 0, 0, 1, 1, 1]] * 2)
    q_good = mlcd.modularity(net, topo, planted, 1.0, 1.0)
    q_flat = mlcd.modularity(net, topo, mlcd.Partition([[0] * 6] * 2), 1.0, 1.0)
    check("planted beats merged", q_good > q_flat, f"{q_good:.3f} > {q_flat:.3f}")

    print("detection")
    part, q = mlcd.detect(net, topo, 1.0, 1.0, seed=7)
    check("recovers the triangles", mlcd.layer_avg_nmi(part, planted) == 1.0, f"q={q:.3f}")
    check("nmi on labels", mlcd.nmi([0, 0, 1, 1], [1, 1, 0, 0]) == 1.0)

    print("temporal benchmark and iterated estimation")
    net_b, planted_b = mlcd.sample_temporal_benchmark(
        n=128, t_layers=6, k=2, eta=0.9, c=16.0, eps=0.2, seed=3
    )
    res = mlcd.iterate(net_b, mlcd.Topology.temporal(), seed=5)
    nmi_b = mlcd.layer_avg_nmi(res.partition, planted_b)
    check(
        "high recovery on easy benchmark",
        nmi_b > 0.8 and res.gamma[0] > 0 and res.omega[0] > 0,
        f"nmi={nmi_b:.3f} gamma={res.gamma[0]:.2f} omega={res.omega[0]:.2f}",
    )
    check("trajectory recorded", len(res.trajectory) == res.iterations)

    print("toy merge benchmark")
    net_t, planted_t = mlcd.toy_merge(1)
    check(
        "20 -> 10 planted communities",
        planted_t.num_communities == 20
        and len(set(planted_t.labels()[1])) == 10,
    )

    print("layer-dependent couplings")
    res_ld = mlcd.iterate_layer_dependent(
        net_b, mlcd.Topology.temporal(), gamma0=1.0, fix_gamma=True, seed=5
    )
    check(
        "per-pair couplings",
        len(res_ld.omega) == net_b.num_layers - 1 and all(w >= 0 for w in res_ld.omega),
    )

    print("permutation statistic")
    mean, std = mlcd.qsigma(0.5, 5, 3, trials=50, seed=1)
    check("centered", abs(mean) < 0.1 and std > 0, f"mean={mean:.3f} std={std:.3f}")

    print("partition I/O round trip")
    with tempfile.TemporaryDirectory() as d:
        path = str(Path(d) / "part.txt")
        part.save(path)
        again = mlcd.Partition.load(path)
        check("round trip", again.labels() == part.labels())

    print("all smoke tests passed")


if __name__ == "__main__":
    main()
