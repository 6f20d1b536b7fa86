#!/usr/bin/env python3
"""Cycle-count comparison of the four topologies on the iterated GF(2)
matrix-vector workload (16 PEs plus a host, 10 rounds).

The interconnect richness increases from ring to mesh to torus to fat
tree, and the completion time drops accordingly.
"""

import argparse
import time

from flitsim.bmvm import BmvmJob, bmvm_iterate, coalesce_luts, preprocess
from flitsim.gf2 import naive_matvec_gf2
from flitsim.harness import auto_topology, gen_matrix, gen_vector

KINDS = ("ring", "mesh", "torus", "fat_tree")


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=256)
    ap.add_argument("--k", type=int, default=4)
    ap.add_argument("--f", type=int, default=4)
    ap.add_argument("--r", type=int, default=10)
    ap.add_argument("--seed", type=int, default=11)
    args = ap.parse_args()

    a = gen_matrix(args.n, 0.5, args.seed)
    v = gen_vector(args.n, args.seed + 1)
    folded = coalesce_luts(preprocess(a, args.k), args.f)
    expect = v
    for _ in range(args.r):
        expect = naive_matvec_gf2(a, expect)

    print(f"n={args.n} k={args.k} f={args.f} r={args.r}: {folded.pe_count} PEs + host")
    print(f"{'topology':10s} {'shape':8s} {'cycles':>8s} {'flits':>8s} {'avg_lat':>8s} {'wall':>7s}")
    for kind in KINDS:
        topo = auto_topology(kind, folded.pe_count + 1)
        job = BmvmJob(
            n=args.n, k=args.k, f=args.f, r=args.r, vectors=[v], topology=topo, folded=folded
        )
        t0 = time.perf_counter()
        results, stats = bmvm_iterate(job)
        wall = time.perf_counter() - t0
        assert results[0] == expect, f"{kind}: result mismatch against the oracle"
        avg = stats["latency_sum"] / stats["flits_ejected"]
        print(
            f"{kind:10s} {topo.shape_str():8s} {stats['cycles']:8d} "
            f"{stats['flits_injected']:8d} {avg:8.2f} {wall:6.2f}s"
        )
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
