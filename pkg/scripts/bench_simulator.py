#!/usr/bin/env python3
"""Simulator throughput microbenchmark: random traffic on a 4x4 torus."""

import argparse
import random
import time

from flitsim import build_topology
from flitsim.flit import Flit
from flitsim.topology import TopologyConfig


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--cycles", type=int, default=20_000)
    ap.add_argument("--rate", type=float, default=0.2)
    args = ap.parse_args()

    net = build_topology(TopologyConfig(kind="torus", endpoint_count=16, dims=(4, 4)))
    rng = random.Random(1)
    t0 = time.perf_counter()
    for _ in range(args.cycles):
        for e in range(16):
            if rng.random() < args.rate:
                net.inject(e, Flit(dst=rng.randrange(16), payload=rng.randrange(1 << 16)))
        net.step()
        for e in range(16):
            net.eject(e)
    wall = time.perf_counter() - t0
    s = net.stats()
    print(
        f"{args.cycles} cycles, {s['flits_injected']} flits in {wall:.2f}s "
        f"({wall / args.cycles * 1e6:.1f} us/cycle, "
        f"{s['flits_injected'] / wall:.0f} flits/s)"
    )
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
