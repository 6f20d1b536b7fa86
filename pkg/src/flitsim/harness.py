"""Experiment runner: configs in, deterministic results and stats out.

Configs are flat ``key=value`` text files; command-line flags override
file values. Every run appends one CSV row to the stats file:

    app,topology,partitions,cycles,flits_injected,flits_ejected,
    avg_flit_latency,max_flit_latency,seed,result_digest

Identical (config, seed) pairs produce byte-identical result files and
stats rows; all randomness flows from the single seed through named
counter-based substreams.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, fields
from hashlib import blake2b

from . import bmvm as bmvm_mod
from . import ldpc as ldpc_mod
from . import tracking, video
from .errors import ConfigError
from .gf2 import Gf2Matrix, matrix_from_text, vector_from_text, vector_to_text
from .partition import PartitionSpec, parse_partition_file
from .rng import SubStream
from .topology import KINDS, TopologyConfig

STATS_HEADER = (
    "app,topology,partitions,cycles,flits_injected,flits_ejected,"
    "avg_flit_latency,max_flit_latency,seed,result_digest"
)


def result_digest(payload: bytes) -> str:
    return blake2b(payload, digest_size=8).hexdigest()


@dataclass
class StatsRecord:
    app: str
    topology: str
    partitions: int
    cycles: int
    flits_injected: int
    flits_ejected: int
    avg_flit_latency: float
    max_flit_latency: int
    seed: int
    result_digest: str

    def to_row(self) -> str:
        return (
            f"{self.app},{self.topology},{self.partitions},{self.cycles},"
            f"{self.flits_injected},{self.flits_ejected},{self.avg_flit_latency:.4f},"
            f"{self.max_flit_latency},{self.seed},{self.result_digest}"
        )


def append_stats(path, record: StatsRecord) -> None:
    """Whole-row append; writes the header when creating the file."""
    new = not os.path.exists(path) or os.path.getsize(path) == 0
    with open(path, "a", encoding="utf-8") as fh:
        if new:
            fh.write(STATS_HEADER + "\n")
        fh.write(record.to_row() + "\n")


def auto_topology(
    kind: str,
    demand: int,
    flit_width: int = 16,
    buffer_depth: int = 8,
    shape: str | None = None,
    endpoints: int | None = None,
) -> TopologyConfig:
    """A topology of the requested kind with room for ``demand`` endpoints.

    Without an explicit shape: rings get exactly ``demand`` routers,
    mesh/torus a near-square grid, fat trees arity 4 with the fewest
    levels of capacity (endpoints spread over the leaf switches).
    """
    if kind not in KINDS:
        raise ConfigError(f"unknown topology kind {kind!r}")
    if shape is not None:
        dims = tuple(int(v) for v in shape.lower().split("x"))
    elif kind == "ring":
        dims = (max(demand, 1),)
    elif kind in ("mesh", "torus"):
        rows = math.isqrt(demand)
        if rows * rows < demand:
            rows += 1
        cols = -(-demand // rows)
        if kind == "torus":
            rows, cols = max(rows, 3), max(cols, 3)
        dims = (rows, cols)
    else:
        levels = 1 if demand <= 1 else 2
        while 4**levels < demand:
            levels += 1
        dims = (4, levels)
    cfg = TopologyConfig(
        kind=kind,
        endpoint_count=endpoints if endpoints is not None else demand,
        dims=dims,
        flit_width=flit_width,
        buffer_depth=buffer_depth,
    )
    cfg.validate()
    if cfg.endpoint_count < demand:
        raise ConfigError(f"topology provides {cfg.endpoint_count} endpoints, need {demand}")
    return cfg


# -- configuration ---------------------------------------------------------------

_BOOLS = {"true": True, "1": True, "yes": True, "false": False, "0": False, "no": False}


@dataclass
class ExperimentConfig:
    app: str = ""
    topology: str = "mesh"
    shape: str | None = None
    endpoints: int | None = None
    flit_width: int | None = None
    buffer_depth: int = 8
    seed: int = 1
    partition: str | None = None  # path to a partition spec file
    out: str | None = None
    stats_out: str | None = None
    # bmvm
    n: int = 64
    k: int = 8
    f: int = 2
    r: int = 1
    density: float = 0.5
    columns: int = 1
    matrix: str | None = None
    vector: str | None = None
    checkpoints: str = "final"
    # ldpc
    iters: int = 10
    sign_mode: bool = True
    llr: str | None = None  # N signed integers, or a path via llr_file
    llr_file: str | None = None
    # track
    video: str | None = None
    width: int = 64
    height: int = 64
    frames: int = 30
    vx: float = 2.0
    vy: float = 0.0
    noise: float = 0.0
    particles: int = 16
    workers: int = 16
    sigma: float = 2.0
    lam: int = 20
    bins: int = 16
    half_w: int = 5
    half_h: int = 5
    start_x: float | None = None
    start_y: float | None = None
    init_x: float | None = None
    init_y: float | None = None

    def resolved_flit_width(self) -> int:
        if self.flit_width is not None:
            return self.flit_width
        return 32 if self.app == "track" else 16


_FIELD_TYPES = {f.name: f.type for f in fields(ExperimentConfig)}


def parse_config_text(text: str, base: ExperimentConfig | None = None) -> ExperimentConfig:
    cfg = base or ExperimentConfig()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {lineno} is not key=value: {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        set_config_value(cfg, key, value)
    return cfg


def set_config_value(cfg: ExperimentConfig, key: str, value: str) -> None:
    name = key.replace("-", "_")
    if name not in _FIELD_TYPES:
        raise ConfigError(f"unknown config key {key!r}")
    kind = _FIELD_TYPES[name]
    if value.lower() == "none":
        parsed = None
    elif kind in ("int", "int | None"):
        try:
            parsed = int(value)
        except ValueError as exc:
            raise ConfigError(f"config key {key!r} expects an integer, got {value!r}") from exc
    elif kind in ("float", "float | None"):
        try:
            parsed = float(value)
        except ValueError as exc:
            raise ConfigError(f"config key {key!r} expects a number, got {value!r}") from exc
    elif kind == "bool":
        if value.lower() not in _BOOLS:
            raise ConfigError(f"config key {key!r} expects a boolean, got {value!r}")
        parsed = _BOOLS[value.lower()]
    else:
        parsed = value
    setattr(cfg, name, parsed)


# -- generators -------------------------------------------------------------------

def gen_matrix(n: int, density: float, seed: int) -> Gf2Matrix:
    if n < 1:
        raise ConfigError("matrix dimension must be positive")
    if not 0.0 <= density <= 1.0:
        raise ConfigError("density must be in [0, 1]")
    stream = SubStream(seed, "matrix")
    rows = []
    for r in range(n):
        if density >= 1.0:
            rows.append((1 << n) - 1)
            continue
        bits = stream.generator(r).random(n) < density
        rows.append(sum(1 << c for c in range(n) if bits[c]))
    return Gf2Matrix(n, rows)


def gen_vector(n: int, seed: int, index: int = 0) -> int:
    if n < 1:
        raise ConfigError("vector dimension must be positive")
    stream = SubStream(seed, "vector")
    bits = stream.generator(index).random(n) < 0.5
    return sum(1 << c for c in range(n) if bits[c])


def gen_llr(n: int, seed: int, index: int = 0) -> list[int]:
    stream = SubStream(seed, "llr")
    g = stream.generator(index)
    return [int(v) for v in g.integers(-128, 128, size=n)]


# -- experiment dispatch -------------------------------------------------------------


def _load_partition(cfg: ExperimentConfig, topo: TopologyConfig) -> tuple[PartitionSpec | None, int]:
    if not cfg.partition:
        return None, 1
    with open(cfg.partition, encoding="utf-8") as fh:
        assignment = parse_partition_file(fh.read())
    spec = PartitionSpec(assignment=assignment)
    from .network import build_topology
    from .partition import partition_network

    probe = build_topology(topo)
    parts = spec.validate(probe.plan.n_routers)
    _, links = partition_network(probe, spec)
    beats = links[0].beats_per_bundle if links else 0
    print(f"partition: {parts} chips, {len(links)} cut links, {beats} beats/bundle")
    return spec, parts


def run_experiment(cfg: ExperimentConfig) -> StatsRecord:
    if cfg.app == "bmvm":
        return _run_bmvm(cfg)
    if cfg.app == "ldpc":
        return _run_ldpc(cfg)
    if cfg.app == "track":
        return _run_track(cfg)
    raise ConfigError(f"unknown app {cfg.app!r}")


def _finish(cfg: ExperimentConfig, app: str, topo: TopologyConfig, parts: int, stats: dict, payload: str) -> StatsRecord:
    if cfg.out:
        with open(cfg.out, "w", encoding="utf-8") as fh:
            fh.write(payload)
    ejected = stats["flits_ejected"]
    record = StatsRecord(
        app=app,
        topology=f"{topo.kind}:{topo.shape_str()}",
        partitions=parts,
        cycles=stats["cycles"],
        flits_injected=stats["flits_injected"],
        flits_ejected=ejected,
        avg_flit_latency=(stats["latency_sum"] / ejected) if ejected else 0.0,
        max_flit_latency=stats["latency_max"],
        seed=cfg.seed,
        result_digest=result_digest(payload.encode()),
    )
    if record.flits_injected != record.flits_ejected:
        raise ConfigError(
            f"flit conservation violated: {record.flits_injected} injected, {record.flits_ejected} ejected"
        )
    if cfg.stats_out:
        append_stats(cfg.stats_out, record)
    return record


def _run_bmvm(cfg: ExperimentConfig) -> StatsRecord:
    if cfg.matrix:
        with open(cfg.matrix, encoding="utf-8") as fh:
            a = matrix_from_text(fh.read())
        if a.n != cfg.n:
            raise ConfigError(f"matrix file is {a.n}x{a.n}, config says n={cfg.n}")
    else:
        a = gen_matrix(cfg.n, cfg.density, cfg.seed)
    if cfg.vector:
        with open(cfg.vector, encoding="utf-8") as fh:
            vectors = [vector_from_text(line, cfg.n)[0] for line in fh.read().splitlines() if line.strip()]
        if not vectors:
            raise ConfigError("vector file holds no vectors")
    else:
        vectors = [gen_vector(cfg.n, cfg.seed, c) for c in range(cfg.columns)]
    if cfg.k < 1 or cfg.n % cfg.k:
        raise ConfigError(f"tile size k={cfg.k} must divide n={cfg.n}")
    if cfg.f < 1 or (cfg.n // cfg.k) % cfg.f:
        raise ConfigError(f"folding factor f={cfg.f} must divide n/k={cfg.n // cfg.k}")
    demand = cfg.n // (cfg.k * cfg.f) + 1
    topo = auto_topology(
        cfg.topology, demand, cfg.resolved_flit_width(), cfg.buffer_depth, cfg.shape, cfg.endpoints
    )
    partition, parts = _load_partition(cfg, topo)
    job = bmvm_mod.BmvmJob(
        n=cfg.n,
        k=cfg.k,
        f=cfg.f,
        r=cfg.r,
        vectors=vectors,
        topology=topo,
        matrix=a,
        partition=partition,
        checkpoints=cfg.checkpoints,
    )
    results, stats = bmvm_mod.bmvm_iterate(job)
    lines = []
    if cfg.checkpoints == "all":
        for trajectory in stats["checkpoints"]:
            for v in trajectory:
                lines.append(vector_to_text(v, cfg.n).strip())
    else:
        for v in results:
            lines.append(vector_to_text(v, cfg.n).strip())
    payload = "\n".join(lines) + "\n"
    return _finish(cfg, "bmvm", topo, parts, stats, payload)


def _run_ldpc(cfg: ExperimentConfig) -> StatsRecord:
    code = ldpc_mod.fano_parity_matrix()
    if cfg.llr_file:
        with open(cfg.llr_file, encoding="utf-8") as fh:
            text = fh.read()
    else:
        text = cfg.llr or ""
    if text.strip():
        llr = [int(v) for v in text.split()]
        if len(llr) != code.n:
            raise ConfigError(f"expected {code.n} LLR values, got {len(llr)}")
    else:
        llr = gen_llr(code.n, cfg.seed)
    demand = 2 * code.n + 1
    if cfg.topology in ("mesh", "torus") and cfg.shape is None and cfg.endpoints is None:
        # stock placement: 4x4 grid, 14 node PEs + host on 16 endpoints
        topo = TopologyConfig(
            kind=cfg.topology, endpoint_count=16, dims=(4, 4),
            flit_width=cfg.resolved_flit_width(), buffer_depth=cfg.buffer_depth,
        )
    else:
        topo = auto_topology(
            cfg.topology, demand, cfg.resolved_flit_width(), cfg.buffer_depth, cfg.shape, cfg.endpoints
        )
    partition, parts = _load_partition(cfg, topo)
    bits, stats, _ = ldpc_mod.decode_noc(
        code, llr, cfg.iters, cfg.sign_mode, topology=topo, partition=partition
    )
    payload = "".join(str(b) for b in bits) + "\n"
    return _finish(cfg, "ldpc", topo, parts, stats, payload)


def _run_track(cfg: ExperimentConfig) -> StatsRecord:
    spec = None
    if cfg.video:
        frames = video.read_video(cfg.video)
    else:
        spec = video.VideoSpec(
            width=cfg.width, height=cfg.height, frames=cfg.frames,
            vx=cfg.vx, vy=cfg.vy, noise=cfg.noise,
            start_x=cfg.start_x, start_y=cfg.start_y,
        )
        frames = video.gen_video(spec, cfg.seed)
    params = tracking.TrackParams(
        n_particles=cfg.particles,
        workers=cfg.workers,
        sigma=cfg.sigma,
        lam=cfg.lam,
        bins=cfg.bins,
        half_w=cfg.half_w,
        half_h=cfg.half_h,
        flit_width=cfg.resolved_flit_width(),
    )
    height, width = frames[0].shape
    default_x, default_y = spec.start() if spec is not None else (width / 4, height / 2)
    init_x = default_x if cfg.init_x is None else cfg.init_x
    init_y = default_y if cfg.init_y is None else cfg.init_y
    init_center = (int(round(init_x * 256)), int(round(init_y * 256)))
    demand = params.workers + 1
    topo = auto_topology(
        cfg.topology, demand, params.flit_width, cfg.buffer_depth, cfg.shape, cfg.endpoints
    )
    partition, parts = _load_partition(cfg, topo)
    centers, stats, _ = tracking.track_noc(
        frames, init_center, params, cfg.seed, topology=topo, partition=partition
    )
    payload = tracking.centers_to_csv(centers)
    return _finish(cfg, "track", topo, parts, stats, payload)
