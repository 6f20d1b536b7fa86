"""Particle-filter object tracking on grayscale frames.

Sequential importance sampling without resampling: per frame, Gaussian
particles are drawn around the previous center estimate, each particle's
kernel-weighted intensity histogram is compared to the reference
histogram by Bhattacharyya distance, the distances become weights and the
new center is the weighted mean of the particle positions.

Everything runs in fixed point so the network-mapped tracker and the
sequential reference agree to the last bit: histogram masses, distances
and weights are Q1.15, pixel coordinates Q24.8. Square roots use the
exact integer floor square root; the distance-to-weight exponential is
quantized to Q1.15.

Network mapping: a root PE (endpoint 0) samples particles and scatters
their coordinates to worker PEs, each worker computes its candidate
histograms and distances against the broadcast reference histogram
(pixels come from a per-PE frame store, not from flits) and returns the
distances, and the root combines them in particle-index order -- so the
estimate does not depend on how particles were spread over workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .engine import AppGraph, Engine
from .errors import ConfigError
from .network import build_topology
from .partition import PartitionSpec, partition_network
from .pe import CollectorSpec, DistEntry, PEDescriptor, SlotSpec
from .rng import SubStream
from .topology import TopologyConfig

ONE_Q15 = 1 << 15
COORD_FRAC = 8  # Q24.8 pixel coordinates


@dataclass(frozen=True)
class Roi:
    """Region of interest: fixed-point center plus half extents in pixels."""

    cx: int  # Q24.8
    cy: int  # Q24.8
    half_w: int
    half_h: int


def compute_histogram(frame: np.ndarray, roi: Roi, bins: int) -> list[int]:
    """Kernel-weighted intensity histogram of the ROI, normalized in Q1.15.

    Pixel weight falls off as max(0, 1 - r^2) with r the distance from the
    ROI center normalized by the (unclipped) half extents. Bin masses are
    floor-normalized with largest-remainder correction so they sum to
    exactly one.
    """
    if roi.half_w < 1 or roi.half_h < 1:
        raise ConfigError("ROI half extents must be >= 1 pixel")
    height, width = frame.shape
    cxi = roi.cx >> COORD_FRAC
    cyi = roi.cy >> COORD_FRAC
    x0, x1 = max(0, cxi - roi.half_w), min(width - 1, cxi + roi.half_w)
    y0, y1 = max(0, cyi - roi.half_h), min(height - 1, cyi + roi.half_h)
    if x0 > x1 or y0 > y1:
        raise ConfigError("ROI does not overlap the frame")
    window = frame[y0 : y1 + 1, x0 : x1 + 1].astype(np.int64)
    bin_ix = (window * bins) >> 8
    dx = (np.arange(x0, x1 + 1, dtype=np.int64) << COORD_FRAC) - roi.cx
    dy = (np.arange(y0, y1 + 1, dtype=np.int64) << COORD_FRAC) - roi.cy
    rx = (dx << 15) // (roi.half_w << COORD_FRAC)
    ry = (dy << 15) // (roi.half_h << COORD_FRAC)
    r2 = ((rx * rx) >> 15)[None, :] + ((ry * ry) >> 15)[:, None]
    weight = np.maximum(ONE_Q15 - r2, 0)
    raw = np.zeros(bins, dtype=np.int64)
    np.add.at(raw, bin_ix, weight)
    total = int(raw.sum())
    if total == 0:
        raise ConfigError("ROI kernel support is empty after clipping")
    return _normalize_q15([int(v) for v in raw], total)


def histogram_reference(frame: np.ndarray, roi: Roi, bins: int) -> list[int]:
    """Plain double-loop restatement of compute_histogram, for testing."""
    height, width = frame.shape
    cxi = roi.cx >> COORD_FRAC
    cyi = roi.cy >> COORD_FRAC
    raw = [0] * bins
    for py in range(max(0, cyi - roi.half_h), min(height - 1, cyi + roi.half_h) + 1):
        for px in range(max(0, cxi - roi.half_w), min(width - 1, cxi + roi.half_w) + 1):
            dx = (px << COORD_FRAC) - roi.cx
            dy = (py << COORD_FRAC) - roi.cy
            rx = (dx << 15) // (roi.half_w << COORD_FRAC)
            ry = (dy << 15) // (roi.half_h << COORD_FRAC)
            r2 = ((rx * rx) >> 15) + ((ry * ry) >> 15)
            k = ONE_Q15 - r2
            if k > 0:
                raw[(int(frame[py, px]) * bins) >> 8] += k
    total = sum(raw)
    if total == 0:
        raise ConfigError("ROI kernel support is empty after clipping")
    return _normalize_q15(raw, total)


def kernel_weight_q15(dx_q: int, dy_q: int, half_w: int, half_h: int) -> int:
    """Epanechnikov-profile weight of one pixel offset, in Q1.15."""
    rx = (dx_q << 15) // (half_w << COORD_FRAC)
    ry = (dy_q << 15) // (half_h << COORD_FRAC)
    r2 = ((rx * rx) >> 15) + ((ry * ry) >> 15)
    return max(ONE_Q15 - r2, 0)


def _normalize_q15(raw: list[int], total: int) -> list[int]:
    floors = [(v << 15) // total for v in raw]
    rems = [(v << 15) % total for v in raw]
    deficit = ONE_Q15 - sum(floors)
    for i in sorted(range(len(raw)), key=lambda i: (-rems[i], i))[:deficit]:
        floors[i] += 1
    return floors


def bhattacharyya(p: list[int], q: list[int]) -> tuple[int, int]:
    """Similarity coefficient and distance of two normalized Q1.15 histograms."""
    if len(p) != len(q):
        raise ConfigError("histograms differ in bin count")
    for h in (p, q):
        if abs(sum(h) - ONE_Q15) > 32:  # 2^-10 normalization tolerance
            raise ConfigError("histogram is not normalized")
    rho = 0
    for pu, qu in zip(p, q):
        rho += math.isqrt(pu * qu)
    rho = min(rho, ONE_Q15)
    dist = math.isqrt((ONE_Q15 - rho) << 15)
    return rho, dist


def weights_from_distances(distances: list[int], lam: int) -> tuple[list[int], bool]:
    """exp(-lam * d^2) per particle, normalized to sum exactly one in Q1.15.

    Returns (weights, fell_back); when every weight underflows to zero the
    result is uniform and the flag is set.
    """
    raw = []
    for d in distances:
        if not 0 <= d <= ONE_Q15:
            raise ConfigError(f"distance {d} outside [0, 1] in Q1.15")
        x = lam * ((d * d) >> 15)
        raw.append(int(math.exp(-x / ONE_Q15) * ONE_Q15))
    total = sum(raw)
    if total == 0:
        n = len(raw)
        share, extra = divmod(ONE_Q15, n)
        return [share + (1 if i < extra else 0) for i in range(n)], True
    return _normalize_q15(raw, total), False


def weighted_mean(positions: list[tuple[int, int]], weights: list[int]) -> tuple[int, int]:
    """Componentwise weighted mean of Q24.8 positions; needs a positive total."""
    total = sum(weights)
    if total <= 0:
        raise ConfigError("weighted mean needs a positive weight total")
    x = sum(w * p[0] for w, p in zip(weights, positions)) // total
    y = sum(w * p[1] for w, p in zip(weights, positions)) // total
    return x, y


@dataclass
class ParticleSet:
    positions: list[tuple[int, int]]  # Q24.8
    weights: list[int] = field(default_factory=list)  # Q1.15 once assigned
    seed: int = 0
    frame: int = 0


def sample_particles(
    center: tuple[int, int],
    sigma: float,
    n_particles: int,
    stream: SubStream,
    frame_index: int,
    bounds: tuple[int, int],
) -> ParticleSet:
    """Gaussian cloud around ``center``; draw i uses counter (frame, i).

    Positions are quantized to Q24.8 and clipped to the frame.
    """
    if sigma <= 0:
        raise ConfigError("sigma must be positive")
    if n_particles < 1:
        raise ConfigError("need at least one particle")
    width, height = bounds
    max_x = (width - 1) << COORD_FRAC
    max_y = (height - 1) << COORD_FRAC
    scale = sigma * (1 << COORD_FRAC)
    positions = []
    for i in range(n_particles):
        gx, gy = stream.normal_pair(frame_index, i)
        x = min(max(center[0] + int(round(gx * scale)), 0), max_x)
        y = min(max(center[1] + int(round(gy * scale)), 0), max_y)
        positions.append((x, y))
    return ParticleSet(positions=positions, seed=stream.seed, frame=frame_index)


@dataclass
class TrackParams:
    n_particles: int = 16
    workers: int = 16
    sigma: float = 2.0  # motion prior; shrink it for near-static scenes
    lam: int = 20
    bins: int = 16
    half_w: int = 5
    half_h: int = 5
    flit_width: int = 32
    firing_cost: int = 1

    def validate(self) -> None:
        if not 1 <= self.workers <= self.n_particles:
            raise ConfigError("worker count must be in 1..n_particles")
        if self.bins < 2 or self.bins > 256:
            raise ConfigError("bins must be in 2..256")
        if self.lam < 0:
            raise ConfigError("lam must be >= 0")


def pack_hist(hist: list[int]) -> int:
    word = 0
    for v in hist:
        word = (word << 16) | v
    return word


def unpack_hist(word: int, bins: int) -> list[int]:
    return [(word >> (16 * (bins - 1 - i))) & 0xFFFF for i in range(bins)]


def track_reference(
    frames: np.ndarray, init_center: tuple[int, int], params: TrackParams, seed: int
):
    """Sequential tracker; frame 0 provides the reference histogram."""
    params.validate()
    if len(frames) < 2:
        raise ConfigError("need at least two frames")
    height, width = frames[0].shape
    stream = SubStream(seed, "particles")
    ref = compute_histogram(
        frames[0], Roi(init_center[0], init_center[1], params.half_w, params.half_h), params.bins
    )
    center = init_center
    centers = [center]
    fallbacks = 0
    for t in range(1, len(frames)):
        particles = sample_particles(center, params.sigma, params.n_particles, stream, t, (width, height))
        distances = []
        for x, y in particles.positions:
            cand = compute_histogram(
                frames[t], Roi(x, y, params.half_w, params.half_h), params.bins
            )
            distances.append(bhattacharyya(ref, cand)[1])
        weights, fell_back = weights_from_distances(distances, params.lam)
        fallbacks += 1 if fell_back else 0
        particles.weights = weights
        center = weighted_mean(particles.positions, weights)
        centers.append(center)
    return centers, {"weight_fallbacks": fallbacks}


# -- network mapping -----------------------------------------------------------

_W_REF = 0  # worker slot: broadcast reference histogram
_W_PART = 1  # worker slot: particle coordinates


def build_track_graph(
    frames: np.ndarray, init_center: tuple[int, int], params: TrackParams, seed: int
) -> tuple[AppGraph, int]:
    """Root PE on endpoint 0, workers on endpoints 1..workers."""
    params.validate()
    if len(frames) < 2:
        raise ConfigError("need at least two frames")
    n_frames = len(frames)
    n_p, n_w = params.n_particles, params.workers
    owned = [[i for i in range(n_p) if i % n_w == w] for w in range(n_w)]
    hist_bits = 16 * params.bins

    graph = AppGraph(flit_width=params.flit_width)

    root_slots = tuple(SlotSpec(slot_id=i, expected_count=1, word_width=16) for i in range(n_p))
    table = []
    ref_slot = n_p
    for i in range(n_p):
        table.append(
            DistEntry(output_slot=i, dst_endpoint=1 + i % n_w, dst_slot=_W_PART, word_width=64)
        )
    for w in range(n_w):
        table.append(
            DistEntry(output_slot=ref_slot, dst_endpoint=1 + w, dst_slot=_W_REF, word_width=hist_bits)
        )
    graph.add(
        PEDescriptor(
            endpoint=0,
            collector=CollectorSpec(mode="gather", slots=root_slots),
            processor=_root_processor(frames, init_center, params, seed, ref_slot),
            distributor_table=tuple(table),
            firing_cost=params.firing_cost,
            preload={i: [0] for i in range(n_p)},
            name="root",
        )
    )
    for w in range(n_w):
        slots = (
            SlotSpec(slot_id=_W_REF, expected_count=1, word_width=hist_bits),
            SlotSpec(slot_id=_W_PART, expected_count=len(owned[w]), word_width=64),
        )
        wtable = [DistEntry(output_slot=_W_REF, dst_endpoint=1 + w, dst_slot=_W_REF, word_width=hist_bits)]
        for pos, i in enumerate(owned[w]):
            wtable.append(DistEntry(output_slot=1 + pos, dst_endpoint=0, dst_slot=i, word_width=16))
        graph.add(
            PEDescriptor(
                endpoint=1 + w,
                collector=CollectorSpec(mode="gather", slots=slots),
                processor=_worker_processor(frames, owned[w], params),
                distributor_table=tuple(wtable),
                firing_cost=params.firing_cost,
                name=f"worker{w}",
            )
        )
    return graph, n_frames


def _root_processor(frames, init_center, params, seed, ref_slot):
    n_frames = len(frames)
    height, width = frames[0].shape
    stream = SubStream(seed, "particles")

    def processor(ctx, inputs):
        t = ctx.firing_index
        if t == 0:
            ref = compute_histogram(
                frames[0],
                Roi(init_center[0], init_center[1], params.half_w, params.half_h),
                params.bins,
            )
            ctx.local["centers"] = [init_center]
            ctx.local["fallbacks"] = 0
            center = init_center
            out = {ref_slot: pack_hist(ref)}
        else:
            distances = [inputs[i][0] for i in range(params.n_particles)]
            weights, fell_back = weights_from_distances(distances, params.lam)
            ctx.local["fallbacks"] += 1 if fell_back else 0
            center = weighted_mean(ctx.local["particles"], weights)
            ctx.local["centers"].append(center)
            out = {}
        if t <= n_frames - 2:
            particles = sample_particles(
                center, params.sigma, params.n_particles, stream, t + 1, (width, height)
            )
            ctx.local["particles"] = particles.positions
            for i, (x, y) in enumerate(particles.positions):
                out[i] = (x << 32) | y
        return out

    return processor


def _worker_processor(frames, owned, params):
    def processor(ctx, inputs):
        ref_word = inputs[_W_REF][0]
        ref = unpack_hist(ref_word, params.bins)
        frame = frames[ctx.firing_index + 1]
        out = {_W_REF: ref_word}
        for pos, word in enumerate(inputs[_W_PART]):
            x, y = word >> 32, word & 0xFFFFFFFF
            cand = compute_histogram(frame, Roi(x, y, params.half_w, params.half_h), params.bins)
            out[1 + pos] = bhattacharyya(ref, cand)[1]
        return out

    return processor


def default_track_topology(params: TrackParams, kind: str = "mesh") -> TopologyConfig:
    from .harness import auto_topology  # local: avoids a module cycle

    return auto_topology(
        kind, params.workers + 1, flit_width=params.flit_width
    )


def track_noc(
    frames: np.ndarray,
    init_center: tuple[int, int],
    params: TrackParams,
    seed: int,
    topology: TopologyConfig | None = None,
    partition: PartitionSpec | None = None,
    log_messages: bool = False,
):
    """Tracker over the network; bit-identical to ``track_reference``."""
    topo = topology or default_track_topology(params)
    if topo.endpoint_count < params.workers + 1:
        raise ConfigError(
            f"need {params.workers + 1} endpoints, topology provides {topo.endpoint_count}"
        )
    if topo.flit_width != params.flit_width:
        raise ConfigError("topology flit width must match the tracker's flit width")
    graph, _ = build_track_graph(frames, init_center, params, seed)
    net = build_topology(topo)
    if partition is not None:
        partition_network(net, partition)
    engine = Engine(net, graph, log_messages=log_messages)
    stats = engine.run()
    root_local = engine.runtimes[0].local
    centers = root_local.get("centers")
    if centers is None or len(centers) != len(frames):
        raise ConfigError("root did not produce a center for every frame")
    stats = dict(stats)
    stats["weight_fallbacks"] = root_local.get("fallbacks", 0)
    return centers, stats, engine


# primary entry point: the network-mapped tracker
track = track_noc


def centers_to_csv(centers: list[tuple[int, int]]) -> str:
    """CSV rows ``frame,x,y`` with exact Q24.8 coordinates in decimal."""
    lines = ["frame,x,y"]
    for t, (x, y) in enumerate(centers):
        lines.append(f"{t},{x / 256:.8f},{y / 256:.8f}")
    return "\n".join(lines) + "\n"
