"""Splitting a NoC over multiple chips with serialized cut links.

A partition assigns every router to a chip. Links whose two routers land
on different chips are replaced by a pair of serializer/deserializer
endpoints per direction: the transmitter latches a presented flit bundle
(valid, head, tail, dst, VC, payload) and shifts it over a narrow lane one
beat per cycle, most significant beat first; the receiver reassembles the
bundle and presents the flit to the downstream router under the same
occupancy-lookahead flow control as an ordinary link. The transmitter
stalls holding its final beat while the receiver cannot deliver, so the
link is lossless under sustained backpressure.

Per-flit one-way latency over a cut link is ``beats_per_bundle + 1`` cycles
more than the direct link it replaces (one latch cycle plus one cycle per
beat); sustained throughput is one flit every ``beats_per_bundle`` cycles.

Both chips share the simulation clock. Partitions only reshape timing:
delivered traffic and computed results are bit-identical to the
monolithic network.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import ConfigError
from .flit import BundleFormat
from .network import DirectChannel, NetworkState


def serdes_serialize(bundle: int, bundle_width: int, lane_width: int) -> list[int]:
    """Split a bundle into MSB-first beats, padding the LSB end."""
    if bundle_width <= 0:
        raise ConfigError("bundle_width must be positive")
    if not 1 <= lane_width:
        raise ConfigError("lane_width must be >= 1")
    if bundle < 0 or bundle >> bundle_width:
        raise ConfigError("bundle value does not fit bundle_width")
    beats = -(-bundle_width // lane_width)
    padded = bundle << (beats * lane_width - bundle_width)
    mask = (1 << lane_width) - 1
    return [(padded >> ((beats - 1 - i) * lane_width)) & mask for i in range(beats)]


def serdes_deserialize(beats: list[int], bundle_width: int, lane_width: int) -> int:
    """Exact inverse of :func:`serdes_serialize`."""
    if bundle_width <= 0:
        raise ConfigError("bundle_width must be positive")
    expected = -(-bundle_width // lane_width)
    if len(beats) != expected:
        raise ConfigError(f"expected {expected} beats, got {len(beats)}")
    value = 0
    for beat in beats:
        value = (value << lane_width) | beat
    return value >> (expected * lane_width - bundle_width)


class SerdesChannel:
    """One direction of a cut link: tx latch + shifter, rx reassembly."""

    is_serdes = True
    __slots__ = (
        "src_router",
        "src_port",
        "dst_router",
        "dst_port",
        "dst_endpoint",
        "lane_width",
        "fmt",
        "beats_per_bundle",
        "latch",
        "shift_flit",
        "shift_beats",
        "beats_left",
        "rx_beats",
        "rx_pending",
        "_deliver",
        "_emit",
        "_complete",
        "_latch_move",
    )

    def __init__(self, direct: DirectChannel, fmt: BundleFormat, lane_width: int):
        self.src_router = direct.src_router
        self.src_port = direct.src_port
        self.dst_router = direct.dst_router
        self.dst_port = direct.dst_port
        self.dst_endpoint = -1
        self.lane_width = lane_width
        self.fmt = fmt
        self.beats_per_bundle = -(-fmt.width // lane_width)
        self.latch = None
        self.shift_flit = None
        self.shift_beats = []
        self.beats_left = 0
        self.rx_beats = []
        self.rx_pending = None
        self._deliver = self._emit = self._complete = self._latch_move = False

    def occupancy(self) -> int:
        n = 0 if self.latch is None else 1
        n += 0 if self.shift_flit is None else 1
        n += 0 if self.rx_pending is None else 1
        return n

    def plan(self, net: NetworkState) -> bool:
        pending = self.rx_pending
        deliver = False
        if pending is not None:
            q = net.routers[self.dst_router].queues[self.dst_port][pending.vc]
            deliver = len(q) < net.depth
        emit = complete = False
        if self.shift_flit is not None:
            if self.beats_left > 1:
                emit = True
            elif pending is None or deliver:
                # final beat leaves only once the rx slot frees up
                emit = complete = True
        latch_move = self.latch is not None and (self.shift_flit is None or complete)
        self._deliver = deliver
        self._emit = emit
        self._complete = complete
        self._latch_move = latch_move
        return deliver or emit or latch_move

    def commit(self, net: NetworkState) -> int:
        events = 0
        if self._deliver:
            flit = self.rx_pending
            self.rx_pending = None
            router = net.routers[self.dst_router]
            router.queues[self.dst_port][flit.vc].append(flit)
            router.queued += 1
            events += 1
        if self._emit:
            idx = self.beats_per_bundle - self.beats_left
            self.rx_beats.append(self.shift_beats[idx])
            self.beats_left -= 1
            events += 1
            if self._complete:
                bundle = serdes_deserialize(self.rx_beats, self.fmt.width, self.lane_width)
                flit = self.fmt.decode(bundle)
                flit.src = self.shift_flit.src
                flit.inject_cycle = self.shift_flit.inject_cycle
                self.rx_pending = flit
                self.rx_beats = []
                self.shift_flit = None
                self.shift_beats = []
        if self._latch_move:
            flit = self.latch
            self.latch = None
            self.shift_flit = flit
            self.shift_beats = serdes_serialize(self.fmt.encode(flit), self.fmt.width, self.lane_width)
            self.beats_left = self.beats_per_bundle
            events += 1
        return events

    def state_key(self) -> str:
        parts = [
            "-" if self.latch is None else repr(self.latch.key()),
            "-" if self.shift_flit is None else repr(self.shift_flit.key()),
            str(self.beats_left),
            repr(self.rx_beats),
            "-" if self.rx_pending is None else repr(self.rx_pending.key()),
        ]
        return f"S{self.src_router}.{self.src_port}|" + "|".join(parts)


def step_link(link: SerdesChannel, net: NetworkState) -> int:
    """Advance one serialized link by one cycle (normally done by ``step``)."""
    if link.plan(net):
        return link.commit(net)
    return 0


@dataclass(frozen=True)
class PartitionSpec:
    assignment: dict[int, int]
    lane_width: int = 8

    def validate(self, n_routers: int) -> int:
        if self.lane_width < 1:
            raise ConfigError("lane_width must be >= 1")
        missing = [r for r in range(n_routers) if r not in self.assignment]
        if missing:
            raise ConfigError(f"partition spec misses routers {missing}")
        pids = set(self.assignment.values())
        n_parts = max(pids) + 1
        if pids != set(range(n_parts)):
            raise ConfigError("partition ids must form a contiguous range starting at 0")
        members = {p: 0 for p in range(n_parts)}
        for r in range(n_routers):
            members[self.assignment[r]] += 1
        empty = [p for p, c in members.items() if c == 0]
        if empty:
            raise ConfigError(f"empty partitions: {empty}")
        return n_parts


@dataclass
class SerdesLink:
    """One cut link (both directions) and its serializer state."""

    router_a: int
    router_b: int
    forward: SerdesChannel
    reverse: SerdesChannel
    beats_per_bundle: int = field(init=False)

    def __post_init__(self):
        self.beats_per_bundle = self.forward.beats_per_bundle


def partition_network(net: NetworkState, spec: PartitionSpec):
    """Cut every inter-partition link, splicing in serializer endpoints.

    Mutates ``net`` in place and returns ``(partitions, links)`` where
    ``partitions[p]`` lists the router ids of chip ``p``. Must be applied
    to a freshly built network (no traffic in flight).
    """
    n_parts = spec.validate(net.plan.n_routers)
    if net.cycle != 0 or net.in_flight != 0:
        raise ConfigError("partitioning requires an idle, freshly built network")
    fmt = BundleFormat(net.n_endpoints, net.vcs, net.flit_width)
    assignment = spec.assignment

    replaced: dict[tuple[int, int], SerdesChannel] = {}
    for i, ch in enumerate(net.channels):
        if ch.is_serdes or ch.dst_endpoint >= 0:
            continue
        if assignment[ch.src_router] == assignment[ch.dst_router]:
            continue
        serdes = SerdesChannel(ch, fmt, spec.lane_width)
        net.channels[i] = serdes
        net.routers[ch.src_router].out_channel[ch.src_port] = serdes
        net.routers[ch.dst_router].in_channel[ch.dst_port] = serdes
        replaced[(ch.src_router, ch.src_port)] = serdes

    links = []
    seen = set()
    for (router, port), serdes in sorted(replaced.items()):
        if (router, port) in seen:
            continue
        other = replaced[(serdes.dst_router, serdes.dst_port)]
        seen.add((other.src_router, other.src_port))
        links.append(SerdesLink(router_a=router, router_b=serdes.dst_router, forward=serdes, reverse=other))

    partitions = [[] for _ in range(n_parts)]
    for r in range(net.plan.n_routers):
        partitions[assignment[r]].append(r)
    return partitions, links


def step_partitions(net: NetworkState, partitions: list[list[int]], order: list[int] | None = None) -> int:
    """Advance one cycle stepping each chip's routers as its own group.

    Models the chips as separate logical processes synchronized by a
    cycle barrier: every chip computes its decisions against the same
    committed state, beats cross the cut links, and one global commit
    ends the cycle. Because the update is two-phase, any chip order
    (``order`` permutes it) yields the same state as ``net.step()``.
    """
    chip_order = order if order is not None else list(range(len(partitions)))
    router_order = [r for p in chip_order for r in partitions[p]]
    return net.step(router_order=router_order)


def parse_partition_file(text: str) -> dict[int, int]:
    """Parse ``router_id:partition_id`` lines; ``#`` starts a comment."""
    assignment: dict[int, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            router_s, part_s = line.split(":")
            router, part = int(router_s), int(part_s)
        except ValueError as exc:
            raise ConfigError(f"bad partition line {lineno}: {raw!r}") from exc
        if router in assignment:
            raise ConfigError(f"router {router} assigned twice (line {lineno})")
        if part < 0:
            raise ConfigError(f"negative partition id on line {lineno}")
        assignment[router] = part
    if not assignment:
        raise ConfigError("empty partition spec")
    return assignment


def format_partition_file(assignment: dict[int, int]) -> str:
    lines = [f"{r}:{assignment[r]}" for r in sorted(assignment)]
    return "\n".join(lines) + "\n"
