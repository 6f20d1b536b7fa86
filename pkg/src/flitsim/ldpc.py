"""Min-sum LDPC decoding over the Fano-plane incidence code.

The code is the point/line incidence structure of the projective plane of
order 2: seven bits, seven parity checks, every check touching three bits
and every bit sitting in three checks. Messages are 8-bit two's-complement
LLRs with saturating arithmetic; positive means "bit 0 more likely" and a
zero posterior decodes to 1.

Check nodes come in two flavours, selectable per run:

* literal mode  -- each output is the plain signed minimum of the other
  two inputs;
* sign mode     -- each output is the product of the other two inputs'
  signs times the minimum of their magnitudes (the standard min-sum
  update; this one actually corrects errors on bipolar LLRs).

``decode`` is the sequential reference; ``decode_noc`` runs the identical
quantized arithmetic as message-passing PEs over a network, so the two
agree bit for bit. Bit nodes keep their channel LLR alive by sending it
to themselves each iteration, and their check-message inputs are preloaded
with zeros so the first firing emits exactly the channel LLRs.
"""

from __future__ import annotations

from dataclasses import dataclass

from .engine import AppGraph, Engine
from .errors import ConfigError
from .gf2 import gf2_nullspace, gf2_rank
from .network import build_topology
from .partition import PartitionSpec, partition_network
from .pe import CollectorSpec, DistEntry, PEDescriptor, SlotSpec
from .topology import TopologyConfig

LLR_MIN = -128
LLR_MAX = 127

# Lines of the Fano plane over points 1..7, fixed labeling for reproducibility.
_FANO_LINES = (
    (1, 2, 3),
    (1, 4, 5),
    (1, 6, 7),
    (2, 4, 6),
    (2, 5, 7),
    (3, 4, 7),
    (3, 5, 6),
)


def sat(x: int) -> int:
    if x > LLR_MAX:
        return LLR_MAX
    if x < LLR_MIN:
        return LLR_MIN
    return x


def to_wire(llr: int) -> int:
    return llr & 0xFF


def from_wire(word: int) -> int:
    return word - 256 if word & 0x80 else word


@dataclass(frozen=True)
class LdpcCode:
    n: int
    h_rows: tuple[int, ...]  # row bitsets, bit b = column b
    check_bits: tuple[tuple[int, ...], ...]  # per check, ascending bit ids
    bit_checks: tuple[tuple[int, ...], ...]  # per bit, ascending check ids


def fano_parity_matrix() -> LdpcCode:
    """The 7x7 incidence code, rows indexed by lines, columns by points."""
    n = 7
    rows = []
    check_bits = []
    for line in _FANO_LINES:
        bits = tuple(p - 1 for p in line)
        check_bits.append(bits)
        rows.append(sum(1 << b for b in bits))
    bit_checks = []
    for b in range(n):
        bit_checks.append(tuple(c for c, bits in enumerate(check_bits) if b in bits))
    return LdpcCode(
        n=n,
        h_rows=tuple(rows),
        check_bits=tuple(check_bits),
        bit_checks=tuple(bit_checks),
    )


def codewords(code: LdpcCode) -> list[int]:
    """All vectors in the nullspace of H (2^(n - rank) of them)."""
    basis = gf2_nullspace(list(code.h_rows), code.n)
    words = {0}
    for b in basis:
        words |= {w ^ b for w in words}
    return sorted(words)


def code_rank(code: LdpcCode) -> int:
    return gf2_rank(list(code.h_rows), code.n)


def check_node_update(u1: int, u2: int, u3: int, sign_mode: bool) -> tuple[int, int, int]:
    """One check node firing: each output excludes its own input."""
    if sign_mode:

        def extr(a: int, b: int) -> int:
            s = (1 if a >= 0 else -1) * (1 if b >= 0 else -1)
            return sat(s * min(abs(a), abs(b)))

        return extr(u2, u3), extr(u1, u3), extr(u1, u2)
    return min(u2, u3), min(u1, u3), min(u1, u2)


def bit_node_update(u0: int, v1: int, v2: int, v3: int) -> tuple[int, int, int, int]:
    """Posterior sum plus the three extrinsic bit-to-check messages."""
    total = sat(u0 + v1 + v2 + v3)
    return total, sat(total - v1), sat(total - v2), sat(total - v3)


def decide(total: int) -> int:
    return 0 if total > 0 else 1


def decode(
    code: LdpcCode,
    llr: list[int],
    n_iters: int,
    sign_mode: bool = True,
    early_exit: bool = False,
) -> list[int]:
    """Sequential reference decoder; fixed iteration count by default."""
    if n_iters < 1:
        raise ConfigError("n_iters must be >= 1")
    if len(llr) != code.n:
        raise ConfigError(f"expected {code.n} LLRs")
    for x in llr:
        if not LLR_MIN <= x <= LLR_MAX:
            raise ConfigError(f"LLR {x} outside 8-bit range")
    # u[b][c]: bit b -> check c, initialized to the channel LLRs
    u = {b: {c: llr[b] for c in code.bit_checks[b]} for b in range(code.n)}
    totals = list(llr)
    for _ in range(n_iters):
        v = {c: {} for c in range(len(code.check_bits))}
        for c, bits in enumerate(code.check_bits):
            b1, b2, b3 = bits
            v1, v2, v3 = check_node_update(u[b1][c], u[b2][c], u[b3][c], sign_mode)
            v[c][b1], v[c][b2], v[c][b3] = v1, v2, v3
        for b in range(code.n):
            c1, c2, c3 = code.bit_checks[b]
            total, u1, u2, u3 = bit_node_update(llr[b], v[c1][b], v[c2][b], v[c3][b])
            u[b][c1], u[b][c2], u[b][c3] = u1, u2, u3
            totals[b] = total
        if early_exit:
            decoded = [decide(t) for t in totals]
            word = sum(bit << i for i, bit in enumerate(decoded))
            if all((row & word).bit_count() % 2 == 0 for row in code.h_rows):
                break
    return [decide(t) for t in totals]


# -- network mapping ----------------------------------------------------------

# bit-node slots: 0 = channel LLR, 1..3 = messages from its checks
_B_U0 = 0
# check-node slots: 0..2 = messages from its bits


def build_ldpc_noc(
    code: LdpcCode,
    llr: list[int],
    n_iters: int,
    sign_mode: bool,
    flit_width: int,
) -> tuple[AppGraph, int]:
    """Application graph: bit PEs, check PEs, plus a host endpoint.

    Placement is fixed: bit nodes on endpoints 0..6, check nodes on 7..13,
    the host (which injects the channel LLRs and gathers the decisions) on
    endpoint 14. Returns (graph, host_endpoint).
    """
    n = code.n
    host = 2 * n

    graph = AppGraph(flit_width=flit_width)
    for b in range(n):
        checks = code.bit_checks[b]
        slots = tuple(SlotSpec(slot_id=s, expected_count=1, word_width=8) for s in range(4))
        table = [DistEntry(output_slot=_B_U0, dst_endpoint=b, dst_slot=_B_U0, word_width=8)]
        for pos, c in enumerate(checks):
            check_slot = code.check_bits[c].index(b)
            table.append(
                DistEntry(output_slot=1 + pos, dst_endpoint=n + c, dst_slot=check_slot, word_width=8)
            )
        table.append(DistEntry(output_slot=4, dst_endpoint=host, dst_slot=b, word_width=8))
        graph.add(
            PEDescriptor(
                endpoint=b,
                collector=CollectorSpec(mode="gather", slots=slots),
                processor=_bit_processor(n_iters),
                distributor_table=tuple(table),
                preload={1: [to_wire(0)], 2: [to_wire(0)], 3: [to_wire(0)]},
                name=f"bit{b}",
            )
        )
    for c in range(n):
        bits = code.check_bits[c]
        slots = tuple(SlotSpec(slot_id=s, expected_count=1, word_width=8) for s in range(3))
        table = []
        for pos, b in enumerate(bits):
            bit_slot = 1 + code.bit_checks[b].index(c)
            table.append(
                DistEntry(output_slot=pos, dst_endpoint=b, dst_slot=bit_slot, word_width=8)
            )
        graph.add(
            PEDescriptor(
                endpoint=n + c,
                collector=CollectorSpec(mode="gather", slots=slots),
                processor=_check_processor(sign_mode),
                distributor_table=tuple(table),
                name=f"check{c}",
            )
        )
    host_slots = tuple(SlotSpec(slot_id=b, expected_count=1, word_width=8) for b in range(n))
    host_table = tuple(
        DistEntry(output_slot=b, dst_endpoint=b, dst_slot=_B_U0, word_width=8) for b in range(n)
    )
    graph.add(
        PEDescriptor(
            endpoint=host,
            collector=CollectorSpec(mode="gather", slots=host_slots),
            processor=_host_processor(llr),
            distributor_table=host_table,
            preload={b: [0] for b in range(n)},
            name="host",
        )
    )
    return graph, host


def _bit_processor(n_iters: int):
    def processor(ctx, inputs):
        u0 = from_wire(inputs[_B_U0][0])
        v1, v2, v3 = (from_wire(inputs[s][0]) for s in (1, 2, 3))
        total, u1, u2, u3 = bit_node_update(u0, v1, v2, v3)
        if ctx.firing_index < n_iters:
            return {
                _B_U0: to_wire(u0),
                1: to_wire(u1),
                2: to_wire(u2),
                3: to_wire(u3),
            }
        return {4: decide(total)}

    return processor


def _check_processor(sign_mode: bool):
    def processor(ctx, inputs):
        u1, u2, u3 = (from_wire(inputs[s][0]) for s in (0, 1, 2))
        v1, v2, v3 = check_node_update(u1, u2, u3, sign_mode)
        return {0: to_wire(v1), 1: to_wire(v2), 2: to_wire(v3)}

    return processor


def _host_processor(llr: list[int]):
    def processor(ctx, inputs):
        if ctx.firing_index == 0:
            return {b: to_wire(x) for b, x in enumerate(llr)}
        ctx.local["decoded"] = [inputs[b][0] for b in range(len(llr))]
        return {}

    return processor


def default_ldpc_topology(kind: str = "mesh", flit_width: int = 16) -> TopologyConfig:
    """The stock placement target: a 4x4 mesh (14 PEs + host on 16 endpoints)."""
    if kind == "mesh":
        return TopologyConfig(kind="mesh", endpoint_count=16, dims=(4, 4), flit_width=flit_width)
    if kind == "torus":
        return TopologyConfig(kind="torus", endpoint_count=16, dims=(4, 4), flit_width=flit_width)
    if kind == "ring":
        return TopologyConfig(kind="ring", endpoint_count=15, dims=(15,), flit_width=flit_width)
    if kind == "fat_tree":
        return TopologyConfig(
            kind="fat_tree", endpoint_count=16, dims=(4, 2), flit_width=flit_width
        )
    raise ConfigError(f"unknown topology kind {kind!r}")


def decode_noc(
    code: LdpcCode,
    llr: list[int],
    n_iters: int,
    sign_mode: bool = True,
    topology: TopologyConfig | None = None,
    partition: PartitionSpec | None = None,
    log_messages: bool = False,
):
    """Decode over the network; returns (bits, stats, engine)."""
    topo = topology or default_ldpc_topology()
    if topo.endpoint_count < 2 * code.n + 1:
        raise ConfigError(
            f"need {2 * code.n + 1} endpoints (bit nodes, check nodes, host), "
            f"topology provides {topo.endpoint_count}"
        )
    graph, host = build_ldpc_noc(code, llr, n_iters, sign_mode, topo.flit_width)
    net = build_topology(topo)
    if partition is not None:
        partition_network(net, partition)
    engine = Engine(net, graph, log_messages=log_messages)
    stats = engine.run()
    decoded = engine.runtimes[host].local.get("decoded")
    if decoded is None or len(decoded) != code.n:
        raise ConfigError("host did not collect a full decision vector")
    return decoded, stats, engine
