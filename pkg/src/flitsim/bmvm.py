"""GF(2) matrix-vector products via one-time tile lookup tables.

Preprocessing partitions the n x n bit matrix A into k x k tiles and, for
every tile column i, tabulates the product of each tile A[j,i] with every
possible k-bit vector. Computing A @ v then costs one table part lookup
per sub-vector of v plus XOR accumulation -- no matrix bits are touched.

The network mapping assigns ``f`` consecutive sub-vector indices (and
their coalesced tables) to each processing element. Per round, every PE
looks up each owned sub-vector and sends word j of the returned part to
the PE owning sub-vector j, which XOR-folds incoming words into its
round accumulator; contributions addressed to the sender itself are
folded locally without entering the network. Iterated products A^r v run
as r dataflow rounds back to back -- a PE starts its next round as soon as
its own accumulators complete, with the envelope round parity keeping
neighbouring rounds apart. A designated host endpoint gathers the final
(or every) round's sub-vectors.
"""

from __future__ import annotations

from dataclasses import dataclass

from .engine import AppGraph, Engine
from .errors import CapacityError, ConfigError
from .gf2 import Gf2Matrix
from .network import build_topology
from .partition import PartitionSpec, partition_network
from .pe import CollectorSpec, DistEntry, PEDescriptor, SlotSpec
from .topology import TopologyConfig

DEFAULT_LUT_BUDGET_BITS = 1 << 28


class LutBank:
    """tables[i][p][j] = product of tile (j, i) with the k-bit vector p."""

    __slots__ = ("n", "k", "tables")

    def __init__(self, n: int, k: int, tables: list[list[list[int]]]):
        self.n = n
        self.k = k
        self.tables = tables

    @property
    def m(self) -> int:
        return self.n // self.k

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, LutBank)
            and (self.n, self.k) == (other.n, other.k)
            and self.tables == other.tables
        )

    def bits_per_table(self) -> int:
        return (1 << self.k) * self.m * self.k


def subvector(v: int, i: int, k: int) -> int:
    return (v >> (i * k)) & ((1 << k) - 1)


def assemble(words: list[int], k: int) -> int:
    out = 0
    for i, w in enumerate(words):
        out |= w << (i * k)
    return out


def preprocess(a: Gf2Matrix, k: int, memory_budget_bits: int = DEFAULT_LUT_BUDGET_BITS) -> LutBank:
    """Build the full lookup-table bank for A; independent of any vector."""
    n = a.n
    if k < 1 or n % k:
        raise ConfigError(f"tile size {k} must divide the dimension {n}")
    if k > 16:
        raise ConfigError(f"tile size {k} exceeds the supported maximum of 16")
    m = n // k
    total_bits = m * (1 << k) * m * k
    if total_bits > memory_budget_bits:
        raise CapacityError(
            f"lookup tables need {total_bits} bits, budget is {memory_budget_bits}"
        )
    mask = (1 << k) - 1
    # chunk[row][i] = k matrix bits of row `row` in tile column i
    chunks = [[(row >> (i * k)) & mask for i in range(m)] for row in a.rows]
    parts = 1 << k
    tables = [[[0] * m for _ in range(parts)] for _ in range(m)]
    for j in range(m):
        rows = chunks[j * k : (j + 1) * k]
        for i in range(m):
            cols = [0] * k
            for t in range(k):
                seg = rows[t][i]
                for c in range(k):
                    cols[c] |= ((seg >> c) & 1) << t
            # products of this tile with every k-bit vector, by gray-style DP
            prods = [0] * parts
            for p in range(1, parts):
                low = p & -p
                prods[p] = prods[p ^ low] ^ cols[low.bit_length() - 1]
            ti = tables[i]
            for p in range(1, parts):
                ti[p][j] = prods[p]
    return LutBank(n, k, tables)


def lut_lookup(bank: LutBank, i: int, v_i: int) -> list[int]:
    """Part ``v_i`` of table i: the products {A[j,i] @ v_i} for all j (0-based i)."""
    return list(bank.tables[i][v_i])


@dataclass
class FoldedBank:
    """``f`` consecutive tables coalesced per processing element."""

    bank: LutBank
    f: int

    @property
    def pe_count(self) -> int:
        return self.bank.m // self.f

    def owned(self, pe: int) -> range:
        return range(pe * self.f, (pe + 1) * self.f)

    def owner(self, i: int) -> int:
        return i // self.f

    def lookup(self, i: int, v_i: int) -> list[int]:
        return lut_lookup(self.bank, i, v_i)


def coalesce_luts(bank: LutBank, f: int) -> FoldedBank:
    if f < 1 or bank.m % f:
        raise ConfigError(f"folding factor {f} must divide the sub-vector count {bank.m}")
    return FoldedBank(bank=bank, f=f)


def bmvm_compute(bank: LutBank, v: int) -> int:
    """Pure lookup-and-XOR product A @ v, no network involved."""
    m, k = bank.m, bank.k
    acc = [0] * m
    for i in range(m):
        part = bank.tables[i][subvector(v, i, k)]
        for j in range(m):
            acc[j] ^= part[j]
    return assemble(acc, k)


@dataclass
class BmvmJob:
    n: int
    k: int
    f: int
    r: int
    vectors: list[int]
    topology: TopologyConfig
    matrix: Gf2Matrix | None = None
    folded: FoldedBank | None = None
    partition: PartitionSpec | None = None
    checkpoints: str = "final"  # "final" | "all"
    firing_cost: int = 1
    log_messages: bool = False

    def pe_count(self) -> int:
        return self.n // (self.k * self.f)

    def validate(self) -> None:
        if self.n < 1 or self.k < 1 or self.n % self.k:
            raise ConfigError(f"tile size {self.k} must divide n={self.n}")
        m = self.n // self.k
        if self.f < 1 or m % self.f:
            raise ConfigError(f"folding factor {self.f} must divide n/k={m}")
        if self.r < 1:
            raise ConfigError("iteration count must be >= 1")
        if self.checkpoints not in ("final", "all"):
            raise ConfigError(f"unknown checkpoint mode {self.checkpoints!r}")
        demand = self.pe_count() + 1  # PEs plus the collecting host
        if demand > self.topology.endpoint_count:
            raise ConfigError(
                f"need {demand} endpoints, topology provides {self.topology.endpoint_count}"
            )


def build_bmvm_graph(
    n: int,
    k: int,
    f: int,
    r: int,
    flit_width: int,
    v0: int = 0,
    folded: FoldedBank | None = None,
    checkpoints: str = "final",
    firing_cost: int = 1,
):
    """PE graph for the r-round product; ``folded=None`` builds structure only.

    Endpoints 0..P-1 carry the PEs, endpoint P the host. Each PE has one
    reduce slot per owned sub-vector (expected n/k contributions per
    round), preloaded with the starting sub-vector for round 0.
    """
    m = n // k
    p_count = m // f
    host = p_count
    all_mode = checkpoints == "all"
    rounds_to_host = r if all_mode else 1
    final_base = f * m

    graph = AppGraph(flit_width=flit_width)
    for p in range(p_count):
        slots = tuple(
            SlotSpec(slot_id=local, expected_count=m, word_width=k, fold="xor")
            for local in range(f)
        )
        table = []
        for local in range(f):
            for j in range(m):
                table.append(
                    DistEntry(
                        output_slot=local * m + j,
                        dst_endpoint=j // f,
                        dst_slot=j % f,
                        word_width=k,
                    )
                )
            g = p * f + local
            table.append(
                DistEntry(
                    output_slot=final_base + local,
                    dst_endpoint=host,
                    dst_slot=g,
                    word_width=k,
                )
            )
        preload = {local: subvector(v0, p * f + local, k) for local in range(f)}
        graph.add(
            PEDescriptor(
                endpoint=p,
                collector=CollectorSpec(mode="reduce", slots=slots),
                processor=_pe_processor(folded, p, m, f, r, final_base, all_mode),
                distributor_table=tuple(table),
                firing_cost=firing_cost,
                preload=preload,
                name=f"pe{p}",
            )
        )

    host_slots = tuple(
        SlotSpec(slot_id=g, expected_count=rounds_to_host, word_width=k) for g in range(m)
    )
    graph.add(
        PEDescriptor(
            endpoint=host,
            collector=CollectorSpec(mode="gather", slots=host_slots),
            processor=_host_processor(),
            distributor_table=(),
            name="host",
        )
    )
    return graph, list(range(p_count)), host


def _pe_processor(folded, p, m, f, r, final_base, all_mode):
    def processor(ctx, inputs):
        if folded is None:
            raise ConfigError("graph was built structure-only; no lookup tables attached")
        t = ctx.firing_index
        out = {}
        if t < r:
            for local in range(f):
                part = folded.lookup(p * f + local, inputs[local])
                base = local * m
                for j in range(m):
                    out[base + j] = part[j]
        if t == r or (all_mode and 1 <= t <= r):
            for local in range(f):
                out[final_base + local] = inputs[local]
        return out

    return processor


def _host_processor():
    def processor(ctx, inputs):
        ctx.local["rounds"] = {g: list(words) for g, words in inputs.items()}
        return {}

    return processor


def bmvm_iterate(job: BmvmJob):
    """Run A^r over the network for every column; returns (results, stats).

    ``results[c]`` is the final vector for column c; when checkpointing
    every round, ``stats["checkpoints"][c]`` holds the full trajectory
    v(1)..v(r).
    """
    job.validate()
    folded = job.folded
    if folded is None:
        if job.matrix is None:
            raise ConfigError("job needs either a matrix or a preprocessed bank")
        folded = coalesce_luts(preprocess(job.matrix, job.k), job.f)
    m = job.n // job.k
    results = []
    checkpoints = []
    totals = {"cycles": 0, "flits_injected": 0, "flits_ejected": 0, "latency_max": 0, "latency_sum": 0}
    per_column_cycles = []
    for v0 in job.vectors:
        graph, _, host = build_bmvm_graph(
            job.n,
            job.k,
            job.f,
            job.r,
            flit_width=job.topology.flit_width,
            v0=v0,
            folded=folded,
            checkpoints=job.checkpoints,
            firing_cost=job.firing_cost,
        )
        net = build_topology(job.topology)
        if job.partition is not None:
            partition_network(net, job.partition)
        engine = Engine(net, graph, log_messages=job.log_messages)
        stats = engine.run()
        rounds = engine.runtimes[host].local.get("rounds")
        if rounds is None or sorted(rounds) != list(range(m)):
            raise ConfigError("host did not collect every sub-vector")
        trajectory = [
            assemble([rounds[g][t] for g in range(m)], job.k)
            for t in range(len(rounds[0]))
        ]
        checkpoints.append(trajectory)
        results.append(trajectory[-1])
        for key in ("flits_injected", "flits_ejected", "latency_sum"):
            totals[key] += stats[key]
        totals["cycles"] += stats["cycles"]
        totals["latency_max"] = max(totals["latency_max"], stats["latency_max"])
        per_column_cycles.append(stats["cycles"])
    totals["per_column_cycles"] = per_column_cycles
    if job.checkpoints == "all":
        totals["checkpoints"] = checkpoints
    return results, totals
