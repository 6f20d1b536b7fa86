"""Processing elements: data collector, processor, data distributor.

A PE hangs off one network endpoint. Incoming flits -- possibly belonging
to interleaved packets on different VCs -- are reassembled into message
envelopes and sorted into per-argument storage by the data collector, even
when messages arrive out of order across arguments. Once every argument
slot has its expected data for the current round, the (deterministic)
processor fires once; the data distributor packetizes its results and
queues them for injection.

Two collector modes:

* ``gather`` -- each slot is a bounded FIFO of words; a firing consumes
  exactly ``expected_count`` words per slot, in arrival order. A full
  FIFO refuses further words, which backpressures the network.
* ``reduce`` -- each slot folds arriving words into an accumulator with a
  commutative-associative operator (XOR by default) and O(1) storage.
  Two accumulators per slot, selected by a 1-bit round parity carried in
  every message, keep a round's stragglers from mixing with the next
  round's early arrivals.

Message envelope layout inside each flit payload, most significant first:
``round_parity (1) | slot_tag | data fragment``. Words wider than one
fragment are split across the flits of one packet, most significant
fragment first, every flit repeating the header so the collector can
demultiplex without per-source state.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, NamedTuple

from .errors import ConfigError, ProtocolError
from .flit import Flit


class Envelope(NamedTuple):
    parity: int
    slot: int
    word: int


def fold_xor(a: int, b: int) -> int:
    return a ^ b


FOLD_OPS: dict[str, tuple[Callable[[int, int], int], int]] = {
    "xor": (fold_xor, 0),
}


@dataclass(frozen=True)
class SlotSpec:
    slot_id: int
    expected_count: int
    word_width: int
    fold: str | None = None  # reduce mode only; name in FOLD_OPS
    capacity: int | None = None  # gather FIFO bound; default 2x expected

    def resolved_capacity(self) -> int:
        return self.capacity if self.capacity is not None else 2 * self.expected_count


@dataclass(frozen=True)
class CollectorSpec:
    mode: str  # "gather" | "reduce"
    slots: tuple[SlotSpec, ...]

    def __post_init__(self):
        if self.mode not in ("gather", "reduce"):
            raise ConfigError(f"unknown collector mode {self.mode!r}")
        ids = [s.slot_id for s in self.slots]
        if ids != list(range(len(ids))):
            raise ConfigError("slot ids must be 0..n-1 in order")
        for s in self.slots:
            if s.expected_count < 1:
                raise ConfigError(f"slot {s.slot_id}: expected_count must be >= 1")
            if s.word_width < 1:
                raise ConfigError(f"slot {s.slot_id}: word_width must be >= 1")
            if s.resolved_capacity() < s.expected_count:
                raise ConfigError(
                    f"slot {s.slot_id}: capacity {s.resolved_capacity()} cannot hold "
                    f"the expected {s.expected_count} words"
                )
            if self.mode == "reduce" and (s.fold or "xor") not in FOLD_OPS:
                raise ConfigError(f"slot {s.slot_id}: unknown fold {s.fold!r}")


class CollectorState:
    """Per-slot argument storage plus the start-condition flag."""

    __slots__ = ("spec", "fifos", "acc", "counts", "parity", "start_pending")

    def __init__(self, spec: CollectorSpec):
        self.spec = spec
        n = len(spec.slots)
        if spec.mode == "gather":
            self.fifos = [[] for _ in range(n)]
            self.acc = None
            self.counts = None
        else:
            identities = [FOLD_OPS[s.fold or "xor"][1] for s in spec.slots]
            self.acc = [[identities[i], identities[i]] for i in range(n)]
            self.counts = [[0, 0] for _ in range(n)]
            self.fifos = None
        self.parity = 0
        self.start_pending = False

    def _recompute_start(self) -> None:
        spec = self.spec
        if spec.mode == "gather":
            self.start_pending = all(
                len(self.fifos[s.slot_id]) >= s.expected_count for s in spec.slots
            )
        else:
            p = self.parity
            self.start_pending = all(
                self.counts[s.slot_id][p] >= s.expected_count for s in spec.slots
            )


def collector_accept(state: CollectorState, spec: CollectorSpec, env: Envelope) -> bool:
    """Sort one envelope into argument storage.

    Returns False (word not consumed; caller must retry) when a gather
    FIFO is at capacity -- that is the backpressure signal toward the
    network. Unknown slots raise ProtocolError.
    """
    if not 0 <= env.slot < len(spec.slots):
        raise ProtocolError(f"unknown slot tag {env.slot}")
    slot = spec.slots[env.slot]
    if spec.mode == "gather":
        fifo = state.fifos[env.slot]
        if len(fifo) >= slot.resolved_capacity():
            return False
        fifo.append(env.word)
    else:
        op, _ = FOLD_OPS[slot.fold or "xor"]
        p = env.parity & 1
        state.acc[env.slot][p] = op(state.acc[env.slot][p], env.word)
        state.counts[env.slot][p] += 1
    state._recompute_start()
    return True


def preload_gather(state: CollectorState, slot: int, words: list[int]) -> None:
    state.fifos[slot].extend(words)
    state._recompute_start()


def preload_reduce(state: CollectorState, slot: int, value: int) -> None:
    """Mark a reduce slot's current round as already complete with ``value``."""
    spec = state.spec.slots[slot]
    state.acc[slot][state.parity] = value
    state.counts[slot][state.parity] = spec.expected_count
    state._recompute_start()


def fire_processor(pe: "PEDescriptor", state: CollectorState, firing_index: int = 0, local: dict | None = None):
    """Consume one round of arguments and run the processor once.

    Gather slots yield their first ``expected_count`` words (arrival
    order); reduce slots yield the completed-parity accumulator, which is
    then reset to the fold identity while the parity flips. Returns the
    processor's result mapping (output slot -> word), possibly empty.
    """
    spec = pe.collector
    if not state.start_pending:
        raise ProtocolError(f"endpoint {pe.endpoint}: fired without start_pending")
    inputs: dict[int, object] = {}
    if spec.mode == "gather":
        for s in spec.slots:
            fifo = state.fifos[s.slot_id]
            inputs[s.slot_id] = fifo[: s.expected_count]
            del fifo[: s.expected_count]
    else:
        p = state.parity
        for s in spec.slots:
            identity = FOLD_OPS[s.fold or "xor"][1]
            inputs[s.slot_id] = state.acc[s.slot_id][p]
            state.acc[s.slot_id][p] = identity
            state.counts[s.slot_id][p] = 0
        state.parity = p ^ 1
    state._recompute_start()
    ctx = FiringContext(firing_index=firing_index, local=local if local is not None else {})
    results = pe.processor(ctx, inputs)
    return results or {}


@dataclass
class FiringContext:
    """Deterministic per-firing context handed to processors."""

    firing_index: int
    local: dict


@dataclass(frozen=True)
class DistEntry:
    output_slot: int
    dst_endpoint: int
    dst_slot: int
    word_width: int


@dataclass
class PEDescriptor:
    endpoint: int
    collector: CollectorSpec
    processor: Callable[[FiringContext, dict], dict | None]
    distributor_table: tuple[DistEntry, ...]
    firing_cost: int = 1
    preload: dict[int, object] = field(default_factory=dict)
    name: str = ""


@dataclass(frozen=True)
class EnvelopeFormat:
    """Fixed per-application framing of envelopes into flit payloads."""

    flit_width: int
    tag_bits: int

    @property
    def frag_bits(self) -> int:
        return self.flit_width - 1 - self.tag_bits

    def validate(self) -> None:
        if self.frag_bits < 1:
            raise ConfigError(
                f"flit width {self.flit_width} too narrow for tag of {self.tag_bits} bits"
            )

    def flits_per_word(self, word_width: int) -> int:
        return max(1, -(-word_width // self.frag_bits))

    def pack(self, env: Envelope, word_width: int, dst: int) -> list[Flit]:
        """Fragment one envelope into the flits of a single packet.

        Every flit repeats ``parity | slot_tag`` and carries the next
        fragment, most significant fragment first; the final fragment is
        right-aligned with ``word_width`` known to the receiver.
        """
        if env.word < 0 or (word_width and env.word >> word_width):
            raise ConfigError(f"word {env.word:#x} wider than declared {word_width} bits")
        if env.slot >> self.tag_bits:
            raise ConfigError(f"slot tag {env.slot} needs more than {self.tag_bits} bits")
        n = self.flits_per_word(word_width)
        frag = self.frag_bits
        header = ((env.parity & 1) << self.tag_bits) | env.slot
        flits = []
        remaining = word_width
        for i in range(n):
            take = min(frag, remaining) if remaining else 0
            remaining -= take
            fragment = (env.word >> remaining) & ((1 << take) - 1) if take else 0
            payload = (header << frag) | fragment
            flits.append(Flit(dst=dst, payload=payload, head=(i == 0), tail=(i == n - 1)))
        return flits

    def unpack(self, flits: list[Flit], word_width: int) -> Envelope:
        """Reassemble one packet's flits back into an envelope."""
        n = self.flits_per_word(word_width)
        if len(flits) != n:
            raise ProtocolError(f"expected {n} flits for a {word_width}-bit word, got {len(flits)}")
        frag = self.frag_bits
        first = flits[0].payload >> frag
        parity = first >> self.tag_bits
        slot = first & ((1 << self.tag_bits) - 1)
        word = 0
        remaining = word_width
        for f in flits:
            if f.payload >> frag != first:
                raise ProtocolError("flits of one packet carry different headers")
            take = min(frag, remaining) if remaining else 0
            remaining -= take
            word = (word << take) | (f.payload & ((1 << take) - 1))
        return Envelope(parity=parity, slot=slot, word=word)

    def header_of(self, flit: Flit) -> tuple[int, int]:
        """(parity, slot) carried by any single flit of a packet."""
        first = flit.payload >> self.frag_bits
        return first >> self.tag_bits, first & ((1 << self.tag_bits) - 1)


def distribute(pe: PEDescriptor, results: dict[int, int], fmt: EnvelopeFormat, parity: int = 0):
    """Packetize firing results per the distributor table.

    Returns (remote flits in injection order, local envelopes). Entries
    whose destination is the PE's own endpoint are short-circuited locally
    and never enter the network. Result slots absent from the mapping emit
    nothing, which lets terminal firings go quiet; every present slot must
    appear in the table.
    """
    table_slots = {e.output_slot for e in pe.distributor_table}
    unknown = set(results) - table_slots
    if unknown:
        raise ConfigError(f"endpoint {pe.endpoint}: results for undeclared output slots {sorted(unknown)}")
    remote: list[Flit] = []
    local: list[tuple[int, Envelope]] = []
    for entry in pe.distributor_table:
        if entry.output_slot not in results:
            continue
        env = Envelope(parity=parity & 1, slot=entry.dst_slot, word=results[entry.output_slot])
        if entry.dst_endpoint == pe.endpoint:
            local.append((entry.dst_endpoint, env))
        else:
            remote.extend(fmt.pack(env, entry.word_width, entry.dst_endpoint))
    return remote, local
