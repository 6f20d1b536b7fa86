"""Runtime that drives an application graph of PEs over a network.

Each cycle, per endpoint in a fixed order: consume at most one delivered
flit (reassembling packets per VC and sorting complete envelopes into the
collector), fire the processor if its start condition holds, then offer at
most one queued output flit to the network; finally the network itself
steps. All PE work touches only that PE's state, so endpoint order cannot
change results -- only the network's two-phase commit orders traffic.

Messages whose destination is the sending PE itself never enter the
network; they are folded into the local collector when the firing's
outputs are released.

The run loop stops at quiescence: nothing in flight, no queued output, no
pending starts. A cycle in which nothing at all happened while work
remains can never make progress again (the system is deterministic), so
it is reported as a stall with a diagnostic rather than spinning forever.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from .errors import ConfigError, ProtocolError, SimulationStalled
from .network import NetworkState
from .pe import (
    CollectorState,
    EnvelopeFormat,
    PEDescriptor,
    collector_accept,
    distribute,
    fire_processor,
    preload_gather,
    preload_reduce,
)


@dataclass
class AppGraph:
    """A set of PE descriptors plus the envelope framing they share."""

    flit_width: int
    pes: dict[int, PEDescriptor] = field(default_factory=dict)

    def add(self, pe: PEDescriptor) -> PEDescriptor:
        if pe.endpoint in self.pes:
            raise ConfigError(f"endpoint {pe.endpoint} already has a PE")
        self.pes[pe.endpoint] = pe
        return pe

    def envelope_format(self) -> EnvelopeFormat:
        max_slots = max(len(pe.collector.slots) for pe in self.pes.values())
        tag_bits = max(1, (max_slots - 1).bit_length())
        fmt = EnvelopeFormat(flit_width=self.flit_width, tag_bits=tag_bits)
        fmt.validate()
        return fmt

    def validate(self) -> None:
        for pe in self.pes.values():
            for entry in pe.distributor_table:
                target = self.pes.get(entry.dst_endpoint)
                if target is None:
                    raise ConfigError(
                        f"endpoint {pe.endpoint}: destination endpoint {entry.dst_endpoint} has no PE"
                    )
                slots = target.collector.slots
                if not 0 <= entry.dst_slot < len(slots):
                    raise ConfigError(
                        f"endpoint {pe.endpoint}: destination slot {entry.dst_slot} "
                        f"not declared at endpoint {entry.dst_endpoint}"
                    )
                if entry.word_width != slots[entry.dst_slot].word_width:
                    raise ConfigError(
                        f"endpoint {pe.endpoint}: word width {entry.word_width} does not match "
                        f"slot {entry.dst_slot}@{entry.dst_endpoint} ({slots[entry.dst_slot].word_width})"
                    )
        self.envelope_format()

    def describe(self) -> str:
        """Human-readable dump of the graph wiring, for debugging."""
        fmt = self.envelope_format()
        lines = [f"flit_width={self.flit_width} tag_bits={fmt.tag_bits} frag_bits={fmt.frag_bits}"]
        for ep in sorted(self.pes):
            pe = self.pes[ep]
            label = f" ({pe.name})" if pe.name else ""
            lines.append(f"endpoint {ep}{label}: mode={pe.collector.mode}")
            for s in pe.collector.slots:
                lines.append(
                    f"  slot {s.slot_id}: expect {s.expected_count} x {s.word_width}b"
                    + (f" fold={s.fold}" if s.fold else "")
                )
            for e in pe.distributor_table:
                lines.append(
                    f"  out {e.output_slot} -> ep {e.dst_endpoint} slot {e.dst_slot} ({e.word_width}b)"
                )
        return "\n".join(lines)


class _PERuntime:
    __slots__ = (
        "desc",
        "state",
        "partial",
        "pending_env",
        "outbox",
        "firings",
        "busy",
        "held",
        "local",
    )

    def __init__(self, desc: PEDescriptor, vcs: int):
        self.desc = desc
        self.state = CollectorState(desc.collector)
        self.partial = [[] for _ in range(vcs)]
        self.pending_env = None
        self.outbox = deque()
        self.firings = 0
        self.busy = 0
        self.held = None
        self.local = {}


class Engine:
    def __init__(self, net: NetworkState, graph: AppGraph, log_messages: bool = False):
        if graph.flit_width != net.flit_width:
            raise ConfigError(
                f"graph flit width {graph.flit_width} != network flit width {net.flit_width}"
            )
        for ep in graph.pes:
            if not 0 <= ep < net.n_endpoints:
                raise ConfigError(f"PE endpoint {ep} exceeds topology capacity ({net.n_endpoints})")
        graph.validate()
        self.net = net
        self.graph = graph
        self.fmt = graph.envelope_format()
        self.message_log: list | None = [] if log_messages else None
        self._order = sorted(graph.pes)
        self.runtimes = {ep: _PERuntime(graph.pes[ep], net.vcs) for ep in self._order}
        for ep, rt in self.runtimes.items():
            spec = rt.desc.collector
            for slot, value in rt.desc.preload.items():
                if spec.mode == "gather":
                    preload_gather(rt.state, slot, list(value))
                else:
                    preload_reduce(rt.state, slot, value)

    # -- per-cycle stages ----------------------------------------------------

    def _pump(self, ep: int, rt: _PERuntime) -> int:
        if rt.pending_env is not None:
            env, src = rt.pending_env
            if not collector_accept(rt.state, rt.desc.collector, env):
                return 0
            rt.pending_env = None
            self._log(src, ep, env)
            return 1
        inbox = self.net.endpoints[ep].inbox
        if not inbox:
            return 0
        flit = inbox[0]
        parity, slot = self.fmt.header_of(flit)
        spec = rt.desc.collector
        if spec.mode == "gather":
            if not 0 <= slot < len(spec.slots):
                raise ProtocolError(f"endpoint {ep}: unknown slot tag {slot}")
            fifo = rt.state.fifos[slot]
            if len(fifo) >= spec.slots[slot].resolved_capacity():
                return 0  # backpressure: leave the flit in the network
        inbox.popleft()
        packet = rt.partial[flit.vc]
        if flit.head and packet:
            raise ProtocolError(f"endpoint {ep}: head flit while packet open on vc {flit.vc}")
        if not flit.head and not packet:
            raise ProtocolError(f"endpoint {ep}: body flit without head on vc {flit.vc}")
        packet.append(flit)
        if not flit.tail:
            return 1
        rt.partial[flit.vc] = []
        if not 0 <= slot < len(spec.slots):
            raise ProtocolError(f"endpoint {ep}: unknown slot tag {slot}")
        env = self.fmt.unpack(packet, spec.slots[slot].word_width)
        if collector_accept(rt.state, spec, env):
            self._log(packet[0].src, ep, env)
        else:
            rt.pending_env = (env, packet[0].src)
        return 1

    def _release(self, ep: int, rt: _PERuntime, results: dict, parity: int) -> None:
        remote, local = distribute(rt.desc, results, self.fmt, parity)
        rt.outbox.extend(remote)
        for _, env in local:
            if not collector_accept(rt.state, rt.desc.collector, env):
                raise ProtocolError(f"endpoint {ep}: local delivery refused (slot {env.slot} full)")
            self._log(ep, ep, env)

    def _fire(self, ep: int, rt: _PERuntime) -> int:
        if rt.busy:
            rt.busy -= 1
            if rt.busy == 0:
                results, parity = rt.held
                rt.held = None
                self._release(ep, rt, results, parity)
            return 1
        if not rt.state.start_pending:
            return 0
        results = fire_processor(rt.desc, rt.state, rt.firings, rt.local)
        rt.firings += 1
        parity = rt.firings & 1
        if rt.desc.firing_cost <= 1:
            self._release(ep, rt, results, parity)
        else:
            rt.busy = rt.desc.firing_cost - 1
            rt.held = (results, parity)
        return 1

    def _log(self, src: int, dst: int, env) -> None:
        if self.message_log is not None:
            self.message_log.append((self.net.cycle, src, dst, env.slot, env.parity))

    # -- main loop -------------------------------------------------------------

    def step(self) -> int:
        events = 0
        net = self.net
        for ep in self._order:
            rt = self.runtimes[ep]
            events += self._pump(ep, rt)
            events += self._fire(ep, rt)
            if rt.outbox and net.inject(ep, rt.outbox[0]):
                rt.outbox.popleft()
                events += 1
        events += net.step()
        return events

    def quiescent(self) -> bool:
        if self.net.in_flight:
            return False
        for ep in self._order:
            rt = self.runtimes[ep]
            if (
                rt.outbox
                or rt.busy
                or rt.state.start_pending
                or rt.pending_env is not None
                or any(rt.partial)
                or self.net.endpoints[ep].inbox
            ):
                return False
        return True

    def run(self, max_cycles: int = 10_000_000) -> dict:
        """Step until quiescence; returns the network stats counters."""
        while True:
            if self.net.cycle >= max_cycles:
                raise SimulationStalled(f"exceeded {max_cycles} cycles without quiescing")
            if self.step() == 0:
                if self.quiescent():
                    break
                raise SimulationStalled(self._stall_report())
        return self.net.stats()

    def _stall_report(self) -> str:
        waiting = []
        for ep in self._order:
            rt = self.runtimes[ep]
            flags = []
            if rt.outbox:
                flags.append(f"outbox={len(rt.outbox)}")
            if self.net.endpoints[ep].inbox:
                flags.append(f"inbox={len(self.net.endpoints[ep].inbox)}")
            if rt.pending_env is not None:
                flags.append("pending_env")
            if any(rt.partial):
                flags.append("open_packet")
            if rt.state.start_pending:
                flags.append("start_pending")
            if flags:
                waiting.append(f"ep{ep}:{','.join(flags)}")
        return (
            f"no progress at cycle {self.net.cycle}: in_flight={self.net.in_flight} "
            + (" ".join(waiting) if waiting else "(no PE flags)")
        )
