"""Deterministic cycle-stepped simulation of a packet-switched NoC.

Routers are input-queued: each input port keeps one bounded FIFO per
virtual channel. Switch arbitration is a separable input-first round-robin
allocator. Flow control is occupancy lookahead ("peek"): a flit is only
granted toward buffer space that was free in the previously committed
state, so queues can never overflow and no credits are needed.

Every cycle is a strict two-phase update. Phase A computes channel
advances, routing decisions and allocations purely from the pre-cycle
state; phase B commits all movements simultaneously. Stepping is therefore
bit-identical under any internal iteration order (``step`` accepts
explicit orders so tests can prove it).

Timing model: one cycle in the router (allocation into the outgoing link
register) plus one cycle on the link (register into the downstream queue),
i.e. a fixed two-cycle hop between adjacent routers. Endpoints inject and
eject at most one flit per cycle.

Multi-flit packets use head/tail framing with wormhole semantics: when a
head flit is granted, its (input port, VC) is latched onto the chosen
output VC until the tail passes, so body flits follow the head's path and
packets never interleave within one VC.
"""

from __future__ import annotations

import hashlib
from collections import deque

from .errors import ConfigError, ProtocolError
from .flit import Flit
from .topology import Topology, TopologyConfig, build_plan


class DirectChannel:
    """Single-flit staging register between two routers (or to an endpoint)."""

    is_serdes = False
    __slots__ = ("src_router", "src_port", "dst_router", "dst_port", "dst_endpoint", "reg", "_move")

    def __init__(self, src_router, src_port, dst_router=-1, dst_port=-1, dst_endpoint=-1):
        self.src_router = src_router
        self.src_port = src_port
        self.dst_router = dst_router
        self.dst_port = dst_port
        self.dst_endpoint = dst_endpoint
        self.reg = None
        self._move = False

    def occupancy(self) -> int:
        return 0 if self.reg is None else 1


class Router:
    __slots__ = (
        "idx",
        "n_ports",
        "vc_count",
        "queues",
        "in_rr",
        "out_rr",
        "active_route",
        "out_owner",
        "out_channel",
        "in_channel",
        "queued",
        "_in_best",
        "_out_best",
    )

    def __init__(self, idx: int, n_ports: int, vc_count: int):
        self.idx = idx
        self.n_ports = n_ports
        self.vc_count = vc_count
        self.queues = [[deque() for _ in range(vc_count)] for _ in range(n_ports)]
        self.in_rr = [0] * n_ports
        self.out_rr = [0] * n_ports
        self.active_route = [[None] * vc_count for _ in range(n_ports)]
        self.out_owner = [[None] * vc_count for _ in range(n_ports)]
        self.out_channel = [None] * n_ports
        self.in_channel = [None] * n_ports
        self.queued = 0
        self._in_best = [None] * n_ports
        self._out_best = [None] * n_ports


class EndpointState:
    __slots__ = ("idx", "router", "port", "inbox", "inbox_cap", "last_inject_cycle")

    def __init__(self, idx: int, router: int, port: int, inbox_cap: int):
        self.idx = idx
        self.router = router
        self.port = port
        self.inbox = deque()
        self.inbox_cap = inbox_cap
        self.last_inject_cycle = -1


def allocate(router: Router, requests) -> list:
    """Separable input-first round-robin arbitration for one router.

    ``requests`` holds tuples whose first three items are
    (input_port, vc, output_port); extra items ride along untouched.
    Stage one picks one requesting VC per input port, stage two picks one
    surviving input per output port, both by rotating priority. Pointers
    of granted ports advance one past the winner; losers stay put.
    """
    n = router.n_ports
    vcs = router.vc_count
    in_best = router._in_best
    out_best = router._out_best
    touched_in = []
    touched_out = []
    for req in requests:
        port = req[0]
        off = (req[1] - router.in_rr[port]) % vcs
        cur = in_best[port]
        if cur is None:
            in_best[port] = (off, req)
            touched_in.append(port)
        elif off < cur[0]:
            in_best[port] = (off, req)
    for port in touched_in:
        req = in_best[port][1]
        in_best[port] = None
        out_port = req[2]
        ooff = (port - router.out_rr[out_port]) % n
        cur = out_best[out_port]
        if cur is None:
            out_best[out_port] = (ooff, req)
            touched_out.append(out_port)
        elif ooff < cur[0]:
            out_best[out_port] = (ooff, req)
    grants = []
    for out_port in touched_out:
        req = out_best[out_port][1]
        out_best[out_port] = None
        grants.append(req)
        router.in_rr[req[0]] = (req[1] + 1) % vcs
        router.out_rr[out_port] = (req[0] + 1) % n
    return grants


class NetworkState:
    """Routers, links and endpoints advanced one cycle at a time."""

    # fixed timing model: allocation+crossbar in one cycle, wire in one cycle
    ROUTER_PIPELINE_CYCLES = 1
    LINK_TRAVERSAL_CYCLES = 1

    def __init__(self, plan: Topology):
        cfg = plan.config
        self.plan = plan
        self.config = cfg
        self.vcs = cfg.resolved_vc_count()
        self.depth = cfg.buffer_depth
        self.flit_width = cfg.flit_width
        self.n_endpoints = cfg.endpoint_count
        self.cycle = 0
        self.in_flight = 0
        self.flits_injected = 0
        self.flits_ejected = 0
        self.latency_sum = 0
        self.latency_max = 0

        self.routers = [Router(r, len(plan.ports[r]), self.vcs) for r in range(plan.n_routers)]
        self.channels: list = []
        self.endpoints: list[EndpointState] = []
        for e in range(self.n_endpoints):
            r, p = plan.endpoint_router[e], plan.endpoint_port[e]
            self.endpoints.append(EndpointState(e, r, p, cfg.buffer_depth))
            ch = DirectChannel(r, p, dst_endpoint=e)
            self.routers[r].out_channel[p] = ch
            self.channels.append(ch)
        for a, pa, b, pb in plan.links:
            ch = DirectChannel(a, pa, dst_router=b, dst_port=pb)
            self.routers[a].out_channel[pa] = ch
            self.routers[b].in_channel[pb] = ch
            self.channels.append(ch)

        self.route_table = [
            [plan.route_for(r, e) for e in range(self.n_endpoints)]
            for r in range(plan.n_routers)
        ]

    # -- traffic interface -------------------------------------------------

    def inject(self, endpoint: int, flit: Flit) -> bool:
        """Offer one flit at an endpoint; True iff the router accepted it.

        At most one attempt per endpoint per cycle; a rejected attempt
        (injection queue full) also consumes the cycle's slot.
        """
        ep = self.endpoints[endpoint]
        if not 0 <= flit.dst < self.n_endpoints:
            raise ConfigError(f"invalid destination endpoint {flit.dst}")
        if flit.payload < 0 or flit.payload >> self.flit_width:
            raise ConfigError(f"payload {flit.payload:#x} wider than {self.flit_width} bits")
        if not 0 <= flit.vc < self.vcs:
            raise ConfigError(f"invalid virtual channel {flit.vc}")
        if ep.last_inject_cycle == self.cycle:
            raise ProtocolError(f"endpoint {endpoint} already injected in cycle {self.cycle}")
        ep.last_inject_cycle = self.cycle
        router = self.routers[ep.router]
        q = router.queues[ep.port][flit.vc]
        if len(q) >= self.depth:
            return False
        if flit.src < 0:
            flit.src = endpoint
        flit.inject_cycle = self.cycle
        q.append(flit)
        router.queued += 1
        self.flits_injected += 1
        self.in_flight += 1
        return True

    def eject(self, endpoint: int) -> Flit | None:
        """Pop the oldest undelivered flit at an endpoint.

        The fabric hands over at most one flit per endpoint per cycle;
        callers that drain every cycle see exactly that flit.
        """
        inbox = self.endpoints[endpoint].inbox
        return inbox.popleft() if inbox else None

    # -- cycle update --------------------------------------------------------

    def step(self, router_order=None, channel_order=None) -> int:
        """Advance one cycle; returns the number of committed events.

        ``router_order`` / ``channel_order`` permute internal iteration
        only; the committed state is identical for every permutation.
        """
        routers = self.routers
        depth = self.depth
        channels = self.channels if channel_order is None else [self.channels[i] for i in channel_order]

        # Phase A1: which occupied link registers can advance (pre-state only).
        moves = []
        serdes_live = []
        for ch in channels:
            if ch.is_serdes:
                if ch.plan(self):
                    serdes_live.append(ch)
                continue
            f = ch.reg
            if f is None:
                ch._move = False
                continue
            if ch.dst_endpoint >= 0:
                ep = self.endpoints[ch.dst_endpoint]
                ok = len(ep.inbox) < ep.inbox_cap
            else:
                ok = len(routers[ch.dst_router].queues[ch.dst_port][f.vc]) < depth
            ch._move = ok
            if ok:
                moves.append(ch)

        # Phase A2: allocation at every router with queued flits.
        grants = []
        r_iter = routers if router_order is None else [routers[i] for i in router_order]
        for r in r_iter:
            if r.queued:
                self._collect_grants(r, grants)

        # Phase B: commit everything at once.
        events = 0
        for ch in moves:
            f = ch.reg
            ch.reg = None
            if ch.dst_endpoint >= 0:
                self._deliver(ch.dst_endpoint, f)
            else:
                tr = routers[ch.dst_router]
                tr.queues[ch.dst_port][f.vc].append(f)
                tr.queued += 1
            events += 1
        for ch in serdes_live:
            events += ch.commit(self)
        for r, in_port, vc, out_port, out_vc, flit in grants:
            r.queues[in_port][vc].popleft()
            r.queued -= 1
            if flit.head and not flit.tail:
                r.active_route[in_port][vc] = (out_port, out_vc)
                r.out_owner[out_port][out_vc] = (in_port, vc)
            elif flit.tail and not flit.head:
                r.active_route[in_port][vc] = None
                r.out_owner[out_port][out_vc] = None
            flit.vc = out_vc
            ch = r.out_channel[out_port]
            if ch.is_serdes:
                ch.latch = flit
            else:
                ch.reg = flit
            events += 1
        self.cycle += 1
        return events

    def _collect_grants(self, r: Router, grants: list) -> None:
        vcs = self.vcs
        routers = self.routers
        depth = self.depth
        table = self.route_table[r.idx]
        requests = []
        for port in range(r.n_ports):
            qs = r.queues[port]
            routes = r.active_route[port]
            for vc in range(vcs):
                q = qs[vc]
                if not q:
                    continue
                flit = q[0]
                ar = routes[vc]
                if ar is None:
                    out_port, out_vc = table[flit.dst]
                else:
                    out_port, out_vc = ar
                owner = r.out_owner[out_port][out_vc]
                if owner is not None and owner != (port, vc):
                    continue
                ch = r.out_channel[out_port]
                if ch.is_serdes:
                    if ch.latch is not None and not ch._latch_move:
                        continue
                else:
                    reg = ch.reg
                    moving = ch._move
                    if reg is not None and not moving:
                        continue
                    if ch.dst_endpoint >= 0:
                        ep = self.endpoints[ch.dst_endpoint]
                        occ = len(ep.inbox) + (1 if reg is not None else 0)
                        if occ >= ep.inbox_cap:
                            continue
                    else:
                        tq = routers[ch.dst_router].queues[ch.dst_port][out_vc]
                        occ = len(tq)
                        if reg is not None and reg.vc == out_vc:
                            occ += 1
                        if occ >= depth:
                            continue
                requests.append((port, vc, out_port, out_vc, flit))
        if requests:
            for port, vc, out_port, out_vc, flit in allocate(r, requests):
                grants.append((r, port, vc, out_port, out_vc, flit))

    def _deliver(self, endpoint: int, flit: Flit) -> None:
        self.endpoints[endpoint].inbox.append(flit)
        self.flits_ejected += 1
        self.in_flight -= 1
        latency = self.cycle + 1 - flit.inject_cycle
        self.latency_sum += latency
        if latency > self.latency_max:
            self.latency_max = latency

    # -- introspection -------------------------------------------------------

    def stats(self) -> dict:
        return {
            "cycles": self.cycle,
            "flits_injected": self.flits_injected,
            "flits_ejected": self.flits_ejected,
            "latency_sum": self.latency_sum,
            "latency_max": self.latency_max,
        }

    def timing_model(self) -> dict:
        """The fixed per-hop pipeline assumptions, for reporting."""
        return {
            "router_pipeline_cycles": self.ROUTER_PIPELINE_CYCLES,
            "link_traversal_cycles": self.LINK_TRAVERSAL_CYCLES,
        }

    def buffered_flits(self) -> int:
        """Flits inside the fabric (queues, registers, serialized links)."""
        count = 0
        for r in self.routers:
            count += r.queued
        for ch in self.channels:
            count += ch.occupancy()
        return count

    def idle(self) -> bool:
        return self.in_flight == 0

    def state_digest(self) -> str:
        """Stable hash of the complete wire-visible state, for determinism tests."""
        h = hashlib.blake2b(digest_size=16)
        h.update(f"c{self.cycle}".encode())
        for r in self.routers:
            h.update(f"R{r.idx}|{r.in_rr}|{r.out_rr}|{r.active_route}|{r.out_owner}".encode())
            for port in range(r.n_ports):
                for vc in range(self.vcs):
                    for f in r.queues[port][vc]:
                        h.update(repr(f.key()).encode())
        for ch in self.channels:
            if ch.is_serdes:
                h.update(ch.state_key().encode())
            else:
                h.update(b"-" if ch.reg is None else repr(ch.reg.key()).encode())
        for ep in self.endpoints:
            h.update(f"E{ep.idx}".encode())
            for f in ep.inbox:
                h.update(repr(f.key()).encode())
        return h.hexdigest()


def build_topology(config: TopologyConfig) -> NetworkState:
    """Construct an empty network whose graph realizes ``config``."""
    return NetworkState(build_plan(config))


def route_next_hop(state: NetworkState, router: int, dst: int, vc: int = 0) -> tuple[int, int]:
    """Next (output port, VC) from ``router`` toward endpoint ``dst``.

    Pure function of the arguments; the ``vc`` argument is accepted for
    interface completeness but the chosen functions are history-free.
    """
    if not 0 <= dst < state.n_endpoints:
        raise ConfigError(f"invalid destination endpoint {dst}")
    return state.plan.route_for(router, dst)
