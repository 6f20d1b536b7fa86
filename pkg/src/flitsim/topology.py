"""Topology graphs and deterministic routing.

Supported kinds:

* ``ring``    -- dims ``(n,)``; bidirectional cycle, minimal routing in the
  shorter direction (ties go clockwise), two virtual channels with a
  dateline rule to break the cyclic channel dependency.
* ``mesh``    -- dims ``(rows, cols)``; XY dimension-order routing, one VC.
* ``torus``   -- dims ``(rows, cols)``; XY order with wraparound links and
  shortest direction per dimension, two VCs with per-dimension datelines.
* ``fat_tree``-- dims ``(arity, levels)``; a k-ary n-tree. Packets climb
  toward the nearest common ancestor choosing up-links by destination
  digit, then descend; endpoints attach to level-0 switches.

The VC chosen for a hop on ring/torus is 1 while the remaining path in the
current dimension still has to cross that direction's wraparound link and 0
afterwards. This keeps ``route_for`` a pure function of (router,
destination) -- no history is needed -- and both VC sub-networks are
acyclic, so deterministic minimal routing stays deadlock-free.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import ConfigError

KINDS = ("ring", "mesh", "torus", "fat_tree")


@dataclass(frozen=True)
class TopologyConfig:
    kind: str
    endpoint_count: int
    dims: tuple[int, ...]
    flit_width: int = 16
    buffer_depth: int = 8
    vc_count: int | None = None

    def resolved_vc_count(self) -> int:
        if self.vc_count is not None:
            return self.vc_count
        return 2 if self.kind in ("ring", "torus") else 1

    def validate(self) -> None:
        if self.kind not in KINDS:
            raise ConfigError(f"unknown topology kind {self.kind!r}")
        if self.endpoint_count < 1:
            raise ConfigError("endpoint_count must be >= 1")
        if self.flit_width < 4:
            raise ConfigError("flit_width must be >= 4")
        if self.buffer_depth < 1:
            raise ConfigError("buffer_depth must be >= 1")
        if any(d < 1 for d in self.dims):
            raise ConfigError(f"topology dimensions must be positive, got {self.dims}")
        if self.kind == "ring":
            if len(self.dims) != 1:
                raise ConfigError("ring dims must be (n,)")
        elif self.kind in ("mesh", "torus"):
            if len(self.dims) != 2:
                raise ConfigError(f"{self.kind} dims must be (rows, cols)")
            if self.kind == "torus" and min(self.dims) < 3:
                raise ConfigError("torus dimensions must be >= 3")
        elif self.kind == "fat_tree":
            if len(self.dims) != 2:
                raise ConfigError("fat_tree dims must be (arity, levels)")
            if self.dims[0] < 2:
                raise ConfigError("fat_tree arity must be >= 2")
        vcs = self.resolved_vc_count()
        if vcs < 1:
            raise ConfigError("vc_count must be >= 1")
        if self.kind in ("ring", "torus") and self.router_count() > 1 and vcs < 2:
            raise ConfigError(f"{self.kind} routing needs at least 2 virtual channels")

    def router_count(self) -> int:
        if self.kind == "ring":
            return self.dims[0]
        if self.kind in ("mesh", "torus"):
            return self.dims[0] * self.dims[1]
        arity, levels = self.dims
        return levels * arity ** (levels - 1)

    def shape_str(self) -> str:
        return "x".join(str(d) for d in self.dims)


@dataclass
class Topology:
    """Wiring plan: per-router port lists plus a pure routing function."""

    config: TopologyConfig
    n_routers: int
    # ports[r] = ordered list of ("ep", endpoint_id) | ("link", neighbor, label)
    ports: list[list[tuple]] = field(default_factory=list)
    # directed channel specs (src_router, src_port, dst_router, dst_port)
    links: list[tuple[int, int, int, int]] = field(default_factory=list)
    endpoint_router: list[int] = field(default_factory=list)
    endpoint_port: list[int] = field(default_factory=list)
    _port_index: list[dict] = field(default_factory=list)

    def port_of(self, router: int, label) -> int:
        return self._port_index[router][label]

    def route_for(self, router: int, dst_endpoint: int) -> tuple[int, int]:
        """Next (output port, VC) at ``router`` toward ``dst_endpoint``.

        Deterministic and minimal; depends only on the arguments.
        """
        cfg = self.config
        target = self.endpoint_router[dst_endpoint]
        if router == target:
            return self.endpoint_port[dst_endpoint], 0
        if cfg.kind == "ring":
            return self._route_ring(router, target, cfg.dims[0])
        if cfg.kind == "mesh":
            return self._route_mesh(router, target)
        if cfg.kind == "torus":
            return self._route_torus(router, target)
        return self._route_fat_tree(router, dst_endpoint, target)

    # -- per-kind helpers ------------------------------------------------

    def _route_ring(self, router: int, target: int, n: int) -> tuple[int, int]:
        fwd = (target - router) % n
        bwd = (router - target) % n
        if fwd <= bwd:
            # moving +1; the dateline for this direction is the n-1 -> 0 link
            vc = 1 if router > target else 0
            return self.port_of(router, "+"), vc
        vc = 1 if router < target else 0
        return self.port_of(router, "-"), vc

    def _route_mesh(self, router: int, target: int) -> tuple[int, int]:
        cols = self.config.dims[1]
        x, y = router % cols, router // cols
        tx, ty = target % cols, target // cols
        if x != tx:
            return self.port_of(router, "+x" if tx > x else "-x"), 0
        return self.port_of(router, "+y" if ty > y else "-y"), 0

    def _route_torus(self, router: int, target: int) -> tuple[int, int]:
        rows, cols = self.config.dims
        x, y = router % cols, router // cols
        tx, ty = target % cols, target // cols
        if x != tx:
            return self._torus_dim_hop(router, x, tx, cols, "x")
        return self._torus_dim_hop(router, y, ty, rows, "y")

    def _torus_dim_hop(self, router: int, pos: int, tpos: int, size: int, axis: str):
        fwd = (tpos - pos) % size
        bwd = (pos - tpos) % size
        if fwd <= bwd:
            vc = 1 if pos > tpos else 0  # remaining +dir path wraps size-1 -> 0
            return self.port_of(router, "+" + axis), vc
        vc = 1 if pos < tpos else 0
        return self.port_of(router, "-" + axis), vc

    def _route_fat_tree(self, router: int, dst_endpoint: int, target: int) -> tuple[int, int]:
        arity, levels = self.config.dims
        leaves = arity ** (levels - 1)
        lvl, w = divmod(router, leaves)
        t = target % leaves
        # target leaf inside this switch's subtree <=> digits lvl.. agree
        if (w // arity**lvl) == (t // arity**lvl):
            digit = (t // arity ** (lvl - 1)) % arity
            return self.port_of(router, ("down", digit)), 0
        # climbing: any up link leads to a common ancestor, so pick by a
        # destination-endpoint digit to spread distinct flows over the roots
        digit = (dst_endpoint // arity**lvl) % arity
        return self.port_of(router, ("up", digit)), 0


def _digit(w: int, pos: int, base: int) -> int:
    return (w // base**pos) % base


def build_plan(config: TopologyConfig) -> Topology:
    config.validate()
    n = config.router_count()
    plan = Topology(config=config, n_routers=n)
    plan.ports = [[] for _ in range(n)]

    # endpoint attachment: spread evenly over eligible routers, in order
    if config.kind == "fat_tree":
        arity, levels = config.dims
        eligible = list(range(arity ** (levels - 1)))  # level-0 switches
    else:
        eligible = list(range(n))
    e_total = config.endpoint_count
    for e in range(e_total):
        r = eligible[e * len(eligible) // e_total]
        plan.endpoint_router.append(r)
        plan.endpoint_port.append(len(plan.ports[r]))
        plan.ports[r].append(("ep", e))

    def add_pair(a: int, la, b: int, lb):
        pa = len(plan.ports[a])
        plan.ports[a].append(("link", b, la))
        pb = len(plan.ports[b])
        plan.ports[b].append(("link", a, lb))
        plan.links.append((a, pa, b, pb))
        plan.links.append((b, pb, a, pa))

    kind = config.kind
    if kind == "ring":
        m = config.dims[0]
        for r in range(m if m > 1 else 0):
            add_pair(r, "+", (r + 1) % m, "-")
    elif kind in ("mesh", "torus"):
        rows, cols = config.dims
        wrap = kind == "torus"
        for y in range(rows):
            for x in range(cols):
                r = y * cols + x
                if x + 1 < cols:
                    add_pair(r, "+x", r + 1, "-x")
                elif wrap and cols > 1:
                    add_pair(r, "+x", y * cols, "-x")
                if y + 1 < rows:
                    add_pair(r, "+y", r + cols, "-y")
                elif wrap and rows > 1:
                    add_pair(r, "+y", x, "-y")
    else:  # fat_tree
        arity, levels = config.dims
        leaves = arity ** (levels - 1)
        for lvl in range(levels - 1):
            for w in range(leaves):
                lower = lvl * leaves + w
                for u in range(arity):
                    w_up = w + (u - _digit(w, lvl, arity)) * arity**lvl
                    upper = (lvl + 1) * leaves + w_up
                    add_pair(lower, ("up", u), upper, ("down", _digit(w, lvl, arity)))

    plan._port_index = []
    for r in range(n):
        index = {}
        for p, desc in enumerate(plan.ports[r]):
            if desc[0] == "link":
                index[desc[2]] = p
        plan._port_index.append(index)
    return plan
