import pytest

from flitsim.errors import ConfigError
from flitsim.network import build_topology, route_next_hop
from flitsim.topology import TopologyConfig, build_plan


def mesh(rows, cols, endpoints=None):
    return TopologyConfig(
        kind="mesh", endpoint_count=endpoints or rows * cols, dims=(rows, cols)
    )


def test_mesh_4x4_structure():
    net = build_topology(mesh(4, 4))
    assert len(net.routers) == 16
    # interior router (1,1) = index 5: four neighbor links + one endpoint link
    ports = net.plan.ports[5]
    assert sum(1 for p in ports if p[0] == "link") == 4
    assert sum(1 for p in ports if p[0] == "ep") == 1
    # corner has two neighbors
    assert sum(1 for p in net.plan.ports[0] if p[0] == "link") == 2


def test_single_router_ring():
    net = build_topology(TopologyConfig(kind="ring", endpoint_count=1, dims=(1,)))
    assert len(net.plan.links) == 0
    port, vc = route_next_hop(net, 0, 0)
    assert net.plan.ports[0][port][0] == "ep"


def test_torus_regularity():
    net = build_topology(TopologyConfig(kind="torus", endpoint_count=16, dims=(4, 4)))
    for r in range(16):
        assert sum(1 for p in net.plan.ports[r] if p[0] == "link") == 4


def test_mesh_xy_routing():
    net = build_topology(mesh(4, 4))
    # router (0,0)=0 toward endpoint at router (x=2,y=1)=6: X first -> +x
    port, vc = route_next_hop(net, 0, 6)
    assert net.plan.ports[0][port] == ("link", 1, "+x")
    # same column: moves in y
    port, _ = route_next_hop(net, 2, 6)
    assert net.plan.ports[2][port] == ("link", 6, "+y")
    # local delivery ejects
    port, _ = route_next_hop(net, 6, 6)
    assert net.plan.ports[6][port] == ("ep", 6)


def test_ring_shortest_direction():
    net = build_topology(TopologyConfig(kind="ring", endpoint_count=8, dims=(8,)))
    # 0 -> 5: backward (3 hops) beats forward (5 hops)
    port, _ = route_next_hop(net, 0, 5)
    assert net.plan.ports[0][port] == ("link", 7, "-")
    # 0 -> 3: forward
    port, _ = route_next_hop(net, 0, 3)
    assert net.plan.ports[0][port] == ("link", 1, "+")


def test_ring_dateline_vc():
    net = build_topology(TopologyConfig(kind="ring", endpoint_count=8, dims=(8,)))
    # 6 -> 1 forward wraps through 7 -> 0: VC1 until the wrap, VC0 after
    _, vc = route_next_hop(net, 6, 1)
    assert vc == 1
    _, vc = route_next_hop(net, 0, 1)
    assert vc == 0


def test_fat_tree_up_down():
    cfg = TopologyConfig(kind="fat_tree", endpoint_count=16, dims=(4, 2))
    net = build_topology(cfg)
    assert len(net.routers) == 8  # 4 leaves + 4 spines
    # endpoint 0 on leaf 0, endpoint 15 on leaf 3: leaf 0 routes up
    port, vc = route_next_hop(net, 0, 15)
    kind, neighbor, label = net.plan.ports[0][port]
    assert kind == "link" and label[0] == "up" and vc == 0
    # the spine routes down toward leaf 3
    port, _ = route_next_hop(net, neighbor, 15)
    kind, nb2, label2 = net.plan.ports[neighbor][port]
    assert label2 == ("down", 3) and nb2 == 3


def test_every_pair_reaches(subtests=None):
    configs = [
        mesh(3, 3),
        TopologyConfig(kind="ring", endpoint_count=7, dims=(7,)),
        TopologyConfig(kind="torus", endpoint_count=12, dims=(3, 4)),
        TopologyConfig(kind="fat_tree", endpoint_count=9, dims=(3, 2)),
        TopologyConfig(kind="fat_tree", endpoint_count=8, dims=(2, 3)),
    ]
    for cfg in configs:
        plan = build_plan(cfg)
        for dst in range(cfg.endpoint_count):
            target = plan.endpoint_router[dst]
            for start in range(plan.n_routers):
                r = start
                for _ in range(64):
                    port, _ = plan.route_for(r, dst)
                    desc = plan.ports[r][port]
                    if desc[0] == "ep":
                        assert desc[1] == dst and r == target
                        break
                    r = desc[1]
                else:
                    raise AssertionError(f"{cfg.kind}: no route {start}->{dst}")


def test_endpoint_spreading():
    cfg = TopologyConfig(kind="fat_tree", endpoint_count=17, dims=(4, 2))
    plan = build_plan(cfg)
    per_leaf = [plan.endpoint_router.count(r) for r in range(4)]
    assert sorted(per_leaf) == [4, 4, 4, 5]
    # one endpoint per router when counts match
    plan2 = build_plan(mesh(4, 4))
    assert plan2.endpoint_router == list(range(16))


@pytest.mark.parametrize(
    "cfg",
    [
        TopologyConfig(kind="mesh", endpoint_count=4, dims=(4,)),
        TopologyConfig(kind="mesh", endpoint_count=0, dims=(2, 2)),
        TopologyConfig(kind="torus", endpoint_count=4, dims=(2, 2)),
        TopologyConfig(kind="ring", endpoint_count=4, dims=(4, 4)),
        TopologyConfig(kind="fat_tree", endpoint_count=4, dims=(1, 2)),
        TopologyConfig(kind="mesh", endpoint_count=4, dims=(2, 2), buffer_depth=0),
        TopologyConfig(kind="ring", endpoint_count=4, dims=(4,), vc_count=1),
        TopologyConfig(kind="hypercube", endpoint_count=4, dims=(2, 2)),
    ],
)
def test_invalid_configs_rejected(cfg):
    with pytest.raises(ConfigError):
        build_topology(cfg)
