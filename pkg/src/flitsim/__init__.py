"""Flit-level NoC simulation with message-passing application mapping."""

from .engine import AppGraph, Engine
from .errors import CapacityError, ConfigError, ProtocolError, SimulationStalled
from .flit import BundleFormat, Flit
from .network import NetworkState, allocate, build_topology, route_next_hop
from .partition import (
    PartitionSpec,
    SerdesLink,
    partition_network,
    serdes_deserialize,
    serdes_serialize,
    step_link,
    step_partitions,
)
from .pe import (
    CollectorSpec,
    CollectorState,
    DistEntry,
    Envelope,
    EnvelopeFormat,
    PEDescriptor,
    SlotSpec,
    collector_accept,
    distribute,
    fire_processor,
)
from .topology import TopologyConfig

__all__ = [
    "AppGraph",
    "BundleFormat",
    "CapacityError",
    "CollectorSpec",
    "CollectorState",
    "ConfigError",
    "DistEntry",
    "Engine",
    "Envelope",
    "EnvelopeFormat",
    "Flit",
    "NetworkState",
    "PartitionSpec",
    "PEDescriptor",
    "ProtocolError",
    "SerdesLink",
    "SimulationStalled",
    "SlotSpec",
    "TopologyConfig",
    "allocate",
    "build_topology",
    "collector_accept",
    "distribute",
    "fire_processor",
    "partition_network",
    "route_next_hop",
    "serdes_deserialize",
    "serdes_serialize",
    "step_link",
    "step_partitions",
]
