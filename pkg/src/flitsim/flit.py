"""Flits: the atomic units transferred over one NoC link per cycle.

A flit carries routing metadata (destination endpoint, virtual channel,
head/tail packet framing) plus a fixed-width payload. ``src`` and
``inject_cycle`` are simulation bookkeeping and are not part of the wire
image; everything else is serialized when a flit crosses a chip-to-chip
link (see :mod:`flitsim.partition`).
"""

from __future__ import annotations


class Flit:
    __slots__ = ("valid", "head", "tail", "dst", "vc", "payload", "src", "inject_cycle")

    def __init__(
        self,
        dst: int,
        payload: int,
        head: bool = True,
        tail: bool = True,
        vc: int = 0,
        valid: bool = True,
        src: int = -1,
    ):
        self.valid = valid
        self.head = head
        self.tail = tail
        self.dst = dst
        self.vc = vc
        self.payload = payload
        self.src = src
        self.inject_cycle = -1

    def key(self) -> tuple:
        """Wire-visible fields only, for conservation and ordering checks."""
        return (self.valid, self.head, self.tail, self.dst, self.vc, self.payload)

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        marks = ("H" if self.head else "") + ("T" if self.tail else "")
        return f"Flit(dst={self.dst},vc={self.vc},{marks},p={self.payload:#x})"


class BundleFormat:
    """Bit layout of the full router-port signal set of one flit.

    Field order, most significant first: valid | head | tail | dst | vc |
    payload. The remote side of a cut link needs the routing metadata, not
    just the payload, so the whole bundle is serialized.
    """

    __slots__ = ("dst_bits", "vc_bits", "payload_bits", "width")

    def __init__(self, endpoint_count: int, vc_count: int, flit_width: int):
        self.dst_bits = max(1, (endpoint_count - 1).bit_length())
        self.vc_bits = max(1, (vc_count - 1).bit_length())
        self.payload_bits = flit_width
        self.width = 3 + self.dst_bits + self.vc_bits + self.payload_bits

    def encode(self, flit: Flit) -> int:
        word = 1 if flit.valid else 0
        word = (word << 1) | (1 if flit.head else 0)
        word = (word << 1) | (1 if flit.tail else 0)
        word = (word << self.dst_bits) | flit.dst
        word = (word << self.vc_bits) | flit.vc
        word = (word << self.payload_bits) | flit.payload
        return word

    def decode(self, word: int) -> Flit:
        payload = word & ((1 << self.payload_bits) - 1)
        word >>= self.payload_bits
        vc = word & ((1 << self.vc_bits) - 1)
        word >>= self.vc_bits
        dst = word & ((1 << self.dst_bits) - 1)
        word >>= self.dst_bits
        tail = bool(word & 1)
        head = bool(word & 2)
        valid = bool(word & 4)
        return Flit(dst=dst, payload=payload, head=head, tail=tail, vc=vc, valid=valid)
