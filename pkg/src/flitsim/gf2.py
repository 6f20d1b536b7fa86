"""GF(2) vectors and matrices as Python-int bitsets.

Bit ``i`` of a row (or vector) is column ``i``; a matrix is a list of row
bitsets. Dense bit-parallel operations on ints are exact and fast enough
for dimensions up to a few thousand.
"""

from __future__ import annotations

from .errors import ConfigError


class Gf2Matrix:
    __slots__ = ("n", "rows")

    def __init__(self, n: int, rows: list[int]):
        if len(rows) != n:
            raise ConfigError(f"expected {n} rows, got {len(rows)}")
        mask = (1 << n) - 1
        for i, row in enumerate(rows):
            if row < 0 or row & ~mask:
                raise ConfigError(f"row {i} has bits outside 0..{n - 1}")
        self.n = n
        self.rows = rows

    def __eq__(self, other) -> bool:
        return isinstance(other, Gf2Matrix) and self.n == other.n and self.rows == other.rows

    def bit(self, row: int, col: int) -> int:
        return (self.rows[row] >> col) & 1

    @classmethod
    def identity(cls, n: int) -> "Gf2Matrix":
        return cls(n, [1 << i for i in range(n)])


def naive_matvec_gf2(a: Gf2Matrix, v: int) -> int:
    """Independent oracle: row r of the result is the parity of <row, v>."""
    if v < 0 or v >> a.n:
        raise ConfigError(f"vector does not fit dimension {a.n}")
    out = 0
    for r, row in enumerate(a.rows):
        out |= ((row & v).bit_count() & 1) << r
    return out


def matvec_bitwise_reference(a: Gf2Matrix, v: int) -> int:
    """Bit-at-a-time triple-loop reference used to vouch for the oracle."""
    out = 0
    for r in range(a.n):
        acc = 0
        for c in range(a.n):
            acc ^= a.bit(r, c) & ((v >> c) & 1)
        out |= acc << r
    return out


def gf2_rank(rows: list[int], n_cols: int) -> int:
    work = list(rows)
    rank = 0
    pivot_row = 0
    for col in range(n_cols):
        pivot = None
        for r in range(pivot_row, len(work)):
            if (work[r] >> col) & 1:
                pivot = r
                break
        if pivot is None:
            continue
        work[pivot_row], work[pivot] = work[pivot], work[pivot_row]
        for r in range(len(work)):
            if r != pivot_row and (work[r] >> col) & 1:
                work[r] ^= work[pivot_row]
        rank += 1
        pivot_row += 1
        if pivot_row == len(work):
            break
    return rank


def gf2_nullspace(rows: list[int], n_cols: int) -> list[int]:
    """Basis of {x : Mx = 0} over GF(2), x encoded as a column bitset."""
    work = list(rows)
    pivots: list[int] = []
    pivot_row = 0
    for col in range(n_cols):
        pivot = None
        for r in range(pivot_row, len(work)):
            if (work[r] >> col) & 1:
                pivot = r
                break
        if pivot is None:
            continue
        work[pivot_row], work[pivot] = work[pivot], work[pivot_row]
        for r in range(len(work)):
            if r != pivot_row and (work[r] >> col) & 1:
                work[r] ^= work[pivot_row]
        pivots.append(col)
        pivot_row += 1
    free_cols = [c for c in range(n_cols) if c not in pivots]
    basis = []
    for free in free_cols:
        x = 1 << free
        for i, pcol in enumerate(pivots):
            if (work[i] >> free) & 1:
                x |= 1 << pcol
        basis.append(x)
    return basis


def matrix_to_text(a: Gf2Matrix) -> str:
    """File form: first line n, then n lines of n characters, row-major."""
    lines = [str(a.n)]
    for row in a.rows:
        lines.append("".join("1" if (row >> c) & 1 else "0" for c in range(a.n)))
    return "\n".join(lines) + "\n"


def matrix_from_text(text: str) -> Gf2Matrix:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ConfigError("empty matrix file")
    try:
        n = int(lines[0])
    except ValueError as exc:
        raise ConfigError("first line of a matrix file must be the dimension") from exc
    if len(lines) != n + 1:
        raise ConfigError(f"expected {n} matrix rows, got {len(lines) - 1}")
    rows = []
    for ln in lines[1:]:
        if len(ln) != n or set(ln) - {"0", "1"}:
            raise ConfigError(f"bad matrix row {ln!r}")
        rows.append(sum(1 << c for c, ch in enumerate(ln) if ch == "1"))
    return Gf2Matrix(n, rows)


def vector_to_text(v: int, n: int) -> str:
    return "".join("1" if (v >> c) & 1 else "0" for c in range(n)) + "\n"


def vector_from_text(line: str, n: int | None = None) -> tuple[int, int]:
    """Returns (value, dimension)."""
    s = line.strip()
    if not s or set(s) - {"0", "1"}:
        raise ConfigError(f"bad vector line {s!r}")
    if n is not None and len(s) != n:
        raise ConfigError(f"expected a {n}-bit vector, got {len(s)} bits")
    return sum(1 << c for c, ch in enumerate(s) if ch == "1"), len(s)
