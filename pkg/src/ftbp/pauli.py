"""Phaseless Pauli algebra and the mixed-alphabet error symbols.

A single-qubit Pauli is packed into two bits: bit 0 is the x-part and bit 1
is the z-part, so I=0, X=1, Z=2, Y=3.  Multiplication (up to phase) is XOR of
the codes.  A two-qubit symbol packs (ancilla, data) as ``anc | data << 2``,
which makes every location value a small integer whose binary digits are the
independent x/z components.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum
from typing import Iterable, Sequence

import numpy as np

I, X, Z, Y = 0, 1, 2, 3
_CHARS = "IXZY"
_CODES = {c: i for i, c in enumerate(_CHARS)}

# x-bits live on even positions, z-bits on odd positions of a packed value
_EVEN = 0b0101_0101


class SymbolKind(IntEnum):
    """Alphabet of an error variable; the value equals its number of bits."""

    BIT = 1
    PAULI1 = 2
    SUBSET = 3
    PAULI2 = 4

    @property
    def nbits(self) -> int:
        return int(self)

    @property
    def size(self) -> int:
        return 1 << int(self)


def pauli_from_char(c: str) -> int:
    return _CODES[c.upper()]


def pauli_char(p: int) -> str:
    return _CHARS[p & 3]


def xbit(p):
    return p & 1


def zbit(p):
    return (p >> 1) & 1


def commutes(a, b):
    """Return 0 if the Paulis commute and 1 if they anticommute.

    Works elementwise on integer arrays.
    """
    return (zbit(a) & xbit(b)) ^ (xbit(a) & zbit(b))


def pauli_mul(a, b):
    """Phaseless product."""
    return a ^ b


def _parity(v):
    v = np.asarray(v, dtype=np.int64)
    out = np.zeros_like(v)
    while np.any(v):
        out ^= v & 1
        v = v >> 1
    return out


def symplectic_form(a, b):
    """Commutation bit of two packed multi-qubit values (elementwise)."""
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    ax, az = a & _EVEN, (a >> 1) & _EVEN
    bx, bz = b & _EVEN, (b >> 1) & _EVEN
    return _parity((ax & bz) ^ (az & bx))


# ---------------------------------------------------------------------------
# Pauli strings
# ---------------------------------------------------------------------------

def parse_pauli(s: str) -> np.ndarray:
    """'XIZ' -> array([1, 0, 2])."""
    return np.array([pauli_from_char(c) for c in s], dtype=np.int8)


def format_pauli(p: Sequence[int]) -> str:
    return "".join(pauli_char(int(v)) for v in p)


def weight(p) -> int:
    return int(np.count_nonzero(np.asarray(p)))


def string_product(a, b) -> int:
    """Commutation bit of two Pauli strings of equal length."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape[-1] != b.shape[-1]:
        raise ValueError(f"length mismatch: {a.shape[-1]} vs {b.shape[-1]}")
    return int(np.sum(commutes(a.astype(np.int64), b.astype(np.int64))) & 1)


def to_symplectic(p) -> np.ndarray:
    """Pauli string(s) -> binary [x | z] vectors."""
    p = np.asarray(p, dtype=np.int64)
    return np.concatenate([p & 1, (p >> 1) & 1], axis=-1).astype(np.uint8)


def from_symplectic(v) -> np.ndarray:
    v = np.asarray(v, dtype=np.int64)
    n = v.shape[-1] // 2
    return (v[..., :n] | (v[..., n:] << 1)).astype(np.int8)


# ---------------------------------------------------------------------------
# Mixed-alphabet symbols
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MixedSymbol:
    """One entry of an error vector or check matrix.

    ``value`` is the packed integer; for SUBSET symbols ``support`` lists the
    admissible packed pair values (identity excluded).
    """

    kind: SymbolKind
    value: int
    support: tuple[int, ...] | None = None

    def __post_init__(self):
        if not 0 <= self.value < self.kind.size:
            raise ValueError(f"value {self.value} out of range for {self.kind.name}")
        if self.kind == SymbolKind.SUBSET:
            if self.support is None or len(self.support) > 8:
                raise ValueError("SUBSET symbols need an explicit support of at most 8 elements")
            if self.value and self.value not in self.support:
                raise ValueError("value outside the declared support")

    @property
    def is_trivial(self) -> bool:
        return self.value == 0

    def label(self) -> str:
        if self.kind == SymbolKind.BIT:
            return str(self.value)
        if self.kind == SymbolKind.PAULI1:
            return pauli_char(self.value)
        return pauli_char(self.value & 3) + pauli_char(self.value >> 2)

    @classmethod
    def from_label(cls, text: str) -> "MixedSymbol":
        if text in ("0", "1"):
            return cls(SymbolKind.BIT, int(text))
        if len(text) == 1:
            return cls(SymbolKind.PAULI1, pauli_from_char(text))
        if len(text) == 2:
            return cls(SymbolKind.PAULI2, pauli_from_char(text[0]) | pauli_from_char(text[1]) << 2)
        raise ValueError(f"cannot parse symbol {text!r}")


def _kind_array(kinds) -> np.ndarray:
    return np.asarray([int(k) for k in kinds], dtype=np.int8)


class MixedErrorVector:
    """Values on a fixed sequence of locations with per-location alphabets."""

    __slots__ = ("kinds", "values")

    def __init__(self, kinds, values=None):
        self.kinds = _kind_array(kinds)
        if values is None:
            values = np.zeros(len(self.kinds), dtype=np.int64)
        values = np.asarray(values, dtype=np.int64)
        if values.shape != self.kinds.shape:
            raise ValueError("kinds and values must have the same length")
        if np.any(values < 0) or np.any(values >= (1 << self.kinds.astype(np.int64))):
            raise ValueError("value out of range for its kind")
        self.values = values

    @classmethod
    def zeros(cls, kinds) -> "MixedErrorVector":
        return cls(kinds)

    def __len__(self):
        return len(self.kinds)

    def __getitem__(self, k) -> MixedSymbol:
        return MixedSymbol(SymbolKind(int(self.kinds[k])), int(self.values[k]))

    def __iter__(self):
        return (self[k] for k in range(len(self)))

    def __repr__(self):
        nz = np.flatnonzero(self.values)
        body = ", ".join(f"{k}:{self[k].label()}" for k in nz[:8])
        more = ", ..." if len(nz) > 8 else ""
        return f"MixedErrorVector(N={len(self)}, {{{body}{more}}})"

    def __eq__(self, other):
        return (
            isinstance(other, MixedErrorVector)
            and np.array_equal(self.kinds, other.kinds)
            and np.array_equal(self.values, other.values)
        )

    def _check(self, other: "MixedErrorVector"):
        if not np.array_equal(self.kinds, other.kinds):
            raise ValueError("kind sequences differ")

    def __mul__(self, other: "MixedErrorVector") -> "MixedErrorVector":
        """Entrywise product (XOR of packed values)."""
        self._check(other)
        return MixedErrorVector(self.kinds, self.values ^ other.values)

    __xor__ = __mul__

    def support(self) -> np.ndarray:
        return np.flatnonzero(self.values)

    def to_bits(self) -> np.ndarray:
        """Expand into the binary component vector (LSB of each value first)."""
        return expand_bits(self.kinds, self.values)


def expand_bits(kinds, values) -> np.ndarray:
    """Binary expansion of packed values; works on (N,) or (B, N) inputs."""
    kinds = np.asarray(kinds, dtype=np.int64)
    values = np.asarray(values, dtype=np.int64)
    loc = np.repeat(np.arange(len(kinds)), kinds)
    pos = np.arange(int(kinds.sum())) - np.repeat(np.cumsum(kinds) - kinds, kinds)
    return ((values[..., loc] >> pos) & 1).astype(np.uint8)


def pack_bits(kinds, bits) -> np.ndarray:
    """Inverse of :func:`expand_bits`."""
    kinds = np.asarray(kinds, dtype=np.int64)
    bits = np.asarray(bits, dtype=np.int64)
    loc = np.repeat(np.arange(len(kinds)), kinds)
    pos = np.arange(int(kinds.sum())) - np.repeat(np.cumsum(kinds) - kinds, kinds)
    out = np.zeros(bits.shape[:-1] + (len(kinds),), dtype=np.int64)
    for b in range(int(kinds.max(initial=0))):
        sel = pos == b
        out[..., loc[sel]] |= bits[..., sel] << b
    return out


def star(a: MixedErrorVector, b: MixedErrorVector) -> int:
    """Bilinear form on mixed vectors: commutation for Pauli entries, AND for bits."""
    a._check(b)
    is_bit = a.kinds == SymbolKind.BIT
    total = int(np.sum(a.values[is_bit] & b.values[is_bit]))
    total += int(np.sum(symplectic_form(a.values[~is_bit], b.values[~is_bit])))
    return total & 1


def pauli_order_key(value: int, nbits: int) -> tuple:
    """Sort key putting values in I<X<Y<Z order per component (ancilla first)."""
    rank = {0: 0, 1: 1, 3: 2, 2: 3}
    if nbits == 1:
        return (value,)
    parts = []
    for q in range((nbits + 1) // 2):
        parts.append(rank[(value >> (2 * q)) & 3])
    return tuple(parts)


def iter_values(kind: SymbolKind) -> Iterable[int]:
    return range(kind.size)
