"""Syndrome-extraction circuits and a Pauli-frame simulator used as the oracle.

One round prepares every ancilla, runs the scheduled two-qubit gates depth by
depth and measures the ancillas.  Fault locations per round, in column order:

* ``b``: ancilla preparation flip (one bit per check),
* ``C``: two-qubit fault after each gate, ancilla-major in measurement order,
* ``D``: single-qubit idle fault on every data qubit, applied at the start of
  the round before any gate,
* ``m``: measurement flip (one bit per check).

The simulator propagates many fault patterns at once by packing them along
the last axis of uint8 frames.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .codes import CodeSpec
from .pauli import MixedErrorVector, SymbolKind, X, expand_bits

LOC_KINDS = {"b": SymbolKind.BIT, "C": SymbolKind.PAULI2, "D": SymbolKind.PAULI1, "m": SymbolKind.BIT}


@dataclass(frozen=True)
class Location:
    index: int
    kind: str
    round: int
    depth: int
    check: int | None = None
    qubit: int | None = None

    @property
    def symbol_kind(self) -> SymbolKind:
        return LOC_KINDS[self.kind]

    def label(self) -> str:
        if self.kind == "C":
            return f"C{self.check + 1},{self.qubit + 1}^{self.round}"
        if self.kind == "D":
            return f"D{self.qubit + 1}^{self.round}"
        return f"{self.kind}{self.check + 1}^{self.round}"


def _round_locations(code: CodeSpec, rnd: int, start: int) -> list[Location]:
    locs = []
    w = code.w
    for i in range(code.m):
        locs.append(Location(start + len(locs), "b", rnd, 0, check=i))
    for i, (order, depths) in enumerate(zip(code.orders, code.gate_depths)):
        for (q, _), t in zip(order, depths):
            locs.append(Location(start + len(locs), "C", rnd, t, check=i, qubit=q))
    for q in range(code.n):
        locs.append(Location(start + len(locs), "D", rnd, 0, qubit=q))
    for i in range(code.m):
        locs.append(Location(start + len(locs), "m", rnd, w + 1, check=i))
    return locs


@dataclass(frozen=True, eq=False)
class ExtractionCircuit:
    code: CodeSpec
    rounds: int
    perfect_tail: bool
    locations: tuple

    @property
    def N(self) -> int:
        return len(self.locations)

    @property
    def M(self) -> int:
        return self.row_blocks * self.code.m

    @property
    def row_blocks(self) -> int:
        return self.rounds + int(self.perfect_tail)

    @property
    def locations_per_round(self) -> int:
        return self.N // self.rounds

    @cached_property
    def kinds(self) -> np.ndarray:
        return np.array([int(loc.symbol_kind) for loc in self.locations], dtype=np.int8)

    @cached_property
    def bit_offsets(self) -> np.ndarray:
        k = self.kinds.astype(np.int64)
        return np.cumsum(k) - k

    @property
    def nbits(self) -> int:
        return int(self.kinds.astype(np.int64).sum())

    @property
    def bits_per_round(self) -> int:
        return self.nbits // self.rounds

    @cached_property
    def loc_rounds(self) -> np.ndarray:
        return np.array([loc.round for loc in self.locations], dtype=np.int64)

    @cached_property
    def bit_locations(self) -> np.ndarray:
        return np.repeat(np.arange(self.N), self.kinds.astype(np.int64))

    def zero_vector(self) -> MixedErrorVector:
        return MixedErrorVector.zeros(self.kinds)

    def vector(self, assignments: dict) -> MixedErrorVector:
        """Build an error vector from {location index or label: value}."""
        labels = {loc.label(): loc.index for loc in self.locations}
        vals = np.zeros(self.N, dtype=np.int64)
        for key, v in assignments.items():
            vals[labels[key] if isinstance(key, str) else key] = v
        return MixedErrorVector(self.kinds, vals)

    def find(self, label: str) -> int:
        for loc in self.locations:
            if loc.label() == label:
                return loc.index
        raise KeyError(label)


def build_circuit(code: CodeSpec, r: int, perfect_tail: bool = False) -> ExtractionCircuit:
    if r < 1:
        raise ValueError("need at least one round")
    locs = []
    for rnd in range(1, r + 1):
        locs.extend(_round_locations(code, rnd, len(locs)))
    return ExtractionCircuit(code, r, perfect_tail, tuple(locs))


# ---------------------------------------------------------------------------
# Frame simulation
# ---------------------------------------------------------------------------

class _OneHot:
    """Fault source where fault column c is set only in batch slot c."""

    def __init__(self, nbits):
        self.batch = nbits

    def inject(self, frame, rows, cols):
        cols = np.asarray(cols, dtype=np.int64)
        np.bitwise_xor.at(frame, (rows, cols >> 3), (1 << (cols & 7)).astype(np.uint8))


class _Explicit:
    """Fault source given as packed rows: faults[c] marks the batch slots with bit c set."""

    def __init__(self, packed, batch):
        self.packed = packed
        self.batch = batch

    def inject(self, frame, rows, cols):
        frame[rows] ^= self.packed[cols]


def _schedule(code: CodeSpec):
    """Per-depth gate lists: (ancilla, data, kind) with kind 'cx_da', 'cx_ad' or 'cz'."""
    per_depth = {}
    for i, (order, depths) in enumerate(zip(code.orders, code.gate_depths)):
        basis = code.check_basis(i)
        for slot, ((q, p), t) in enumerate(zip(order, depths)):
            if basis == "Z":
                kind = "cx_da"
            elif p == X:
                kind = "cx_ad"
            else:
                kind = "cz"
            per_depth.setdefault(t, []).append((i, q, kind, slot))
    return per_depth


def _simulate(circuit: ExtractionCircuit, source, initial=None):
    """Run the circuit on packed frames.

    Returns (syndrome rows (M, W), final data frame (2n, W)).  ``initial`` is
    an optional packed (2n, W) data frame present before round 1.
    """
    code = circuit.code
    n, m = code.n, code.m
    width = (source.batch + 7) // 8
    fx = np.zeros((n + m, width), dtype=np.uint8)
    fz = np.zeros((n + m, width), dtype=np.uint8)
    if initial is not None:
        fx[:n] = initial[:n]
        fz[:n] = initial[n:]
    syn = np.zeros((circuit.M, width), dtype=np.uint8)
    basis = [code.check_basis(i) for i in range(m)]
    z_prep = np.array([b == "Z" for b in basis])
    anc = n + np.arange(m)
    per_depth = _schedule(code)
    depths = sorted(per_depth)
    off = circuit.bit_offsets
    per_round = circuit.locations_per_round

    # column offsets inside one round, by location kind
    c_slot = {}
    pos = m
    for i, order in enumerate(code.orders):
        for slot in range(len(order)):
            c_slot[(i, slot)] = pos
            pos += 1
    d_pos = pos
    m_pos = pos + n

    for rnd in range(circuit.row_blocks):
        noisy = rnd < circuit.rounds
        base = rnd * per_round
        fx[anc] = 0
        fz[anc] = 0
        if noisy:
            b_cols = off[base + np.arange(m)]
            source.inject(fx, anc[z_prep], b_cols[z_prep])
            source.inject(fz, anc[~z_prep], b_cols[~z_prep])
            d_cols = off[base + d_pos + np.arange(n)]
            source.inject(fx, np.arange(n), d_cols)
            source.inject(fz, np.arange(n), d_cols + 1)
        for t in depths:
            gates = per_depth[t]
            a = np.array([n + g[0] for g in gates])
            q = np.array([g[1] for g in gates])
            kind = np.array([g[2] for g in gates])
            sel = kind == "cx_da"
            if sel.any():
                c_, t_ = q[sel], a[sel]
                fx[t_] ^= fx[c_]
                fz[c_] ^= fz[t_]
            sel = kind == "cx_ad"
            if sel.any():
                c_, t_ = a[sel], q[sel]
                fx[t_] ^= fx[c_]
                fz[c_] ^= fz[t_]
            sel = kind == "cz"
            if sel.any():
                c_, t_ = a[sel], q[sel]
                fz[t_] ^= fx[c_]
                fz[c_] ^= fx[t_]
            if noisy:
                cols = off[base + np.array([c_slot[(g[0], g[3])] for g in gates])]
                source.inject(fx, a, cols)
                source.inject(fz, a, cols + 1)
                source.inject(fx, q, cols + 2)
                source.inject(fz, q, cols + 3)
        rows = rnd * m + np.arange(m)
        syn[rows[z_prep]] = fx[anc[z_prep]]
        syn[rows[~z_prep]] = fz[anc[~z_prep]]
        if noisy:
            source.inject(syn, rows, off[base + m_pos + np.arange(m)])
    return syn, np.concatenate([fx[:n], fz[:n]])


def _unpack(packed, batch):
    return np.unpackbits(packed, axis=-1, count=batch, bitorder="little")


def _pack(bits):
    return np.packbits(np.asarray(bits, dtype=np.uint8), axis=-1, bitorder="little")


def basis_responses(circuit: ExtractionCircuit):
    """Syndrome and residual of every single-bit basis fault.

    Returns sparse (M x nbits) and (2n x nbits) binary matrices whose column c
    is the oracle output for the fault that sets only component c.
    """
    nb = circuit.nbits
    syn, res = _simulate(circuit, _OneHot(nb))

    def to_sparse(packed):
        rows, cols = [], []
        chunk = max(1, 4_000_000 // max(nb, 1))
        for start in range(0, packed.shape[0], chunk):
            block = _unpack(packed[start:start + chunk], nb)
            r, c = np.nonzero(block)
            rows.append(r + start)
            cols.append(c)
        rows = np.concatenate(rows) if rows else np.zeros(0, np.int64)
        cols = np.concatenate(cols) if cols else np.zeros(0, np.int64)
        data = np.ones(len(rows), dtype=np.uint8)
        return sp.csc_matrix((data, (rows, cols)), shape=(packed.shape[0], nb))

    return to_sparse(syn), to_sparse(res)


@dataclass
class Evaluation:
    syndrome: np.ndarray
    residual: np.ndarray  # Pauli codes on data qubits


def evaluate(circuit: ExtractionCircuit, e, initial_frame=None) -> Evaluation:
    """Oracle: syndrome bits and residual data error of fault vector(s) ``e``.

    ``e`` is a MixedErrorVector or an integer array of packed values with shape
    (N,) or (B, N).  ``initial_frame`` is an optional data Pauli string (or
    batch) present before the first round.
    """
    if isinstance(e, MixedErrorVector):
        if not np.array_equal(e.kinds, circuit.kinds):
            raise ValueError("error vector kinds do not match the circuit locations")
        values = e.values
    else:
        values = np.asarray(e, dtype=np.int64)
        if values.shape[-1] != circuit.N:
            raise ValueError("error vector length does not match the circuit")
    single = values.ndim == 1
    values = np.atleast_2d(values)
    batch = values.shape[0]
    bits = expand_bits(circuit.kinds, values)  # (B, nbits)
    source = _Explicit(_pack(bits.T), batch)
    init = None
    if initial_frame is not None:
        f = np.atleast_2d(np.asarray(initial_frame, dtype=np.int64))
        f = np.broadcast_to(f, (batch, circuit.code.n))
        init = _pack(np.concatenate([f & 1, (f >> 1) & 1], axis=1).T.astype(np.uint8))
    syn, res = _simulate(circuit, source, init)
    syn = _unpack(syn, batch).T
    res = _unpack(res, batch).T.astype(np.int8)
    n = circuit.code.n
    res = res[:, :n] | (res[:, n:] << 1)
    if single:
        return Evaluation(syn[0], res[0])
    return Evaluation(syn, res)


# ---------------------------------------------------------------------------
# Noise
# ---------------------------------------------------------------------------

def sample_values(kinds, eps: float, eps_b: float, rng, size=None) -> np.ndarray:
    """I.i.d. circuit-level noise: depolarizing Pauli locations, flipped bits."""
    if not 0 <= eps < 0.75:
        raise ValueError("depolarizing rate must lie in [0, 3/4)")
    if not 0 <= eps_b < 0.5:
        raise ValueError("flip rate must lie in [0, 1/2)")
    kinds = np.asarray(kinds, dtype=np.int64)
    shape = kinds.shape if size is None else (size,) + kinds.shape
    u = rng.random(shape)
    out = np.zeros(shape, dtype=np.int64)
    bit = kinds == SymbolKind.BIT
    if eps > 0:
        npauli = (1 << kinds) - 1
        hit = (u < eps) & ~bit
        scaled = np.floor(u / eps * npauli).astype(np.int64)
        out = np.where(hit, 1 + np.minimum(scaled, npauli - 1), out)
    if eps_b > 0:
        out = np.where(bit & (u < eps_b), 1, out)
    return out


def sample_errors(circuit: ExtractionCircuit, eps: float, eps_b: float, rng) -> MixedErrorVector:
    return MixedErrorVector(circuit.kinds, sample_values(circuit.kinds, eps, eps_b, rng))
