"""Topological stabilizer code families with their measurement schedules."""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import gf2
from .pauli import X, Z, format_pauli, parse_pauli, pauli_char, pauli_from_char, to_symplectic

FAMILIES = ("toric", "color", "xzzx", "toy")
SCHEDULES = ("cross", "commuting")


@dataclass(frozen=True, eq=False)
class CodeSpec:
    """Stabilizers, per-check measurement order and logical operators.

    ``orders[i]`` lists ``(qubit, pauli)`` pairs for check ``i`` in the time
    order of its two-qubit gates; ``depths[i][t]`` is the circuit depth (1-based)
    of the t-th gate.  Depths default to the position in the order.
    """

    family: str
    n: int
    k: int
    d: int
    stabilizers: np.ndarray
    orders: tuple
    logicals: np.ndarray
    schedule: str = "cross"
    depths: tuple | None = None

    @property
    def m(self) -> int:
        return len(self.stabilizers)

    @property
    def w(self) -> int:
        """Number of gate depths per round."""
        return max(max(ds) for ds in self.gate_depths)

    @property
    def gate_depths(self) -> tuple:
        if self.depths is not None:
            return self.depths
        return tuple(tuple(range(1, len(o) + 1)) for o in self.orders)

    @property
    def check_weight(self) -> int:
        return max(len(o) for o in self.orders)

    @cached_property
    def symplectic(self) -> np.ndarray:
        return to_symplectic(self.stabilizers)

    @cached_property
    def stabilizer_space(self) -> gf2.RowSpace:
        return gf2.RowSpace(self.symplectic)

    def check_basis(self, i: int) -> str:
        """'Z', 'X' or 'mixed' depending on the Pauli content of check i."""
        types = {p for _, p in self.orders[i]}
        if types == {Z}:
            return "Z"
        if types == {X}:
            return "X"
        return "mixed"

    def syndrome(self, residual) -> np.ndarray:
        """Commutation of a (batch of) Pauli string(s) with every stabilizer."""
        v = to_symplectic(residual).astype(np.int64)
        n = self.n
        s = self.symplectic.astype(np.int64)
        swapped = np.concatenate([s[:, n:], s[:, :n]], axis=1)
        return ((v @ swapped.T) & 1).astype(np.uint8)

    # -- text serialization ------------------------------------------------
    def to_text(self) -> str:
        lines = [f"# {self.family} n={self.n} k={self.k} d={self.d} schedule={self.schedule}"]
        for i, order in enumerate(self.orders):
            steps = " ".join(f"{q}{pauli_char(p)}" for q, p in order)
            lines.append(f"{format_pauli(self.stabilizers[i])} {steps}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "CodeSpec":
        header = None
        stabs, orders = [], []
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                header = dict(tok.split("=") for tok in line[1:].split()[1:])
                family = line[1:].split()[0]
                continue
            word, *steps = line.split()
            stabs.append(parse_pauli(word))
            orders.append(tuple((int(s[:-1]), pauli_from_char(s[-1])) for s in steps))
        if header is None:
            raise ValueError("missing header line")
        return _finish(family, np.array(stabs), tuple(orders), int(header["d"]),
                       schedule=header.get("schedule", "cross"))


def _finish(family, stabs, orders, d, schedule="cross", expected_k=None) -> CodeSpec:
    stabs = np.asarray(stabs, dtype=np.int8)
    n = stabs.shape[1]
    k = n - gf2.rank(to_symplectic(stabs))
    if expected_k is not None and k != expected_k:
        raise RuntimeError(f"{family}: expected k={expected_k}, got {k}")
    logicals = logical_operators(stabs)
    code = CodeSpec(family, n, k, d, stabs, tuple(orders), logicals, schedule)
    validate(code)
    return code


def logical_operators(stabs) -> np.ndarray:
    """k symplectic pairs spanning the normalizer modulo the stabilizer group."""
    stabs = np.asarray(stabs)
    n = stabs.shape[1]
    s = to_symplectic(stabs)
    # v commutes with every row iff [s_z | s_x] v = 0
    swapped = np.concatenate([s[:, n:], s[:, :n]], axis=1)
    pool = [v for v in gf2.nullspace(swapped)]

    def form(a, b):
        return int(np.sum(a[:n] & b[n:]) + np.sum(a[n:] & b[:n])) & 1

    xs, zs = [], []
    while pool:
        a = pool.pop(0)
        j = next((j for j, v in enumerate(pool) if form(a, v)), None)
        if j is None:
            continue
        b = pool.pop(j)
        xs.append(a)
        zs.append(b)
        pool = [v ^ (form(v, b) * a) ^ (form(v, a) * b) for v in pool]
    out = np.array(xs + zs, dtype=np.uint8).reshape(-1, 2 * n)
    return (out[:, :n] | (out[:, n:] << 1)).astype(np.int8)


def validate(code: CodeSpec) -> None:
    """Raise if a structural invariant of the code or its schedule is violated."""
    s = code.stabilizers
    syn = code.syndrome(s)
    if np.any(syn):
        raise ValueError("stabilizers do not commute")
    if len(code.logicals) and np.any(code.syndrome(code.logicals)):
        raise ValueError("logical operator anticommutes with a stabilizer")
    for i, order in enumerate(code.orders):
        qubits = [q for q, _ in order]
        if len(set(qubits)) != len(qubits):
            raise ValueError(f"check {i} touches a qubit twice")
        support = set(np.flatnonzero(s[i]).tolist())
        if set(qubits) != support:
            raise ValueError(f"check {i}: order does not match its support")
        for q, p in order:
            if s[i, q] != p:
                raise ValueError(f"check {i}: wrong Pauli at qubit {q}")
    busy = {}
    for i, (order, depths) in enumerate(zip(code.orders, code.gate_depths)):
        for (q, _), t in zip(order, depths):
            for key in (("d", q, t), ("a", i, t)):
                if key in busy:
                    raise ValueError(f"qubit used twice at depth {t}: {key}")
                busy[key] = True


def is_logical_error(residual, code: CodeSpec) -> bool:
    """True iff a syndrome-free residual lies outside the stabilizer group."""
    residual = np.asarray(residual)
    if np.any(code.syndrome(residual)):
        raise ValueError("residual has a nonzero syndrome")
    return not code.stabilizer_space.contains(to_symplectic(residual))


def schedule_violations(code: CodeSpec) -> list[tuple[int, int]]:
    """Pairs of checks whose interleaved gates make the measurement non-deterministic.

    Two checks sharing qubits are measured consistently when the number of
    shared qubits carrying anticommuting Paulis, where the first check acts
    before the second, is even.
    """
    time = [dict(zip((q for q, _ in o), ds)) for o, ds in zip(code.orders, code.gate_depths)]
    by_qubit = {}
    for i, o in enumerate(code.orders):
        for q, _ in o:
            by_qubit.setdefault(q, []).append(i)
    bad = []
    pairs = {(a, b) for qs in by_qubit.values() for a in qs for b in qs if a < b}
    for a, b in sorted(pairs):
        shared = set(time[a]) & set(time[b])
        cnt = sum(
            1 for q in shared
            if code.stabilizers[a, q] != code.stabilizers[b, q] and time[a][q] < time[b][q]
        )
        if cnt % 2:
            bad.append((a, b))
    return bad


# ---------------------------------------------------------------------------
# Families
# ---------------------------------------------------------------------------

def build_toy_code() -> CodeSpec:
    """Two data qubits checked by Z1Z2 (order 1,2) and X1X2 (order 2,1)."""
    stabs = np.array([[Z, Z], [X, X]], dtype=np.int8)
    orders = (((0, Z), (1, Z)), ((1, X), (0, X)))
    return _finish("toy", stabs, orders, d=1, expected_k=0)


# corner offsets (row, col) of a plaquette
_TL, _TR, _BL, _BR = (0, 0), (0, 1), (1, 0), (1, 1)


def build_rotated_toric(d: int, schedule: str = "cross") -> CodeSpec:
    """[[d^2, 2, d]] rotated toric code on a d x d torus (d even).

    Plaquette (r, c) covers the qubits at rows r, r+1 and columns c, c+1
    (mod d) and is a Z check when r + c is even.  The ``cross`` schedule visits
    corners TL, BR, BL, TR for every plaquette; ``commuting`` uses TL, BL, TR,
    BR for Z and TL, TR, BL, BR for X checks.
    """
    if d < 2 or d % 2:
        raise ValueError("rotated toric codes need an even d >= 2")
    if schedule == "cross":
        z_order = x_order = (_TL, _BR, _BL, _TR)
    elif schedule == "commuting":
        z_order, x_order = (_TL, _BL, _TR, _BR), (_TL, _TR, _BL, _BR)
    else:
        raise ValueError(f"unknown schedule {schedule!r}")
    stabs, orders = [], []
    for r in range(d):
        for c in range(d):
            p = Z if (r + c) % 2 == 0 else X
            corners = z_order if p == Z else x_order
            qs = [((r + dr) % d) * d + (c + dc) % d for dr, dc in corners]
            row = np.zeros(d * d, dtype=np.int8)
            row[qs] = p
            stabs.append(row)
            orders.append(tuple((q, p) for q in qs))
    code = _finish("toric", stabs, orders, d, schedule, expected_k=2)
    return code


def color_lattice(d: int):
    """Hexagonal faces of the 6.6.6 toric color code.

    Returns (L, faces, colors) where faces[f] is the 6-cycle of vertex indices
    of face f = i * L + j, starting at an up-vertex and alternating up/down.
    """
    L = 3 * d // 4

    def up(a, b):
        return 2 * ((b % L) * L + a % L)

    def down(a, b):
        return up(a, b) + 1

    faces, colors = [], []
    for i in range(L):
        for j in range(L):
            faces.append((up(i, j), down(i - 1, j), up(i - 1, j),
                          down(i - 1, j - 1), up(i, j - 1), down(i, j - 1)))
            colors.append((i - j) % 3)
    return L, faces, colors


# X checks walk the hexagon from position 0, Z checks from the opposite vertex
_COLOR_X = (0, 1, 2, 3, 4, 5)
_COLOR_Z = (3, 4, 5, 0, 1, 2)


def build_toric_color(d: int, schedule: str = "cross") -> CodeSpec:
    """[[9d^2/8, 4, d]] 6.6.6 color code on a torus (d a multiple of 4).

    Every hexagon carries an X and a Z check of weight 6; X checks come first.
    Only the ``cross`` schedule exists: X and Z checks of the same face start
    on opposite vertices so the round fits in 6 depths.
    """
    if d < 4 or d % 4:
        raise ValueError("toric color codes need d a multiple of 4")
    if schedule != "cross":
        raise ValueError("the color code only supports the 'cross' schedule")
    L, faces, _ = color_lattice(d)
    n = 2 * L * L
    stabs, orders = [], []
    for p, pattern in ((X, _COLOR_X), (Z, _COLOR_Z)):
        for face in faces:
            row = np.zeros(n, dtype=np.int8)
            row[list(face)] = p
            stabs.append(row)
            orders.append(tuple((face[t], p) for t in pattern))
    return _finish("color", stabs, orders, d, schedule, expected_k=4)


def build_twisted_xzzx(d: int, schedule: str = "cross") -> CodeSpec:
    """[[(d^2+1)/2, 1, d]] twisted XZZX toric code (d odd).

    Check k is X_k Z_{k+1} Z_{k+a} X_{k+a+1} (mod n) with a = n - d.  The
    ``cross`` schedule measures Z_{k+1}, Z_{k+a}, X_k, X_{k+a+1}; the
    ``commuting`` schedule uses Z_{k+1}, X_k, X_{k+a+1}, Z_{k+a}.
    """
    if d < 3 or d % 2 == 0:
        raise ValueError("twisted XZZX codes need an odd d >= 3")
    n = (d * d + 1) // 2
    a = n - d
    if schedule == "cross":
        pattern = ((1, Z), (a, Z), (0, X), (a + 1, X))
    elif schedule == "commuting":
        pattern = ((1, Z), (0, X), (a + 1, X), (a, Z))
    else:
        raise ValueError(f"unknown schedule {schedule!r}")
    stabs, orders = [], []
    for k in range(n):
        row = np.zeros(n, dtype=np.int8)
        order = tuple(((k + off) % n, p) for off, p in pattern)
        for q, p in order:
            row[q] = p
        stabs.append(row)
        orders.append(order)
    return _finish("xzzx", stabs, orders, d, schedule, expected_k=1)


def build_code(family: str, d: int, schedule: str = "cross") -> CodeSpec:
    if family == "toric":
        return build_rotated_toric(d, schedule)
    if family == "color":
        return build_toric_color(d, schedule)
    if family == "xzzx":
        return build_twisted_xzzx(d, schedule)
    if family == "toy":
        return build_toy_code()
    raise ValueError(f"unknown family {family!r}")


def brute_force_distance_ok(code: CodeSpec, max_weight: int) -> bool:
    """True if no Pauli string of weight <= max_weight is an undetectable logical."""
    from itertools import combinations, product

    n = code.n
    space = code.stabilizer_space
    s = code.symplectic.astype(np.int64)
    swapped = np.concatenate([s[:, n:], s[:, :n]], axis=1)
    for wt in range(1, max_weight + 1):
        paulis = np.array(list(product((1, 2, 3), repeat=wt)), dtype=np.int64)
        for qs in combinations(range(n), wt):
            err = np.zeros((len(paulis), n), dtype=np.int64)
            err[:, list(qs)] = paulis
            v = to_symplectic(err)
            syn = (v.astype(np.int64) @ swapped.T) & 1
            quiet = ~syn.any(axis=1)
            if quiet.any() and np.any(space.reduce(v[quiet]).any(axis=1)):
                return False
    return True
