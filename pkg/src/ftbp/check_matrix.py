"""Generalized check matrices, round-differencing sparsification and Tanner graphs.

A check matrix is stored through its binary expansion: every location owns one
binary column per x/z component (1 for bits, 2 for single-qubit Paulis, 4 for
gate pairs) and ``binary[i, c]`` is the response of syndrome bit i to the
basis fault c.  The Pauli-valued entry is recovered by swapping the x/z roles,
so that the syndrome equals the commutation form of entries and errors.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from functools import cached_property
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .circuit import ExtractionCircuit, basis_responses
from .codes import CodeSpec
from .pauli import MixedSymbol, SymbolKind, expand_bits, to_symplectic

_EVEN = 0b0101


def _swap_xz(v):
    return ((v & _EVEN) << 1) | ((v >> 1) & _EVEN)


def _mod2(mat) -> sp.csc_matrix:
    mat = sp.csc_matrix(mat, dtype=np.int64)
    mat.data &= 1
    mat.eliminate_zeros()
    return mat.astype(np.uint8)


@dataclass(frozen=True, eq=False)
class GeneralizedCheckMatrix:
    binary: sp.csc_matrix
    kinds: np.ndarray
    m: int
    blocks: int
    rounds: int
    col_rounds: np.ndarray
    labels: tuple
    sparsified: bool = False
    residual: sp.csc_matrix | None = None
    code: CodeSpec | None = None

    @property
    def M(self) -> int:
        return self.binary.shape[0]

    @property
    def N(self) -> int:
        return len(self.kinds)

    @cached_property
    def bit_offsets(self) -> np.ndarray:
        k = self.kinds.astype(np.int64)
        return np.cumsum(k) - k

    def column_bits(self, j: int) -> np.ndarray:
        return self.bit_offsets[j] + np.arange(int(self.kinds[j]))

    def entry(self, i: int, j: int) -> MixedSymbol:
        cols = self.column_bits(j)
        bits = self.binary[i, cols].toarray().ravel().astype(np.int64)
        return _entry_symbol(SymbolKind(int(self.kinds[j])), bits)

    def entries(self) -> list[tuple[int, int, MixedSymbol]]:
        """All nontrivial entries sorted by (row, column)."""
        coo = self.binary.tocoo()
        loc = np.repeat(np.arange(self.N), self.kinds.astype(np.int64))
        pos = np.arange(self.binary.shape[1]) - self.bit_offsets[loc]
        key = coo.row.astype(np.int64) * self.N + loc[coo.col]
        val = np.zeros(self.M * self.N, dtype=np.int64) if self.M * self.N < 5_000_000 else None
        if val is not None:
            np.bitwise_or.at(val, key, 1 << pos[coo.col])
            keys = np.flatnonzero(val)
            vals = val[keys]
        else:
            order = np.argsort(key, kind="stable")
            ks = key[order]
            bits = (1 << pos[coo.col])[order]
            starts = np.flatnonzero(np.r_[True, ks[1:] != ks[:-1]])
            keys = ks[starts]
            vals = np.bitwise_or.reduceat(bits, starts)
        out = []
        for key_, v in zip(keys.tolist(), vals.tolist()):
            i, j = divmod(key_, self.N)
            kind = SymbolKind(int(self.kinds[j]))
            out.append((i, j, MixedSymbol(kind, int(_swap_xz(v)) if kind != SymbolKind.BIT else v)))
        return out

    def star(self, e) -> np.ndarray:
        """Syndrome H * e for packed location values of shape (N,) or (B, N)."""
        values = getattr(e, "values", e)
        bits = expand_bits(self.kinds, values)
        return apply_binary(self.binary, bits)

    def column_weight(self, j: int) -> int:
        """Number of rows where column j has a nontrivial entry."""
        sub = self.binary[:, self.column_bits(j)]
        return int(np.count_nonzero(np.asarray(sub.sum(axis=1)).ravel()))

    def column_weights(self) -> np.ndarray:
        loc = np.repeat(np.arange(self.N), self.kinds.astype(np.int64))
        coo = self.binary.tocoo()
        pairs = np.unique(coo.row.astype(np.int64) * self.N + loc[coo.col])
        return np.bincount(pairs % self.N, minlength=self.N)

    def column_blocks(self, j: int) -> list[int]:
        rows = self.binary[:, self.column_bits(j)].nonzero()[0]
        return sorted(set((rows // self.m).tolist()))

    def block(self, a: int, b: int) -> np.ndarray:
        """Dense binary sub-block: rows of row-block a, columns of round b (0-based)."""
        rows = slice(a * self.m, (a + 1) * self.m)
        cols = np.flatnonzero(np.repeat(self.col_rounds, self.kinds.astype(np.int64)) == b + 1)
        return self.binary[rows][:, cols].toarray()

    def select_locations(self, locs) -> "GeneralizedCheckMatrix":
        """Matrix restricted to the given location columns (in the given order)."""
        locs = np.asarray(locs, dtype=np.int64)
        bits = np.concatenate([self.column_bits(j) for j in locs]) if len(locs) else np.zeros(0, np.int64)
        return replace(
            self,
            binary=self.binary[:, bits],
            kinds=self.kinds[locs],
            col_rounds=self.col_rounds[locs],
            labels=tuple(self.labels[j] for j in locs),
            residual=None if self.residual is None else self.residual[:, bits],
        )

    # -- text format -------------------------------------------------------
    def to_text(self) -> str:
        lines = [f"{self.M} {self.N} {self.rounds}"]
        lines += [f"{i} {j} {s.label()}" for i, j, s in self.entries()]
        return "\n".join(lines) + "\n"


def _entry_symbol(kind: SymbolKind, bits) -> MixedSymbol:
    v = int(sum(int(b) << p for p, b in enumerate(bits)))
    if kind == SymbolKind.BIT:
        return MixedSymbol(kind, v)
    return MixedSymbol(kind, int(_swap_xz(v)))


def apply_binary(mat, bits) -> np.ndarray:
    """(mat @ bits) mod 2 for a sparse binary matrix and bit vector(s) (..., ncols)."""
    bits = np.asarray(bits)
    if bits.ndim == 1:
        return (np.asarray(mat @ bits.astype(np.int64)) & 1).astype(np.uint8)
    out = mat @ bits.T.astype(np.int64)
    return (np.asarray(out).T & 1).astype(np.uint8)


def read_matrix_text(text: str):
    """Parse the text dump back into (M, N, r, {(row, col): label})."""
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    M, N, r = map(int, lines[0].split())
    entries = {}
    for ln in lines[1:]:
        i, j, s = ln.split()
        entries[(int(i), int(j))] = s
    return M, N, r, entries


def build_check_matrix(circuit: ExtractionCircuit) -> GeneralizedCheckMatrix:
    """Columns are the oracle responses to each basis fault of each location."""
    syn, res = basis_responses(circuit)
    return GeneralizedCheckMatrix(
        binary=syn,
        kinds=circuit.kinds.copy(),
        m=circuit.code.m,
        blocks=circuit.row_blocks,
        rounds=circuit.rounds,
        col_rounds=circuit.loc_rounds.copy(),
        labels=tuple(loc.label() for loc in circuit.locations),
        residual=res,
        code=circuit.code,
    )


def code_capacity_matrix(code: CodeSpec) -> GeneralizedCheckMatrix:
    """Perfect-measurement instance: one Pauli variable per data qubit, one round."""
    n = code.n
    sym = to_symplectic(code.stabilizers).astype(np.uint8)
    binary = np.zeros((code.m, 2 * n), dtype=np.uint8)
    binary[:, 0::2] = sym[:, n:]  # an X fault anticommutes with Z components
    binary[:, 1::2] = sym[:, :n]
    residual = np.zeros((2 * n, 2 * n), dtype=np.uint8)
    residual[np.arange(n), 2 * np.arange(n)] = 1
    residual[n + np.arange(n), 2 * np.arange(n) + 1] = 1
    return GeneralizedCheckMatrix(
        binary=sp.csc_matrix(binary),
        kinds=np.full(n, int(SymbolKind.PAULI1), dtype=np.int64),
        m=code.m,
        blocks=1,
        rounds=1,
        col_rounds=np.ones(n, dtype=np.int64),
        labels=tuple(f"q{q + 1}" for q in range(n)),
        residual=sp.csc_matrix(residual),
        code=code,
    )

# ---------------------------------------------------------------------------
# Sparsification
# ---------------------------------------------------------------------------

def forward_cascade(blocks: int) -> list[tuple[int, int]]:
    """Block row additions (i, j), meaning block j += block i, 1-based."""
    return [(i, j) for i in range(1, blocks) for j in range(i + 1, blocks + 1)]


def reverse_cascade(blocks: int) -> list[tuple[int, int]]:
    return [(i, i + 1) for i in range(blocks - 1, 0, -1)]


@dataclass(frozen=True)
class RowTransform:
    """A sequence of block row additions acting on syndromes of ``blocks`` x ``m`` bits."""

    blocks: int
    m: int
    ops: tuple

    @cached_property
    def block_matrix(self) -> np.ndarray:
        t = np.eye(self.blocks, dtype=np.uint8)
        for i, j in self.ops:
            t[j - 1] ^= t[i - 1]
        return t

    @cached_property
    def matrix(self) -> sp.csr_matrix:
        return sp.kron(sp.csr_matrix(self.block_matrix), sp.identity(self.m, dtype=np.uint8), format="csr")

    def apply(self, s) -> np.ndarray:
        s = np.array(s, dtype=np.uint8, copy=True)
        view = s.reshape(s.shape[:-1] + (self.blocks, self.m))
        for i, j in self.ops:
            view[..., j - 1, :] ^= view[..., i - 1, :]
        return s

    def invert(self, s) -> np.ndarray:
        s = np.array(s, dtype=np.uint8, copy=True)
        view = s.reshape(s.shape[:-1] + (self.blocks, self.m))
        for i, j in reversed(self.ops):
            view[..., j - 1, :] ^= view[..., i - 1, :]
        return s


def difference_syndrome(s, m: int) -> np.ndarray:
    """Closed form of the cascade: every block XOR the block before it."""
    s = np.asarray(s, dtype=np.uint8)
    view = s.reshape(s.shape[:-1] + (-1, m))
    out = view.copy()
    out[..., 1:, :] ^= view[..., :-1, :]
    return out.reshape(s.shape)


def sparsify(h: GeneralizedCheckMatrix, order: str = "forward"):
    """Apply the block cascade; returns (sparsified matrix, RowTransform)."""
    ops = forward_cascade(h.blocks) if order == "forward" else reverse_cascade(h.blocks)
    tr = RowTransform(h.blocks, h.m, tuple(ops))
    binary = _mod2(tr.matrix @ h.binary.astype(np.int64))
    return replace(h, binary=binary, sparsified=True), tr


# ---------------------------------------------------------------------------
# Tanner graph
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class TannerGraph:
    """Bipartite graph; edge e joins variable edge_var[e] and check edge_check[e].

    ``edge_mask[e]`` is the check entry restricted to the variable's binary
    components (bit p set when component p of the variable flips the check).
    """

    n_checks: int
    var_nbits: np.ndarray
    edge_var: np.ndarray
    edge_check: np.ndarray
    edge_mask: np.ndarray

    @property
    def n_vars(self) -> int:
        return len(self.var_nbits)

    @property
    def n_edges(self) -> int:
        return len(self.edge_var)

    @cached_property
    def var_ptr(self) -> np.ndarray:
        return np.r_[0, np.cumsum(np.bincount(self.edge_var, minlength=self.n_vars))].astype(np.int64)

    @cached_property
    def check_order(self) -> np.ndarray:
        return np.argsort(self.edge_check, kind="stable").astype(np.int64)

    @cached_property
    def check_ptr(self) -> np.ndarray:
        return np.r_[0, np.cumsum(np.bincount(self.edge_check, minlength=self.n_checks))].astype(np.int64)

    def checks_of(self, j: int) -> np.ndarray:
        return self.edge_check[self.var_ptr[j]:self.var_ptr[j + 1]]

    def vars_of(self, i: int) -> np.ndarray:
        return self.edge_var[self.check_order[self.check_ptr[i]:self.check_ptr[i + 1]]]

    def incidence(self) -> sp.csr_matrix:
        data = np.ones(self.n_edges, dtype=np.int64)
        return sp.csr_matrix((data, (self.edge_var, self.edge_check)), shape=(self.n_vars, self.n_checks))

    def count_4cycles(self) -> int:
        """Number of variable pairs sharing two checks, counted per check pair."""
        a = self.incidence()
        c = (a @ a.T).tocoo()
        off = c.row < c.col
        v = c.data[off]
        return int(np.sum(v * (v - 1) // 2))


def build_tanner(binary, groups: Sequence[np.ndarray], n_checks: int | None = None) -> TannerGraph:
    """Tanner graph of variables that own the given binary columns.

    Edges are sorted by variable and then by check.
    """
    binary = sp.csc_matrix(binary)
    n_checks = binary.shape[0] if n_checks is None else n_checks
    owner = np.full(binary.shape[1], -1, dtype=np.int64)
    pos = np.zeros(binary.shape[1], dtype=np.int64)
    for g, cols in enumerate(groups):
        cols = np.asarray(cols, dtype=np.int64)
        owner[cols] = g
        pos[cols] = np.arange(len(cols))
    coo = binary.tocoo()
    keep = owner[coo.col] >= 0
    rows = coo.row[keep].astype(np.int64)
    cols = coo.col[keep]
    key = owner[cols] * n_checks + rows
    order = np.argsort(key, kind="stable")
    key = key[order]
    bits = (1 << pos[cols])[order]
    if len(key):
        starts = np.flatnonzero(np.r_[True, key[1:] != key[:-1]])
        ukey = key[starts]
        masks = np.bitwise_or.reduceat(bits, starts)
    else:
        ukey = np.zeros(0, np.int64)
        masks = np.zeros(0, np.int64)
    nbits = np.array([len(g) for g in groups], dtype=np.int64)
    return TannerGraph(n_checks, nbits, ukey // n_checks, ukey % n_checks, masks.astype(np.int64))


def location_groups(h: GeneralizedCheckMatrix) -> list[np.ndarray]:
    return [h.column_bits(j) for j in range(h.N)]


def to_tanner(h: GeneralizedCheckMatrix, groups=None) -> TannerGraph:
    """Tanner graph with one variable per location (or per given column group)."""
    return build_tanner(h.binary, location_groups(h) if groups is None else groups, h.M)
