"""Degenerate-location merging and probabilistic error consolidation.

Every error variable owns a subset of the binary components of one location
and carries a distribution over all values of those components.  Two values
are degenerate when they produce the same syndrome and the same residual up to
stabilizers.  Both properties are linear, so each binary component gets a
64-bit signature hash (random linear sketch of its syndrome column and of its
residual reduced modulo the stabilizer group) and the hash of any value is the
XOR of its components' hashes.

The structural decisions (which variables split, merge or shrink) depend only
on the circuit, so they are recorded as a :class:`Recipe` that can be replayed
on priors built for any error rate.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .check_matrix import GeneralizedCheckMatrix, apply_binary, build_tanner
from .circuit import ExtractionCircuit, evaluate
from .pauli import SymbolKind, to_symplectic

MODES = ("none", "C4", "C16")


# ---------------------------------------------------------------------------
# Prior tables
# ---------------------------------------------------------------------------

@dataclass
class PriorTable:
    """Error variables and their distributions.

    Variable j owns components ``positions[j]`` of location ``locations[j]``;
    ``cols[j]`` are the matching binary columns of the check matrix and
    ``probs[j][v]`` is the probability of value v, where bit p of v sets
    component ``positions[j][p]``.
    """

    locations: np.ndarray
    positions: list
    cols: list
    probs: list
    origin: np.ndarray  # number of bits of the location each variable came from

    def __len__(self):
        return len(self.probs)

    @property
    def nbits(self) -> np.ndarray:
        return np.array([len(p) for p in self.positions], dtype=np.int64)

    @property
    def active(self) -> np.ndarray:
        return np.array([p[0] < 1.0 - 1e-15 for p in self.probs], dtype=bool)

    def error_mass(self) -> np.ndarray:
        return np.array([1.0 - p[0] for p in self.probs])

    def subset(self, keep) -> "PriorTable":
        keep = np.flatnonzero(np.asarray(keep)) if np.asarray(keep).dtype == bool else np.asarray(keep)
        return PriorTable(
            self.locations[keep],
            [self.positions[j] for j in keep],
            [self.cols[j] for j in keep],
            [self.probs[j] for j in keep],
            self.origin[keep],
        )

    def to_bits(self, values, nbits: int) -> np.ndarray:
        """Binary component vector (length nbits) of per-variable values."""
        out = np.zeros(nbits, dtype=np.uint8)
        for j in np.flatnonzero(values):
            v = int(values[j])
            for p, c in enumerate(self.cols[j]):
                if (v >> p) & 1:
                    out[c] ^= 1
        return out


def location_distribution(kind: SymbolKind, eps: float, eps_b: float) -> np.ndarray:
    if kind == SymbolKind.BIT:
        return np.array([1.0 - eps_b, eps_b])
    size = kind.size
    p = np.full(size, eps / (size - 1))
    p[0] = 1.0 - eps
    return p


def initial_priors(h: GeneralizedCheckMatrix, eps: float, eps_b: float | None = None) -> PriorTable:
    """One variable per location with i.i.d. circuit-level noise priors."""
    eps_b = eps if eps_b is None else eps_b
    kinds = h.kinds.astype(np.int64)
    probs = [location_distribution(SymbolKind(int(k)), eps, eps_b) for k in kinds]
    return PriorTable(
        locations=np.arange(h.N),
        positions=[tuple(range(int(k))) for k in kinds],
        cols=[h.column_bits(j) for j in range(h.N)],
        probs=probs,
        origin=kinds.copy(),
    )


def pushforward(p, images, k_out: int) -> np.ndarray:
    """Distribution of L(v) where L maps input bit b to the packed value images[b]."""
    k = len(images)
    vals = np.arange(1 << k)
    out_val = np.zeros(1 << k, dtype=np.int64)
    for b, img in enumerate(images):
        out_val ^= ((vals >> b) & 1) * int(img)
    q = np.zeros(1 << k_out)
    np.add.at(q, out_val, p)
    return q


def xor_convolve(p, q) -> np.ndarray:
    """Distribution of the XOR of two independent values on the same space."""
    size = len(p)
    a = np.arange(size)
    out = np.zeros(size)
    np.add.at(out, (a[:, None] ^ a[None, :]).ravel(), np.outer(p, q).ravel())
    return out


def merged_rate(eps1: float, eps2: float, size: int) -> float:
    """Total error rate after merging two uniform (depolarizing-like) variables."""
    return eps1 + eps2 - size / (size - 1) * eps1 * eps2


# ---------------------------------------------------------------------------
# Signatures
# ---------------------------------------------------------------------------

class Signatures:
    """Linear 64-bit hashes of (syndrome, residual mod stabilizers) per binary column."""

    def __init__(self, h: GeneralizedCheckMatrix, seed: int = 0x5EED):
        if h.residual is None or h.code is None:
            raise ValueError("check matrix lacks the residual map or code")
        rng = np.random.default_rng(seed)
        self.h = h
        space = h.code.stabilizer_space
        self.space = space
        row_keys = rng.integers(1, 2**63, size=h.M, dtype=np.int64).astype(np.uint64)
        nres = h.residual.shape[0]
        free_keys = np.zeros(nres, dtype=np.uint64)
        free_keys[space.free] = rng.integers(1, 2**63, size=len(space.free), dtype=np.int64).astype(np.uint64)
        unit = free_keys.copy()
        for row, p in zip(space.basis, space.pivots):
            unit[p] = np.bitwise_xor.reduce(free_keys[np.flatnonzero(row)], initial=np.uint64(0))
        self.hash = _column_xor(h.binary, row_keys) ^ _column_xor(h.residual, unit)

    def exact(self, cols: Sequence[int]) -> tuple[np.ndarray, np.ndarray]:
        """Exact signature of the XOR of the given binary columns."""
        v = np.zeros(self.h.binary.shape[1], dtype=np.uint8)
        for c in cols:
            v[c] ^= 1
        syn = apply_binary(self.h.binary, v)
        res = self.space.reduce(apply_binary(self.h.residual, v))
        return syn, res


def _column_xor(mat, keys) -> np.ndarray:
    mat = sp.csc_matrix(mat)
    out = np.zeros(mat.shape[1], dtype=np.uint64)
    vals = keys[mat.indices]
    nonempty = np.flatnonzero(np.diff(mat.indptr))
    if len(nonempty):
        red = np.bitwise_xor.reduceat(vals, mat.indptr[nonempty])
        out[nonempty] = red
    return out


def are_degenerate(circuit: ExtractionCircuit, e, f) -> bool:
    """Same syndrome and residuals equal up to stabilizers, decided by the oracle."""
    a = evaluate(circuit, e)
    b = evaluate(circuit, f)
    if not np.array_equal(a.syndrome, b.syndrome):
        return False
    prod = to_symplectic(a.residual) ^ to_symplectic(b.residual)
    return circuit.code.stabilizer_space.contains(prod)


# ---------------------------------------------------------------------------
# Recipes
# ---------------------------------------------------------------------------

@dataclass
class Recipe:
    """Replayable list of structural operations on variable ids.

    Ids 0..N-1 are the locations; new ids are appended by splits and reductions.
    Operations:

    * ``("split", src, [(new, bit_indices), ...])``: marginals of src,
    * ``("absorb", src, dst, images)``: dst := dst XOR L(src),
    * ``("reduce", src, new, keep, images)``: new := L(src) on the kept bits,
    * ``("delete", src)``.
    """

    n_locations: int
    ops: list = field(default_factory=list)
    final: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {"n_locations": self.n_locations, "ops": self.ops, "final": self.final}

    @classmethod
    def from_json(cls, data: dict) -> "Recipe":
        ops = [tuple(op) for op in data["ops"]]
        return cls(data["n_locations"], ops, list(data["final"]))

    def trace(self, loc: int, value: int) -> dict[int, int]:
        """Where a location value ends up: {position in ``final``: value}.

        An empty dict means every component was deleted as harmless.
        """
        pieces = {loc: value}
        for op in self.ops:
            kind, src = op[0], op[1]
            if src not in pieces:
                continue
            v = pieces.pop(src)
            if kind == "split":
                for new, bits in op[2]:
                    part = sum(((v >> b) & 1) << p for p, b in enumerate(bits))
                    if part:
                        pieces[new] = pieces.get(new, 0) ^ part
            elif kind in ("absorb", "reduce"):
                dst = op[2]
                images = op[3] if kind == "absorb" else op[4]
                img = 0
                for b, im in enumerate(images):
                    if (v >> b) & 1:
                        img ^= im
                if img:
                    pieces[dst] = pieces.get(dst, 0) ^ img
        index = {vid: j for j, vid in enumerate(self.final)}
        return {index[vid]: val for vid, val in pieces.items() if val}

    def apply(self, priors: PriorTable) -> PriorTable:
        locs = {j: int(priors.locations[j]) for j in range(len(priors))}
        pos = {j: tuple(priors.positions[j]) for j in range(len(priors))}
        cols = {j: np.asarray(priors.cols[j]) for j in range(len(priors))}
        probs = {j: np.asarray(priors.probs[j], dtype=float) for j in range(len(priors))}
        origin = {j: int(priors.origin[j]) for j in range(len(priors))}
        for op in self.ops:
            kind = op[0]
            if kind == "split":
                _, src, parts = op
                for new, bits in parts:
                    images = [0] * len(pos[src])
                    for p, b in enumerate(bits):
                        images[b] = 1 << p
                    probs[new] = pushforward(probs[src], images, len(bits))
                    pos[new] = tuple(pos[src][b] for b in bits)
                    cols[new] = cols[src][list(bits)]
                    locs[new] = locs[src]
                    origin[new] = origin[src]
                del probs[src]
            elif kind == "absorb":
                _, src, dst, images = op
                moved = pushforward(probs[src], images, len(pos[dst]))
                probs[dst] = xor_convolve(probs[dst], moved)
                del probs[src]
            elif kind == "reduce":
                _, src, new, keep, images = op
                probs[new] = pushforward(probs[src], images, len(keep))
                pos[new] = tuple(pos[src][b] for b in keep)
                cols[new] = cols[src][list(keep)]
                locs[new] = locs[src]
                origin[new] = origin[src]
                del probs[src]
            elif kind == "delete":
                del probs[op[1]]
            else:
                raise ValueError(f"unknown recipe op {kind!r}")
        final = self.final
        return PriorTable(
            np.array([locs[j] for j in final], dtype=np.int64),
            [pos[j] for j in final],
            [cols[j] for j in final],
            [probs[j] for j in final],
            np.array([origin[j] for j in final], dtype=np.int64),
        )


class _Builder:
    """Runs the consolidation steps on structure only and records the recipe."""

    def __init__(self, h: GeneralizedCheckMatrix, sig: Signatures, order: str, verify: bool):
        self.h = h
        self.sig = sig
        self.verify = verify
        self.reverse = order == "descending"
        self.recipe = Recipe(h.N)
        self.cols: dict[int, np.ndarray] = {}
        self.origin: dict[int, int] = {}
        self.loc: dict[int, int] = {}
        self.by_hash: dict[int, set] = {}
        self.next_id = h.N
        for j in range(h.N):
            self._add(j, h.column_bits(j), int(h.kinds[j]), j)

    # -- bookkeeping ---------------------------------------------------------
    def _add(self, vid, cols, origin, loc):
        self.cols[vid] = np.asarray(cols, dtype=np.int64)
        self.origin[vid] = origin
        self.loc[vid] = loc
        for hv in self.span(vid):
            self.by_hash.setdefault(hv, set()).add(vid)

    def _remove(self, vid):
        for hv in self.span(vid):
            s = self.by_hash.get(hv)
            if s is not None:
                s.discard(vid)
                if not s:
                    del self.by_hash[hv]
        del self.cols[vid]

    def k(self, vid) -> int:
        return len(self.cols[vid])

    def bit_hashes(self, vid) -> np.ndarray:
        return self.sig.hash[self.cols[vid]]

    def value_hashes(self, vid) -> np.ndarray:
        hb = self.bit_hashes(vid)
        k = len(hb)
        out = np.zeros(1 << k, dtype=np.uint64)
        for v in range(1, 1 << k):
            low = v & -v
            out[v] = out[v ^ low] ^ hb[low.bit_length() - 1]
        return out

    def span(self, vid) -> frozenset:
        vals = self.value_hashes(vid)[1:]
        return frozenset(int(x) for x in vals if x)

    def injective(self, vid) -> bool:
        vals = self.value_hashes(vid)[1:]
        return bool(np.all(vals != 0)) and len(set(vals.tolist())) == len(vals)

    def rank(self, vid):
        return (self.origin[vid], vid)

    def ids(self, k=None) -> list[int]:
        out = [v for v in self.cols if k is None or self.k(v) == k]
        return sorted(out, reverse=self.reverse)

    def holders(self, hv: int, exclude=()) -> list[int]:
        return sorted((v for v in self.by_hash.get(int(hv), ()) if v not in exclude), key=self.rank)

    # -- operations ----------------------------------------------------------
    def split(self, vid, parts) -> list[int]:
        new_ids = []
        spec = []
        for bits in parts:
            nid = self.next_id
            self.next_id += 1
            new_ids.append(nid)
            spec.append((nid, tuple(int(b) for b in bits)))
        cols, origin, loc = self.cols[vid], self.origin[vid], self.loc[vid]
        self._remove(vid)
        for nid, bits in spec:
            self._add(nid, cols[list(bits)], origin, loc)
        self.recipe.ops.append(("split", vid, spec))
        return new_ids

    def absorb(self, src, dst):
        dvals = self.value_hashes(dst)
        lookup = {int(hv): v for v, hv in enumerate(dvals)}
        images = []
        for hb in self.bit_hashes(src):
            if int(hb) not in lookup:
                raise RuntimeError("absorb target does not contain the source span")
            images.append(lookup[int(hb)])
        if self.verify:
            for b, img in enumerate(images):
                mine = self.sig.exact([self.cols[src][b]])
                theirs = self.sig.exact([c for p, c in enumerate(self.cols[dst]) if (img >> p) & 1])
                if not (np.array_equal(mine[0], theirs[0]) and np.array_equal(mine[1], theirs[1])):
                    raise RuntimeError("signature hash collision")
        self._remove(src)
        self.recipe.ops.append(("absorb", src, dst, images))

    # -- steps ---------------------------------------------------------------
    def split_all_pairs(self):
        for vid in self.ids(4):
            self.split(vid, [(0, 1), (2, 3)])

    def merge_same_type(self):
        groups: dict = {}
        for vid in sorted(self.cols):
            if self.injective(vid):
                groups.setdefault((self.k(vid), self.span(vid)), []).append(vid)
        for members in groups.values():
            members = sorted(members, key=self.rank)
            for other in members[1:]:
                self.absorb(other, members[0])

    def _equal_span_partner(self, vid):
        if not self.injective(vid):
            return None
        span = self.span(vid)
        first = next(iter(span))
        for q in self.holders(first, exclude=(vid,)):
            if self.k(q) == self.k(vid) and self.injective(q) and self.span(q) == span:
                return q
        return None

    def decouple_pairs_vs_quaternary(self):
        for vid in self.ids(4):
            if vid not in self.cols:
                continue
            vals = self.value_hashes(vid)
            half_vals = [vals[v] for v in (1, 2, 3, 4, 8, 12)]
            hit = any(
                hv and any(self.k(q) == 2 for q in self.holders(hv, exclude=(vid,)))
                for hv in half_vals
            )
            if not hit:
                continue
            for half in self.split(vid, [(0, 1), (2, 3)]):
                q = self._equal_span_partner(half)
                if q is not None:
                    self.absorb(half, q)

    def decouple_pairs_vs_binary(self):
        for vid in self.ids(4):
            if vid not in self.cols:
                continue
            hb = self.bit_hashes(vid)
            matched = {}
            for b in range(4):
                if hb[b]:
                    cands = [v for v in self.holders(hb[b], exclude=(vid,)) if self.k(v) == 1]
                    if cands:
                        matched[b] = cands[0]
            if not matched:
                continue
            rest = [b for b in range(4) if b not in matched]
            if len(matched) <= 2:
                parts = [tuple(rest)] + [(b,) for b in sorted(matched)]
            else:
                parts = [(0,), (1,), (2,), (3,)]
            for nid, bits in zip(self.split(vid, parts), parts):
                if len(bits) == 1 and bits[0] in matched:
                    self.absorb(nid, matched[bits[0]])

    def _representative_for_bit(self, vid, exclude):
        hv = self.bit_hashes(vid)[0]
        if not hv:
            return None
        cands = [v for v in self.holders(hv, exclude=exclude) if self.k(v) <= 2]
        for v in cands:
            if self.k(v) == 1:
                return v
        return cands[0] if cands else None

    def decouple_quaternary(self):
        for vid in self.ids(2):
            if vid not in self.cols:
                continue
            hb = self.bit_hashes(vid)
            my_rank = self.rank(vid)
            trigger = False
            for b in range(2):
                if not hb[b]:
                    continue
                for r in self.holders(hb[b], exclude=(vid,)):
                    if self.k(r) == 1:
                        trigger = True
                    elif self.k(r) == 2 and self.rank(r) < my_rank and self.span(r) != self.span(vid):
                        trigger = True
            if not trigger:
                continue
            pieces = self.split(vid, [(0,), (1,)])
            for nid in pieces:
                rep = self._representative_for_bit(nid, exclude=set(pieces))
                if rep is not None:
                    self.absorb(nid, rep)

    def drop_trivial(self):
        for vid in sorted(self.cols):
            vals = self.value_hashes(vid)
            if np.all(vals[1:] != 0):
                continue
            hb = self.bit_hashes(vid)
            keep, reach = [], {0}
            for b, hv in enumerate(hb):
                hv = int(hv)
                if hv not in reach:
                    keep.append(b)
                    reach |= {r ^ hv for r in reach}
            if not keep:
                self._remove(vid)
                self.recipe.ops.append(("delete", vid))
                continue
            kept_vals = {}
            for v in range(1 << len(keep)):
                acc = 0
                for p, b in enumerate(keep):
                    if (v >> p) & 1:
                        acc ^= int(hb[b])
                kept_vals[acc] = v
            images = [kept_vals[int(hv)] for hv in hb]
            nid = self.next_id
            self.next_id += 1
            cols, origin, loc = self.cols[vid], self.origin[vid], self.loc[vid]
            self._remove(vid)
            self._add(nid, cols[keep], origin, loc)
            self.recipe.ops.append(("reduce", vid, nid, keep, images))

    def finish(self) -> Recipe:
        final = sorted(self.cols, key=lambda v: (self.loc[v], tuple(self.cols[v])))
        self.recipe.final = final
        return self.recipe


def build_recipe(h: GeneralizedCheckMatrix, mode: str = "C16", order: str = "ascending",
                 verify: bool = True, steps: Sequence[int] | None = None) -> Recipe:
    """Structural consolidation plan for a sparsified check matrix.

    ``steps`` restricts the run to a subset of {1, 2, 3, 4, 5}; by default C16
    runs all five and C4 splits every pair variable first and runs 1, 4, 5.
    """
    if mode not in MODES:
        raise ValueError(f"unknown consolidation mode {mode!r}")
    b = _Builder(h, Signatures(h), order, verify)
    if mode == "none":
        return b.finish()
    if steps is None:
        steps = (1, 2, 3, 4, 5) if mode == "C16" else (1, 4, 5)
    if mode == "C4":
        b.split_all_pairs()
    if 1 in steps:
        b.merge_same_type()
    if 2 in steps:
        b.decouple_pairs_vs_quaternary()
    if 3 in steps:
        b.decouple_pairs_vs_binary()
    if 4 in steps:
        b.decouple_quaternary()
    if 5 in steps:
        b.drop_trivial()
    return b.finish()


def merge_same_type(h: GeneralizedCheckMatrix, priors: PriorTable) -> PriorTable:
    """Only merge same-alphabet locations whose errors are all degenerate."""
    return build_recipe(h, "C16", steps=(1,)).apply(priors)


def merged_matrix(h: GeneralizedCheckMatrix) -> GeneralizedCheckMatrix:
    """Columns left after merging same-alphabet degenerate locations."""
    recipe = build_recipe(h, "C16", steps=(1,))
    keep = sorted(v for v in recipe.final if v < recipe.n_locations)
    return h.select_locations(keep)


def consolidate(h: GeneralizedCheckMatrix, priors: PriorTable, mode: str = "C16",
                order: str = "ascending") -> PriorTable:
    """Consolidated prior table; variables with zero error mass are dropped."""
    table = build_recipe(h, mode, order).apply(priors)
    return table.subset(table.active)


def consolidated_tanner(h: GeneralizedCheckMatrix, priors: PriorTable):
    return build_tanner(h.binary, priors.cols, h.M)
