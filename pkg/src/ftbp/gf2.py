"""Dense linear algebra over GF(2) on uint8 arrays."""
from __future__ import annotations

import numpy as np


def rref(a):
    """Reduced row echelon form.

    Returns (R, pivots) where R has the nonzero rows first and every pivot
    column is a unit vector.
    """
    r = np.array(a, dtype=np.uint8, copy=True) & 1
    rows, cols = r.shape
    pivots = []
    row = 0
    for col in range(cols):
        if row >= rows:
            break
        hits = np.flatnonzero(r[row:, col])
        if len(hits) == 0:
            continue
        p = row + hits[0]
        if p != row:
            r[[row, p]] = r[[p, row]]
        others = np.flatnonzero(r[:, col])
        others = others[others != row]
        r[others] ^= r[row]
        pivots.append(col)
        row += 1
    return r, pivots


def rank(a) -> int:
    return len(rref(a)[1])


def nullspace(a) -> np.ndarray:
    """Basis of {x : a x = 0} as rows."""
    a = np.asarray(a, dtype=np.uint8)
    n = a.shape[1]
    r, piv = rref(a)
    free = [c for c in range(n) if c not in set(piv)]
    basis = np.zeros((len(free), n), dtype=np.uint8)
    for i, f in enumerate(free):
        basis[i, f] = 1
        for row, p in enumerate(piv):
            basis[i, p] = r[row, f]
    return basis


class RowSpace:
    """Membership test and canonical reduction modulo a row space."""

    def __init__(self, a):
        r, piv = rref(a)
        self.basis = r[: len(piv)]
        self.pivots = np.asarray(piv, dtype=np.int64)
        self.ncols = r.shape[1]
        mask = np.ones(self.ncols, dtype=bool)
        mask[self.pivots] = False
        self.free = np.flatnonzero(mask)

    @property
    def rank(self) -> int:
        return len(self.pivots)

    def reduce(self, v) -> np.ndarray:
        """Canonical representative of v modulo the row space (works on batches)."""
        v = np.asarray(v, dtype=np.uint8) & 1
        if self.rank == 0:
            return v.copy()
        coeff = v[..., self.pivots]
        return (v ^ ((coeff.astype(np.int64) @ self.basis.astype(np.int64)) & 1)).astype(np.uint8)

    def quotient_coords(self, v) -> np.ndarray:
        """Coordinates of v in the quotient, i.e. the free columns after reduction."""
        return self.reduce(v)[..., self.free]

    def contains(self, v) -> bool:
        return not np.any(self.reduce(v))
