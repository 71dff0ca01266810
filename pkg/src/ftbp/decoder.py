"""Belief propagation over mixed-alphabet Tanner graphs.

Each variable has k binary components (k = 1 for bits, 2 for single-qubit
Paulis, 3 for restricted pairs, 4 for two-qubit Paulis) and a belief vector
Gamma[w] = ln(P(0) / P(w)) over its 2^k - 1 nonzero values.  A check sees the
variable through a mask h: value w flips the check iff popcount(h & w) is odd.
Variable-to-check messages are scalars, obtained by collapsing the belief
vector onto the two cosets of that mask.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numba import njit
from sklearn.base import BaseEstimator

from .check_matrix import GeneralizedCheckMatrix, build_tanner
from .pauli import MixedSymbol, SymbolKind, pauli_order_key, symplectic_form

CLAMP = 30.0
DEFAULT_ALPHAS = tuple(round(1.0 - 0.01 * i, 2) for i in range(61))
T_MAX = 150

PARITY = np.array([[bin(a & b).count("1") & 1 for b in range(16)] for a in range(16)], dtype=np.uint8)


# ---------------------------------------------------------------------------
# Reference scalar functions
# ---------------------------------------------------------------------------

def boxplus(values: Sequence[float]) -> float:
    """2 atanh(prod tanh(a/2)); the empty combination is +inf."""
    if len(values) == 0:
        return math.inf
    prod = 1.0
    for a in values:
        prod *= math.tanh(a / 2.0)
    if prod >= 1.0:
        return math.inf
    if prod <= -1.0:
        return -math.inf
    return 2.0 * math.atanh(prod)


def lambda_mask(h: int, gammas) -> float:
    """Scalar LLR of <h . v = 0> against <h . v = 1> for beliefs over nonzero v.

    ``gammas[v - 1]`` is the belief of packed value v.
    """
    gammas = np.asarray(gammas, dtype=float)
    even = [0.0] + [-gammas[v - 1] for v in range(1, len(gammas) + 1) if not PARITY[h & 15, v & 15]]
    odd = [-gammas[v - 1] for v in range(1, len(gammas) + 1) if PARITY[h & 15, v & 15]]
    if not odd:
        return math.inf
    return float(np.logaddexp.reduce(even) - np.logaddexp.reduce(odd))


def lambda_w(w: MixedSymbol, gammas) -> float:
    """Scalar LLR that the variable commutes with the check symbol ``w``.

    ``gammas`` lists beliefs by packed value minus one: for a single-qubit
    variable the order is (X, Z, Y); for a pair it runs over all 15 values.
    """
    gammas = np.asarray(gammas, dtype=float)
    size = len(gammas) + 1
    if w.kind == SymbolKind.BIT:
        flips = lambda v: v & int(w.value)
    else:
        flips = lambda v: int(symplectic_form(int(w.value), v))
    even = [0.0] + [-gammas[v - 1] for v in range(1, size) if not flips(v)]
    odd = [-gammas[v - 1] for v in range(1, size) if flips(v)]
    if not odd:
        return math.inf
    return float(np.logaddexp.reduce(even) - np.logaddexp.reduce(odd))


# ---------------------------------------------------------------------------
# Compiled kernel
# ---------------------------------------------------------------------------

@njit(cache=True)
def _lam(h, gam, off, size, parity, clamp):
    m0 = 0.0
    m1 = -np.inf
    for w in range(1, size):
        g = -gam[off + w]
        if parity[h, w]:
            if g > m1:
                m1 = g
        elif g > m0:
            m0 = g
    s0 = math.exp(-m0)
    s1 = 0.0
    for w in range(1, size):
        g = -gam[off + w]
        if parity[h, w]:
            s1 += math.exp(g - m1)
        else:
            s0 += math.exp(g - m0)
    val = (m0 + math.log(s0)) - (m1 + math.log(s1))
    if val > clamp:
        return clamp
    if val < -clamp:
        return -clamp
    return val


@njit(cache=True)
def _run(var_k, var_ptr, edge_check, edge_mask, check_ptr, check_edges, llr_off, llr,
         tie, syndrome, alpha, t_max, parity, clamp):
    n_vars = len(var_k)
    n_edges = len(edge_check)
    n_checks = len(check_ptr) - 1
    vc = np.empty(n_edges)
    cv = np.zeros(n_edges)
    gam = llr.copy()
    tmp = np.empty(16)
    for j in range(n_vars):
        size = 1 << var_k[j]
        for e in range(var_ptr[j], var_ptr[j + 1]):
            vc[e] = _lam(edge_mask[e], llr, llr_off[j], size, parity, clamp)
    est = np.zeros(n_vars, dtype=np.int64)
    cur = np.zeros(n_checks, dtype=np.uint8)
    mismatch = 0
    for i in range(n_checks):
        if syndrome[i]:
            mismatch += 1
    inv_alpha = 1.0 / alpha
    th = np.empty(n_edges)
    pnz = np.empty(n_checks)
    nzero = np.zeros(n_checks, dtype=np.int64)
    for it in range(1, t_max + 1):
        # per-check products of tanh(m/2), rebuilt each sweep to bound drift
        pnz[:] = 1.0
        nzero[:] = 0
        for e in range(n_edges):
            th[e] = math.tanh(0.5 * vc[e])
            if th[e] == 0.0:
                nzero[edge_check[e]] += 1
            else:
                pnz[edge_check[e]] *= th[e]
        for j in range(n_vars):
            size = 1 << var_k[j]
            off = llr_off[j]
            e0 = var_ptr[j]
            e1 = var_ptr[j + 1]
            # horizontal step for the incoming messages of j
            for e in range(e0, e1):
                i = edge_check[e]
                if th[e] == 0.0:
                    prod = pnz[i] if nzero[i] == 1 else 0.0
                elif nzero[i] > 0:
                    prod = 0.0
                else:
                    prod = pnz[i] / th[e]
                if prod >= 1.0:
                    val = clamp
                elif prod <= -1.0:
                    val = -clamp
                else:
                    val = 2.0 * math.atanh(prod)
                    if val > clamp:
                        val = clamp
                    elif val < -clamp:
                        val = -clamp
                if syndrome[i]:
                    val = -val
                cv[e] = val
            # vertical step
            for w in range(1, size):
                acc = 0.0
                for e in range(e0, e1):
                    if parity[edge_mask[e], w]:
                        acc += cv[e]
                gam[off + w] = llr[off + w] + inv_alpha * acc
            # hard decision
            best = 0
            bestval = 0.0
            for t in range(1, size):
                w = tie[off + t]
                if gam[off + w] <= 0.0 and (best == 0 or gam[off + w] < bestval):
                    best = w
                    bestval = gam[off + w]
            if best != est[j]:
                diff = best ^ est[j]
                for e in range(e0, e1):
                    if parity[edge_mask[e], diff]:
                        i = edge_check[e]
                        cur[i] ^= 1
                        if cur[i] == syndrome[i]:
                            mismatch -= 1
                        else:
                            mismatch += 1
                est[j] = best
            # variable-to-check messages: removing the message from check e
            # only rescales the odd coset, so lambda(Gamma - Delta_e) equals
            # lambda(Gamma) - Delta_e and one set of exponentials serves all edges
            shift = 0.0
            for w in range(1, size):
                if -gam[off + w] > shift:
                    shift = -gam[off + w]
            for w in range(1, size):
                tmp[w] = math.exp(-gam[off + w] - shift)
            base = math.exp(-shift)
            for e in range(e0, e1):
                h = edge_mask[e]
                s0 = base
                s1 = 0.0
                for w in range(1, size):
                    if parity[h, w]:
                        s1 += tmp[w]
                    else:
                        s0 += tmp[w]
                if s1 <= 0.0:
                    val = clamp
                elif s0 <= 0.0:
                    val = -clamp
                else:
                    val = math.log(s0) - math.log(s1) - cv[e]
                    if val > clamp:
                        val = clamp
                    elif val < -clamp:
                        val = -clamp
                vc[e] = val
                t_new = math.tanh(0.5 * val)
                i = edge_check[e]
                if th[e] == 0.0:
                    nzero[i] -= 1
                else:
                    pnz[i] /= th[e]
                if t_new == 0.0:
                    nzero[i] += 1
                else:
                    pnz[i] *= t_new
                th[e] = t_new
        if mismatch == 0:
            return 1, it, est
    return 0, t_max, est


# ---------------------------------------------------------------------------
# Graph assembly
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class DecoderGraph:
    """Flat arrays for the kernel plus the map back to prior-table variables."""

    n_checks: int
    var_index: np.ndarray  # prior-table index of each graph variable
    var_k: np.ndarray
    var_ptr: np.ndarray
    edge_var: np.ndarray
    edge_check: np.ndarray
    edge_mask: np.ndarray
    check_ptr: np.ndarray
    check_edges: np.ndarray
    llr_off: np.ndarray
    llr: np.ndarray
    tie: np.ndarray
    n_table: int

    @property
    def n_vars(self) -> int:
        return len(self.var_k)

    def syndrome_of(self, est) -> np.ndarray:
        """Syndrome of per-graph-variable values."""
        flips = PARITY[self.edge_mask & 15, np.asarray(est)[self.edge_var] & 15]
        return (np.bincount(self.edge_check, weights=flips, minlength=self.n_checks).astype(np.int64) & 1).astype(np.uint8)

    def to_table_values(self, est) -> np.ndarray:
        out = np.zeros(self.n_table, dtype=np.int64)
        out[self.var_index] = est
        return out

    def with_priors(self, priors) -> "DecoderGraph":
        """Same structure with LLRs from another table of identical layout."""
        llr = _llrs([priors.probs[j] for j in self.var_index])
        return DecoderGraph(**{**self.__dict__, "llr": llr})


def _llrs(probs) -> np.ndarray:
    chunks = []
    for p in probs:
        p = np.asarray(p, dtype=float)
        with np.errstate(divide="ignore"):
            lam = np.log(p[0]) - np.log(p)
        lam[0] = 0.0
        chunks.append(np.clip(np.nan_to_num(lam, posinf=CLAMP, neginf=-CLAMP), -CLAMP, CLAMP))
    return np.concatenate(chunks) if chunks else np.zeros(0)


def _tie_order(positions, loc_bits) -> list[int]:
    size = 1 << len(positions)

    def locval(v):
        return sum(((v >> p) & 1) << b for p, b in enumerate(positions))

    return sorted(range(1, size), key=lambda v: pauli_order_key(locval(v), loc_bits))


def build_decoder_graph(h, priors, order: str = "ascending") -> DecoderGraph:
    """Assemble the kernel graph from a (sparsified) check matrix and prior table.

    Variables with no error mass or no nontrivial check entry are left out.
    The serial schedule visits variables in graph order, which follows the
    prior table (``order="ascending"``) or reverses it (``"descending"``).
    """
    if order not in ("ascending", "descending"):
        raise ValueError(f"unknown schedule order {order!r}")
    binary = h.binary if isinstance(h, GeneralizedCheckMatrix) else h
    n_checks = binary.shape[0]
    active = np.flatnonzero(priors.active)
    tg = build_tanner(binary, [priors.cols[j] for j in active], n_checks)
    has_edge = np.bincount(tg.edge_var, minlength=len(active)) > 0
    keep = active[has_edge]
    if order == "descending":
        keep = keep[::-1]
    if order == "descending" or not np.all(has_edge):
        tg = build_tanner(binary, [priors.cols[j] for j in keep], n_checks)
    var_k = np.array([len(priors.cols[j]) for j in keep], dtype=np.int64)
    sizes = 1 << var_k
    llr_off = (np.cumsum(sizes) - sizes).astype(np.int64)
    llr = _llrs([priors.probs[j] for j in keep])
    tie = np.zeros(int(sizes.sum()), dtype=np.int64)
    for t, j in enumerate(keep):
        order = _tie_order(priors.positions[j], int(priors.origin[j]))
        tie[llr_off[t] + 1: llr_off[t] + sizes[t]] = order
    return DecoderGraph(
        n_checks=n_checks,
        var_index=keep.astype(np.int64),
        var_k=var_k,
        var_ptr=tg.var_ptr,
        edge_var=tg.edge_var.astype(np.int64),
        edge_check=tg.edge_check.astype(np.int64),
        edge_mask=tg.edge_mask.astype(np.int64),
        check_ptr=tg.check_ptr,
        check_edges=tg.check_order,
        llr_off=llr_off,
        llr=llr,
        tie=tie,
        n_table=len(priors),
    )


# ---------------------------------------------------------------------------
# Public decoding API
# ---------------------------------------------------------------------------

@dataclass
class DecodeOutcome:
    status: str  # "Converge" or "Fail"
    estimate: np.ndarray  # values per prior-table variable
    iterations: int
    alpha: float

    @property
    def converged(self) -> bool:
        return self.status == "Converge"


def _decode_graph(g: DecoderGraph, s, t_max: int, alpha: float) -> DecodeOutcome:
    s = np.ascontiguousarray(s, dtype=np.uint8)
    if len(s) != g.n_checks:
        raise ValueError(f"syndrome length {len(s)} != {g.n_checks}")
    if not s.any():
        return DecodeOutcome("Converge", np.zeros(g.n_table, dtype=np.int64), 1, alpha)
    ok, it, est = _run(g.var_k, g.var_ptr, g.edge_check, g.edge_mask, g.check_ptr, g.check_edges,
                       g.llr_off, g.llr, g.tie, s, float(alpha), int(t_max), PARITY, CLAMP)
    if ok:
        assert np.array_equal(g.syndrome_of(est), s), "converged estimate misses the syndrome"
    return DecodeOutcome("Converge" if ok else "Fail", g.to_table_values(est), int(it), float(alpha))


def ftbp_decode(h, s, priors=None, t_max: int = T_MAX, alpha: float = 1.0) -> DecodeOutcome:
    """One run of the serial-schedule decoder with vertical-step scaling 1/alpha.

    ``h`` is a check matrix (with ``priors``) or a prebuilt :class:`DecoderGraph`.
    """
    g = h if isinstance(h, DecoderGraph) else build_decoder_graph(h, priors)
    return _decode_graph(g, s, t_max, alpha)


def ftbp_adaptive(h, s, priors=None, t_max: int = T_MAX, alphas: Sequence[float] = DEFAULT_ALPHAS) -> DecodeOutcome:
    """Try each alpha in turn and return the first converging run."""
    alphas = list(alphas)
    if not alphas or any(a <= 0 for a in alphas) or any(b >= a for a, b in zip(alphas, alphas[1:])):
        raise ValueError("alphas must be positive and strictly decreasing")
    g = h if isinstance(h, DecoderGraph) else build_decoder_graph(h, priors)
    out = None
    for a in alphas:
        out = _decode_graph(g, s, t_max, a)
        if out.converged:
            return out
    return out


class FTBPDecoder(BaseEstimator):
    """Estimator wrapper: ``fit`` prepares the graph for a circuit, ``predict`` decodes.

    ``predict`` takes raw syndromes (rows of length M) and returns the binary
    component vectors of the estimated location faults.  ``schedule`` sets the
    serial visiting order and ``consolidation_order`` the order in which
    degeneracy classes are processed.
    """

    def __init__(self, mode="C16", eps=1e-3, eps_b=None, t_max=T_MAX, alphas=DEFAULT_ALPHAS,
                 schedule="ascending", consolidation_order="ascending"):
        self.mode = mode
        self.eps = eps
        self.eps_b = eps_b
        self.t_max = t_max
        self.alphas = alphas
        self.schedule = schedule
        self.consolidation_order = consolidation_order

    def fit(self, circuit, y=None):
        from .check_matrix import build_check_matrix, sparsify
        from .consolidation import build_recipe, initial_priors

        h = build_check_matrix(circuit)
        self.matrix_, self.transform_ = sparsify(h)
        self.recipe_ = build_recipe(self.matrix_, self.mode, self.consolidation_order)
        self.priors_ = self.recipe_.apply(initial_priors(self.matrix_, self.eps, self.eps_b))
        self.graph_ = build_decoder_graph(self.matrix_, self.priors_, self.schedule)
        self.nbits_ = circuit.nbits
        return self

    def decode(self, syndrome) -> DecodeOutcome:
        return ftbp_adaptive(self.graph_, self.transform_.apply(syndrome), t_max=self.t_max, alphas=self.alphas)

    def predict(self, syndromes):
        syndromes = np.atleast_2d(np.asarray(syndromes, dtype=np.uint8))
        out = np.zeros((len(syndromes), self.nbits_), dtype=np.uint8)
        self.outcomes_ = []
        for b, s in enumerate(syndromes):
            res = self.decode(s)
            self.outcomes_.append(res)
            out[b] = self.priors_.to_bits(res.estimate, self.nbits_)
        return out
