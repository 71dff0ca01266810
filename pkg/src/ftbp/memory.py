"""Memory-lifetime Monte Carlo with windowed decoding.

Noise is tracked per absolute round as binary component vectors over the
locations of one extraction round.  Corrections are applied by XOR-ing the
estimated fault components into the same per-round store, so the stored
vector is always (sampled faults) + (applied corrections).  Raw syndromes
and the data frame then follow from the single-round linear model

    s_t     = B delta_t + A P_t
    P_{t+1} = P_t + R delta_t

with B, R the syndrome and residual responses of one round and A the
stabilizer syndrome map on data frames.
"""
from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .check_matrix import GeneralizedCheckMatrix, build_check_matrix, sparsify
from .circuit import basis_responses, build_circuit, sample_values
from .codes import CodeSpec
from .consolidation import build_recipe, initial_priors
from .decoder import DEFAULT_ALPHAS, T_MAX, DecodeOutcome, DecoderGraph, build_decoder_graph, ftbp_adaptive
from .pauli import expand_bits

log = logging.getLogger(__name__)

POLICIES = ("fixed", "adaptive")


@dataclass(frozen=True)
class DecoderConfig:
    t_max: int = T_MAX
    alphas: tuple = DEFAULT_ALPHAS

    def __post_init__(self):
        if self.t_max < 1:
            raise ValueError("t_max must be positive")
        if not self.alphas:
            raise ValueError("need at least one alpha")


class RoundModel:
    """Linear response of one extraction round."""

    def __init__(self, code: CodeSpec):
        self.code = code
        circ = build_circuit(code, 1)
        self.kinds = circ.kinds
        self.nbits = circ.nbits
        syn, res = basis_responses(circ)
        self.syn = sp.csr_matrix(syn, dtype=np.int64)
        self.res = sp.csr_matrix(res, dtype=np.int64)
        n = code.n
        s = code.symplectic.astype(np.int64)
        self.stab = sp.csr_matrix(np.concatenate([s[:, n:], s[:, :n]], axis=1))

    def syndrome(self, delta, frame) -> np.ndarray:
        return ((self.syn @ delta + self.stab @ frame) & 1).astype(np.uint8)

    def advance(self, frame, delta) -> np.ndarray:
        return ((frame + self.res @ delta) & 1).astype(np.uint8)

    def sample(self, eps, eps_b, rng) -> np.ndarray:
        return expand_bits(self.kinds, sample_values(self.kinds, eps, eps_b, rng)).astype(np.uint8)


@dataclass(eq=False)
class WindowDecoder:
    """Everything needed to decode r rounds (optionally plus a perfect round)."""

    rounds: int
    tail: bool
    matrix: GeneralizedCheckMatrix
    transform: object
    priors: object
    graph: DecoderGraph
    var_rounds: np.ndarray  # window-relative round per prior-table variable

    def decode(self, raw_syndrome, cfg: DecoderConfig) -> DecodeOutcome:
        return ftbp_adaptive(self.graph, self.transform.apply(raw_syndrome), t_max=cfg.t_max, alphas=cfg.alphas)

    def bits(self, values) -> np.ndarray:
        return self.priors.to_bits(values, self.matrix.binary.shape[1])

    def residual(self, values) -> np.ndarray:
        return ((self.matrix.residual @ self.bits(values).astype(np.int64)) & 1).astype(np.uint8)


_CACHE: dict = {}


def _code_key(code: CodeSpec):
    return (code.family, code.n, code.d, code.schedule, code.stabilizers.tobytes())


def round_model(code: CodeSpec) -> RoundModel:
    key = ("round", _code_key(code))
    if key not in _CACHE:
        _CACHE[key] = RoundModel(code)
    return _CACHE[key]


def window_decoder(code: CodeSpec, r: int, mode: str, eps: float, eps_b: float | None = None,
                   tail: bool = False, order: str = "ascending") -> WindowDecoder:
    """Cached decoder setup for an r-round window."""
    eps_b = eps if eps_b is None else eps_b
    key = ("window", _code_key(code), r, mode, eps, eps_b, tail, order)
    if key in _CACHE:
        return _CACHE[key]
    circ = build_circuit(code, r, perfect_tail=tail)
    h, tr = sparsify(build_check_matrix(circ))
    recipe = build_recipe(h, mode, order)
    priors = recipe.apply(initial_priors(h, eps, eps_b))
    graph = build_decoder_graph(h, priors)
    var_rounds = circ.loc_rounds[priors.locations] - 1
    out = WindowDecoder(r, tail, h, tr, priors, graph, var_rounds)
    _CACHE[key] = out
    return out


@dataclass
class WindowState:
    """One decoding window over absolute rounds [start, start + r)."""

    r: int
    start: int
    raw: np.ndarray  # raw syndrome bits, r blocks of m
    frame: np.ndarray  # data frame entering the window, [x | z]
    end_frame: np.ndarray  # data frame after the last round of the window

    @property
    def syndrome(self) -> np.ndarray:
        """Raw syndrome bits; decoders apply their own row transform."""
        return self.raw


@dataclass
class LifetimeResult:
    rounds: int
    censored: bool
    seed: int
    cause: str | None = None  # "logical" or "decoder-fail" for dead memories
    windows: int = 0
    alpha_counts: dict = field(default_factory=dict)
    mean_iterations: float = 0.0
    offsets: dict = field(default_factory=dict)
    actual_failures: int = 0

    def __post_init__(self):
        if self.rounds < 0:
            raise ValueError("rounds survived must be non-negative")

    def to_record(self) -> dict:
        return {
            "seed": self.seed,
            "rounds": self.rounds,
            "censored": self.censored,
            "cause": self.cause,
            "windows": self.windows,
            "alpha_counts": {f"{k:.2f}": v for k, v in sorted(self.alpha_counts.items())},
            "mean_iterations": round(self.mean_iterations, 4),
            "offsets": {str(k): v for k, v in sorted(self.offsets.items())},
            "actual_failures": self.actual_failures,
        }


def virtual_decode(window: WindowState, decoder: WindowDecoder, code: CodeSpec,
                   cfg: DecoderConfig = DecoderConfig()) -> tuple[bool, DecodeOutcome]:
    """Decode with one extra noiseless round read off the true frame.

    Returns (alive, outcome).  The memory is dead when the decoder fails or
    the corrected frame is a nontrivial logical operator.
    """
    if not decoder.tail or decoder.rounds != window.r:
        raise ValueError("virtual decoding needs an r-round decoder with a perfect tail")
    rm = round_model(code)
    tail = ((rm.stab @ window.end_frame.astype(np.int64)) & 1).astype(np.uint8)
    out = decoder.decode(np.concatenate([window.raw, tail]), cfg)
    if not out.converged:
        return False, out
    final = window.end_frame ^ decoder.residual(out.estimate)
    assert not np.any((rm.stab @ final.astype(np.int64)) & 1)
    return bool(code.stabilizer_space.contains(final)), out


def fixed_window_step(estimate: DecodeOutcome, decoder: WindowDecoder):
    """Correct every estimated fault in the first half; advance by r/2."""
    half = max(1, decoder.rounds // 2)
    nz = np.flatnonzero(estimate.estimate)
    chosen = nz[decoder.var_rounds[nz] < half]
    return chosen, half


def adaptive_window_step(estimate: DecodeOutcome, decoder: WindowDecoder, closure: str = "transitive"):
    """Choose corrections and the next window offset.

    Nontrivial estimated variables sharing a check form clusters.  Clusters
    touching the first half of the window are corrected in full
    (``closure="transitive"``) or only up to one check away from the first
    half (``closure="one-hop"``).  The next window starts at the earliest
    uncorrected estimated fault, or after r/2 rounds when there is none.
    Returns (prior-table indices to correct, offset).
    """
    half = max(1, decoder.rounds // 2)
    g = decoder.graph
    est_g = estimate.estimate[g.var_index]
    nz = np.flatnonzero(est_g)
    if len(nz) == 0:
        return np.zeros(0, dtype=np.int64), half
    rounds = decoder.var_rounds[g.var_index[nz]]
    # incidence between nontrivial variables and their checks
    local = np.full(g.n_vars, -1, dtype=np.int64)
    local[nz] = np.arange(len(nz))
    sel = local[g.edge_var] >= 0
    inc = sp.csr_matrix((np.ones(int(sel.sum())), (local[g.edge_var[sel]], g.edge_check[sel])),
                        shape=(len(nz), g.n_checks))
    adj = (inc @ inc.T).tocsr()
    early = rounds < half
    if closure == "transitive":
        _, label = connected_components(adj, directed=False)
        keep = np.isin(label, label[early])
    elif closure == "one-hop":
        keep = early | (adj[early].sum(axis=0).A1 > 0) if early.any() else early
    else:
        raise ValueError(f"unknown closure {closure!r}")
    chosen = g.var_index[nz[keep]]
    rest = rounds[~keep]
    offset = int(rest.min()) if len(rest) else half
    offset = min(max(offset, half), decoder.rounds - 1) if decoder.rounds > 1 else 1
    return chosen, offset


class _Trial:
    """State of one memory run; exposed for property tests via ``history``."""

    def __init__(self, code, eps, eps_b, rng, record=False):
        self.code = code
        self.rm = round_model(code)
        self.eps, self.eps_b, self.rng = eps, eps_b, rng
        self.deltas: dict[int, np.ndarray] = {}
        self.frame = np.zeros(2 * code.n, dtype=np.uint8)
        self.start = 0
        self.record = record
        self.history: dict[int, np.ndarray] = {}  # absolute round -> final delta
        self.sampled: dict[int, np.ndarray] = {}
        self.raw_log: dict[int, np.ndarray] = {}

    def window(self, r: int) -> WindowState:
        f = self.frame
        raw = []
        for t in range(self.start, self.start + r):
            if t not in self.deltas:
                d = self.rm.sample(self.eps, self.eps_b, self.rng)
                self.deltas[t] = d
                if self.record:
                    self.sampled[t] = d.copy()
            d = self.deltas[t].astype(np.int64)
            raw.append(self.rm.syndrome(d, f.astype(np.int64)))
            f = self.rm.advance(f.astype(np.int64), d)
        return WindowState(r, self.start, np.concatenate(raw), self.frame.copy(), f)

    def correct(self, bits: np.ndarray, r: int):
        bits = bits.reshape(r, self.rm.nbits)
        for t in range(r):
            if bits[t].any():
                self.deltas[self.start + t] ^= bits[t]

    def advance(self, offset: int):
        for t in range(self.start, self.start + offset):
            d = self.deltas.pop(t)
            if self.record:
                self.history[t] = d.copy()
                self.raw_log[t] = self.rm.syndrome(d.astype(np.int64), self.frame.astype(np.int64))
            self.frame = self.rm.advance(self.frame.astype(np.int64), d.astype(np.int64))
        self.start += offset


def run_lifetime(code: CodeSpec, eps: float, r: int, mode: str = "C16", policy: str = "adaptive",
                 eps_b: float | None = None, decoder: DecoderConfig = DecoderConfig(),
                 max_rounds: int = 10**6, seed: int = 0, closure: str = "transitive",
                 trial: _Trial | None = None) -> LifetimeResult:
    """Simulate one memory until the virtual decoder declares it dead."""
    if r < 2:
        raise ValueError("window size must be at least 2")
    if policy not in POLICIES:
        raise ValueError(f"unknown window policy {policy!r}")
    eps_b = eps if eps_b is None else eps_b
    prior_eps = eps if eps > 0 else 1e-3
    prior_eps_b = eps_b if eps_b > 0 else prior_eps
    actual = window_decoder(code, r, mode, prior_eps, prior_eps_b, tail=False)
    virtual = window_decoder(code, r, mode, prior_eps, prior_eps_b, tail=True)
    if trial is None:
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
        trial = _Trial(code, eps, eps_b, rng)
    alphas: Counter = Counter()
    offsets: Counter = Counter()
    iterations = []
    fails = 0
    windows = 0
    while True:
        if trial.start + r > max_rounds:
            return LifetimeResult(max_rounds, True, seed, None, windows, dict(alphas),
                                  float(np.mean(iterations)) if iterations else 0.0, dict(offsets), fails)
        win = trial.window(r)
        windows += 1
        alive, vout = virtual_decode(win, virtual, code, decoder)
        if not alive:
            cause = "logical" if vout.converged else "decoder-fail"
            return LifetimeResult(trial.start + r, False, seed, cause, windows, dict(alphas),
                                  float(np.mean(iterations)) if iterations else 0.0, dict(offsets), fails)
        out = actual.decode(win.raw, decoder)
        iterations.append(out.iterations)
        if out.converged:
            alphas[out.alpha] += 1
            if policy == "fixed":
                chosen, offset = fixed_window_step(out, actual)
            else:
                chosen, offset = adaptive_window_step(out, actual, closure)
            values = np.zeros_like(out.estimate)
            values[chosen] = out.estimate[chosen]
            trial.correct(actual.bits(values), r)
        else:
            fails += 1
            offset = max(1, r // 2)
        offsets[offset] += 1
        trial.advance(offset)


def run_trials(code: CodeSpec, eps: float, r: int, n_trials: int, seed: int = 0, **kw) -> list[LifetimeResult]:
    """Independent trials with per-trial streams spawned from one seed."""
    seeds = np.random.SeedSequence(seed).generate_state(n_trials, dtype=np.uint64)
    return [run_lifetime(code, eps, r, seed=int(s), **kw) for s in seeds]


def best_window_curve(results: dict[int, Sequence[float]]) -> list[float]:
    """Pointwise minimum over window sizes of logical error rate curves."""
    arr = np.array([list(v) for v in results.values()], dtype=float)
    return list(np.nanmin(arr, axis=0))
