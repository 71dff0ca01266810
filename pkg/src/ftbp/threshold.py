"""Lifetime statistics, error-floor reference curves and threshold fitting."""
from __future__ import annotations

import csv
import json
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import minimize
from sklearn.base import BaseEstimator, RegressorMixin


class FitError(RuntimeError):
    pass


@dataclass
class RatePoint:
    eps: float
    rate: float  # logical error rate per round
    trials: int
    lo: float
    hi: float
    deaths: int = 0
    exposure: float = 0.0  # total rounds observed
    upper_only: bool = False  # every trial censored: ``hi`` is an upper bound

    def __post_init__(self):
        if not 0.0 <= self.rate <= 1.0:
            raise ValueError("rate must lie in [0, 1]")
        if not (self.lo <= self.rate <= self.hi or self.upper_only):
            raise ValueError("interval must bracket the estimate")

    @property
    def sigma(self) -> float:
        """Gaussian-equivalent standard error from the interval width."""
        return (self.hi - self.lo) / (2 * 1.959963984540054)


@dataclass
class RateCurve:
    family: str
    d: int
    points: list = field(default_factory=list)

    @property
    def eps(self) -> np.ndarray:
        return np.array([p.eps for p in self.points])

    @property
    def rates(self) -> np.ndarray:
        return np.array([p.rate for p in self.points])

    def sorted(self) -> "RateCurve":
        return RateCurve(self.family, self.d, sorted(self.points, key=lambda p: p.eps))


def wilson_interval(k: float, n: float, z: float = 1.959963984540054) -> tuple[float, float]:
    if n <= 0:
        return 0.0, 1.0
    p = k / n
    den = 1 + z * z / n
    mid = (p + z * z / (2 * n)) / den
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / den
    return max(0.0, mid - half), min(1.0, mid + half)


def _rounds_and_flags(trials):
    rounds, censored = [], []
    for t in trials:
        if isinstance(t, dict):
            rounds.append(t["rounds"])
            censored.append(bool(t["censored"]))
        else:
            rounds.append(t.rounds)
            censored.append(bool(t.censored))
    return np.asarray(rounds, dtype=float), np.asarray(censored, dtype=bool)


def aggregate(trials, eps: float = float("nan"), bootstrap: int = 0, seed: int = 0) -> RatePoint:
    """Per-round logical error rate of a batch of lifetime trials.

    Deaths divided by total observed rounds, which is 1/mean(lifetime) when
    nothing is censored; censored trials add exposure only.  The interval
    is a Wilson interval on the per-round death probability, or a percentile
    bootstrap over trials when ``bootstrap`` > 0.
    """
    rounds, censored = _rounds_and_flags(trials)
    if len(rounds) == 0:
        raise ValueError("no trials")
    deaths = int((~censored).sum())
    exposure = float(rounds.sum())
    if deaths == 0:
        bound = 1.0 / float(rounds.mean()) if rounds.mean() > 0 else 1.0
        return RatePoint(eps, 0.0, len(rounds), 0.0, bound, 0, exposure, upper_only=True)
    rate = deaths / exposure
    if bootstrap:
        rng = np.random.default_rng(seed)
        idx = rng.integers(0, len(rounds), size=(bootstrap, len(rounds)))
        d = (~censored[idx]).sum(axis=1)
        ex = rounds[idx].sum(axis=1)
        boot = d / ex
        lo, hi = np.quantile(boot, [0.025, 0.975])
        lo, hi = min(lo, rate), max(hi, rate)
    else:
        lo, hi = wilson_interval(deaths, exposure)
    return RatePoint(eps, rate, len(rounds), float(lo), float(hi), deaths, exposure)


class ErrorFloor:
    """Reference curve a * eps**(t + 1) with t = floor((d - 1) / 2)."""

    def __init__(self, d: int, a: float):
        if a <= 0:
            raise ValueError("prefactor must be positive")
        self.d = d
        self.a = a
        self.exponent = (d - 1) // 2 + 1

    def __call__(self, eps):
        return self.a * np.asarray(eps, dtype=float) ** self.exponent


def error_floor_curve(d: int, a: float) -> ErrorFloor:
    return ErrorFloor(d, a)


def loglog_slope(eps, rates, sigma=None) -> tuple[float, float]:
    """Weighted least-squares slope of log(rate) against log(eps) and its std error."""
    x = np.log(np.asarray(eps, dtype=float))
    y = np.log(np.asarray(rates, dtype=float))
    if sigma is None:
        w = np.ones_like(x)
    else:
        rel = np.asarray(sigma, dtype=float) / np.asarray(rates, dtype=float)
        w = 1.0 / np.maximum(rel, 1e-12) ** 2
    A = np.stack([x, np.ones_like(x)], axis=1)
    cov = np.linalg.inv(A.T @ (A * w[:, None]))
    coef = cov @ (A.T @ (w * y))
    return float(coef[0]), float(math.sqrt(cov[0, 0]))


# ---------------------------------------------------------------------------
# Finite-size scaling
# ---------------------------------------------------------------------------

@dataclass
class AnsatzFit:
    tau: float
    nu: float
    coef: np.ndarray  # cubic coefficients, lowest order first
    residual: float
    excluded: tuple = ()
    grid_min: float = math.inf  # smallest residual seen on the coarse grid

    def __post_init__(self):
        if self.nu <= 0:
            raise ValueError("critical exponent must be positive")

    def scaled(self, eps, d) -> np.ndarray:
        return np.asarray(d, dtype=float) ** (-self.nu) * (np.asarray(eps, dtype=float) - self.tau)

    def predict(self, eps, d) -> np.ndarray:
        return np.polynomial.polynomial.polyval(self.scaled(eps, d), self.coef)

    def report(self) -> dict:
        return {"tau": self.tau, "nu": self.nu, "coef": [float(c) for c in self.coef],
                "residual": self.residual, "excluded_d": list(self.excluded)}


def _inner(tau, nu, eps, d, y, w, degree=3):
    x = d ** (-nu) * (eps - tau)
    V = np.vander(x, degree + 1, increasing=True)
    sw = np.sqrt(w)
    A = V * sw[:, None]
    if np.linalg.matrix_rank(A) < degree + 1:
        return math.inf, None
    coef, *_ = np.linalg.lstsq(A, y * sw, rcond=None)
    r = y - V @ coef
    return float(np.sum(w * r * r)), coef


def _flatten(curves: Sequence[RateCurve], exclude_d, weighting):
    eps, d, y, w = [], [], [], []
    for c in curves:
        if c.d in exclude_d:
            continue
        for p in c.points:
            if p.upper_only:
                continue
            eps.append(p.eps)
            d.append(c.d)
            y.append(p.rate)
            if weighting == "ci":
                w.append(1.0 / max(p.sigma, 1e-300) ** 2)
            elif weighting == "none":
                w.append(1.0)
            else:
                raise ValueError(f"unknown weighting {weighting!r}")
    w = np.asarray(w, dtype=float)
    if len(w):
        w = w / w.max()
    return np.asarray(eps, float), np.asarray(d, float), np.asarray(y, float), w


def fit_scaling_ansatz(curves: Sequence[RateCurve], exclude_d: Iterable[int] = (), weighting: str = "ci",
                       n_tau: int = 41, n_nu: int = 60, nu_max: float = 3.0, refine: int = 5) -> AnsatzFit:
    """Fit P_L = f(d**-nu * (eps - tau)) with cubic f.

    A (tau, nu) grid over [min eps, max eps] x (0, nu_max] is scanned with the
    cubic solved by weighted linear least squares at each node; the best
    ``refine`` nodes seed Nelder-Mead searches and the overall minimum wins.
    """
    exclude_d = tuple(sorted(set(exclude_d)))
    eps, d, y, w = _flatten(curves, exclude_d, weighting)
    return fit_arrays(eps, d, y, w, n_tau, n_nu, nu_max, refine, exclude_d)


def fit_arrays(eps, d, y, w=None, n_tau: int = 41, n_nu: int = 60, nu_max: float = 3.0,
               refine: int = 5, excluded: tuple = ()) -> AnsatzFit:
    """Scaling fit on flat arrays; ``w`` are least-squares weights."""
    eps, d, y = (np.asarray(a, dtype=float) for a in (eps, d, y))
    w = np.ones_like(y) if w is None else np.asarray(w, dtype=float)
    if len(set(d.tolist())) < 2:
        raise ValueError("need curves for at least two distances")
    lo, hi = float(eps.min()), float(eps.max())
    taus = np.linspace(lo, hi, n_tau)
    nus = np.linspace(nu_max / n_nu, nu_max, n_nu)
    grid = np.full((n_tau, n_nu), math.inf)
    for i, t in enumerate(taus):
        for j, v in enumerate(nus):
            grid[i, j] = _inner(t, v, eps, d, y, w)[0]
    if not np.isfinite(grid).any():
        raise FitError("degenerate design: no grid point gives a full-rank cubic fit")
    grid_min = float(grid.min())

    def loss(z):
        t, v = z
        if not (lo <= t <= hi) or not (0 < v <= nu_max):
            return math.inf
        return _inner(t, v, eps, d, y, w)[0]

    i0, j0 = np.unravel_index(grid.argmin(), grid.shape)
    best = (grid_min, (float(taus[i0]), float(nus[j0])))
    for flat in np.argsort(grid, axis=None)[:refine]:
        i, j = np.unravel_index(flat, grid.shape)
        res = minimize(loss, x0=[taus[i], nus[j]], method="Nelder-Mead",
                       options={"xatol": 1e-9 * max(hi, 1e-12), "fatol": 1e-14, "maxiter": 2000})
        if np.isfinite(res.fun) and res.fun < best[0]:
            best = (float(res.fun), (float(res.x[0]), float(res.x[1])))
    tau, nu = best[1]
    residual, coef = _inner(tau, nu, eps, d, y, w)
    return AnsatzFit(float(tau), float(nu), coef, residual, tuple(excluded), grid_min)


class ScalingAnsatz(BaseEstimator, RegressorMixin):
    """Estimator form of the scaling fit; X columns are (eps, d), y is P_L."""

    def __init__(self, exclude_d=(), n_tau=41, n_nu=60, nu_max=3.0):
        self.exclude_d = exclude_d
        self.n_tau = n_tau
        self.n_nu = n_nu
        self.nu_max = nu_max

    def fit(self, X, y, sample_weight=None):
        """``sample_weight`` are least-squares weights, e.g. inverse variances."""
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        keep = ~np.isin(X[:, 1], np.asarray(self.exclude_d, dtype=float))
        w = None if sample_weight is None else np.asarray(sample_weight, dtype=float)[keep]
        self.fit_ = fit_arrays(X[keep, 0], X[keep, 1], y[keep], w, self.n_tau, self.n_nu, self.nu_max,
                               excluded=tuple(self.exclude_d))
        self.tau_ = self.fit_.tau
        self.nu_ = self.fit_.nu
        self.coef_ = self.fit_.coef
        return self

    def predict(self, X):
        X = np.asarray(X, dtype=float)
        return self.fit_.predict(X[:, 0], X[:, 1])


# ---------------------------------------------------------------------------
# Records and reports
# ---------------------------------------------------------------------------

def read_records(path) -> tuple[list[dict], list[dict]]:
    """Headers and trial records from a line-delimited campaign file.

    A truncated last line (interrupted writer) is ignored.
    """
    headers, trials = [], []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError:
                continue
            (headers if rec.get("type") == "header" else trials).append(rec)
    return headers, trials


CURVE_KEYS = ("family", "d", "r", "mode", "policy")


def curves_from_records(trials: Sequence[dict], bootstrap: int = 0) -> dict:
    """Group trial records into rate curves keyed by (family, d, r, mode, policy)."""
    groups = defaultdict(lambda: defaultdict(list))
    for t in trials:
        groups[tuple(t[k] for k in CURVE_KEYS)][float(t["eps"])].append(t)
    out = {}
    for key, by_eps in groups.items():
        pts = [aggregate(ts, eps, bootstrap=bootstrap) for eps, ts in sorted(by_eps.items())]
        out[key] = RateCurve(key[0], key[1], pts)
    return out


def pointwise_min(curves: Sequence[RateCurve]) -> RateCurve:
    """Best curve over window sizes: at each eps keep the lowest rate."""
    best: dict = {}
    for c in curves:
        for p in c.points:
            if p.eps not in best or (p.rate < best[p.eps].rate and not p.upper_only):
                best[p.eps] = p
    c0 = curves[0]
    return RateCurve(c0.family, c0.d, [best[e] for e in sorted(best)])


def write_curves_csv(curves: Iterable[RateCurve], path):
    fields = ["family", "d", "eps", "rate", "lo", "hi", "trials", "deaths", "exposure", "upper_only"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh)
        wr.writerow(fields)
        for c in curves:
            for p in c.points:
                wr.writerow([c.family, c.d, p.eps, p.rate, p.lo, p.hi, p.trials, p.deaths, p.exposure, p.upper_only])
