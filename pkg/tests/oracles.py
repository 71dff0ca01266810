"""Brute-force reference computations shared by the module and acceptance tests."""
import itertools

import numpy as np

from ftbp.circuit import evaluate
from ftbp.pauli import to_symplectic


def single_faults(circuit):
    """Every vector with exactly one nontrivial location, all values."""
    kinds = circuit.kinds.astype(np.int64)
    out = []
    for loc in range(circuit.N):
        for v in range(1, 1 << int(kinds[loc])):
            e = np.zeros(circuit.N, dtype=np.int64)
            e[loc] = v
            out.append(e)
    return np.array(out)


def low_weight_table(circuit):
    """All fault vectors of weight <= 2 with syndrome, weight and residual class."""
    singles = single_faults(circuit)
    first = np.array([np.flatnonzero(e)[0] for e in singles])
    i, j = np.array(list(itertools.combinations(range(len(singles)), 2))).T
    keep = first[i] != first[j]
    pairs = singles[i[keep]] | singles[j[keep]]
    allv = np.vstack([np.zeros((1, circuit.N), dtype=np.int64), singles, pairs])
    ev = evaluate(circuit, allv)
    canon = circuit.code.stabilizer_space.reduce(to_symplectic(ev.residual))
    return allv, ev.syndrome, (allv != 0).sum(axis=1), canon


def min_weight_classes(table, s):
    """Residual classes of the minimum-weight solutions of syndrome s."""
    _, syn, weight, canon = table
    sel = np.all(syn == s, axis=1)
    if not sel.any():
        return None, set()
    w = weight[sel].min()
    return w, {canon[k].tobytes() for k in np.flatnonzero(sel & (weight == w))}


def residual_class(circuit, e):
    res = evaluate(circuit, np.asarray(e)[None]).residual
    return circuit.code.stabilizer_space.reduce(to_symplectic(res))[0].tobytes()


def pauli_errors(n, weight):
    """All Pauli strings of the given weight on n qubits."""
    for qs in itertools.combinations(range(n), weight):
        for ps in itertools.product((1, 2, 3), repeat=weight):
            e = np.zeros(n, dtype=np.int64)
            e[list(qs)] = ps
            yield e


# finite-size scaling benchmark: P = f(d^-nu (eps - tau)), cubic f in units of 1e-3
SYN_TAU, SYN_NU = 0.0075, 1.0
SYN_COEF = (0.05, 40.0, 1.0e4, 2.0e6)
SYN_DS = (6, 8, 10, 12)
SYN_EPS = tuple(np.linspace(0.005, 0.010, 8))


def synthetic_ansatz(noise=0.01, seed=2024, drift=0.0, ds=SYN_DS):
    """Rows (d, eps, rate, lo, hi); ``drift`` shifts the crossing of size d by drift / d^2."""
    rng = np.random.default_rng(seed)
    rows = []
    for d in ds:
        for eps in SYN_EPS:
            x = d ** (-SYN_NU) * (eps - SYN_TAU - drift / d ** 2)
            p = np.polynomial.polynomial.polyval(x, SYN_COEF) * (1 + noise * rng.standard_normal())
            half = 1.96 * max(noise, 1e-3) * p
            rows.append((d, float(eps), float(p), float(p - half), float(p + half)))
    return rows
