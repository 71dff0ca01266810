import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ftbp.circuit import build_circuit, evaluate, sample_errors, sample_values
from ftbp.codes import build_code
from ftbp.pauli import X, SymbolKind


def test_toy_sizes(toy):
    c = build_circuit(toy, 3)
    assert (c.N, c.M) == (30, 6)
    assert c.locations[0].label() == "b1^1"
    assert c.locations[-1].label() == "m2^3"


def test_round_order(toric4):
    c = build_circuit(toric4, 1)
    kinds = [loc.kind for loc in c.locations]
    # preparations, then gates, then idles, then measurements
    assert kinds == sorted(kinds, key="bCDm".index)


def test_toric_location_count(toric4):
    n, m, w = 16, 16, 4
    assert build_circuit(toric4, 4).N == 4 * (n + m * w + 2 * m) == 448


def test_trivial_vector(toric4):
    c = build_circuit(toric4, 2)
    ev = evaluate(c, c.zero_vector())
    assert not ev.syndrome.any() and not ev.residual.any()


def test_measurement_fault(toy):
    c = build_circuit(toy, 3)
    ev = evaluate(c, c.vector({"m1^1": 1}))
    assert ev.syndrome.tolist() == [1, 0, 0, 0, 0, 0]
    assert not ev.residual.any()


def test_data_fault_persists(toy):
    c = build_circuit(toy, 3)
    ev = evaluate(c, c.vector({"D1^1": X}))
    # the ZZ check sees the X error in every round from its own onward
    assert ev.syndrome.tolist() == [1, 0, 1, 0, 1, 0]
    assert ev.residual.tolist() == [X, 0]


def test_kind_mismatch(toy):
    c = build_circuit(toy, 2)
    with pytest.raises(ValueError):
        evaluate(c, np.zeros(c.N + 1, dtype=np.int64))


def test_zero_noise_is_trivial(toric4, rng):
    c = build_circuit(toric4, 2)
    assert not sample_errors(c, 0.0, 0.0, rng).values.any()


def test_rate_bounds():
    with pytest.raises(ValueError):
        sample_values([1], 0.75, 0.0, np.random.default_rng(0))
    with pytest.raises(ValueError):
        sample_values([0], 0.1, 0.5, np.random.default_rng(0))


def _within(count, n, p, k=3.0):
    return abs(count / n - p) <= k * np.sqrt(p * (1 - p) / n)


def test_single_qubit_statistics(rng):
    n = 100_000
    v = sample_values([SymbolKind.PAULI1], 0.6, 0.0, rng, size=n)[:, 0]
    assert _within((v == X).sum(), n, 0.2)


def test_two_qubit_statistics(rng):
    n = 100_000
    v = sample_values([SymbolKind.PAULI2], 0.15, 0.0, rng, size=n)[:, 0]
    assert _within((v != 0).sum(), n, 0.15)
    # all 15 non-identity pairs are equally likely
    counts = np.bincount(v[v != 0], minlength=16)[1:]
    assert counts.min() > 0.8 * counts.mean()


def test_bit_statistics(rng):
    n = 100_000
    v = sample_values([SymbolKind.BIT], 0.0, 0.1, rng, size=n)[:, 0]
    assert _within(v.sum(), n, 0.1)


CIRCUITS = [("toy", 1, 3), ("toric", 4, 2), ("color", 4, 2), ("xzzx", 5, 2)]


@pytest.mark.parametrize("family,d,r", CIRCUITS)
def test_oracle_linearity(family, d, r):
    c = build_circuit(build_code(family, d), r)
    rng = np.random.default_rng(d * 10 + r)
    a = sample_values(c.kinds, 0.05, 0.05, rng, size=200)
    b = sample_values(c.kinds, 0.05, 0.05, rng, size=200)
    ea, eb = evaluate(c, a), evaluate(c, b)
    prod = (a ^ b)  # phaseless product of packed Pauli codes and bits
    eab = evaluate(c, prod)
    assert np.array_equal(eab.syndrome, ea.syndrome ^ eb.syndrome)
    assert np.array_equal(eab.residual, ea.residual ^ eb.residual)


@settings(max_examples=40)
@given(st.integers(0, 2**32 - 1))
def test_residual_composition_distinct_locations(seed):
    c = build_circuit(build_code("toric", 4), 2)
    rng = np.random.default_rng(seed)
    a = sample_values(c.kinds, 0.1, 0.1, rng)
    b = sample_values(c.kinds, 0.1, 0.1, rng)
    b[a != 0] = 0
    ea, eb, eab = evaluate(c, a), evaluate(c, b), evaluate(c, a + b)
    assert np.array_equal(eab.residual, ea.residual ^ eb.residual)


@pytest.mark.parametrize("family,d", [("toy", 1), ("toric", 4), ("xzzx", 5)])
def test_tail_matches_residual(family, d):
    code = build_code(family, d)
    c = build_circuit(code, 3, perfect_tail=True)
    rng = np.random.default_rng(7)
    vals = sample_values(c.kinds, 0.02, 0.02, rng, size=100)
    ev = evaluate(c, vals)
    tail = ev.syndrome[:, -code.m:]
    expect = np.array([code.syndrome(res) for res in ev.residual])
    assert np.array_equal(tail, expect)


def test_initial_frame_shows_in_first_round(toy):
    c = build_circuit(toy, 2)
    ev = evaluate(c, c.zero_vector().values, initial_frame=[X, 0])
    assert ev.syndrome.tolist() == [1, 0, 1, 0]
    assert ev.residual.tolist() == [X, 0]
