import numpy as np
import pytest

from ftbp.check_matrix import build_check_matrix, sparsify, to_tanner
from ftbp.circuit import build_circuit, evaluate, sample_values
from ftbp.codes import build_code
from ftbp.consolidation import (Recipe, are_degenerate, build_recipe, consolidate,
                                consolidated_tanner, initial_priors, location_distribution,
                                merge_same_type, merged_rate, pushforward, xor_convolve)
from ftbp.pauli import X, Y, Z, SymbolKind, pack_bits, to_symplectic


def pair(anc, data):
    return anc | (data << 2)


@pytest.fixture(scope="module")
def toy_sparse(toy3):
    h, _ = sparsify(build_check_matrix(toy3))
    return h


def test_are_degenerate_examples(toy3):
    c = toy3
    assert are_degenerate(c, c.vector({"C2,1^1": pair(0, X)}), c.vector({"D1^2": X}))
    assert are_degenerate(c, c.vector({"C1,1^1": pair(X, 0)}), c.vector({"m1^1": 1}))
    assert not are_degenerate(c, c.vector({"D1^1": X}), c.vector({"D1^2": X}))


def test_merged_rate_formulas():
    assert merged_rate(0.01, 0.01, 2) == pytest.approx(0.0198)
    assert merged_rate(0.02, 0.0, 4) == pytest.approx(0.02)
    # the closed forms agree with convolving the two distributions
    for size, kind in [(2, SymbolKind.BIT), (4, SymbolKind.PAULI1), (16, SymbolKind.PAULI2)]:
        p = location_distribution(kind, 0.03, 0.03)
        q = location_distribution(kind, 0.05, 0.05)
        assert 1 - xor_convolve(p, q)[0] == pytest.approx(merged_rate(0.03, 0.05, size))


def test_split_rates():
    p16 = location_distribution(SymbolKind.PAULI2, 0.15, 0.15)
    anc = pushforward(p16, [1, 2, 0, 0], 2)
    data = pushforward(p16, [0, 0, 1, 2], 2)
    assert 1 - anc[0] == pytest.approx(0.12)
    assert 1 - data[0] == pytest.approx(0.12)
    p4 = location_distribution(SymbolKind.PAULI1, 0.3, 0.3)
    assert pushforward(p4, [1, 0], 1)[1] == pytest.approx(0.2)
    assert pushforward(p16, [1, 0, 0, 0], 1)[1] == pytest.approx(8 * 0.15 / 15)


def test_recipe_split_replay(toy_sparse):
    h = toy_sparse
    j = h.labels.index("C1,1^1")
    n = h.N
    rec = Recipe(n, [("split", j, [(n, [0, 1]), (n + 1, [2, 3])])],
                 [k for k in range(n) if k != j] + [n, n + 1])
    table = rec.apply(initial_priors(h, 0.15))
    assert 1 - table.probs[-2][0] == pytest.approx(0.12)
    assert 1 - table.probs[-1][0] == pytest.approx(0.12)
    assert rec.trace(j, pair(X, Z)) == {n - 1: 1, n: 2}


@pytest.mark.parametrize("mode", ["C16", "C4"])
def test_example_consolidations(toy3, toy_sparse, mode):
    rec = build_recipe(toy_sparse, mode)

    def t(label, v):
        return rec.trace(toy3.find(label), v)

    for w in (X, Y, Z):
        target = t("D1^2", w)
        assert len(target) == 1
        for label in ("C2,1^1", "C1,2^1"):
            assert t(label, pair(0, w)) == target
        assert t("D2^2", w) == target
    green = t("m1^1", 1)
    assert t("C1,1^1", pair(X, 0)) == green == t("C1,2^1", pair(X, 0))
    blue = t("D1^2", Z)
    assert t("C1,1^1", pair(Z, 0)) == blue
    for label in ("C1,2^1", "C2,1^1", "C2,2^1", "C1,1^2"):
        assert t(label, pair(0, Z)) == blue
    assert t("C1,2^1", pair(Z, 0)) == {}


def test_merge_same_type_idles(toy_sparse):
    # the two idles of a round have equal columns and are merged into one
    table = merge_same_type(toy_sparse, initial_priors(toy_sparse, 0.01))
    d1, d2 = toy_sparse.labels.index("D1^1"), toy_sparse.labels.index("D2^1")
    assert d1 in table.locations and d2 not in table.locations
    j = list(table.locations).index(d1)
    assert 1 - table.probs[j][0] == pytest.approx(merged_rate(0.01, 0.01, 4))


def _replay_check(circuit, h, mode, order="ascending"):
    rec = build_recipe(h, mode, order)
    table = rec.apply(initial_priors(h, 0.01))
    kinds = circuit.kinds
    faults, images = [], []
    for loc in range(h.N):
        for v in range(1, 1 << int(kinds[loc])):
            values = np.zeros(len(table), dtype=np.int64)
            for j, val in rec.trace(loc, v).items():
                values[j] = val
            images.append(pack_bits(kinds, table.to_bits(values, circuit.nbits)))
            e = np.zeros(circuit.N, dtype=np.int64)
            e[loc] = v
            faults.append(e)
    a, b = evaluate(circuit, np.array(faults)), evaluate(circuit, np.array(images))
    assert np.array_equal(a.syndrome, b.syndrome)
    diff = to_symplectic(a.residual) ^ to_symplectic(b.residual)
    assert not circuit.code.stabilizer_space.reduce(diff).any()


@pytest.mark.parametrize("mode,order", [("C16", "ascending"), ("C4", "ascending"),
                                        ("C16", "descending")])
def test_every_fault_maps_to_a_degenerate_image(toy3, toy_sparse, mode, order):
    _replay_check(toy3, toy_sparse, mode, order)


def test_replay_toric_small(toric4):
    c = build_circuit(toric4, 2, perfect_tail=True)
    h, _ = sparsify(build_check_matrix(c))
    _replay_check(c, h, "C16")


def test_solution_sets_preserved_on_toy(toy3, toy_sparse):
    # every achievable syndrome is reached by the consolidated variables, with
    # a residual that some unconsolidated solution also has
    table = consolidate(toy_sparse, initial_priors(toy_sparse, 0.01), "C16")
    kinds = toy3.kinds
    combos = np.zeros((1, toy3.nbits), dtype=np.uint8)
    for cols in table.cols:
        cols = np.asarray(cols)
        vals = np.arange(1 << len(cols))
        part = np.zeros((len(vals), toy3.nbits), dtype=np.uint8)
        for p, c in enumerate(cols):
            part[:, c] ^= ((vals >> p) & 1).astype(np.uint8)
        combos = (combos[:, None, :] ^ part[None, :, :]).reshape(-1, toy3.nbits)
    after = _classes(toy3, pack_bits(kinds, combos))
    before = _classes(toy3, sample_values(kinds, 0.3, 0.3, np.random.default_rng(0), size=4000))
    for s, residuals in before.items():
        assert s in after
        assert after[s] & residuals


def _classes(circuit, values):
    ev = evaluate(circuit, values)
    canon = circuit.code.stabilizer_space.reduce(to_symplectic(ev.residual))
    out = {}
    for syn, res in zip(ev.syndrome, canon):
        out.setdefault(syn.tobytes(), set()).add(res.tobytes())
    return out


@pytest.mark.parametrize("mode", ["C16", "C4"])
def test_first_order_mass_bookkeeping(toy_sparse, mode):
    # each absorb adds the source's error mass to the representative (to first order)
    eps = 1e-7
    rec = build_recipe(toy_sparse, mode)
    prior = initial_priors(toy_sparse, eps)

    def mass(k, vid):
        return Recipe(rec.n_locations, rec.ops[:k], [vid]).apply(prior).error_mass()[0]

    n_absorb = 0
    for k, op in enumerate(rec.ops):
        if op[0] != "absorb":
            continue
        _, src, dst, _ = op
        assert mass(k + 1, dst) == pytest.approx(mass(k, dst) + mass(k, src), rel=1e-5)
        n_absorb += 1
    assert n_absorb > 10


@pytest.mark.parametrize("family,d", [("toric", 4), ("color", 4), ("xzzx", 5)])
def test_fewer_four_cycles(family, d):
    c = build_circuit(build_code(family, d), 3, perfect_tail=True)
    h, _ = sparsify(build_check_matrix(c))
    table = consolidate(h, initial_priors(h, 1e-3), "C16")
    assert consolidated_tanner(h, table).count_4cycles() < to_tanner(h).count_4cycles()


def test_recipe_json_round_trip(toy_sparse):
    rec = build_recipe(toy_sparse, "C16")
    back = Recipe.from_json(rec.to_json())
    a = rec.apply(initial_priors(toy_sparse, 0.02))
    b = back.apply(initial_priors(toy_sparse, 0.02))
    assert all(np.allclose(p, q) for p, q in zip(a.probs, b.probs))


def test_unknown_mode(toy_sparse):
    with pytest.raises(ValueError):
        build_recipe(toy_sparse, "C8")
