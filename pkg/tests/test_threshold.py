import csv
import json
import math
from pathlib import Path

import numpy as np
import pytest
from sklearn.base import clone

from ftbp.threshold import (FitError, aggregate, error_floor_curve,
                            fit_arrays, fit_scaling_ansatz, loglog_slope, pointwise_min,
                            curves_from_records, read_records, wilson_interval, RateCurve, RatePoint,
                            ScalingAnsatz)

from oracles import SYN_TAU, synthetic_ansatz

DATA = Path(__file__).parent / "data"


def _curves(rows):
    by = {}
    for d, eps, p, lo, hi in rows:
        by.setdefault(d, []).append(RatePoint(eps, p, 1000, lo, hi))
    return [RateCurve("toric", d, pts) for d, pts in sorted(by.items())]


def _frozen_rows():
    with open(DATA / "synthetic_ansatz.csv", encoding="utf-8") as fh:
        return [(int(r["d"]), float(r["eps"]), float(r["rate"]), float(r["lo"]), float(r["hi"]))
                for r in csv.DictReader(fh)]


def test_frozen_fixture_matches_generator():
    assert _frozen_rows() == synthetic_ansatz()


def test_aggregate_constant_lifetimes():
    p = aggregate([{"rounds": 100, "censored": False}] * 20)
    assert p.rate == pytest.approx(0.01)
    assert p.lo <= p.rate <= p.hi


def test_aggregate_all_censored():
    p = aggregate([{"rounds": 500, "censored": True}] * 5)
    assert p.upper_only and p.rate == 0 and p.hi == pytest.approx(1 / 500)


def test_aggregate_geometric():
    rng = np.random.default_rng(1)
    rounds = rng.geometric(1e-3, size=10_000)
    p = aggregate([{"rounds": int(k), "censored": False} for k in rounds])
    assert p.lo <= 1e-3 <= p.hi
    boot = aggregate([{"rounds": int(k), "censored": False} for k in rounds[:2000]], bootstrap=200)
    assert boot.lo <= boot.rate <= boot.hi


def test_aggregate_censored_exposure():
    p = aggregate([{"rounds": 100, "censored": False}, {"rounds": 300, "censored": True}])
    assert p.rate == pytest.approx(1 / 400) and p.deaths == 1


def test_wilson_interval_brackets():
    lo, hi = wilson_interval(5, 1000)
    assert lo < 0.005 < hi
    assert wilson_interval(0, 0) == (0.0, 1.0)


@pytest.mark.parametrize("d,exponent", [(4, 2), (5, 3), (12, 6)])
def test_error_floor_exponent(d, exponent):
    assert error_floor_curve(d, 1.0).exponent == exponent


def test_error_floor_value():
    assert error_floor_curve(4, 1.0)(0.1) == pytest.approx(0.01)
    with pytest.raises(ValueError):
        error_floor_curve(4, 0.0)


def test_loglog_slope_exact():
    eps = np.array([1e-3, 2e-3, 3e-3])
    rates = 7.0 * eps ** 2
    slope, err = loglog_slope(eps, rates, sigma=0.01 * rates)
    assert slope == pytest.approx(2.0)
    # a 1% relative error per point over a factor-3 span gives about 0.01 on the slope
    assert 0.005 < err < 0.02


def test_fit_recovers_threshold():
    fit = fit_scaling_ansatz(_curves(_frozen_rows()))
    assert abs(fit.tau - SYN_TAU) / SYN_TAU < 0.05
    assert fit.nu > 0 and fit.residual <= fit.grid_min + 1e-15


def test_fit_rescaling_invariance():
    rows = _frozen_rows()
    a = fit_scaling_ansatz(_curves(rows))
    b = fit_scaling_ansatz(_curves([(d, e, 3 * p, 3 * lo, 3 * hi) for d, e, p, lo, hi in rows]))
    assert b.tau == pytest.approx(a.tau, rel=1e-3) and b.nu == pytest.approx(a.nu, rel=1e-2)
    assert b.coef[0] == pytest.approx(3 * a.coef[0], rel=1e-3)


def test_excluding_smallest_distance_moves_toward_large_d_limit():
    # crossings drift upward for small d; dropping d=6 brings tau closer to the limit
    curves = _curves(synthetic_ansatz(noise=0.0, drift=0.02))
    full = fit_scaling_ansatz(curves)
    cut = fit_scaling_ansatz(curves, exclude_d=[6])
    assert SYN_TAU < cut.tau < full.tau
    assert cut.excluded == (6,)


def test_single_distance_rejected():
    rows = [r for r in _frozen_rows() if r[0] == 8]
    with pytest.raises(ValueError):
        fit_scaling_ansatz(_curves(rows))


def test_degenerate_design():
    with pytest.raises(FitError):
        fit_arrays([0.01, 0.01, 0.01, 0.01], [4, 4, 6, 6], [0.1, 0.1, 0.2, 0.2])


def test_unweighted_fit():
    fit = fit_scaling_ansatz(_curves(_frozen_rows()), weighting="none")
    assert abs(fit.tau - SYN_TAU) / SYN_TAU < 0.05
    with pytest.raises(ValueError):
        fit_scaling_ansatz(_curves(_frozen_rows()), weighting="bogus")


def test_scaling_estimator():
    rows = _frozen_rows()
    X = np.array([[e, d] for d, e, *_ in rows])
    y = np.array([r[2] for r in rows])
    est = ScalingAnsatz(exclude_d=(6,))
    assert clone(est).get_params() == est.get_params()
    est.fit(X, y)
    assert abs(est.tau_ - SYN_TAU) / SYN_TAU < 0.05
    assert est.score(X[X[:, 1] != 6], y[X[:, 1] != 6]) > 0.9


def test_records_round_trip(tmp_path):
    path = tmp_path / "runs.jsonl"
    recs = [{"type": "trial", "family": "toric", "d": 4, "eps": 1e-3, "r": 4, "mode": "C16",
             "policy": "adaptive", "rounds": 50 + i, "censored": False} for i in range(4)]
    path.write_text('{"type": "header"}\n' + "".join(json.dumps(r) + "\n" for r in recs) + '{"type": "tri',
                    encoding="utf-8")
    headers, trials = read_records(path)
    assert len(headers) == 1 and len(trials) == 4
    curves = curves_from_records(trials)
    (key, curve), = curves.items()
    assert key == ("toric", 4, 4, "C16", "adaptive")
    assert curve.points[0].rate == pytest.approx(4 / sum(50 + i for i in range(4)))


def test_pointwise_min():
    a = RateCurve("toric", 4, [RatePoint(1e-3, 0.02, 10, 0.01, 0.03), RatePoint(2e-3, 0.05, 10, 0.04, 0.06)])
    b = RateCurve("toric", 4, [RatePoint(1e-3, 0.03, 10, 0.02, 0.04), RatePoint(2e-3, 0.04, 10, 0.03, 0.05)])
    assert pointwise_min([a, b]).rates.tolist() == [0.02, 0.04]


def test_rate_point_invariants():
    with pytest.raises(ValueError):
        RatePoint(1e-3, 1.5, 1, 0, 2)
    with pytest.raises(ValueError):
        RatePoint(1e-3, 0.1, 1, 0.2, 0.3)
    assert not math.isnan(RatePoint(1e-3, 0.1, 1, 0.05, 0.15).sigma)
