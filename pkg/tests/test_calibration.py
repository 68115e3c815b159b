import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dbg4eth.calibration import (
    METHODS,
    BranchCalibration,
    Calibrator,
    ConfidenceScaler,
    adaptive_weighting,
    apply_calibrator,
    bbq_bin_counts,
    compute_ece,
    confidence_generate,
    ece_weights,
    fit_calibrator,
)
from dbg4eth.errors import CannotFitError, EmptyInputError, ValidationError


def _calibrated_set(n=2000, seed=0):
    rng = np.random.default_rng(seed)
    p = rng.uniform(0.02, 0.98, n)
    return p, (rng.random(n) < p).astype(float)


def test_confidence_generate():
    out = confidence_generate([2.0, 3.0], (2.0, 1.0), "gsg")
    assert out[0].value == 0.5
    assert out[1].value == pytest.approx(0.7311, abs=1e-4)
    assert all(c.value == 0.5 for c in confidence_generate([4.0, 4.0], (4.0, 0.0), "ldg"))
    with pytest.raises(CannotFitError):
        ConfidenceScaler().fit([])


def test_ece_examples():
    assert compute_ece([1.0] * 4, [1] * 4) == 0.0
    assert compute_ece([0.8] * 10, [1] * 6 + [0] * 4) == pytest.approx(0.2)
    assert compute_ece([0.05] * 5 + [0.95] * 5, [0] * 5 + [1] * 5) == pytest.approx(0.05)
    with pytest.raises(EmptyInputError):
        compute_ece([], [])


def test_temperature_identity_and_limit():
    p = np.array([0.1, 0.4, 0.93])
    assert np.allclose(Calibrator("temperature", {"T": 1.0}).apply(p), p)
    assert np.allclose(Calibrator("temperature", {"T": 1e12}).apply(p), 0.5)


def test_temperature_near_one_on_calibrated_data():
    p, y = _calibrated_set()
    assert 0.9 <= fit_calibrator("temperature", p, y).params["T"] <= 1.1


def test_histogram_lookup():
    cal = Calibrator("histogram", {"edges": [0.5], "values": [0.2, 0.9], "lo": 0.0, "hi": 1.0})
    assert apply_calibrator(cal, 0.7) == 0.9
    assert apply_calibrator(cal, 0.3) == 0.2


def test_histogram_all_positive_bin():
    p = np.linspace(0.01, 0.99, 20)
    y = (p > 0.5).astype(float)
    cal = fit_calibrator("histogram", p, y)
    assert cal.apply(0.99) == 1.0 and cal.apply(0.01) == 0.0


def test_isotonic_identity_when_monotone():
    p = np.linspace(0.05, 0.95, 10)
    y = np.array([0, 0, 0, 0, 0, 1, 1, 1, 1, 1], dtype=float)
    cal = fit_calibrator("isotonic", p, y)
    assert np.array_equal(cal.apply(p), y)


def test_fit_errors():
    with pytest.raises(CannotFitError):
        fit_calibrator("platt", np.linspace(0, 1, 20), np.ones(20))
    with pytest.raises(CannotFitError):
        fit_calibrator("platt", [np.nan] + [0.5] * 19, [0, 1] * 10)
    with pytest.raises(ValidationError):
        fit_calibrator("nope", np.linspace(0, 1, 20), [0, 1] * 10)


def test_bbq_bin_counts():
    assert list(bbq_bin_counts(1000)) == list(range(5, 21))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_outputs_in_unit_interval_and_monotone(seed):
    rng = np.random.default_rng(seed)
    p = rng.uniform(0, 1, 60)
    y = (rng.random(60) < p).astype(float)
    y[:2] = [0, 1]
    grid = np.linspace(0.0, 1.0, 101)[1:-1]
    for m in METHODS:
        out = fit_calibrator(m, p, y).apply(grid)
        assert np.all((out >= 0) & (out <= 1))
        if m in ("temperature", "platt", "beta", "isotonic"):
            assert np.all(np.diff(out) >= -1e-12), m


def test_adaptive_weighting_examples():
    a, P = adaptive_weighting([1] * 6, np.full((6, 1), 0.3))
    assert np.allclose(a, 1 / 6)
    assert ece_weights([-0.01, 0.03]) == pytest.approx([-0.5, 1.5])
    C = np.array([[0.9], [0.7], [0.1], [0.2], [0.3], [0.4]])
    a, P = adaptive_weighting([0.5, 0.5, 0, 0, 0, 0], C)
    assert P[0] == pytest.approx(0.8)
    with pytest.raises(ValidationError):
        adaptive_weighting([1, 1], np.zeros((2, 1)))


def test_adaptive_weighting_zero_sum_falls_back_to_uniform():
    assert np.allclose(ece_weights([0.1, -0.1, 0, 0, 0, 0]), 1 / 6)


def test_branch_round_trip():
    rng = np.random.default_rng(1)
    p = rng.uniform(0, 1, 300)
    y = (rng.random(300) < p**2).astype(float)
    bc = BranchCalibration("gsg").fit(p, y)
    back = BranchCalibration.from_dict(bc.to_dict())
    assert np.array_equal(back.transform(p), bc.transform(p))
    rows = bc.report_rows()
    assert [r["method"] for r in rows] == list(METHODS)
    assert math.isclose(sum(r["weight"] for r in rows), 1.0, abs_tol=1e-9)
