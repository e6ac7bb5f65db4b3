import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from medsense.detector import (
    DetectionCurve,
    DetectorConfig,
    decide,
    default_pfa_grid,
    p_d,
    p_fa,
    roc,
    sample_covariance,
    test_statistic as ts_of,
    threshold_for_pfa,
)
from medsense.montecarlo import SimulationPlan, empirical_rates, simulate_ts
from medsense.system import build_model


def test_statistic_rank_one():
    assert abs(ts_of(np.array([[1.0, 0.0]])) - 1.0) < 1e-15


def test_statistic_zero_samples():
    assert ts_of(np.zeros((10, 8), dtype=complex)) == 0.0


def test_statistic_matches_independent_solver(rng):
    Y = rng.standard_normal((10, 8)) + 1j * rng.standard_normal((10, 8))
    R = sum(np.outer(y, y.conj()) for y in Y) / 10
    ref = np.max(np.abs(np.linalg.eigvals(R)))  # general (non-Hermitian) solver
    assert abs(ts_of(Y) - ref) < 1e-10


def test_statistic_batch(rng):
    Y = rng.standard_normal((5, 10, 3)) + 1j * rng.standard_normal((5, 10, 3))
    batch = ts_of(Y)
    assert batch.shape == (5,)
    np.testing.assert_allclose(batch, [ts_of(y) for y in Y], rtol=1e-14)


def test_sample_covariance_hermitian(rng):
    Y = rng.standard_normal((10, 4)) + 1j * rng.standard_normal((10, 4))
    C = sample_covariance(Y)
    np.testing.assert_allclose(C, C.conj().T, atol=1e-15)


def test_decide():
    Y = np.array([[2.0, 0.0]])
    assert decide(Y, 3.0)
    assert not decide(Y, 5.0)


def test_config_validation(R_w):
    with pytest.raises(ValueError):
        DetectorConfig(R_w, 0.5 * R_w, 10)
    with pytest.raises(ValueError):
        DetectorConfig(R_w, R_w, 7)


def test_pfa_limits(null_cfg):
    assert p_fa(0.0, null_cfg) == 1.0
    assert p_fa(1e3, null_cfg) < 1e-6


def test_pd_equals_pfa_without_signal(null_cfg):
    eta = np.linspace(0, 8, 30)
    np.testing.assert_array_equal(p_d(eta, null_cfg), p_fa(eta, null_cfg))


def test_pd_at_zero(system_n32):
    assert p_d(0.0, system_n32.detector(10)) == 1.0


def test_pd_with_ris_beats_no_ris(geom):
    ris = build_model(geom, rho=0.2, upsilon_db=-10.0, ris_mode="optimal").detector(10)
    bare = build_model(geom, rho=0.2, upsilon_db=-10.0, ris_mode="absent").detector(10)
    eta = threshold_for_pfa(0.1, bare)
    assert p_d(eta, ris) > p_d(eta, bare)


@pytest.mark.parametrize("target", [0.01, 0.05, 0.1, 0.5, 0.9])
def test_threshold_round_trip(null_cfg, target):
    assert abs(p_fa(threshold_for_pfa(target, null_cfg), null_cfg) - target) <= 1e-9


@settings(max_examples=40, deadline=None)
@given(target=st.floats(1e-4, 0.999))
def test_threshold_round_trip_property(null_cfg, target):
    assert abs(p_fa(threshold_for_pfa(target, null_cfg), null_cfg) - target) <= 1e-9


def test_threshold_rejects(null_cfg):
    for bad in (0.0, 1.0, -0.1):
        with pytest.raises(ValueError):
            threshold_for_pfa(bad, null_cfg)


@settings(max_examples=25, deadline=None)
@given(eta=st.lists(st.floats(0, 20), min_size=2, max_size=20, unique=True))
def test_pd_dominates_pfa(system_n32, eta):
    cfg = system_n32.detector(10)
    eta = np.sort(eta)
    assert np.all(p_d(eta, cfg) >= p_fa(eta, cfg) - 1e-10)


def test_roc_is_monotone(system_n32):
    curve = roc(system_n32.detector(10), default_pfa_grid(30))
    assert isinstance(curve, DetectionCurve)
    assert len(curve) == 30
    assert np.all(np.diff(curve.eta) > 0)
    assert np.all(np.diff(curve.p_d) <= 1e-10)
    assert np.all(curve.p_d >= curve.p_fa - 1e-10)


def test_roc_rejects_bad_grid(null_cfg):
    with pytest.raises(ValueError):
        roc(null_cfg, [0.5, 0.1])
    with pytest.raises(ValueError):
        DetectionCurve(eta=[1.0, 0.5], p_fa=[0.1, 0.2], p_d=[0.2, 0.3])


def test_default_pfa_grid():
    g = default_pfa_grid()
    assert g.size == 50
    assert abs(g[0] - 1e-3) < 1e-15 and abs(g[-1] - 0.99) < 1e-12


@pytest.mark.slow
def test_pfa_against_simulation(system_n32, null_cfg):
    ts = simulate_ts("H0", system_n32, SimulationPlan(100_000, 10, seed=3))
    eta = np.linspace(threshold_for_pfa(0.95, null_cfg), threshold_for_pfa(0.02, null_cfg), 20)
    freq, se = empirical_rates(ts, eta)
    analytic = p_fa(eta, null_cfg)
    assert np.all(np.abs(freq - analytic) <= 3 * se)
