import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy import stats

from tmx.datagen import DatasetConfig, gen_transmission, make_dataset, make_validation
from tmx.metrics import (
    SingularMatrixError,
    UndefinedCorrelationError,
    correlation,
    diagonal_dominance,
    extract_noise,
    extract_T,
    matrix_inverse,
    metrics_report,
    pseudo_unity,
    q_error,
    row_correlations,
    stochasticity,
    validate,
)
from tmx.model import CouplingMatrix, DegenerateModelError, DimensionError, assemble_M

finite = st.floats(-10, 10, allow_nan=False)


def test_q_error_values():
    t = np.eye(2)
    assert q_error(t, t) == 0.0
    assert q_error(t, np.zeros((2, 2))) == pytest.approx(1.0)
    assert q_error(t, 2 * t) == pytest.approx(1.0)
    with pytest.raises(DimensionError):
        q_error(t, np.eye(3))


def test_q_error_is_asymmetric():
    a, b = np.eye(2), 3 * np.eye(2)
    assert q_error(a, b) != q_error(b, a)


@settings(max_examples=50)
@given(arrays(float, 12, elements=finite), arrays(float, 12, elements=finite))
def test_correlation_matches_scipy(x, y):
    if np.ptp(x) < 1e-3 or np.ptp(y) < 1e-3:
        return
    assert correlation(x, y) == pytest.approx(stats.pearsonr(x, y)[0], abs=1e-9)


def test_correlation_constant_vector():
    with pytest.raises(UndefinedCorrelationError):
        correlation([1, 1, 1], [1, 2, 3])


def test_row_correlations_agree_with_scalar_version(rng):
    x, y = rng.normal(size=(5, 7)), rng.normal(size=(5, 7))
    np.testing.assert_allclose(row_correlations(x, y), [correlation(a, b) for a, b in zip(x, y)],
                               atol=1e-12)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_extract_round_trip(seed):
    rng = np.random.default_rng(seed)
    t = rng.uniform(0, 1, (4, 4))
    beta = rng.uniform(1, 100, 4)
    m = assemble_M(t, beta)
    np.testing.assert_allclose(extract_T(m), t, rtol=1e-13)
    b, sig, theta = extract_noise(m)
    np.testing.assert_allclose(sig, 1 / np.sqrt(2 * beta), rtol=1e-14)
    assert theta == pytest.approx(2 / 8 * np.sum(1 / beta), rel=1e-14)


def test_theta_is_mean_variance_over_all_channels():
    # 2/N * sum(1/beta) = (1/h) sum 2 sigma^2 with h=N/2 outputs
    m = assemble_M(np.eye(4), 1 / (2 * 0.05**2))
    assert extract_noise(m)[2] == pytest.approx(2 * 0.05**2)


def test_degenerate_beta_rejected():
    e = assemble_M(np.eye(2), 1.0).entries.copy()
    e[3, 3] = 0.0
    with pytest.raises(DegenerateModelError):
        extract_T(CouplingMatrix(e))
    with pytest.raises(DegenerateModelError):
        extract_noise(CouplingMatrix(e))


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10**6), n=st.integers(1, 12))
def test_inverse_matches_lapack(seed, n):
    a = np.random.default_rng(seed).normal(size=(n, n)) + n * np.eye(n)
    inv, res = matrix_inverse(a)
    np.testing.assert_allclose(inv, np.linalg.inv(a), rtol=1e-9, atol=1e-12)
    assert res < 1e-10


def test_inverse_needs_pivoting():
    a = np.array([[0.0, 1.0], [1.0, 0.0]])
    np.testing.assert_array_equal(matrix_inverse(a)[0], a)


def test_singular_inverse():
    with pytest.raises(SingularMatrixError):
        matrix_inverse([[1.0, 2.0], [2.0, 4.0]])
    with pytest.raises(SingularMatrixError):
        matrix_inverse(np.zeros((2, 2)))
    with pytest.raises(DimensionError):
        matrix_inverse(np.ones((2, 3)))


def test_pseudo_unity_of_exact_inverse(rng):
    a = rng.uniform(0, 1, (5, 5)) + np.eye(5)
    pu = pseudo_unity(np.linalg.inv(a), a)
    assert pu.n_diagonal == 5 and pu.n_offdiagonal == 20
    np.testing.assert_allclose(pu.sorted_ab[:5], 1, atol=1e-12)
    np.testing.assert_allclose(pu.sorted_ab[5:], 0, atol=1e-12)
    assert pu.dominance_ab > 1e10
    assert np.all(np.diff(pu.sorted_ab) <= 0)


def test_diagonal_dominance_example():
    p = np.array([[2.0, -1.0], [1.0, 4.0]])
    assert diagonal_dominance(p) == pytest.approx(3.0)
    assert math.isinf(diagonal_dominance(np.eye(1)))


def test_stochasticity():
    t = gen_transmission(3, 0.3, 0).T
    mean, std = stochasticity(t)
    assert mean == pytest.approx(1.0) and std < 1e-12


def test_validate_with_true_channel():
    cfg = DatasetConfig(w=3, s=0.3, m_samples=200, seed=1)
    t, ds = make_dataset(cfg)
    val = make_validation(t, cfg, seed=50, m_samples=300)
    tinv = np.linalg.inv(t.T) if abs(np.linalg.det(t.T)) > 1e-12 else None
    curves = validate(t.T, tinv, t.T, val, ds.channel_means)
    assert curves.focus_direct.mean == pytest.approx(1.0, abs=1e-12)
    assert curves.focus_true.mean == pytest.approx(1.0, abs=1e-12)
    d = curves.to_dict()
    assert set(d) >= {"focus_direct", "image_inverse", "image_inverted_direct"}


def test_validate_reports_singular_inverse_as_missing():
    cfg = DatasetConfig(w=2, s=0.5, m_samples=50, seed=0)
    t, ds = make_dataset(cfg)
    singular = np.ones((4, 4)) / 4
    curves = validate(singular, singular, None, make_validation(t, cfg, 9, 40), ds.channel_means)
    assert curves.image_inverted_direct.mean is None
    assert curves.focus_inverted_inverse.mean is None
    assert curves.focus_true is None


def test_metrics_report():
    t = gen_transmission(2, 0.5, 0).T
    m = assemble_M(t, 200.0)
    rep = metrics_report(m, t, np.linalg.pinv(t))
    assert rep.q_error == pytest.approx(0, abs=1e-7)
    assert rep.t_correlation == pytest.approx(1.0)
    np.testing.assert_allclose(rep.row_sums, 1.0)
    assert rep.theta == pytest.approx(2 / 8 * 4 / 200)
    d = rep.to_dict()
    assert isinstance(d["row_sums"], list)
