import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from conftest import small_dataset
from tmx.metrics import extract_T, q_error
from tmx.model import CouplingMatrix, structural_mask
from tmx.optimizer import OptimizerConfig, evaluate, init_M0, initial_beta, maximize
from tmx.pseudolikelihood import FVariant, ModelDomainError, NotShiftedError, eval_total_L


@pytest.fixture(scope="module")
def noisy():
    return small_dataset(w=2, s=0.5, m=5000, sigma=0.05, seed=3)


@pytest.fixture(scope="module")
def fitted(noisy):
    _, ds = noisy
    return maximize(ds, init_M0(2, 0.1))


def test_initial_beta_rules():
    assert initial_beta(0.1) == pytest.approx(50.0)
    assert initial_beta(0.1, "half_over_sigma") == pytest.approx(5.0)
    with pytest.raises(ValueError):
        initial_beta(0.0)
    with pytest.raises(ValueError):
        initial_beta(0.1, "other")


def test_initial_model_shape():
    m = init_M0(2, 0.1)
    np.testing.assert_array_equal(m.mask, structural_mask(8))
    np.testing.assert_allclose(extract_T(m), 0.25)


def test_recovers_channel(noisy, fitted):
    t, _ = noisy
    assert fitted.converged
    # Q is the square root of the relative error: 0.2 means about 4 percent
    assert q_error(t.T, extract_T(fitted.model)) <= 0.2


def test_noiseless_data_gives_accurate_channel():
    t, ds = small_dataset(w=2, s=0.5, m=5000, sigma=0.0, seed=1)
    res = maximize(ds, init_M0(2, 0.1))
    assert q_error(t.T, extract_T(res.model)) <= 0.05


def test_history_is_monotone(fitted):
    h = np.array(fitted.history)
    assert np.all(np.diff(h) >= -1e-12 * np.abs(h[1:]))
    assert fitted.l_value == h[-1]


def test_restart_at_optimum_takes_no_iterations(noisy, fitted):
    _, ds = noisy
    again = maximize(ds, fitted.model)
    assert again.iterations == 0
    assert again.l_value == pytest.approx(fitted.l_value, rel=1e-15)


def test_independent_starts_agree(noisy, fitted):
    # the objective is concave, so any start reaches the same optimum
    _, ds = noisy
    tight = OptimizerConfig(grad_tol=1e-10, rel_tol=1e-300)  # gradient test only
    a = maximize(ds, init_M0(2, 0.1), cfg=tight)
    b = maximize(ds, init_M0(2, 0.5, "half_over_sigma"), cfg=tight)
    assert b.l_value == pytest.approx(a.l_value, rel=1e-12)
    np.testing.assert_allclose(extract_T(b.model), extract_T(a.model), atol=1e-7)


def test_mask_is_preserved(noisy):
    _, ds = noisy
    m0 = init_M0(2, 0.1)
    mask = m0.mask.copy()
    mask[5, 0] = mask[0, 5] = False
    res = maximize(ds, m0.with_mask(mask))
    np.testing.assert_array_equal(res.model.mask, mask)
    assert res.model.entries[5, 0] == 0.0


def test_gaussian_mle_for_disconnected_model(noisy):
    _, ds = noisy
    m0 = CouplingMatrix(-10 * np.eye(ds.n), np.eye(ds.n, dtype=bool))
    res = maximize(ds, m0, cfg=OptimizerConfig(grad_tol=1e-12))
    var = (ds.values**2).mean(axis=0)
    np.testing.assert_allclose(-np.diag(res.model.entries), 1 / (2 * var), rtol=1e-6)


def test_free_block_leaves_others_untouched(noisy):
    _, ds = noisy
    m0 = init_M0(2, 0.1)
    free = np.zeros(m0.n_params, bool)
    free[:5] = True
    res = maximize(ds, m0, free=free)
    x0, x1 = m0.params(), res.model.params()
    np.testing.assert_array_equal(x1[~free], x0[~free])
    assert np.any(x1[free] != x0[free])
    _, g = evaluate(ds, res.model)
    assert np.max(np.abs(g[free])) <= 1e-6
    with pytest.raises(ValueError):
        maximize(ds, m0, free=free[:-1])


def test_bounded_variant_converges(noisy):
    _, ds = noisy
    v = FVariant("SymUnit")
    res = maximize(ds, init_M0(2, 0.1), v)
    assert res.converged
    assert res.l_value == pytest.approx(eval_total_L(res.model, ds, v), rel=1e-13)


def test_requires_shifted_data_for_symmetric_variants():
    _, raw = small_dataset(w=2, m=100, shifted=False)
    with pytest.raises(NotShiftedError):
        maximize(raw, init_M0(2, 0.1))


def test_rejects_infeasible_start(noisy):
    _, ds = noisy
    bad = CouplingMatrix(np.eye(ds.n), np.eye(ds.n, dtype=bool))
    with pytest.raises(ModelDomainError):
        maximize(ds, bad)


def test_iteration_cap(noisy):
    _, ds = noisy
    res = maximize(ds, init_M0(2, 0.1), cfg=OptimizerConfig(max_iters=3))
    assert res.iterations == 3 and res.status == "max_iters" and not res.converged


@settings(max_examples=8, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_optimum_beats_truth(seed):
    # the maximiser can never score below the generating parameters
    from tmx.model import assemble_M

    t, ds = small_dataset(w=2, s=0.5, m=400, sigma=0.05, seed=seed)
    assume(np.all(t.T.sum(axis=0) > 0))  # an unused input has A = 0 in the truth
    res = maximize(ds, init_M0(2, 0.1))
    truth = assemble_M(t.T, 1 / (2 * 0.05**2))
    assert res.l_value >= eval_total_L(truth, ds) - 1e-9


def test_config_validation():
    for kw in (dict(memory=0), dict(grad_tol=0), dict(c1=0.9, c2=0.1)):
        with pytest.raises(ValueError):
            OptimizerConfig(**kw)
