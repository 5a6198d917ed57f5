import numpy as np
import pytest

from abae_reviews.numerics import (AdamState, adam_step, cosine_similarity,
                                   finite_difference_check, softmax, unit_rows)


def test_softmax_examples():
    assert np.allclose(softmax([0.0, 0.0]), [0.5, 0.5])
    big = softmax([1000.0, 0.0])
    assert np.all(np.isfinite(big)) and big[0] == pytest.approx(1.0) and big[1] < 1e-12
    assert np.allclose(softmax([4.0, 1.0]), [0.9526, 0.0474], atol=1e-4)


def test_softmax_rows_and_empty():
    X = np.array([[1.0, 2.0, 3.0], [0.0, 0.0, 0.0]])
    assert np.allclose(softmax(X, axis=1).sum(axis=1), 1.0)
    with pytest.raises(ValueError):
        softmax([])


def test_cosine_examples():
    assert cosine_similarity([1.0, 2.0], [1.0, 2.0]) == pytest.approx(1.0)
    assert cosine_similarity([1.0, 0.0], [0.0, 3.0]) == pytest.approx(0.0)
    assert cosine_similarity([1.0, 1.0], [1.0, 0.0]) == pytest.approx(2 ** -0.5, abs=1e-6)
    with pytest.raises(ValueError, match="zero-norm"):
        cosine_similarity([0.0, 0.0], [1.0, 0.0])


def test_unit_rows():
    U = unit_rows(np.array([[3.0, 4.0], [0.0, 2.0]]))
    assert np.allclose(np.linalg.norm(U, axis=1), 1.0)


def test_adam_zero_grad_keeps_params():
    p = {"x": np.array([1.0, -2.0])}
    adam_step(p, {"x": np.zeros(2)}, AdamState())
    assert np.array_equal(p["x"], [1.0, -2.0])


def test_adam_first_step_magnitude_is_lr():
    p = {"x": np.array([5.0])}
    adam_step(p, {"x": np.array([0.37])}, AdamState(lr=0.01))
    assert 5.0 - p["x"][0] == pytest.approx(0.01, rel=1e-5)


def test_adam_reduces_quadratic():
    p = {"x": np.array([3.0])}
    st = AdamState(lr=0.1)
    for _ in range(2):
        adam_step(p, {"x": 2 * p["x"]}, st)
    assert p["x"][0] ** 2 < 9.0


def test_adam_shape_mismatch():
    with pytest.raises(ValueError, match="shape mismatch"):
        adam_step({"x": np.zeros(2)}, {"x": np.zeros(3)}, AdamState())


def test_fd_quadratic_and_constant():
    p = {"x": np.array([3.0])}
    rep = finite_difference_check(lambda: float(p["x"][0] ** 2), p, {"x": np.array([6.0])})
    assert abs(rep.numeric[0] - 6.0) < 1e-6 and rep.ok(1e-8)
    rep = finite_difference_check(lambda: 1.0, p, {"x": np.array([0.0])})
    assert rep.numeric[0] == 0.0


def test_fd_detects_wrong_gradient():
    p = {"x": np.array([1.0, 2.0])}
    rep = finite_difference_check(lambda: float(np.sum(p["x"] ** 2)), p, {"x": np.array([2.0, 0.0])})
    assert not rep.ok(1e-4) and rep.worst == ("x", 1)


def test_fd_restores_params_and_rejects_nan():
    p = {"x": np.array([1.0, 2.0])}
    finite_difference_check(lambda: float(np.sum(p["x"])), p, {"x": np.ones(2)})
    assert np.array_equal(p["x"], [1.0, 2.0])
    with pytest.raises(ValueError, match="non-finite"):
        finite_difference_check(lambda: float("nan"), p, {"x": np.ones(2)})
