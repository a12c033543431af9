import math

import numpy as np
import pytest

from oracles import central_diff, central_jacobian, dense_sqrt_hessian, random_instance, sqrt_loss
from sqrtlasso import LossKind, NonsmoothRegion, Problem
from sqrtlasso.loss import evaluate, gradient, hessian_apply, hessian_diag_and_deflation

SQ = LossKind.SQRT_L2
LS = LossKind.LEAST_SQUARES


def test_eval_hand_values(tiny):
    st = evaluate(tiny, SQ, np.zeros(1))
    np.testing.assert_array_equal(st.residual, [1.0, 1.0])
    assert st.loss_value == pytest.approx(1.0, abs=1e-15)
    assert evaluate(tiny, LS, np.zeros(1)).loss_value == pytest.approx(1.0, abs=1e-15)


def test_eval_is_residual_norm_over_root_n(rng):
    x = rng.standard_normal((8, 3))
    e = rng.standard_normal(8)
    st = evaluate(Problem(x, e), SQ, np.zeros(3))
    assert st.loss_value == pytest.approx(np.linalg.norm(e) / math.sqrt(8), rel=1e-14)


def test_gradient_hand_value(tiny):
    g = gradient(tiny, SQ, evaluate(tiny, SQ, np.zeros(1)))
    np.testing.assert_allclose(g, [-1.0], atol=1e-15)


def test_gradient_at_truth_is_sigma_free(rng):
    x, _, theta = random_instance(rng)
    eps = rng.standard_normal(50)
    grads = []
    for sigma in (0.1, 3.0):
        p = Problem(x, x @ theta + sigma * eps)
        grads.append(gradient(p, SQ, evaluate(p, SQ, theta)))
    expected = -x.T @ eps / (math.sqrt(50) * np.linalg.norm(eps))
    np.testing.assert_allclose(grads[0], expected, rtol=1e-9, atol=1e-12)
    np.testing.assert_allclose(grads[1], expected, rtol=1e-9, atol=1e-12)


@pytest.mark.parametrize("kind", [SQ, LS])
def test_gradient_matches_finite_differences(kind, rng):
    x, y, _ = random_instance(rng)
    p = Problem(x, y)
    theta = rng.standard_normal(20) * 0.3
    g = gradient(p, kind, evaluate(p, kind, theta))
    if kind is SQ:
        fd = central_diff(lambda t: sqrt_loss(x, y, t), theta)
    else:
        fd = central_diff(lambda t: np.sum((y - x @ t) ** 2) / 50, theta)
    assert np.linalg.norm(fd - g) <= 1e-6 * np.linalg.norm(g)


def test_hessian_hand_value():
    p = Problem([[1.0], [1.0]], [2.0, 0.0])
    st = evaluate(p, SQ, np.zeros(1))
    np.testing.assert_allclose(hessian_apply(p, SQ, st, [1.0]), [1 / (2 * math.sqrt(2))], rtol=1e-14)
    diag, w, c = hessian_diag_and_deflation(p, st)
    assert c == pytest.approx(1 / (2 * math.sqrt(2)), rel=1e-14)
    np.testing.assert_allclose(w, [1.0], rtol=1e-14)
    np.testing.assert_allclose(diag, [1 / (2 * math.sqrt(2))], rtol=1e-14)


def test_hessian_zero_vector(rng):
    x, y, _ = random_instance(rng)
    p = Problem(x, y)
    st = evaluate(p, SQ, np.zeros(20))
    np.testing.assert_array_equal(hessian_apply(p, SQ, st, np.zeros(20)), np.zeros(20))


@pytest.mark.parametrize("kind", [SQ, LS])
def test_hessian_matches_finite_differences(kind, rng):
    x, y, _ = random_instance(rng)
    p = Problem(x, y)
    theta = rng.standard_normal(20) * 0.3
    st = evaluate(p, kind, theta)
    jac = central_jacobian(lambda t: gradient(p, kind, evaluate(p, kind, t)), theta)
    v = rng.standard_normal(20)
    hv = hessian_apply(p, kind, st, v)
    assert np.linalg.norm(jac @ v - hv) <= 1e-5 * np.linalg.norm(hv)


def test_deflation_matches_dense_assembly(rng):
    x, y, _ = random_instance(rng)
    p = Problem(x, y)
    theta = rng.standard_normal(20) * 0.3
    st = evaluate(p, SQ, theta)
    diag, w, c = hessian_diag_and_deflation(p, st)
    dense = c * (x.T @ x - np.outer(w, w))
    np.testing.assert_allclose(dense, dense_sqrt_hessian(x, y, theta), rtol=1e-10, atol=1e-12)
    np.testing.assert_allclose(diag, np.diag(dense), rtol=1e-12)
    v = rng.standard_normal(20)
    assert np.abs(dense @ v - hessian_apply(p, SQ, st, v)).max() <= 1e-10


def test_deflation_vanishes_for_orthogonal_residual():
    x = np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]])
    p = Problem(x, [0.0, 0.0, 2.0])
    diag, w, c = hessian_diag_and_deflation(p, evaluate(p, SQ, np.zeros(2)))
    np.testing.assert_array_equal(w, [0.0, 0.0])
    np.testing.assert_allclose(diag, c * np.array([1.0, 1.0]))


def test_hessian_psd_and_nonnegative_diag(rng):
    for _ in range(100):
        n, d = rng.integers(3, 15), rng.integers(1, 10)
        x = rng.standard_normal((n, d))
        y = rng.standard_normal(n)
        p = Problem(x, y)
        st = evaluate(p, SQ, rng.standard_normal(d) * 0.1)
        v = rng.standard_normal(d)
        assert float(v @ hessian_apply(p, SQ, st, v)) >= -1e-12 * float(v @ v)
        diag, _, _ = hessian_diag_and_deflation(p, st)
        assert np.all(diag >= 0)


def test_scale_equivariance(rng):
    x, y, _ = random_instance(rng)
    theta = rng.standard_normal(20) * 0.3
    p1 = Problem(x, y)
    for kappa in (0.01, 7.5):
        pk = Problem(x, kappa * y)
        s1 = evaluate(p1, SQ, theta)
        sk = evaluate(pk, SQ, kappa * theta)
        assert sk.loss_value == pytest.approx(kappa * s1.loss_value, rel=1e-12)
        np.testing.assert_allclose(gradient(pk, SQ, sk), gradient(p1, SQ, s1), rtol=1e-10, atol=1e-13)


def test_nonsmooth_guard(tiny):
    theta = np.array([1.0])
    with pytest.raises(NonsmoothRegion):
        evaluate(tiny, SQ, theta)
    # least squares is smooth everywhere
    assert evaluate(tiny, LS, theta).loss_value == 0.0


def test_nonsmooth_guard_threshold():
    p = Problem([[1.0], [1.0]], [1.0, 1.0])
    floor = p.smooth_floor
    assert floor == pytest.approx(2e-8)
    # residual / sqrt(n) = |1 - theta|
    evaluate(p, SQ, np.array([1 - 2 * floor]))
    with pytest.raises(NonsmoothRegion):
        evaluate(p, SQ, np.array([1 - 0.5 * floor]))
