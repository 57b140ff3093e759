"""Adam optimizer contract tests."""

import numpy as np
import pytest

from paramnav.optim import Adam, AdamState, adam_step
from paramnav.tensor import NonFiniteError, ShapeError, Tensor


def test_first_step_closed_form():
    state = AdamState(lr=1e-4)
    (p,) = adam_step(state, [np.array([1.0], dtype=np.float32)],
                     [np.array([5.0], dtype=np.float32)])
    # bias correction makes the first step lr * g / (|g| + eps)
    assert abs(p[0] - (1.0 - 1e-4 * 5.0 / (5.0 + 1e-8))) <= 1e-6
    assert state.step == 1


def test_zero_gradient_is_noop():
    state = AdamState(lr=0.1)
    p = np.array([1.0, -2.0, 3.0], dtype=np.float32)
    for _ in range(5):
        (p,) = adam_step(state, [p], [np.zeros_like(p)])
    assert np.array_equal(p, [1.0, -2.0, 3.0])


def test_quadratic_convergence():
    # f(x) = (x - 3)^2 from x0 = 0, lr 0.1: well converged within 500 steps
    state = AdamState(lr=0.1)
    x = np.array([0.0], dtype=np.float32)
    for _ in range(500):
        (x,) = adam_step(state, [x], [2.0 * (x - 3.0)])
    assert abs(x[0] - 3.0) <= 0.01


def test_shape_preserving_and_mismatch():
    state = AdamState(lr=0.1)
    p = np.zeros((2, 3), dtype=np.float32)
    (out,) = adam_step(state, [p], [np.ones_like(p)])
    assert out.shape == p.shape
    with pytest.raises(ShapeError):
        adam_step(state, [p], [np.ones(5, dtype=np.float32)])


def test_non_finite_gradient_rejected():
    state = AdamState(lr=0.1)
    with pytest.raises(NonFiniteError):
        adam_step(state, [np.zeros(2, dtype=np.float32)],
                  [np.array([1.0, np.inf], dtype=np.float32)])


def test_adam_wrapper_updates_tensors():
    w = Tensor(np.zeros(1, dtype=np.float32), requires_grad=True)
    opt = Adam([w], lr=0.5)
    w.grad = np.array([1.0], dtype=np.float32)
    opt.step()
    assert w.data[0] != 0.0
    opt.zero_grad()
    assert w.grad is None
