"""Adam with a constant learning rate, the only optimizer used anywhere."""

from dataclasses import dataclass, field

import numpy as np

from .tensor import F32, NonFiniteError, ShapeError, Tensor


@dataclass
class AdamState:
    """First/second moment estimates and the step counter."""

    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)


def adam_step(state: AdamState, params: list, grads: list) -> list:
    """One bias-corrected Adam update; mutates ``state``, returns new params.

    ``params`` and ``grads`` are matching lists of numpy arrays; moments are
    lazily initialized to zeros on the first call.
    """
    if len(params) != len(grads):
        raise ShapeError(f"{len(params)} params vs {len(grads)} grads")
    if not state.m:
        state.m = [np.zeros_like(p) for p in params]
        state.v = [np.zeros_like(p) for p in params]
    state.step += 1
    b1, b2 = F32(state.beta1), F32(state.beta2)
    bc1 = F32(1.0 - state.beta1 ** state.step)
    bc2 = F32(1.0 - state.beta2 ** state.step)
    lr, eps = F32(state.lr), F32(state.eps)
    out = []
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if g.shape != p.shape:
            raise ShapeError(f"grad shape {g.shape} vs param shape {p.shape}")
        if not np.all(np.isfinite(g)):
            raise NonFiniteError("non-finite gradient in adam_step")
        m *= b1
        m += (F32(1.0) - b1) * g
        v *= b2
        v += (F32(1.0) - b2) * (g * g)
        out.append(p - lr * (m / bc1) / (np.sqrt(v / bc2) + eps))
    return out


class Adam:
    """In-place Adam over a list of parameter Tensors."""

    def __init__(self, params: list[Tensor], lr: float):
        self.params = list(params)
        self.state = AdamState(lr=lr)

    def step(self):
        grads = [p.grad if p.grad is not None else np.zeros_like(p.data)
                 for p in self.params]
        new = adam_step(self.state, [p.data for p in self.params], grads)
        for p, n in zip(self.params, new):
            p.data = n

    def zero_grad(self):
        for p in self.params:
            p.grad = None
